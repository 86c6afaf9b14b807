//! Parameters, forward pass, backward pass, and top-k prediction.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lstm::{self, CellParams};
use super::{ModelError, ModelHyper, ModelInput};
use crate::embedding::{EmbeddingTable, PAD_INDEX};
use crate::vocab::{TypeVocabulary, UNKNOWN_INDEX};

#[derive(Debug, Clone, PartialEq)]
pub struct BiParams {
    pub fwd: CellParams,
    pub bwd: CellParams,
}

impl BiParams {
    fn zeros(input_dim: usize, hidden: usize) -> Self {
        BiParams {
            fwd: CellParams::zeros(input_dim, hidden),
            bwd: CellParams::zeros(input_dim, hidden),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub hyper: ModelHyper,
    pub id_enc: BiParams,
    pub tok_enc: BiParams,
    pub com_enc: BiParams,
    /// `[concat_dim, vocab]`.
    pub dense_w: Array2<f64>,
    pub dense_b: Array1<f64>,
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParameters;

impl ModelParameters {
    pub fn zeros(hyper: &ModelHyper) -> Self {
        ModelParameters {
            hyper: hyper.clone(),
            id_enc: BiParams::zeros(hyper.code_dim, hyper.hidden),
            tok_enc: BiParams::zeros(hyper.code_dim, hyper.hidden),
            com_enc: BiParams::zeros(hyper.word_dim, hyper.hidden),
            dense_w: Array2::zeros((hyper.concat_dim(), hyper.vocab_size)),
            dense_b: Array1::zeros(hyper.vocab_size),
        }
    }

    /// Seeded uniform initialization; forget-gate biases start at 1.
    pub fn init(hyper: &ModelHyper, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(hyper);
        let h = hyper.hidden;
        let scale = 1.0 / (h as f64).sqrt();
        let fill_cell = |cell: &mut CellParams, rng: &mut ChaCha8Rng| {
            for v in cell.w_x.iter_mut().chain(cell.w_h.iter_mut()) {
                *v = rng.gen_range(-scale..scale);
            }
            for b in cell.b.slice_mut(s![h..2 * h]).iter_mut() {
                *b = 1.0;
            }
        };
        fill_cell(&mut p.id_enc.fwd, &mut rng);
        fill_cell(&mut p.id_enc.bwd, &mut rng);
        fill_cell(&mut p.tok_enc.fwd, &mut rng);
        fill_cell(&mut p.tok_enc.bwd, &mut rng);
        fill_cell(&mut p.com_enc.fwd, &mut rng);
        fill_cell(&mut p.com_enc.bwd, &mut rng);
        let dscale = 1.0 / (hyper.concat_dim() as f64).sqrt();
        for v in p.dense_w.iter_mut() {
            *v = rng.gen_range(-dscale..dscale);
        }
        p
    }

    /// Deterministic flat view of every parameter, for the optimizer and
    /// for finite-difference checks.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for cell in self.cells() {
            out.extend(cell.w_x.iter());
            out.extend(cell.w_h.iter());
            out.extend(cell.b.iter());
        }
        out.extend(self.dense_w.iter());
        out.extend(self.dense_b.iter());
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        let mut take = |arr: &mut [f64]| {
            for v in arr {
                *v = *it.next().expect("flat vector too short");
            }
        };
        for cell in [
            &mut self.id_enc.fwd,
            &mut self.id_enc.bwd,
            &mut self.tok_enc.fwd,
            &mut self.tok_enc.bwd,
            &mut self.com_enc.fwd,
            &mut self.com_enc.bwd,
        ] {
            take(cell.w_x.as_slice_mut().unwrap());
            take(cell.w_h.as_slice_mut().unwrap());
            take(cell.b.as_slice_mut().unwrap());
        }
        take(self.dense_w.as_slice_mut().unwrap());
        take(self.dense_b.as_slice_mut().unwrap());
        assert!(it.next().is_none(), "flat vector too long");
    }

    fn cells(&self) -> [&CellParams; 6] {
        [
            &self.id_enc.fwd,
            &self.id_enc.bwd,
            &self.tok_enc.fwd,
            &self.tok_enc.bwd,
            &self.com_enc.fwd,
            &self.com_enc.bwd,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.cells()
            .iter()
            .map(|c| c.w_x.len() + c.w_h.len() + c.b.len())
            .sum::<usize>()
            + self.dense_w.len()
            + self.dense_b.len()
    }

    /// Named parameter blocks, for checkpoints and diagnostics.
    pub fn block_names() -> &'static [&'static str] {
        &[
            "id_fwd", "id_bwd", "tok_fwd", "tok_bwd", "com_fwd", "com_bwd", "dense",
        ]
    }
}

fn check_input(hyper: &ModelHyper, input: &ModelInput) -> Result<(), ModelError> {
    if input.id_seq.len() != hyper.id_len {
        return Err(ModelError::ShapeMismatch(format!(
            "id_seq has {} entries, expected {}",
            input.id_seq.len(),
            hyper.id_len
        )));
    }
    if input.token_seq.len() != hyper.token_total() {
        return Err(ModelError::ShapeMismatch(format!(
            "token_seq has {} entries, expected {}",
            input.token_seq.len(),
            hyper.token_total()
        )));
    }
    if input.comment_seq.len() != hyper.comment_len {
        return Err(ModelError::ShapeMismatch(format!(
            "comment_seq has {} entries, expected {}",
            input.comment_seq.len(),
            hyper.comment_len
        )));
    }
    if input.type_mask.len() != hyper.vocab_size {
        return Err(ModelError::ShapeMismatch(format!(
            "type_mask has {} entries, expected {}",
            input.type_mask.len(),
            hyper.vocab_size
        )));
    }
    Ok(())
}

/// Embedded steps plus masks for one channel, in both direction orders.
struct ChannelBatch {
    xs: Vec<Array2<f64>>,
    masks: Vec<Array2<f64>>,
    all_pad: bool,
}

fn gather_channel(
    inputs: &[&ModelInput],
    pick: impl Fn(&ModelInput) -> &[usize],
    table: &EmbeddingTable,
    len: usize,
) -> ChannelBatch {
    let batch = inputs.len();
    let dim = table.dim;
    let mut xs = Vec::with_capacity(len);
    let mut masks = Vec::with_capacity(len);
    let mut any_real = false;
    for t in 0..len {
        let mut x = Array2::<f64>::zeros((batch, dim));
        let mut m = Array2::<f64>::zeros((batch, 1));
        for (bi, input) in inputs.iter().enumerate() {
            let idx = pick(input)[t];
            if idx != PAD_INDEX {
                x.row_mut(bi).assign(&ndarray::ArrayView1::from(table.vector(idx)));
                m[[bi, 0]] = 1.0;
                any_real = true;
            }
        }
        xs.push(x);
        masks.push(m);
    }
    ChannelBatch {
        xs,
        masks,
        all_pad: !any_real,
    }
}

fn reversed(ch: &ChannelBatch) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
    (
        ch.xs.iter().rev().cloned().collect(),
        ch.masks.iter().rev().cloned().collect(),
    )
}

struct EncoderRun {
    out: Array2<f64>, // [B, 2H]
    fwd_cache: Option<lstm::LstmCache>,
    bwd_cache: Option<lstm::LstmCache>,
    xs_bwd: Vec<Array2<f64>>,
    masks_bwd: Vec<Array2<f64>>,
}

fn run_encoder(params: &BiParams, ch: &ChannelBatch, batch: usize, hidden: usize, enabled: bool) -> EncoderRun {
    if !enabled || ch.all_pad {
        return EncoderRun {
            out: Array2::zeros((batch, 2 * hidden)),
            fwd_cache: None,
            bwd_cache: None,
            xs_bwd: Vec::new(),
            masks_bwd: Vec::new(),
        };
    }
    let (h_fwd, fwd_cache) = lstm::forward(&params.fwd, &ch.xs, &ch.masks);
    let (xs_bwd, masks_bwd) = reversed(ch);
    let (h_bwd, bwd_cache) = lstm::forward(&params.bwd, &xs_bwd, &masks_bwd);
    let mut out = Array2::zeros((batch, 2 * hidden));
    out.slice_mut(s![.., 0..hidden]).assign(&h_fwd);
    out.slice_mut(s![.., hidden..2 * hidden]).assign(&h_bwd);
    EncoderRun {
        out,
        fwd_cache: Some(fwd_cache),
        bwd_cache: Some(bwd_cache),
        xs_bwd,
        masks_bwd,
    }
}

pub struct ForwardCache {
    id: ChannelBatch,
    tok: ChannelBatch,
    com: ChannelBatch,
    id_run: EncoderRun,
    tok_run: EncoderRun,
    com_run: EncoderRun,
    z: Array2<f64>,
    pub probs: Array2<f64>,
}

/// Batched forward pass; `probs` rows sum to one.
pub fn forward_batch(
    params: &ModelParameters,
    inputs: &[&ModelInput],
    code_emb: &EmbeddingTable,
    word_emb: &EmbeddingTable,
) -> Result<ForwardCache, ModelError> {
    let hyper = &params.hyper;
    for input in inputs {
        check_input(hyper, input)?;
    }
    if code_emb.dim != hyper.code_dim || word_emb.dim != hyper.word_dim {
        return Err(ModelError::ShapeMismatch(format!(
            "embedding dims ({}, {}) do not match the model ({}, {})",
            code_emb.dim, word_emb.dim, hyper.code_dim, hyper.word_dim
        )));
    }
    let batch = inputs.len();
    let h = hyper.hidden;
    let id = gather_channel(inputs, |i| &i.id_seq, code_emb, hyper.id_len);
    let tok = gather_channel(inputs, |i| &i.token_seq, code_emb, hyper.token_total());
    let com = gather_channel(inputs, |i| &i.comment_seq, word_emb, hyper.comment_len);

    let id_run = run_encoder(&params.id_enc, &id, batch, h, hyper.ablation.identifiers);
    let tok_run = run_encoder(&params.tok_enc, &tok, batch, h, hyper.ablation.tokens);
    let com_run = run_encoder(&params.com_enc, &com, batch, h, hyper.ablation.comments);

    let mut z = Array2::<f64>::zeros((batch, hyper.concat_dim()));
    z.slice_mut(s![.., 0..2 * h]).assign(&id_run.out);
    z.slice_mut(s![.., 2 * h..4 * h]).assign(&tok_run.out);
    z.slice_mut(s![.., 4 * h..6 * h]).assign(&com_run.out);
    if hyper.ablation.type_mask {
        for (bi, input) in inputs.iter().enumerate() {
            for (vi, v) in input.type_mask.iter().enumerate() {
                z[[bi, 6 * h + vi]] = *v;
            }
        }
    }

    let mut logits = z.dot(&params.dense_w);
    logits += &params.dense_b;
    // Row-wise stable softmax.
    let mut probs = logits;
    for mut row in probs.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    Ok(ForwardCache {
        id,
        tok,
        com,
        id_run,
        tok_run,
        com_run,
        z,
        probs,
    })
}

/// Mean cross-entropy loss and full parameter gradients for a batch.
pub fn backward_batch(
    params: &ModelParameters,
    cache: &ForwardCache,
    labels: &[usize],
) -> (f64, Gradients) {
    let hyper = &params.hyper;
    let batch = labels.len();
    let h = hyper.hidden;
    let mut loss = 0.0;
    let mut dlogits = cache.probs.clone();
    for (bi, &y) in labels.iter().enumerate() {
        loss -= cache.probs[[bi, y]].max(1e-300).ln();
        dlogits[[bi, y]] -= 1.0;
    }
    loss /= batch as f64;
    dlogits.mapv_inplace(|v| v / batch as f64);

    let mut grads = Gradients::zeros(hyper);
    grads.dense_w = cache.z.t().dot(&dlogits);
    grads.dense_b = dlogits.sum_axis(Axis(0));
    let dz = dlogits.dot(&params.dense_w.t());

    let backprop_channel =
        |run: &EncoderRun, ch: &ChannelBatch, p: &BiParams, g: &mut BiParams, offset: usize| {
            let (Some(fwd_cache), Some(bwd_cache)) = (&run.fwd_cache, &run.bwd_cache) else {
                return;
            };
            let d_fwd = dz.slice(s![.., offset..offset + h]).to_owned();
            let d_bwd = dz.slice(s![.., offset + h..offset + 2 * h]).to_owned();
            g.fwd = lstm::backward(&p.fwd, &ch.xs, &ch.masks, fwd_cache, &d_fwd);
            g.bwd = lstm::backward(&p.bwd, &run.xs_bwd, &run.masks_bwd, bwd_cache, &d_bwd);
        };
    backprop_channel(&cache.id_run, &cache.id, &params.id_enc, &mut grads.id_enc, 0);
    backprop_channel(
        &cache.tok_run,
        &cache.tok,
        &params.tok_enc,
        &mut grads.tok_enc,
        2 * h,
    );
    backprop_channel(
        &cache.com_run,
        &cache.com,
        &params.com_enc,
        &mut grads.com_enc,
        4 * h,
    );
    (loss, grads)
}

/// Probability distribution over the vocabulary for one input.
pub fn forward(
    input: &ModelInput,
    params: &ModelParameters,
    code_emb: &EmbeddingTable,
    word_emb: &EmbeddingTable,
) -> Result<Vec<f64>, ModelError> {
    let cache = forward_batch(params, &[input], code_emb, word_emb)?;
    Ok(cache.probs.row(0).to_vec())
}

/// Rank the distribution: top-k types above the threshold, `unknown`
/// excluded. If `unknown` is the overall argmax, no suggestion is made.
pub fn rank_types(
    probs: &[f64],
    vocab: &TypeVocabulary,
    k: usize,
    threshold: f64,
) -> (Vec<(String, f64)>, bool) {
    let argmax = probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(UNKNOWN_INDEX);
    if argmax == UNKNOWN_INDEX {
        return (Vec::new(), true);
    }
    let mut indexed: Vec<(usize, f64)> = probs
        .iter()
        .enumerate()
        .filter(|(i, p)| *i != UNKNOWN_INDEX && **p >= threshold)
        .map(|(i, p)| (i, *p))
        .collect();
    indexed.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    indexed.truncate(k);
    (
        indexed
            .into_iter()
            .map(|(i, p)| (vocab.decode(i).to_string(), p))
            .collect(),
        false,
    )
}

/// Forward one input and rank the result.
pub fn predict_topk(
    input: &ModelInput,
    params: &ModelParameters,
    code_emb: &EmbeddingTable,
    word_emb: &EmbeddingTable,
    vocab: &TypeVocabulary,
    k: usize,
    threshold: f64,
) -> Result<(Vec<(String, f64)>, bool), ModelError> {
    let probs = forward(input, params, code_emb, word_emb)?;
    Ok(rank_types(&probs, vocab, k, threshold))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::config::Ablation;

    pub(crate) fn tiny_hyper(vocab_size: usize) -> ModelHyper {
        ModelHyper {
            hidden: 4,
            code_dim: 3,
            word_dim: 3,
            id_len: 3,
            token_len: 3,
            max_windows: 1,
            comment_len: 3,
            vocab_size,
            ablation: Ablation::default(),
        }
    }

    pub(crate) fn tiny_table(kind: crate::embedding::EmbeddingKind, dim: usize, seed: u64) -> EmbeddingTable {
        use crate::embedding::{train_embeddings, EmbeddingConfig};
        let cfg = EmbeddingConfig {
            dim,
            window: 2,
            negatives: 2,
            epochs: 2,
            min_count: 1,
            initial_lr: 0.05,
            seed,
        };
        let sentences: Vec<Vec<String>> = (0..6)
            .map(|i| {
                vec![
                    format!("w{}", i % 5),
                    format!("w{}", (i + 1) % 5),
                    format!("w{}", (i + 2) % 5),
                ]
            })
            .collect();
        train_embeddings(&sentences, kind, &cfg).unwrap()
    }

    pub(crate) fn tiny_input(hyper: &ModelHyper, fill: usize) -> ModelInput {
        ModelInput {
            id_seq: vec![fill; hyper.id_len],
            token_seq: vec![fill; hyper.token_total()],
            comment_seq: vec![fill; hyper.comment_len],
            type_mask: vec![0.0; hyper.vocab_size],
        }
    }

    #[test]
    fn zero_params_give_uniform_distribution() {
        let hyper = tiny_hyper(6);
        let params = ModelParameters::zeros(&hyper);
        let code = tiny_table(crate::embedding::EmbeddingKind::Code, 3, 1);
        let word = tiny_table(crate::embedding::EmbeddingKind::Word, 3, 2);
        let input = tiny_input(&hyper, 3);
        let probs = forward(&input, &params, &code, &word).unwrap();
        for p in &probs {
            assert!((p - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn boosted_logit_dominates() {
        let hyper = tiny_hyper(6);
        let mut params = ModelParameters::zeros(&hyper);
        params.dense_b[3] = 10.0;
        let code = tiny_table(crate::embedding::EmbeddingKind::Code, 3, 1);
        let word = tiny_table(crate::embedding::EmbeddingKind::Word, 3, 2);
        let input = tiny_input(&hyper, 3);
        let probs = forward(&input, &params, &code, &word).unwrap();
        let argmax = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 3);
    }

    #[test]
    fn probabilities_normalize_over_random_draws() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let hyper = tiny_hyper(6);
        let code = tiny_table(crate::embedding::EmbeddingKind::Code, 3, 1);
        let word = tiny_table(crate::embedding::EmbeddingKind::Word, 3, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..1000 {
            let params = ModelParameters::init(&hyper, trial);
            let input = ModelInput {
                id_seq: (0..hyper.id_len).map(|_| rng.gen_range(0..code.len())).collect(),
                token_seq: (0..hyper.token_total())
                    .map(|_| rng.gen_range(0..code.len()))
                    .collect(),
                comment_seq: (0..hyper.comment_len)
                    .map(|_| rng.gen_range(0..word.len()))
                    .collect(),
                type_mask: (0..hyper.vocab_size).map(|_| f64::from(rng.gen_range(0..2))).collect(),
            };
            let probs = forward(&input, &params, &code, &word).unwrap();
            let sum: f64 = probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "sum {sum}");
            assert!(probs.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn padding_neutrality_on_the_full_model() {
        // Cell parameters are sequence-length independent, so the same
        // weights run under longer configured lengths; extra trailing pads
        // must not move the distribution.
        let hyper = tiny_hyper(6);
        let params = ModelParameters::init(&hyper, 9);
        let mut longer = params.clone();
        longer.hyper.id_len = 7;
        longer.hyper.token_len = 5;
        longer.hyper.max_windows = 2;
        longer.hyper.comment_len = 8;
        let code = tiny_table(crate::embedding::EmbeddingKind::Code, 3, 1);
        let word = tiny_table(crate::embedding::EmbeddingKind::Word, 3, 2);
        let a = ModelInput {
            id_seq: vec![3, 4, PAD_INDEX],
            token_seq: vec![3, PAD_INDEX, PAD_INDEX],
            comment_seq: vec![4, 3, PAD_INDEX],
            type_mask: vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0],
        };
        let pad = |seq: &[usize], len: usize| {
            let mut s = seq.to_vec();
            s.resize(len, PAD_INDEX);
            s
        };
        let b = ModelInput {
            id_seq: pad(&a.id_seq, 7),
            token_seq: pad(&a.token_seq, 10),
            comment_seq: pad(&a.comment_seq, 8),
            type_mask: a.type_mask.clone(),
        };
        let pa = forward(&a, &params, &code, &word).unwrap();
        let pb = forward(&b, &longer, &code, &word).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let hyper = tiny_hyper(6);
        let params = ModelParameters::zeros(&hyper);
        let code = tiny_table(crate::embedding::EmbeddingKind::Code, 3, 1);
        let word = tiny_table(crate::embedding::EmbeddingKind::Word, 3, 2);
        let mut input = tiny_input(&hyper, 3);
        input.id_seq.push(0);
        assert!(matches!(
            forward(&input, &params, &code, &word),
            Err(ModelError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn rank_types_filters_unknown_and_threshold() {
        // Distribution [unknown: 0.1, int: 0.6, str: 0.2, None: 0.1]:
        // unknown is not the argmax, so suggestions are made; unknown
        // itself never appears in them.
        let records = crate::extract::extract_functions(
            "def a(x: int, y: str, z: None):\n    return x\n",
            "a.py",
        )
        .unwrap();
        let vocab = crate::vocab::build_type_vocabulary(&records, 10).unwrap();
        assert_eq!(vocab.types(), &["unknown", "None", "int", "str"]);
        let probs = vec![0.1, 0.1, 0.6, 0.2];
        let (ranked, abstain) = rank_types(&probs, &vocab, 2, 0.0);
        assert!(!abstain);
        assert_eq!(ranked.len(), 2);
        assert_eq!(ranked[0].0, "int");
        assert!((ranked[0].1 - 0.6).abs() < 1e-12);
        assert_eq!(ranked[1].0, "str");
        assert!((ranked[1].1 - 0.2).abs() < 1e-12);
        let (ranked, _) = rank_types(&probs, &vocab, 2, 0.5);
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].0, "int");
    }

    #[test]
    fn unknown_argmax_abstains() {
        let records = crate::extract::extract_functions(
            "def a(x: int, y: str):\n    return x\n",
            "a.py",
        )
        .unwrap();
        let vocab = crate::vocab::build_type_vocabulary(&records, 10).unwrap();
        let probs = vec![0.7, 0.2, 0.1];
        let (ranked, abstain) = rank_types(&probs, &vocab, 2, 0.0);
        assert!(abstain);
        assert!(ranked.is_empty());
    }

    #[test]
    fn flatten_assign_round_trip() {
        let hyper = tiny_hyper(5);
        let a = ModelParameters::init(&hyper, 3);
        let mut b = ModelParameters::zeros(&hyper);
        b.assign_flat(&a.flatten());
        assert_eq!(a, b);
    }
}
