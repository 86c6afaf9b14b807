//! Skip-gram word embeddings with negative sampling, trained from scratch.
//!
//! Two tables are trained per corpus: a code embedding over token streams
//! and normalized identifier sequences, and a word embedding over comment
//! words. Training is single-threaded and fully determined by the seed.
//! `<pad>` is pinned to the zero vector; `<unk>` and `<sep>` get fixed
//! seeded vectors and serve out-of-vocabulary lookups and sequence
//! separators.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const SEP: &str = "<sep>";
pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;
pub const SEP_INDEX: usize = 2;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("need at least one sentence of length 2 with in-vocabulary words")]
    InsufficientData,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} is not an embedding checkpoint: {reason}")]
    Format { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Code,
    Word,
}

impl EmbeddingKind {
    fn tag(self) -> u8 {
        match self {
            EmbeddingKind::Code => 0,
            EmbeddingKind::Word => 1,
        }
    }

    fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(EmbeddingKind::Code),
            1 => Some(EmbeddingKind::Word),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub kind: EmbeddingKind,
    pub dim: usize,
    words: Vec<String>,
    /// Row-major `[words.len() * dim]`.
    vectors: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Index for a word; unseen words map to `<unk>`.
    pub fn index_of(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK_INDEX)
    }

    pub fn vector(&self, index: usize) -> &[f64] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub fn lookup(&self, word: &str) -> &[f64] {
        self.vector(self.index_of(word))
    }

    const MAGIC: &'static [u8; 4] = b"TEMB";
    const VERSION: u32 = 1;

    pub fn save(&self, path: &Path) -> Result<(), EmbeddingError> {
        let io_err = |source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        w.write_all(Self::MAGIC).map_err(io_err)?;
        w.write_u32::<LittleEndian>(Self::VERSION).map_err(io_err)?;
        w.write_u8(self.kind.tag()).map_err(io_err)?;
        w.write_u32::<LittleEndian>(self.dim as u32).map_err(io_err)?;
        w.write_u32::<LittleEndian>(self.words.len() as u32)
            .map_err(io_err)?;
        for word in &self.words {
            w.write_u32::<LittleEndian>(word.len() as u32).map_err(io_err)?;
            w.write_all(word.as_bytes()).map_err(io_err)?;
        }
        for v in &self.vectors {
            w.write_f64::<LittleEndian>(*v).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let io_err = |source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        };
        let fmt = |reason: &str| EmbeddingError::Format {
            path: path.display().to_string(),
            reason: reason.to_string(),
        };
        let mut r = std::io::BufReader::new(std::fs::File::open(path).map_err(io_err)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != Self::MAGIC {
            return Err(fmt("bad magic"));
        }
        if r.read_u32::<LittleEndian>().map_err(io_err)? != Self::VERSION {
            return Err(fmt("unsupported version"));
        }
        let kind = EmbeddingKind::from_tag(r.read_u8().map_err(io_err)?).ok_or_else(|| fmt("bad kind"))?;
        let dim = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let count = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let mut words = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(io_err)?;
            words.push(String::from_utf8(buf).map_err(|_| fmt("non-utf8 word"))?);
        }
        let mut vectors = vec![0.0; count * dim];
        for v in vectors.iter_mut() {
            *v = r.read_f64::<LittleEndian>().map_err(io_err)?;
        }
        let index = words
            .iter()
            .enumerate()
            .map(|(i, word)| (word.clone(), i))
            .collect();
        Ok(EmbeddingTable {
            kind,
            dim,
            words,
            vectors,
            index,
        })
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: usize,
    pub initial_lr: f64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        let hp = crate::config::Hyperparams::default();
        EmbeddingConfig {
            dim: hp.embed_dim,
            window: hp.embed_window,
            negatives: hp.embed_negatives,
            epochs: hp.embed_epochs,
            min_count: hp.embed_min_count,
            initial_lr: 0.025,
            seed: 42,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    // Clamp like the classic implementation; saturated pairs contribute
    // nothing anyway.
    if x > 6.0 {
        1.0
    } else if x < -6.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Train a skip-gram model with negative sampling over the sentences.
/// Deterministic for a fixed seed.
pub fn train_embeddings(
    sentences: &[Vec<String>],
    kind: EmbeddingKind,
    config: &EmbeddingConfig,
) -> Result<EmbeddingTable, EmbeddingError> {
    if !sentences.iter().any(|s| s.len() >= 2) {
        return Err(EmbeddingError::InsufficientData);
    }

    // Frequency-filtered vocabulary, deterministic index order.
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for w in s {
            *counts.entry(w.as_str()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|(w, c)| *c >= config.min_count as u64 && *w != PAD && *w != UNK && *w != SEP)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut words: Vec<String> = vec![PAD.to_string(), UNK.to_string(), SEP.to_string()];
    words.extend(kept.iter().map(|(w, _)| w.to_string()));
    let index: HashMap<String, usize> = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    let vocab = words.len();
    let dim = config.dim;

    // Encoded sentences with out-of-vocabulary words dropped.
    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|w| index.get(w.as_str()).copied()).collect())
        .filter(|s: &Vec<usize>| s.len() >= 2)
        .collect();
    if encoded.is_empty() {
        return Err(EmbeddingError::InsufficientData);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // syn0 is the table we keep; syn1 are the context weights.
    let mut syn0 = vec![0.0f64; vocab * dim];
    for v in syn0.iter_mut() {
        *v = (rng.gen::<f64>() - 0.5) / dim as f64;
    }
    // Pinned reserved vectors: pad is zero, unk and sep keep their seeded
    // initialization and are never trained.
    for d in 0..dim {
        syn0[PAD_INDEX * dim + d] = 0.0;
    }
    let mut syn1 = vec![0.0f64; vocab * dim];

    // Negative sampling from the unigram distribution ^ 0.75.
    let weights: Vec<f64> = {
        let mut ws = vec![0.0; vocab];
        for (w, c) in &kept {
            ws[index[*w]] = (*c as f64).powf(0.75);
        }
        ws
    };
    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let total_weight = *cumulative.last().unwrap();
    let sample_negative = |rng: &mut ChaCha8Rng| -> usize {
        let x = rng.gen::<f64>() * total_weight;
        cumulative.partition_point(|c| *c < x).min(vocab - 1)
    };

    let total_tokens: usize = encoded.iter().map(|s| s.len()).sum();
    let total_updates = (total_tokens * config.epochs).max(1);
    let mut processed = 0usize;

    for _epoch in 0..config.epochs {
        for sentence in &encoded {
            for (pos, &center) in sentence.iter().enumerate() {
                processed += 1;
                let lr = (config.initial_lr
                    * (1.0 - processed as f64 / (total_updates as f64 + 1.0)))
                    .max(config.initial_lr * 1e-4);
                // Dynamic window, as in the reference implementation.
                let b = rng.gen_range(1..=config.window);
                let lo = pos.saturating_sub(b);
                let hi = (pos + b + 1).min(sentence.len());
                for (ctx_pos, &context) in sentence.iter().enumerate().take(hi).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    let mut accum = vec![0.0f64; dim];
                    // One positive pair plus `negatives` sampled pairs.
                    for neg in 0..=config.negatives {
                        let (target, label) = if neg == 0 {
                            (context, 1.0)
                        } else {
                            let t = sample_negative(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let c0 = center * dim;
                        let t1 = target * dim;
                        let mut dot = 0.0;
                        for d in 0..dim {
                            dot += syn0[c0 + d] * syn1[t1 + d];
                        }
                        let grad = (label - sigmoid(dot)) * lr;
                        for d in 0..dim {
                            accum[d] += grad * syn1[t1 + d];
                            syn1[t1 + d] += grad * syn0[c0 + d];
                        }
                    }
                    let c0 = center * dim;
                    for d in 0..dim {
                        syn0[c0 + d] += accum[d];
                    }
                }
            }
        }
    }

    // Re-pin the reserved rows (they are never centers or contexts, but be
    // explicit about pad).
    for d in 0..dim {
        syn0[PAD_INDEX * dim + d] = 0.0;
    }

    Ok(EmbeddingTable {
        kind,
        dim,
        words,
        vectors: syn0,
        index,
    })
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(dim: usize) -> EmbeddingConfig {
        EmbeddingConfig {
            dim,
            window: 2,
            negatives: 5,
            epochs: 5,
            min_count: 1,
            initial_lr: 0.05,
            seed: 7,
        }
    }

    fn corpus() -> Vec<Vec<String>> {
        let mut sents = Vec::new();
        for _ in 0..500 {
            sents.push(vec!["a".to_string(), "b".to_string()]);
        }
        for _ in 0..50 {
            sents.push(vec!["c".to_string(), "d".to_string(), "e".to_string()]);
        }
        sents
    }

    #[test]
    fn correlated_tokens_end_up_closer_than_random_ones() {
        let table = train_embeddings(&corpus(), EmbeddingKind::Code, &tiny_config(16)).unwrap();
        let ab = cosine(table.lookup("a"), table.lookup("b"));
        let ac = cosine(table.lookup("a"), table.lookup("c"));
        let ae = cosine(table.lookup("a"), table.lookup("e"));
        assert!(ab > ac, "cos(a,b)={ab} should beat cos(a,c)={ac}");
        assert!(ab > ae, "cos(a,b)={ab} should beat cos(a,e)={ae}");
    }

    #[test]
    fn unseen_token_gets_the_unk_vector() {
        let table = train_embeddings(&corpus(), EmbeddingKind::Code, &tiny_config(8)).unwrap();
        assert_eq!(table.index_of("never_seen"), UNK_INDEX);
        assert_eq!(table.lookup("never_seen"), table.vector(UNK_INDEX));
    }

    #[test]
    fn pad_is_all_zero() {
        let table = train_embeddings(&corpus(), EmbeddingKind::Code, &tiny_config(8)).unwrap();
        assert!(table.vector(PAD_INDEX).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = train_embeddings(&corpus(), EmbeddingKind::Code, &tiny_config(8)).unwrap();
        let b = train_embeddings(&corpus(), EmbeddingKind::Code, &tiny_config(8)).unwrap();
        assert_eq!(a, b);
        let mut other = tiny_config(8);
        other.seed = 8;
        let c = train_embeddings(&corpus(), EmbeddingKind::Code, &other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn insufficient_data_is_an_error() {
        let sents = vec![vec!["lonely".to_string()]];
        assert!(matches!(
            train_embeddings(&sents, EmbeddingKind::Word, &tiny_config(4)),
            Err(EmbeddingError::InsufficientData)
        ));
    }

    #[test]
    fn min_count_filters_rare_words() {
        let mut cfg = tiny_config(4);
        cfg.min_count = 5;
        let mut sents = corpus();
        sents.push(vec!["rare".to_string(), "a".to_string()]);
        let table = train_embeddings(&sents, EmbeddingKind::Code, &cfg).unwrap();
        assert_eq!(table.index_of("rare"), UNK_INDEX);
        assert_ne!(table.index_of("a"), UNK_INDEX);
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let table = train_embeddings(&corpus(), EmbeddingKind::Word, &tiny_config(8)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        table.save(&path).unwrap();
        let back = EmbeddingTable::load(&path).unwrap();
        assert_eq!(table, back);
    }
}
