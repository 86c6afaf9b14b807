//! Adam-driven training over mini-batches of cross-entropy loss.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::classifier::{backward_batch, forward_batch, ModelParameters};
use super::{ModelError, ModelInput};
use crate::embedding::EmbeddingTable;

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let b1t = 1.0 - BETA1.powi(self.t as i32);
        let b2t = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * grads[i];
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * grads[i] * grads[i];
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= self.lr * mhat / (vhat.sqrt() + EPS);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean cross-entropy per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Train in place for `epochs` passes, shuffling per epoch with the seed.
/// Returns the per-epoch loss curve.
#[allow(clippy::too_many_arguments)]
pub fn train_model(
    dataset: &[(ModelInput, usize)],
    params: &mut ModelParameters,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    seed: u64,
    code_emb: &EmbeddingTable,
    word_emb: &EmbeddingTable,
) -> Result<TrainReport, ModelError> {
    if dataset.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let vocab = params.hyper.vocab_size;
    for (_, label) in dataset {
        if *label >= vocab {
            return Err(ModelError::LabelOutOfRange {
                label: *label,
                vocab,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = params.flatten();
    let mut adam = Adam::new(flat.len(), learning_rate);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let batch_size = batch_size.max(1);
    let mut epoch_losses = Vec::with_capacity(epochs);

    for _epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let inputs: Vec<&ModelInput> = chunk.iter().map(|&i| &dataset[i].0).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| dataset[i].1).collect();
            let cache = forward_batch(params, &inputs, code_emb, word_emb)?;
            let (loss, grads) = backward_batch(params, &cache, &labels);
            total += loss;
            batches += 1;
            if learning_rate != 0.0 {
                adam.step(&mut flat, &grads.flatten());
                params.assign_flat(&flat);
            }
        }
        epoch_losses.push(total / batches.max(1) as f64);
    }
    Ok(TrainReport { epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingKind;
    use crate::model::classifier::tests::{tiny_hyper, tiny_input, tiny_table};
    use crate::model::classifier::forward;

    fn setup() -> (
        crate::model::ModelHyper,
        EmbeddingTable,
        EmbeddingTable,
        Vec<(ModelInput, usize)>,
    ) {
        let hyper = tiny_hyper(6);
        let code = tiny_table(EmbeddingKind::Code, 3, 1);
        let word = tiny_table(EmbeddingKind::Word, 3, 2);
        // One memorizable example, repeated.
        let mut input = tiny_input(&hyper, 3);
        input.id_seq = vec![3, 4, 5];
        let dataset: Vec<(ModelInput, usize)> = (0..10).map(|_| (input.clone(), 2)).collect();
        (hyper, code, word, dataset)
    }

    #[test]
    fn overfits_a_single_example() {
        let (hyper, code, word, dataset) = setup();
        let mut params = ModelParameters::init(&hyper, 7);
        let report =
            train_model(&dataset, &mut params, 50, 0.01, 4, 11, &code, &word).unwrap();
        let probs = forward(&dataset[0].0, &params, &code, &word).unwrap();
        let argmax = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 2);
        assert!(report.epoch_losses.last().unwrap() < &0.05);
        // Memorizable set: the loss curve goes down.
        assert!(report.epoch_losses.last().unwrap() < &(report.epoch_losses[0] * 0.2));
        let decreasing = report
            .epoch_losses
            .windows(2)
            .filter(|w| w[1] <= w[0] + 1e-9)
            .count();
        assert!(decreasing * 10 >= report.epoch_losses.len() * 8);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let (hyper, code, word, dataset) = setup();
        let mut params = ModelParameters::init(&hyper, 7);
        let before = params.clone();
        train_model(&dataset, &mut params, 3, 0.0, 4, 11, &code, &word).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn fixed_seed_reproduces_bit_identical_parameters() {
        let (hyper, code, word, mut dataset) = setup();
        // Mixed labels so the shuffle order actually matters.
        for (i, pair) in dataset.iter_mut().enumerate() {
            pair.0.id_seq = vec![3 + (i % 3), 4, 5];
            pair.1 = i % 3;
        }
        let run = || {
            let mut params = ModelParameters::init(&hyper, 7);
            train_model(&dataset, &mut params, 5, 0.01, 4, 11, &code, &word).unwrap();
            params
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        let mut c = ModelParameters::init(&hyper, 7);
        train_model(&dataset, &mut c, 5, 0.01, 4, 12, &code, &word).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let (hyper, code, word, mut dataset) = setup();
        dataset[0].1 = 6;
        let mut params = ModelParameters::init(&hyper, 7);
        assert!(matches!(
            train_model(&dataset, &mut params, 1, 0.01, 4, 11, &code, &word),
            Err(ModelError::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let (hyper, code, word, _) = setup();
        let mut params = ModelParameters::init(&hyper, 7);
        assert!(matches!(
            train_model(&[], &mut params, 1, 0.01, 4, 11, &code, &word),
            Err(ModelError::EmptyDataset)
        ));
    }
}
