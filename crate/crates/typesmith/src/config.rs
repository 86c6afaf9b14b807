//! Hyperparameters and run configuration.
//!
//! Every knob has a default; a TOML config file can override any subset and
//! individual CLI flags override the file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
}

/// Which submodels feed the classifier. Disabling one replaces its vector
/// with zeros in both training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub identifiers: bool,
    pub tokens: bool,
    pub comments: bool,
    pub type_mask: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation {
            identifiers: true,
            tokens: true,
            comments: true,
            type_mask: true,
        }
    }
}

impl Ablation {
    /// The configuration equivalent to a natural-language-only model:
    /// no token sequences and no type mask.
    pub fn nl_only() -> Self {
        Ablation {
            identifiers: true,
            tokens: false,
            comments: true,
            type_mask: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Usage window size in tokens (odd; the half-window radius is
    /// `(window_size - 1) / 2`).
    pub window_size: usize,
    /// Number of token sequences kept per slot.
    pub max_windows: usize,
    /// Identifier sequence length.
    pub id_len: usize,
    /// Per-window token sequence length.
    pub token_len: usize,
    /// Comment sequence length.
    pub comment_len: usize,
    /// Type vocabulary cap (plus the reserved `unknown` entry).
    pub type_vocab_cap: usize,
    /// Hidden size per RNN direction.
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub top_k: usize,
    /// Minimum predicted probability for a suggestion.
    pub threshold: f64,
    /// Checker-call budget per search phase is `budget_factor * slots`.
    pub budget_factor: usize,
    pub embed_dim: usize,
    pub embed_window: usize,
    pub embed_negatives: usize,
    pub embed_epochs: usize,
    pub embed_min_count: usize,
    pub split_ratio: f64,
    pub ablation: Ablation,
    /// Weight of the assigned-slot fraction in the pick bias.
    pub bias_assigned: f64,
    /// Weight of the error-line proximity term in the pick bias.
    pub bias_proximity: f64,
    /// A changed slot within this many lines of a parent error counts as close.
    pub proximity_lines: u32,
    /// External checker timeout in seconds.
    pub checker_timeout_s: u64,
    /// Cap on concurrent external checker processes.
    pub max_concurrent_checkers: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            window_size: 7,
            max_windows: 3,
            id_len: 10,
            token_len: 7,
            comment_len: 20,
            type_vocab_cap: 1000,
            hidden: 200,
            epochs: 10,
            learning_rate: 0.005,
            batch_size: 128,
            top_k: 5,
            threshold: 0.0,
            budget_factor: 7,
            embed_dim: 100,
            embed_window: 5,
            embed_negatives: 5,
            embed_epochs: 5,
            embed_min_count: 5,
            split_ratio: 0.8,
            ablation: Ablation::default(),
            bias_assigned: 1.0,
            bias_proximity: 2.0,
            proximity_lines: 2,
            checker_timeout_s: 60,
            max_concurrent_checkers: 4,
        }
    }
}

impl Hyperparams {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    /// Half-window radius derived from the window size.
    pub fn window_radius(&self) -> usize {
        self.window_size.saturating_sub(1) / 2
    }

    /// Total token-channel length: all windows plus their separators share
    /// this budget.
    pub fn token_total_len(&self) -> usize {
        self.max_windows * self.token_len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let hp = Hyperparams::default();
        assert_eq!(hp.window_size, 7);
        assert_eq!(hp.window_radius(), 3);
        assert_eq!(hp.max_windows, 3);
        assert_eq!(hp.id_len, 10);
        assert_eq!(hp.token_len, 7);
        assert_eq!(hp.comment_len, 20);
        assert_eq!(hp.type_vocab_cap, 1000);
        assert_eq!(hp.hidden, 200);
        assert_eq!(hp.epochs, 10);
        assert!((hp.learning_rate - 0.005).abs() < 1e-12);
        assert_eq!(hp.top_k, 5);
        assert_eq!(hp.budget_factor, 7);
    }

    #[test]
    fn toml_overrides_subset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "hidden = 16\nepochs = 3\n").unwrap();
        let hp = Hyperparams::load(&path).unwrap();
        assert_eq!(hp.hidden, 16);
        assert_eq!(hp.epochs, 3);
        assert_eq!(hp.top_k, 5);
    }
}
