//! Turning a function record and a slot into model features.

use super::{ModelHyper, ModelInput};
use crate::embedding::{EmbeddingTable, PAD_INDEX, SEP_INDEX};
use crate::extract::{comment_words, normalize_identifier, FunctionRecord, SlotId, SlotKind};
use crate::vocab::{TypeVocabulary, UNKNOWN_INDEX};

/// Heads counted as always-available in the type mask.
pub const BUILTIN_MASK_TYPES: &[&str] = &[
    "int", "float", "str", "bool", "bytes", "None", "Any", "object", "complex", "list", "List",
    "dict", "Dict", "set", "Set", "frozenset", "FrozenSet", "tuple", "Tuple", "Optional", "Union",
    "Callable", "Iterable", "Iterator", "Sequence", "Mapping", "Generator", "bytearray",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotChannel {
    Argument,
    Return,
}

/// Map a recorded source token to its embedding token: names lowercase,
/// string literals and numbers collapse to placeholders, structure tokens
/// pass through.
pub fn render_for_embedding(token: &str) -> String {
    let mut chars = token.chars();
    let first = match chars.next() {
        Some(c) => c,
        None => return token.to_string(),
    };
    if token == "\n" || token == "<ind>" || token == "<ded>" {
        return token.to_string();
    }
    // String literal, with or without prefix letters.
    let body = token.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    if body.starts_with('"') || body.starts_with('\'') {
        return "<str>".to_string();
    }
    if first.is_ascii_digit() || (first == '.' && token.len() > 1 && token.as_bytes()[1].is_ascii_digit())
    {
        return "<num>".to_string();
    }
    if first.is_alphabetic() || first == '_' {
        return token.to_lowercase();
    }
    token.to_string()
}

fn pad_to(mut seq: Vec<usize>, len: usize) -> Vec<usize> {
    seq.truncate(len);
    while seq.len() < len {
        seq.push(PAD_INDEX);
    }
    seq
}

/// The identifier word sequence for a slot, before embedding lookup.
/// Arguments: `norm(arg) <sep> norm(fct) norm(other args...)`;
/// returns: `norm(fct) <sep> norm(all args...)`.
pub fn id_word_strings(record: &FunctionRecord, slot: &SlotId) -> Vec<String> {
    let mut words = Vec::new();
    match &slot.slot {
        SlotKind::Argument(arg) => {
            words.extend(normalize_identifier(arg));
            words.push(crate::embedding::SEP.to_string());
            words.extend(normalize_identifier(&record.function_name));
            for a in &record.arguments {
                if &a.name != arg {
                    words.extend(normalize_identifier(&a.name));
                }
            }
        }
        SlotKind::Return => {
            words.extend(normalize_identifier(&record.function_name));
            words.push(crate::embedding::SEP.to_string());
            for a in &record.arguments {
                words.extend(normalize_identifier(&a.name));
            }
        }
    }
    words
}

/// Build the model features for one slot of a record.
pub fn build_inputs(
    record: &FunctionRecord,
    slot: &SlotId,
    vocab: &TypeVocabulary,
    code_emb: &EmbeddingTable,
    word_emb: &EmbeddingTable,
    hyper: &ModelHyper,
) -> ModelInput {
    // Identifier channel.
    let id_seq: Vec<usize> = id_word_strings(record, slot)
        .iter()
        .map(|w| {
            if w == crate::embedding::SEP {
                SEP_INDEX
            } else {
                code_emb.index_of(w)
            }
        })
        .collect();
    let id_seq = pad_to(id_seq, hyper.id_len);

    // Token channel: usage windows for arguments, return statements for
    // returns; each sequence bounded, sequences separated, total bounded.
    let sequences: Vec<&Vec<String>> = match &slot.slot {
        SlotKind::Argument(arg) => record
            .arguments
            .iter()
            .find(|a| &a.name == arg)
            .map(|a| a.usage_windows.iter().collect())
            .unwrap_or_default(),
        SlotKind::Return => record.return_slot.return_statements.iter().collect(),
    };
    let mut token_seq = Vec::new();
    for (i, seq) in sequences.iter().take(hyper.max_windows).enumerate() {
        if i > 0 {
            token_seq.push(SEP_INDEX);
        }
        for tok in seq.iter().take(hyper.token_len) {
            token_seq.push(code_emb.index_of(&render_for_embedding(tok)));
        }
    }
    let token_seq = pad_to(token_seq, hyper.token_total());

    // Comment channel; missing docstrings become all-pad.
    let comment_seq = match &record.docstring {
        Some(doc) => comment_words(doc)
            .iter()
            .map(|w| word_emb.index_of(w))
            .collect(),
        None => Vec::new(),
    };
    let comment_seq = pad_to(comment_seq, hyper.comment_len);

    // Type mask: head constructor built-in or available in this file.
    let type_mask = (0..vocab.len())
        .map(|i| {
            if i == UNKNOWN_INDEX {
                return 0.0;
            }
            let name = vocab.decode(i);
            let head = name.split('[').next().unwrap_or(name);
            let head = head.rsplit('.').next().unwrap_or(head);
            let available = BUILTIN_MASK_TYPES.contains(&head)
                || record.available_types.iter().any(|t| t == head);
            if available {
                1.0
            } else {
                0.0
            }
        })
        .collect();

    ModelInput {
        id_seq,
        token_seq,
        comment_seq,
        type_mask,
    }
}

/// Training pairs for one channel: every non-trivial annotated slot, with
/// the vocabulary-encoded declared type as the label (out-of-vocabulary
/// types become `unknown`, which the model learns to predict).
pub fn training_pairs(
    records: &[FunctionRecord],
    channel: SlotChannel,
    vocab: &TypeVocabulary,
    code_emb: &EmbeddingTable,
    word_emb: &EmbeddingTable,
    hyper: &ModelHyper,
) -> Vec<(ModelInput, usize)> {
    let mut pairs = Vec::new();
    for record in records {
        match channel {
            SlotChannel::Argument => {
                for a in &record.arguments {
                    if a.trivial {
                        continue;
                    }
                    if let Some(t) = &a.declared_type {
                        let slot = SlotId::argument(&record.qualified_name, &a.name);
                        let input = build_inputs(record, &slot, vocab, code_emb, word_emb, hyper);
                        pairs.push((input, vocab.encode(t)));
                    }
                }
            }
            SlotChannel::Return => {
                if record.return_slot.trivial {
                    continue;
                }
                if let Some(t) = &record.return_slot.declared_type {
                    let slot = SlotId::ret(&record.qualified_name);
                    let input = build_inputs(record, &slot, vocab, code_emb, word_emb, hyper);
                    pairs.push((input, vocab.encode(t)));
                }
            }
        }
    }
    pairs
}
