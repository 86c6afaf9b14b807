//! Byte-preserving annotation surgery.
//!
//! [`apply_assignment`] inserts `: T` after parameter names and ` -> T`
//! before the header colon; [`strip_annotations`] removes annotations from
//! non-trivial slots and records them as ground truth. Every other byte
//! (whitespace, comments, string contents) is untouched, and insertions
//! never add lines, so statement line numbers are stable.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::extract::{slot_triviality, walk_functions, SlotId, SlotKind};
use crate::python::{self, FunctionDef};

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error("source does not parse (line {line}): {message}")]
    ParseError { line: u32, message: String },
    #[error("slot {0} not found in source")]
    SlotNotFound(SlotId),
    #[error("slot {0} is already annotated")]
    AlreadyAnnotated(SlotId),
    #[error("function {0} is defined more than once; slots are ambiguous")]
    AmbiguousFunction(String),
    #[error("rewritten source would not parse (line {line}): {message}")]
    WouldNotParse { line: u32, message: String },
}

/// A type for every slot to annotate. BTreeMap so edit order is stable.
pub type Assignment = BTreeMap<SlotId, String>;

/// Ground truth recovered by stripping.
pub type GroundTruth = BTreeMap<SlotId, String>;

enum Edit {
    Insert(usize, String),
    Remove(usize, usize),
}

fn apply_edits(source: &str, mut edits: Vec<Edit>) -> String {
    edits.sort_by_key(|e| std::cmp::Reverse(match e {
        Edit::Insert(pos, _) => *pos,
        Edit::Remove(start, _) => *start,
    }));
    let mut out = source.to_string();
    for edit in edits {
        match edit {
            Edit::Insert(pos, text) => out.insert_str(pos, &text),
            Edit::Remove(start, end) => out.replace_range(start..end, ""),
        }
    }
    out
}

fn functions_by_name(
    body: &[python::Stmt],
) -> (BTreeMap<String, (&FunctionDef, bool)>, Vec<String>) {
    let mut map: BTreeMap<String, (&FunctionDef, bool)> = BTreeMap::new();
    let mut duplicates = Vec::new();
    walk_functions(body, &mut |def, qualified, is_method, _| {
        if map.insert(qualified.to_string(), (def, is_method)).is_some() {
            duplicates.push(qualified.to_string());
        }
    });
    (map, duplicates)
}

/// Insert the assigned types into `source`. All other bytes are preserved;
/// the result is re-parsed before it is returned.
pub fn apply_assignment(source: &str, assignment: &Assignment) -> Result<String, RewriteError> {
    if assignment.is_empty() {
        return Ok(source.to_string());
    }
    let module = python::parse_module(source).map_err(|e| RewriteError::ParseError {
        line: e.line,
        message: e.message,
    })?;
    let (functions, duplicates) = functions_by_name(&module.body);
    let mut edits = Vec::new();
    for (slot, type_name) in assignment {
        if duplicates.contains(&slot.function) {
            return Err(RewriteError::AmbiguousFunction(slot.function.clone()));
        }
        let (def, _) = functions
            .get(&slot.function)
            .ok_or_else(|| RewriteError::SlotNotFound(slot.clone()))?;
        match &slot.slot {
            SlotKind::Argument(arg) => {
                let param = def
                    .params
                    .iter()
                    .find(|p| &p.name == arg)
                    .ok_or_else(|| RewriteError::SlotNotFound(slot.clone()))?;
                if param.annotation.is_some() {
                    return Err(RewriteError::AlreadyAnnotated(slot.clone()));
                }
                edits.push(Edit::Insert(param.name_end, format!(": {type_name}")));
            }
            SlotKind::Return => {
                if def.return_annotation.is_some() {
                    return Err(RewriteError::AlreadyAnnotated(slot.clone()));
                }
                edits.push(Edit::Insert(def.params_end, format!(" -> {type_name}")));
            }
        }
    }
    let result = apply_edits(source, edits);
    python::parse_module(&result).map_err(|e| RewriteError::WouldNotParse {
        line: e.line,
        message: e.message,
    })?;
    Ok(result)
}

/// Remove every annotation on a non-trivial slot, returning the stripped
/// source and the recorded ground truth.
pub fn strip_annotations(source: &str) -> Result<(String, GroundTruth), RewriteError> {
    let module = python::parse_module(source).map_err(|e| RewriteError::ParseError {
        line: e.line,
        message: e.message,
    })?;
    let mut edits = Vec::new();
    let mut truth = GroundTruth::new();
    walk_functions(&module.body, &mut |def, qualified, is_method, _| {
        let (param_trivial, ret_trivial) = slot_triviality(def, is_method);
        for (param, trivial) in def.params.iter().zip(param_trivial) {
            if trivial {
                continue;
            }
            if let Some(ann) = &param.annotation {
                truth.insert(
                    SlotId::argument(qualified, &param.name),
                    ann.canonical.clone(),
                );
                edits.push(Edit::Remove(param.name_end, ann.span.end));
            }
        }
        if !ret_trivial {
            if let Some(ann) = &def.return_annotation {
                truth.insert(SlotId::ret(qualified), ann.canonical.clone());
                edits.push(Edit::Remove(def.params_end, ann.span.end));
            }
        }
    });
    let result = apply_edits(source, edits);
    python::parse_module(&result).map_err(|e| RewriteError::WouldNotParse {
        line: e.line,
        message: e.message,
    })?;
    Ok((result, truth))
}

/// Minimal unified diff for annotation edits. Rewrites never change line
/// counts, so lines pair off one to one.
pub fn line_diff(old: &str, new: &str, path: &str) -> String {
    let old_lines: Vec<&str> = old.lines().collect();
    let new_lines: Vec<&str> = new.lines().collect();
    let mut out = String::new();
    out.push_str(&format!("--- {path}\n+++ {path}\n"));
    let n = old_lines.len().max(new_lines.len());
    for i in 0..n {
        let o = old_lines.get(i).copied().unwrap_or("");
        let w = new_lines.get(i).copied().unwrap_or("");
        if o != w {
            out.push_str(&format!("@@ -{0},1 +{0},1 @@\n", i + 1));
            out.push_str(&format!("-{o}\n+{w}\n"));
        }
    }
    out
}
