//! Static extraction of type slots and their context hints.
//!
//! One [`FunctionRecord`] per function or method definition (nested
//! definitions included, each as its own record). A record holds, for every
//! argument slot, the identifier, usage-window, and declared-type
//! information, and for the return slot the return-statement token
//! sequences, plus the docstring and the set of types available in the
//! file. Missing pieces stay `None`; the model substitutes placeholders.

mod identifiers;

pub use identifiers::{comment_words, normalize_identifier};

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::python::{self, FunctionDef, ImportNames, Module, ParamKind, Stmt, TokKind, Token};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u32,
        message: String,
    },
    #[error("cannot read {file}: {source}")]
    Io {
        file: String,
        source: std::io::Error,
    },
}

/// Marker used for the return slot in slot identifiers.
pub const RETURN_SLOT: &str = "<return>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentSlot {
    pub name: String,
    pub declared_type: Option<String>,
    pub usage_windows: Vec<Vec<String>>,
    pub trivial: bool,
    pub decl_line: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSlot {
    pub declared_type: Option<String>,
    pub return_statements: Vec<Vec<String>>,
    pub trivial: bool,
    pub decl_line: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub file_path: String,
    pub function_name: String,
    /// Dotted path through enclosing classes and functions.
    pub qualified_name: String,
    pub line_span: (u32, u32),
    pub nested: bool,
    pub method: bool,
    pub docstring: Option<String>,
    pub arguments: Vec<ArgumentSlot>,
    pub return_slot: ReturnSlot,
    pub available_types: Vec<String>,
}

impl FunctionRecord {
    /// The searchable slots of this function: non-trivial, unannotated.
    pub fn missing_slots(&self) -> Vec<SlotId> {
        let mut out = Vec::new();
        for a in &self.arguments {
            if !a.trivial && a.declared_type.is_none() {
                out.push(SlotId::argument(&self.qualified_name, &a.name));
            }
        }
        if !self.return_slot.trivial && self.return_slot.declared_type.is_none() {
            out.push(SlotId::ret(&self.qualified_name));
        }
        out
    }

    /// Every non-trivial slot with its declared type (annotated or not).
    pub fn typed_slots(&self) -> Vec<(SlotId, Option<String>, u32)> {
        let mut out = Vec::new();
        for a in &self.arguments {
            if !a.trivial {
                out.push((
                    SlotId::argument(&self.qualified_name, &a.name),
                    a.declared_type.clone(),
                    a.decl_line,
                ));
            }
        }
        if !self.return_slot.trivial {
            out.push((
                SlotId::ret(&self.qualified_name),
                self.return_slot.declared_type.clone(),
                self.return_slot.decl_line,
            ));
        }
        out
    }
}

/// Usage-window shape knobs.
#[derive(Debug, Clone, Copy)]
pub struct ExtractOptions {
    pub window_radius: usize,
    pub max_windows: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            window_radius: DEFAULT_RADIUS,
            max_windows: DEFAULT_MAX_WINDOWS,
        }
    }
}

/// Extract one record per function definition in `source`.
///
/// Pure in `(source, file_path)`; a parse failure reports the file and line
/// and yields no records for the file.
pub fn extract_functions(source: &str, file_path: &str) -> Result<Vec<FunctionRecord>, ExtractError> {
    extract_functions_with(source, file_path, ExtractOptions::default())
}

pub fn extract_functions_with(
    source: &str,
    file_path: &str,
    options: ExtractOptions,
) -> Result<Vec<FunctionRecord>, ExtractError> {
    let module = python::parse_module(source).map_err(|e| ExtractError::Parse {
        file: file_path.to_string(),
        line: e.line,
        message: e.message,
    })?;
    Ok(extract_from_module_with(&module, file_path, options))
}

/// Extraction over an already-parsed module (the checker and the search
/// oracle reuse their parse).
pub fn extract_from_module(module: &Module, file_path: &str) -> Vec<FunctionRecord> {
    extract_from_module_with(module, file_path, ExtractOptions::default())
}

pub fn extract_from_module_with(
    module: &Module,
    file_path: &str,
    options: ExtractOptions,
) -> Vec<FunctionRecord> {
    let available = available_types(&module.body);
    let mut records = Vec::new();
    walk_functions(&module.body, &mut |def, qualified, is_method, nested| {
        records.push(record_for(
            def,
            qualified,
            is_method,
            nested,
            &module.tokens,
            file_path,
            &available,
            options,
        ));
    });
    records
}

#[derive(Clone, Copy, PartialEq)]
enum Context {
    Module,
    Class,
    Function,
}

/// Identity of one annotatable location within a file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotId {
    /// Dotted qualified function name.
    pub function: String,
    pub slot: SlotKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SlotKind {
    Argument(String),
    Return,
}

impl SlotId {
    pub fn argument(function: &str, arg: &str) -> Self {
        SlotId {
            function: function.to_string(),
            slot: SlotKind::Argument(arg.to_string()),
        }
    }

    pub fn ret(function: &str) -> Self {
        SlotId {
            function: function.to_string(),
            slot: SlotKind::Return,
        }
    }
}

impl std::fmt::Display for SlotId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.slot {
            SlotKind::Argument(a) => write!(f, "{}.{}", self.function, a),
            SlotKind::Return => write!(f, "{}.{}", self.function, RETURN_SLOT),
        }
    }
}

/// Visit every function definition with its qualified name and context.
pub fn walk_functions<'a>(
    body: &'a [Stmt],
    f: &mut impl FnMut(&'a FunctionDef, &str, bool, bool),
) {
    fn go<'a>(
        stmts: &'a [Stmt],
        path: &mut Vec<String>,
        ctx: Context,
        f: &mut impl FnMut(&'a FunctionDef, &str, bool, bool),
    ) {
        for stmt in stmts {
            match stmt {
                Stmt::Function(def) => {
                    let qualified = if path.is_empty() {
                        def.name.clone()
                    } else {
                        format!("{}.{}", path.join("."), def.name)
                    };
                    f(def, &qualified, ctx == Context::Class, ctx == Context::Function);
                    path.push(def.name.clone());
                    go(&def.body, path, Context::Function, f);
                    path.pop();
                }
                Stmt::Class(class) => {
                    path.push(class.name.clone());
                    go(&class.body, path, Context::Class, f);
                    path.pop();
                }
                Stmt::If { branches } => {
                    for (_, b) in branches {
                        go(b, path, ctx, f);
                    }
                }
                Stmt::While { body, orelse, .. } | Stmt::For { body, orelse, .. } => {
                    go(body, path, ctx, f);
                    go(orelse, path, ctx, f);
                }
                Stmt::With { body, .. } | Stmt::Opaque { body } => go(body, path, ctx, f),
                Stmt::Try {
                    body,
                    handlers,
                    orelse,
                    finalbody,
                } => {
                    go(body, path, ctx, f);
                    for h in handlers {
                        go(h, path, ctx, f);
                    }
                    go(orelse, path, ctx, f);
                    go(finalbody, path, ctx, f);
                }
                _ => {}
            }
        }
    }
    let mut path = Vec::new();
    go(body, &mut path, Context::Module, f);
}

/// Re-derive the rule-based trivial flags on a finished record: `self`/`cls`
/// as a method's first argument, dunder returns with forced types. Flags
/// that only extraction can know (`*args`/`**kwargs`) are kept as-is.
pub fn mark_trivial_slots(mut record: FunctionRecord) -> FunctionRecord {
    if let Some(first) = record.arguments.first_mut() {
        if record.method && (first.name == "self" || first.name == "cls") {
            first.trivial = true;
        }
    }
    if record.method && forced_return_type(&record.function_name).is_some() {
        record.return_slot.trivial = true;
    }
    record
}

/// Per-parameter and return triviality under the closed decision list.
pub fn slot_triviality(def: &FunctionDef, is_method: bool) -> (Vec<bool>, bool) {
    let params = def
        .params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (i == 0 && is_method && (p.name == "self" || p.name == "cls"))
                || p.kind != ParamKind::Plain
        })
        .collect();
    let ret = is_method && forced_return_type(&def.name).is_some();
    (params, ret)
}

#[allow(clippy::too_many_arguments)]
fn record_for(
    def: &FunctionDef,
    qualified_name: &str,
    is_method: bool,
    nested: bool,
    tokens: &[Token],
    file_path: &str,
    available: &[String],
    options: ExtractOptions,
) -> FunctionRecord {
    let body = &tokens[def.body_tokens.0..def.body_tokens.1];
    let (param_trivial, ret_trivial) = slot_triviality(def, is_method);
    let arguments = def
        .params
        .iter()
        .zip(param_trivial)
        .map(|(p, trivial)| ArgumentSlot {
            name: p.name.clone(),
            declared_type: p.annotation.as_ref().map(|a| a.canonical.clone()),
            usage_windows: extract_usage_windows(body, &p.name, options.window_radius, options.max_windows),
            trivial,
            decl_line: p.line,
        })
        .collect();
    let return_statements = collect_return_sequences(&def.body, tokens);
    FunctionRecord {
        file_path: file_path.to_string(),
        function_name: def.name.clone(),
        qualified_name: qualified_name.to_string(),
        line_span: (def.line, def.end_line.max(def.line)),
        nested,
        method: is_method,
        docstring: def.docstring.clone(),
        arguments,
        return_slot: ReturnSlot {
            declared_type: def.return_annotation.as_ref().map(|a| a.canonical.clone()),
            return_statements,
            trivial: ret_trivial,
            decl_line: def.line,
        },
        available_types: available.to_vec(),
    }
}

pub const DEFAULT_RADIUS: usize = 3;
pub const DEFAULT_MAX_WINDOWS: usize = 3;

/// One window of rendered tokens per occurrence of `arg_name` in the body,
/// clipped at the body boundaries, at most `max_windows` kept in order.
pub fn extract_usage_windows(
    body_tokens: &[Token],
    arg_name: &str,
    radius: usize,
    max_windows: usize,
) -> Vec<Vec<String>> {
    assert!(radius >= 1, "window radius must be at least 1");
    let mut windows = Vec::new();
    for (i, tok) in body_tokens.iter().enumerate() {
        if tok.kind == TokKind::Name && tok.text == arg_name {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius + 1).min(body_tokens.len());
            let window: Vec<String> = body_tokens[lo..hi].iter().map(python::render_token).collect();
            windows.push(window);
            if windows.len() >= max_windows {
                break;
            }
        }
    }
    windows
}

/// Rendered token sequences of every `return` statement in the body,
/// excluding nested function and class bodies.
fn collect_return_sequences(body: &[Stmt], tokens: &[Token]) -> Vec<Vec<String>> {
    let mut ranges = Vec::new();
    fn visit(stmts: &[Stmt], ranges: &mut Vec<(usize, usize)>) {
        for s in stmts {
            match s {
                Stmt::Function(_) | Stmt::Class(_) => {}
                Stmt::Return { tokens, .. } => ranges.push(*tokens),
                Stmt::If { branches } => {
                    for (_, b) in branches {
                        visit(b, ranges);
                    }
                }
                Stmt::While { body, orelse, .. } | Stmt::For { body, orelse, .. } => {
                    visit(body, ranges);
                    visit(orelse, ranges);
                }
                Stmt::With { body, .. } | Stmt::Opaque { body } => visit(body, ranges),
                Stmt::Try {
                    body,
                    handlers,
                    orelse,
                    finalbody,
                } => {
                    visit(body, ranges);
                    for h in handlers {
                        visit(h, ranges);
                    }
                    visit(orelse, ranges);
                    visit(finalbody, ranges);
                }
                _ => {}
            }
        }
    }
    visit(body, &mut ranges);
    ranges
        .into_iter()
        .map(|(lo, hi)| tokens[lo..hi].iter().map(python::render_token).collect())
        .collect()
}

/// Dunder methods whose return type the language fixes.
const FORCED_DUNDER_RETURNS: &[(&str, &str)] = &[
    ("__str__", "str"),
    ("__repr__", "str"),
    ("__init__", "None"),
    ("__del__", "None"),
    ("__len__", "int"),
    ("__hash__", "int"),
    ("__bool__", "bool"),
    ("__eq__", "bool"),
    ("__ne__", "bool"),
    ("__lt__", "bool"),
    ("__le__", "bool"),
    ("__gt__", "bool"),
    ("__ge__", "bool"),
    ("__contains__", "bool"),
];

/// The type a trivial dunder return slot is forced to, if any.
pub fn forced_return_type(method_name: &str) -> Option<&'static str> {
    FORCED_DUNDER_RETURNS
        .iter()
        .find(|(n, _)| *n == method_name)
        .map(|(_, t)| *t)
}

/// Names bound by imports plus every class defined in the file.
fn available_types(body: &[Stmt]) -> Vec<String> {
    let mut names = BTreeSet::new();
    for stmt in body {
        stmt.walk(&mut |s| match s {
            Stmt::Import(ImportNames::Plain(entries)) => {
                for (module, alias) in entries {
                    let bound = alias
                        .clone()
                        .unwrap_or_else(|| module.split('.').next().unwrap_or(module).to_string());
                    names.insert(bound);
                }
            }
            Stmt::Import(ImportNames::From { names: entries, .. }) => {
                for (name, alias) in entries {
                    names.insert(alias.clone().unwrap_or_else(|| name.clone()));
                }
            }
            Stmt::Class(c) => {
                names.insert(c.name.clone());
            }
            _ => {}
        });
    }
    names.into_iter().collect()
}

/// Walk a directory tree, extract every `.py` file, and merge the records
/// in sorted file order. Files that fail to parse are reported in
/// `skipped` and never abort the run.
pub struct CorpusExtraction {
    pub records: Vec<FunctionRecord>,
    pub skipped: Vec<ExtractError>,
}

pub fn extract_dir(root: &Path) -> CorpusExtraction {
    extract_dir_with(root, ExtractOptions::default())
}

pub fn extract_dir_with(root: &Path, options: ExtractOptions) -> CorpusExtraction {
    let files = python_files(root);
    let results = crate::par::map_ordered(files, move |p| extract_file(&p, options));
    merge_results(results)
}

/// Sequential twin of [`extract_dir`] for benchmarking the parallel path.
pub fn extract_dir_sequential(root: &Path) -> CorpusExtraction {
    let files = python_files(root);
    let results =
        crate::par::map_ordered_seq(files, |p| extract_file(&p, ExtractOptions::default()));
    merge_results(results)
}

fn python_files(root: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.extension().map(|x| x == "py").unwrap_or(false))
        .collect();
    files.sort();
    files
}

fn extract_file(path: &Path, options: ExtractOptions) -> Result<Vec<FunctionRecord>, ExtractError> {
    let source = std::fs::read_to_string(path).map_err(|source| ExtractError::Io {
        file: path.display().to_string(),
        source,
    })?;
    extract_functions_with(&source, &path.display().to_string(), options)
}

fn merge_results(results: Vec<Result<Vec<FunctionRecord>, ExtractError>>) -> CorpusExtraction {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(rs) => records.extend(rs),
            Err(e) => skipped.push(e),
        }
    }
    CorpusExtraction { records, skipped }
}
