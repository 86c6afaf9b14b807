//! Built-in gradual checker.
//!
//! Follows the gradual discipline: a function body is analyzed only when its
//! return type is annotated; everything unannotated is `Any` and never
//! complains. Within analyzed code three checks fire:
//!
//! - a `return` expression not assignable to the declared return type,
//! - falling off the end of a function whose declared return excludes `None`,
//! - call arguments not assignable to the annotated parameters of same-file
//!   top-level functions.
//!
//! Expression inference is intentionally shallow: literals, displays,
//! forward assignment propagation, calls to same-file functions through
//! their annotated return types, numeric promotion for `+`/`-`/`*` (whose
//! genuine mismatches are a fourth error kind), comparisons to `bool`,
//! attribute access to `Any`. Scope is a single module. Generators are
//! skipped. `while True:` suites count as terminating.

use std::collections::HashMap;

use super::types::{assignable, join, parse_type, SimpleType};
use super::{CheckError, Checker, CheckerReport};
use crate::python::{self, Expr, FunctionDef, Module, ParamKind, Stmt};

#[derive(Debug, Default, Clone)]
pub struct BuiltinChecker;

impl BuiltinChecker {
    pub fn new() -> Self {
        BuiltinChecker
    }
}

impl Checker for BuiltinChecker {
    fn check(&self, source: &str) -> Result<CheckerReport, CheckError> {
        let module = python::parse_module(source).map_err(|e| CheckError::Parse {
            line: e.line,
            message: e.message,
        })?;
        let records = crate::extract::extract_from_module(&module, "<candidate>");
        let n_missing = super::count_missing(&records);
        let error_lines = check_module(&module);
        Ok(CheckerReport {
            n_missing,
            error_lines,
            checker_id: self.id().to_string(),
        })
    }

    fn id(&self) -> &str {
        "builtin"
    }
}

/// Run all checks over a parsed module, returning diagnostic lines.
pub fn check_module(module: &Module) -> Vec<u32> {
    let mut table = HashMap::new();
    for stmt in &module.body {
        if let Stmt::Function(def) = stmt {
            table.insert(def.name.clone(), signature_of(def));
        }
    }
    let mut ck = Check {
        table,
        errors: Vec::new(),
    };
    // Module-level statements: assignment propagation plus call checks.
    let mut env = Env::new();
    ck.analyze_suite(&module.body, &mut env, None);
    // Every function definition anywhere, independently.
    for stmt in &module.body {
        stmt.walk(&mut |s| {
            if let Stmt::Function(def) = s {
                ck.check_function(def);
            }
        });
    }
    let mut lines = ck.errors;
    lines.sort_unstable();
    lines
}

struct Sig {
    params: Vec<(String, Option<SimpleType>, ParamKind)>,
    ret: Option<SimpleType>,
}

fn signature_of(def: &FunctionDef) -> Sig {
    Sig {
        params: def
            .params
            .iter()
            .map(|p| {
                (
                    p.name.clone(),
                    p.annotation.as_ref().map(|a| parse_type(&a.canonical)),
                    p.kind,
                )
            })
            .collect(),
        ret: def
            .return_annotation
            .as_ref()
            .map(|a| parse_type(&a.canonical)),
    }
}

type Env = HashMap<String, SimpleType>;

struct Check {
    table: HashMap<String, Sig>,
    errors: Vec<u32>,
}

impl Check {
    fn check_function(&mut self, def: &FunctionDef) {
        // Gradual discipline: only annotated returns get their body checked.
        let Some(ann) = &def.return_annotation else {
            return;
        };
        if def.has_yield {
            return;
        }
        let declared = parse_type(&ann.canonical);
        let mut env = Env::new();
        for p in &def.params {
            let t = match p.kind {
                ParamKind::Plain => p
                    .annotation
                    .as_ref()
                    .map(|a| parse_type(&a.canonical))
                    .unwrap_or(SimpleType::Any),
                _ => SimpleType::Any,
            };
            env.insert(p.name.clone(), t);
        }
        self.analyze_suite(&def.body, &mut env, Some(&declared));
        if !assignable(&SimpleType::None, &declared) && !terminates(&def.body) {
            // Implicit fall-off returns None.
            self.errors.push(def.line);
        }
    }

    /// Straight-line walk: assignments update the environment in source
    /// order, branches share it, nested definitions are skipped here and
    /// checked on their own by `check_function`.
    fn analyze_suite(&mut self, stmts: &[Stmt], env: &mut Env, declared_ret: Option<&SimpleType>) {
        for stmt in stmts {
            match stmt {
                Stmt::Function(def) => {
                    env.insert(def.name.clone(), SimpleType::Callable);
                }
                Stmt::Class(c) => {
                    env.insert(c.name.clone(), SimpleType::Any);
                }
                Stmt::Assign { targets, value, .. } => {
                    let t = self.infer(value, env);
                    for target in targets {
                        self.bind_target(target, &t, env);
                    }
                }
                Stmt::AnnAssign {
                    name,
                    annotation,
                    value,
                    ..
                } => {
                    if let Some(v) = value {
                        self.infer(v, env);
                    }
                    if let Some(n) = name {
                        env.insert(n.clone(), parse_type(annotation));
                    }
                }
                Stmt::AugAssign { target, value, op, line } => {
                    let vt = self.infer(value, env);
                    if let Expr::Name { id, .. } = target {
                        let cur = env.get(id).cloned().unwrap_or(SimpleType::Any);
                        let t = self.binop_type(op, &cur, &vt, *line);
                        env.insert(id.clone(), t);
                    }
                }
                Stmt::Return { value, line, .. } => {
                    let t = match value {
                        Some(v) => self.infer(v, env),
                        None => SimpleType::None,
                    };
                    if let Some(declared) = declared_ret {
                        if !assignable(&t, declared) {
                            self.errors.push(*line);
                        }
                    }
                }
                Stmt::ExprStmt { value, .. } => {
                    self.infer(value, env);
                }
                Stmt::If { branches } => {
                    for (cond, body) in branches {
                        if let Some(c) = cond {
                            self.infer(c, env);
                        }
                        self.analyze_suite(body, env, declared_ret);
                    }
                }
                Stmt::While { test, body, orelse } => {
                    self.infer(test, env);
                    self.analyze_suite(body, env, declared_ret);
                    self.analyze_suite(orelse, env, declared_ret);
                }
                Stmt::For {
                    target,
                    iter,
                    body,
                    orelse,
                } => {
                    let it = self.infer(iter, env);
                    let elem = element_type(&it);
                    self.bind_target(target, &elem, env);
                    self.analyze_suite(body, env, declared_ret);
                    self.analyze_suite(orelse, env, declared_ret);
                }
                Stmt::With { items, body } => {
                    for (e, alias) in items {
                        self.infer(e, env);
                        if let Some(a) = alias {
                            env.insert(a.clone(), SimpleType::Any);
                        }
                    }
                    self.analyze_suite(body, env, declared_ret);
                }
                Stmt::Try {
                    body,
                    handlers,
                    orelse,
                    finalbody,
                } => {
                    self.analyze_suite(body, env, declared_ret);
                    for h in handlers {
                        self.analyze_suite(h, env, declared_ret);
                    }
                    self.analyze_suite(orelse, env, declared_ret);
                    self.analyze_suite(finalbody, env, declared_ret);
                }
                Stmt::Opaque { body } => self.analyze_suite(body, env, declared_ret),
                _ => {}
            }
        }
    }

    fn bind_target(&mut self, target: &Expr, value_type: &SimpleType, env: &mut Env) {
        match target {
            Expr::Name { id, .. } => {
                env.insert(id.clone(), value_type.clone());
            }
            Expr::Tuple(items) | Expr::List(items) => {
                // Destructure a matching tuple; otherwise everything is Any.
                let parts: Vec<SimpleType> = match value_type {
                    SimpleType::Tuple(ts) if ts.len() == items.len() => ts.clone(),
                    _ => vec![SimpleType::Any; items.len()],
                };
                for (item, t) in items.iter().zip(parts) {
                    self.bind_target(item, &t, env);
                }
            }
            Expr::Starred(inner) => self.bind_target(inner, &SimpleType::Any, env),
            _ => {}
        }
    }

    fn infer(&mut self, expr: &Expr, env: &mut Env) -> SimpleType {
        match expr {
            Expr::Int => SimpleType::Int,
            Expr::Float => SimpleType::Float,
            Expr::Str | Expr::FStr => SimpleType::Str,
            Expr::Bytes => SimpleType::Bytes,
            Expr::Bool(_) => SimpleType::Bool,
            Expr::NoneLit => SimpleType::None,
            Expr::Ellipsis => SimpleType::Any,
            Expr::Name { id, .. } => match env.get(id) {
                Some(t) => t.clone(),
                None => {
                    if self.table.contains_key(id) {
                        SimpleType::Callable
                    } else {
                        SimpleType::Any
                    }
                }
            },
            Expr::Tuple(items) => {
                let ts: Vec<SimpleType> = items.iter().map(|e| self.infer(e, env)).collect();
                SimpleType::Tuple(ts)
            }
            Expr::List(items) => SimpleType::List(Box::new(self.join_of(items, env))),
            Expr::Set(items) => SimpleType::Set(Box::new(self.join_of(items, env))),
            Expr::Dict(pairs) => {
                let keys: Vec<Expr> = pairs.iter().map(|(k, _)| k.clone()).collect();
                let vals: Vec<Expr> = pairs.iter().map(|(_, v)| v.clone()).collect();
                SimpleType::Dict(
                    Box::new(self.join_of(&keys, env)),
                    Box::new(self.join_of(&vals, env)),
                )
            }
            Expr::ListComp => SimpleType::List(Box::new(SimpleType::Any)),
            Expr::SetComp => SimpleType::Set(Box::new(SimpleType::Any)),
            Expr::DictComp => {
                SimpleType::Dict(Box::new(SimpleType::Any), Box::new(SimpleType::Any))
            }
            Expr::GenExp => SimpleType::Any,
            Expr::Call {
                func,
                args,
                kwargs,
                line,
            } => self.infer_call(func, args, kwargs, *line, env),
            Expr::Attribute { value, .. } => {
                self.infer(value, env);
                SimpleType::Any
            }
            Expr::Subscript { value } => {
                let base = self.infer(value, env);
                match base {
                    SimpleType::List(t) => *t,
                    SimpleType::Dict(_, v) => *v,
                    SimpleType::Str => SimpleType::Str,
                    _ => SimpleType::Any,
                }
            }
            Expr::BinOp {
                op, left, right, line,
            } => {
                let lt = self.infer(left, env);
                let rt = self.infer(right, env);
                self.binop_type(op, &lt, &rt, *line)
            }
            Expr::UnaryOp { op, operand } => {
                let t = self.infer(operand, env);
                match op.as_str() {
                    "not" => SimpleType::Bool,
                    "-" | "+" => match t {
                        SimpleType::Int | SimpleType::Float | SimpleType::Bool => t,
                        _ => SimpleType::Any,
                    },
                    _ => SimpleType::Any,
                }
            }
            Expr::BoolOp { values } => self.join_of(values, env),
            Expr::Compare { left, rest } => {
                self.infer(left, env);
                for e in rest {
                    self.infer(e, env);
                }
                SimpleType::Bool
            }
            Expr::IfExp { body, orelse } => {
                let a = self.infer(body, env);
                let b = self.infer(orelse, env);
                join(&a, &b)
            }
            Expr::Lambda => SimpleType::Callable,
            Expr::Starred(inner) | Expr::Await(inner) => {
                self.infer(inner, env);
                SimpleType::Any
            }
            Expr::Yield(inner) => {
                if let Some(v) = inner {
                    self.infer(v, env);
                }
                SimpleType::Any
            }
            Expr::Walrus { name, value } => {
                let t = self.infer(value, env);
                env.insert(name.clone(), t.clone());
                t
            }
        }
    }

    fn join_of(&mut self, items: &[Expr], env: &mut Env) -> SimpleType {
        let mut out: Option<SimpleType> = None;
        for e in items {
            let t = self.infer(e, env);
            out = Some(match out {
                None => t,
                Some(prev) => join(&prev, &t),
            });
        }
        out.unwrap_or(SimpleType::Any)
    }

    fn infer_call(
        &mut self,
        func: &Expr,
        args: &[Expr],
        kwargs: &[(String, Expr)],
        line: u32,
        env: &mut Env,
    ) -> SimpleType {
        let arg_types: Vec<(Option<SimpleType>, bool)> = args
            .iter()
            .map(|a| match a {
                Expr::Starred(inner) => {
                    self.infer(inner, env);
                    (None, true)
                }
                other => (Some(self.infer(other, env)), false),
            })
            .collect();
        let kw_types: Vec<(String, SimpleType)> = kwargs
            .iter()
            .map(|(n, v)| (n.clone(), self.infer(v, env)))
            .collect();

        let callee = match func {
            Expr::Name { id, .. } => {
                // A rebinding to something non-callable shadows the table.
                let shadowed =
                    matches!(env.get(id), Some(t) if !matches!(t, SimpleType::Callable));
                if shadowed {
                    None
                } else {
                    self.table.get(id)
                }
            }
            _ => None,
        };
        if callee.is_none() {
            self.infer(func, env);
            return SimpleType::Any;
        }
        let sig = callee.unwrap();

        // Positional matching stops at *args or any starred argument.
        let positional: Vec<&(String, Option<SimpleType>, ParamKind)> = sig
            .params
            .iter()
            .take_while(|(_, _, kind)| *kind == ParamKind::Plain)
            .collect();
        let mut had_star = false;
        let mut mismatches = Vec::new();
        for (i, (at, starred)) in arg_types.iter().enumerate() {
            if *starred {
                had_star = true;
                break;
            }
            if let (Some(at), Some((_, Some(pt), _))) = (at, positional.get(i)) {
                if !assignable(at, pt) {
                    mismatches.push(line);
                }
            }
        }
        if !had_star {
            for (name, at) in &kw_types {
                if let Some((_, Some(pt), _)) =
                    sig.params.iter().find(|(n, _, k)| n == name && *k == ParamKind::Plain)
                {
                    if !assignable(at, pt) {
                        mismatches.push(line);
                    }
                }
            }
        }
        self.errors.extend(mismatches);
        sig.ret.clone().unwrap_or(SimpleType::Any)
    }

    /// `+`, `-`, `*` follow the numeric/str promotion table and report
    /// genuine mismatches; every other operator infers best-effort and
    /// stays silent.
    fn binop_type(&mut self, op: &str, lt: &SimpleType, rt: &SimpleType, line: u32) -> SimpleType {
        use SimpleType::*;
        if lt.is_any() || rt.is_any() {
            return Any;
        }
        let numeric = |a: &SimpleType| matches!(a, Int | Float | Bool);
        match op {
            "+" | "-" | "*" => {
                if numeric(lt) && numeric(rt) {
                    return if matches!(lt, Float) || matches!(rt, Float) {
                        Float
                    } else {
                        Int
                    };
                }
                match (op, lt, rt) {
                    ("+", Str, Str) => Str,
                    ("+", List(a), List(b)) => List(Box::new(join(a, b))),
                    ("+", Tuple(_), Tuple(_)) => Tuple(vec![]),
                    ("*", Str, Int) | ("*", Int, Str) => Str,
                    ("*", List(t), Int) => List(t.clone()),
                    ("*", Int, List(t)) => List(t.clone()),
                    _ => {
                        self.errors.push(line);
                        Any
                    }
                }
            }
            "/" => {
                if numeric(lt) && numeric(rt) {
                    Float
                } else {
                    Any
                }
            }
            "//" => {
                if numeric(lt) && numeric(rt) {
                    if matches!(lt, Float) || matches!(rt, Float) {
                        Float
                    } else {
                        Int
                    }
                } else {
                    Any
                }
            }
            "%" => match (lt, rt) {
                (Str, _) => Str,
                (a, b) if numeric(a) && numeric(b) => {
                    if matches!(a, Float) || matches!(b, Float) {
                        Float
                    } else {
                        Int
                    }
                }
                _ => Any,
            },
            _ => Any,
        }
    }
}

fn element_type(iterable: &SimpleType) -> SimpleType {
    match iterable {
        SimpleType::List(t) | SimpleType::Set(t) => (**t).clone(),
        SimpleType::Dict(k, _) => (**k).clone(),
        SimpleType::Str => SimpleType::Str,
        SimpleType::Tuple(ts) => ts
            .iter()
            .fold(None::<SimpleType>, |acc, t| {
                Some(match acc {
                    None => t.clone(),
                    Some(prev) => join(&prev, t),
                })
            })
            .unwrap_or(SimpleType::Any),
        _ => SimpleType::Any,
    }
}

/// Can control fall off the end of this suite? `true` means every path
/// returns or raises.
fn terminates(stmts: &[Stmt]) -> bool {
    stmts.iter().any(stmt_terminates)
}

fn stmt_terminates(stmt: &Stmt) -> bool {
    match stmt {
        Stmt::Return { .. } | Stmt::Raise { .. } => true,
        Stmt::If { branches } => {
            let has_else = branches.last().map(|(c, _)| c.is_none()).unwrap_or(false);
            has_else && branches.iter().all(|(_, body)| terminates(body))
        }
        Stmt::While { test, .. } => matches!(test, Expr::Bool(true)),
        Stmt::For { orelse, .. } => !orelse.is_empty() && terminates(orelse),
        Stmt::With { body, .. } => terminates(body),
        Stmt::Try {
            body,
            handlers,
            finalbody,
            ..
        } => {
            terminates(finalbody)
                || (terminates(body)
                    && (handlers.is_empty() || handlers.iter().all(|h| terminates(h))))
        }
        _ => false,
    }
}
