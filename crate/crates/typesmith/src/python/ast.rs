//! Lightweight syntax tree.
//!
//! Nodes carry exactly what the pipeline consumes: byte spans for annotation
//! surgery, line numbers for diagnostics, token index ranges for usage
//! windows. Expression structure is coarse; anything not needed for type
//! inference collapses to a generic node.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ByteSpan {
    pub start: usize,
    pub end: usize,
}

/// An annotation site: the byte span covers everything that must be removed
/// to strip the annotation (from just after the anchor token to the end of
/// the annotation expression).
#[derive(Debug, Clone)]
pub struct Annotation {
    pub span: ByteSpan,
    /// Annotation source with all whitespace removed, e.g. `Dict[str,bool]`.
    pub canonical: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Plain,
    VarArgs,
    KwArgs,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    /// Byte offset just after the parameter name token; annotations insert here.
    pub name_end: usize,
    pub annotation: Option<Annotation>,
    pub has_default: bool,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    /// Byte offset just after the closing paren of the parameter list.
    pub params_end: usize,
    pub return_annotation: Option<Annotation>,
    pub body: Vec<Stmt>,
    pub docstring: Option<String>,
    /// Line of the `def` keyword.
    pub line: u32,
    /// Last line of the body.
    pub end_line: u32,
    /// Token index range of the suite (for usage windows).
    pub body_tokens: (usize, usize),
    pub is_async: bool,
    pub has_yield: bool,
}

#[derive(Debug, Clone)]
pub struct ClassDef {
    pub name: String,
    pub body: Vec<Stmt>,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub enum ImportNames {
    /// `import a.b as c` entries: (dotted module, optional alias).
    Plain(Vec<(String, Option<String>)>),
    /// `from m import x as y` entries; `star` for `from m import *`.
    From {
        names: Vec<(String, Option<String>)>,
        star: bool,
    },
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Function(FunctionDef),
    Class(ClassDef),
    Import(ImportNames),
    Return {
        value: Option<Expr>,
        line: u32,
        /// Token index range of the whole statement.
        tokens: (usize, usize),
    },
    Assign {
        targets: Vec<Expr>,
        value: Expr,
        line: u32,
    },
    AnnAssign {
        name: Option<String>,
        annotation: String,
        value: Option<Expr>,
        line: u32,
    },
    AugAssign {
        target: Expr,
        op: String,
        value: Expr,
        line: u32,
    },
    ExprStmt {
        value: Expr,
        line: u32,
    },
    If {
        /// (condition, suite) pairs; the final `else` has no condition.
        branches: Vec<(Option<Expr>, Vec<Stmt>)>,
    },
    While {
        test: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    For {
        target: Expr,
        iter: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    With {
        items: Vec<(Expr, Option<String>)>,
        body: Vec<Stmt>,
    },
    Try {
        body: Vec<Stmt>,
        handlers: Vec<Vec<Stmt>>,
        orelse: Vec<Stmt>,
        finalbody: Vec<Stmt>,
    },
    Raise {
        line: u32,
    },
    /// A compound statement we do not model (`match`, future syntax); the
    /// suite is still parsed so nested statements are visible.
    Opaque {
        body: Vec<Stmt>,
    },
    Pass,
    Break,
    Continue,
    /// global/nonlocal/del/assert/yield-statement and similar.
    Other {
        line: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpStyle {
    /// ==, !=, <, <=, >, >=, in, not in, is, is not
    Ordinary,
}

#[derive(Debug, Clone)]
pub enum Expr {
    Int,
    Float,
    Str,
    FStr,
    Bytes,
    Bool(bool),
    NoneLit,
    Ellipsis,
    Name {
        id: String,
        line: u32,
    },
    Tuple(Vec<Expr>),
    List(Vec<Expr>),
    Set(Vec<Expr>),
    Dict(Vec<(Expr, Expr)>),
    ListComp,
    SetComp,
    DictComp,
    GenExp,
    Call {
        func: Box<Expr>,
        args: Vec<Expr>,
        kwargs: Vec<(String, Expr)>,
        line: u32,
    },
    Attribute {
        value: Box<Expr>,
        attr: String,
    },
    Subscript {
        value: Box<Expr>,
    },
    BinOp {
        op: String,
        left: Box<Expr>,
        right: Box<Expr>,
        line: u32,
    },
    UnaryOp {
        op: String,
        operand: Box<Expr>,
    },
    BoolOp {
        values: Vec<Expr>,
    },
    Compare {
        left: Box<Expr>,
        rest: Vec<Expr>,
    },
    IfExp {
        body: Box<Expr>,
        orelse: Box<Expr>,
    },
    Lambda,
    Starred(Box<Expr>),
    Await(Box<Expr>),
    Yield(Option<Box<Expr>>),
    Walrus {
        name: String,
        value: Box<Expr>,
    },
}

/// A parsed module plus its token stream (windows are cut from the tokens).
#[derive(Debug, Clone)]
pub struct Module {
    pub body: Vec<Stmt>,
    pub tokens: Vec<super::Token>,
}

impl Stmt {
    /// Visit this statement and every nested statement, including function
    /// and class bodies.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        let suites: Vec<&Vec<Stmt>> = match self {
            Stmt::Function(d) => vec![&d.body],
            Stmt::Class(c) => vec![&c.body],
            Stmt::If { branches } => branches.iter().map(|(_, b)| b).collect(),
            Stmt::While { body, orelse, .. } => vec![body, orelse],
            Stmt::For { body, orelse, .. } => vec![body, orelse],
            Stmt::With { body, .. } => vec![body],
            Stmt::Try {
                body,
                handlers,
                orelse,
                finalbody,
            } => {
                let mut v: Vec<&Vec<Stmt>> = vec![body];
                v.extend(handlers.iter());
                v.push(orelse);
                v.push(finalbody);
                v
            }
            Stmt::Opaque { body } => vec![body],
            _ => vec![],
        };
        for suite in suites {
            for s in suite {
                s.walk(f);
            }
        }
    }
}
