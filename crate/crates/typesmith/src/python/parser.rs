//! Recursive-descent parser over the token stream.

use super::ast::*;
use super::lexer::{TokKind, Token};
use super::PyError;

/// Positional arguments plus keyword arguments of one call.
type CallArgs = (Vec<Expr>, Vec<(String, Expr)>);

pub fn parse_module(source: &str) -> Result<Module, PyError> {
    let tokens = super::tokenize(source)?;
    let mut p = Parser {
        toks: &tokens,
        pos: 0,
    };
    let mut body = Vec::new();
    while !p.at(TokKind::EndMarker) {
        body.push(p.statement()?);
    }
    Ok(Module {
        body,
        tokens,
    })
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn cur(&self) -> &'a Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn at(&self, kind: TokKind) -> bool {
        self.cur().kind == kind
    }

    fn at_op(&self, s: &str) -> bool {
        self.cur().is_op(s)
    }

    fn at_kw(&self, s: &str) -> bool {
        self.cur().is_kw(s)
    }

    fn bump(&mut self) -> &'a Token {
        let t = &self.toks[self.pos];
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat_op(&mut self, s: &str) -> bool {
        if self.at_op(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, s: &str) -> Result<&'a Token, PyError> {
        if self.at_op(s) {
            Ok(self.bump())
        } else {
            Err(self.err(format!("expected `{s}`, found `{}`", self.cur().text)))
        }
    }

    fn expect_name(&mut self) -> Result<&'a Token, PyError> {
        if self.at(TokKind::Name) {
            Ok(self.bump())
        } else {
            Err(self.err(format!("expected name, found `{}`", self.cur().text)))
        }
    }

    fn expect_newline(&mut self) -> Result<(), PyError> {
        if self.at(TokKind::Newline) {
            self.bump();
            Ok(())
        } else if self.at(TokKind::EndMarker) {
            Ok(())
        } else {
            Err(self.err(format!("expected end of line, found `{}`", self.cur().text)))
        }
    }

    fn err(&self, msg: impl Into<String>) -> PyError {
        PyError::new(self.cur().line, msg)
    }

    // ------------------------------------------------------------------
    // Statements
    // ------------------------------------------------------------------

    fn statement(&mut self) -> Result<Stmt, PyError> {
        let t = self.cur();
        match t.kind {
            TokKind::Keyword => match t.text.as_str() {
                "def" => self.function_def(false),
                "async" => {
                    // async def / async for / async with
                    let next = self.toks.get(self.pos + 1);
                    match next.map(|t| t.text.as_str()) {
                        Some("def") => {
                            self.bump();
                            self.function_def(true)
                        }
                        Some("for") => {
                            self.bump();
                            self.for_stmt()
                        }
                        Some("with") => {
                            self.bump();
                            self.with_stmt()
                        }
                        _ => Err(self.err("unexpected `async`")),
                    }
                }
                "class" => self.class_def(),
                "if" => self.if_stmt(),
                "while" => self.while_stmt(),
                "for" => self.for_stmt(),
                "with" => self.with_stmt(),
                "try" => self.try_stmt(),
                "import" | "from" => self.import_stmt(),
                _ => self.simple_line(),
            },
            TokKind::Op if t.text == "@" => {
                // Decorators are skipped: consume decorator lines, then parse
                // the underlying def or class.
                while self.at_op("@") {
                    while !self.at(TokKind::Newline) && !self.at(TokKind::EndMarker) {
                        self.bump();
                    }
                    self.expect_newline()?;
                }
                if self.at_kw("def") {
                    self.function_def(false)
                } else if self.at_kw("async") {
                    self.bump();
                    self.function_def(true)
                } else if self.at_kw("class") {
                    self.class_def()
                } else {
                    Err(self.err("decorator not followed by def or class"))
                }
            }
            _ => {
                if self.line_ends_with_colon() {
                    self.opaque_compound()
                } else {
                    self.simple_line()
                }
            }
        }
    }

    /// Does the current logical line end in a bare `:`? Used to recognize
    /// compound statements we do not model (e.g. `match`).
    fn line_ends_with_colon(&self) -> bool {
        let mut i = self.pos;
        while i < self.toks.len() {
            match self.toks[i].kind {
                TokKind::Newline | TokKind::EndMarker => {
                    return i > self.pos && self.toks[i - 1].is_op(":");
                }
                _ => i += 1,
            }
        }
        false
    }

    fn opaque_compound(&mut self) -> Result<Stmt, PyError> {
        while !self.at(TokKind::Newline) {
            if self.at(TokKind::EndMarker) {
                return Err(self.err("unexpected end of file"));
            }
            self.bump();
        }
        self.bump(); // newline
        let body = if self.at(TokKind::Indent) {
            self.indented_suite()?
        } else {
            Vec::new()
        };
        Ok(Stmt::Opaque { body })
    }

    /// One or more `;`-separated simple statements on a single logical line.
    /// Multiple statements are wrapped in an Opaque node to keep the
    /// single-statement return type.
    fn simple_line(&mut self) -> Result<Stmt, PyError> {
        let mut stmts = vec![self.simple_statement()?];
        while self.eat_op(";") {
            if self.at(TokKind::Newline) || self.at(TokKind::EndMarker) {
                break;
            }
            stmts.push(self.simple_statement()?);
        }
        self.expect_newline()?;
        if stmts.len() == 1 {
            Ok(stmts.pop().unwrap())
        } else {
            Ok(Stmt::Opaque { body: stmts })
        }
    }

    fn simple_statement(&mut self) -> Result<Stmt, PyError> {
        let t = self.cur();
        let line = t.line;
        if t.kind == TokKind::Keyword {
            match t.text.as_str() {
                "return" => {
                    let start_tok = self.pos;
                    self.bump();
                    let value = if self.at(TokKind::Newline)
                        || self.at(TokKind::EndMarker)
                        || self.at_op(";")
                    {
                        None
                    } else {
                        Some(self.expr_list()?)
                    };
                    return Ok(Stmt::Return {
                        value,
                        line,
                        tokens: (start_tok, self.pos),
                    });
                }
                "pass" => {
                    self.bump();
                    return Ok(Stmt::Pass);
                }
                "break" => {
                    self.bump();
                    return Ok(Stmt::Break);
                }
                "continue" => {
                    self.bump();
                    return Ok(Stmt::Continue);
                }
                "raise" => {
                    self.skip_to_line_end();
                    return Ok(Stmt::Raise { line });
                }
                "global" | "nonlocal" | "del" | "assert" => {
                    self.skip_to_line_end();
                    return Ok(Stmt::Other { line });
                }
                "yield" => {
                    self.skip_to_line_end();
                    return Ok(Stmt::ExprStmt {
                        value: Expr::Yield(None),
                        line,
                    });
                }
                _ => {}
            }
        }
        // expression / assignment / annotated assignment / augmented assignment
        let first = self.expr_list()?;
        if self.at_op(":") {
            // annotated assignment target
            self.bump();
            let (ann_text, _) = self.annotation_expr(&["="])?;
            let value = if self.eat_op("=") {
                Some(self.expr_list()?)
            } else {
                None
            };
            let name = match &first {
                Expr::Name { id, .. } => Some(id.clone()),
                _ => None,
            };
            return Ok(Stmt::AnnAssign {
                name,
                annotation: ann_text,
                value,
                line,
            });
        }
        for aug in [
            "+=", "-=", "*=", "/=", "//=", "%=", "@=", "**=", ">>=", "<<=", "&=", "|=", "^=",
        ] {
            if self.at_op(aug) {
                self.bump();
                let value = self.expr_list()?;
                return Ok(Stmt::AugAssign {
                    target: first,
                    op: aug.trim_end_matches('=').to_string(),
                    value,
                    line,
                });
            }
        }
        if self.at_op("=") {
            let mut targets = vec![first];
            let mut value = None;
            while self.eat_op("=") {
                let e = self.expr_list()?;
                if self.at_op("=") {
                    targets.push(e);
                } else {
                    value = Some(e);
                }
            }
            return Ok(Stmt::Assign {
                targets,
                value: value.expect("assignment has a value"),
                line,
            });
        }
        Ok(Stmt::ExprStmt { value: first, line })
    }

    fn skip_to_line_end(&mut self) {
        let mut depth = 0usize;
        loop {
            let t = self.cur();
            match t.kind {
                TokKind::Newline | TokKind::EndMarker if depth == 0 => return,
                TokKind::Op if matches!(t.text.as_str(), "(" | "[" | "{") => {
                    depth += 1;
                    self.bump();
                }
                TokKind::Op if matches!(t.text.as_str(), ")" | "]" | "}") => {
                    depth = depth.saturating_sub(1);
                    self.bump();
                }
                TokKind::Op if t.text == ";" && depth == 0 => return,
                TokKind::EndMarker => return,
                _ => {
                    self.bump();
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // Suites
    // ------------------------------------------------------------------

    /// Parse a suite after the `:` of a compound statement header.
    /// Returns the statements and the token index range of the suite.
    fn suite(&mut self) -> Result<(Vec<Stmt>, (usize, usize)), PyError> {
        if self.at(TokKind::Newline) {
            self.bump();
            let start = self.pos;
            if !self.at(TokKind::Indent) {
                return Err(self.err("expected an indented block"));
            }
            let body = self.indented_suite()?;
            // self.pos is one past the closing DEDENT.
            Ok((body, (start, self.pos - 1)))
        } else {
            // Simple suite on the header line: `def f(): return 1`
            let start = self.pos;
            let mut stmts = vec![self.simple_statement()?];
            while self.eat_op(";") {
                if self.at(TokKind::Newline) || self.at(TokKind::EndMarker) {
                    break;
                }
                stmts.push(self.simple_statement()?);
            }
            let end = self.pos + 1; // include the trailing NEWLINE
            self.expect_newline()?;
            Ok((stmts, (start, end.min(self.toks.len()))))
        }
    }

    fn indented_suite(&mut self) -> Result<Vec<Stmt>, PyError> {
        self.bump(); // INDENT
        let mut body = Vec::new();
        while !self.at(TokKind::Dedent) {
            if self.at(TokKind::EndMarker) {
                return Err(self.err("unexpected end of file in block"));
            }
            body.push(self.statement()?);
        }
        self.bump(); // DEDENT
        Ok(body)
    }

    // ------------------------------------------------------------------
    // Compound statements
    // ------------------------------------------------------------------

    fn function_def(&mut self, is_async: bool) -> Result<Stmt, PyError> {
        let def_tok = self.bump(); // def
        let line = def_tok.line;
        let name = self.expect_name()?.text.clone();
        self.expect_op("(")?;
        let mut params = Vec::new();
        while !self.at_op(")") {
            if self.at(TokKind::EndMarker) {
                return Err(self.err("unterminated parameter list"));
            }
            if self.eat_op("/") {
                self.eat_op(",");
                continue;
            }
            if self.at_op("*") && self.toks[self.pos + 1].is_op(",") {
                // bare `*` keyword-only marker
                self.bump();
                self.eat_op(",");
                continue;
            }
            if self.at_op("*") && self.toks[self.pos + 1].is_op(")") {
                self.bump();
                continue;
            }
            let kind = if self.eat_op("**") {
                ParamKind::KwArgs
            } else if self.eat_op("*") {
                ParamKind::VarArgs
            } else {
                ParamKind::Plain
            };
            let name_tok = self.expect_name()?;
            let mut param = Param {
                name: name_tok.text.clone(),
                kind,
                name_end: name_tok.end,
                annotation: None,
                has_default: false,
                line: name_tok.line,
            };
            if self.at_op(":") {
                let colon = self.bump();
                let (canonical, end) = self.annotation_expr(&["=", ",", ")"])?;
                param.annotation = Some(Annotation {
                    span: ByteSpan {
                        start: colon.start,
                        end,
                    },
                    canonical,
                });
            }
            if self.eat_op("=") {
                self.expr()?; // default value, structure not needed
                param.has_default = true;
            }
            params.push(param);
            if !self.eat_op(",") {
                break;
            }
        }
        let close = self.expect_op(")")?;
        let params_end = close.end;
        let mut return_annotation = None;
        if self.at_op("->") {
            let arrow = self.bump();
            let (canonical, end) = self.annotation_expr(&[":"])?;
            return_annotation = Some(Annotation {
                span: ByteSpan {
                    start: arrow.start,
                    end,
                },
                canonical,
            });
        }
        self.expect_op(":")?;
        let (body, body_tokens) = self.suite()?;
        let docstring = suite_docstring(&body, self.toks, body_tokens);
        // Dedents carry the line of the next statement, not the body's.
        let end_line = self.toks[body_tokens.0..body_tokens.1]
            .iter()
            .filter(|t| t.kind != TokKind::Dedent)
            .map(|t| t.line)
            .max()
            .unwrap_or(line);
        let has_yield = body_has_yield(&body);
        Ok(Stmt::Function(FunctionDef {
            name,
            params,
            params_end,
            return_annotation,
            body,
            docstring,
            line,
            end_line,
            body_tokens,
            is_async,
            has_yield,
        }))
    }

    /// Parse an annotation expression, stopping at any of `stops` at depth 0.
    /// Returns the whitespace-free source text and the end byte offset.
    fn annotation_expr(&mut self, stops: &[&str]) -> Result<(String, usize), PyError> {
        let start_tok = self.pos;
        let mut depth = 0usize;
        loop {
            let t = self.cur();
            match t.kind {
                TokKind::Newline | TokKind::EndMarker => break,
                TokKind::Op => {
                    if depth == 0 && stops.contains(&t.text.as_str()) {
                        break;
                    }
                    match t.text.as_str() {
                        "(" | "[" | "{" => depth += 1,
                        ")" | "]" | "}" => {
                            if depth == 0 {
                                break;
                            }
                            depth -= 1;
                        }
                        _ => {}
                    }
                    self.bump();
                }
                _ => {
                    self.bump();
                }
            }
        }
        if self.pos == start_tok {
            return Err(self.err("empty annotation"));
        }
        let canonical: String = self.toks[start_tok..self.pos]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<String>()
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect();
        let end = self.toks[self.pos - 1].end;
        Ok((canonical, end))
    }

    fn class_def(&mut self) -> Result<Stmt, PyError> {
        let class_tok = self.bump();
        let line = class_tok.line;
        let name = self.expect_name()?.text.clone();
        if self.at_op("(") {
            // base list: skip balanced
            let mut depth = 0usize;
            loop {
                let t = self.bump();
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                if t.kind == TokKind::EndMarker {
                    return Err(self.err("unterminated class header"));
                }
            }
        }
        self.expect_op(":")?;
        let (body, _) = self.suite()?;
        Ok(Stmt::Class(ClassDef { name, body, line }))
    }

    fn if_stmt(&mut self) -> Result<Stmt, PyError> {
        let mut branches = Vec::new();
        self.bump(); // if
        let test = self.expr()?;
        self.expect_op(":")?;
        let (body, _) = self.suite()?;
        branches.push((Some(test), body));
        loop {
            if self.at_kw("elif") {
                self.bump();
                let test = self.expr()?;
                self.expect_op(":")?;
                let (body, _) = self.suite()?;
                branches.push((Some(test), body));
            } else if self.at_kw("else") {
                self.bump();
                self.expect_op(":")?;
                let (body, _) = self.suite()?;
                branches.push((None, body));
                break;
            } else {
                break;
            }
        }
        Ok(Stmt::If { branches })
    }

    fn while_stmt(&mut self) -> Result<Stmt, PyError> {
        self.bump();
        let test = self.expr()?;
        self.expect_op(":")?;
        let (body, _) = self.suite()?;
        let orelse = self.opt_else()?;
        Ok(Stmt::While { test, body, orelse })
    }

    fn for_stmt(&mut self) -> Result<Stmt, PyError> {
        self.bump();
        let target = self.target_list()?;
        if !self.at_kw("in") {
            return Err(self.err("expected `in`"));
        }
        self.bump();
        let iter = self.expr_list()?;
        self.expect_op(":")?;
        let (body, _) = self.suite()?;
        let orelse = self.opt_else()?;
        Ok(Stmt::For {
            target,
            iter,
            body,
            orelse,
        })
    }

    fn opt_else(&mut self) -> Result<Vec<Stmt>, PyError> {
        if self.at_kw("else") {
            self.bump();
            self.expect_op(":")?;
            let (body, _) = self.suite()?;
            Ok(body)
        } else {
            Ok(Vec::new())
        }
    }

    fn with_stmt(&mut self) -> Result<Stmt, PyError> {
        self.bump();
        let mut items = Vec::new();
        loop {
            let ctx = self.expr()?;
            let alias = if self.at_kw("as") {
                self.bump();
                Some(self.expect_name()?.text.clone())
            } else {
                None
            };
            items.push((ctx, alias));
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(":")?;
        let (body, _) = self.suite()?;
        Ok(Stmt::With { items, body })
    }

    fn try_stmt(&mut self) -> Result<Stmt, PyError> {
        self.bump();
        self.expect_op(":")?;
        let (body, _) = self.suite()?;
        let mut handlers = Vec::new();
        while self.at_kw("except") {
            self.bump();
            self.eat_op("*"); // except* groups
            if !self.at_op(":") {
                self.expr()?;
                if self.at_kw("as") {
                    self.bump();
                    self.expect_name()?;
                }
            }
            self.expect_op(":")?;
            let (h, _) = self.suite()?;
            handlers.push(h);
        }
        let orelse = self.opt_else()?;
        let finalbody = if self.at_kw("finally") {
            self.bump();
            self.expect_op(":")?;
            let (b, _) = self.suite()?;
            b
        } else {
            Vec::new()
        };
        Ok(Stmt::Try {
            body,
            handlers,
            orelse,
            finalbody,
        })
    }

    fn import_stmt(&mut self) -> Result<Stmt, PyError> {
        if self.at_kw("import") {
            self.bump();
            let mut names = Vec::new();
            loop {
                let mut dotted = self.expect_name()?.text.clone();
                while self.eat_op(".") {
                    dotted.push('.');
                    dotted.push_str(&self.expect_name()?.text);
                }
                let alias = if self.at_kw("as") {
                    self.bump();
                    Some(self.expect_name()?.text.clone())
                } else {
                    None
                };
                names.push((dotted, alias));
                if !self.eat_op(",") {
                    break;
                }
            }
            self.expect_newline()?;
            Ok(Stmt::Import(ImportNames::Plain(names)))
        } else {
            // from ... import ...
            self.bump();
            let mut module = String::new();
            while self.at_op(".") || self.at_op("...") {
                module.push_str(&self.bump().text);
            }
            while self.at(TokKind::Name) {
                module.push_str(&self.bump().text);
                if self.at_op(".") {
                    module.push('.');
                    self.bump();
                } else {
                    break;
                }
            }
            if !self.at_kw("import") {
                return Err(self.err("expected `import`"));
            }
            self.bump();
            if self.eat_op("*") {
                self.expect_newline()?;
                return Ok(Stmt::Import(ImportNames::From {
                    names: Vec::new(),
                    star: true,
                }));
            }
            let parenthesized = self.eat_op("(");
            let mut names = Vec::new();
            loop {
                if parenthesized && self.at_op(")") {
                    break;
                }
                let name = self.expect_name()?.text.clone();
                let alias = if self.at_kw("as") {
                    self.bump();
                    Some(self.expect_name()?.text.clone())
                } else {
                    None
                };
                names.push((name, alias));
                if !self.eat_op(",") {
                    break;
                }
            }
            if parenthesized {
                self.expect_op(")")?;
            }
            self.expect_newline()?;
            Ok(Stmt::Import(ImportNames::From { names, star: false }))
        }
    }

    // ------------------------------------------------------------------
    // Expressions
    // ------------------------------------------------------------------

    /// `a, b, c` without parentheses (tuple display or plain expression).
    fn expr_list(&mut self) -> Result<Expr, PyError> {
        let first = self.expr()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.expr_starts() {
                items.push(self.expr()?);
            } else {
                break;
            }
        }
        Ok(Expr::Tuple(items))
    }

    /// Assignment-target list for `for` headers: postfix expressions only,
    /// so the `in` keyword stays unconsumed.
    fn target_list(&mut self) -> Result<Expr, PyError> {
        let first = self.target_atom()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_kw("in") {
                break;
            }
            items.push(self.target_atom()?);
        }
        Ok(Expr::Tuple(items))
    }

    fn target_atom(&mut self) -> Result<Expr, PyError> {
        if self.eat_op("*") {
            let inner = self.target_atom()?;
            return Ok(Expr::Starred(Box::new(inner)));
        }
        if self.at_op("(") || self.at_op("[") {
            let close = if self.at_op("(") { ")" } else { "]" };
            self.bump();
            let mut items = Vec::new();
            while !self.at_op(close) {
                items.push(self.target_atom()?);
                if !self.eat_op(",") {
                    break;
                }
            }
            self.expect_op(close)?;
            return Ok(Expr::Tuple(items));
        }
        self.postfix()
    }

    fn expr_starts(&self) -> bool {
        let t = self.cur();
        match t.kind {
            TokKind::Name | TokKind::Number | TokKind::Str => true,
            TokKind::Keyword => matches!(
                t.text.as_str(),
                "None" | "True" | "False" | "not" | "lambda" | "await" | "yield"
            ),
            TokKind::Op => matches!(
                t.text.as_str(),
                "(" | "[" | "{" | "-" | "+" | "~" | "*" | "**" | "..."
            ),
            _ => false,
        }
    }

    fn expr(&mut self) -> Result<Expr, PyError> {
        self.ternary()
    }

    fn ternary(&mut self) -> Result<Expr, PyError> {
        if self.at_kw("lambda") {
            return self.lambda();
        }
        if self.at_kw("yield") {
            self.bump();
            if self.at_kw("from") {
                self.bump();
                let inner = self.expr()?;
                return Ok(Expr::Yield(Some(Box::new(inner))));
            }
            if self.expr_starts() {
                let inner = self.expr_list()?;
                return Ok(Expr::Yield(Some(Box::new(inner))));
            }
            return Ok(Expr::Yield(None));
        }
        let body = self.or_expr()?;
        if self.at_kw("if") {
            self.bump();
            self.or_expr()?; // condition
            if !self.at_kw("else") {
                return Err(self.err("expected `else` in conditional expression"));
            }
            self.bump();
            let orelse = self.expr()?;
            return Ok(Expr::IfExp {
                body: Box::new(body),
                orelse: Box::new(orelse),
            });
        }
        Ok(body)
    }

    fn lambda(&mut self) -> Result<Expr, PyError> {
        self.bump(); // lambda
        while !self.at_op(":") {
            if self.at(TokKind::Newline) || self.at(TokKind::EndMarker) {
                return Err(self.err("malformed lambda"));
            }
            // parameter names and defaults; defaults may nest parens
            if self.at_op("(") || self.at_op("[") || self.at_op("{") {
                let mut depth = 0usize;
                loop {
                    let t = self.bump();
                    match t.text.as_str() {
                        "(" | "[" | "{" => depth += 1,
                        ")" | "]" | "}" => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        _ => {}
                    }
                }
            } else {
                self.bump();
            }
        }
        self.bump(); // :
        self.expr()?;
        Ok(Expr::Lambda)
    }

    fn or_expr(&mut self) -> Result<Expr, PyError> {
        let first = self.and_expr()?;
        if !self.at_kw("or") {
            return Ok(first);
        }
        let mut values = vec![first];
        while self.at_kw("or") {
            self.bump();
            values.push(self.and_expr()?);
        }
        Ok(Expr::BoolOp { values })
    }

    fn and_expr(&mut self) -> Result<Expr, PyError> {
        let first = self.not_expr()?;
        if !self.at_kw("and") {
            return Ok(first);
        }
        let mut values = vec![first];
        while self.at_kw("and") {
            self.bump();
            values.push(self.not_expr()?);
        }
        Ok(Expr::BoolOp { values })
    }

    fn not_expr(&mut self) -> Result<Expr, PyError> {
        if self.at_kw("not") {
            self.bump();
            let operand = self.not_expr()?;
            return Ok(Expr::UnaryOp {
                op: "not".to_string(),
                operand: Box::new(operand),
            });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, PyError> {
        let left = self.bitor()?;
        let mut rest = Vec::new();
        loop {
            let is_cmp = if self.cur().kind == TokKind::Op {
                matches!(self.cur().text.as_str(), "==" | "!=" | "<" | "<=" | ">" | ">=")
            } else {
                self.at_kw("in") || self.at_kw("is") || self.at_kw("not")
            };
            if !is_cmp {
                break;
            }
            if self.at_kw("not") {
                self.bump();
                if !self.at_kw("in") {
                    return Err(self.err("expected `in` after `not`"));
                }
                self.bump();
            } else if self.at_kw("is") {
                self.bump();
                if self.at_kw("not") {
                    self.bump();
                }
            } else {
                self.bump();
            }
            rest.push(self.bitor()?);
        }
        if rest.is_empty() {
            Ok(left)
        } else {
            Ok(Expr::Compare {
                left: Box::new(left),
                rest,
            })
        }
    }

    fn bitor(&mut self) -> Result<Expr, PyError> {
        let mut left = self.bitxor()?;
        while self.at_op("|") {
            let line = self.bump().line;
            let right = self.bitxor()?;
            left = Expr::BinOp {
                op: "|".to_string(),
                left: Box::new(left),
                right: Box::new(right),
                line,
            };
        }
        Ok(left)
    }

    fn bitxor(&mut self) -> Result<Expr, PyError> {
        let mut left = self.bitand()?;
        while self.at_op("^") {
            let line = self.bump().line;
            let right = self.bitand()?;
            left = Expr::BinOp {
                op: "^".to_string(),
                left: Box::new(left),
                right: Box::new(right),
                line,
            };
        }
        Ok(left)
    }

    fn bitand(&mut self) -> Result<Expr, PyError> {
        let mut left = self.shift()?;
        while self.at_op("&") {
            let line = self.bump().line;
            let right = self.shift()?;
            left = Expr::BinOp {
                op: "&".to_string(),
                left: Box::new(left),
                right: Box::new(right),
                line,
            };
        }
        Ok(left)
    }

    fn shift(&mut self) -> Result<Expr, PyError> {
        let mut left = self.arith()?;
        while self.at_op("<<") || self.at_op(">>") {
            let t = self.bump();
            let (op, line) = (t.text.clone(), t.line);
            let right = self.arith()?;
            left = Expr::BinOp {
                op,
                left: Box::new(left),
                right: Box::new(right),
                line,
            };
        }
        Ok(left)
    }

    fn arith(&mut self) -> Result<Expr, PyError> {
        let mut left = self.term()?;
        while self.at_op("+") || self.at_op("-") {
            let t = self.bump();
            let (op, line) = (t.text.clone(), t.line);
            let right = self.term()?;
            left = Expr::BinOp {
                op,
                left: Box::new(left),
                right: Box::new(right),
                line,
            };
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<Expr, PyError> {
        let mut left = self.unary()?;
        loop {
            let op = if self.at_op("*") {
                "*"
            } else if self.at_op("/") {
                "/"
            } else if self.at_op("//") {
                "//"
            } else if self.at_op("%") {
                "%"
            } else if self.at_op("@") {
                "@"
            } else {
                break;
            };
            let line = self.bump().line;
            let right = self.unary()?;
            left = Expr::BinOp {
                op: op.to_string(),
                left: Box::new(left),
                right: Box::new(right),
                line,
            };
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, PyError> {
        if self.at_op("-") || self.at_op("+") || self.at_op("~") {
            let op = self.bump().text.clone();
            let operand = self.unary()?;
            return Ok(Expr::UnaryOp {
                op,
                operand: Box::new(operand),
            });
        }
        if self.at_kw("await") {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Await(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, PyError> {
        let base = self.postfix()?;
        if self.at_op("**") {
            let line = self.bump().line;
            let exp = self.unary()?;
            return Ok(Expr::BinOp {
                op: "**".to_string(),
                left: Box::new(base),
                right: Box::new(exp),
                line,
            });
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Expr, PyError> {
        let mut e = self.atom()?;
        loop {
            if self.at_op("(") {
                let line = self.cur().line;
                let (args, kwargs) = self.call_args()?;
                e = Expr::Call {
                    func: Box::new(e),
                    args,
                    kwargs,
                    line,
                };
            } else if self.at_op("[") {
                self.bump();
                // subscripts and slices, possibly with colons at depth 0
                let mut depth = 0usize;
                loop {
                    let t = self.cur();
                    if t.kind == TokKind::EndMarker {
                        return Err(self.err("unterminated subscript"));
                    }
                    match t.text.as_str() {
                        "(" | "[" | "{" => {
                            depth += 1;
                            self.bump();
                        }
                        ")" | "}" => {
                            depth = depth.saturating_sub(1);
                            self.bump();
                        }
                        "]" => {
                            if depth == 0 {
                                self.bump();
                                break;
                            }
                            depth -= 1;
                            self.bump();
                        }
                        _ => {
                            self.bump();
                        }
                    }
                }
                e = Expr::Subscript { value: Box::new(e) };
            } else if self.at_op(".") {
                self.bump();
                let attr = self.expect_name()?.text.clone();
                e = Expr::Attribute {
                    value: Box::new(e),
                    attr,
                };
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn call_args(&mut self) -> Result<CallArgs, PyError> {
        self.bump(); // (
        let mut args = Vec::new();
        let mut kwargs = Vec::new();
        let mut first = true;
        while !self.at_op(")") {
            if self.at(TokKind::EndMarker) {
                return Err(self.err("unterminated call"));
            }
            if self.eat_op("*") {
                args.push(Expr::Starred(Box::new(self.expr()?)));
            } else if self.eat_op("**") {
                self.expr()?;
            } else if self.at(TokKind::Name) && self.toks[self.pos + 1].is_op("=") {
                let name = self.bump().text.clone();
                self.bump(); // =
                kwargs.push((name, self.expr()?));
            } else {
                let e = self.expr()?;
                if first && self.at_kw("for") {
                    // generator expression argument: f(x for x in xs)
                    self.skip_comprehension()?;
                    args.push(Expr::GenExp);
                    break;
                }
                args.push(e);
            }
            first = false;
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        Ok((args, kwargs))
    }

    /// Consume `for ... in ... [if ...]` clauses up to the closing bracket,
    /// which is left unconsumed.
    fn skip_comprehension(&mut self) -> Result<(), PyError> {
        let mut depth = 0usize;
        loop {
            let t = self.cur();
            if t.kind == TokKind::EndMarker {
                return Err(self.err("unterminated comprehension"));
            }
            match t.text.as_str() {
                "(" | "[" | "{" => {
                    depth += 1;
                    self.bump();
                }
                ")" | "]" | "}" => {
                    if depth == 0 {
                        return Ok(());
                    }
                    depth -= 1;
                    self.bump();
                }
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, PyError> {
        let t = self.cur();
        match t.kind {
            TokKind::Number => {
                let is_float = t.text.contains('.')
                    || (t.text.contains(['e', 'E'])
                        && !t.text.starts_with("0x")
                        && !t.text.starts_with("0X"));
                self.bump();
                Ok(if is_float { Expr::Float } else { Expr::Int })
            }
            TokKind::Str => {
                let mut is_f = false;
                let mut is_b = false;
                // adjacent string literals concatenate
                while self.at(TokKind::Str) {
                    let text = &self.bump().text;
                    let prefix: String = text
                        .chars()
                        .take_while(|c| *c != '"' && *c != '\'')
                        .collect();
                    is_f |= prefix.to_ascii_lowercase().contains('f');
                    is_b |= prefix.to_ascii_lowercase().contains('b');
                }
                Ok(if is_f {
                    Expr::FStr
                } else if is_b {
                    Expr::Bytes
                } else {
                    Expr::Str
                })
            }
            TokKind::Keyword => match t.text.as_str() {
                "None" => {
                    self.bump();
                    Ok(Expr::NoneLit)
                }
                "True" | "False" => {
                    let v = t.text == "True";
                    self.bump();
                    Ok(Expr::Bool(v))
                }
                "lambda" => self.lambda(),
                _ => Err(self.err(format!("unexpected keyword `{}`", t.text))),
            },
            TokKind::Name => {
                let name_tok = self.bump();
                if self.at_op(":=") {
                    self.bump();
                    let value = self.expr()?;
                    return Ok(Expr::Walrus {
                        name: name_tok.text.clone(),
                        value: Box::new(value),
                    });
                }
                Ok(Expr::Name {
                    id: name_tok.text.clone(),
                    line: name_tok.line,
                })
            }
            TokKind::Op => match t.text.as_str() {
                "..." => {
                    self.bump();
                    Ok(Expr::Ellipsis)
                }
                "(" => {
                    self.bump();
                    if self.eat_op(")") {
                        return Ok(Expr::Tuple(Vec::new()));
                    }
                    let first = self.expr()?;
                    if self.at_kw("for") {
                        self.skip_comprehension()?;
                        self.expect_op(")")?;
                        return Ok(Expr::GenExp);
                    }
                    if self.at_op(",") {
                        let mut items = vec![first];
                        while self.eat_op(",") {
                            if self.at_op(")") {
                                break;
                            }
                            items.push(self.expr()?);
                        }
                        self.expect_op(")")?;
                        return Ok(Expr::Tuple(items));
                    }
                    self.expect_op(")")?;
                    Ok(first)
                }
                "[" => {
                    self.bump();
                    if self.eat_op("]") {
                        return Ok(Expr::List(Vec::new()));
                    }
                    let first = if self.eat_op("*") {
                        Expr::Starred(Box::new(self.expr()?))
                    } else {
                        self.expr()?
                    };
                    if self.at_kw("for") {
                        self.skip_comprehension()?;
                        self.expect_op("]")?;
                        return Ok(Expr::ListComp);
                    }
                    let mut items = vec![first];
                    while self.eat_op(",") {
                        if self.at_op("]") {
                            break;
                        }
                        if self.eat_op("*") {
                            items.push(Expr::Starred(Box::new(self.expr()?)));
                        } else {
                            items.push(self.expr()?);
                        }
                    }
                    self.expect_op("]")?;
                    Ok(Expr::List(items))
                }
                "{" => {
                    self.bump();
                    if self.eat_op("}") {
                        return Ok(Expr::Dict(Vec::new()));
                    }
                    if self.eat_op("**") {
                        // {**base, ...}
                        self.expr()?;
                        let mut pairs = Vec::new();
                        while self.eat_op(",") {
                            if self.at_op("}") {
                                break;
                            }
                            if self.eat_op("**") {
                                self.expr()?;
                                continue;
                            }
                            let k = self.expr()?;
                            self.expect_op(":")?;
                            let v = self.expr()?;
                            pairs.push((k, v));
                        }
                        self.expect_op("}")?;
                        return Ok(Expr::Dict(pairs));
                    }
                    let first = self.expr()?;
                    if self.at_op(":") {
                        self.bump();
                        let v = self.expr()?;
                        if self.at_kw("for") {
                            self.skip_comprehension()?;
                            self.expect_op("}")?;
                            return Ok(Expr::DictComp);
                        }
                        let mut pairs = vec![(first, v)];
                        while self.eat_op(",") {
                            if self.at_op("}") {
                                break;
                            }
                            if self.eat_op("**") {
                                self.expr()?;
                                continue;
                            }
                            let k = self.expr()?;
                            self.expect_op(":")?;
                            let v = self.expr()?;
                            pairs.push((k, v));
                        }
                        self.expect_op("}")?;
                        return Ok(Expr::Dict(pairs));
                    }
                    if self.at_kw("for") {
                        self.skip_comprehension()?;
                        self.expect_op("}")?;
                        return Ok(Expr::SetComp);
                    }
                    let mut items = vec![first];
                    while self.eat_op(",") {
                        if self.at_op("}") {
                            break;
                        }
                        items.push(self.expr()?);
                    }
                    self.expect_op("}")?;
                    Ok(Expr::Set(items))
                }
                _ => Err(self.err(format!("unexpected token `{}`", t.text))),
            },
            _ => Err(self.err(format!("unexpected token `{}`", t.text))),
        }
    }
}

/// Extract the docstring from a suite: a leading expression statement whose
/// value is a plain string literal. Returns the cooked, whitespace-normalized
/// text.
fn suite_docstring(body: &[Stmt], toks: &[Token], body_tokens: (usize, usize)) -> Option<String> {
    match body.first() {
        Some(Stmt::ExprStmt {
            value: Expr::Str, ..
        }) => {}
        _ => return None,
    }
    // The first Str token in the suite range is the docstring literal.
    let tok = toks[body_tokens.0..body_tokens.1]
        .iter()
        .find(|t| t.kind == TokKind::Str)?;
    Some(cook_string(&tok.text))
}

/// Strip prefix letters and quotes, then collapse internal whitespace.
fn cook_string(raw: &str) -> String {
    let body = raw.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    let body = if body.starts_with("\"\"\"") || body.starts_with("'''") {
        &body[3..body.len().saturating_sub(3)]
    } else if body.starts_with('"') || body.starts_with('\'') {
        &body[1..body.len().saturating_sub(1)]
    } else {
        body
    };
    body.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn body_has_yield(body: &[Stmt]) -> bool {
    fn expr_has_yield(e: &Expr) -> bool {
        match e {
            Expr::Yield(_) => true,
            Expr::Tuple(xs) | Expr::List(xs) | Expr::Set(xs) | Expr::BoolOp { values: xs } => {
                xs.iter().any(expr_has_yield)
            }
            Expr::Dict(pairs) => pairs.iter().any(|(k, v)| expr_has_yield(k) || expr_has_yield(v)),
            Expr::Call { func, args, kwargs, .. } => {
                expr_has_yield(func)
                    || args.iter().any(expr_has_yield)
                    || kwargs.iter().any(|(_, v)| expr_has_yield(v))
            }
            Expr::Attribute { value, .. } | Expr::Subscript { value } => expr_has_yield(value),
            Expr::BinOp { left, right, .. } => expr_has_yield(left) || expr_has_yield(right),
            Expr::UnaryOp { operand, .. } => expr_has_yield(operand),
            Expr::Compare { left, rest } => {
                expr_has_yield(left) || rest.iter().any(expr_has_yield)
            }
            Expr::IfExp { body, orelse } => expr_has_yield(body) || expr_has_yield(orelse),
            Expr::Starred(x) | Expr::Await(x) => expr_has_yield(x),
            Expr::Walrus { value, .. } => expr_has_yield(value),
            _ => false,
        }
    }
    fn stmt_has_yield(s: &Stmt) -> bool {
        match s {
            // Nested functions own their yields.
            Stmt::Function(_) | Stmt::Class(_) => false,
            Stmt::Return { value, .. } => value.as_ref().map(expr_has_yield).unwrap_or(false),
            Stmt::Assign { targets, value, .. } => {
                targets.iter().any(expr_has_yield) || expr_has_yield(value)
            }
            Stmt::AnnAssign { value, .. } => value.as_ref().map(expr_has_yield).unwrap_or(false),
            Stmt::AugAssign { target, value, .. } => {
                expr_has_yield(target) || expr_has_yield(value)
            }
            Stmt::ExprStmt { value, .. } => expr_has_yield(value),
            Stmt::If { branches } => branches
                .iter()
                .any(|(c, b)| c.as_ref().map(expr_has_yield).unwrap_or(false) || b.iter().any(stmt_has_yield)),
            Stmt::While { test, body, orelse } => {
                expr_has_yield(test)
                    || body.iter().any(stmt_has_yield)
                    || orelse.iter().any(stmt_has_yield)
            }
            Stmt::For {
                target,
                iter,
                body,
                orelse,
            } => {
                expr_has_yield(target)
                    || expr_has_yield(iter)
                    || body.iter().any(stmt_has_yield)
                    || orelse.iter().any(stmt_has_yield)
            }
            Stmt::With { items, body } => {
                items.iter().any(|(e, _)| expr_has_yield(e)) || body.iter().any(stmt_has_yield)
            }
            Stmt::Try {
                body,
                handlers,
                orelse,
                finalbody,
            } => {
                body.iter().any(stmt_has_yield)
                    || handlers.iter().any(|h| h.iter().any(stmt_has_yield))
                    || orelse.iter().any(stmt_has_yield)
                    || finalbody.iter().any(stmt_has_yield)
            }
            Stmt::Opaque { body } => body.iter().any(stmt_has_yield),
            _ => false,
        }
    }
    body.iter().any(stmt_has_yield)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_fn(src: &str) -> FunctionDef {
        let module = parse_module(src).unwrap();
        for s in module.body {
            if let Stmt::Function(f) = s {
                return f;
            }
        }
        panic!("no function in module");
    }

    #[test]
    fn signature_with_annotations_and_defaults() {
        let f = first_fn("def f(x: int = 3, *args, y: str, **kw) -> List[int]:\n    pass\n");
        assert_eq!(f.name, "f");
        assert_eq!(f.params.len(), 4);
        assert_eq!(f.params[0].name, "x");
        assert_eq!(f.params[0].annotation.as_ref().unwrap().canonical, "int");
        assert!(f.params[0].has_default);
        assert_eq!(f.params[1].kind, ParamKind::VarArgs);
        assert_eq!(f.params[2].name, "y");
        assert_eq!(f.params[3].kind, ParamKind::KwArgs);
        assert_eq!(f.return_annotation.unwrap().canonical, "List[int]");
    }

    #[test]
    fn annotation_canonical_strips_whitespace() {
        let f = first_fn("def f(m: Dict[str, bool]) -> Tuple[int, str]:\n    pass\n");
        assert_eq!(
            f.params[0].annotation.as_ref().unwrap().canonical,
            "Dict[str,bool]"
        );
        assert_eq!(f.return_annotation.unwrap().canonical, "Tuple[int,str]");
    }

    #[test]
    fn docstring_is_cooked_and_normalized() {
        let f = first_fn(
            "def update_name(name, do_propagate, element):\n    \"\"\" Update the name and (optionally)\n        propagate to dependents. \"\"\"\n    pass\n",
        );
        assert_eq!(
            f.docstring.unwrap(),
            "Update the name and (optionally) propagate to dependents."
        );
    }

    #[test]
    fn nested_functions_and_classes_parse() {
        let src = "class A:\n    def m(self):\n        def inner():\n            return 1\n        return inner\n";
        let module = parse_module(src).unwrap();
        let Stmt::Class(c) = &module.body[0] else {
            panic!()
        };
        let Stmt::Function(m) = &c.body[0] else {
            panic!()
        };
        assert_eq!(m.name, "m");
        assert!(matches!(m.body[0], Stmt::Function(_)));
    }

    #[test]
    fn return_statements_record_lines() {
        let src = "def f(x):\n    if x:\n        return 1\n    return None\n";
        let f = first_fn(src);
        let mut lines = Vec::new();
        for s in &f.body {
            s.walk(&mut |s| {
                if let Stmt::Return { line, .. } = s {
                    lines.push(*line);
                }
            });
        }
        assert_eq!(lines, vec![3, 4]);
    }

    #[test]
    fn match_statement_parses_as_opaque_block() {
        let src = "def f(x):\n    match x:\n        case 1:\n            return 1\n        case _:\n            return 2\n";
        let f = first_fn(src);
        assert!(matches!(f.body[0], Stmt::Opaque { .. }));
        let mut returns = 0;
        for s in &f.body {
            s.walk(&mut |s| {
                if matches!(s, Stmt::Return { .. }) {
                    returns += 1;
                }
            });
        }
        assert_eq!(returns, 2);
    }

    #[test]
    fn imports_bind_expected_names() {
        let src = "import os.path\nimport numpy as np\nfrom html import HtmlElement\nfrom a.b import c as d, e\nfrom x import *\n";
        let module = parse_module(src).unwrap();
        let mut plains = Vec::new();
        let mut froms = Vec::new();
        for s in &module.body {
            match s {
                Stmt::Import(ImportNames::Plain(names)) => plains.extend(names.clone()),
                Stmt::Import(ImportNames::From { names, .. }) => froms.extend(names.clone()),
                _ => {}
            }
        }
        assert_eq!(
            plains,
            vec![
                ("os.path".to_string(), None),
                ("numpy".to_string(), Some("np".to_string()))
            ]
        );
        assert_eq!(
            froms,
            vec![
                ("HtmlElement".to_string(), None),
                ("c".to_string(), Some("d".to_string())),
                ("e".to_string(), None)
            ]
        );
    }

    #[test]
    fn generator_functions_are_flagged() {
        let f = first_fn("def f(xs):\n    for x in xs:\n        yield x\n");
        assert!(f.has_yield);
        let g = first_fn("def g(xs):\n    def h():\n        yield 1\n    return h\n");
        assert!(!g.has_yield);
    }

    #[test]
    fn lambda_default_with_colon_in_signature() {
        let f = first_fn("def f(g=lambda x: x + 1, y=2):\n    return g(y)\n");
        assert_eq!(f.params.len(), 2);
        assert_eq!(f.params[1].name, "y");
    }

    #[test]
    fn multiline_signature_spans_are_per_line() {
        let src = "def f(\n    alpha,\n    beta = 2,\n):\n    return alpha\n";
        let f = first_fn(src);
        assert_eq!(f.params[0].line, 2);
        assert_eq!(f.params[1].line, 3);
    }

    #[test]
    fn comprehension_and_ternary_expressions() {
        let src = "xs = [i * 2 for i in range(3)]\ny = {k: v for k, v in d.items()}\nz = 1 if w else 2\ncall(x for x in xs)\n";
        assert!(parse_module(src).is_ok());
    }

    #[test]
    fn walrus_and_fstrings() {
        let src = "if (n := len(a)) > 10:\n    print(f\"{n} items\")\n";
        assert!(parse_module(src).is_ok());
    }

    #[test]
    fn assorted_real_world_shapes() {
        let snippets = [
            "@app.route(\"/x\", methods=[\"GET\"])\ndef handler(req):\n    return req\n",
            "def f(a, /, b, *, c=1, **kw):\n    return a\n",
            "x = {k: v for k, v in pairs if k}\ny = [i for row in grid for i in row]\n",
            "result = obj.method(1, 2).chain()[0].attr\n",
            "try:\n    import fast_json as json\nexcept ImportError:\n    import json\n",
            "def g():\n    global counter\n    counter += 1\n    return counter\n",
            "async def fetch(url):\n    async with session.get(url) as resp:\n        async for chunk in resp:\n            yield chunk\n",
            "def h(cb=lambda a, b=2: a + b):\n    return cb(1)\n",
            "s = f\"{value:>10.2f} and {other!r}\"\n",
            "def k():\n    x = 1; y = 2; return x + y\n",
            "values = data[1:10:2, ...] if sliced else data[:]\n",
            "class Outer:\n    class Inner:\n        rate: float = 0.5\n        def m(self):\n            return self.rate\n",
            "from . import sibling\nfrom ..pkg import (one, two as deux)\n",
            "def call_star(xs, kw):\n    return f(*xs, **kw, extra=1)\n",
            "del cache[key]\nassert x > 0, \"positive\"\n",
            "def long_line(a, b):\n    total = a + \\\n        b\n    return total\n",
            "match command.split():\n    case [\"go\", direction]:\n        move(direction)\n    case _:\n        wait()\n",
            "with open(p) as f, lock:\n    body = f.read()\n",
            "def agg(xs):\n    return sum(x * x for x in xs)\n",
            "raise ValueError(f\"bad {x}\") from err\n",
        ];
        for (i, src) in snippets.iter().enumerate() {
            parse_module(src).unwrap_or_else(|e| panic!("snippet {i} failed: {e}\n{src}"));
        }
    }
}
