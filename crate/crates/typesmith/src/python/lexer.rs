//! Python tokenizer.
//!
//! Produces the logical token stream: NEWLINE only at the end of logical
//! lines, INDENT/DEDENT from the indentation stack, implicit line joining
//! inside brackets, explicit joining via backslash. Comments and blank
//! lines produce no tokens. Every token carries its byte span and the
//! 1-based line of its first byte.

use super::PyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Name,
    Keyword,
    Number,
    Str,
    Op,
    Newline,
    Indent,
    Dedent,
    EndMarker,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokKind,
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub line: u32,
}

impl Token {
    pub fn is_op(&self, s: &str) -> bool {
        self.kind == TokKind::Op && self.text == s
    }

    pub fn is_kw(&self, s: &str) -> bool {
        self.kind == TokKind::Keyword && self.text == s
    }
}

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

// Longest first so greedy matching works.
const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "!=", ">=", "<=", "==", "->", ":=", "+=", "-=", "*=", "/=",
    "%=", "@=", "&=", "|=", "^=", "**", "//", "<<", ">>", "+", "-", "*", "/", "%", "@", "&", "|",
    "^", "~", "<", ">", "(", ")", "[", "]", "{", "}", ",", ":", ".", ";", "=",
];

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// String prefixes: any case combination of r/b/u/f of length <= 2 that
/// Python accepts (we accept a superset; invalid combos fail elsewhere).
fn is_string_prefix(s: &str) -> bool {
    s.len() <= 2 && s.chars().all(|c| matches!(c, 'r' | 'b' | 'u' | 'f' | 'R' | 'B' | 'U' | 'F'))
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    paren_depth: usize,
    indents: Vec<u32>,
    tokens: Vec<Token>,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, PyError> {
    let mut lx = Lexer {
        src,
        pos: 0,
        line: 1,
        paren_depth: 0,
        indents: vec![0],
        tokens: Vec::new(),
    };
    lx.run()?;
    Ok(lx.tokens)
}

impl<'a> Lexer<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn push(&mut self, kind: TokKind, start: usize, line: u32) {
        self.tokens.push(Token {
            kind,
            text: self.src[start..self.pos].to_string(),
            start,
            end: self.pos,
            line,
        });
    }

    fn push_virtual(&mut self, kind: TokKind) {
        self.tokens.push(Token {
            kind,
            text: String::new(),
            start: self.pos,
            end: self.pos,
            line: self.line,
        });
    }

    fn run(&mut self) -> Result<(), PyError> {
        let mut at_line_start = true;
        loop {
            if at_line_start && self.paren_depth == 0 {
                if !self.handle_line_start()? {
                    break; // EOF
                }
                at_line_start = false;
                continue;
            }
            let Some(c) = self.peek() else {
                break;
            };
            match c {
                ' ' | '\t' | '\x0c' | '\r' => {
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '\n' => {
                    self.bump();
                    if self.paren_depth == 0 {
                        // Suppress NEWLINE for lines that produced no tokens
                        // (comment-only lines reached mid-logical-line can't
                        // happen; blank lines are handled at line start).
                        let start = self.pos - 1;
                        self.tokens.push(Token {
                            kind: TokKind::Newline,
                            text: "\n".to_string(),
                            start,
                            end: self.pos,
                            line: self.line - 1,
                        });
                        at_line_start = true;
                    }
                }
                '\\' => {
                    // Explicit line joining: backslash immediately before EOL.
                    self.bump();
                    if self.peek() == Some('\r') {
                        self.bump();
                    }
                    if self.peek() == Some('\n') {
                        self.bump();
                    } else {
                        return Err(PyError::new(self.line, "stray backslash"));
                    }
                }
                _ => self.token(c)?,
            }
        }
        // Close the final logical line and the indentation stack.
        if self
            .tokens
            .last()
            .map(|t| !matches!(t.kind, TokKind::Newline | TokKind::Dedent))
            .unwrap_or(false)
        {
            self.push_virtual(TokKind::Newline);
            if let Some(t) = self.tokens.last_mut() {
                t.text = "\n".to_string();
            }
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push_virtual(TokKind::Dedent);
        }
        self.push_virtual(TokKind::EndMarker);
        Ok(())
    }

    /// Measure indentation, emit INDENT/DEDENT, skip blank and comment-only
    /// lines. Returns false at EOF.
    fn handle_line_start(&mut self) -> Result<bool, PyError> {
        loop {
            let mut col: u32 = 0;
            loop {
                match self.peek() {
                    Some(' ') => {
                        col += 1;
                        self.bump();
                    }
                    Some('\t') => {
                        col = (col / 8 + 1) * 8;
                        self.bump();
                    }
                    Some('\x0c') => {
                        col = 0;
                        self.bump();
                    }
                    _ => break,
                }
            }
            match self.peek() {
                None => return Ok(false),
                Some('\n') => {
                    self.bump();
                    continue;
                }
                Some('\r') => {
                    self.bump();
                    continue;
                }
                Some('#') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                    continue;
                }
                Some(_) => {
                    let current = *self.indents.last().unwrap();
                    if col > current {
                        self.indents.push(col);
                        self.push_virtual(TokKind::Indent);
                    } else if col < current {
                        while *self.indents.last().unwrap() > col {
                            self.indents.pop();
                            self.push_virtual(TokKind::Dedent);
                        }
                        if *self.indents.last().unwrap() != col {
                            return Err(PyError::new(
                                self.line,
                                "unindent does not match any outer indentation level",
                            ));
                        }
                    }
                    return Ok(true);
                }
            }
        }
    }

    fn token(&mut self, c: char) -> Result<(), PyError> {
        let start = self.pos;
        let line = self.line;
        if is_ident_start(c) {
            // Might be a string prefix.
            let mut probe = self.pos;
            let mut prefix = String::new();
            for pc in self.rest().chars() {
                if is_ident_continue(pc) {
                    prefix.push(pc);
                    probe += pc.len_utf8();
                    if prefix.len() > 2 {
                        break;
                    }
                } else {
                    break;
                }
            }
            let next_is_quote = matches!(
                self.src[probe..].chars().next(),
                Some('"') | Some('\'')
            );
            if next_is_quote && is_string_prefix(&prefix) {
                self.pos = probe;
                self.string(start, line)?;
                return Ok(());
            }
            while let Some(pc) = self.peek() {
                if is_ident_continue(pc) {
                    self.bump();
                } else {
                    break;
                }
            }
            let text = &self.src[start..self.pos];
            let kind = if KEYWORDS.contains(&text) {
                TokKind::Keyword
            } else {
                TokKind::Name
            };
            self.push(kind, start, line);
            return Ok(());
        }
        if c == '"' || c == '\'' {
            self.string(start, line)?;
            return Ok(());
        }
        if c.is_ascii_digit() || (c == '.' && self.rest()[1..].starts_with(|d: char| d.is_ascii_digit()))
        {
            self.number();
            self.push(TokKind::Number, start, line);
            return Ok(());
        }
        for op in OPERATORS {
            if self.rest().starts_with(op) {
                match *op {
                    "(" | "[" | "{" => self.paren_depth += 1,
                    ")" | "]" | "}" => self.paren_depth = self.paren_depth.saturating_sub(1),
                    _ => {}
                }
                self.pos += op.len();
                self.push(TokKind::Op, start, line);
                return Ok(());
            }
        }
        Err(PyError::new(line, format!("unexpected character {c:?}")))
    }

    fn number(&mut self) {
        // Greedy numeric scan; precise validity is not this lexer's job.
        let rest = self.rest();
        if rest.starts_with("0x")
            || rest.starts_with("0X")
            || rest.starts_with("0o")
            || rest.starts_with("0O")
            || rest.starts_with("0b")
            || rest.starts_with("0B")
        {
            self.bump();
            self.bump();
            while matches!(self.peek(), Some(c) if c.is_ascii_hexdigit() || c == '_') {
                self.bump();
            }
            return;
        }
        let mut seen_dot = false;
        let mut seen_exp = false;
        while let Some(c) = self.peek() {
            match c {
                '0'..='9' | '_' => {
                    self.bump();
                }
                '.' if !seen_dot && !seen_exp => {
                    seen_dot = true;
                    self.bump();
                }
                'e' | 'E' if !seen_exp => {
                    // Only an exponent when followed by a digit or sign+digit;
                    // otherwise this is the start of a following name (`1else`
                    // never appears in practice, `x.e` is not reachable here).
                    let after: Vec<char> = self.rest().chars().skip(1).take(2).collect();
                    let is_exp = match after.first() {
                        Some(d) if d.is_ascii_digit() => true,
                        Some('+') | Some('-') => {
                            matches!(after.get(1), Some(d) if d.is_ascii_digit())
                        }
                        _ => false,
                    };
                    if !is_exp {
                        break;
                    }
                    seen_exp = true;
                    self.bump();
                    if matches!(self.peek(), Some('+') | Some('-')) {
                        self.bump();
                    }
                }
                'j' | 'J' => {
                    self.bump();
                    break;
                }
                _ => break,
            }
        }
    }

    fn string(&mut self, start: usize, line: u32) -> Result<(), PyError> {
        let quote = self.bump().expect("string starts with a quote");
        let triple = self.rest().starts_with(&quote.to_string().repeat(2));
        if triple {
            self.bump();
            self.bump();
            loop {
                match self.peek() {
                    None => return Err(PyError::new(line, "unterminated triple-quoted string")),
                    Some('\\') => {
                        self.bump();
                        self.bump();
                    }
                    Some(c) if c == quote => {
                        if self.rest().starts_with(&quote.to_string().repeat(3)) {
                            self.bump();
                            self.bump();
                            self.bump();
                            break;
                        }
                        self.bump();
                    }
                    Some(_) => {
                        self.bump();
                    }
                }
            }
        } else {
            loop {
                match self.peek() {
                    None | Some('\n') => {
                        return Err(PyError::new(line, "unterminated string literal"))
                    }
                    Some('\\') => {
                        self.bump();
                        self.bump();
                    }
                    Some(c) if c == quote => {
                        self.bump();
                        break;
                    }
                    Some(_) => {
                        self.bump();
                    }
                }
            }
        }
        self.push(TokKind::Str, start, line);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds_and_texts(src: &str) -> Vec<(TokKind, String)> {
        tokenize(src)
            .unwrap()
            .into_iter()
            .map(|t| (t.kind, t.text))
            .collect()
    }

    #[test]
    fn simple_statement() {
        let toks = kinds_and_texts("x = 1\n");
        assert_eq!(
            toks,
            vec![
                (TokKind::Name, "x".to_string()),
                (TokKind::Op, "=".to_string()),
                (TokKind::Number, "1".to_string()),
                (TokKind::Newline, "\n".to_string()),
                (TokKind::EndMarker, String::new()),
            ]
        );
    }

    #[test]
    fn indentation_block() {
        let toks = kinds_and_texts("def f():\n    pass\n");
        let kinds: Vec<TokKind> = toks.iter().map(|(k, _)| *k).collect();
        assert_eq!(
            kinds,
            vec![
                TokKind::Keyword, // def
                TokKind::Name,    // f
                TokKind::Op,      // (
                TokKind::Op,      // )
                TokKind::Op,      // :
                TokKind::Newline,
                TokKind::Indent,
                TokKind::Keyword, // pass
                TokKind::Newline,
                TokKind::Dedent,
                TokKind::EndMarker,
            ]
        );
    }

    #[test]
    fn implicit_joining_suppresses_newline() {
        let toks = kinds_and_texts("x = [1,\n  2]\n");
        assert!(!toks
            .iter()
            .take(toks.len() - 2)
            .any(|(k, _)| *k == TokKind::Newline));
    }

    #[test]
    fn comments_and_blank_lines_vanish() {
        let toks = kinds_and_texts("# header\n\nx = 1  # trailing\n\n");
        let names: Vec<&str> = toks.iter().map(|(_, s)| s.as_str()).collect();
        assert_eq!(names, vec!["x", "=", "1", "\n", ""]);
    }

    #[test]
    fn strings_with_prefixes_and_triples() {
        let toks = kinds_and_texts("s = rb'\\x00'\nd = \"\"\"a\nb\"\"\"\nf = f\"{x}\"\n");
        let strs: Vec<&str> = toks
            .iter()
            .filter(|(k, _)| *k == TokKind::Str)
            .map(|(_, s)| s.as_str())
            .collect();
        assert_eq!(strs, vec!["rb'\\x00'", "\"\"\"a\nb\"\"\"", "f\"{x}\""]);
    }

    #[test]
    fn backslash_continuation() {
        let toks = kinds_and_texts("x = 1 + \\\n    2\n");
        let texts: Vec<&str> = toks.iter().map(|(_, s)| s.as_str()).collect();
        assert_eq!(texts, vec!["x", "=", "1", "+", "2", "\n", ""]);
    }

    #[test]
    fn float_and_arrow_tokens() {
        let toks = kinds_and_texts("def f() -> float:\n    return .5e-3\n");
        assert!(toks.iter().any(|(k, s)| *k == TokKind::Op && s == "->"));
        assert!(toks
            .iter()
            .any(|(k, s)| *k == TokKind::Number && s == ".5e-3"));
    }

    #[test]
    fn dedent_mismatch_is_an_error() {
        let err = tokenize("if x:\n        a = 1\n    b = 2\n").unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn unterminated_string_is_an_error() {
        assert!(tokenize("x = 'abc\n").is_err());
    }

    #[test]
    fn byte_spans_reconstruct_source_slices() {
        let src = "def f(x: int = 3) -> str:\n    return x\n";
        for t in tokenize(src).unwrap() {
            if t.kind != TokKind::Indent
                && t.kind != TokKind::Dedent
                && t.kind != TokKind::EndMarker
            {
                assert_eq!(&src[t.start..t.end], t.text);
            }
        }
    }
}
