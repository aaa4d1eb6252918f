//! Indentation-aware tokenizer for the workflow dialect.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::parser::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Name(String),
    Str(String),
    Int(i64),
    Punct(&'static str),
    /// A construct the lexer recognises but the dialect does not support;
    /// reported by the parser when reached so errors come in source order.
    Unsupported(String),
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Name(n) => format!("`{n}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Unsupported(c) => c.clone(),
            Tok::Newline => "end of line".into(),
            Tok::Indent => "indent".into(),
            Tok::Dedent => "dedent".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const PUNCT3: [&str; 2] = ["**=", "..."];
const PUNCT2: [&str; 12] = ["->", "**", "+=", "-=", "*=", "/=", "==", "!=", "<=", ">=", "//", ":="];
const PUNCT1: &str = "()[]{},:.=*+-<>/%@!~^&|;";

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    depth: usize,
    indents: Vec<usize>,
    out: Vec<Token>,
    _src: &'a str,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        depth: 0,
        indents: alloc::vec![0],
        out: Vec::new(),
        _src: src,
    };
    lx.run()?;
    Ok(lx.out)
}

impl Lexer<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.pos + n).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn push(&mut self, tok: Tok, line: usize, col: usize) {
        self.out.push(Token { tok, line, col });
    }

    fn error(&self, line: usize, col: usize, message: impl Into<String>) -> ParseError {
        ParseError::syntax(line, col, message)
    }

    fn run(&mut self) -> Result<(), ParseError> {
        let mut at_line_start = true;
        loop {
            if at_line_start && self.depth == 0 {
                if !self.handle_indentation()? {
                    break;
                }
                at_line_start = false;
            }
            let Some(c) = self.peek() else { break };
            let (line, col) = (self.line, self.col);
            match c {
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        self.push(Tok::Newline, line, col);
                        at_line_start = true;
                    }
                }
                ' ' | '\t' | '\r' => {
                    self.bump();
                }
                '#' => {
                    while self.peek().is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                }
                '\\' if self.peek_at(1) == Some('\n') => {
                    self.bump();
                    self.bump();
                }
                '"' | '\'' => {
                    let s = self.string(c)?;
                    self.push(Tok::Str(s), line, col);
                }
                c if c.is_ascii_digit() => {
                    let mut text = String::new();
                    while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                        text.push(self.bump().unwrap());
                    }
                    let clean: String = text.chars().filter(|&c| c != '_').collect();
                    match clean.parse::<i64>() {
                        Ok(v) => self.push(Tok::Int(v), line, col),
                        Err(_) => self.push(Tok::Unsupported(format!("numeric literal `{text}`")), line, col),
                    }
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut name = String::new();
                    while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                        name.push(self.bump().unwrap());
                    }
                    if let Some(q @ ('"' | '\'')) = self.peek() {
                        if name.len() <= 2 && name.chars().all(|c| "fFrRbBuU".contains(c)) {
                            self.string(q)?;
                            let construct = if name.to_ascii_lowercase().contains('f') {
                                "f-string interpolation".to_string()
                            } else {
                                format!("string prefix `{name}`")
                            };
                            self.push(Tok::Unsupported(construct), line, col);
                            continue;
                        }
                    }
                    self.push(Tok::Name(name), line, col);
                }
                _ => {
                    let p = self.punct().ok_or_else(|| self.error(line, col, format!("unexpected character `{c}`")))?;
                    match p {
                        "(" | "[" | "{" => self.depth += 1,
                        ")" | "]" | "}" => {
                            if self.depth == 0 {
                                return Err(self.error(line, col, format!("unbalanced `{p}`")));
                            }
                            self.depth -= 1;
                        }
                        _ => {}
                    }
                    self.push(Tok::Punct(p), line, col);
                }
            }
        }
        if self.depth != 0 {
            return Err(self.error(self.line, self.col, "unclosed bracket at end of input"));
        }
        let (line, col) = (self.line, self.col);
        if !matches!(self.out.last().map(|t| &t.tok), None | Some(Tok::Newline) | Some(Tok::Dedent)) {
            self.push(Tok::Newline, line, col);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, line, col);
        }
        self.push(Tok::Eof, line, col);
        Ok(())
    }

    /// Consume leading whitespace of a logical line and emit indent/dedent
    /// tokens. Blank and comment-only lines are skipped. Returns false at EOF.
    fn handle_indentation(&mut self) -> Result<bool, ParseError> {
        loop {
            let mut width = 0usize;
            while let Some(c) = self.peek() {
                match c {
                    ' ' => width += 1,
                    '\t' => width = (width / 8 + 1) * 8,
                    '\r' => {}
                    _ => break,
                }
                self.bump();
            }
            match self.peek() {
                None => return Ok(false),
                Some('\n') => {
                    self.bump();
                    continue;
                }
                Some('#') => {
                    while self.peek().is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                    continue;
                }
                Some(_) => {}
            }
            let current = *self.indents.last().unwrap();
            let (line, col) = (self.line, self.col);
            if width > current {
                self.indents.push(width);
                self.push(Tok::Indent, line, col);
            } else {
                while width < *self.indents.last().unwrap() {
                    self.indents.pop();
                    self.push(Tok::Dedent, line, col);
                }
                if width != *self.indents.last().unwrap() {
                    return Err(self.error(line, col, "inconsistent dedent"));
                }
            }
            return Ok(true);
        }
    }

    fn punct(&mut self) -> Option<&'static str> {
        let rest: String = self.chars[self.pos..].iter().take(3).collect();
        let found = PUNCT3
            .iter()
            .chain(PUNCT2.iter())
            .find(|p| rest.starts_with(**p))
            .copied()
            .or_else(|| {
                let c = rest.chars().next()?;
                let i = PUNCT1.find(c)?;
                Some(&PUNCT1[i..i + c.len_utf8()])
            })?;
        for _ in 0..found.chars().count() {
            self.bump();
        }
        Some(found)
    }

    fn string(&mut self, quote: char) -> Result<String, ParseError> {
        let (line, col) = (self.line, self.col);
        let triple = self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote);
        let n = if triple { 3 } else { 1 };
        for _ in 0..n {
            self.bump();
        }
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.error(line, col, "unterminated string literal"));
            };
            if c == quote {
                if !triple {
                    self.bump();
                    return Ok(out);
                }
                if self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote) {
                    self.bump();
                    self.bump();
                    self.bump();
                    return Ok(out);
                }
            }
            if c == '\n' && !triple {
                return Err(self.error(line, col, "unterminated string literal"));
            }
            self.bump();
            if c == '\\' {
                let Some(e) = self.bump() else {
                    return Err(self.error(line, col, "unterminated string literal"));
                };
                match e {
                    'n' => out.push('\n'),
                    't' => out.push('\t'),
                    'r' => out.push('\r'),
                    '0' => out.push('\0'),
                    '\\' => out.push('\\'),
                    '\'' => out.push('\''),
                    '"' => out.push('"'),
                    '\n' => {}
                    other => {
                        out.push('\\');
                        out.push(other);
                    }
                }
            } else {
                out.push(c);
            }
        }
    }
}

/// Render `s` as a double-quoted dialect string literal.
pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\0' => out.push_str("\\0"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
