//! Tokenizer for minilang source text.

use super::error::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Keyword(&'static str),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub col: usize,
}

impl Token {
    /// Canonical text of the token.
    pub fn text(&self) -> String {
        match &self.kind {
            TokenKind::Ident(s) => s.clone(),
            TokenKind::Int(v) => v.to_string(),
            TokenKind::Keyword(k) => (*k).to_string(),
            TokenKind::Punct(p) => (*p).to_string(),
            TokenKind::Eof => String::new(),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "fn", "if", "else", "while", "for", "in", "step", "return", "true", "false", "int", "bool",
];

// Longest match first.
const PUNCTS: &[&str] = &[
    "..", "+=", "-=", "*=", "/=", "%=", "==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}",
    "[", "]", ",", ";", ":", "=", "+", "-", "*", "/", "%", "<", ">", "!",
];

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_digit() {
            let begin = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[begin..i].iter().collect();
            col += i - begin;
            let v = text.parse::<i64>().map_err(|_| ParseError::Syntax {
                line: start_line,
                col: start_col,
                message: format!("integer literal `{text}` out of range"),
            })?;
            out.push(Token { kind: TokenKind::Int(v), line: start_line, col: start_col });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[begin..i].iter().collect();
            col += i - begin;
            let kind = match KEYWORDS.iter().find(|k| **k == text) {
                Some(k) => TokenKind::Keyword(k),
                None => TokenKind::Ident(text),
            };
            out.push(Token { kind, line: start_line, col: start_col });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len();
                out.push(Token { kind: TokenKind::Punct(p), line: start_line, col: start_col });
            }
            None => {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token { kind: TokenKind::Eof, line, col });
    Ok(out)
}

/// Token texts of `src`, without the end marker.
pub fn token_texts(src: &str) -> Result<Vec<String>, ParseError> {
    Ok(lex(src)?
        .into_iter()
        .filter(|t| t.kind != TokenKind::Eof)
        .map(|t| t.text())
        .collect())
}
