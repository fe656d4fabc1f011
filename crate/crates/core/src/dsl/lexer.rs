use std::fmt;

use crate::chart::CmpOp;

use super::SourceSpan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Statechart,
    Initial,
    State,
    On,
    In,
    Emit,
    True,
    False,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Dot,
    Comma,
    Assign,
    Dollar,
    Slash,
    Arrow,
    AndAnd,
    Cmp(CmpOp),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(i) => write!(f, "integer `{i}`"),
            Tok::Eof => write!(f, "end of input"),
            other => write!(f, "`{}`", other.text()),
        }
    }
}

impl Tok {
    pub(crate) fn text(&self) -> &'static str {
        match self {
            Tok::Ident(_) => "identifier",
            Tok::Int(_) => "integer",
            Tok::Statechart => "statechart",
            Tok::Initial => "initial",
            Tok::State => "state",
            Tok::On => "on",
            Tok::In => "in",
            Tok::Emit => "emit",
            Tok::True => "true",
            Tok::False => "false",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Dot => ".",
            Tok::Comma => ",",
            Tok::Assign => "=",
            Tok::Dollar => "$",
            Tok::Slash => "/",
            Tok::Arrow => "->",
            Tok::AndAnd => "&&",
            Tok::Cmp(op) => op.symbol(),
            Tok::Eof => "end of input",
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LexError {
    pub span: SourceSpan,
    pub message: String,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "statechart" => Tok::Statechart,
        "initial" => Tok::Initial,
        "state" => Tok::State,
        "on" => Tok::On,
        "in" => Tok::In,
        "emit" => Tok::Emit,
        "true" => Tok::True,
        "false" => Tok::False,
        _ => return None,
    })
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let two = bytes.get(i + 1).copied();
        let (tok, len) = match c {
            b'{' => (Tok::LBrace, 1),
            b'}' => (Tok::RBrace, 1),
            b'[' => (Tok::LBracket, 1),
            b']' => (Tok::RBracket, 1),
            b'(' => (Tok::LParen, 1),
            b')' => (Tok::RParen, 1),
            b'.' => (Tok::Dot, 1),
            b',' => (Tok::Comma, 1),
            b'$' => (Tok::Dollar, 1),
            b'/' => (Tok::Slash, 1),
            b'=' if two == Some(b'=') => (Tok::Cmp(CmpOp::Eq), 2),
            b'=' => (Tok::Assign, 1),
            b'!' if two == Some(b'=') => (Tok::Cmp(CmpOp::Ne), 2),
            b'<' if two == Some(b'=') => (Tok::Cmp(CmpOp::Le), 2),
            b'<' => (Tok::Cmp(CmpOp::Lt), 1),
            b'>' if two == Some(b'=') => (Tok::Cmp(CmpOp::Ge), 2),
            b'>' => (Tok::Cmp(CmpOp::Gt), 1),
            b'&' if two == Some(b'&') => (Tok::AndAnd, 2),
            b'-' if two == Some(b'>') => (Tok::Arrow, 2),
            b'-' | b'0'..=b'9' => {
                let mut j = i + 1;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                let text = &src[i..j];
                if text == "-" {
                    return Err(LexError {
                        span: SourceSpan::new(i, j),
                        message: "expected digit or `>` after `-`".into(),
                    });
                }
                let value = text.parse::<i64>().map_err(|_| LexError {
                    span: SourceSpan::new(i, j),
                    message: format!("integer literal `{text}` out of range"),
                })?;
                (Tok::Int(value), j - i)
            }
            c if c.is_ascii_alphabetic() => {
                let mut j = i + 1;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let word = &src[i..j];
                (keyword(word).unwrap_or_else(|| Tok::Ident(word.to_string())), j - i)
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('\u{fffd}');
                return Err(LexError {
                    span: SourceSpan::new(i, i + ch.len_utf8()),
                    message: format!("unexpected character {ch:?}"),
                });
            }
        };
        i += len;
        tokens.push(Token {
            tok,
            span: SourceSpan::new(start, i),
        });
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: SourceSpan::new(src.len(), src.len()),
    });
    Ok(tokens)
}
