use num_bigint::BigInt;

use crate::diag::{DiagCode, Diagnostic, SourceSpan};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(BigInt),
    ColonColon,
    Eq,
    FatArrow,
    Arrow,
    LParen,
    RParen,
    Plus,
    Star,
    Tilde,
    Bar,
    Shift,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::ColonColon => "`::`".into(),
            Tok::Eq => "`=`".into(),
            Tok::FatArrow => "`=>`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Star => "`*`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Shift => "`>>`".into(),
        }
    }

    pub fn is_ident(&self, name: &str) -> bool {
        matches!(self, Tok::Ident(s) if s == name)
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
    /// First token on its line.
    pub line_start: bool,
    /// A blank line separates this token from the previous one.
    pub after_blank: bool,
}

pub fn lex(source: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut out = Vec::new();
    let mut blank_seen = false;

    for (lineno, raw_line) in source.split('\n').enumerate() {
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let line_no = lineno as u32 + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        let mut line_start = true;
        let mut line_has_content = false;
        while i < chars.len() {
            let c = chars[i];
            let col = i as u32 + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            line_has_content = true;
            if c == '-' && chars.get(i + 1) == Some(&'-') {
                break;
            }
            let start = i;
            let tok = if c.is_ascii_alphabetic() || c == '_' {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                    i += 1;
                }
                Tok::Ident(chars[start..i].iter().collect())
            } else if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                Tok::Int(text.parse().expect("digits form an integer"))
            } else {
                let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
                let (tok, width) = match two.as_str() {
                    "::" => (Tok::ColonColon, 2),
                    "=>" => (Tok::FatArrow, 2),
                    "->" => (Tok::Arrow, 2),
                    ">>" => (Tok::Shift, 2),
                    _ => match c {
                        '=' => (Tok::Eq, 1),
                        '(' => (Tok::LParen, 1),
                        ')' => (Tok::RParen, 1),
                        '+' => (Tok::Plus, 1),
                        '*' => (Tok::Star, 1),
                        '~' => (Tok::Tilde, 1),
                        '|' => (Tok::Bar, 1),
                        _ => {
                            return Err(Diagnostic::error(
                                DiagCode::Parse,
                                SourceSpan::new((line_no, col), (line_no, col + 1)),
                                format!("unexpected character `{c}`"),
                            ))
                        }
                    },
                };
                i += width;
                tok
            };
            out.push(Token {
                tok,
                span: SourceSpan::new((line_no, start as u32 + 1), (line_no, i as u32 + 1)),
                line_start,
                after_blank: blank_seen && !out.is_empty(),
            });
            line_start = false;
            blank_seen = false;
        }
        if !line_has_content {
            blank_seen = true;
        }
    }
    Ok(out)
}
