//! Untyped syntax tree and the recursive-descent parser producing it.
//!
//! Both expression languages share one concrete grammar; whether `s` is a
//! stream, a scalar or a function is settled later, during elaboration.

use num_bigint::BigInt;

use super::lexer::{Tok, Token};
use crate::ast::Op;
use crate::diag::{DiagCode, Diagnostic, SourceSpan};

#[derive(Clone, Debug)]
pub enum Raw {
    Int(BigInt, SourceSpan),
    Name(String, SourceSpan),
    App(Box<Raw>, Vec<Raw>, SourceSpan),
    Cons(Box<Raw>, Box<Raw>, SourceSpan),
    Bin(Op, Box<Raw>, Box<Raw>, SourceSpan),
    /// `(+)`, `(* 2)`.
    Section(Op, Option<Box<Raw>>, SourceSpan),
    /// `(f >> k)`.
    Shift(Box<Raw>, u64, SourceSpan),
    Match(Box<Raw>, Arms, SourceSpan),
}

#[derive(Clone, Debug)]
pub enum Arms {
    Stream {
        head: (String, SourceSpan),
        tail: (String, SourceSpan),
        body: Box<Raw>,
    },
    Index {
        zero: Box<Raw>,
        pred: (String, SourceSpan),
        succ: Box<Raw>,
    },
}

impl Raw {
    pub fn span(&self) -> &SourceSpan {
        match self {
            Raw::Int(_, s)
            | Raw::Name(_, s)
            | Raw::App(_, _, s)
            | Raw::Cons(_, _, s)
            | Raw::Bin(_, _, _, s)
            | Raw::Section(_, _, s)
            | Raw::Shift(_, _, s)
            | Raw::Match(_, _, s) => s,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ItemKind {
    Def,
    Derived,
    Lemma,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Annot {
    None,
    /// `~s`
    Stream,
    /// `~fun s`
    View,
}

#[derive(Clone, Debug)]
pub struct ParamDecl {
    pub name: String,
    pub span: SourceSpan,
    pub annot: Annot,
}

#[derive(Clone, Debug)]
pub struct RawItem {
    pub kind: ItemKind,
    pub name: String,
    pub name_span: SourceSpan,
    pub params: Vec<ParamDecl>,
    pub body: Raw,
    pub span: SourceSpan,
}

pub const KEYWORDS: &[&str] = &["match", "with", "end", "fun", "derived", "lemma"];

/// Splits the token stream into items: a new item starts after a blank line or
/// at a line that opens with a definition header.
pub fn split_items(tokens: &[Token]) -> Vec<&[Token]> {
    let mut starts = vec![];
    for (i, t) in tokens.iter().enumerate() {
        if i == 0 || (t.line_start && (t.after_blank || looks_like_header(&tokens[i..]))) {
            starts.push(i);
        }
    }
    let mut out = Vec::new();
    for (k, &s) in starts.iter().enumerate() {
        let e = starts.get(k + 1).copied().unwrap_or(tokens.len());
        out.push(&tokens[s..e]);
    }
    out
}

fn looks_like_header(toks: &[Token]) -> bool {
    let line_len = toks.iter().skip(1).position(|t| t.line_start).map_or(toks.len(), |p| p + 1);
    let toks = &toks[..line_len];
    let mut i = 0;
    if toks.first().is_some_and(|t| t.tok.is_ident("derived") || t.tok.is_ident("lemma")) {
        i += 1;
    }
    if !matches!(toks.get(i).map(|t| &t.tok), Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str())) {
        return false;
    }
    i += 1;
    loop {
        match toks.get(i).map(|t| &t.tok) {
            Some(Tok::Eq) => return true,
            Some(Tok::Ident(_)) => i += 1,
            Some(Tok::Tilde) => {
                i += 1;
                if toks.get(i).is_some_and(|t| t.tok.is_ident("fun")) {
                    i += 1;
                }
                if !matches!(toks.get(i).map(|t| &t.tok), Some(Tok::Ident(_))) {
                    return false;
                }
                i += 1;
            }
            _ => return false,
        }
    }
}

pub struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'a> Parser<'a> {
    pub fn new(toks: &'a [Token]) -> Self {
        Parser { toks, pos: 0 }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&'a Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn here(&self) -> SourceSpan {
        match self.toks.get(self.pos).or(self.toks.last()) {
            Some(t) if self.pos < self.toks.len() => t.span.clone(),
            Some(t) => SourceSpan::new((t.span.end_line, t.span.end_col), (t.span.end_line, t.span.end_col)),
            None => SourceSpan::new((1, 1), (1, 1)),
        }
    }

    fn prev_span(&self) -> SourceSpan {
        self.toks[self.pos.saturating_sub(1)].span.clone()
    }

    fn bump(&mut self) -> &'a Token {
        let t = &self.toks[self.pos];
        self.pos += 1;
        t
    }

    fn error<T>(&self, what: &str) -> PResult<T> {
        let found = match self.peek() {
            Some(t) => t.describe(),
            None => "end of definition".to_string(),
        };
        Err(Diagnostic::error(
            DiagCode::Parse,
            self.here(),
            format!("expected {what}, found {found}"),
        ))
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> PResult<SourceSpan> {
        if self.peek() == Some(tok) {
            Ok(self.bump().span.clone())
        } else {
            self.error(what)
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<SourceSpan> {
        if self.peek().is_some_and(|t| t.is_ident(kw)) {
            Ok(self.bump().span.clone())
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let t = self.bump();
                Ok((s.clone(), t.span.clone()))
            }
            _ => self.error(what),
        }
    }

    pub fn item(&mut self) -> PResult<RawItem> {
        let start = self.here();
        let kind = match self.peek() {
            Some(t) if t.is_ident("derived") => {
                self.bump();
                ItemKind::Derived
            }
            Some(t) if t.is_ident("lemma") => {
                self.bump();
                ItemKind::Lemma
            }
            _ => ItemKind::Def,
        };
        let (name, name_span) = self.ident("a definition name")?;
        let mut params = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Eq) => {
                    self.bump();
                    break;
                }
                Some(Tok::Tilde) => {
                    self.bump();
                    let annot = if self.peek().is_some_and(|t| t.is_ident("fun")) {
                        self.bump();
                        Annot::View
                    } else {
                        Annot::Stream
                    };
                    let (name, span) = self.ident("a parameter name")?;
                    params.push(ParamDecl { name, span, annot });
                }
                Some(Tok::Ident(_)) => {
                    let (name, span) = self.ident("a parameter name or `=`")?;
                    params.push(ParamDecl {
                        name,
                        span,
                        annot: Annot::None,
                    });
                }
                _ => return self.error("a parameter or `=`"),
            }
        }
        let body = self.expr()?;
        if self.pos < self.toks.len() {
            return self.error("end of definition");
        }
        let span = start.join(body.span());
        Ok(RawItem {
            kind,
            name,
            name_span,
            params,
            body,
            span,
        })
    }

    pub fn expr(&mut self) -> PResult<Raw> {
        let head = self.sum()?;
        if self.peek() == Some(&Tok::ColonColon) {
            self.bump();
            let tail = self.expr()?;
            let span = head.span().join(tail.span());
            return Ok(Raw::Cons(Box::new(head), Box::new(tail), span));
        }
        Ok(head)
    }

    fn sum(&mut self) -> PResult<Raw> {
        let mut lhs = self.prod()?;
        while self.peek() == Some(&Tok::Plus) {
            self.bump();
            let rhs = self.prod()?;
            let span = lhs.span().join(rhs.span());
            lhs = Raw::Bin(Op::Plus, Box::new(lhs), Box::new(rhs), span);
        }
        Ok(lhs)
    }

    fn prod(&mut self) -> PResult<Raw> {
        let mut lhs = self.app()?;
        while self.peek() == Some(&Tok::Star) {
            self.bump();
            let rhs = self.app()?;
            let span = lhs.span().join(rhs.span());
            lhs = Raw::Bin(Op::Times, Box::new(lhs), Box::new(rhs), span);
        }
        Ok(lhs)
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Some(Tok::Int(_)) | Some(Tok::LParen) => true,
            Some(Tok::Ident(s)) => s == "match" || !KEYWORDS.contains(&s.as_str()),
            _ => false,
        }
    }

    fn app(&mut self) -> PResult<Raw> {
        let head = self.atom()?;
        let mut args = Vec::new();
        while self.starts_atom() {
            args.push(self.atom()?);
        }
        if args.is_empty() {
            return Ok(head);
        }
        let span = head.span().join(args.last().expect("nonempty").span());
        Ok(Raw::App(Box::new(head), args, span))
    }

    fn atom(&mut self) -> PResult<Raw> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let t = self.bump();
                Ok(Raw::Int(v.clone(), t.span.clone()))
            }
            Some(Tok::Ident(s)) if s == "match" => self.match_expr(),
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let t = self.bump();
                Ok(Raw::Name(s.clone(), t.span.clone()))
            }
            Some(Tok::LParen) => self.paren(),
            _ => self.error("an expression"),
        }
    }

    fn paren(&mut self) -> PResult<Raw> {
        let open = self.bump().span.clone();
        let op = match self.peek() {
            Some(Tok::Plus) => Some(Op::Plus),
            Some(Tok::Star) => Some(Op::Times),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let arg = if self.peek() == Some(&Tok::RParen) {
                None
            } else {
                Some(Box::new(self.atom()?))
            };
            let close = self.expect(&Tok::RParen, "`)`")?;
            return Ok(Raw::Section(op, arg, open.join(&close)));
        }
        let inner = self.expr()?;
        if self.peek() == Some(&Tok::Shift) {
            self.bump();
            let k = match self.peek() {
                Some(Tok::Int(v)) => {
                    let k = u64::try_from(v.clone()).ok();
                    match k {
                        Some(k) => {
                            self.bump();
                            k
                        }
                        None => return self.error("a natural shift amount"),
                    }
                }
                _ => return self.error("a shift amount"),
            };
            let close = self.expect(&Tok::RParen, "`)`")?;
            return Ok(Raw::Shift(Box::new(inner), k, open.join(&close)));
        }
        self.expect(&Tok::RParen, "`)`")?;
        Ok(inner)
    }

    fn arrow(&mut self) -> PResult<()> {
        match self.peek() {
            Some(Tok::Arrow) | Some(Tok::FatArrow) => {
                self.bump();
                Ok(())
            }
            _ => self.error("`->` or `=>`"),
        }
    }

    fn match_expr(&mut self) -> PResult<Raw> {
        let start = self.bump().span.clone();
        let scrutinee = self.expr()?;
        self.expect_keyword("with")?;
        if self.peek() == Some(&Tok::Bar) {
            self.bump();
        }
        let zero_arm = matches!(self.peek(), Some(Tok::Int(v)) if *v == BigInt::from(0))
            && matches!(self.peek_at(1), Some(Tok::Arrow) | Some(Tok::FatArrow));
        let arms = if zero_arm {
            self.bump();
            self.arrow()?;
            let zero = self.expr()?;
            self.expect(&Tok::Bar, "`|`")?;
            if !self.peek().is_some_and(|t| t.is_ident("S")) {
                return self.error("`S`");
            }
            self.bump();
            let pred = self.ident("a binder")?;
            self.arrow()?;
            let succ = self.expr()?;
            Arms::Index {
                zero: Box::new(zero),
                pred,
                succ: Box::new(succ),
            }
        } else {
            let head = self.ident("a head binder or `0`")?;
            self.expect(&Tok::ColonColon, "`::`")?;
            let tail = self.ident("a tail binder")?;
            self.arrow()?;
            let body = self.expr()?;
            Arms::Stream {
                head,
                tail,
                body: Box::new(body),
            }
        };
        self.expect_keyword("end")?;
        let span = start.join(&self.prev_span());
        Ok(Raw::Match(Box::new(scrutinee), arms, span))
    }
}
