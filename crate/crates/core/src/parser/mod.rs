//! Front end: source text to an [`Environment`].

mod elab;
mod lexer;
mod raw;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::ast::Environment;
use crate::corpus::builtin_lemmas;
use crate::diag::{DiagCode, Diagnostic, SourceSpan};
use crate::transform::FormShiftLemma;

pub use elab::RESERVED;
pub use lexer::{lex, Tok, Token};
pub use raw::{Parser, Raw, RawItem};

/// A parsed file.
#[derive(Clone, Debug)]
pub struct Program {
    /// Surface definitions, derived definitions given in the file, and the
    /// builtin lemmas (unless the file defines a function of the same name).
    pub env: Environment,
    /// Lemmas declared in the file. They are not in `env` yet: they must be
    /// validated with [`crate::transform::register_lemma`] first.
    pub lemmas: Vec<FormShiftLemma>,
}

pub fn parse_program(source: &str) -> Result<Program, Vec<Diagnostic>> {
    parse_with_file(source, None)
}

pub fn parse_file(path: &Path) -> Result<Program, Vec<Diagnostic>> {
    let file = Some(Arc::new(path.to_path_buf()));
    let source = std::fs::read_to_string(path).map_err(|e| {
        vec![Diagnostic::error(
            DiagCode::Parse,
            SourceSpan::new((1, 1), (1, 1)).with_file(file.clone()),
            format!("cannot read {}: {e}", path.display()),
        )]
    })?;
    parse_with_file(&source, file)
}

fn parse_with_file(source: &str, file: Option<Arc<PathBuf>>) -> Result<Program, Vec<Diagnostic>> {
    let tag = |mut d: Diagnostic| {
        d.span = d.span.with_file(file.clone());
        d
    };
    let mut tokens = lex(source).map_err(|d| vec![tag(d)])?;
    if file.is_some() {
        for t in &mut tokens {
            t.span.file = file.clone();
        }
    }
    let mut items = Vec::new();
    let mut diags = Vec::new();
    for chunk in raw::split_items(&tokens) {
        match Parser::new(chunk).item() {
            Ok(item) => items.push(item),
            Err(d) => diags.push(tag(d)),
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let out = elab::elaborate(&items).map_err(|ds| ds.into_iter().map(tag).collect::<Vec<_>>())?;

    let mut env = Environment::new();
    for def in out.surface {
        env.surface.insert(def.name.clone(), def);
    }
    for def in out.derived {
        env.insert_derived(def);
    }
    for lemma in builtin_lemmas() {
        if !env.surface.contains_key(lemma.fn_name.as_str()) {
            env.lemmas.insert(lemma.fn_name.clone(), lemma);
        }
    }
    Ok(Program {
        env,
        lemmas: out.lemmas,
    })
}
