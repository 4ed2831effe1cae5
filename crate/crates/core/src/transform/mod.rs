//! From a surface stream equation to a derived function over indices.
//!
//! `derive` composes the body with the function view, rewrites `nth` inward
//! until no encoding node is left, then normalizes indices.

mod compose;
mod indices;
mod lemma;
mod rewrite;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::ast::{CallArg, Environment, FunBase, FunRef, Ident, IndexDef, IndexExpr, IndexFun, SurfaceDef};
use crate::pretty;

pub use compose::{compose_views, index_param_name, surface_names};
pub use indices::{normalize_index_expr, normalize_indices};
pub use lemma::{
    check_shape, interferer_signature, register_lemma, validate, Counterexample, FormShiftLemma, LemmaError,
    SlotIndex, Template, DEFAULT_SEED, MAX_PROBE_INDEX, VALIDATION_TRIALS,
};
pub use rewrite::{count_redexes, normalize, step, OutOfFuel, RewriteStep, RewriteTrace, RuleId, Strategy, DEFAULT_FUEL};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TransformError {
    #[error("`{def}` cannot be transformed: {}", residual_reason(.missing_lemmas, .kept_streams))]
    Residual {
        def: Ident,
        missing_lemmas: Vec<Ident>,
        /// Keep-as-stream parameters still indexed with `nth` in the stuck term.
        kept_streams: Vec<Ident>,
        /// Pretty-printed stuck term.
        residual: String,
    },
    #[error("rewriting `{def}` did not reach a normal form within {fuel} steps")]
    Fuel { def: Ident, fuel: u64 },
    #[error("no definition named `{0}`")]
    Unknown(Ident),
}

fn residual_reason(missing: &[Ident], kept: &[Ident]) -> String {
    let join = |xs: &[Ident]| xs.iter().map(Ident::as_str).collect::<Vec<_>>().join(", ");
    if !missing.is_empty() {
        format!("no form-shifting lemma registered for: {}", join(missing))
    } else if !kept.is_empty() {
        format!(
            "stream parameter(s) {} are indexed but kept as streams; annotate them `~fun` to view them as functions",
            join(kept)
        )
    } else {
        "the normal form still contains stream encodings".into()
    }
}

impl TransformError {
    pub fn code(&self) -> &'static str {
        match self {
            TransformError::Residual { .. } => "E-RESIDUAL",
            TransformError::Fuel { .. } => "E-FUEL",
            TransformError::Unknown(_) => "E-UNBOUND",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Derivation {
    /// The derived definition, indices normalized.
    pub def: IndexDef,
    /// The same definition straight out of the rewrite phase.
    pub raw: IndexDef,
    pub trace: RewriteTrace,
}

#[derive(Clone, Debug)]
pub struct DeriveOptions {
    pub fuel: u64,
    pub strategy: Strategy,
}

impl Default for DeriveOptions {
    fn default() -> Self {
        DeriveOptions {
            fuel: DEFAULT_FUEL,
            strategy: Strategy::OutermostLeftmost,
        }
    }
}

pub fn derive(def: &SurfaceDef, env: &Environment) -> Result<Derivation, TransformError> {
    derive_with(def, env, &mut DeriveOptions::default())
}

pub fn derive_with(def: &SurfaceDef, env: &Environment, opts: &mut DeriveOptions) -> Result<Derivation, TransformError> {
    let n = index_param_name(def);
    let start = compose_views(def, env, &n);
    let mut reserved: BTreeSet<Ident> = surface_names(def);
    reserved.insert(n.clone());
    let (body, mut trace) = normalize(start, env, &reserved, opts.fuel, &mut opts.strategy).map_err(|_| {
        TransformError::Fuel {
            def: def.name.clone(),
            fuel: opts.fuel,
        }
    })?;
    if has_encoding(&body) {
        let mut missing = Vec::new();
        missing_lemmas(&body, env, &mut missing);
        let mut kept = Vec::new();
        visit(&body, &mut |x| {
            if let IndexExpr::Nth { stream, .. } = x {
                if let IndexExpr::StreamVar(p) | IndexExpr::Var(p) = &**stream {
                    if def.stream_params.iter().any(|sp| &sp.name == p) && !kept.contains(p) {
                        kept.push(p.clone());
                    }
                }
            }
        });
        return Err(TransformError::Residual {
            def: def.name.clone(),
            missing_lemmas: missing,
            kept_streams: kept,
            residual: pretty::index_expr(&body),
        });
    }
    let raw = IndexDef {
        name: def.name.clone(),
        scalar_params: def.scalar_params.clone(),
        stream_params: def.stream_params.clone(),
        index_param: n,
        body,
    };
    let mut normalized = raw.body.clone();
    if normalize_index_expr(&mut normalized) {
        trace.steps.push(RewriteStep {
            rule: RuleId::BetaIndex,
            before: raw.body.clone(),
            after: normalized.clone(),
        });
    }
    let def = IndexDef {
        body: normalized,
        ..raw.clone()
    };
    Ok(Derivation { def, raw, trace })
}

/// Derives every surface definition in order, adding the successes to the environment.
pub fn derive_all(env: &Environment) -> (Environment, Vec<(Ident, TransformError)>) {
    let mut out = env.clone();
    let mut failures = Vec::new();
    let defs: Vec<SurfaceDef> = env.surface.values().cloned().collect();
    for def in &defs {
        match derive(def, &out) {
            Ok(d) => {
                out.insert_derived(d.def);
            }
            Err(e) => failures.push((def.name.clone(), e)),
        }
    }
    (out, failures)
}

/// True if an encoding node (`nth`, `stroff`, transient application) occurs anywhere.
pub fn has_encoding(e: &IndexExpr) -> bool {
    let mut found = false;
    visit(e, &mut |x| found |= x.is_encoding_node());
    found
}

fn missing_lemmas(e: &IndexExpr, env: &Environment, out: &mut Vec<Ident>) {
    visit(e, &mut |x| {
        if let IndexExpr::Interfere { fun, .. } = x {
            if !env.lemmas.contains_key(fun.as_str()) && !out.contains(fun) {
                out.push(fun.clone());
            }
        }
    });
}

/// Preorder visit of every expression node, through call arguments and index functions.
pub fn visit(e: &IndexExpr, f: &mut dyn FnMut(&IndexExpr)) {
    f(e);
    match e {
        IndexExpr::Lit(_) | IndexExpr::Var(_) | IndexExpr::StreamVar(_) => {}
        IndexExpr::Builtin(_, args) => args.iter().for_each(|a| visit(a, f)),
        IndexExpr::Apply(g, args) => {
            visit_funref(g, f);
            args.iter().for_each(|a| visit(a, f));
        }
        IndexExpr::MatchIndex {
            scrutinee, zero, succ, ..
        } => {
            visit(scrutinee, f);
            visit(zero, f);
            visit(succ, f);
        }
        IndexExpr::RecCall { args, index, .. } => {
            args.iter().for_each(|a| visit_arg(a, f));
            visit(index, f);
        }
        IndexExpr::ParamApp { index, .. } => visit(index, f),
        IndexExpr::Head(s) | IndexExpr::Tail(s) => visit(s, f),
        IndexExpr::Cons(h, t) => {
            visit(h, f);
            visit(t, f);
        }
        IndexExpr::MatchStream { scrutinee, body, .. } => {
            visit(scrutinee, f);
            visit(body, f);
        }
        IndexExpr::Interfere {
            scalar_args,
            stream_args,
            ..
        } => {
            scalar_args.iter().for_each(|a| visit_arg(a, f));
            stream_args.iter().for_each(|s| visit(s, f));
        }
        IndexExpr::Nth { stream, index } => {
            visit(stream, f);
            visit(index, f);
        }
        IndexExpr::StrOff(g) => visit_index_fun(g, f),
        IndexExpr::App(g, i) => {
            visit_index_fun(g, f);
            visit(i, f);
        }
    }
}

fn visit_arg(a: &CallArg, f: &mut dyn FnMut(&IndexExpr)) {
    match a {
        CallArg::Scalar(e) | CallArg::Stream(e) => visit(e, f),
        CallArg::Fun(g) => visit_funref(g, f),
        CallArg::Indexed(g) => visit_index_fun(g, f),
    }
}

fn visit_funref(g: &FunRef<IndexExpr>, f: &mut dyn FnMut(&IndexExpr)) {
    if let FunRef::Builtin { captured, .. } = g {
        captured.iter().for_each(|c| visit(c, f));
    }
}

pub(crate) fn visit_index_fun(g: &IndexFun, f: &mut dyn FnMut(&IndexExpr)) {
    match g {
        IndexFun::Shifted {
            base: FunBase::Rec { args, .. },
            ..
        } => args.iter().for_each(|a| visit_arg(a, f)),
        IndexFun::Shifted { .. } => {}
        IndexFun::View(s) => visit(s, f),
    }
}

/// JSON view of a derivation.
#[derive(Serialize)]
pub struct DerivationReport<'a> {
    pub name: &'a Ident,
    pub derived: String,
    pub trace: &'a RewriteTrace,
}

impl Derivation {
    pub fn report(&self) -> DerivationReport<'_> {
        DerivationReport {
            name: &self.def.name,
            derived: pretty::index_def(&self.def),
            trace: &self.trace,
        }
    }
}
