//! Executable semantics: derived functions, their `stroff` streams, and the lazy oracle.

mod args;
mod indexed;
mod machine;
mod oracle;

use std::rc::Rc;

use serde::Serialize;
use thiserror::Error;

use crate::ast::{Environment, Ident, Scalar};

pub use args::{ArgSpec, ArgSpecError};
pub use indexed::Env;
pub use machine::{
    generator, stroff_from, Cell, FunVal, Lazy, Machine, Resolver, StreamRef, Value,
    DEFAULT_MAX_DEPTH,
};
pub use oracle::{combinator_stream, map_stream, merge_stream, zip_stream, Binding, Scope};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("stream is unproductive: {detail}{}", produced.map(|n| format!(" ({n} value(s) produced)")).unwrap_or_default())]
    Unproductive { produced: Option<usize>, detail: String },
    #[error("`{0}` has no derived definition")]
    NoDerived(Ident),
    #[error("no definition named `{0}`")]
    NoDefinition(Ident),
    #[error("recursion depth limit {limit} exceeded")]
    Depth { limit: usize },
    #[error("{0}")]
    Argument(String),
    #[error("{0}")]
    Type(String),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::Unproductive { .. } => "E-UNPRODUCTIVE",
            EvalError::NoDerived(_) => "E-NO-DERIVED",
            EvalError::NoDefinition(_) => "E-UNBOUND",
            EvalError::Depth { .. } => "E-DEPTH",
            EvalError::Argument(_) => "E-ARG",
            EvalError::Type(_) => "E-EVAL",
        }
    }

    pub(crate) fn black_hole() -> Self {
        EvalError::Unproductive {
            produced: None,
            detail: "a stream demands its own value before producing it".into(),
        }
    }
}

/// A finite observation of a stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrefixTrace {
    pub values: Vec<Scalar>,
    pub produced: usize,
    pub fuel_spent: u64,
}

impl PrefixTrace {
    fn new(values: Vec<Scalar>, fuel_spent: u64) -> Self {
        PrefixTrace {
            produced: values.len(),
            values,
            fuel_spent,
        }
    }
}

impl Machine {
    /// Binds argument specifications to the parameters of definition `name`.
    pub fn bind_args(&mut self, name: &str, args: &[ArgSpec]) -> Result<Vec<Value>, EvalError> {
        args::bind(self, &Ident::new(name), args)
    }
}

pub fn default_oracle_fuel(len: usize) -> u64 {
    1000 * (len.max(1) as u64)
}

/// `name args` at index `n`, computed by the derived definition.
pub fn nth_eval(
    env: &Environment,
    name: &str,
    args: &[ArgSpec],
    n: u64,
    memo: bool,
) -> Result<Scalar, EvalError> {
    let mut m = Machine::new(Rc::new(env.clone()), Resolver::Derived).with_memo(memo);
    let name = Ident::new(name);
    if env.derived_def(name.as_str()).is_none() {
        return Err(EvalError::NoDerived(name));
    }
    let vals = args::bind(&mut m, &name, args)?;
    m.rec_call(&name, vals, n)
}

/// The first `len` elements of `stroff` of the derived function.
pub fn stroff_prefix(
    env: &Environment,
    name: &str,
    args: &[ArgSpec],
    len: usize,
    memo: bool,
) -> Result<PrefixTrace, EvalError> {
    let mut m = Machine::new(Rc::new(env.clone()), Resolver::Derived).with_memo(memo);
    let name = Ident::new(name);
    if env.derived_def(name.as_str()).is_none() {
        return Err(EvalError::NoDerived(name));
    }
    let vals = args::bind(&mut m, &name, args)?;
    let s = m.derived_stream(name, vals, 0);
    let values = m.prefix(&s, len).map_err(|(_, e)| e)?;
    Ok(PrefixTrace::new(values, m.fuel_spent()))
}

/// The first `len` elements produced by lazily unfolding the surface equation.
pub fn oracle_prefix(
    env: &Environment,
    name: &str,
    args: &[ArgSpec],
    len: usize,
    fuel: Option<u64>,
) -> Result<PrefixTrace, EvalError> {
    let fuel = fuel.unwrap_or_else(|| default_oracle_fuel(len));
    let mut m = Machine::new(Rc::new(env.clone()), Resolver::Oracle).with_fuel(fuel);
    let name = Ident::new(name);
    let vals = args::bind(&mut m, &name, args)?;
    let s = m.oracle_call(&name, vals.into_iter().map(Binding::from).collect())?;
    match m.prefix(&s, len) {
        Ok(values) => Ok(PrefixTrace::new(values, m.fuel_spent())),
        Err((got, EvalError::Unproductive { detail, .. })) => Err(EvalError::Unproductive {
            produced: Some(got.len()),
            detail,
        }),
        Err((_, e)) => Err(e),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub index: usize,
    pub derived: Scalar,
    pub oracle: Scalar,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub name: Ident,
    pub args: Vec<String>,
    pub len: usize,
    pub equal: bool,
    pub first_divergence: Option<Divergence>,
    pub derived: PrefixTrace,
    pub oracle: PrefixTrace,
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub memo: bool,
    pub fuel: Option<u64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            memo: true,
            fuel: None,
        }
    }
}

/// Compares the derived definition against the oracle on a prefix.
pub fn verify_equation(
    env: &Environment,
    name: &str,
    args: &[ArgSpec],
    len: usize,
    opts: VerifyOptions,
) -> Result<VerifyReport, EvalError> {
    let derived = stroff_prefix(env, name, args, len, opts.memo)?;
    let oracle = oracle_prefix(env, name, args, len, opts.fuel)?;
    let first_divergence = derived
        .values
        .iter()
        .zip(&oracle.values)
        .position(|(a, b)| a != b)
        .map(|i| Divergence {
            index: i,
            derived: derived.values[i].clone(),
            oracle: oracle.values[i].clone(),
        });
    Ok(VerifyReport {
        name: Ident::new(name),
        args: args.iter().map(ToString::to_string).collect(),
        len,
        equal: first_divergence.is_none(),
        first_divergence,
        derived,
        oracle,
    })
}
