//! Argument specifications for evaluating parameterized definitions.
//!
//! Syntax: an integer (`-3`), a function (`S`, `plus`, `times`, `(* 2)`,
//! `(+ 1)`, `(times 2)`), a generator `[p1,p2|c1,c2]` (prefix, then a cycle
//! repeated forever), or a named stream `name` / `name(arg,…)`.

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use num_bigint::BigInt;
use thiserror::Error;

use crate::ast::{Ident, Op, Scalar, ScalarKind, StreamMode};

use super::machine::{generator, FunVal, Machine, Value};
use super::EvalError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ArgSpec {
    Int(Scalar),
    Fun(FunVal),
    Generator { prefix: Vec<Scalar>, cycle: Vec<Scalar> },
    Named { name: Ident, args: Vec<ArgSpec> },
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("bad argument `{text}`: {reason}")]
pub struct ArgSpecError {
    pub text: String,
    pub reason: String,
}

impl ArgSpec {
    pub fn int(v: i64) -> Self {
        ArgSpec::Int(Scalar::from(v))
    }

    pub fn named(name: &str) -> Self {
        ArgSpec::Named {
            name: Ident::new(name),
            args: Vec::new(),
        }
    }

    pub fn cycle(values: &[i64]) -> Self {
        ArgSpec::Generator {
            prefix: Vec::new(),
            cycle: values.iter().map(|&v| Scalar::from(v)).collect(),
        }
    }
}

impl fmt::Display for ArgSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, xs: &[Scalar]) -> fmt::Result {
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{x}")?;
            }
            Ok(())
        }
        match self {
            ArgSpec::Int(v) => write!(f, "{v}"),
            ArgSpec::Fun(v) => write!(f, "{v}"),
            ArgSpec::Generator { prefix, cycle } => {
                f.write_str("[")?;
                list(f, prefix)?;
                f.write_str("|")?;
                list(f, cycle)?;
                f.write_str("]")
            }
            ArgSpec::Named { name, args } if args.is_empty() => write!(f, "{name}"),
            ArgSpec::Named { name, args } => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn parse_int(s: &str) -> Option<Scalar> {
    s.trim().parse::<BigInt>().ok().map(Scalar)
}

fn parse_list(s: &str, whole: &str) -> Result<Vec<Scalar>, ArgSpecError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| {
            parse_int(x).ok_or_else(|| ArgSpecError {
                text: whole.to_string(),
                reason: format!("`{}` is not an integer", x.trim()),
            })
        })
        .collect()
}

/// Splits on commas that are not nested in brackets or parentheses.
fn split_top(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn builtin_op(name: &str) -> Option<Op> {
    match name {
        "S" => Some(Op::Succ),
        "plus" | "+" => Some(Op::Plus),
        "times" | "*" => Some(Op::Times),
        _ => None,
    }
}

impl FromStr for ArgSpec {
    type Err = ArgSpecError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let s = text.trim();
        let err = |reason: &str| ArgSpecError {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        if let Some(v) = parse_int(s) {
            return Ok(ArgSpec::Int(v));
        }
        if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let (prefix, cycle) = match inner.split_once('|') {
                Some((p, c)) => (parse_list(p, text)?, parse_list(c, text)?),
                None => return Err(err("a generator needs a `|` before its repeating part")),
            };
            if cycle.is_empty() {
                return Err(err("the repeating part of a generator must not be empty"));
            }
            return Ok(ArgSpec::Generator { prefix, cycle });
        }
        if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            let mut words = inner.split_whitespace();
            let op = words
                .next()
                .and_then(builtin_op)
                .ok_or_else(|| err("expected `(+ k)`, `(* k)` or a partial application of plus/times"))?;
            let captured = words
                .map(|w| parse_int(w).ok_or_else(|| err("captured arguments must be integers")))
                .collect::<Result<Vec<_>, _>>()?;
            if captured.len() > op.arity() {
                return Err(err("too many arguments for the operator"));
            }
            return Ok(ArgSpec::Fun(FunVal::new(op, captured)));
        }
        if let Some(op) = builtin_op(s) {
            return Ok(ArgSpec::Fun(FunVal::new(op, Vec::new())));
        }
        let (name, rest) = match s.find('(') {
            Some(i) => (&s[..i], Some(&s[i..])),
            None => (s, None),
        };
        let valid = name
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'');
        if !valid {
            return Err(err("not an integer, function, generator or stream name"));
        }
        let args = match rest {
            None => Vec::new(),
            Some(r) => {
                let inner = r
                    .strip_prefix('(')
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| err("unbalanced parentheses"))?;
                if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    split_top(inner)
                        .into_iter()
                        .map(ArgSpec::from_str)
                        .collect::<Result<Vec<_>, _>>()?
                }
            }
        };
        Ok(ArgSpec::Named {
            name: Ident::new(name),
            args,
        })
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Scalar(ScalarKind),
    Stream,
}

/// Converts specs to runtime values, checked against the parameters of `name`.
pub(crate) fn bind(m: &mut Machine, name: &Ident, args: &[ArgSpec]) -> Result<Vec<Value>, EvalError> {
    let env = m.env.clone();
    let def = env
        .surface_def(name.as_str())
        .ok_or_else(|| EvalError::NoDefinition(name.clone()))?;
    let kinds: Vec<Kind> = def
        .scalar_params
        .iter()
        .map(|p| Kind::Scalar(p.kind))
        .chain(def.stream_params.iter().map(|p| match p.mode {
            StreamMode::KeepAsStream | StreamMode::ViewAsFunction => Kind::Stream,
        }))
        .collect();
    if kinds.len() != args.len() {
        return Err(EvalError::Argument(format!(
            "`{name}` takes {} argument(s), got {}",
            kinds.len(),
            args.len()
        )));
    }
    let params: Vec<&Ident> = def.param_names().collect();
    kinds
        .iter()
        .zip(args)
        .zip(params)
        .map(|((k, a), p)| value(m, *k, a, p))
        .collect()
}

fn value(m: &mut Machine, kind: Kind, spec: &ArgSpec, param: &Ident) -> Result<Value, EvalError> {
    let mismatch = |want: &str| {
        EvalError::Argument(format!("parameter `{param}` expects {want}, got `{spec}`"))
    };
    match (kind, spec) {
        (Kind::Scalar(ScalarKind::Value), ArgSpec::Int(v)) => Ok(Value::Scalar(v.clone())),
        (Kind::Scalar(ScalarKind::Value), _) => Err(mismatch("an integer")),
        (Kind::Scalar(ScalarKind::Function { arity }), ArgSpec::Fun(f)) if f.arity() == arity => {
            Ok(Value::Fun(f.clone()))
        }
        (Kind::Scalar(ScalarKind::Function { arity }), _) => {
            Err(mismatch(&format!("a function of {arity} argument(s)")))
        }
        (Kind::Stream, ArgSpec::Generator { prefix, cycle }) => {
            let prefix: Rc<[Scalar]> = prefix.clone().into();
            let cycle: Rc<[Scalar]> = cycle.clone().into();
            Ok(Value::Stream(generator(prefix, cycle, 0)))
        }
        (Kind::Stream, ArgSpec::Named { name, args }) => {
            let vals = bind(m, name, args)?;
            Ok(Value::Stream(m.oracle_call_values(name, vals)?))
        }
        (Kind::Stream, _) => Err(mismatch("a stream (generator or named stream)")),
    }
}
