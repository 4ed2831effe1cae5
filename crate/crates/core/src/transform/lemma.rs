//! Form-shifting lemmas: `⟦g⟧ a₁…aₖ s₁…sₗ n = C[a₁…aₖ, s₁ n, …, sₗ n]`.
//!
//! A lemma is admitted only after random testing against the oracle. Testing is
//! not proof; a lemma that survives 200 trials can still be wrong.

use std::fmt;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ast::{
    CallArg, Combinator, Environment, Ident, IndexExpr, Op, Scalar, ScalarArg, ScalarExpr,
    ScalarKind, ScalarParam, StreamExpr, SurfaceDef,
};
use crate::diag::SourceSpan;
use crate::eval::{combinator_stream, generator, Binding, FunVal, Lazy, Machine, Resolver, StreamRef};

/// How a stream slot is indexed in a lemma context.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SlotIndex {
    /// `s (n + k)`
    Offset(u64),
    /// Anything else; never admissible, kept for the diagnostic.
    Other(String),
}

/// Right-hand side of a form-shifting lemma.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Template {
    Lit(Scalar),
    Builtin(Op, Vec<Template>),
    ScalarSlot(usize),
    ApplySlot(usize, Vec<Template>),
    StreamSlot { slot: usize, index: SlotIndex },
    /// The index variable outside any stream slot.
    IndexVar,
    Free(Ident),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormShiftLemma {
    pub fn_name: Ident,
    pub scalar_params: Vec<Ident>,
    pub stream_params: Vec<Ident>,
    pub index_param: Ident,
    pub context: Template,
}

impl FormShiftLemma {
    pub fn scalar_arity(&self) -> usize {
        self.scalar_params.len()
    }

    pub fn stream_arity(&self) -> usize {
        self.stream_params.len()
    }

    /// `⟦map⟧ f s n = f (s n)`
    pub fn map() -> Self {
        FormShiftLemma {
            fn_name: Ident::new("map"),
            scalar_params: vec![Ident::new("f")],
            stream_params: vec![Ident::new("s")],
            index_param: Ident::new("n"),
            context: Template::ApplySlot(
                0,
                vec![Template::StreamSlot {
                    slot: 0,
                    index: SlotIndex::Offset(0),
                }],
            ),
        }
    }

    /// `⟦zipWith⟧ f s₁ s₂ n = f (s₁ n) (s₂ n)`
    pub fn zip_with() -> Self {
        FormShiftLemma {
            fn_name: Ident::new("zipWith"),
            scalar_params: vec![Ident::new("f")],
            stream_params: vec![Ident::new("s1"), Ident::new("s2")],
            index_param: Ident::new("n"),
            context: Template::ApplySlot(
                0,
                vec![
                    Template::StreamSlot {
                        slot: 0,
                        index: SlotIndex::Offset(0),
                    },
                    Template::StreamSlot {
                        slot: 1,
                        index: SlotIndex::Offset(0),
                    },
                ],
            ),
        }
    }

    /// The context with its holes filled; `None` when an argument has the wrong kind.
    pub fn instantiate(&self, scalar_args: &[CallArg], streams: &[IndexExpr], index: &IndexExpr) -> Option<IndexExpr> {
        if scalar_args.len() != self.scalar_arity() || streams.len() != self.stream_arity() {
            return None;
        }
        fill(&self.context, scalar_args, streams, index)
    }

    /// Evaluates the context with stream slot `j` at offset `k` answered by `stream_at(j, k)`.
    fn eval(
        &self,
        t: &Template,
        scalars: &[Binding],
        m: &mut Machine,
        stream_at: &mut dyn FnMut(&mut Machine, usize, u64) -> Result<Scalar, String>,
    ) -> Result<Scalar, String> {
        match t {
            Template::Lit(v) => Ok(v.clone()),
            Template::Builtin(op, args) => {
                let vals = args
                    .iter()
                    .map(|a| self.eval(a, scalars, m, stream_at))
                    .collect::<Result<Vec<_>, _>>()?;
                FunVal::new(*op, Vec::new()).apply(&vals).map_err(|e| e.to_string())
            }
            Template::ScalarSlot(i) => match scalars.get(*i) {
                Some(Binding::Scalar(v)) => v.force(m).map_err(|e| e.to_string()),
                _ => Err(format!("slot {i} is not a scalar")),
            },
            Template::ApplySlot(i, args) => {
                let f = match scalars.get(*i) {
                    Some(Binding::Fun(f)) => f.clone(),
                    _ => return Err(format!("slot {i} is not a function")),
                };
                let vals = args
                    .iter()
                    .map(|a| self.eval(a, scalars, m, stream_at))
                    .collect::<Result<Vec<_>, _>>()?;
                f.apply(&vals).map_err(|e| e.to_string())
            }
            Template::StreamSlot {
                slot,
                index: SlotIndex::Offset(k),
            } => stream_at(m, *slot, *k),
            Template::StreamSlot { .. } | Template::IndexVar | Template::Free(_) => {
                Err("ill-shaped template".into())
            }
        }
    }
}

fn fill(t: &Template, scalar_args: &[CallArg], streams: &[IndexExpr], index: &IndexExpr) -> Option<IndexExpr> {
    Some(match t {
        Template::Lit(v) => IndexExpr::Lit(v.clone()),
        Template::Builtin(op, args) => IndexExpr::Builtin(
            *op,
            args.iter()
                .map(|a| fill(a, scalar_args, streams, index))
                .collect::<Option<Vec<_>>>()?,
        ),
        Template::ScalarSlot(i) => match scalar_args.get(*i)? {
            CallArg::Scalar(e) => e.clone(),
            _ => return None,
        },
        Template::ApplySlot(i, args) => match scalar_args.get(*i)? {
            CallArg::Fun(f) => IndexExpr::Apply(
                f.clone(),
                args.iter()
                    .map(|a| fill(a, scalar_args, streams, index))
                    .collect::<Option<Vec<_>>>()?,
            ),
            _ => return None,
        },
        Template::StreamSlot {
            slot,
            index: SlotIndex::Offset(k),
        } => IndexExpr::Nth {
            stream: Box::new(streams.get(*slot)?.clone()),
            index: Box::new(index.clone().plus_const(*k)),
        },
        Template::StreamSlot { .. } | Template::IndexVar | Template::Free(_) => return None,
    })
}

impl fmt::Display for FormShiftLemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lemma {}", self.fn_name)?;
        for p in &self.scalar_params {
            write!(f, " {p}")?;
        }
        for p in &self.stream_params {
            write!(f, " ~{p}")?;
        }
        write!(f, " {} = ", self.index_param)?;
        let mut out = String::new();
        template(&mut out, self, &self.context, 0);
        f.write_str(&out)
    }
}

fn template(out: &mut String, l: &FormShiftLemma, t: &Template, level: u8) {
    let open = |out: &mut String, cond: bool| {
        if cond {
            out.push('(')
        }
    };
    let close = |out: &mut String, cond: bool| {
        if cond {
            out.push(')')
        }
    };
    match t {
        Template::Lit(v) => {
            let p = v.is_negative() && level >= 3;
            open(out, p);
            out.push_str(&v.to_string());
            close(out, p);
        }
        Template::Builtin(Op::Plus, args) if args.len() == 2 => {
            open(out, level > 1);
            template(out, l, &args[0], 1);
            out.push_str(" + ");
            template(out, l, &args[1], 2);
            close(out, level > 1);
        }
        Template::Builtin(Op::Times, args) if args.len() == 2 => {
            open(out, level > 2);
            template(out, l, &args[0], 2);
            out.push_str(" * ");
            template(out, l, &args[1], 3);
            close(out, level > 2);
        }
        Template::Builtin(op, args) => {
            open(out, level > 3);
            out.push_str(op.name());
            for a in args {
                out.push(' ');
                template(out, l, a, 4);
            }
            close(out, level > 3);
        }
        Template::ScalarSlot(i) => out.push_str(slot_name(&l.scalar_params, *i)),
        Template::ApplySlot(i, args) => {
            open(out, level > 3);
            out.push_str(slot_name(&l.scalar_params, *i));
            for a in args {
                out.push(' ');
                template(out, l, a, 4);
            }
            close(out, level > 3);
        }
        Template::StreamSlot { slot, index } => {
            open(out, level > 3);
            out.push_str(slot_name(&l.stream_params, *slot));
            out.push(' ');
            match index {
                SlotIndex::Offset(0) => out.push_str(l.index_param.as_str()),
                SlotIndex::Offset(k) => out.push_str(&format!("({} + {k})", l.index_param)),
                SlotIndex::Other(s) => out.push_str(&format!("({s})")),
            }
            close(out, level > 3);
        }
        Template::IndexVar => out.push_str(l.index_param.as_str()),
        Template::Free(x) => out.push_str(x.as_str()),
    }
}

fn slot_name(names: &[Ident], i: usize) -> &str {
    names.get(i).map(Ident::as_str).unwrap_or("?")
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub index: u64,
    pub scalar_args: Vec<String>,
    pub stream_args: Vec<String>,
    /// Value of the interfering function applied to the arguments, at `index`.
    pub expected: String,
    /// Value of the instantiated context.
    pub got: String,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at n = {}", self.index)?;
        let args: Vec<&String> = self.scalar_args.iter().chain(&self.stream_args).collect();
        if !args.is_empty() {
            f.write_str(" with ")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                f.write_str(a)?;
            }
        }
        write!(f, ": left side is {}, right side is {}", self.expected, self.got)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LemmaError {
    #[error("`{0}` is not a known interfering function")]
    Unknown(Ident),
    #[error("lemma for `{lemma}` is ill-shaped: {reason}")]
    Shape { lemma: Ident, reason: String },
    #[error("lemma for `{lemma}` is false {counterexample}")]
    False {
        lemma: Ident,
        counterexample: Box<Counterexample>,
    },
    #[error("lemma for `{lemma}` could not be tested: {reason}")]
    Untestable { lemma: Ident, reason: String },
}

impl LemmaError {
    pub fn code(&self) -> &'static str {
        match self {
            LemmaError::Unknown(_) => "E-LEMMA-UNKNOWN",
            LemmaError::Shape { .. } => "E-LEMMA-SHAPE",
            LemmaError::False { .. } => "E-LEMMA-FALSE",
            LemmaError::Untestable { .. } => "E-LEMMA-UNTESTABLE",
        }
    }
}

pub const DEFAULT_SEED: u64 = 0x5eed_c0de;
pub const VALIDATION_TRIALS: usize = 200;
/// Largest index probed during validation.
pub const MAX_PROBE_INDEX: u64 = 200;

/// Parameter signature of an interfering function: scalar kinds and stream count.
pub fn interferer_signature(env: &Environment, name: &str) -> Option<(Vec<ScalarKind>, usize)> {
    if let Some(def) = env.surface_def(name) {
        return Some((
            def.scalar_params.iter().map(|p| p.kind).collect(),
            def.stream_params.len(),
        ));
    }
    Combinator::from_name(name).map(|c| (c.scalar_kinds().to_vec(), c.stream_arity()))
}

/// Structural checks: arities, slot kinds, and the index variable only inside stream slots.
pub fn check_shape(lemma: &FormShiftLemma, env: &Environment) -> Result<(), LemmaError> {
    let (kinds, streams) = interferer_signature(env, lemma.fn_name.as_str())
        .ok_or_else(|| LemmaError::Unknown(lemma.fn_name.clone()))?;
    let shape = |reason: String| LemmaError::Shape {
        lemma: lemma.fn_name.clone(),
        reason,
    };
    if kinds.len() != lemma.scalar_arity() || streams != lemma.stream_arity() {
        return Err(shape(format!(
            "`{}` takes {} scalar and {} stream argument(s), the lemma declares {} and {}",
            lemma.fn_name,
            kinds.len(),
            streams,
            lemma.scalar_arity(),
            lemma.stream_arity()
        )));
    }
    let mut used_scalar = vec![false; kinds.len()];
    let mut used_stream = vec![false; streams];
    let mut stack = vec![&lemma.context];
    while let Some(t) = stack.pop() {
        match t {
            Template::Lit(_) => {}
            Template::Builtin(op, args) => {
                if args.len() != op.arity() {
                    return Err(shape(format!("`{}` applied to {} argument(s)", op.name(), args.len())));
                }
                stack.extend(args);
            }
            Template::ScalarSlot(i) => {
                match kinds.get(*i) {
                    Some(ScalarKind::Value) => {}
                    Some(ScalarKind::Function { .. }) => {
                        return Err(shape(format!(
                            "function slot `{}` used as a value",
                            slot_name(&lemma.scalar_params, *i)
                        )))
                    }
                    None => return Err(shape(format!("scalar slot {i} out of range"))),
                }
                used_scalar[*i] = true;
            }
            Template::ApplySlot(i, args) => {
                match kinds.get(*i) {
                    Some(ScalarKind::Function { arity }) if *arity == args.len() => {}
                    Some(_) => {
                        return Err(shape(format!(
                            "slot `{}` applied to {} argument(s)",
                            slot_name(&lemma.scalar_params, *i),
                            args.len()
                        )))
                    }
                    None => return Err(shape(format!("scalar slot {i} out of range"))),
                }
                used_scalar[*i] = true;
                stack.extend(args);
            }
            Template::StreamSlot { slot, index } => {
                if *slot >= streams {
                    return Err(shape(format!("stream slot {slot} out of range")));
                }
                if let SlotIndex::Other(s) = index {
                    if s.is_empty() {
                        return Err(shape(format!(
                            "stream slot `{}` must be applied to `{}`",
                            slot_name(&lemma.stream_params, *slot),
                            lemma.index_param
                        )));
                    }
                    return Err(shape(format!(
                        "stream slot `{}` is applied to `{s}`; only `{}` or `{} + k` are allowed",
                        slot_name(&lemma.stream_params, *slot),
                        lemma.index_param,
                        lemma.index_param
                    )));
                }
                used_stream[*slot] = true;
            }
            Template::IndexVar => {
                return Err(shape(format!(
                    "index variable `{}` occurs outside a stream slot",
                    lemma.index_param
                )))
            }
            Template::Free(x) => return Err(shape(format!("`{x}` is not a slot, literal or builtin"))),
        }
    }
    if let Some(i) = used_scalar.iter().position(|u| !u) {
        return Err(shape(format!("slot `{}` does not occur", slot_name(&lemma.scalar_params, i))));
    }
    if let Some(i) = used_stream.iter().position(|u| !u) {
        return Err(shape(format!("slot `{}` does not occur", slot_name(&lemma.stream_params, i))));
    }
    Ok(())
}

const ARITH: &str = "arith#";
const GEOM: &str = "geom#";

/// `arith# a b = a :: arith# (a + b) b` and `geom# a b = a :: geom# (a * b) b`:
/// guarded definitions used as random stream sources.
fn helper_def(name: &str, op: Op) -> SurfaceDef {
    let a = Ident::new("a");
    let b = Ident::new("b");
    let var = |x: &Ident| ScalarExpr::Var(x.clone());
    SurfaceDef {
        name: Ident::new(name),
        scalar_params: vec![
            ScalarParam {
                name: a.clone(),
                kind: ScalarKind::Value,
            },
            ScalarParam {
                name: b.clone(),
                kind: ScalarKind::Value,
            },
        ],
        stream_params: Vec::new(),
        body: StreamExpr::Cons(
            Box::new(var(&a)),
            Box::new(StreamExpr::Call {
                name: Ident::new(name),
                scalar_args: vec![
                    ScalarArg::Value(ScalarExpr::Builtin(op, vec![var(&a), var(&b)])),
                    ScalarArg::Value(var(&b)),
                ],
                stream_args: vec![],
                span: SourceSpan::default(),
            }),
        ),
        span: SourceSpan::default(),
    }
}

fn random_fun(rng: &mut ChaCha8Rng, arity: usize) -> Option<FunVal> {
    let c = Scalar::from(rng.gen_range(-5i64..=5));
    match arity {
        1 => Some(match rng.gen_range(0..3) {
            0 => FunVal::new(Op::Succ, vec![]),
            1 => FunVal::new(Op::Plus, vec![c]),
            _ => FunVal::new(Op::Times, vec![c]),
        }),
        2 => Some(FunVal::new(*[Op::Plus, Op::Times].choose(rng).expect("nonempty"), vec![])),
        _ => None,
    }
}

fn random_stream(rng: &mut ChaCha8Rng, m: &mut Machine) -> Result<StreamRef, String> {
    match rng.gen_range(0..3) {
        0 => {
            let plen = rng.gen_range(0..3);
            let clen = rng.gen_range(1..4);
            let prefix: Vec<Scalar> = (0..plen).map(|_| Scalar::from(rng.gen_range(-9i64..=9))).collect();
            let cycle: Vec<Scalar> = (0..clen).map(|_| Scalar::from(rng.gen_range(-9i64..=9))).collect();
            Ok(generator(prefix.into(), cycle.into(), 0))
        }
        k => {
            let name = if k == 1 { ARITH } else { GEOM };
            let a = Scalar::from(rng.gen_range(-9i64..=9));
            let b = Scalar::from(if k == 1 { rng.gen_range(-5i64..=5) } else { rng.gen_range(-3i64..=3) });
            m.oracle_call(
                &Ident::new(name),
                vec![Binding::Scalar(Lazy::ready(a)), Binding::Scalar(Lazy::ready(b))],
            )
            .map_err(|e| e.to_string())
        }
    }
}

/// Random testing of a lemma against the oracle.
pub fn validate(lemma: &FormShiftLemma, env: &Environment, seed: u64, trials: usize) -> Result<(), LemmaError> {
    check_shape(lemma, env)?;
    let (kinds, streams) = interferer_signature(env, lemma.fn_name.as_str()).expect("checked by check_shape");
    let untestable = |reason: String| LemmaError::Untestable {
        lemma: lemma.fn_name.clone(),
        reason,
    };
    let mut test_env = env.clone();
    for (name, op) in [(ARITH, Op::Plus), (GEOM, Op::Times)] {
        test_env.surface.insert(Ident::new(name), helper_def(name, op));
    }
    let test_env = Rc::new(test_env);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let user_def = env.surface_def(lemma.fn_name.as_str()).is_some();

    for _ in 0..trials {
        let mut m = Machine::new(test_env.clone(), Resolver::Oracle).with_fuel(1_000_000);
        let mut scalars = Vec::new();
        let mut scalar_desc = Vec::new();
        for (kind, name) in kinds.iter().zip(&lemma.scalar_params) {
            match kind {
                ScalarKind::Value => {
                    let v = Scalar::from(rng.gen_range(-9i64..=9));
                    scalar_desc.push(format!("{name} = {v}"));
                    scalars.push(Binding::Scalar(Lazy::ready(v)));
                }
                ScalarKind::Function { arity } => {
                    let f = random_fun(&mut rng, *arity)
                        .ok_or_else(|| untestable(format!("no random functions of arity {arity}")))?;
                    scalar_desc.push(format!("{name} = {f}"));
                    scalars.push(Binding::Fun(f));
                }
            }
        }
        let mut stream_vals = Vec::new();
        for _ in 0..streams {
            stream_vals.push(random_stream(&mut rng, &mut m).map_err(untestable)?);
        }
        let n = rng.gen_range(0..=MAX_PROBE_INDEX);

        let mut args = scalars.clone();
        args.extend(stream_vals.iter().cloned().map(Binding::Stream));
        let applied = if user_def {
            m.oracle_call(&lemma.fn_name, args)
        } else {
            let c = Combinator::from_name(lemma.fn_name.as_str()).expect("known interferer");
            combinator_stream(c, args)
        }
        .map_err(|e| untestable(e.to_string()))?;
        let probe = |m: &mut Machine, n: u64| -> Result<(Scalar, Scalar), LemmaError> {
            let lhs = m.nth(&applied, n).map_err(|e| untestable(e.to_string()))?;
            let mut stream_at = |m: &mut Machine, j: usize, k: u64| -> Result<Scalar, String> {
                m.nth(&stream_vals[j], n + k).map_err(|e| e.to_string())
            };
            let rhs = lemma
                .eval(&lemma.context, &scalars, m, &mut stream_at)
                .map_err(untestable)?;
            Ok((lhs, rhs))
        };
        let (lhs, rhs) = probe(&mut m, n)?;
        if lhs != rhs {
            // Report the smallest failing index for these arguments.
            let mut found = (n, lhs, rhs);
            for i in 0..n {
                let (l, r) = probe(&mut m, i)?;
                if l != r {
                    found = (i, l, r);
                    break;
                }
            }
            let mut stream_desc = Vec::new();
            for (name, s) in lemma.stream_params.iter().zip(&stream_vals) {
                let shown = m.prefix(s, 4).map_err(|(_, e)| untestable(e.to_string()))?;
                let shown: Vec<String> = shown.iter().map(ToString::to_string).collect();
                stream_desc.push(format!("{name} = {}, …", shown.join(", ")));
            }
            return Err(LemmaError::False {
                lemma: lemma.fn_name.clone(),
                counterexample: Box::new(Counterexample {
                    index: found.0,
                    scalar_args: scalar_desc,
                    stream_args: stream_desc,
                    expected: found.1.to_string(),
                    got: found.2.to_string(),
                }),
            });
        }
    }
    Ok(())
}

/// Validates `lemma` and returns the environment extended with it.
pub fn register_lemma(env: &Environment, lemma: FormShiftLemma, seed: u64) -> Result<Environment, LemmaError> {
    validate(&lemma, env, seed, VALIDATION_TRIALS)?;
    let mut out = env.clone();
    out.lemmas.insert(lemma.fn_name.clone(), lemma);
    Ok(out)
}
