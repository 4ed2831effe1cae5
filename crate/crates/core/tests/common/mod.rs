//! Shared helpers and independent reference implementations.
#![allow(dead_code)]

use corec_core::ast::Environment;
use corec_core::corpus::CorpusEntry;
use corec_core::transform::derive;
use num_bigint::BigInt;

/// The entry's program with every derivable definition derived.
pub fn derived_env(entry: &CorpusEntry) -> Environment {
    let mut env = entry.program().env;
    let defs: Vec<_> = env.surface.values().cloned().collect();
    for def in defs {
        if let Ok(d) = derive(&def, &env) {
            env.insert_derived(d.def);
        }
    }
    env
}

pub fn ints(values: &[i64]) -> Vec<BigInt> {
    values.iter().map(|&v| BigInt::from(v)).collect()
}

/// Fibonacci-like sequence from two seeds, iteratively.
pub fn fib_from(a: i64, b: i64, len: usize) -> Vec<BigInt> {
    let (mut x, mut y) = (BigInt::from(a), BigInt::from(b));
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(x.clone());
        let z = &x + &y;
        x = y;
        y = z;
    }
    out
}

/// Regular numbers (only prime factors 2 and 3) in increasing order, by trial division.
pub fn regular_numbers(len: usize) -> Vec<BigInt> {
    let mut out = Vec::new();
    let mut k: u64 = 1;
    while out.len() < len {
        let mut m = k;
        while m % 2 == 0 {
            m /= 2;
        }
        while m % 3 == 0 {
            m /= 3;
        }
        if m == 1 {
            out.push(BigInt::from(k));
        }
        k += 1;
    }
    out
}

/// Coefficients of the derivative-form product: `Σ C(n,k) x_k y_(n-k)`.
pub fn leibniz(x: &[BigInt], y: &[BigInt], len: usize) -> Vec<BigInt> {
    (0..len)
        .map(|n| {
            let mut c = BigInt::from(1);
            let mut sum = BigInt::from(0);
            for k in 0..=n {
                sum += &c * &x[k] * &y[n - k];
                c = c * BigInt::from(n - k) / BigInt::from(k + 1);
            }
            sum
        })
        .collect()
}

/// Elements of a `[prefix|cycle]` generator.
pub fn generator(prefix: &[i64], cycle: &[i64], len: usize) -> Vec<BigInt> {
    (0..len)
        .map(|i| {
            let v = if i < prefix.len() { prefix[i] } else { cycle[(i - prefix.len()) % cycle.len()] };
            BigInt::from(v)
        })
        .collect()
}

pub fn gen_spec(prefix: &[i64], cycle: &[i64]) -> String {
    let j = |xs: &[i64]| xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
    format!("[{}|{}]", j(prefix), j(cycle))
}

/// Reference values for a corpus entry, independent of the tool.
pub fn reference(name: &str, len: usize) -> Option<Vec<BigInt>> {
    Some(match name {
        "zeroes" => vec![BigInt::from(0); len],
        "nums" => (0..len as i64).map(BigInt::from).collect(),
        "nats" => (1..=len as i64).map(BigInt::from).collect(),
        "map" => generator(&[], &[0, 1, 2, 3], len).into_iter().map(|v| v + 1).collect(),
        "zipWith" => {
            let a = generator(&[], &[1, 2], len);
            let b = generator(&[], &[10], len);
            a.into_iter().zip(b).map(|(x, y)| x + y).collect()
        }
        "fib0" => fib_from(0, 1, len),
        "fib1" => fib_from(1, 1, len),
        "dTimes" => {
            let ones = vec![BigInt::from(1); len];
            leibniz(&ones, &ones, len)
        }
        "hamming" => regular_numbers(len),
        _ => return None,
    })
}

// ---------------------------------------------------------------------------
// Random well-scoped surface definitions `g a f ~s = …` (f unary).

use corec_core::ast::{
    FunRef, Ident, Op, Scalar, ScalarArg, ScalarExpr, ScalarKind, ScalarParam, StreamExpr, StreamMode, StreamParam,
    SurfaceDef,
};
use corec_core::diag::SourceSpan;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Gen {
    pub rng: ChaCha8Rng,
    scalars: Vec<Ident>,
    streams: Vec<Ident>,
    fresh: usize,
    /// Include calls to `g` itself.
    pub recursive: bool,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        use rand::SeedableRng;
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            scalars: vec![Ident::new("a")],
            streams: vec![Ident::new("s")],
            fresh: 0,
            recursive: true,
        }
    }

    fn fresh(&mut self, base: &str) -> Ident {
        self.fresh += 1;
        Ident::new(&format!("{base}{}", self.fresh))
    }

    pub fn unary(&mut self) -> FunRef<ScalarExpr> {
        match self.rng.gen_range(0..4) {
            0 => FunRef::Param(Ident::new("f")),
            1 => FunRef::builtin(Op::Succ),
            2 => FunRef::Builtin {
                op: Op::Plus,
                captured: vec![ScalarExpr::Lit(Scalar::from(self.rng.gen_range(-3i64..=3)))],
            },
            _ => FunRef::Builtin {
                op: Op::Times,
                captured: vec![ScalarExpr::Lit(Scalar::from(self.rng.gen_range(-3i64..=3)))],
            },
        }
    }

    pub fn scalar(&mut self, depth: u32) -> ScalarExpr {
        let leaf = depth == 0 || self.rng.gen_bool(0.35);
        if leaf {
            return match self.rng.gen_range(0..3) {
                0 => ScalarExpr::Lit(Scalar::from(self.rng.gen_range(-5i64..=9))),
                _ => {
                    let i = self.rng.gen_range(0..self.scalars.len());
                    ScalarExpr::Var(self.scalars[i].clone())
                }
            };
        }
        match self.rng.gen_range(0..5) {
            0 => ScalarExpr::Builtin(Op::Plus, vec![self.scalar(depth - 1), self.scalar(depth - 1)]),
            1 => ScalarExpr::Builtin(Op::Times, vec![self.scalar(depth - 1), self.scalar(depth - 1)]),
            2 => ScalarExpr::Builtin(Op::Succ, vec![self.scalar(depth - 1)]),
            3 => ScalarExpr::Apply(Ident::new("f"), vec![self.scalar(depth - 1)]),
            _ => ScalarExpr::Head(Box::new(self.stream(depth - 1))),
        }
    }

    pub fn stream(&mut self, depth: u32) -> StreamExpr {
        let leaf = depth == 0 || self.rng.gen_bool(0.25);
        if leaf {
            if self.recursive && self.rng.gen_bool(0.5) {
                return self.call(0);
            }
            let i = self.rng.gen_range(0..self.streams.len());
            return StreamExpr::Var(self.streams[i].clone());
        }
        match self.rng.gen_range(0..7) {
            0 | 1 => StreamExpr::Cons(Box::new(self.scalar(depth - 1)), Box::new(self.stream(depth - 1))),
            2 => StreamExpr::Tail(Box::new(self.stream(depth - 1))),
            3 => {
                let scrutinee = self.stream(depth - 1);
                let head = self.fresh("x");
                let tail = self.fresh("t");
                self.scalars.push(head.clone());
                self.streams.push(tail.clone());
                let body = self.stream(depth - 1);
                self.scalars.pop();
                self.streams.pop();
                StreamExpr::Match {
                    scrutinee: Box::new(scrutinee),
                    head,
                    tail,
                    body: Box::new(body),
                }
            }
            4 => StreamExpr::Interfere {
                fun: Ident::new("map"),
                scalar_args: vec![ScalarArg::Fun(self.unary())],
                stream_args: vec![self.stream(depth - 1)],
            },
            5 => {
                let op = if self.rng.gen_bool(0.5) { Op::Plus } else { Op::Times };
                StreamExpr::Interfere {
                    fun: Ident::new("zipWith"),
                    scalar_args: vec![ScalarArg::Fun(FunRef::builtin(op))],
                    stream_args: vec![self.stream(depth - 1), self.stream(depth - 1)],
                }
            }
            _ if self.recursive => self.call(depth - 1),
            _ => StreamExpr::Interfere {
                fun: Ident::new("merge"),
                scalar_args: vec![],
                stream_args: vec![self.stream(depth - 1), self.stream(depth - 1)],
            },
        }
    }

    fn call(&mut self, depth: u32) -> StreamExpr {
        StreamExpr::Call {
            name: Ident::new("g"),
            scalar_args: vec![ScalarArg::Value(self.scalar(depth)), ScalarArg::Fun(self.unary())],
            stream_args: vec![self.stream(depth)],
            span: SourceSpan::default(),
        }
    }

    /// `g a f ~s = f a :: <random>`; the head keeps both scalar parameters in use.
    pub fn def(&mut self, depth: u32) -> SurfaceDef {
        let body = StreamExpr::Cons(
            Box::new(ScalarExpr::Apply(Ident::new("f"), vec![ScalarExpr::Var(Ident::new("a"))])),
            Box::new(self.stream(depth)),
        );
        let mut def = surface_g(body);
        if self.rng.gen_bool(0.5) {
            def.stream_params[0].mode = StreamMode::ViewAsFunction;
        }
        def
    }
}

pub fn surface_g(body: StreamExpr) -> SurfaceDef {
    SurfaceDef {
        name: Ident::new("g"),
        scalar_params: vec![
            ScalarParam {
                name: Ident::new("a"),
                kind: ScalarKind::Value,
            },
            ScalarParam {
                name: Ident::new("f"),
                kind: ScalarKind::Function { arity: 1 },
            },
        ],
        stream_params: vec![StreamParam {
            name: Ident::new("s"),
            mode: StreamMode::KeepAsStream,
        }],
        body,
        span: SourceSpan::default(),
    }
}

// ---------------------------------------------------------------------------
// Evaluating intermediate rewrite terms.

use corec_core::ast::IndexExpr;
use corec_core::eval::{Env, EvalError, Machine, Resolver, Value};
use std::rc::Rc;

/// Values of `term` (a body over `index`) at `0..=upto`, recursive calls answered
/// by the oracle, with the entry's arguments bound.
pub fn term_values(entry: &CorpusEntry, index: &Ident, term: &IndexExpr, upto: u64) -> Result<Vec<Scalar>, EvalError> {
    let env = entry.program().env;
    let def = env.surface[entry.def].clone();
    let mut m = Machine::new(Rc::new(env), Resolver::Oracle).with_fuel(10_000_000);
    let args = m.bind_args(entry.def, &entry.arg_specs())?;
    let scope = Env::from_pairs(def.param_names().cloned().zip(args));
    (0..=upto)
        .map(|n| m.eval_scalar(term, &scope.bind(index.clone(), Value::Scalar(Scalar::from(n as i64)))))
        .collect()
}
