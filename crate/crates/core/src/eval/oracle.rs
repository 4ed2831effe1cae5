//! Demand-driven execution of the surface equations themselves.
//!
//! Nothing here looks at derived definitions: a self-call re-enters the
//! equation, combinators run by their operational definitions. Every forced
//! suspension costs one unit of fuel.

use std::rc::Rc;

use crate::ast::{Combinator, FunRef, Ident, Scalar, ScalarArg, ScalarExpr, StreamExpr};

use super::machine::{cell, ArgKey, FunVal, Lazy, Machine, StreamRef, Value};
use super::EvalError;

#[derive(Clone)]
pub enum Binding {
    Scalar(Lazy<Scalar>),
    Fun(FunVal),
    Stream(StreamRef),
}

/// Persistent association list; scopes are tiny, sharing matters more than lookup speed.
#[derive(Clone, Default)]
pub struct Scope(Option<Rc<(Ident, Binding, Scope)>>);

impl Scope {
    pub fn bind(&self, name: Ident, b: Binding) -> Scope {
        Scope(Some(Rc::new((name, b, self.clone()))))
    }

    pub fn get(&self, name: &Ident) -> Option<&Binding> {
        let mut cur = &self.0;
        while let Some(node) = cur {
            if &node.0 == name {
                return Some(&node.1);
            }
            cur = &node.2 .0;
        }
        None
    }
}

impl Binding {
    fn key(&self) -> ArgKey {
        match self {
            Binding::Scalar(l) => ArgKey::thunk(l),
            Binding::Fun(f) => ArgKey::Fun(f.clone()),
            Binding::Stream(s) => ArgKey::from(&Value::Stream(s.clone())),
        }
    }
}

impl From<Value> for Binding {
    fn from(v: Value) -> Self {
        match v {
            Value::Scalar(s) => Binding::Scalar(Lazy::ready(s)),
            Value::Fun(f) => Binding::Fun(f),
            Value::Stream(s) => Binding::Stream(s),
        }
    }
}

fn unbound(name: &Ident, what: &str) -> EvalError {
    EvalError::Type(format!("`{name}` is not bound to a {what}"))
}

impl Machine {
    /// The oracle stream of definition `name` applied to `args`.
    pub fn oracle_call(&mut self, name: &Ident, args: Vec<Binding>) -> Result<StreamRef, EvalError> {
        let def = self
            .env
            .surface_def(name.as_str())
            .ok_or_else(|| EvalError::NoDefinition(name.clone()))?;
        if def.arity() != args.len() {
            return Err(EvalError::Argument(format!(
                "`{name}` takes {} argument(s), got {}",
                def.arity(),
                args.len()
            )));
        }
        // Calls are shared per argument identity: the recursive calls of an
        // equation like `dTimes` meet the same tails over and over.
        let key = (name.clone(), args.iter().map(Binding::key).collect::<Vec<_>>());
        if let Some(s) = self.streams.get(&key) {
            return Ok(s.clone());
        }
        let mut scope = Scope::default();
        for (p, b) in def.param_names().zip(args) {
            scope = scope.bind(p.clone(), b);
        }
        let body = def.body.clone();
        let s = Lazy::defer(move |m| {
            let s = m.oracle_stream(&body, &scope)?;
            s.force(m)
        });
        self.streams.insert(key, s.clone());
        Ok(s)
    }

    /// Oracle stream of a definition applied to strict values.
    pub fn oracle_call_values(&mut self, name: &Ident, args: Vec<Value>) -> Result<StreamRef, EvalError> {
        self.oracle_call(name, args.into_iter().map(Binding::from).collect())
    }

    pub fn oracle_stream(&mut self, e: &StreamExpr, scope: &Scope) -> Result<StreamRef, EvalError> {
        Ok(match e {
            StreamExpr::Var(x) => match scope.get(x) {
                Some(Binding::Stream(s)) => s.clone(),
                _ => return Err(unbound(x, "stream")),
            },
            StreamExpr::Cons(h, t) => {
                let head = self.oracle_scalar(h, scope)?;
                let t = (**t).clone();
                let scope = scope.clone();
                let tail = Lazy::defer(move |m| m.oracle_stream(&t, &scope)?.force(m));
                Lazy::ready(cell(head, tail))
            }
            StreamExpr::Call {
                name,
                scalar_args,
                stream_args,
                ..
            } => {
                let args = self.oracle_args(scalar_args, stream_args, scope)?;
                self.oracle_call(name, args)?
            }
            StreamExpr::Tail(s) => {
                let s = self.oracle_stream(s, scope)?;
                Lazy::defer(move |m| {
                    let c = s.force(m)?;
                    c.tail.force(m)
                })
            }
            StreamExpr::Match {
                scrutinee,
                head,
                tail,
                body,
            } => {
                let scr = self.oracle_stream(scrutinee, scope)?;
                let (head, tail, body) = (head.clone(), tail.clone(), (**body).clone());
                let scope = scope.clone();
                Lazy::defer(move |m| {
                    let c = scr.force(m)?;
                    let inner = scope
                        .bind(head, Binding::Scalar(c.head.clone()))
                        .bind(tail, Binding::Stream(c.tail.clone()));
                    m.oracle_stream(&body, &inner)?.force(m)
                })
            }
            StreamExpr::Interfere {
                fun,
                scalar_args,
                stream_args,
            } => {
                let args = self.oracle_args(scalar_args, stream_args, scope)?;
                match Combinator::from_name(fun.as_str()) {
                    Some(c) => combinator_stream(c, args)?,
                    None => self.oracle_call(fun, args)?,
                }
            }
        })
    }

    fn oracle_args(
        &mut self,
        scalar_args: &[ScalarArg],
        stream_args: &[StreamExpr],
        scope: &Scope,
    ) -> Result<Vec<Binding>, EvalError> {
        let mut out = Vec::with_capacity(scalar_args.len() + stream_args.len());
        for a in scalar_args {
            out.push(match a {
                ScalarArg::Value(e) => Binding::Scalar(self.oracle_scalar(e, scope)?),
                ScalarArg::Fun(f) => Binding::Fun(self.oracle_fun(f, scope)?),
            });
        }
        for s in stream_args {
            out.push(Binding::Stream(self.oracle_stream(s, scope)?));
        }
        Ok(out)
    }

    fn oracle_fun(&mut self, f: &FunRef<ScalarExpr>, scope: &Scope) -> Result<FunVal, EvalError> {
        match f {
            FunRef::Builtin { op, captured } => {
                let mut vals = Vec::with_capacity(captured.len());
                for c in captured {
                    let v = self.oracle_scalar(c, scope)?;
                    vals.push(v.force(self)?);
                }
                Ok(FunVal::new(*op, vals))
            }
            FunRef::Param(p) => match scope.get(p) {
                Some(Binding::Fun(f)) => Ok(f.clone()),
                _ => Err(unbound(p, "function")),
            },
        }
    }

    pub fn oracle_scalar(&mut self, e: &ScalarExpr, scope: &Scope) -> Result<Lazy<Scalar>, EvalError> {
        Ok(match e {
            ScalarExpr::Lit(v) => Lazy::ready(v.clone()),
            ScalarExpr::Var(x) => match scope.get(x) {
                Some(Binding::Scalar(v)) => v.clone(),
                _ => return Err(unbound(x, "scalar")),
            },
            ScalarExpr::Builtin(op, args) => {
                let f = FunVal::new(*op, Vec::new());
                self.lazy_apply(f, args, scope)?
            }
            ScalarExpr::Apply(name, args) => {
                let f = match scope.get(name) {
                    Some(Binding::Fun(f)) => f.clone(),
                    _ => return Err(unbound(name, "function")),
                };
                self.lazy_apply(f, args, scope)?
            }
            ScalarExpr::Head(s) => {
                let s = self.oracle_stream(s, scope)?;
                Lazy::defer(move |m| {
                    let c = s.force(m)?;
                    c.head.force(m)
                })
            }
        })
    }

    fn lazy_apply(&mut self, f: FunVal, args: &[ScalarExpr], scope: &Scope) -> Result<Lazy<Scalar>, EvalError> {
        let args = args
            .iter()
            .map(|a| self.oracle_scalar(a, scope))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Lazy::defer(move |m| {
            let vals = args.iter().map(|a| a.force(m)).collect::<Result<Vec<_>, _>>()?;
            f.apply(&vals)
        }))
    }
}

fn split_args(c: Combinator, args: Vec<Binding>) -> Result<(Vec<FunVal>, Vec<StreamRef>), EvalError> {
    let k = c.scalar_kinds().len();
    if args.len() != k + c.stream_arity() {
        return Err(EvalError::Argument(format!(
            "`{}` takes {} argument(s), got {}",
            c.name(),
            k + c.stream_arity(),
            args.len()
        )));
    }
    let mut funs = Vec::new();
    let mut streams = Vec::new();
    for (i, a) in args.into_iter().enumerate() {
        match (i < k, a) {
            (true, Binding::Fun(f)) => funs.push(f),
            (false, Binding::Stream(s)) => streams.push(s),
            _ => {
                return Err(EvalError::Argument(format!(
                    "argument {} of `{}` has the wrong kind",
                    i + 1,
                    c.name()
                )))
            }
        }
    }
    Ok((funs, streams))
}

/// Runs a combinator by its operational definition.
pub fn combinator_stream(c: Combinator, args: Vec<Binding>) -> Result<StreamRef, EvalError> {
    let (funs, streams) = split_args(c, args)?;
    Ok(match c {
        Combinator::Map => map_stream(funs[0].clone(), streams[0].clone()),
        Combinator::ZipWith => zip_stream(funs[0].clone(), streams[0].clone(), streams[1].clone()),
        Combinator::Merge => merge_stream(streams[0].clone(), streams[1].clone()),
    })
}

pub fn map_stream(f: FunVal, s: StreamRef) -> StreamRef {
    Lazy::defer(move |m| {
        let c = s.force(m)?;
        let h = c.head.clone();
        let g = f.clone();
        let head = Lazy::defer(move |m| {
            let v = h.force(m)?;
            g.apply(&[v])
        });
        Ok(cell(head, map_stream(f, c.tail.clone())))
    })
}

pub fn zip_stream(f: FunVal, a: StreamRef, b: StreamRef) -> StreamRef {
    Lazy::defer(move |m| {
        let ca = a.force(m)?;
        let cb = b.force(m)?;
        let (ha, hb) = (ca.head.clone(), cb.head.clone());
        let g = f.clone();
        let head = Lazy::defer(move |m| {
            let x = ha.force(m)?;
            let y = hb.force(m)?;
            g.apply(&[x, y])
        });
        Ok(cell(head, zip_stream(f, ca.tail.clone(), cb.tail.clone())))
    })
}

/// Least-head merge; equal heads are emitted once and both sides advance.
pub fn merge_stream(a: StreamRef, b: StreamRef) -> StreamRef {
    Lazy::defer(move |m| {
        let ca = a.force(m)?;
        let cb = b.force(m)?;
        let x = ca.head.force(m)?;
        let y = cb.head.force(m)?;
        Ok(match x.cmp(&y) {
            std::cmp::Ordering::Less => cell(Lazy::ready(x), merge_stream(ca.tail.clone(), b)),
            std::cmp::Ordering::Greater => cell(Lazy::ready(y), merge_stream(a, cb.tail.clone())),
            std::cmp::Ordering::Equal => cell(Lazy::ready(x), merge_stream(ca.tail.clone(), cb.tail.clone())),
        })
    })
}
