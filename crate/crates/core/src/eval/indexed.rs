//! Evaluation of index-language expressions, encoding nodes included.
//!
//! A derived definition is evaluated by plain structural recursion. The same
//! evaluator also runs intermediate rewrite terms; there, recursive calls can be
//! answered by the oracle instead (see [`Resolver`]).

use std::rc::Rc;

use crate::ast::{CallArg, Combinator, FunBase, FunRef, Ident, IndexExpr, IndexFun, Scalar};

use super::machine::{cell, stroff_from, ArgKey, FunVal, Lazy, Machine, Resolver, StreamRef, Value};
use super::oracle::{combinator_stream, Binding};
use super::EvalError;

/// Persistent scope of index-language variables.
#[derive(Clone, Default)]
pub struct Env(Option<Rc<(Ident, Value, Env)>>);

impl Env {
    pub fn bind(&self, name: Ident, v: Value) -> Env {
        Env(Some(Rc::new((name, v, self.clone()))))
    }

    pub fn get(&self, name: &Ident) -> Option<&Value> {
        let mut cur = &self.0;
        while let Some(node) = cur {
            if &node.0 == name {
                return Some(&node.1);
            }
            cur = &node.2 .0;
        }
        None
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Ident, Value)>) -> Env {
        pairs.into_iter().fold(Env::default(), |env, (k, v)| env.bind(k, v))
    }
}

fn not_bound(name: &Ident, what: &str) -> EvalError {
    EvalError::Type(format!("`{name}` is not bound to a {what}"))
}

impl Machine {
    pub fn eval_scalar(&mut self, e: &IndexExpr, env: &Env) -> Result<Scalar, EvalError> {
        match self.eval_index(e, env)? {
            Value::Scalar(s) => Ok(s),
            other => Err(EvalError::Type(format!(
                "expected a scalar, found a {}",
                other.kind_name()
            ))),
        }
    }

    pub fn eval_stream(&mut self, e: &IndexExpr, env: &Env) -> Result<StreamRef, EvalError> {
        match self.eval_index(e, env)? {
            Value::Stream(s) => Ok(s),
            other => Err(EvalError::Type(format!(
                "expected a stream, found a {}",
                other.kind_name()
            ))),
        }
    }

    fn eval_nat(&mut self, e: &IndexExpr, env: &Env) -> Result<u64, EvalError> {
        let v = self.eval_scalar(e, env)?;
        v.to_index()
            .ok_or_else(|| EvalError::Type(format!("index {v} is not a natural number")))
    }

    pub fn eval_index(&mut self, e: &IndexExpr, env: &Env) -> Result<Value, EvalError> {
        self.grow(|m| m.eval_inner(e, env))
    }

    fn eval_inner(&mut self, e: &IndexExpr, env: &Env) -> Result<Value, EvalError> {
        Ok(match e {
            IndexExpr::Lit(v) => Value::Scalar(v.clone()),
            IndexExpr::Var(x) | IndexExpr::StreamVar(x) => env
                .get(x)
                .cloned()
                .ok_or_else(|| not_bound(x, "value"))?,
            IndexExpr::Builtin(op, args) => {
                let vals = args
                    .iter()
                    .map(|a| self.eval_scalar(a, env))
                    .collect::<Result<Vec<_>, _>>()?;
                Value::Scalar(FunVal::new(*op, Vec::new()).apply(&vals)?)
            }
            IndexExpr::Apply(f, args) => {
                let f = self.eval_fun(f, env)?;
                let vals = args
                    .iter()
                    .map(|a| self.eval_scalar(a, env))
                    .collect::<Result<Vec<_>, _>>()?;
                Value::Scalar(f.apply(&vals)?)
            }
            IndexExpr::MatchIndex {
                scrutinee,
                zero,
                pred,
                succ,
            } => {
                let k = self.eval_nat(scrutinee, env)?;
                if k == 0 {
                    self.eval_index(zero, env)?
                } else {
                    let inner = env.bind(pred.clone(), Value::Scalar(Scalar::from(k - 1)));
                    self.eval_index(succ, &inner)?
                }
            }
            IndexExpr::RecCall { name, args, index } => {
                let args = self.eval_args(args, env)?;
                let i = self.eval_nat(index, env)?;
                Value::Scalar(self.rec_call(name, args, i)?)
            }
            IndexExpr::ParamApp { param, index } => {
                let s = match env.get(param) {
                    Some(Value::Stream(s)) => s.clone(),
                    _ => return Err(not_bound(param, "stream")),
                };
                let i = self.eval_nat(index, env)?;
                Value::Scalar(self.nth(&s, i)?)
            }
            IndexExpr::Head(s) => {
                let s = self.eval_stream(s, env)?;
                Value::Scalar(self.nth(&s, 0)?)
            }
            IndexExpr::Tail(s) => {
                let s = self.eval_stream(s, env)?;
                Value::Stream(self.skip(&s, 1)?)
            }
            IndexExpr::Cons(h, t) => {
                let h = self.eval_scalar(h, env)?;
                let (t, env) = ((**t).clone(), env.clone());
                let tail = Lazy::defer(move |m| m.eval_stream(&t, &env)?.force(m));
                Value::Stream(Lazy::ready(cell(Lazy::ready(h), tail)))
            }
            IndexExpr::MatchStream {
                scrutinee,
                head,
                tail,
                body,
            } => {
                let s = self.eval_stream(scrutinee, env)?;
                let c = s.force(self)?;
                let h = c.head.force(self)?;
                let inner = env
                    .bind(head.clone(), Value::Scalar(h))
                    .bind(tail.clone(), Value::Stream(c.tail.clone()));
                self.eval_index(body, &inner)?
            }
            IndexExpr::Interfere {
                fun,
                scalar_args,
                stream_args,
            } => {
                let mut args: Vec<Binding> = self
                    .eval_args(scalar_args, env)?
                    .into_iter()
                    .map(Binding::from)
                    .collect();
                for s in stream_args {
                    args.push(Binding::Stream(self.eval_stream(s, env)?));
                }
                Value::Stream(match Combinator::from_name(fun.as_str()) {
                    Some(c) => combinator_stream(c, args)?,
                    None => self.oracle_call(fun, args)?,
                })
            }
            IndexExpr::Nth { stream, index } => {
                let s = self.eval_stream(stream, env)?;
                let i = self.eval_nat(index, env)?;
                Value::Scalar(self.nth(&s, i)?)
            }
            IndexExpr::StrOff(f) => Value::Stream(self.eval_index_fun(f, env)?),
            IndexExpr::App(f, i) => {
                let s = self.eval_index_fun(f, env)?;
                let i = self.eval_nat(i, env)?;
                Value::Scalar(self.nth(&s, i)?)
            }
        })
    }

    fn eval_fun(&mut self, f: &FunRef<IndexExpr>, env: &Env) -> Result<FunVal, EvalError> {
        match f {
            FunRef::Builtin { op, captured } => {
                let vals = captured
                    .iter()
                    .map(|c| self.eval_scalar(c, env))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(FunVal::new(*op, vals))
            }
            FunRef::Param(p) => match env.get(p) {
                Some(Value::Fun(f)) => Ok(f.clone()),
                _ => Err(not_bound(p, "function")),
            },
        }
    }

    pub(crate) fn eval_args(&mut self, args: &[CallArg], env: &Env) -> Result<Vec<Value>, EvalError> {
        args.iter()
            .map(|a| {
                Ok(match a {
                    CallArg::Scalar(e) => Value::Scalar(self.eval_scalar(e, env)?),
                    CallArg::Fun(f) => Value::Fun(self.eval_fun(f, env)?),
                    CallArg::Stream(e) => Value::Stream(self.eval_stream(e, env)?),
                    CallArg::Indexed(f) => Value::Stream(self.eval_index_fun(f, env)?),
                })
            })
            .collect()
    }

    /// The stream `stroff f` of an index function.
    pub fn eval_index_fun(&mut self, f: &IndexFun, env: &Env) -> Result<StreamRef, EvalError> {
        match f {
            IndexFun::Shifted {
                base: FunBase::Param(p),
                shift,
            } => {
                let s = match env.get(p) {
                    Some(Value::Stream(s)) => s.clone(),
                    _ => return Err(not_bound(p, "stream")),
                };
                self.skip(&s, *shift)
            }
            IndexFun::Shifted {
                base: FunBase::Rec { name, args },
                shift,
            } => {
                let args = self.eval_args(args, env)?;
                match self.resolver {
                    Resolver::Derived => Ok(self.derived_stream(name.clone(), args, *shift)),
                    Resolver::Oracle => {
                        let s = self.oracle_call_values(name, args)?;
                        self.skip(&s, *shift)
                    }
                }
            }
            IndexFun::View(s) => self.eval_stream(s, env),
        }
    }

    /// `stroff` of the derived function `name args`, starting at index `from`.
    pub fn derived_stream(&mut self, name: Ident, args: Vec<Value>, from: u64) -> StreamRef {
        let f = Rc::new(move |m: &mut Machine, i: u64| m.rec_call(&name, args.clone(), i));
        stroff_from(f, from)
    }

    /// Answers `name args i` according to the session's resolver.
    pub fn rec_call(&mut self, name: &Ident, args: Vec<Value>, i: u64) -> Result<Scalar, EvalError> {
        match self.resolver {
            Resolver::Derived => self.derived_call(name, args, i),
            Resolver::Oracle => {
                let s = self.oracle_call_values(name, args)?;
                self.nth(&s, i)
            }
        }
    }

    fn derived_call(&mut self, name: &Ident, args: Vec<Value>, i: u64) -> Result<Scalar, EvalError> {
        let key = self
            .memo
            .as_ref()
            .map(|_| (name.clone(), args.iter().map(ArgKey::from).collect::<Vec<_>>(), i));
        if let (Some(memo), Some(key)) = (&self.memo, &key) {
            if let Some(v) = memo.get(key) {
                return Ok(v.clone());
            }
        }
        let shared = self.env.clone();
        let def = match shared.derived_def(name.as_str()) {
            Some(d) => d,
            None => return Err(EvalError::NoDerived(name.clone())),
        };
        let params: Vec<Ident> = def.param_names().cloned().collect();
        if params.len() != args.len() {
            return Err(EvalError::Argument(format!(
                "`{name}` takes {} argument(s), got {}",
                params.len(),
                args.len()
            )));
        }
        if self.depth >= self.max_depth {
            return Err(EvalError::Depth { limit: self.max_depth });
        }
        self.depth += 1;
        self.rec_calls += 1;
        let env = Env::from_pairs(
            params
                .into_iter()
                .zip(args)
                .chain(std::iter::once((def.index_param.clone(), Value::Scalar(Scalar::from(i))))),
        );
        let r = self.eval_scalar(&def.body, &env);
        self.depth -= 1;
        let v = r?;
        if let (Some(memo), Some(key)) = (&mut self.memo, key) {
            memo.insert(key, v.clone());
        }
        Ok(v)
    }
}
