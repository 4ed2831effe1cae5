//! Translation of a surface equation into the encoded term `nth n ⟦body⟧`.
//!
//! Every recursive call becomes `stroff` of a derived function; view-mode stream
//! parameters become `stroff` of their function view. Calls to functions with a
//! registered form-shifting lemma stay as interfering applications so that the
//! lemma can fire once an `nth` reaches them.

use std::collections::BTreeSet;

use crate::ast::{
    fresh_name, CallArg, Environment, FunRef, Ident, IndexExpr, IndexFun, ScalarArg, ScalarExpr,
    StreamExpr, StreamMode, SurfaceDef,
};

/// Every identifier occurring in a surface body, binders included.
pub fn surface_names(def: &SurfaceDef) -> BTreeSet<Ident> {
    fn stream(e: &StreamExpr, out: &mut BTreeSet<Ident>) {
        match e {
            StreamExpr::Cons(h, t) => {
                scalar(h, out);
                stream(t, out);
            }
            StreamExpr::Call {
                name,
                scalar_args,
                stream_args,
                ..
            }
            | StreamExpr::Interfere {
                fun: name,
                scalar_args,
                stream_args,
            } => {
                out.insert(name.clone());
                for a in scalar_args {
                    match a {
                        ScalarArg::Value(e) => scalar(e, out),
                        ScalarArg::Fun(FunRef::Param(p)) => {
                            out.insert(p.clone());
                        }
                        ScalarArg::Fun(FunRef::Builtin { captured, .. }) => {
                            captured.iter().for_each(|c| scalar(c, out))
                        }
                    }
                }
                stream_args.iter().for_each(|s| stream(s, out));
            }
            StreamExpr::Var(x) => {
                out.insert(x.clone());
            }
            StreamExpr::Tail(s) => stream(s, out),
            StreamExpr::Match {
                scrutinee,
                head,
                tail,
                body,
            } => {
                stream(scrutinee, out);
                out.insert(head.clone());
                out.insert(tail.clone());
                stream(body, out);
            }
        }
    }
    fn scalar(e: &ScalarExpr, out: &mut BTreeSet<Ident>) {
        match e {
            ScalarExpr::Lit(_) => {}
            ScalarExpr::Var(x) => {
                out.insert(x.clone());
            }
            ScalarExpr::Builtin(_, args) => args.iter().for_each(|a| scalar(a, out)),
            ScalarExpr::Apply(f, args) => {
                out.insert(f.clone());
                args.iter().for_each(|a| scalar(a, out));
            }
            ScalarExpr::Head(s) => stream(s, out),
        }
    }
    let mut out: BTreeSet<Ident> = def.param_names().cloned().collect();
    out.insert(def.name.clone());
    stream(&def.body, &mut out);
    out
}

/// Name of the index parameter of the derived function: `n` unless taken.
pub fn index_param_name(def: &SurfaceDef) -> Ident {
    let taken = surface_names(def);
    fresh_name("n", |c| taken.contains(c))
}

struct Composer<'a> {
    def: &'a SurfaceDef,
    env: &'a Environment,
    /// Binders currently in scope; they shadow view-mode parameters.
    bound: Vec<Ident>,
}

impl Composer<'_> {
    fn is_view_param(&self, x: &Ident) -> bool {
        !self.bound.contains(x)
            && self
                .def
                .stream_params
                .iter()
                .any(|p| &p.name == x && p.mode == StreamMode::ViewAsFunction)
    }

    fn stream(&mut self, e: &StreamExpr) -> IndexExpr {
        match e {
            StreamExpr::Cons(h, t) => IndexExpr::Cons(Box::new(self.scalar(h)), Box::new(self.stream(t))),
            StreamExpr::Var(x) if self.is_view_param(x) => IndexExpr::StrOff(IndexFun::param(x.clone())),
            StreamExpr::Var(x) => IndexExpr::StreamVar(x.clone()),
            StreamExpr::Tail(s) => IndexExpr::Tail(Box::new(self.stream(s))),
            StreamExpr::Match {
                scrutinee,
                head,
                tail,
                body,
            } => {
                let scrutinee = Box::new(self.stream(scrutinee));
                self.bound.push(head.clone());
                self.bound.push(tail.clone());
                let body = Box::new(self.stream(body));
                self.bound.truncate(self.bound.len() - 2);
                IndexExpr::MatchStream {
                    scrutinee,
                    head: head.clone(),
                    tail: tail.clone(),
                    body,
                }
            }
            StreamExpr::Call {
                name,
                scalar_args,
                stream_args,
                ..
            } => {
                if name != &self.def.name && self.env.lemmas.contains_key(name.as_str()) {
                    return self.interfere(name, scalar_args, stream_args);
                }
                let modes: Vec<StreamMode> = if name == &self.def.name {
                    self.def.stream_params.iter().map(|p| p.mode).collect()
                } else {
                    self.env
                        .surface_def(name.as_str())
                        .map(|d| d.stream_params.iter().map(|p| p.mode).collect())
                        .unwrap_or_default()
                };
                let mut args: Vec<CallArg> = scalar_args.iter().map(|a| self.scalar_arg(a)).collect();
                for (i, s) in stream_args.iter().enumerate() {
                    let s = self.stream(s);
                    args.push(match modes.get(i) {
                        Some(StreamMode::ViewAsFunction) => CallArg::Indexed(IndexFun::View(Box::new(s))),
                        _ => CallArg::Stream(s),
                    });
                }
                IndexExpr::StrOff(IndexFun::rec(name.clone(), args))
            }
            StreamExpr::Interfere {
                fun,
                scalar_args,
                stream_args,
            } => self.interfere(fun, scalar_args, stream_args),
        }
    }

    fn interfere(&mut self, fun: &Ident, scalar_args: &[ScalarArg], stream_args: &[StreamExpr]) -> IndexExpr {
        IndexExpr::Interfere {
            fun: fun.clone(),
            scalar_args: scalar_args.iter().map(|a| self.scalar_arg(a)).collect(),
            stream_args: stream_args.iter().map(|s| self.stream(s)).collect(),
        }
    }

    fn scalar_arg(&mut self, a: &ScalarArg) -> CallArg {
        match a {
            ScalarArg::Value(e) => CallArg::Scalar(self.scalar(e)),
            ScalarArg::Fun(f) => CallArg::Fun(self.fun(f)),
        }
    }

    fn fun(&mut self, f: &FunRef<ScalarExpr>) -> FunRef<IndexExpr> {
        match f {
            FunRef::Builtin { op, captured } => FunRef::Builtin {
                op: *op,
                captured: captured.iter().map(|c| self.scalar(c)).collect(),
            },
            FunRef::Param(p) => FunRef::Param(p.clone()),
        }
    }

    fn scalar(&mut self, e: &ScalarExpr) -> IndexExpr {
        match e {
            ScalarExpr::Lit(v) => IndexExpr::Lit(v.clone()),
            ScalarExpr::Var(x) => IndexExpr::Var(x.clone()),
            ScalarExpr::Builtin(op, args) => IndexExpr::Builtin(*op, args.iter().map(|a| self.scalar(a)).collect()),
            ScalarExpr::Apply(f, args) => IndexExpr::Apply(
                FunRef::Param(f.clone()),
                args.iter().map(|a| self.scalar(a)).collect(),
            ),
            ScalarExpr::Head(s) => IndexExpr::Head(Box::new(self.stream(s))),
        }
    }
}

/// `nth n ⟦body⟧` with recursive calls and view parameters in `stroff` form.
pub fn compose_views(def: &SurfaceDef, env: &Environment, index_param: &Ident) -> IndexExpr {
    let mut c = Composer {
        def,
        env,
        bound: Vec::new(),
    };
    IndexExpr::Nth {
        stream: Box::new(c.stream(&def.body)),
        index: Box::new(IndexExpr::Var(index_param.clone())),
    }
}
