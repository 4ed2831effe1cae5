//! Nameless (de Bruijn style) view of expressions, used for alpha-equivalence.
//!
//! Bound variables become the distance to their binder; free identifiers and
//! call targets are kept by name. Source spans are dropped.

use crate::ast::{
    CallArg, FunBase, FunRef, Ident, IndexDef, IndexExpr, IndexFun, Scalar, ScalarArg,
    ScalarExpr, ScalarKind, StreamExpr, StreamMode, SurfaceDef,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Nameless {
    Node(&'static str, Vec<Nameless>),
    Bound(usize),
    Free(Ident),
    /// A name that is not a variable: call target, combinator, definition.
    Name(Ident),
    Int(Scalar),
    Nat(u64),
}

fn node(tag: &'static str, kids: Vec<Nameless>) -> Nameless {
    Nameless::Node(tag, kids)
}

#[derive(Default)]
struct Scope(Vec<Ident>);

impl Scope {
    fn var(&self, name: &Ident) -> Nameless {
        match self.0.iter().rev().position(|b| b == name) {
            Some(i) => Nameless::Bound(i),
            None => Nameless::Free(name.clone()),
        }
    }

    fn with<R>(&mut self, binders: &[&Ident], f: impl FnOnce(&mut Self) -> R) -> R {
        let mark = self.0.len();
        self.0.extend(binders.iter().map(|b| (*b).clone()));
        let r = f(self);
        self.0.truncate(mark);
        r
    }
}

pub trait ToNameless {
    fn nameless_in(&self, scope: &mut Vec<Ident>) -> Nameless;

    fn nameless(&self) -> Nameless {
        self.nameless_in(&mut Vec::new())
    }
}

/// Equality up to renaming of bound variables.
pub fn alpha_eq<T: ToNameless + ?Sized>(a: &T, b: &T) -> bool {
    a.nameless() == b.nameless()
}

macro_rules! via_scope {
    ($ty:ty, $method:ident) => {
        impl ToNameless for $ty {
            fn nameless_in(&self, scope: &mut Vec<Ident>) -> Nameless {
                let mut s = Scope(std::mem::take(scope));
                let r = $method(self, &mut s);
                *scope = s.0;
                r
            }
        }
    };
}

via_scope!(StreamExpr, stream);
via_scope!(ScalarExpr, scalar);
via_scope!(IndexExpr, index);

fn fun_scalar(f: &FunRef<ScalarExpr>, s: &mut Scope) -> Nameless {
    match f {
        FunRef::Builtin { op, captured } => node(
            op.name(),
            captured.iter().map(|c| scalar(c, s)).collect(),
        ),
        FunRef::Param(p) => node("fparam", vec![s.var(p)]),
    }
}

fn scalar_arg(a: &ScalarArg, s: &mut Scope) -> Nameless {
    match a {
        ScalarArg::Value(e) => node("val", vec![scalar(e, s)]),
        ScalarArg::Fun(f) => node("fun", vec![fun_scalar(f, s)]),
    }
}

fn stream(e: &StreamExpr, s: &mut Scope) -> Nameless {
    match e {
        StreamExpr::Cons(h, t) => node("cons", vec![scalar(h, s), stream(t, s)]),
        StreamExpr::Call {
            name,
            scalar_args,
            stream_args,
            ..
        } => {
            let mut kids = vec![Nameless::Name(name.clone())];
            kids.extend(scalar_args.iter().map(|a| scalar_arg(a, s)));
            kids.extend(stream_args.iter().map(|a| stream(a, s)));
            node("call", kids)
        }
        StreamExpr::Var(v) => node("svar", vec![s.var(v)]),
        StreamExpr::Tail(t) => node("tl", vec![stream(t, s)]),
        StreamExpr::Match {
            scrutinee,
            head,
            tail,
            body,
        } => {
            let scr = stream(scrutinee, s);
            let body = s.with(&[head, tail], |s| stream(body, s));
            node("smatch", vec![scr, body])
        }
        StreamExpr::Interfere {
            fun,
            scalar_args,
            stream_args,
        } => {
            let mut kids = vec![Nameless::Name(fun.clone())];
            kids.extend(scalar_args.iter().map(|a| scalar_arg(a, s)));
            kids.extend(stream_args.iter().map(|a| stream(a, s)));
            node("interfere", kids)
        }
    }
}

fn scalar(e: &ScalarExpr, s: &mut Scope) -> Nameless {
    match e {
        ScalarExpr::Lit(v) => Nameless::Int(v.clone()),
        ScalarExpr::Var(v) => node("var", vec![s.var(v)]),
        ScalarExpr::Builtin(op, args) => node(op.name(), args.iter().map(|a| scalar(a, s)).collect()),
        ScalarExpr::Apply(f, args) => {
            let mut kids = vec![s.var(f)];
            kids.extend(args.iter().map(|a| scalar(a, s)));
            node("apply", kids)
        }
        ScalarExpr::Head(t) => node("hd", vec![stream(t, s)]),
    }
}

fn fun_index(f: &FunRef<IndexExpr>, s: &mut Scope) -> Nameless {
    match f {
        FunRef::Builtin { op, captured } => {
            node(op.name(), captured.iter().map(|c| index(c, s)).collect())
        }
        FunRef::Param(p) => node("fparam", vec![s.var(p)]),
    }
}

fn index_fun(f: &IndexFun, s: &mut Scope) -> Nameless {
    match f {
        IndexFun::Shifted { base, shift } => {
            let base = match base {
                FunBase::Param(p) => node("pbase", vec![s.var(p)]),
                FunBase::Rec { name, args } => {
                    let mut kids = vec![Nameless::Name(name.clone())];
                    kids.extend(args.iter().map(|a| call_arg(a, s)));
                    node("rbase", kids)
                }
            };
            node("shifted", vec![base, Nameless::Nat(*shift)])
        }
        IndexFun::View(v) => node("view", vec![index(v, s)]),
    }
}

fn call_arg(a: &CallArg, s: &mut Scope) -> Nameless {
    match a {
        CallArg::Scalar(e) => node("aval", vec![index(e, s)]),
        CallArg::Fun(f) => node("afun", vec![fun_index(f, s)]),
        CallArg::Stream(e) => node("astream", vec![index(e, s)]),
        CallArg::Indexed(f) => node("aindexed", vec![index_fun(f, s)]),
    }
}

fn index(e: &IndexExpr, s: &mut Scope) -> Nameless {
    match e {
        IndexExpr::Lit(v) => Nameless::Int(v.clone()),
        IndexExpr::Var(v) => node("var", vec![s.var(v)]),
        IndexExpr::StreamVar(v) => node("svar", vec![s.var(v)]),
        IndexExpr::Builtin(op, args) => node(op.name(), args.iter().map(|a| index(a, s)).collect()),
        IndexExpr::Apply(f, args) => {
            let mut kids = vec![fun_index(f, s)];
            kids.extend(args.iter().map(|a| index(a, s)));
            node("apply", kids)
        }
        IndexExpr::MatchIndex {
            scrutinee,
            zero,
            pred,
            succ,
        } => {
            let scr = index(scrutinee, s);
            let z = index(zero, s);
            let b = s.with(&[pred], |s| index(succ, s));
            node("imatch", vec![scr, z, b])
        }
        IndexExpr::RecCall {
            name,
            args,
            index: i,
        } => {
            let mut kids = vec![Nameless::Name(name.clone())];
            kids.extend(args.iter().map(|a| call_arg(a, s)));
            kids.push(index(i, s));
            node("rec", kids)
        }
        IndexExpr::ParamApp { param, index: i } => node("papp", vec![s.var(param), index(i, s)]),
        IndexExpr::Head(t) => node("hd", vec![index(t, s)]),
        IndexExpr::Tail(t) => node("tl", vec![index(t, s)]),
        IndexExpr::Cons(h, t) => node("cons", vec![index(h, s), index(t, s)]),
        IndexExpr::MatchStream {
            scrutinee,
            head,
            tail,
            body,
        } => {
            let scr = index(scrutinee, s);
            let b = s.with(&[head, tail], |s| index(body, s));
            node("smatch", vec![scr, b])
        }
        IndexExpr::Interfere {
            fun,
            scalar_args,
            stream_args,
        } => {
            let mut kids = vec![Nameless::Name(fun.clone())];
            kids.extend(scalar_args.iter().map(|a| call_arg(a, s)));
            kids.extend(stream_args.iter().map(|a| index(a, s)));
            node("interfere", kids)
        }
        IndexExpr::Nth { stream: st, index: i } => node("nth", vec![index(st, s), index(i, s)]),
        IndexExpr::StrOff(f) => node("stroff", vec![index_fun(f, s)]),
        IndexExpr::App(f, i) => node("app", vec![index_fun(f, s), index(i, s)]),
    }
}

fn scalar_kind(k: ScalarKind) -> Nameless {
    match k {
        ScalarKind::Value => Nameless::Name(Ident::new("value")),
        ScalarKind::Function { arity } => node("function", vec![Nameless::Nat(arity as u64)]),
    }
}

fn stream_mode(m: StreamMode) -> Nameless {
    Nameless::Name(Ident::new(match m {
        StreamMode::KeepAsStream => "keep",
        StreamMode::ViewAsFunction => "view",
    }))
}

/// Parameters count as binders; the definition name stays a name.
impl ToNameless for SurfaceDef {
    fn nameless_in(&self, _scope: &mut Vec<Ident>) -> Nameless {
        let mut sig = vec![Nameless::Name(self.name.clone())];
        sig.extend(self.scalar_params.iter().map(|p| scalar_kind(p.kind)));
        sig.extend(self.stream_params.iter().map(|p| stream_mode(p.mode)));
        let params: Vec<&Ident> = self.param_names().collect();
        let mut s = Scope::default();
        let body = s.with(&params, |s| stream(&self.body, s));
        node("def", vec![node("sig", sig), body])
    }
}

impl ToNameless for IndexDef {
    fn nameless_in(&self, _scope: &mut Vec<Ident>) -> Nameless {
        let mut sig = vec![Nameless::Name(self.name.clone())];
        sig.extend(self.scalar_params.iter().map(|p| scalar_kind(p.kind)));
        sig.extend(self.stream_params.iter().map(|p| stream_mode(p.mode)));
        let mut params: Vec<&Ident> = self.param_names().collect();
        params.push(&self.index_param);
        let mut s = Scope::default();
        let body = s.with(&params, |s| index(&self.body, s));
        node("idef", vec![node("sig", sig), body])
    }
}
