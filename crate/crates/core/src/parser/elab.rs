//! Elaboration: raw items to definitions, derived definitions and lemmas.
//!
//! Parameter kinds are inferred. `~s` and `~fun s` mark stream parameters;
//! other parameters become scalars or functions depending on how they are
//! used, in the body and at call sites, iterated to a fixpoint. Parameters
//! whose kind nothing constrains default to plain values.

use indexmap::IndexMap;

use super::raw::{Annot, Arms, ItemKind, Raw, RawItem};
use crate::ast::{
    CallArg, Combinator, FunBase, FunRef, Ident, IndexDef, IndexExpr, IndexFun, Op, Scalar, ScalarArg,
    ScalarExpr, ScalarKind, ScalarParam, StreamExpr, StreamMode, StreamParam, SurfaceDef,
};
use crate::diag::{DiagCode, Diagnostic, SourceSpan};
use crate::transform::{FormShiftLemma, SlotIndex, Template};

/// Names that cannot be redefined or used as parameters.
pub const RESERVED: &[&str] = &["S", "plus", "times", "tl", "hd"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Unknown,
    Value,
    Fun(usize),
    Stream(StreamMode),
}

/// What a position expects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Want {
    Value,
    Fun(usize),
    Stream,
}

impl Want {
    fn describe(self) -> String {
        match self {
            Want::Value => "a scalar".into(),
            Want::Fun(1) => "a function of one argument".into(),
            Want::Fun(k) => format!("a function of {k} arguments"),
            Want::Stream => "a stream".into(),
        }
    }

    fn of(kind: Kind) -> Option<Want> {
        match kind {
            Kind::Unknown => None,
            Kind::Value => Some(Want::Value),
            Kind::Fun(k) => Some(Want::Fun(k)),
            Kind::Stream(_) => Some(Want::Stream),
        }
    }
}

#[derive(Clone, Debug)]
struct ParamSig {
    name: String,
    span: SourceSpan,
    kind: Kind,
}

#[derive(Clone, Debug)]
struct DefSig {
    name_span: SourceSpan,
    params: Vec<ParamSig>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Local {
    Scalar,
    Stream,
}

enum Resolved {
    Local(Local),
    Param(usize),
    Def,
    Combinator(Combinator),
    Op(Op),
    Tl,
    Hd,
    Unbound,
}

fn builtin_op(name: &str) -> Option<Op> {
    match name {
        "S" => Some(Op::Succ),
        "plus" => Some(Op::Plus),
        "times" => Some(Op::Times),
        _ => None,
    }
}

/// `App(App(h, a), b)` → `App(h, a ++ b)`.
fn flatten(r: &Raw) -> (&Raw, Vec<&Raw>) {
    match r {
        Raw::App(h, args, _) => {
            let (head, mut pre) = flatten(h);
            pre.extend(args.iter());
            (head, pre)
        }
        other => (other, Vec::new()),
    }
}

fn raw_text(r: &Raw) -> String {
    match r {
        Raw::Int(v, _) => v.to_string(),
        Raw::Name(s, _) => s.clone(),
        Raw::App(h, args, _) => {
            let mut s = raw_text(h);
            for a in args {
                s.push(' ');
                s.push_str(&raw_atom_text(a));
            }
            s
        }
        Raw::Cons(h, t, _) => format!("{} :: {}", raw_text(h), raw_text(t)),
        Raw::Bin(op, a, b, _) => {
            let sym = if *op == Op::Plus { "+" } else { "*" };
            format!("{} {sym} {}", raw_atom_text(a), raw_atom_text(b))
        }
        Raw::Section(op, arg, _) => {
            let sym = if *op == Op::Plus { "+" } else { "*" };
            match arg {
                Some(a) => format!("({sym} {})", raw_text(a)),
                None => format!("({sym})"),
            }
        }
        Raw::Shift(e, k, _) => format!("({} >> {k})", raw_text(e)),
        Raw::Match(..) => "match … end".into(),
    }
}

fn raw_atom_text(r: &Raw) -> String {
    match r {
        Raw::Int(..) | Raw::Name(..) | Raw::Section(..) | Raw::Shift(..) | Raw::Match(..) => raw_text(r),
        _ => format!("({})", raw_text(r)),
    }
}

struct Elab<'a> {
    sigs: &'a mut IndexMap<String, DefSig>,
    current: String,
    locals: Vec<(String, Local)>,
    diags: Vec<Diagnostic>,
    /// Inference pass: record kinds, report nothing.
    infer: bool,
    changed: bool,
}

impl Elab<'_> {
    fn err<T>(&mut self, code: DiagCode, span: &SourceSpan, msg: impl Into<String>) -> Option<T> {
        if !self.infer {
            self.diags.push(Diagnostic::error(code, span.clone(), msg));
        }
        None
    }

    fn params(&self) -> &[ParamSig] {
        &self.sigs[&self.current].params
    }

    fn resolve(&self, name: &str) -> Resolved {
        if let Some((_, l)) = self.locals.iter().rev().find(|(n, _)| n == name) {
            return Resolved::Local(*l);
        }
        if let Some(i) = self.params().iter().position(|p| p.name == name) {
            return Resolved::Param(i);
        }
        if self.sigs.contains_key(name) {
            return Resolved::Def;
        }
        if let Some(op) = builtin_op(name) {
            return Resolved::Op(op);
        }
        match name {
            "tl" => return Resolved::Tl,
            "hd" => return Resolved::Hd,
            _ => {}
        }
        match Combinator::from_name(name) {
            Some(c) => Resolved::Combinator(c),
            None => Resolved::Unbound,
        }
    }

    fn with_locals<R>(&mut self, binders: &[(&str, Local)], f: impl FnOnce(&mut Self) -> R) -> R {
        let mark = self.locals.len();
        for (n, l) in binders {
            self.locals.push((n.to_string(), *l));
        }
        let r = f(self);
        self.locals.truncate(mark);
        r
    }

    /// Records that parameter `i` of definition `def` is used as `want`.
    fn constrain(&mut self, def: &str, i: usize, want: Want, span: &SourceSpan) -> bool {
        let p = &mut self.sigs.get_mut(def).expect("known definition").params[i];
        let ok = match (p.kind, want) {
            (Kind::Unknown, Want::Value) => {
                p.kind = Kind::Value;
                self.changed = true;
                true
            }
            (Kind::Unknown, Want::Fun(k)) => {
                p.kind = Kind::Fun(k);
                self.changed = true;
                true
            }
            (Kind::Unknown, Want::Stream) => {
                p.kind = Kind::Stream(StreamMode::KeepAsStream);
                self.changed = true;
                true
            }
            (Kind::Value, Want::Value) | (Kind::Stream(_), Want::Stream) => true,
            (Kind::Fun(a), Want::Fun(b)) => a == b,
            _ => false,
        };
        if !ok {
            let (name, kind) = (p.name.clone(), p.kind);
            let had = Want::of(kind).map(Want::describe).unwrap_or_default();
            self.err::<()>(
                DiagCode::Parse,
                span,
                format!("parameter `{name}` is used as {} but elsewhere as {had}", want.describe()),
            );
        }
        ok
    }

    /// The sort of `r` when evident without context.
    fn synth(&self, r: &Raw) -> Option<Want> {
        match r {
            Raw::Int(..) | Raw::Bin(..) => Some(Want::Value),
            Raw::Cons(..) | Raw::Match(..) => Some(Want::Stream),
            Raw::Section(_, None, _) => Some(Want::Fun(2)),
            Raw::Section(_, Some(_), _) => Some(Want::Fun(1)),
            Raw::Shift(..) => None,
            Raw::Name(n, _) => match self.resolve(n) {
                Resolved::Local(Local::Scalar) => Some(Want::Value),
                Resolved::Local(Local::Stream) => Some(Want::Stream),
                Resolved::Param(i) => Want::of(self.params()[i].kind),
                Resolved::Def => Some(Want::Stream),
                Resolved::Op(op) => Some(Want::Fun(op.arity())),
                _ => None,
            },
            Raw::App(..) => {
                let (head, args) = flatten(r);
                match head {
                    Raw::Name(n, _) => match self.resolve(n) {
                        Resolved::Def | Resolved::Combinator(_) | Resolved::Tl => Some(Want::Stream),
                        Resolved::Hd => Some(Want::Value),
                        Resolved::Op(op) if args.len() < op.arity() => Some(Want::Fun(op.arity() - args.len())),
                        Resolved::Op(_) => Some(Want::Value),
                        Resolved::Param(i) => match self.params()[i].kind {
                            Kind::Fun(_) => Some(Want::Value),
                            _ => None,
                        },
                        _ => None,
                    },
                    Raw::Section(..) => Some(Want::Value),
                    _ => None,
                }
            }
        }
    }

    // -- surface expressions ------------------------------------------------

    fn stream(&mut self, r: &Raw) -> Option<StreamExpr> {
        match r {
            Raw::Cons(h, t, _) => {
                let h = self.scalar(h);
                let t = self.stream(t);
                Some(StreamExpr::Cons(Box::new(h?), Box::new(t?)))
            }
            Raw::Name(n, span) => match self.resolve(n) {
                Resolved::Local(Local::Stream) => Some(StreamExpr::Var(Ident::new(n))),
                Resolved::Param(i) => {
                    let cur = self.current.clone();
                    self.constrain(&cur, i, Want::Stream, span).then(|| StreamExpr::Var(Ident::new(n)))
                }
                Resolved::Def => self.call(n, &[], span),
                Resolved::Combinator(c) => self.interfere(c, &[], span),
                Resolved::Unbound => self.err(DiagCode::Unbound, span, format!("unknown name `{n}`")),
                _ => self.err(DiagCode::Parse, span, format!("`{n}` is not a stream")),
            },
            Raw::App(_, _, span) => {
                let (head, args) = flatten(r);
                let Raw::Name(n, hspan) = head else {
                    return self.err(DiagCode::Parse, span, "expected a stream");
                };
                match self.resolve(n) {
                    Resolved::Def => self.call(n, &args, span),
                    Resolved::Combinator(c) => self.interfere(c, &args, span),
                    Resolved::Tl => {
                        if args.len() != 1 {
                            return self.err(
                                DiagCode::Arity,
                                span,
                                format!("`tl` takes 1 argument, got {}", args.len()),
                            );
                        }
                        Some(StreamExpr::Tail(Box::new(self.stream(args[0])?)))
                    }
                    Resolved::Unbound => self.err(DiagCode::Unbound, hspan, format!("unknown name `{n}`")),
                    _ => self.err(DiagCode::Parse, span, format!("`{n} …` is not a stream")),
                }
            }
            Raw::Match(scr, arms, span) => match arms {
                Arms::Stream { head, tail, body } => {
                    let scr = self.stream(scr);
                    if head.0 == tail.0 {
                        return self.err(DiagCode::Dup, &tail.1, format!("binder `{}` bound twice", tail.0));
                    }
                    let body = self.with_locals(&[(&head.0, Local::Scalar), (&tail.0, Local::Stream)], |e| {
                        e.stream(body)
                    });
                    Some(StreamExpr::Match {
                        scrutinee: Box::new(scr?),
                        head: Ident::new(&head.0),
                        tail: Ident::new(&tail.0),
                        body: Box::new(body?),
                    })
                }
                Arms::Index { .. } => self.err(
                    DiagCode::Parse,
                    span,
                    "index matches are only allowed in derived definitions",
                ),
            },
            Raw::Shift(_, _, span) => self.err(DiagCode::Parse, span, "`>>` is only allowed in derived definitions"),
            other => self.err(DiagCode::Parse, other.span(), "expected a stream, found a scalar expression"),
        }
    }

    fn call(&mut self, name: &str, args: &[&Raw], span: &SourceSpan) -> Option<StreamExpr> {
        let params = self.sigs[name].params.clone();
        if params.len() != args.len() {
            return self.err(
                DiagCode::Arity,
                span,
                format!("`{name}` takes {} argument(s), got {}", params.len(), args.len()),
            );
        }
        let mut scalar_args = Vec::new();
        let mut stream_args = Vec::new();
        let mut ok = true;
        for (i, (p, a)) in params.iter().zip(args).enumerate() {
            let want = match Want::of(p.kind) {
                Some(w) => w,
                None => match self.synth(a) {
                    Some(w) => {
                        self.constrain(name, i, w, a.span());
                        w
                    }
                    None => {
                        ok = false;
                        continue;
                    }
                },
            };
            match want {
                Want::Value => match self.scalar(a) {
                    Some(e) => scalar_args.push(ScalarArg::Value(e)),
                    None => ok = false,
                },
                Want::Fun(k) => match self.fun(a, k) {
                    Some(f) => scalar_args.push(ScalarArg::Fun(f)),
                    None => ok = false,
                },
                Want::Stream => match self.stream(a) {
                    Some(s) => stream_args.push(s),
                    None => ok = false,
                },
            }
        }
        ok.then(|| StreamExpr::Call {
            name: Ident::new(name),
            scalar_args,
            stream_args,
            span: span.clone(),
        })
    }

    fn interfere(&mut self, c: Combinator, args: &[&Raw], span: &SourceSpan) -> Option<StreamExpr> {
        let kinds = c.scalar_kinds();
        let total = kinds.len() + c.stream_arity();
        if args.len() != total {
            return self.err(
                DiagCode::Arity,
                span,
                format!("`{}` takes {total} argument(s), got {}", c.name(), args.len()),
            );
        }
        let mut scalar_args = Vec::new();
        let mut stream_args = Vec::new();
        let mut ok = true;
        for (i, a) in args.iter().enumerate() {
            if let Some(kind) = kinds.get(i) {
                let r = match kind {
                    ScalarKind::Function { arity } => self.fun(a, *arity).map(ScalarArg::Fun),
                    ScalarKind::Value => self.scalar(a).map(ScalarArg::Value),
                };
                match r {
                    Some(x) => scalar_args.push(x),
                    None => ok = false,
                }
            } else {
                match self.stream(a) {
                    Some(s) => stream_args.push(s),
                    None => ok = false,
                }
            }
        }
        ok.then(|| StreamExpr::Interfere {
            fun: Ident::new(c.name()),
            scalar_args,
            stream_args,
        })
    }

    fn scalar(&mut self, r: &Raw) -> Option<ScalarExpr> {
        match r {
            Raw::Int(v, _) => Some(ScalarExpr::Lit(Scalar(v.clone()))),
            Raw::Name(n, span) => match self.resolve(n) {
                Resolved::Local(Local::Scalar) => Some(ScalarExpr::Var(Ident::new(n))),
                Resolved::Param(i) => {
                    let cur = self.current.clone();
                    self.constrain(&cur, i, Want::Value, span).then(|| ScalarExpr::Var(Ident::new(n)))
                }
                Resolved::Unbound => self.err(DiagCode::Unbound, span, format!("unknown name `{n}`")),
                _ => self.err(DiagCode::Parse, span, format!("`{n}` is not a scalar")),
            },
            Raw::Bin(op, a, b, _) => {
                let a = self.scalar(a);
                let b = self.scalar(b);
                Some(ScalarExpr::Builtin(*op, vec![a?, b?]))
            }
            Raw::App(_, _, span) => {
                let (head, args) = flatten(r);
                match head {
                    Raw::Section(op, cap, _) => {
                        let mut all: Vec<&Raw> = cap.iter().map(|c| &**c).collect();
                        all.extend(args.iter().copied());
                        self.saturated(*op, &all, span)
                    }
                    Raw::Name(n, hspan) => match self.resolve(n) {
                        Resolved::Op(op) => self.saturated(op, &args, span),
                        Resolved::Hd => {
                            if args.len() != 1 {
                                return self.err(
                                    DiagCode::Arity,
                                    span,
                                    format!("`hd` takes 1 argument, got {}", args.len()),
                                );
                            }
                            Some(ScalarExpr::Head(Box::new(self.stream(args[0])?)))
                        }
                        Resolved::Param(i) => {
                            let cur = self.current.clone();
                            if !self.constrain(&cur, i, Want::Fun(args.len()), hspan) {
                                return None;
                            }
                            let vals: Vec<Option<ScalarExpr>> = args.iter().map(|a| self.scalar(a)).collect();
                            Some(ScalarExpr::Apply(Ident::new(n), vals.into_iter().collect::<Option<_>>()?))
                        }
                        Resolved::Unbound => self.err(DiagCode::Unbound, hspan, format!("unknown name `{n}`")),
                        _ => self.err(DiagCode::Parse, span, format!("`{n} …` is not a scalar")),
                    },
                    _ => self.err(DiagCode::Parse, span, "expected a scalar"),
                }
            }
            Raw::Match(_, _, span) => self.err(DiagCode::Parse, span, "a match cannot produce a scalar here"),
            other => self.err(DiagCode::Parse, other.span(), "expected a scalar"),
        }
    }

    fn saturated(&mut self, op: Op, args: &[&Raw], span: &SourceSpan) -> Option<ScalarExpr> {
        if args.len() != op.arity() {
            return self.err(
                DiagCode::Arity,
                span,
                format!("`{}` takes {} argument(s), got {}", op.name(), op.arity(), args.len()),
            );
        }
        let vals: Vec<Option<ScalarExpr>> = args.iter().map(|a| self.scalar(a)).collect();
        Some(ScalarExpr::Builtin(op, vals.into_iter().collect::<Option<_>>()?))
    }

    fn fun(&mut self, r: &Raw, arity: usize) -> Option<FunRef<ScalarExpr>> {
        let mismatch = |e: &mut Self, got: usize, span: &SourceSpan| {
            e.err::<FunRef<ScalarExpr>>(
                DiagCode::Arity,
                span,
                format!("expected {}, found a function of {got} argument(s)", Want::Fun(arity).describe()),
            )
        };
        match r {
            Raw::Section(op, cap, span) => {
                let captured: Vec<ScalarExpr> = match cap {
                    Some(c) => vec![self.scalar(c)?],
                    None => vec![],
                };
                if op.arity() - captured.len() != arity {
                    return mismatch(self, op.arity() - captured.len(), span);
                }
                Some(FunRef::Builtin { op: *op, captured })
            }
            Raw::Name(n, span) => match self.resolve(n) {
                Resolved::Op(op) if op.arity() == arity => Some(FunRef::builtin(op)),
                Resolved::Op(op) => mismatch(self, op.arity(), span),
                Resolved::Param(i) => {
                    let cur = self.current.clone();
                    self.constrain(&cur, i, Want::Fun(arity), span)
                        .then(|| FunRef::Param(Ident::new(n)))
                }
                Resolved::Unbound => self.err(DiagCode::Unbound, span, format!("unknown name `{n}`")),
                _ => self.err(DiagCode::Parse, span, format!("`{n}` is not a function")),
            },
            Raw::App(_, _, span) => {
                let (head, args) = flatten(r);
                match head {
                    Raw::Name(n, _) => match self.resolve(n) {
                        Resolved::Op(op) if args.len() < op.arity() => {
                            if op.arity() - args.len() != arity {
                                return mismatch(self, op.arity() - args.len(), span);
                            }
                            let vals: Vec<Option<ScalarExpr>> = args.iter().map(|a| self.scalar(a)).collect();
                            Some(FunRef::Builtin {
                                op,
                                captured: vals.into_iter().collect::<Option<_>>()?,
                            })
                        }
                        _ => self.err(DiagCode::Parse, span, format!("expected {}", Want::Fun(arity).describe())),
                    },
                    _ => self.err(DiagCode::Parse, span, format!("expected {}", Want::Fun(arity).describe())),
                }
            }
            other => self.err(DiagCode::Parse, other.span(), format!("expected {}", Want::Fun(arity).describe())),
        }
    }
}

// ---------------------------------------------------------------------------
// Derived definitions

struct IndexElab<'a> {
    sigs: &'a IndexMap<String, DefSig>,
    /// Parameter names of the derived item, with kinds from the surface definition.
    params: Vec<(String, Kind)>,
    index_param: String,
    locals: Vec<(String, Local)>,
    diags: Vec<Diagnostic>,
}

enum IResolved {
    Local(Local),
    Index,
    Param(Kind),
    Def(String),
    Combinator(Combinator),
    Op(Op),
    Tl,
    Hd,
    Unbound,
}

impl IndexElab<'_> {
    fn err<T>(&mut self, code: DiagCode, span: &SourceSpan, msg: impl Into<String>) -> Option<T> {
        self.diags.push(Diagnostic::error(code, span.clone(), msg));
        None
    }

    fn resolve(&self, name: &str) -> IResolved {
        if let Some((_, l)) = self.locals.iter().rev().find(|(n, _)| n == name) {
            return IResolved::Local(*l);
        }
        if name == self.index_param {
            return IResolved::Index;
        }
        if let Some((_, k)) = self.params.iter().find(|(n, _)| n == name) {
            return IResolved::Param(*k);
        }
        if self.sigs.contains_key(name) {
            return IResolved::Def(name.to_string());
        }
        if let Some(op) = builtin_op(name) {
            return IResolved::Op(op);
        }
        match name {
            "tl" => return IResolved::Tl,
            "hd" => return IResolved::Hd,
            _ => {}
        }
        match Combinator::from_name(name) {
            Some(c) => IResolved::Combinator(c),
            None => IResolved::Unbound,
        }
    }

    fn with_locals<R>(&mut self, binders: &[(&str, Local)], f: impl FnOnce(&mut Self) -> R) -> R {
        let mark = self.locals.len();
        for (n, l) in binders {
            self.locals.push((n.to_string(), *l));
        }
        let r = f(self);
        self.locals.truncate(mark);
        r
    }

    fn scalar(&mut self, r: &Raw) -> Option<IndexExpr> {
        match r {
            Raw::Int(v, _) => Some(IndexExpr::Lit(Scalar(v.clone()))),
            Raw::Name(n, span) => match self.resolve(n) {
                IResolved::Local(Local::Scalar) | IResolved::Index | IResolved::Param(Kind::Value) => {
                    Some(IndexExpr::Var(Ident::new(n)))
                }
                IResolved::Def(d) if self.sigs[&d].params.is_empty() => {
                    self.err(DiagCode::Arity, span, format!("`{n}` needs an index argument"))
                }
                IResolved::Unbound => self.err(DiagCode::Unbound, span, format!("unknown name `{n}`")),
                _ => self.err(DiagCode::Parse, span, format!("`{n}` is not a scalar")),
            },
            Raw::Bin(op, a, b, _) => {
                let a = self.scalar(a);
                let b = self.scalar(b);
                Some(IndexExpr::Builtin(*op, vec![a?, b?]))
            }
            Raw::Match(scr, arms, _) => match arms {
                Arms::Index { zero, pred, succ } => {
                    let scr = self.scalar(scr);
                    let zero = self.scalar(zero);
                    let succ = self.with_locals(&[(&pred.0, Local::Scalar)], |e| e.scalar(succ));
                    Some(IndexExpr::MatchIndex {
                        scrutinee: Box::new(scr?),
                        zero: Box::new(zero?),
                        pred: Ident::new(&pred.0),
                        succ: Box::new(succ?),
                    })
                }
                Arms::Stream { head, tail, body } => {
                    let scr = self.stream(scr);
                    if head.0 == tail.0 {
                        return self.err(DiagCode::Dup, &tail.1, format!("binder `{}` bound twice", tail.0));
                    }
                    let body = self.with_locals(&[(&head.0, Local::Scalar), (&tail.0, Local::Stream)], |e| {
                        e.scalar(body)
                    });
                    Some(IndexExpr::MatchStream {
                        scrutinee: Box::new(scr?),
                        head: Ident::new(&head.0),
                        tail: Ident::new(&tail.0),
                        body: Box::new(body?),
                    })
                }
            },
            Raw::App(_, _, span) => {
                let (head, args) = flatten(r);
                match head {
                    Raw::Section(op, cap, _) => {
                        let mut all: Vec<&Raw> = cap.iter().map(|c| &**c).collect();
                        all.extend(args.iter().copied());
                        self.saturated(*op, &all, span)
                    }
                    Raw::Name(n, hspan) => match self.resolve(n) {
                        IResolved::Op(op) => self.saturated(op, &args, span),
                        IResolved::Hd if args.len() == 1 => {
                            Some(IndexExpr::Head(Box::new(self.stream(args[0])?)))
                        }
                        IResolved::Param(Kind::Fun(k)) if k == args.len() => {
                            let vals: Vec<Option<IndexExpr>> = args.iter().map(|a| self.scalar(a)).collect();
                            Some(IndexExpr::Apply(
                                FunRef::Param(Ident::new(n)),
                                vals.into_iter().collect::<Option<_>>()?,
                            ))
                        }
                        IResolved::Param(Kind::Stream(StreamMode::ViewAsFunction)) if args.len() == 1 => {
                            Some(IndexExpr::ParamApp {
                                param: Ident::new(n),
                                index: Box::new(self.scalar(args[0])?),
                            })
                        }
                        IResolved::Def(d) => {
                            let arity = self.sigs[&d].params.len();
                            if args.len() != arity + 1 {
                                return self.err(
                                    DiagCode::Arity,
                                    span,
                                    format!("`{d}` takes {} argument(s) including the index, got {}", arity + 1, args.len()),
                                );
                            }
                            let call_args = self.call_args(&d, &args[..arity]);
                            let index = self.scalar(args[arity]);
                            Some(IndexExpr::RecCall {
                                name: Ident::new(&d),
                                args: call_args?,
                                index: Box::new(index?),
                            })
                        }
                        IResolved::Unbound => self.err(DiagCode::Unbound, hspan, format!("unknown name `{n}`")),
                        _ => self.err(DiagCode::Parse, span, format!("`{n} …` is not a scalar")),
                    },
                    _ => self.err(DiagCode::Parse, span, "expected a scalar"),
                }
            }
            other => self.err(DiagCode::Parse, other.span(), "expected a scalar"),
        }
    }

    fn saturated(&mut self, op: Op, args: &[&Raw], span: &SourceSpan) -> Option<IndexExpr> {
        if args.len() != op.arity() {
            return self.err(
                DiagCode::Arity,
                span,
                format!("`{}` takes {} argument(s), got {}", op.name(), op.arity(), args.len()),
            );
        }
        let vals: Vec<Option<IndexExpr>> = args.iter().map(|a| self.scalar(a)).collect();
        Some(IndexExpr::Builtin(op, vals.into_iter().collect::<Option<_>>()?))
    }

    fn call_args(&mut self, def: &str, args: &[&Raw]) -> Option<Vec<CallArg>> {
        let kinds: Vec<Kind> = self.sigs[def].params.iter().map(|p| p.kind).collect();
        let out: Vec<Option<CallArg>> = kinds
            .iter()
            .zip(args)
            .map(|(k, a)| match k {
                Kind::Value | Kind::Unknown => self.scalar(a).map(CallArg::Scalar),
                Kind::Fun(n) => self.fun(a, *n).map(CallArg::Fun),
                Kind::Stream(StreamMode::KeepAsStream) => self.stream(a).map(CallArg::Stream),
                Kind::Stream(StreamMode::ViewAsFunction) => self.indexed(a).map(CallArg::Indexed),
            })
            .collect();
        out.into_iter().collect()
    }

    fn stream(&mut self, r: &Raw) -> Option<IndexExpr> {
        match r {
            Raw::Name(n, span) => match self.resolve(n) {
                IResolved::Local(Local::Stream) | IResolved::Param(Kind::Stream(StreamMode::KeepAsStream)) => {
                    Some(IndexExpr::StreamVar(Ident::new(n)))
                }
                IResolved::Unbound => self.err(DiagCode::Unbound, span, format!("unknown name `{n}`")),
                _ => self.err(DiagCode::Parse, span, format!("`{n}` is not a stream here")),
            },
            Raw::Cons(h, t, _) => {
                let h = self.scalar(h);
                let t = self.stream(t);
                Some(IndexExpr::Cons(Box::new(h?), Box::new(t?)))
            }
            Raw::App(_, _, span) => {
                let (head, args) = flatten(r);
                let Raw::Name(n, _) = head else {
                    return self.err(DiagCode::Parse, span, "expected a stream");
                };
                match self.resolve(n) {
                    IResolved::Tl if args.len() == 1 => Some(IndexExpr::Tail(Box::new(self.stream(args[0])?))),
                    IResolved::Combinator(c) => {
                        let kinds = c.scalar_kinds();
                        if args.len() != kinds.len() + c.stream_arity() {
                            return self.err(DiagCode::Arity, span, format!("wrong number of arguments for `{n}`"));
                        }
                        let mut scalar_args = Vec::new();
                        for (k, a) in kinds.iter().zip(&args) {
                            scalar_args.push(match k {
                                ScalarKind::Function { arity } => CallArg::Fun(self.fun(a, *arity)?),
                                ScalarKind::Value => CallArg::Scalar(self.scalar(a)?),
                            });
                        }
                        let streams: Vec<Option<IndexExpr>> =
                            args[kinds.len()..].iter().map(|a| self.stream(a)).collect();
                        Some(IndexExpr::Interfere {
                            fun: Ident::new(n),
                            scalar_args,
                            stream_args: streams.into_iter().collect::<Option<_>>()?,
                        })
                    }
                    _ => self.err(DiagCode::Parse, span, "expected a stream"),
                }
            }
            other => self.err(DiagCode::Parse, other.span(), "expected a stream"),
        }
    }

    /// Argument for a view-as-function parameter.
    fn indexed(&mut self, r: &Raw) -> Option<IndexFun> {
        let (inner, shift) = match r {
            Raw::Shift(e, k, _) => (&**e, *k),
            other => (other, 0),
        };
        match inner {
            Raw::Name(n, _) if matches!(self.resolve(n), IResolved::Param(Kind::Stream(StreamMode::ViewAsFunction))) => {
                Some(IndexFun::param(Ident::new(n)).shifted(shift))
            }
            Raw::Name(n, _) if matches!(self.resolve(n), IResolved::Def(_)) && self.sigs[n].params.is_empty() => {
                Some(IndexFun::rec(Ident::new(n), vec![]).shifted(shift))
            }
            Raw::App(..) => {
                let (head, args) = flatten(inner);
                if let Raw::Name(n, _) = head {
                    if let IResolved::Def(d) = self.resolve(n) {
                        if self.sigs[&d].params.len() == args.len() {
                            let call_args = self.call_args(&d, &args)?;
                            return Some(IndexFun::Shifted {
                                base: FunBase::Rec {
                                    name: Ident::new(&d),
                                    args: call_args,
                                },
                                shift,
                            });
                        }
                    }
                }
                Some(IndexFun::View(Box::new(self.stream(inner)?)).shifted(shift))
            }
            _ => Some(IndexFun::View(Box::new(self.stream(inner)?)).shifted(shift)),
        }
    }

    fn fun(&mut self, r: &Raw, arity: usize) -> Option<FunRef<IndexExpr>> {
        let bad = |e: &mut Self, span: &SourceSpan| {
            e.err::<FunRef<IndexExpr>>(DiagCode::Parse, span, format!("expected {}", Want::Fun(arity).describe()))
        };
        match r {
            Raw::Section(op, cap, span) => {
                let captured: Vec<IndexExpr> = match cap {
                    Some(c) => vec![self.scalar(c)?],
                    None => vec![],
                };
                if op.arity() - captured.len() != arity {
                    return bad(self, span);
                }
                Some(FunRef::Builtin { op: *op, captured })
            }
            Raw::Name(n, span) => match self.resolve(n) {
                IResolved::Op(op) if op.arity() == arity => Some(FunRef::builtin(op)),
                IResolved::Param(Kind::Fun(k)) if k == arity => Some(FunRef::Param(Ident::new(n))),
                IResolved::Unbound => self.err(DiagCode::Unbound, span, format!("unknown name `{n}`")),
                _ => bad(self, span),
            },
            Raw::App(_, _, span) => {
                let (head, args) = flatten(r);
                match head {
                    Raw::Name(n, _) => match self.resolve(n) {
                        IResolved::Op(op) if args.len() < op.arity() && op.arity() - args.len() == arity => {
                            let vals: Vec<Option<IndexExpr>> = args.iter().map(|a| self.scalar(a)).collect();
                            Some(FunRef::Builtin {
                                op,
                                captured: vals.into_iter().collect::<Option<_>>()?,
                            })
                        }
                        _ => bad(self, span),
                    },
                    _ => bad(self, span),
                }
            }
            other => bad(self, other.span()),
        }
    }
}

// ---------------------------------------------------------------------------
// Lemma contexts

struct LemmaElab<'a> {
    scalars: &'a [String],
    streams: &'a [String],
    index: &'a str,
}

impl LemmaElab<'_> {
    fn offset(&self, r: &Raw) -> Option<u64> {
        match r {
            Raw::Name(n, _) if n == self.index => Some(0),
            Raw::Bin(Op::Plus, a, b, _) => match (&**a, &**b) {
                (x, Raw::Int(k, _)) | (Raw::Int(k, _), x) => Some(self.offset(x)? + u64::try_from(k.clone()).ok()?),
                _ => None,
            },
            Raw::App(h, args, _) if args.len() == 1 && matches!(&**h, Raw::Name(s, _) if s == "S") => {
                Some(self.offset(&args[0])? + 1)
            }
            _ => None,
        }
    }

    fn template(&self, r: &Raw) -> Template {
        match r {
            Raw::Int(v, _) => Template::Lit(Scalar(v.clone())),
            Raw::Name(n, _) => {
                if let Some(i) = self.scalars.iter().position(|s| s == n) {
                    Template::ScalarSlot(i)
                } else if let Some(i) = self.streams.iter().position(|s| s == n) {
                    Template::StreamSlot {
                        slot: i,
                        index: SlotIndex::Other(String::new()),
                    }
                } else if n == self.index {
                    Template::IndexVar
                } else {
                    Template::Free(Ident::new(n))
                }
            }
            Raw::Bin(op, a, b, _) => Template::Builtin(*op, vec![self.template(a), self.template(b)]),
            Raw::App(..) => {
                let (head, args) = flatten(r);
                if let Raw::Name(n, _) = head {
                    if let Some(op) = builtin_op(n) {
                        return Template::Builtin(op, args.iter().map(|a| self.template(a)).collect());
                    }
                    if let Some(i) = self.scalars.iter().position(|s| s == n) {
                        return Template::ApplySlot(i, args.iter().map(|a| self.template(a)).collect());
                    }
                    if let Some(i) = self.streams.iter().position(|s| s == n) {
                        if args.len() == 1 {
                            let index = match self.offset(args[0]) {
                                Some(k) => SlotIndex::Offset(k),
                                None => SlotIndex::Other(raw_text(args[0])),
                            };
                            return Template::StreamSlot { slot: i, index };
                        }
                    }
                }
                Template::Free(Ident::new(&raw_text(r)))
            }
            Raw::Section(op, Some(c), _) => {
                // A section in a lemma context is only meaningful applied; keep it visible.
                Template::Free(Ident::new(&format!("({} {})", op.name(), raw_text(c))))
            }
            other => Template::Free(Ident::new(&raw_text(other))),
        }
    }
}

// ---------------------------------------------------------------------------

pub struct Elaborated {
    pub surface: Vec<SurfaceDef>,
    pub derived: Vec<IndexDef>,
    pub lemmas: Vec<FormShiftLemma>,
}

fn check_params(item: &RawItem, diags: &mut Vec<Diagnostic>) {
    for (i, p) in item.params.iter().enumerate() {
        if RESERVED.contains(&p.name.as_str()) {
            diags.push(Diagnostic::error(
                DiagCode::Dup,
                p.span.clone(),
                format!("`{}` is a builtin and cannot be a parameter", p.name),
            ));
        }
        if item.kind == ItemKind::Def && p.name == item.name {
            diags.push(Diagnostic::error(
                DiagCode::Dup,
                p.span.clone(),
                format!("parameter `{}` has the name of its definition", p.name),
            ));
        }
        if item.params[..i].iter().any(|q| q.name == p.name) {
            diags.push(Diagnostic::error(
                DiagCode::Dup,
                p.span.clone(),
                format!("duplicate parameter `{}`", p.name),
            ));
        }
    }
}

pub fn elaborate(items: &[RawItem]) -> Result<Elaborated, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut sigs: IndexMap<String, DefSig> = IndexMap::new();
    let defs: Vec<&RawItem> = items.iter().filter(|i| i.kind == ItemKind::Def).collect();

    for item in items {
        check_params(item, &mut diags);
    }
    for item in &defs {
        if RESERVED.contains(&item.name.as_str()) {
            diags.push(Diagnostic::error(
                DiagCode::Dup,
                item.name_span.clone(),
                format!("`{}` is a builtin and cannot be redefined", item.name),
            ));
            continue;
        }
        if let Some(prev) = sigs.get(&item.name) {
            diags.push(Diagnostic::error(
                DiagCode::Dup,
                item.name_span.clone(),
                format!("`{}` is already defined at {}", item.name, prev.name_span),
            ));
            continue;
        }
        let params = item
            .params
            .iter()
            .map(|p| ParamSig {
                name: p.name.clone(),
                span: p.span.clone(),
                kind: match p.annot {
                    Annot::None => Kind::Unknown,
                    Annot::Stream => Kind::Stream(StreamMode::KeepAsStream),
                    Annot::View => Kind::Stream(StreamMode::ViewAsFunction),
                },
            })
            .collect();
        sigs.insert(
            item.name.clone(),
            DefSig {
                name_span: item.name_span.clone(),
                params,
            },
        );
    }
    if !diags.is_empty() {
        return Err(diags);
    }

    // Kind inference to a fixpoint; each round can only refine Unknown kinds.
    let rounds = sigs.values().map(|s| s.params.len()).sum::<usize>() + 2;
    for _ in 0..rounds {
        let mut changed = false;
        for item in &defs {
            let mut e = Elab {
                sigs: &mut sigs,
                current: item.name.clone(),
                locals: Vec::new(),
                diags: Vec::new(),
                infer: true,
                changed: false,
            };
            e.stream(&item.body);
            changed |= e.changed;
        }
        if !changed {
            break;
        }
    }
    for sig in sigs.values_mut() {
        for p in &mut sig.params {
            if p.kind == Kind::Unknown {
                p.kind = Kind::Value;
            }
        }
    }
    for sig in sigs.values() {
        let mut seen_stream = false;
        for p in &sig.params {
            match p.kind {
                Kind::Stream(_) => seen_stream = true,
                _ if seen_stream => diags.push(Diagnostic::error(
                    DiagCode::Parse,
                    p.span.clone(),
                    format!("scalar parameter `{}` must come before the stream parameters", p.name),
                )),
                _ => {}
            }
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }

    let mut surface = Vec::new();
    for item in &defs {
        let mut e = Elab {
            sigs: &mut sigs,
            current: item.name.clone(),
            locals: Vec::new(),
            diags: Vec::new(),
            infer: false,
            changed: false,
        };
        let body = e.stream(&item.body);
        diags.append(&mut e.diags);
        let Some(body) = body else { continue };
        let sig = &sigs[&item.name];
        let mut scalar_params = Vec::new();
        let mut stream_params = Vec::new();
        for p in &sig.params {
            let name = Ident::new(&p.name);
            match p.kind {
                Kind::Stream(mode) => stream_params.push(StreamParam { name, mode }),
                Kind::Fun(arity) => scalar_params.push(ScalarParam {
                    name,
                    kind: ScalarKind::Function { arity },
                }),
                Kind::Value | Kind::Unknown => scalar_params.push(ScalarParam {
                    name,
                    kind: ScalarKind::Value,
                }),
            }
        }
        surface.push(SurfaceDef {
            name: Ident::new(&item.name),
            scalar_params,
            stream_params,
            body,
            span: item.span.clone(),
        });
    }

    let mut derived: Vec<IndexDef> = Vec::new();
    let mut lemmas: Vec<FormShiftLemma> = Vec::new();
    for item in items {
        match item.kind {
            ItemKind::Def => {}
            ItemKind::Derived => {
                let Some(sig) = sigs.get(&item.name) else {
                    diags.push(Diagnostic::error(
                        DiagCode::Unbound,
                        item.name_span.clone(),
                        format!("derived definition for unknown `{}`", item.name),
                    ));
                    continue;
                };
                if item.params.len() != sig.params.len() + 1 {
                    diags.push(Diagnostic::error(
                        DiagCode::Arity,
                        item.name_span.clone(),
                        format!(
                            "derived `{}` needs {} parameter(s) plus an index, got {}",
                            item.name,
                            sig.params.len(),
                            item.params.len()
                        ),
                    ));
                    continue;
                }
                if derived.iter().any(|d| d.name.as_str() == item.name) {
                    diags.push(Diagnostic::error(
                        DiagCode::Dup,
                        item.name_span.clone(),
                        format!("`{}` already has a derived definition", item.name),
                    ));
                    continue;
                }
                let n = item.params.len() - 1;
                let params: Vec<(String, Kind)> = item.params[..n]
                    .iter()
                    .zip(&sig.params)
                    .map(|(p, s)| (p.name.clone(), s.kind))
                    .collect();
                let mut e = IndexElab {
                    sigs: &sigs,
                    params: params.clone(),
                    index_param: item.params[n].name.clone(),
                    locals: Vec::new(),
                    diags: Vec::new(),
                };
                let body = e.scalar(&item.body);
                diags.append(&mut e.diags);
                let Some(body) = body else { continue };
                let mut scalar_params = Vec::new();
                let mut stream_params = Vec::new();
                for (name, kind) in params {
                    let name = Ident::new(&name);
                    match kind {
                        Kind::Stream(mode) => stream_params.push(StreamParam { name, mode }),
                        Kind::Fun(arity) => scalar_params.push(ScalarParam {
                            name,
                            kind: ScalarKind::Function { arity },
                        }),
                        _ => scalar_params.push(ScalarParam {
                            name,
                            kind: ScalarKind::Value,
                        }),
                    }
                }
                derived.push(IndexDef {
                    name: Ident::new(&item.name),
                    scalar_params,
                    stream_params,
                    index_param: Ident::new(&item.params[n].name),
                    body,
                });
            }
            ItemKind::Lemma => {
                let Some((index, slots)) = item.params.split_last() else {
                    diags.push(Diagnostic::error(
                        DiagCode::Parse,
                        item.name_span.clone(),
                        "a lemma needs at least an index parameter",
                    ));
                    continue;
                };
                let scalars: Vec<String> =
                    slots.iter().filter(|p| p.annot == Annot::None).map(|p| p.name.clone()).collect();
                let streams: Vec<String> =
                    slots.iter().filter(|p| p.annot != Annot::None).map(|p| p.name.clone()).collect();
                if lemmas.iter().any(|l| l.fn_name.as_str() == item.name) {
                    diags.push(Diagnostic::error(
                        DiagCode::Dup,
                        item.name_span.clone(),
                        format!("a lemma for `{}` is already declared", item.name),
                    ));
                    continue;
                }
                let le = LemmaElab {
                    scalars: &scalars,
                    streams: &streams,
                    index: &index.name,
                };
                lemmas.push(FormShiftLemma {
                    fn_name: Ident::new(&item.name),
                    scalar_params: scalars.iter().map(|s| Ident::new(s)).collect(),
                    stream_params: streams.iter().map(|s| Ident::new(s)).collect(),
                    index_param: Ident::new(&index.name),
                    context: le.template(&item.body),
                });
            }
        }
    }

    if diags.is_empty() {
        Ok(Elaborated {
            surface,
            derived,
            lemmas,
        })
    } else {
        Err(diags)
    }
}
