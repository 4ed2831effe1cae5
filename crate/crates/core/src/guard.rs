//! Guardedness classification of surface equations.
//!
//! A corecursive call is guarded when it sits directly under at least one
//! constructor and nothing else: not under `tl`, not inside a match scrutinee,
//! not as an argument of any function. Offending calls are classified:
//!
//! * `**`: wrapped by an interfering function that is itself under a constructor
//!   (`1 :: map S nats`), the shape form-shifting lemmas handle;
//! * `*`: everything else (`tl`, a match scrutinee, no constructor above).
//!
//! The body of a match inherits the position of the match itself.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::ast::{Environment, FunRef, Ident, ScalarArg, ScalarExpr, StreamExpr, SurfaceDef};
use crate::diag::SourceSpan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Guardedness {
    Guarded,
    NonGuardedStar,
    NonGuardedStarStar,
}

impl Guardedness {
    pub fn label(self) -> &'static str {
        match self {
            Guardedness::Guarded => "guarded",
            Guardedness::NonGuardedStar => "non-guarded(*)",
            Guardedness::NonGuardedStarStar => "non-guarded(**)",
        }
    }
}

impl fmt::Display for Guardedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for Guardedness {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Offender {
    pub span: SourceSpan,
    /// Context from the root of the body down to the call, e.g. `zipWith > tl > fib`.
    pub call_path: String,
    /// Outermost function wrapping the call, if any.
    pub interferer: Option<Ident>,
    pub class: Guardedness,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GuardReport {
    pub def: Ident,
    pub class: Guardedness,
    pub offenders: Vec<Offender>,
}

/// Definitions whose unfolding can reach `target` (including `target` itself).
pub fn corecursive_names(env: &Environment, target: &Ident) -> BTreeSet<Ident> {
    // Reverse reachability over the call graph.
    let mut callers: Vec<(Ident, BTreeSet<Ident>)> = Vec::new();
    for d in env.surface.values() {
        let mut calls = BTreeSet::new();
        calls_in(&d.body, &mut calls);
        callers.push((d.name.clone(), calls));
    }
    let mut out = BTreeSet::from([target.clone()]);
    let mut queue = VecDeque::from([target.clone()]);
    while let Some(t) = queue.pop_front() {
        for (name, calls) in &callers {
            if calls.contains(&t) && out.insert(name.clone()) {
                queue.push_back(name.clone());
            }
        }
    }
    out
}

fn calls_in(e: &StreamExpr, out: &mut BTreeSet<Ident>) {
    match e {
        StreamExpr::Cons(h, t) => {
            calls_in_scalar(h, out);
            calls_in(t, out);
        }
        StreamExpr::Call {
            name,
            scalar_args,
            stream_args,
            ..
        } => {
            out.insert(name.clone());
            calls_in_args(scalar_args, out);
            stream_args.iter().for_each(|s| calls_in(s, out));
        }
        StreamExpr::Interfere {
            scalar_args,
            stream_args,
            ..
        } => {
            calls_in_args(scalar_args, out);
            stream_args.iter().for_each(|s| calls_in(s, out));
        }
        StreamExpr::Var(_) => {}
        StreamExpr::Tail(s) => calls_in(s, out),
        StreamExpr::Match { scrutinee, body, .. } => {
            calls_in(scrutinee, out);
            calls_in(body, out);
        }
    }
}

fn calls_in_args(args: &[ScalarArg], out: &mut BTreeSet<Ident>) {
    for a in args {
        match a {
            ScalarArg::Value(e) => calls_in_scalar(e, out),
            ScalarArg::Fun(FunRef::Builtin { captured, .. }) => captured.iter().for_each(|c| calls_in_scalar(c, out)),
            ScalarArg::Fun(FunRef::Param(_)) => {}
        }
    }
}

fn calls_in_scalar(e: &ScalarExpr, out: &mut BTreeSet<Ident>) {
    match e {
        ScalarExpr::Lit(_) | ScalarExpr::Var(_) => {}
        ScalarExpr::Builtin(_, args) | ScalarExpr::Apply(_, args) => args.iter().for_each(|a| calls_in_scalar(a, out)),
        ScalarExpr::Head(s) => calls_in(s, out),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Pos {
    /// No constructor above yet.
    Root,
    /// Directly under constructors only.
    Guarded,
    /// Anywhere else.
    Other,
}

struct Classifier {
    corec: BTreeSet<Ident>,
    path: Vec<String>,
    /// Enclosing functions, with whether a constructor was above each.
    wrappers: Vec<(Ident, bool)>,
    offenders: Vec<Offender>,
}

impl Classifier {
    fn with<R>(&mut self, label: impl Into<String>, f: impl FnOnce(&mut Self) -> R) -> R {
        self.path.push(label.into());
        let r = f(self);
        self.path.pop();
        r
    }

    fn stream(&mut self, e: &StreamExpr, pos: Pos, under_cons: bool) {
        match e {
            StreamExpr::Cons(h, t) => {
                self.scalar(h, true);
                let next = if pos == Pos::Other { Pos::Other } else { Pos::Guarded };
                self.stream(t, next, true);
            }
            StreamExpr::Var(_) => {}
            StreamExpr::Tail(s) => self.with("tl", |c| c.stream(s, Pos::Other, under_cons)),
            StreamExpr::Match { scrutinee, body, .. } => {
                self.with("match", |c| c.stream(scrutinee, Pos::Other, under_cons));
                self.stream(body, pos, under_cons);
            }
            StreamExpr::Call {
                name,
                scalar_args,
                stream_args,
                span,
            } => {
                if self.corec.contains(name) && !(pos == Pos::Guarded && self.wrappers.is_empty()) {
                    let (interferer, class) = match self.wrappers.first() {
                        Some((w, true)) => (Some(w.clone()), Guardedness::NonGuardedStarStar),
                        Some((w, false)) => (Some(w.clone()), Guardedness::NonGuardedStar),
                        None => (None, Guardedness::NonGuardedStar),
                    };
                    let mut path = self.path.clone();
                    path.push(name.to_string());
                    self.offenders.push(Offender {
                        span: span.clone(),
                        call_path: path.join(" > "),
                        interferer,
                        class,
                    });
                }
                self.args(name, scalar_args, stream_args, under_cons);
            }
            StreamExpr::Interfere {
                fun,
                scalar_args,
                stream_args,
            } => self.args(fun, scalar_args, stream_args, under_cons),
        }
    }

    fn args(&mut self, fun: &Ident, scalar_args: &[ScalarArg], stream_args: &[StreamExpr], under_cons: bool) {
        self.wrappers.push((fun.clone(), under_cons));
        self.path.push(fun.to_string());
        for a in scalar_args {
            match a {
                ScalarArg::Value(e) => self.scalar(e, under_cons),
                ScalarArg::Fun(FunRef::Builtin { captured, .. }) => {
                    captured.iter().for_each(|c| self.scalar(c, under_cons))
                }
                ScalarArg::Fun(FunRef::Param(_)) => {}
            }
        }
        for s in stream_args {
            self.stream(s, Pos::Other, under_cons);
        }
        self.path.pop();
        self.wrappers.pop();
    }

    fn scalar(&mut self, e: &ScalarExpr, under_cons: bool) {
        match e {
            ScalarExpr::Lit(_) | ScalarExpr::Var(_) => {}
            ScalarExpr::Builtin(_, args) | ScalarExpr::Apply(_, args) => {
                args.iter().for_each(|a| self.scalar(a, under_cons))
            }
            ScalarExpr::Head(s) => self.with("hd", |c| c.stream(s, Pos::Other, under_cons)),
        }
    }
}

pub fn classify_guardedness(def: &SurfaceDef, env: &Environment) -> GuardReport {
    let mut corec = corecursive_names(env, &def.name);
    corec.insert(def.name.clone());
    let mut c = Classifier {
        corec,
        path: Vec::new(),
        wrappers: Vec::new(),
        offenders: Vec::new(),
    };
    c.stream(&def.body, Pos::Root, false);
    let class = c
        .offenders
        .iter()
        .map(|o| o.class)
        .min_by_key(|k| match k {
            Guardedness::NonGuardedStar => 0,
            Guardedness::NonGuardedStarStar => 1,
            Guardedness::Guarded => 2,
        })
        .unwrap_or(Guardedness::Guarded);
    GuardReport {
        def: def.name.clone(),
        class,
        offenders: c.offenders,
    }
}
