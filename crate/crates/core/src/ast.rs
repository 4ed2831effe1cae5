//! Expression languages shared by every pass.
//!
//! Two languages live here. [`StreamExpr`]/[`ScalarExpr`] describe the right-hand
//! side of a stream equation as written by the user. [`IndexExpr`] is the language
//! of indexed functions over naturals; during rewriting it also carries the
//! encoding nodes (`nth`, `stroff`, function views) that mix both worlds, and a
//! fully normalized body contains none of them.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::diag::SourceSpan;
use crate::transform::FormShiftLemma;

/// An interned-ish identifier; cheap to clone and shareable across threads.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ident(Arc<str>);

impl Ident {
    pub fn new(s: &str) -> Self {
        Ident(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Ident {
    fn from(s: &str) -> Self {
        Ident::new(s)
    }
}

impl From<String> for Ident {
    fn from(s: String) -> Self {
        Ident(Arc::from(s))
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", &self.0)
    }
}

impl Serialize for Ident {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

/// Stream elements: exact integers, so `dTimes` over Z and large Fibonacci
/// numbers never overflow.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar(pub BigInt);

impl Scalar {
    pub fn zero() -> Self {
        Scalar(BigInt::zero())
    }

    pub fn succ(&self) -> Self {
        Scalar(&self.0 + 1)
    }

    pub fn add(&self, other: &Scalar) -> Self {
        Scalar(&self.0 + &other.0)
    }

    pub fn mul(&self, other: &Scalar) -> Self {
        Scalar(&self.0 * &other.0)
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// The value as a stream index, if it is a natural number that fits.
    pub fn to_index(&self) -> Option<u64> {
        if self.0.is_negative() {
            None
        } else {
            self.0.to_u64()
        }
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar(BigInt::from(v))
    }
}

impl From<u64> for Scalar {
    fn from(v: u64) -> Self {
        Scalar(BigInt::from(v))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        // Values can exceed every fixed-width JSON number, so emit exact decimal text
        // when they do not fit in an i64.
        match self.0.to_i64() {
            Some(v) => s.serialize_i64(v),
            None => s.serialize_str(&self.0.to_string()),
        }
    }
}

/// Built-in scalar operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Succ,
    Plus,
    Times,
}

impl Op {
    pub fn arity(self) -> usize {
        match self {
            Op::Succ => 1,
            Op::Plus | Op::Times => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::Succ => "S",
            Op::Plus => "plus",
            Op::Times => "times",
        }
    }

    /// Applies the operator; `args.len()` must equal the arity.
    pub fn apply(self, args: &[Scalar]) -> Scalar {
        debug_assert_eq!(args.len(), self.arity());
        match self {
            Op::Succ => args[0].succ(),
            Op::Plus => args[0].add(&args[1]),
            Op::Times => args[0].mul(&args[1]),
        }
    }
}

/// The distinguished stream combinators that may wrap a corecursive call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Combinator {
    Map,
    ZipWith,
    Merge,
}

impl Combinator {
    pub const ALL: [Combinator; 3] = [Combinator::Map, Combinator::ZipWith, Combinator::Merge];

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "map" => Some(Combinator::Map),
            "zipWith" => Some(Combinator::ZipWith),
            "merge" => Some(Combinator::Merge),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Combinator::Map => "map",
            Combinator::ZipWith => "zipWith",
            Combinator::Merge => "merge",
        }
    }

    pub fn scalar_kinds(self) -> &'static [ScalarKind] {
        match self {
            Combinator::Map => &[ScalarKind::Function { arity: 1 }],
            Combinator::ZipWith => &[ScalarKind::Function { arity: 2 }],
            Combinator::Merge => &[],
        }
    }

    pub fn stream_arity(self) -> usize {
        match self {
            Combinator::Map => 1,
            Combinator::ZipWith | Combinator::Merge => 2,
        }
    }
}

/// A scalar function: a (partially applied) builtin, or a function-valued parameter.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FunRef<E> {
    Builtin { op: Op, captured: Vec<E> },
    Param(Ident),
}

impl<E> FunRef<E> {
    pub fn builtin(op: Op) -> Self {
        FunRef::Builtin {
            op,
            captured: Vec::new(),
        }
    }

    /// Number of arguments still expected, when known statically.
    pub fn remaining_arity(&self) -> Option<usize> {
        match self {
            FunRef::Builtin { op, captured } => Some(op.arity() - captured.len()),
            FunRef::Param(_) => None,
        }
    }
}

/// A non-stream argument of a call or of an interfering function.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ScalarArg {
    Value(ScalarExpr),
    Fun(FunRef<ScalarExpr>),
}

/// Right-hand side of a surface stream equation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StreamExpr {
    Cons(Box<ScalarExpr>, Box<StreamExpr>),
    /// A call to a definition of the environment; scalar arguments precede
    /// stream arguments, mirroring the callee's parameter lists.
    Call {
        name: Ident,
        scalar_args: Vec<ScalarArg>,
        stream_args: Vec<StreamExpr>,
        span: SourceSpan,
    },
    Var(Ident),
    Tail(Box<StreamExpr>),
    Match {
        scrutinee: Box<StreamExpr>,
        head: Ident,
        tail: Ident,
        body: Box<StreamExpr>,
    },
    /// Application of a distinguished combinator (`map`, `zipWith`, `merge`).
    Interfere {
        fun: Ident,
        scalar_args: Vec<ScalarArg>,
        stream_args: Vec<StreamExpr>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ScalarExpr {
    Lit(Scalar),
    Var(Ident),
    Builtin(Op, Vec<ScalarExpr>),
    /// Application of a function-valued parameter.
    Apply(Ident, Vec<ScalarExpr>),
    Head(Box<StreamExpr>),
}

/// A function over naturals as it appears during and after rewriting.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IndexFun {
    /// `i ↦ base (i + shift)`; towers of `fun k => f (S k)` collapse into the offset.
    Shifted { base: FunBase, shift: u64 },
    /// The function view `i ↦ nth i s` of a stream expression.
    View(Box<IndexExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FunBase {
    /// A stream parameter viewed as a function.
    Param(Ident),
    /// A derived function partially applied to everything but its index.
    Rec { name: Ident, args: Vec<CallArg> },
}

impl IndexFun {
    pub fn param(name: Ident) -> Self {
        IndexFun::Shifted {
            base: FunBase::Param(name),
            shift: 0,
        }
    }

    pub fn rec(name: Ident, args: Vec<CallArg>) -> Self {
        IndexFun::Shifted {
            base: FunBase::Rec { name, args },
            shift: 0,
        }
    }

    /// `fun i => self (i + by)`.
    pub fn shifted(&self, by: u64) -> IndexFun {
        match self {
            IndexFun::Shifted { base, shift } => IndexFun::Shifted {
                base: base.clone(),
                shift: shift + by,
            },
            IndexFun::View(s) => {
                let mut stream = (**s).clone();
                for _ in 0..by {
                    stream = IndexExpr::Tail(Box::new(stream));
                }
                IndexFun::View(Box::new(stream))
            }
        }
    }
}

/// Argument of a recursive call in the indexed language. Stream parameters in
/// keep-as-stream mode receive stream expressions; view-as-function ones receive
/// index functions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CallArg {
    Scalar(IndexExpr),
    Fun(FunRef<IndexExpr>),
    Stream(IndexExpr),
    Indexed(IndexFun),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IndexExpr {
    Lit(Scalar),
    Var(Ident),
    Builtin(Op, Vec<IndexExpr>),
    /// Scalar function application. With a builtin head this is a beta-redex.
    Apply(FunRef<IndexExpr>, Vec<IndexExpr>),
    MatchIndex {
        scrutinee: Box<IndexExpr>,
        zero: Box<IndexExpr>,
        pred: Ident,
        succ: Box<IndexExpr>,
    },
    RecCall {
        name: Ident,
        args: Vec<CallArg>,
        index: Box<IndexExpr>,
    },
    /// A view-as-function stream parameter applied to an index.
    ParamApp { param: Ident, index: Box<IndexExpr> },
    Head(Box<IndexExpr>),
    Cons(Box<IndexExpr>, Box<IndexExpr>),
    StreamVar(Ident),
    Tail(Box<IndexExpr>),
    MatchStream {
        scrutinee: Box<IndexExpr>,
        head: Ident,
        tail: Ident,
        body: Box<IndexExpr>,
    },
    Interfere {
        fun: Ident,
        scalar_args: Vec<CallArg>,
        stream_args: Vec<IndexExpr>,
    },
    Nth {
        stream: Box<IndexExpr>,
        index: Box<IndexExpr>,
    },
    StrOff(IndexFun),
    /// Transient application of an index function; always a beta-redex.
    App(IndexFun, Box<IndexExpr>),
}

impl IndexExpr {
    pub fn lit(v: i64) -> Self {
        IndexExpr::Lit(Scalar::from(v))
    }

    pub fn var(name: &str) -> Self {
        IndexExpr::Var(Ident::new(name))
    }

    /// `self + k` with literal folding; `k = 0` is the identity.
    pub fn plus_const(self, k: u64) -> IndexExpr {
        if k == 0 {
            return self;
        }
        match self {
            IndexExpr::Lit(v) => IndexExpr::Lit(v.add(&Scalar::from(k))),
            IndexExpr::Builtin(Op::Plus, args) if matches!(args[0], IndexExpr::Lit(_)) => {
                let mut args = args;
                if let IndexExpr::Lit(c) = &args[0] {
                    args[0] = IndexExpr::Lit(c.add(&Scalar::from(k)));
                }
                IndexExpr::Builtin(Op::Plus, args)
            }
            other => IndexExpr::Builtin(Op::Plus, vec![IndexExpr::Lit(Scalar::from(k)), other]),
        }
    }

    /// True when the node (not its children) belongs to the encoding layer.
    pub fn is_encoding_node(&self) -> bool {
        matches!(
            self,
            IndexExpr::Nth { .. } | IndexExpr::StrOff(_) | IndexExpr::App(..)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarKind {
    Value,
    Function { arity: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ScalarParam {
    pub name: Ident,
    pub kind: ScalarKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamMode {
    KeepAsStream,
    ViewAsFunction,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StreamParam {
    pub name: Ident,
    pub mode: StreamMode,
}

/// A named stream equation `name a₁ … aₖ s₁ … sₗ = body`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurfaceDef {
    pub name: Ident,
    pub scalar_params: Vec<ScalarParam>,
    pub stream_params: Vec<StreamParam>,
    pub body: StreamExpr,
    pub span: SourceSpan,
}

impl SurfaceDef {
    pub fn arity(&self) -> usize {
        self.scalar_params.len() + self.stream_params.len()
    }

    pub fn param_names(&self) -> impl Iterator<Item = &Ident> {
        self.scalar_params
            .iter()
            .map(|p| &p.name)
            .chain(self.stream_params.iter().map(|p| &p.name))
    }
}

/// A derived function `name a₁ … aₖ s₁ … sₗ n = body` over the index `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexDef {
    pub name: Ident,
    pub scalar_params: Vec<ScalarParam>,
    pub stream_params: Vec<StreamParam>,
    pub index_param: Ident,
    pub body: IndexExpr,
}

impl IndexDef {
    pub fn param_names(&self) -> impl Iterator<Item = &Ident> {
        self.scalar_params
            .iter()
            .map(|p| &p.name)
            .chain(self.stream_params.iter().map(|p| &p.name))
    }
}

/// Definitions, derived functions and admitted form-shifting lemmas.
#[derive(Clone, Debug, Default)]
pub struct Environment {
    pub surface: IndexMap<Ident, SurfaceDef>,
    pub derived: IndexMap<Ident, IndexDef>,
    pub lemmas: IndexMap<Ident, FormShiftLemma>,
}

impl Environment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn surface_def(&self, name: &str) -> Option<&SurfaceDef> {
        self.surface.get(name)
    }

    pub fn derived_def(&self, name: &str) -> Option<&IndexDef> {
        self.derived.get(name)
    }

    /// Adds (or replaces) a derived definition; its name must be a surface definition.
    pub fn insert_derived(&mut self, def: IndexDef) -> bool {
        if !self.surface.contains_key(def.name.as_str()) {
            return false;
        }
        self.derived.insert(def.name.clone(), def);
        true
    }
}

impl std::borrow::Borrow<str> for Ident {
    fn borrow(&self) -> &str {
        &self.0
    }
}

// ---------------------------------------------------------------------------
// Free variables

/// Anything with lexically free identifiers.
pub trait FreeVars {
    fn collect_free(&self, bound: &mut Vec<Ident>, out: &mut BTreeSet<Ident>);

    fn free_vars(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }
}

/// Free identifiers of an expression; calls to definitions are not variables.
pub fn free_vars<E: FreeVars + ?Sized>(expr: &E) -> BTreeSet<Ident> {
    expr.free_vars()
}

fn note(name: &Ident, bound: &[Ident], out: &mut BTreeSet<Ident>) {
    if !bound.contains(name) {
        out.insert(name.clone());
    }
}

impl<E: FreeVars> FreeVars for FunRef<E> {
    fn collect_free(&self, bound: &mut Vec<Ident>, out: &mut BTreeSet<Ident>) {
        match self {
            FunRef::Builtin { captured, .. } => {
                for c in captured {
                    c.collect_free(bound, out);
                }
            }
            FunRef::Param(name) => note(name, bound, out),
        }
    }
}

impl FreeVars for ScalarArg {
    fn collect_free(&self, bound: &mut Vec<Ident>, out: &mut BTreeSet<Ident>) {
        match self {
            ScalarArg::Value(e) => e.collect_free(bound, out),
            ScalarArg::Fun(f) => f.collect_free(bound, out),
        }
    }
}

impl FreeVars for StreamExpr {
    fn collect_free(&self, bound: &mut Vec<Ident>, out: &mut BTreeSet<Ident>) {
        match self {
            StreamExpr::Cons(h, t) => {
                h.collect_free(bound, out);
                t.collect_free(bound, out);
            }
            StreamExpr::Call {
                scalar_args,
                stream_args,
                ..
            }
            | StreamExpr::Interfere {
                scalar_args,
                stream_args,
                ..
            } => {
                for a in scalar_args {
                    a.collect_free(bound, out);
                }
                for s in stream_args {
                    s.collect_free(bound, out);
                }
            }
            StreamExpr::Var(name) => note(name, bound, out),
            StreamExpr::Tail(s) => s.collect_free(bound, out),
            StreamExpr::Match {
                scrutinee,
                head,
                tail,
                body,
            } => {
                scrutinee.collect_free(bound, out);
                bound.push(head.clone());
                bound.push(tail.clone());
                body.collect_free(bound, out);
                bound.truncate(bound.len() - 2);
            }
        }
    }
}

impl FreeVars for ScalarExpr {
    fn collect_free(&self, bound: &mut Vec<Ident>, out: &mut BTreeSet<Ident>) {
        match self {
            ScalarExpr::Lit(_) => {}
            ScalarExpr::Var(name) => note(name, bound, out),
            ScalarExpr::Builtin(_, args) => {
                for a in args {
                    a.collect_free(bound, out);
                }
            }
            ScalarExpr::Apply(f, args) => {
                note(f, bound, out);
                for a in args {
                    a.collect_free(bound, out);
                }
            }
            ScalarExpr::Head(s) => s.collect_free(bound, out),
        }
    }
}

impl FreeVars for IndexFun {
    fn collect_free(&self, bound: &mut Vec<Ident>, out: &mut BTreeSet<Ident>) {
        match self {
            IndexFun::Shifted { base, .. } => match base {
                FunBase::Param(name) => note(name, bound, out),
                FunBase::Rec { args, .. } => {
                    for a in args {
                        a.collect_free(bound, out);
                    }
                }
            },
            IndexFun::View(s) => s.collect_free(bound, out),
        }
    }
}

impl FreeVars for CallArg {
    fn collect_free(&self, bound: &mut Vec<Ident>, out: &mut BTreeSet<Ident>) {
        match self {
            CallArg::Scalar(e) | CallArg::Stream(e) => e.collect_free(bound, out),
            CallArg::Fun(f) => f.collect_free(bound, out),
            CallArg::Indexed(f) => f.collect_free(bound, out),
        }
    }
}

impl FreeVars for IndexExpr {
    fn collect_free(&self, bound: &mut Vec<Ident>, out: &mut BTreeSet<Ident>) {
        match self {
            IndexExpr::Lit(_) => {}
            IndexExpr::Var(name) | IndexExpr::StreamVar(name) => note(name, bound, out),
            IndexExpr::Builtin(_, args) => {
                for a in args {
                    a.collect_free(bound, out);
                }
            }
            IndexExpr::Apply(f, args) => {
                f.collect_free(bound, out);
                for a in args {
                    a.collect_free(bound, out);
                }
            }
            IndexExpr::MatchIndex {
                scrutinee,
                zero,
                pred,
                succ,
            } => {
                scrutinee.collect_free(bound, out);
                zero.collect_free(bound, out);
                bound.push(pred.clone());
                succ.collect_free(bound, out);
                bound.pop();
            }
            IndexExpr::RecCall { args, index, .. } => {
                for a in args {
                    a.collect_free(bound, out);
                }
                index.collect_free(bound, out);
            }
            IndexExpr::ParamApp { param, index } => {
                note(param, bound, out);
                index.collect_free(bound, out);
            }
            IndexExpr::Head(e) | IndexExpr::Tail(e) => e.collect_free(bound, out),
            IndexExpr::Cons(h, t) => {
                h.collect_free(bound, out);
                t.collect_free(bound, out);
            }
            IndexExpr::MatchStream {
                scrutinee,
                head,
                tail,
                body,
            } => {
                scrutinee.collect_free(bound, out);
                bound.push(head.clone());
                bound.push(tail.clone());
                body.collect_free(bound, out);
                bound.truncate(bound.len() - 2);
            }
            IndexExpr::Interfere {
                scalar_args,
                stream_args,
                ..
            } => {
                for a in scalar_args {
                    a.collect_free(bound, out);
                }
                for s in stream_args {
                    s.collect_free(bound, out);
                }
            }
            IndexExpr::Nth { stream, index } => {
                stream.collect_free(bound, out);
                index.collect_free(bound, out);
            }
            IndexExpr::StrOff(f) => f.collect_free(bound, out),
            IndexExpr::App(f, i) => {
                f.collect_free(bound, out);
                i.collect_free(bound, out);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Names and fresh binders

/// Every identifier mentioned anywhere in `expr`, binders and call targets included.
pub fn all_names(expr: &IndexExpr) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    visit_names(expr, &mut out);
    out
}

fn visit_fun_names(f: &FunRef<IndexExpr>, out: &mut BTreeSet<Ident>) {
    match f {
        FunRef::Builtin { captured, .. } => captured.iter().for_each(|c| visit_names(c, out)),
        FunRef::Param(n) => {
            out.insert(n.clone());
        }
    }
}

fn visit_index_fun_names(f: &IndexFun, out: &mut BTreeSet<Ident>) {
    match f {
        IndexFun::Shifted { base, .. } => match base {
            FunBase::Param(n) => {
                out.insert(n.clone());
            }
            FunBase::Rec { name, args } => {
                out.insert(name.clone());
                args.iter().for_each(|a| visit_arg_names(a, out));
            }
        },
        IndexFun::View(s) => visit_names(s, out),
    }
}

fn visit_arg_names(a: &CallArg, out: &mut BTreeSet<Ident>) {
    match a {
        CallArg::Scalar(e) | CallArg::Stream(e) => visit_names(e, out),
        CallArg::Fun(f) => visit_fun_names(f, out),
        CallArg::Indexed(f) => visit_index_fun_names(f, out),
    }
}

fn visit_names(expr: &IndexExpr, out: &mut BTreeSet<Ident>) {
    match expr {
        IndexExpr::Lit(_) => {}
        IndexExpr::Var(n) | IndexExpr::StreamVar(n) => {
            out.insert(n.clone());
        }
        IndexExpr::Builtin(_, args) => args.iter().for_each(|a| visit_names(a, out)),
        IndexExpr::Apply(f, args) => {
            visit_fun_names(f, out);
            args.iter().for_each(|a| visit_names(a, out));
        }
        IndexExpr::MatchIndex {
            scrutinee,
            zero,
            pred,
            succ,
        } => {
            out.insert(pred.clone());
            visit_names(scrutinee, out);
            visit_names(zero, out);
            visit_names(succ, out);
        }
        IndexExpr::RecCall { name, args, index } => {
            out.insert(name.clone());
            args.iter().for_each(|a| visit_arg_names(a, out));
            visit_names(index, out);
        }
        IndexExpr::ParamApp { param, index } => {
            out.insert(param.clone());
            visit_names(index, out);
        }
        IndexExpr::Head(e) | IndexExpr::Tail(e) => visit_names(e, out),
        IndexExpr::Cons(h, t) => {
            visit_names(h, out);
            visit_names(t, out);
        }
        IndexExpr::MatchStream {
            scrutinee,
            head,
            tail,
            body,
        } => {
            out.insert(head.clone());
            out.insert(tail.clone());
            visit_names(scrutinee, out);
            visit_names(body, out);
        }
        IndexExpr::Interfere {
            fun,
            scalar_args,
            stream_args,
        } => {
            out.insert(fun.clone());
            scalar_args.iter().for_each(|a| visit_arg_names(a, out));
            stream_args.iter().for_each(|s| visit_names(s, out));
        }
        IndexExpr::Nth { stream, index } => {
            visit_names(stream, out);
            visit_names(index, out);
        }
        IndexExpr::StrOff(f) => visit_index_fun_names(f, out),
        IndexExpr::App(f, i) => {
            visit_index_fun_names(f, out);
            visit_names(i, out);
        }
    }
}

/// First of `base`, `base1`, `base2`, … that `taken` rejects.
pub fn fresh_name(base: &str, taken: impl Fn(&str) -> bool) -> Ident {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
    let stem = if stem.is_empty() { "v" } else { stem };
    if !taken(base) {
        return Ident::new(base);
    }
    (1..)
        .map(|i| format!("{stem}{i}"))
        .find(|cand| !taken(cand))
        .map(Ident::from)
        .expect("unbounded candidate supply")
}

// ---------------------------------------------------------------------------
// Capture-avoiding substitution

/// Replaces free `Var`/`StreamVar` occurrences according to `binding`.
///
/// Binders that would capture a free variable of some substituted term are renamed.
pub fn substitute(expr: &IndexExpr, binding: &[(Ident, IndexExpr)]) -> IndexExpr {
    let mut avoid: BTreeSet<Ident> = BTreeSet::new();
    for (k, v) in binding {
        avoid.insert(k.clone());
        avoid.extend(v.free_vars());
    }
    let mut s = Subst {
        scope: binding
            .iter()
            .map(|(k, v)| Entry::Subst(k.clone(), v.clone()))
            .collect(),
        avoid,
    };
    s.expr(expr)
}

#[derive(Clone)]
enum Entry {
    Subst(Ident, IndexExpr),
    Rename(Ident, Ident),
    /// A binder shadowing outer entries with the same name.
    Shadow(Ident),
}

impl Entry {
    fn key(&self) -> &Ident {
        match self {
            Entry::Subst(k, _) | Entry::Rename(k, _) | Entry::Shadow(k) => k,
        }
    }
}

struct Subst {
    scope: Vec<Entry>,
    avoid: BTreeSet<Ident>,
}

impl Subst {
    fn lookup(&self, name: &Ident) -> Option<&Entry> {
        self.scope.iter().rev().find(|e| e.key() == name)
    }

    /// Free variables of the payloads still reachable in the current scope.
    fn live_payload_free(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        for (i, e) in self.scope.iter().enumerate() {
            if let Entry::Subst(k, v) = e {
                let shadowed = self.scope[i + 1..].iter().any(|later| later.key() == k);
                if !shadowed {
                    out.extend(v.free_vars());
                }
            }
        }
        out
    }

    /// Pushes scope entries for `binders`, renaming those that would capture.
    fn enter(&mut self, binders: &[&Ident], body_names: &BTreeSet<Ident>) -> (Vec<Ident>, usize) {
        let mark = self.scope.len();
        for b in binders {
            self.scope.push(Entry::Shadow((*b).clone()));
        }
        let payload_free = self.live_payload_free();
        let mut used: BTreeSet<Ident> = body_names.clone();
        used.extend(self.avoid.iter().cloned());
        used.extend(payload_free.iter().cloned());
        let mut out = Vec::new();
        for b in binders {
            if payload_free.contains(*b) {
                let fresh = fresh_name(b.as_str(), |c| used.contains(c));
                used.insert(fresh.clone());
                self.scope.push(Entry::Rename((*b).clone(), fresh.clone()));
                out.push(fresh);
            } else {
                out.push((*b).clone());
            }
        }
        (out, mark)
    }

    fn leave(&mut self, mark: usize) {
        self.scope.truncate(mark);
    }

    fn fun(&mut self, f: &FunRef<IndexExpr>) -> FunRef<IndexExpr> {
        match f {
            FunRef::Builtin { op, captured } => FunRef::Builtin {
                op: *op,
                captured: captured.iter().map(|c| self.expr(c)).collect(),
            },
            FunRef::Param(n) => FunRef::Param(n.clone()),
        }
    }

    fn index_fun(&mut self, f: &IndexFun) -> IndexFun {
        match f {
            IndexFun::Shifted { base, shift } => IndexFun::Shifted {
                base: match base {
                    FunBase::Param(n) => FunBase::Param(n.clone()),
                    FunBase::Rec { name, args } => FunBase::Rec {
                        name: name.clone(),
                        args: args.iter().map(|a| self.arg(a)).collect(),
                    },
                },
                shift: *shift,
            },
            IndexFun::View(s) => IndexFun::View(Box::new(self.expr(s))),
        }
    }

    fn arg(&mut self, a: &CallArg) -> CallArg {
        match a {
            CallArg::Scalar(e) => CallArg::Scalar(self.expr(e)),
            CallArg::Stream(e) => CallArg::Stream(self.expr(e)),
            CallArg::Fun(f) => CallArg::Fun(self.fun(f)),
            CallArg::Indexed(f) => CallArg::Indexed(self.index_fun(f)),
        }
    }

    fn expr(&mut self, e: &IndexExpr) -> IndexExpr {
        match e {
            IndexExpr::Lit(v) => IndexExpr::Lit(v.clone()),
            IndexExpr::Var(n) | IndexExpr::StreamVar(n) => match self.lookup(n) {
                Some(Entry::Subst(_, v)) => v.clone(),
                Some(Entry::Rename(_, fresh)) => match e {
                    IndexExpr::Var(_) => IndexExpr::Var(fresh.clone()),
                    _ => IndexExpr::StreamVar(fresh.clone()),
                },
                Some(Entry::Shadow(_)) | None => e.clone(),
            },
            IndexExpr::Builtin(op, args) => {
                IndexExpr::Builtin(*op, args.iter().map(|a| self.expr(a)).collect())
            }
            IndexExpr::Apply(f, args) => {
                IndexExpr::Apply(self.fun(f), args.iter().map(|a| self.expr(a)).collect())
            }
            IndexExpr::MatchIndex {
                scrutinee,
                zero,
                pred,
                succ,
            } => {
                let scrutinee = self.expr(scrutinee);
                let zero = self.expr(zero);
                let (binders, mark) = self.enter(&[pred], &all_names(succ));
                let succ = self.expr(succ);
                self.leave(mark);
                IndexExpr::MatchIndex {
                    scrutinee: Box::new(scrutinee),
                    zero: Box::new(zero),
                    pred: binders[0].clone(),
                    succ: Box::new(succ),
                }
            }
            IndexExpr::RecCall { name, args, index } => IndexExpr::RecCall {
                name: name.clone(),
                args: args.iter().map(|a| self.arg(a)).collect(),
                index: Box::new(self.expr(index)),
            },
            IndexExpr::ParamApp { param, index } => IndexExpr::ParamApp {
                param: param.clone(),
                index: Box::new(self.expr(index)),
            },
            IndexExpr::Head(s) => IndexExpr::Head(Box::new(self.expr(s))),
            IndexExpr::Tail(s) => IndexExpr::Tail(Box::new(self.expr(s))),
            IndexExpr::Cons(h, t) => IndexExpr::Cons(Box::new(self.expr(h)), Box::new(self.expr(t))),
            IndexExpr::MatchStream {
                scrutinee,
                head,
                tail,
                body,
            } => {
                let scrutinee = self.expr(scrutinee);
                let (binders, mark) = self.enter(&[head, tail], &all_names(body));
                let body = self.expr(body);
                self.leave(mark);
                IndexExpr::MatchStream {
                    scrutinee: Box::new(scrutinee),
                    head: binders[0].clone(),
                    tail: binders[1].clone(),
                    body: Box::new(body),
                }
            }
            IndexExpr::Interfere {
                fun,
                scalar_args,
                stream_args,
            } => IndexExpr::Interfere {
                fun: fun.clone(),
                scalar_args: scalar_args.iter().map(|a| self.arg(a)).collect(),
                stream_args: stream_args.iter().map(|s| self.expr(s)).collect(),
            },
            IndexExpr::Nth { stream, index } => IndexExpr::Nth {
                stream: Box::new(self.expr(stream)),
                index: Box::new(self.expr(index)),
            },
            IndexExpr::StrOff(f) => IndexExpr::StrOff(self.index_fun(f)),
            IndexExpr::App(f, i) => IndexExpr::App(self.index_fun(f), Box::new(self.expr(i))),
        }
    }
}
