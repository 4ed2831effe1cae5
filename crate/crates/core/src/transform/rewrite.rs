//! The rewrite system that pushes `nth` through a composed body.
//!
//! One redex is contracted per step. The default strategy picks the
//! outermost-leftmost redex in preorder; [`Strategy::Random`] picks uniformly
//! among all redexes and exists to exercise confluence.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::ast::{
    all_names, fresh_name, substitute, CallArg, Environment, FunBase, FunRef, Ident, IndexExpr, IndexFun,
};
use crate::pretty;

pub const DEFAULT_FUEL: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum RuleId {
    /// `nth i (stroff f) ⇒ f i`, `view (stroff f) ⇒ f`
    #[serde(rename = "1")]
    R1,
    /// `nth i (a :: s) ⇒ match i with 0 => a | S p => nth p s end`
    #[serde(rename = "2")]
    R2,
    /// `hd (stroff f) ⇒ f 0`
    #[serde(rename = "3")]
    R3,
    /// `tl (stroff f) ⇒ stroff (f >> 1)`
    #[serde(rename = "4")]
    R4,
    /// stream match on `stroff f` binds `f 0` and `stroff (f >> 1)`
    #[serde(rename = "5")]
    R5,
    /// application of an index function or of a saturated builtin
    #[serde(rename = "6")]
    R6,
    /// a form-shifting lemma
    #[serde(rename = "7")]
    R7,
    /// index normalization after the rewrite phase
    #[serde(rename = "beta-index")]
    BetaIndex,
    /// `nth i (match s with x :: t => b)` ⇒ `match s with x :: t => nth i b`
    #[serde(rename = "match-commute")]
    MatchCommute,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleId::R1 => "rule 1",
            RuleId::R2 => "rule 2",
            RuleId::R3 => "rule 3",
            RuleId::R4 => "rule 4",
            RuleId::R5 => "rule 5",
            RuleId::R6 => "rule 6",
            RuleId::R7 => "rule 7",
            RuleId::BetaIndex => "beta-index",
            RuleId::MatchCommute => "match-commute",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteStep {
    pub rule: RuleId,
    /// Whole term before the step.
    pub before: IndexExpr,
    /// Whole term after the step.
    pub after: IndexExpr,
}

impl Serialize for RewriteStep {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("RewriteStep", 3)?;
        st.serialize_field("rule", &self.rule)?;
        st.serialize_field("before", &pretty::index_expr(&self.before))?;
        st.serialize_field("after", &pretty::index_expr(&self.after))?;
        st.end()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RewriteTrace {
    pub steps: Vec<RewriteStep>,
    pub fuel_used: u64,
}

impl RewriteTrace {
    pub fn rules(&self) -> impl Iterator<Item = RuleId> + '_ {
        self.steps.iter().map(|s| s.rule)
    }
}

#[derive(Clone, Debug)]
pub enum Strategy {
    OutermostLeftmost,
    Random(ChaCha8Rng),
}

/// Ran out of steps; carries the partial trace.
#[derive(Clone, Debug)]
pub struct OutOfFuel {
    pub term: IndexExpr,
    pub trace: RewriteTrace,
}

pub(crate) struct Ctx<'a> {
    env: &'a Environment,
    /// Names that fresh binders must avoid.
    avoid: BTreeSet<Ident>,
}

impl<'a> Ctx<'a> {
    pub(crate) fn new(env: &'a Environment, root: &IndexExpr, extra: &BTreeSet<Ident>) -> Self {
        let mut avoid = all_names(root);
        avoid.extend(extra.iter().cloned());
        Ctx { env, avoid }
    }

    fn fresh_pred(&self) -> Ident {
        for c in ["p", "q", "r"] {
            if !self.avoid.contains(c) {
                return Ident::new(c);
            }
        }
        fresh_name("p", |c| self.avoid.contains(c))
    }

    fn fresh_like(&self, base: &Ident, also: &BTreeSet<Ident>) -> Ident {
        fresh_name(base.as_str(), |c| self.avoid.contains(c) || also.contains(c))
    }

    /// The contractum if `e` itself is a redex.
    fn rule_at(&self, e: &IndexExpr) -> Option<(RuleId, IndexExpr)> {
        match e {
            IndexExpr::Nth { stream, index } => match &**stream {
                IndexExpr::StrOff(f) => Some((RuleId::R1, IndexExpr::App(f.clone(), index.clone()))),
                IndexExpr::Cons(a, s) => {
                    let p = self.fresh_pred();
                    Some((
                        RuleId::R2,
                        IndexExpr::MatchIndex {
                            scrutinee: index.clone(),
                            zero: a.clone(),
                            pred: p.clone(),
                            succ: Box::new(IndexExpr::Nth {
                                stream: s.clone(),
                                index: Box::new(IndexExpr::Var(p)),
                            }),
                        },
                    ))
                }
                IndexExpr::Interfere {
                    fun,
                    scalar_args,
                    stream_args,
                } => {
                    let lemma = self.env.lemmas.get(fun.as_str())?;
                    let out = lemma.instantiate(scalar_args, stream_args, index)?;
                    Some((RuleId::R7, out))
                }
                IndexExpr::MatchStream {
                    scrutinee,
                    head,
                    tail,
                    body,
                } if !matches!(**scrutinee, IndexExpr::StrOff(_)) => {
                    // Move the observation under the binders, renaming any that the index mentions.
                    let index_names = all_names(index);
                    let mut binding = Vec::new();
                    let mut rename = |b: &Ident, stream: bool| -> Ident {
                        if index_names.contains(b) {
                            let fresh = self.fresh_like(b, &index_names);
                            let v = if stream {
                                IndexExpr::StreamVar(fresh.clone())
                            } else {
                                IndexExpr::Var(fresh.clone())
                            };
                            binding.push((b.clone(), v));
                            fresh
                        } else {
                            b.clone()
                        }
                    };
                    let h = rename(head, false);
                    let t = rename(tail, true);
                    let body = if binding.is_empty() {
                        (**body).clone()
                    } else {
                        substitute(body, &binding)
                    };
                    Some((
                        RuleId::MatchCommute,
                        IndexExpr::MatchStream {
                            scrutinee: scrutinee.clone(),
                            head: h,
                            tail: t,
                            body: Box::new(IndexExpr::Nth {
                                stream: Box::new(body),
                                index: index.clone(),
                            }),
                        },
                    ))
                }
                _ => None,
            },
            IndexExpr::Head(s) => match &**s {
                IndexExpr::StrOff(f) => Some((RuleId::R3, IndexExpr::App(f.clone(), Box::new(IndexExpr::lit(0))))),
                _ => None,
            },
            IndexExpr::Tail(s) => match &**s {
                IndexExpr::StrOff(f) => Some((RuleId::R4, IndexExpr::StrOff(f.shifted(1)))),
                _ => None,
            },
            IndexExpr::MatchStream {
                scrutinee,
                head,
                tail,
                body,
            } => match &**scrutinee {
                IndexExpr::StrOff(f) => Some((
                    RuleId::R5,
                    substitute(
                        body,
                        &[
                            (head.clone(), IndexExpr::App(f.clone(), Box::new(IndexExpr::lit(0)))),
                            (tail.clone(), IndexExpr::StrOff(f.shifted(1))),
                        ],
                    ),
                )),
                _ => None,
            },
            IndexExpr::App(f, i) => Some((RuleId::R6, apply_index_fun(f, i))),
            IndexExpr::Apply(FunRef::Builtin { op, captured }, args)
                if captured.len() + args.len() == op.arity() =>
            {
                let mut all = captured.clone();
                all.extend(args.iter().cloned());
                Some((RuleId::R6, IndexExpr::Builtin(*op, all)))
            }
            _ => None,
        }
    }

    fn fun_rule_at(&self, f: &IndexFun) -> Option<(RuleId, IndexFun)> {
        match f {
            IndexFun::View(s) => match &**s {
                IndexExpr::StrOff(g) => Some((RuleId::R1, g.clone())),
                _ => None,
            },
            IndexFun::Shifted { .. } => None,
        }
    }
}

fn apply_index_fun(f: &IndexFun, i: &IndexExpr) -> IndexExpr {
    match f {
        IndexFun::Shifted {
            base: FunBase::Param(p),
            shift,
        } => IndexExpr::ParamApp {
            param: p.clone(),
            index: Box::new(i.clone().plus_const(*shift)),
        },
        IndexFun::Shifted {
            base: FunBase::Rec { name, args },
            shift,
        } => IndexExpr::RecCall {
            name: name.clone(),
            args: args.clone(),
            index: Box::new(i.clone().plus_const(*shift)),
        },
        IndexFun::View(s) => IndexExpr::Nth {
            stream: s.clone(),
            index: Box::new(i.clone()),
        },
    }
}

/// Preorder walk that contracts the `target`-th redex.
struct Walker<'c, 'a> {
    ctx: &'c Ctx<'a>,
    target: usize,
    seen: usize,
    fired: Option<RuleId>,
}

impl Walker<'_, '_> {
    fn expr(&mut self, e: &mut IndexExpr) {
        if self.fired.is_some() {
            return;
        }
        if let Some((rule, new)) = self.ctx.rule_at(e) {
            if self.seen == self.target {
                *e = new;
                self.fired = Some(rule);
                return;
            }
            self.seen += 1;
        }
        match e {
            IndexExpr::Lit(_) | IndexExpr::Var(_) | IndexExpr::StreamVar(_) => {}
            IndexExpr::Builtin(_, args) => args.iter_mut().for_each(|a| self.expr(a)),
            IndexExpr::Apply(f, args) => {
                self.funref(f);
                args.iter_mut().for_each(|a| self.expr(a));
            }
            IndexExpr::MatchIndex {
                scrutinee, zero, succ, ..
            } => {
                self.expr(scrutinee);
                self.expr(zero);
                self.expr(succ);
            }
            IndexExpr::RecCall { args, index, .. } => {
                args.iter_mut().for_each(|a| self.arg(a));
                self.expr(index);
            }
            IndexExpr::ParamApp { index, .. } => self.expr(index),
            IndexExpr::Head(s) | IndexExpr::Tail(s) => self.expr(s),
            IndexExpr::Cons(h, t) => {
                self.expr(h);
                self.expr(t);
            }
            IndexExpr::MatchStream { scrutinee, body, .. } => {
                self.expr(scrutinee);
                self.expr(body);
            }
            IndexExpr::Interfere {
                scalar_args,
                stream_args,
                ..
            } => {
                scalar_args.iter_mut().for_each(|a| self.arg(a));
                stream_args.iter_mut().for_each(|s| self.expr(s));
            }
            IndexExpr::Nth { stream, index } => {
                self.expr(stream);
                self.expr(index);
            }
            IndexExpr::StrOff(f) => self.fun(f),
            IndexExpr::App(f, i) => {
                self.fun(f);
                self.expr(i);
            }
        }
    }

    fn fun(&mut self, f: &mut IndexFun) {
        if self.fired.is_some() {
            return;
        }
        if let Some((rule, new)) = self.ctx.fun_rule_at(f) {
            if self.seen == self.target {
                *f = new;
                self.fired = Some(rule);
                return;
            }
            self.seen += 1;
        }
        match f {
            IndexFun::Shifted {
                base: FunBase::Rec { args, .. },
                ..
            } => args.iter_mut().for_each(|a| self.arg(a)),
            IndexFun::Shifted { .. } => {}
            IndexFun::View(s) => self.expr(s),
        }
    }

    fn arg(&mut self, a: &mut CallArg) {
        match a {
            CallArg::Scalar(e) | CallArg::Stream(e) => self.expr(e),
            CallArg::Fun(f) => self.funref(f),
            CallArg::Indexed(f) => self.fun(f),
        }
    }

    fn funref(&mut self, f: &mut FunRef<IndexExpr>) {
        if let FunRef::Builtin { captured, .. } = f {
            captured.iter_mut().for_each(|c| self.expr(c));
        }
    }
}

/// Number of redexes in `e`.
pub fn count_redexes(e: &IndexExpr, env: &Environment) -> usize {
    let ctx = Ctx::new(env, e, &BTreeSet::new());
    let mut w = Walker {
        ctx: &ctx,
        target: usize::MAX,
        seen: 0,
        fired: None,
    };
    let mut copy = e.clone();
    w.expr(&mut copy);
    w.seen
}

/// Contracts one redex; `None` when `e` is in normal form.
pub fn step(
    e: &IndexExpr,
    env: &Environment,
    reserved: &BTreeSet<Ident>,
    strategy: &mut Strategy,
) -> Option<RewriteStep> {
    let target = match strategy {
        Strategy::OutermostLeftmost => 0,
        Strategy::Random(rng) => {
            let n = count_redexes(e, env);
            if n == 0 {
                return None;
            }
            rng.gen_range(0..n)
        }
    };
    let ctx = Ctx::new(env, e, reserved);
    let mut w = Walker {
        ctx: &ctx,
        target,
        seen: 0,
        fired: None,
    };
    let mut after = e.clone();
    w.expr(&mut after);
    w.fired.map(|rule| RewriteStep {
        rule,
        before: e.clone(),
        after,
    })
}

/// Rewrites to normal form within `fuel` steps.
pub fn normalize(
    term: IndexExpr,
    env: &Environment,
    reserved: &BTreeSet<Ident>,
    fuel: u64,
    strategy: &mut Strategy,
) -> Result<(IndexExpr, RewriteTrace), OutOfFuel> {
    let mut trace = RewriteTrace::default();
    let mut cur = term;
    loop {
        let Some(s) = step(&cur, env, reserved, strategy) else {
            return Ok((cur, trace));
        };
        if trace.fuel_used >= fuel {
            return Err(OutOfFuel { term: cur, trace });
        }
        cur = s.after.clone();
        trace.steps.push(s);
        trace.fuel_used += 1;
    }
}
