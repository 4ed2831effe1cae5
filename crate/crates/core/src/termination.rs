//! Structural recursion check for derived definitions.
//!
//! A self-call is accepted when its index is a variable obtained by peeling at
//! least one successor off the index parameter (directly or through a chain of
//! index matches). Calls to other definitions are not inspected.

use serde::Serialize;

use crate::ast::{CallArg, FunBase, FunRef, Ident, IndexDef, IndexExpr, IndexFun};
use crate::pretty;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StructOffender {
    pub call: String,
    pub index: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StructReport {
    pub def: Ident,
    pub structural: bool,
    pub offenders: Vec<StructOffender>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Index,
    Smaller,
    Other,
}

struct Checker<'a> {
    def: &'a IndexDef,
    scope: Vec<(Ident, Status)>,
    offenders: Vec<StructOffender>,
}

impl Checker<'_> {
    fn status(&self, x: &Ident) -> Status {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == x)
            .map(|(_, s)| *s)
            .unwrap_or(Status::Other)
    }

    fn offend(&mut self, call: String, index: String, reason: &str) {
        self.offenders.push(StructOffender {
            call,
            index,
            reason: reason.to_string(),
        });
    }

    fn expr(&mut self, e: &IndexExpr) {
        match e {
            IndexExpr::Lit(_) | IndexExpr::Var(_) | IndexExpr::StreamVar(_) => {}
            IndexExpr::Builtin(_, args) => args.iter().for_each(|a| self.expr(a)),
            IndexExpr::Apply(f, args) => {
                if let FunRef::Builtin { captured, .. } = f {
                    captured.iter().for_each(|c| self.expr(c));
                }
                args.iter().for_each(|a| self.expr(a));
            }
            IndexExpr::MatchIndex {
                scrutinee,
                zero,
                pred,
                succ,
            } => {
                self.expr(scrutinee);
                self.expr(zero);
                let status = match &**scrutinee {
                    IndexExpr::Var(p) => match self.status(p) {
                        Status::Index | Status::Smaller => Status::Smaller,
                        Status::Other => Status::Other,
                    },
                    _ => Status::Other,
                };
                self.scope.push((pred.clone(), status));
                self.expr(succ);
                self.scope.pop();
            }
            IndexExpr::RecCall { name, args, index } => {
                args.iter().for_each(|a| self.arg(a));
                self.expr(index);
                if name == &self.def.name {
                    let ok = matches!(&**index, IndexExpr::Var(v) if self.status(v) == Status::Smaller);
                    if !ok {
                        let reason = match &**index {
                            IndexExpr::Var(v) if self.status(v) == Status::Index => {
                                "index is the parameter itself, not a predecessor"
                            }
                            IndexExpr::Var(_) => "index variable is not a predecessor of the index parameter",
                            _ => "index is not a variable bound by an index match",
                        };
                        self.offend(pretty::index_expr(e), pretty::index_expr(index), reason);
                    }
                }
            }
            IndexExpr::ParamApp { index, .. } => self.expr(index),
            IndexExpr::Head(s) | IndexExpr::Tail(s) => self.expr(s),
            IndexExpr::Cons(h, t) => {
                self.expr(h);
                self.expr(t);
            }
            IndexExpr::MatchStream {
                scrutinee,
                head,
                tail,
                body,
            } => {
                self.expr(scrutinee);
                self.scope.push((head.clone(), Status::Other));
                self.scope.push((tail.clone(), Status::Other));
                self.expr(body);
                self.scope.truncate(self.scope.len() - 2);
            }
            IndexExpr::Interfere {
                scalar_args,
                stream_args,
                ..
            } => {
                scalar_args.iter().for_each(|a| self.arg(a));
                stream_args.iter().for_each(|s| self.expr(s));
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

    fn arg(&mut self, a: &CallArg) {
        match a {
            CallArg::Scalar(e) | CallArg::Stream(e) => self.expr(e),
            CallArg::Fun(FunRef::Builtin { captured, .. }) => captured.iter().for_each(|c| self.expr(c)),
            CallArg::Fun(FunRef::Param(_)) => {}
            CallArg::Indexed(f) => self.fun(f),
        }
    }

    fn fun(&mut self, f: &IndexFun) {
        match f {
            IndexFun::Shifted {
                base: FunBase::Rec { name, args },
                ..
            } => {
                args.iter().for_each(|a| self.arg(a));
                if name == &self.def.name {
                    self.offend(
                        pretty::index_fun_expr(f),
                        "-".into(),
                        "unapplied self reference; its indices are unconstrained",
                    );
                }
            }
            IndexFun::Shifted { .. } => {}
            IndexFun::View(s) => self.expr(s),
        }
    }
}

pub fn check_structural(def: &IndexDef) -> StructReport {
    let mut c = Checker {
        def,
        scope: vec![(def.index_param.clone(), Status::Index)],
        offenders: Vec::new(),
    };
    c.expr(&def.body);
    StructReport {
        def: def.name.clone(),
        structural: c.offenders.is_empty(),
        offenders: c.offenders,
    }
}
