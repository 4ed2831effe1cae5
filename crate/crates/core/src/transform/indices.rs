//! Index normalization: inside `match p with … | S q => b end`, the index
//! `1 + q` in `b` is `p`. Rewriting such indices is what turns `fib (1 + q)`
//! into the structurally smaller `fib p`.

use crate::ast::{CallArg, FunRef, Ident, IndexDef, IndexExpr, IndexFun, Op, Scalar};

enum Fact {
    /// `pred + 1 = parent`
    Succ { pred: Ident, parent: Ident },
    /// A binder that hides every outer fact about this name.
    Kill(Ident),
}

#[derive(Default)]
struct Facts(Vec<Fact>);

impl Facts {
    fn parent_of(&self, q: &Ident) -> Option<Ident> {
        let mut killed: Vec<&Ident> = Vec::new();
        for f in self.0.iter().rev() {
            match f {
                Fact::Kill(x) if x == q => return None,
                Fact::Kill(x) => killed.push(x),
                Fact::Succ { pred, parent } if pred == q => {
                    return (!killed.contains(&parent)).then(|| parent.clone());
                }
                Fact::Succ { .. } => {}
            }
        }
        None
    }

    /// `k + q` with `k ≥ 1` and `q + 1 = p` becomes `(k - 1) + p`, repeatedly.
    fn reduce(&self, e: &IndexExpr) -> Option<IndexExpr> {
        let (mut k, mut q) = match e {
            IndexExpr::Builtin(Op::Plus, args) => match (&args[0], &args[1]) {
                (IndexExpr::Lit(c), IndexExpr::Var(q)) => (c.to_index()?, q.clone()),
                _ => return None,
            },
            IndexExpr::Builtin(Op::Succ, args) => match &args[0] {
                IndexExpr::Var(q) => (1, q.clone()),
                _ => return None,
            },
            _ => return None,
        };
        let mut changed = false;
        while k > 0 {
            match self.parent_of(&q) {
                Some(p) => {
                    q = p;
                    k -= 1;
                    changed = true;
                }
                None => break,
            }
        }
        if !changed {
            return None;
        }
        Some(if k == 0 {
            IndexExpr::Var(q)
        } else {
            IndexExpr::Builtin(Op::Plus, vec![IndexExpr::Lit(Scalar::from(k)), IndexExpr::Var(q)])
        })
    }

    fn index(&mut self, e: &mut IndexExpr) -> bool {
        let mut changed = self.expr(e);
        if let Some(r) = self.reduce(e) {
            *e = r;
            changed = true;
        }
        changed
    }

    fn scoped(&mut self, binders: &[&Ident], fact: Option<Fact>, f: impl FnOnce(&mut Self) -> bool) -> bool {
        let mark = self.0.len();
        for b in binders {
            self.0.push(Fact::Kill((*b).clone()));
        }
        self.0.extend(fact);
        let r = f(self);
        self.0.truncate(mark);
        r
    }

    fn expr(&mut self, e: &mut IndexExpr) -> bool {
        match e {
            IndexExpr::Lit(_) | IndexExpr::Var(_) | IndexExpr::StreamVar(_) => false,
            IndexExpr::Builtin(_, args) => self.all(args),
            IndexExpr::Apply(f, args) => self.funref(f) | self.all(args),
            IndexExpr::MatchIndex {
                scrutinee,
                zero,
                pred,
                succ,
            } => {
                let mut changed = self.index(scrutinee) | self.expr(zero);
                let fact = match &**scrutinee {
                    IndexExpr::Var(p) if p != pred => Some(Fact::Succ {
                        pred: pred.clone(),
                        parent: p.clone(),
                    }),
                    _ => None,
                };
                let pred = pred.clone();
                changed |= self.scoped(&[&pred], fact, |s| s.expr(succ));
                changed
            }
            IndexExpr::RecCall { args, index, .. } => self.args(args) | self.index(index),
            IndexExpr::ParamApp { index, .. } => self.index(index),
            IndexExpr::Head(s) | IndexExpr::Tail(s) => self.expr(s),
            IndexExpr::Cons(h, t) => self.expr(h) | self.expr(t),
            IndexExpr::MatchStream {
                scrutinee,
                head,
                tail,
                body,
            } => {
                let changed = self.expr(scrutinee);
                let (head, tail) = (head.clone(), tail.clone());
                changed | self.scoped(&[&head, &tail], None, |s| s.expr(body))
            }
            IndexExpr::Interfere {
                scalar_args,
                stream_args,
                ..
            } => self.args(scalar_args) | self.all(stream_args),
            IndexExpr::Nth { stream, index } => self.expr(stream) | self.index(index),
            IndexExpr::StrOff(f) => self.fun(f),
            IndexExpr::App(f, i) => self.fun(f) | self.index(i),
        }
    }

    fn all(&mut self, es: &mut [IndexExpr]) -> bool {
        es.iter_mut().fold(false, |acc, e| self.expr(e) | acc)
    }

    fn args(&mut self, args: &mut [CallArg]) -> bool {
        args.iter_mut().fold(false, |acc, a| {
            let c = match a {
                CallArg::Scalar(e) | CallArg::Stream(e) => self.expr(e),
                CallArg::Fun(f) => self.funref(f),
                CallArg::Indexed(f) => self.fun(f),
            };
            c | acc
        })
    }

    fn fun(&mut self, f: &mut IndexFun) -> bool {
        match f {
            IndexFun::Shifted {
                base: crate::ast::FunBase::Rec { args, .. },
                ..
            } => self.args(args),
            IndexFun::Shifted { .. } => false,
            IndexFun::View(s) => self.expr(s),
        }
    }

    fn funref(&mut self, f: &mut FunRef<IndexExpr>) -> bool {
        match f {
            FunRef::Builtin { captured, .. } => self.all(captured),
            FunRef::Param(_) => false,
        }
    }
}

/// Normalizes index positions of an expression; returns whether anything changed.
pub fn normalize_index_expr(e: &mut IndexExpr) -> bool {
    Facts::default().expr(e)
}

pub fn normalize_indices(def: &IndexDef) -> IndexDef {
    let mut out = def.clone();
    normalize_index_expr(&mut out.body);
    out
}
