//! Concrete syntax for both expression languages.
//!
//! Output of [`surface_def`] re-parses to an alpha-equivalent definition, and
//! normalized [`index_def`] output re-parses as a `derived` item. Encoding nodes
//! that only exist mid-rewrite print in a readable but non-parseable form
//! (`nth`, `stroff`, `[[s]]`).

use std::fmt::Write;

use crate::ast::{
    CallArg, FunBase, FunRef, IndexDef, IndexExpr, IndexFun, Op, ScalarArg, ScalarExpr,
    StreamExpr, StreamMode, SurfaceDef,
};

// Binding strength, loosest first.
const CONS: u8 = 0;
const SUM: u8 = 1;
const PROD: u8 = 2;
const APP: u8 = 3;
const ATOM: u8 = 4;

fn paren(out: &mut String, needed: bool, f: impl FnOnce(&mut String)) {
    if needed {
        out.push('(');
    }
    f(out);
    if needed {
        out.push(')');
    }
}

pub fn surface_def(def: &SurfaceDef) -> String {
    let mut out = String::new();
    out.push_str(def.name.as_str());
    for p in &def.scalar_params {
        let _ = write!(out, " {}", p.name);
    }
    for p in &def.stream_params {
        match p.mode {
            StreamMode::KeepAsStream => {
                let _ = write!(out, " ~{}", p.name);
            }
            StreamMode::ViewAsFunction => {
                let _ = write!(out, " ~fun {}", p.name);
            }
        }
    }
    out.push_str(" = ");
    stream(&mut out, &def.body, CONS);
    out
}

pub fn stream_expr(e: &StreamExpr) -> String {
    let mut out = String::new();
    stream(&mut out, e, CONS);
    out
}

pub fn scalar_expr(e: &ScalarExpr) -> String {
    let mut out = String::new();
    scalar(&mut out, e, CONS);
    out
}

fn stream(out: &mut String, e: &StreamExpr, level: u8) {
    match e {
        StreamExpr::Cons(h, t) => paren(out, level > CONS, |out| {
            scalar(out, h, SUM);
            out.push_str(" :: ");
            stream(out, t, CONS);
        }),
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
            if scalar_args.is_empty() && stream_args.is_empty() {
                out.push_str(name.as_str());
                return;
            }
            paren(out, level > APP, |out| {
                out.push_str(name.as_str());
                for a in scalar_args {
                    out.push(' ');
                    scalar_arg(out, a);
                }
                for a in stream_args {
                    out.push(' ');
                    stream(out, a, ATOM);
                }
            })
        }
        StreamExpr::Var(v) => out.push_str(v.as_str()),
        StreamExpr::Tail(t) => paren(out, level > APP, |out| {
            out.push_str("tl ");
            stream(out, t, ATOM);
        }),
        StreamExpr::Match {
            scrutinee,
            head,
            tail,
            body,
        } => {
            out.push_str("match ");
            stream(out, scrutinee, CONS);
            let _ = write!(out, " with {head} :: {tail} -> ");
            stream(out, body, CONS);
            out.push_str(" end");
        }
    }
}

fn fun_ref<E>(out: &mut String, f: &FunRef<E>, mut item: impl FnMut(&mut String, &E)) {
    match f {
        FunRef::Param(p) => out.push_str(p.as_str()),
        FunRef::Builtin { op, captured } if captured.is_empty() => out.push_str(op.name()),
        FunRef::Builtin { op, captured } => {
            out.push('(');
            out.push_str(op.name());
            for c in captured {
                out.push(' ');
                item(out, c);
            }
            out.push(')');
        }
    }
}

fn scalar_arg(out: &mut String, a: &ScalarArg) {
    match a {
        ScalarArg::Value(e) => scalar(out, e, ATOM),
        ScalarArg::Fun(f) => fun_ref(out, f, |out, c| scalar(out, c, ATOM)),
    }
}

fn scalar(out: &mut String, e: &ScalarExpr, level: u8) {
    match e {
        ScalarExpr::Lit(v) => {
            let neg = v.is_negative();
            paren(out, neg && level >= APP, |out| {
                let _ = write!(out, "{v}");
            })
        }
        ScalarExpr::Var(v) => out.push_str(v.as_str()),
        ScalarExpr::Builtin(Op::Plus, args) if args.len() == 2 => paren(out, level > SUM, |out| {
            scalar(out, &args[0], SUM);
            out.push_str(" + ");
            scalar(out, &args[1], PROD);
        }),
        ScalarExpr::Builtin(Op::Times, args) if args.len() == 2 => {
            paren(out, level > PROD, |out| {
                scalar(out, &args[0], PROD);
                out.push_str(" * ");
                scalar(out, &args[1], APP);
            })
        }
        ScalarExpr::Builtin(op, args) => paren(out, level > APP && !args.is_empty(), |out| {
            out.push_str(op.name());
            for a in args {
                out.push(' ');
                scalar(out, a, ATOM);
            }
        }),
        ScalarExpr::Apply(f, args) => paren(out, level > APP && !args.is_empty(), |out| {
            out.push_str(f.as_str());
            for a in args {
                out.push(' ');
                scalar(out, a, ATOM);
            }
        }),
        ScalarExpr::Head(s) => paren(out, level > APP, |out| {
            out.push_str("hd ");
            stream(out, s, ATOM);
        }),
    }
}

// ---------------------------------------------------------------------------

/// `derived name params index = body`, the form accepted back by the parser.
pub fn index_def(def: &IndexDef) -> String {
    let mut out = String::from("derived ");
    out.push_str(&index_def_header(def));
    out.push_str(" = ");
    index(&mut out, &def.body, CONS);
    out
}

/// `name params index`, with stream-mode annotations.
pub fn index_def_header(def: &IndexDef) -> String {
    let mut out = String::new();
    out.push_str(def.name.as_str());
    for p in &def.scalar_params {
        let _ = write!(out, " {}", p.name);
    }
    for p in &def.stream_params {
        match p.mode {
            StreamMode::KeepAsStream => {
                let _ = write!(out, " ~{}", p.name);
            }
            StreamMode::ViewAsFunction => {
                let _ = write!(out, " ~fun {}", p.name);
            }
        }
    }
    let _ = write!(out, " {}", def.index_param);
    out
}

pub fn index_expr(e: &IndexExpr) -> String {
    let mut out = String::new();
    index(&mut out, e, CONS);
    out
}

pub fn index_fun_expr(f: &IndexFun) -> String {
    let mut out = String::new();
    index_fun(&mut out, f);
    out
}

fn index_fun(out: &mut String, f: &IndexFun) {
    match f {
        IndexFun::Shifted {
            base: FunBase::Param(p),
            shift: 0,
        } => out.push_str(p.as_str()),
        IndexFun::Shifted {
            base: FunBase::Param(p),
            shift,
        } => {
            let _ = write!(out, "({p} >> {shift})");
        }
        IndexFun::Shifted {
            base: FunBase::Rec { name, args },
            shift,
        } => {
            out.push('(');
            out.push_str(name.as_str());
            for a in args {
                out.push(' ');
                call_arg(out, a);
            }
            let _ = write!(out, " >> {shift})");
        }
        IndexFun::View(s) => {
            out.push_str("[[");
            index(out, s, CONS);
            out.push_str("]]");
        }
    }
}

fn call_arg(out: &mut String, a: &CallArg) {
    match a {
        CallArg::Scalar(e) | CallArg::Stream(e) => index(out, e, ATOM),
        CallArg::Fun(f) => fun_ref(out, f, |out, c| index(out, c, ATOM)),
        CallArg::Indexed(f) => index_fun(out, f),
    }
}

fn app_like(out: &mut String, level: u8, head: &str, rest: impl FnOnce(&mut String)) {
    paren(out, level > APP, |out| {
        out.push_str(head);
        rest(out);
    })
}

fn index(out: &mut String, e: &IndexExpr, level: u8) {
    match e {
        IndexExpr::Lit(v) => {
            let neg = v.is_negative();
            paren(out, neg && level >= APP, |out| {
                let _ = write!(out, "{v}");
            })
        }
        IndexExpr::Var(v) | IndexExpr::StreamVar(v) => out.push_str(v.as_str()),
        IndexExpr::Builtin(Op::Plus, args) if args.len() == 2 => paren(out, level > SUM, |out| {
            index(out, &args[0], SUM);
            out.push_str(" + ");
            index(out, &args[1], PROD);
        }),
        IndexExpr::Builtin(Op::Times, args) if args.len() == 2 => {
            paren(out, level > PROD, |out| {
                index(out, &args[0], PROD);
                out.push_str(" * ");
                index(out, &args[1], APP);
            })
        }
        IndexExpr::Builtin(op, args) => app_like(out, level, op.name(), |out| {
            for a in args {
                out.push(' ');
                index(out, a, ATOM);
            }
        }),
        IndexExpr::Apply(f, args) => paren(out, level > APP, |out| {
            fun_ref(out, f, |out, c| index(out, c, ATOM));
            for a in args {
                out.push(' ');
                index(out, a, ATOM);
            }
        }),
        IndexExpr::MatchIndex {
            scrutinee,
            zero,
            pred,
            succ,
        } => {
            out.push_str("match ");
            index(out, scrutinee, CONS);
            out.push_str(" with 0 => ");
            index(out, zero, CONS);
            let _ = write!(out, " | S {pred} => ");
            index(out, succ, CONS);
            out.push_str(" end");
        }
        IndexExpr::RecCall {
            name,
            args,
            index: i,
        } => app_like(out, level, name.as_str(), |out| {
            for a in args {
                out.push(' ');
                call_arg(out, a);
            }
            out.push(' ');
            index(out, i, ATOM);
        }),
        IndexExpr::ParamApp { param, index: i } => app_like(out, level, param.as_str(), |out| {
            out.push(' ');
            index(out, i, ATOM);
        }),
        IndexExpr::Head(s) => app_like(out, level, "hd", |out| {
            out.push(' ');
            index(out, s, ATOM);
        }),
        IndexExpr::Tail(s) => app_like(out, level, "tl", |out| {
            out.push(' ');
            index(out, s, ATOM);
        }),
        IndexExpr::Cons(h, t) => paren(out, level > CONS, |out| {
            index(out, h, SUM);
            out.push_str(" :: ");
            index(out, t, CONS);
        }),
        IndexExpr::MatchStream {
            scrutinee,
            head,
            tail,
            body,
        } => {
            out.push_str("match ");
            index(out, scrutinee, CONS);
            let _ = write!(out, " with {head} :: {tail} => ");
            index(out, body, CONS);
            out.push_str(" end");
        }
        IndexExpr::Interfere {
            fun,
            scalar_args,
            stream_args,
        } => app_like(out, level, fun.as_str(), |out| {
            for a in scalar_args {
                out.push(' ');
                call_arg(out, a);
            }
            for s in stream_args {
                out.push(' ');
                index(out, s, ATOM);
            }
        }),
        IndexExpr::Nth { stream, index: i } => app_like(out, level, "nth", |out| {
            out.push(' ');
            index(out, i, ATOM);
            out.push(' ');
            index(out, stream, ATOM);
        }),
        IndexExpr::StrOff(f) => app_like(out, level, "stroff", |out| {
            out.push(' ');
            index_fun(out, f);
        }),
        IndexExpr::App(f, i) => paren(out, level > APP, |out| {
            index_fun(out, f);
            out.push(' ');
            index(out, i, ATOM);
        }),
    }
}
