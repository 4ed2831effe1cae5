//! JSON reports (see `schemas/report.schema.json`) and their text renderings.

use std::fmt::Write as _;

use corec_core::eval::VerifyReport;
use corec_core::guard::GuardReport;
use corec_core::termination::StructReport;
use corec_core::transform::RewriteTrace;
use corec_core::{Diagnostic, Ident, Scalar};
use serde::Serialize;

#[derive(Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Report {
    Check {
        file: String,
        definitions: Vec<GuardReport>,
    },
    Transform {
        name: Ident,
        derived: String,
        structural: StructReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        trace: Option<RewriteTrace>,
    },
    Explain {
        name: Ident,
        guardedness: GuardReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        derived: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        structural: Option<StructReport>,
        #[serde(skip_serializing_if = "Option::is_none")]
        trace: Option<RewriteTrace>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<ErrorBody>,
    },
    Eval {
        name: Ident,
        args: Vec<String>,
        source: &'static str,
        #[serde(skip_serializing_if = "Option::is_none")]
        index: Option<u64>,
        values: Vec<Scalar>,
    },
    Compare {
        report: VerifyReport,
    },
    /// Parse or validation diagnostics; serialized with the command that failed.
    #[serde(untagged)]
    Diagnostics {
        command: &'static str,
        diagnostics: Vec<Diagnostic>,
    },
    #[serde(untagged)]
    Error {
        command: &'static str,
        error: ErrorBody,
    },
}

#[derive(Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missing_lemmas: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<String>,
}

impl ErrorBody {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        ErrorBody {
            code,
            message: message.into(),
            missing_lemmas: None,
            residual: None,
        }
    }
}

pub fn render_trace(trace: &RewriteTrace) -> String {
    let mut out = format!("trace ({} steps):\n", trace.steps.len());
    for (i, step) in trace.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>4}. [{}] {}\n        ~> {}",
            i + 1,
            step.rule,
            corec_core::pretty::index_expr(&step.before),
            corec_core::pretty::index_expr(&step.after)
        );
    }
    out
}

pub fn render_structural(report: &StructReport) -> String {
    if report.structural {
        return format!("{}: structurally recursive\n", report.def);
    }
    let mut out = format!("{}: not structurally recursive\n", report.def);
    for o in &report.offenders {
        let _ = writeln!(out, "  {} (index `{}`): {}", o.call, o.index, o.reason);
    }
    out
}
