//! `corec`: classify, transform, evaluate and check stream equations.
//!
//! Exit codes: 0 success, 1 other failure (including non-guarded(*) under
//! `check`), 2 parse error, 3 residual encoding, 4 rewrite fuel exhausted,
//! 5 divergence from the oracle, 6 derived definition not structural.

mod report;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corec_core::ast::Environment;
use corec_core::eval::{nth_eval, oracle_prefix, stroff_prefix, verify_equation, ArgSpec, EvalError, VerifyOptions};
use corec_core::guard::{classify_guardedness, Guardedness};
use corec_core::termination::check_structural;
use corec_core::transform::{derive_with, register_lemma, DeriveOptions, TransformError, DEFAULT_FUEL, DEFAULT_SEED};
use corec_core::{parse_file, pretty, Ident};

use report::{ErrorBody, Report};

#[derive(Parser)]
#[command(name = "corec", version, about = "Turn non-guarded stream equations into structurally recursive functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Emit a JSON report.
    #[arg(long, global = true)]
    json: bool,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Seed for randomized lemma validation.
    #[arg(long, global = true, env = "COREC_SEED", value_parser = parse_seed, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Classify every definition of a file.
    Check {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Derive the indexed function of a definition.
    Transform {
        file: PathBuf,
        name: String,
        /// Include the rewrite trace.
        #[arg(long)]
        trace: bool,
        /// Maximum number of rewrite steps.
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Classification, rewrite steps and structural check, step by step.
    Explain {
        file: PathBuf,
        name: String,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the derived function (or the equation itself with --oracle).
    Eval {
        file: PathBuf,
        name: String,
        /// Argument: integer, function (`S`, `(* 2)`), generator `[1,2|3]`, or stream name.
        #[arg(long = "arg", value_name = "SPEC")]
        args: Vec<ArgSpec>,
        /// Value at this index.
        #[arg(long, conflicts_with = "prefix", required_unless_present = "prefix")]
        n: Option<u64>,
        /// The first L values.
        #[arg(long, value_name = "L")]
        prefix: Option<usize>,
        /// Disable memoization of recursive calls.
        #[arg(long)]
        no_memo: bool,
        /// Unfold the surface equation instead of using the derived function.
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the derived function with the unfolded equation on a prefix.
    Compare {
        file: PathBuf,
        name: String,
        #[arg(long = "arg", value_name = "SPEC")]
        args: Vec<ArgSpec>,
        #[arg(long, default_value_t = 100)]
        len: usize,
        /// Unfolding budget for the oracle (default: 1000 per element).
        #[arg(long)]
        fuel: Option<u64>,
        #[arg(long)]
        no_memo: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim().replace('_', "");
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed `{s}`: {e}"))
}

/// Exit codes.
mod exit {
    pub const OK: u8 = 0;
    pub const FAIL: u8 = 1;
    pub const PARSE: u8 = 2;
    pub const RESIDUAL: u8 = 3;
    pub const FUEL: u8 = 4;
    pub const DIVERGENCE: u8 = 5;
    pub const NONSTRUCTURAL: u8 = 6;
}

/// What a command produced: the report, its human rendering, and the exit code.
struct Outcome {
    report: Report,
    text: String,
    code: u8,
}

impl Outcome {
    fn error(command: &'static str, code: u8, body: ErrorBody) -> Self {
        let text = format!("error[{}]: {}\n", body.code, body.message);
        Outcome {
            report: Report::Error { command, error: body },
            text,
            code,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, outcome) = match cli.command {
        Command::Check { file, common } => {
            let o = cmd_check(&file);
            (common, o)
        }
        Command::Transform {
            file,
            name,
            trace,
            fuel,
            common,
        } => {
            let o = cmd_transform(&file, &name, trace, fuel, common.seed);
            (common, o)
        }
        Command::Explain {
            file,
            name,
            fuel,
            common,
        } => {
            let o = cmd_explain(&file, &name, fuel, common.seed);
            (common, o)
        }
        Command::Eval {
            file,
            name,
            args,
            n,
            prefix,
            no_memo,
            oracle,
            common,
        } => {
            let o = cmd_eval(&file, &name, &args, n, prefix, !no_memo, oracle, common.seed);
            (common, o)
        }
        Command::Compare {
            file,
            name,
            args,
            len,
            fuel,
            no_memo,
            common,
        } => {
            let o = cmd_compare(&file, &name, &args, len, fuel, !no_memo, common.seed);
            (common, o)
        }
    };
    let body = if common.json {
        serde_json::to_string_pretty(&outcome.report).expect("reports serialize") + "\n"
    } else {
        outcome.text
    };
    let written = match &common.out {
        Some(path) => std::fs::write(path, body.as_bytes()),
        None => {
            let mut out = if !matches!(outcome.report, Report::Error { .. } | Report::Diagnostics { .. }) || common.json {
                Box::new(std::io::stdout()) as Box<dyn std::io::Write>
            } else {
                Box::new(std::io::stderr())
            };
            out.write_all(body.as_bytes())
        }
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(exit::FAIL);
    }
    ExitCode::from(outcome.code)
}

/// Parses the file and registers its lemmas.
fn load(command: &'static str, file: &Path, seed: u64) -> Result<Environment, Outcome> {
    let program = parse_file(file).map_err(|diags| {
        let text = diags.iter().map(|d| format!("{d}\n")).collect();
        Outcome {
            report: Report::Diagnostics {
                command,
                diagnostics: diags,
            },
            text,
            code: exit::PARSE,
        }
    })?;
    let mut env = program.env;
    for lemma in program.lemmas {
        env = register_lemma(&env, lemma, seed).map_err(|e| {
            Outcome::error(
                command,
                exit::FAIL,
                ErrorBody::new(e.code(), e.to_string()),
            )
        })?;
    }
    Ok(env)
}

fn unknown(command: &'static str, name: &str) -> Outcome {
    Outcome::error(
        command,
        exit::FAIL,
        ErrorBody::new("E-UNBOUND", format!("no definition named `{name}`")),
    )
}

fn transform_failure(command: &'static str, e: &TransformError) -> Outcome {
    let code = match e {
        TransformError::Residual { .. } => exit::RESIDUAL,
        TransformError::Fuel { .. } => exit::FUEL,
        TransformError::Unknown(_) => exit::FAIL,
    };
    let mut body = ErrorBody::new(e.code(), e.to_string());
    if let TransformError::Residual {
        missing_lemmas,
        residual,
        ..
    } = e
    {
        body.missing_lemmas = Some(missing_lemmas.iter().map(ToString::to_string).collect());
        body.residual = Some(residual.clone());
    }
    Outcome::error(command, code, body)
}

fn eval_failure(command: &'static str, e: &EvalError) -> Outcome {
    Outcome::error(command, exit::FAIL, ErrorBody::new(e.code(), e.to_string()))
}

fn cmd_check(file: &Path) -> Outcome {
    let env = match load("check", file, DEFAULT_SEED) {
        Ok(env) => env,
        Err(o) => return o,
    };
    let reports: Vec<_> = env.surface.values().map(|d| classify_guardedness(d, &env)).collect();
    let mut text = String::new();
    for r in &reports {
        let _ = writeln!(text, "{}: {}", r.def, r.class);
        for o in &r.offenders {
            let via = o
                .interferer
                .as_ref()
                .map(|i| format!(" (interferer: {i})"))
                .unwrap_or_default();
            let _ = writeln!(text, "  {} at {}{via}", o.call_path, o.span);
        }
    }
    let star = reports.iter().any(|r| r.class == Guardedness::NonGuardedStar);
    Outcome {
        report: Report::Check {
            file: file.display().to_string(),
            definitions: reports,
        },
        text,
        code: if star { exit::FAIL } else { exit::OK },
    }
}

fn cmd_transform(file: &Path, name: &str, trace: bool, fuel: u64, seed: u64) -> Outcome {
    let env = match load("transform", file, seed) {
        Ok(env) => env,
        Err(o) => return o,
    };
    let Some(def) = env.surface_def(name) else {
        return unknown("transform", name);
    };
    let mut opts = DeriveOptions {
        fuel,
        ..DeriveOptions::default()
    };
    let d = match derive_with(def, &env, &mut opts) {
        Ok(d) => d,
        Err(e) => return transform_failure("transform", &e),
    };
    let structural = check_structural(&d.def);
    let mut text = pretty::index_def(&d.def) + "\n";
    if trace {
        text.push('\n');
        text.push_str(&report::render_trace(&d.trace));
    }
    let code = if structural.structural {
        exit::OK
    } else {
        text.push_str(&report::render_structural(&structural));
        exit::NONSTRUCTURAL
    };
    Outcome {
        report: Report::Transform {
            name: d.def.name.clone(),
            derived: pretty::index_def(&d.def),
            structural,
            trace: trace.then(|| d.trace.clone()),
        },
        text,
        code,
    }
}

fn cmd_explain(file: &Path, name: &str, fuel: u64, seed: u64) -> Outcome {
    let env = match load("explain", file, seed) {
        Ok(env) => env,
        Err(o) => return o,
    };
    let Some(def) = env.surface_def(name) else {
        return unknown("explain", name);
    };
    let guard = classify_guardedness(def, &env);
    let mut text = String::new();
    let _ = writeln!(text, "equation:  {}", pretty::surface_def(def));
    let _ = writeln!(text, "class:     {}", guard.class);
    for o in &guard.offenders {
        let via = o.interferer.as_ref().map(|i| format!(", interferer {i}")).unwrap_or_default();
        let _ = writeln!(text, "  offending call {} [{}{via}]", o.call_path, o.class);
    }
    let mut opts = DeriveOptions {
        fuel,
        ..DeriveOptions::default()
    };
    let derivation = derive_with(def, &env, &mut opts);
    let (derived, structural, trace, code) = match &derivation {
        Ok(d) => {
            text.push('\n');
            text.push_str(&report::render_trace(&d.trace));
            let s = check_structural(&d.def);
            let _ = writeln!(text, "\nderived:   {}", pretty::index_def(&d.def));
            if d.raw != d.def {
                let _ = writeln!(text, "before index normalization: {}", pretty::index_def(&d.raw));
                text.push_str("  structural check: ");
                text.push_str(&report::render_structural(&check_structural(&d.raw)));
                text.push_str("after index normalization:\n");
            }
            text.push_str("  structural check: ");
            text.push_str(&report::render_structural(&s));
            let code = if s.structural { exit::OK } else { exit::NONSTRUCTURAL };
            (Some(pretty::index_def(&d.def)), Some(s), Some(d.trace.clone()), code)
        }
        Err(e) => {
            let _ = writeln!(text, "\ntransform failed: [{}] {e}", e.code());
            if let TransformError::Residual { residual, .. } = e {
                let _ = writeln!(text, "stuck at:  {residual}");
            }
            let code = match e {
                TransformError::Residual { .. } => exit::RESIDUAL,
                TransformError::Fuel { .. } => exit::FUEL,
                TransformError::Unknown(_) => exit::FAIL,
            };
            (None, None, None, code)
        }
    };
    Outcome {
        report: Report::Explain {
            name: def.name.clone(),
            guardedness: guard,
            derived,
            structural,
            trace,
            error: derivation.err().map(|e| ErrorBody::new(e.code(), e.to_string())),
        },
        text,
        code,
    }
}

/// Adds derived definitions for every surface definition the file does not already
/// provide one for; returns the failure for `name`, if any.
fn with_derived(env: &Environment, name: &str) -> Result<Environment, TransformError> {
    let mut out = env.clone();
    let mut target_error = None;
    let defs: Vec<_> = env.surface.values().cloned().collect();
    for def in &defs {
        if out.derived_def(def.name.as_str()).is_some() {
            continue;
        }
        match derive_with(def, &out, &mut DeriveOptions::default()) {
            Ok(d) => {
                out.insert_derived(d.def);
            }
            Err(e) if def.name.as_str() == name => target_error = Some(e),
            Err(_) => {}
        }
    }
    match target_error {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    file: &Path,
    name: &str,
    args: &[ArgSpec],
    n: Option<u64>,
    prefix: Option<usize>,
    memo: bool,
    oracle: bool,
    seed: u64,
) -> Outcome {
    let env = match load("eval", file, seed) {
        Ok(env) => env,
        Err(o) => return o,
    };
    if env.surface_def(name).is_none() {
        return unknown("eval", name);
    }
    let env = if oracle {
        env
    } else {
        match with_derived(&env, name) {
            Ok(env) => env,
            Err(e) => return transform_failure("eval", &e),
        }
    };
    let values = match (n, oracle) {
        (Some(i), false) => nth_eval(&env, name, args, i, memo).map(|v| vec![v]),
        (Some(i), true) => {
            let len = usize::try_from(i).unwrap_or(usize::MAX).saturating_add(1);
            oracle_prefix(&env, name, args, len, None).map(|t| t.values.into_iter().skip(len - 1).collect())
        }
        (None, false) => stroff_prefix(&env, name, args, prefix.unwrap_or(0), memo).map(|t| t.values),
        (None, true) => oracle_prefix(&env, name, args, prefix.unwrap_or(0), None).map(|t| t.values),
    };
    let values = match values {
        Ok(v) => v,
        Err(e) => return eval_failure("eval", &e),
    };
    let text = values.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ") + "\n";
    Outcome {
        report: Report::Eval {
            name: Ident::new(name),
            args: args.iter().map(ToString::to_string).collect(),
            source: if oracle { "oracle" } else { "derived" },
            index: n,
            values,
        },
        text,
        code: exit::OK,
    }
}

fn cmd_compare(
    file: &Path,
    name: &str,
    args: &[ArgSpec],
    len: usize,
    fuel: Option<u64>,
    memo: bool,
    seed: u64,
) -> Outcome {
    let env = match load("compare", file, seed) {
        Ok(env) => env,
        Err(o) => return o,
    };
    if env.surface_def(name).is_none() {
        return unknown("compare", name);
    }
    let provided = env.derived_def(name).is_some();
    let env = match with_derived(&env, name) {
        Ok(env) => env,
        Err(e) => return transform_failure("compare", &e),
    };
    let report = match verify_equation(&env, name, args, len, VerifyOptions { memo, fuel }) {
        Ok(r) => r,
        Err(e) => return eval_failure("compare", &e),
    };
    let source = if provided { "derived definition from the file" } else { "derived definition" };
    let (text, code) = match &report.first_divergence {
        None => (format!("equal: {source} matches the equation on {len} elements\n"), exit::OK),
        Some(d) => (
            format!(
                "diverges at index {}: {source} gives {}, the equation gives {}\n",
                d.index, d.derived, d.oracle
            ),
            exit::DIVERGENCE,
        ),
    };
    Outcome {
        report: Report::Compare { report },
        text,
        code,
    }
}
