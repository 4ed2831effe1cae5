//! Built-in lemmas and the example programs, with their expected behaviour.
//!
//! The programs live in `corpus/*.strm` at the repository root, next to a
//! `manifest.json` of expectations; both are embedded at build time.

use std::sync::OnceLock;

use serde::Deserialize;

use crate::ast::{Scalar, SurfaceDef};
use crate::eval::ArgSpec;
use crate::guard::Guardedness;
use crate::parser::{parse_program, Program};
use crate::transform::FormShiftLemma;

/// Form-shifting lemmas for `map` and `zipWith`. There is none for `merge`.
pub fn builtin_lemmas() -> Vec<FormShiftLemma> {
    vec![FormShiftLemma::map(), FormShiftLemma::zip_with()]
}

const MANIFEST: &str = include_str!("../../../corpus/manifest.json");

const FILES: &[(&str, &str)] = &[
    ("zeroes.strm", include_str!("../../../corpus/zeroes.strm")),
    ("nums.strm", include_str!("../../../corpus/nums.strm")),
    ("map.strm", include_str!("../../../corpus/map.strm")),
    ("zipWith.strm", include_str!("../../../corpus/zipWith.strm")),
    ("nats.strm", include_str!("../../../corpus/nats.strm")),
    ("fib.strm", include_str!("../../../corpus/fib.strm")),
    ("dTimes.strm", include_str!("../../../corpus/dTimes.strm")),
    ("hamming.strm", include_str!("../../../corpus/hamming.strm")),
    ("bad.strm", include_str!("../../../corpus/bad.strm")),
    ("corrupted.strm", include_str!("../../../corpus/corrupted.strm")),
    ("golden/nats.derived", include_str!("../../../corpus/golden/nats.derived")),
    ("golden/fib1.derived", include_str!("../../../corpus/golden/fib1.derived")),
    ("golden/map.derived", include_str!("../../../corpus/golden/map.derived")),
    ("golden/zipWith.derived", include_str!("../../../corpus/golden/zipWith.derived")),
    ("golden/zeroes.derived", include_str!("../../../corpus/golden/zeroes.derived")),
    ("golden/dTimes.derived", include_str!("../../../corpus/golden/dTimes.derived")),
];

/// Contents of an embedded corpus file, by path relative to `corpus/`.
pub fn corpus_file(path: &str) -> Option<&'static str> {
    FILES.iter().find(|(p, _)| *p == path).map(|(_, s)| *s)
}

#[derive(Deserialize)]
struct Manifest {
    version: u32,
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
struct RawEntry {
    name: String,
    file: String,
    def: String,
    args: Vec<String>,
    class: String,
    interferers: Vec<String>,
    transform: String,
    #[serde(default)]
    golden: Option<String>,
    #[serde(default)]
    oracle_error: Option<String>,
    #[serde(default = "yes")]
    structural: bool,
    prefix: Vec<i64>,
    check_len: usize,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub file: &'static str,
    /// The definition under test (`H` for the Hamming entry).
    pub def: &'static str,
    /// Arguments as accepted by [`ArgSpec`]'s parser.
    pub args: Vec<&'static str>,
    pub class: Guardedness,
    pub interferers: Vec<&'static str>,
    /// `None` when the transformation is expected to succeed, else the error code.
    pub transform_error: Option<&'static str>,
    /// Expected derived definition, as `derived …` source.
    pub golden: Option<&'static str>,
    /// Expected error code when unfolding the equation.
    pub oracle_error: Option<&'static str>,
    /// Whether the derived definition is expected to pass the structural check.
    pub structural: bool,
    /// Hand-computed leading elements.
    pub prefix: Vec<Scalar>,
    /// Length on which derived and oracle prefixes are compared.
    pub check_len: usize,
}

impl CorpusEntry {
    pub fn source(&self) -> &'static str {
        corpus_file(self.file).expect("manifest names an embedded file")
    }

    pub fn program(&self) -> Program {
        parse_program(self.source()).expect("corpus files parse")
    }

    pub fn surface_def(&self) -> SurfaceDef {
        self.program().env.surface[self.def].clone()
    }

    pub fn arg_specs(&self) -> Vec<ArgSpec> {
        self.args
            .iter()
            .map(|a| a.parse().expect("corpus arguments parse"))
            .collect()
    }

    /// The golden derived definition parsed against this entry's program.
    pub fn golden_program(&self) -> Option<Program> {
        let golden = self.golden?;
        Some(parse_program(&format!("{}\n\n{}", self.source(), golden)).expect("golden files parse"))
    }
}

fn leak(s: String) -> &'static str {
    Box::leak(s.into_boxed_str())
}

fn parse_class(label: &str) -> Guardedness {
    [Guardedness::Guarded, Guardedness::NonGuardedStar, Guardedness::NonGuardedStarStar]
        .into_iter()
        .find(|g| g.label() == label)
        .unwrap_or_else(|| panic!("unknown class `{label}` in manifest"))
}

/// The corpus, in manifest order.
pub fn corpus() -> &'static [CorpusEntry] {
    static CORPUS: OnceLock<Vec<CorpusEntry>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let m: Manifest = serde_json::from_str(MANIFEST).expect("manifest is valid JSON");
        assert_eq!(m.version, 1, "unsupported manifest version");
        m.entries
            .into_iter()
            .map(|e| CorpusEntry {
                name: leak(e.name),
                file: leak(e.file),
                def: leak(e.def),
                args: e.args.into_iter().map(leak).collect(),
                class: parse_class(&e.class),
                interferers: e.interferers.into_iter().map(leak).collect(),
                transform_error: (e.transform != "ok").then(|| leak(e.transform)),
                golden: e.golden.map(|g| corpus_file(&g).expect("golden file is embedded")),
                oracle_error: e.oracle_error.map(leak),
                structural: e.structural,
                prefix: e.prefix.into_iter().map(Scalar::from).collect(),
                check_len: e.check_len,
            })
            .collect()
    })
}

pub fn entry(name: &str) -> Option<&'static CorpusEntry> {
    corpus().iter().find(|e| e.name == name)
}
