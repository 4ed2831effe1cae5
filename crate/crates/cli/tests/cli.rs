use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn corpus(file: &str) -> String {
    root().join("corpus").join(file).display().to_string()
}

fn corec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corec"))
        .args(args)
        .env_remove("COREC_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn schema() -> jsonschema::JSONSchema {
    let text = std::fs::read_to_string(root().join("schemas/report.schema.json")).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    jsonschema::JSONSchema::compile(&schema).expect("schema compiles")
}

/// Runs with `--json`, checks the report against the schema, returns it.
fn json(args: &[&str]) -> (Value, i32) {
    let mut all = args.to_vec();
    all.push("--json");
    let o = corec(&all);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{args:?}: {e}\n{}", stdout(&o)));
    if let Err(errors) = schema().validate(&v) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("{args:?} report violates the schema: {msgs:?}\n{v:#}");
    }
    (v, code(&o))
}

fn write_temp(dir: &tempfile::TempDir, name: &str, src: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, src).unwrap();
    path.display().to_string()
}

#[test]
fn check_reports_classes() {
    let o = corec(&["check", &corpus("nats.strm")]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("nats: non-guarded(**)"), "{}", stdout(&o));
    assert!(stdout(&o).contains("interferer: map"));

    let o = corec(&["check", &corpus("map.strm")]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("map: guarded"));

    let o = corec(&["check", &corpus("bad.strm")]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("bad: non-guarded(*)"));
}

#[test]
fn missing_file_is_a_parse_error() {
    let o = corec(&["check", "missing.strm"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("E-PARSE"), "{}", stderr(&o));
    assert!(stderr(&o).contains("missing.strm"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn syntax_errors_point_at_the_source() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_temp(&dir, "broken.strm", "f = 1 ::\n");
    let o = corec(&["check", &file]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("broken.strm:"), "{}", stderr(&o));
}

#[test]
fn transform_prints_the_derived_function() {
    let o = corec(&["transform", &corpus("nats.strm"), "nats"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("derived nats n ="), "{text}");
    assert!(text.contains("S (nats p)"), "{text}");
}

#[test]
fn hamming_has_no_lemma_for_merge() {
    let o = corec(&["transform", &corpus("hamming.strm"), "H"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("no form-shifting lemma registered for: merge"), "{}", stderr(&o));
}

#[test]
fn zeroes_trace_applies_rule_2_then_1() {
    let o = corec(&["transform", &corpus("zeroes.strm"), "zeroes", "--trace"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let two = text.find("[rule 2]").expect("rule 2 in trace");
    let one = text.find("[rule 1]").expect("rule 1 in trace");
    assert!(two < one, "{text}");
}

#[test]
fn fuel_and_unknown_names() {
    let o = corec(&["transform", &corpus("nats.strm"), "nats", "--fuel", "1"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("E-FUEL"));
    let o = corec(&["transform", &corpus("nats.strm"), "nope"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("E-UNBOUND"));
}

#[test]
fn non_structural_result_has_its_own_exit_code() {
    let o = corec(&["transform", &corpus("bad.strm"), "bad"]);
    assert_eq!(code(&o), 6);
    assert!(stdout(&o).contains("not structurally recursive"), "{}", stdout(&o));
}

#[test]
fn eval_examples() {
    let o = corec(&["eval", &corpus("fib.strm"), "fib1", "--prefix", "10"]);
    assert_eq!(stdout(&o).trim(), "1 1 2 3 5 8 13 21 34 55");
    let o = corec(&["eval", &corpus("nats.strm"), "nats", "--n", "0"]);
    assert_eq!(stdout(&o).trim(), "1");
    let o = corec(&["eval", &corpus("zeroes.strm"), "zeroes", "--n", "999"]);
    assert_eq!(stdout(&o).trim(), "0");
    let o = corec(&["eval", &corpus("fib.strm"), "fib1", "--n", "20", "--no-memo"]);
    assert_eq!(stdout(&o).trim(), "10946");
    let o = corec(&["eval", &corpus("hamming.strm"), "H", "--prefix", "8", "--oracle"]);
    assert_eq!(stdout(&o).trim(), "1 2 3 4 6 8 9 12");
    let o = corec(&[
        "eval",
        &corpus("map.strm"),
        "map",
        "--arg",
        "(* 3)",
        "--arg",
        "[5|1,2]",
        "--prefix",
        "5",
    ]);
    assert_eq!(stdout(&o).trim(), "15 3 6 3 6");
}

#[test]
fn eval_errors() {
    let o = corec(&["eval", &corpus("bad.strm"), "bad", "--prefix", "3", "--oracle"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("E-UNPRODUCTIVE"), "{}", stderr(&o));
    let o = corec(&["eval", &corpus("map.strm"), "map", "--arg", "S", "--n", "0"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("E-ARG"), "{}", stderr(&o));
    // Neither --n nor --prefix.
    let o = corec(&["eval", &corpus("nats.strm"), "nats"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn compare_examples() {
    let o = corec(&["compare", &corpus("nats.strm"), "nats", "--len", "100"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = corec(&["compare", &corpus("fib.strm"), "fib1", "--len", "30"]);
    assert_eq!(code(&o), 0);
    let o = corec(&["compare", &corpus("corrupted.strm"), "nats", "--len", "20"]);
    assert_eq!(code(&o), 5);
    assert!(stdout(&o).contains("index 5"), "{}", stdout(&o));
}

#[test]
fn json_reports_follow_the_schema() {
    let (v, c) = json(&["check", &corpus("nats.strm")]);
    assert_eq!(c, 0);
    assert_eq!(v["command"], "check");
    assert_eq!(v["definitions"][0]["class"], "non-guarded(**)");

    let (v, c) = json(&["transform", &corpus("zeroes.strm"), "zeroes", "--trace"]);
    assert_eq!(c, 0);
    let rules: Vec<&str> = v["trace"]["steps"].as_array().unwrap().iter().map(|s| s["rule"].as_str().unwrap()).collect();
    assert_eq!(rules, ["2", "1", "6"]);

    let (v, c) = json(&["transform", &corpus("hamming.strm"), "H"]);
    assert_eq!(c, 3);
    assert_eq!(v["error"]["code"], "E-RESIDUAL");
    assert_eq!(v["error"]["missing_lemmas"], serde_json::json!(["merge"]));

    let (v, c) = json(&["explain", &corpus("fib.strm"), "fib1"]);
    assert_eq!(c, 0);
    assert_eq!(v["structural"]["structural"], true);

    let (v, _) = json(&["eval", &corpus("fib.strm"), "fib1", "--prefix", "5"]);
    assert_eq!(v["values"], serde_json::json!([1, 1, 2, 3, 5]));

    let (v, c) = json(&["compare", &corpus("corrupted.strm"), "nats", "--len", "20"]);
    assert_eq!(c, 5);
    assert_eq!(v["report"]["first_divergence"]["index"], 5);

    let (v, c) = json(&["check", "missing.strm"]);
    assert_eq!(c, 2);
    assert_eq!(v["diagnostics"][0]["code"], "E-PARSE");

    let (v, c) = json(&["eval", &corpus("bad.strm"), "bad", "--n", "0", "--oracle"]);
    assert_eq!(c, 1);
    assert_eq!(v["error"]["code"], "E-UNPRODUCTIVE");
}

#[test]
fn large_values_stay_exact_in_json() {
    let (v, _) = json(&["eval", &corpus("fib.strm"), "fib1", "--n", "150"]);
    // fib(151) does not fit in 64 bits; it is emitted as a digit string.
    assert_eq!(v["values"][0], "16130531424904581415797907386349");
}

#[test]
fn out_writes_the_report_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = corec(&["check", &corpus("map.strm"), "--json", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["command"], "check");
}

#[test]
fn lemmas_in_files_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_temp(
        &dir,
        "wrong.strm",
        "lemma map f ~s n = f (s (S n))\n\nnats = 1 :: map S nats\n",
    );
    let o = corec(&["transform", &file, "nats"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("E-LEMMA-FALSE"), "{}", stderr(&o));
    assert!(stderr(&o).contains("at n = "), "{}", stderr(&o));

    let file = write_temp(
        &dir,
        "twice.strm",
        "twice ~s = match s with x :: t -> x + x :: twice t end\n\n\
         lemma twice ~s n = s n + s n\n\n\
         pow = 1 :: twice pow\n",
    );
    let o = corec(&["eval", &file, "pow", "--prefix", "6"]);
    assert_eq!(stdout(&o).trim(), "1 2 4 8 16 32", "{}", stderr(&o));
}

#[test]
fn seed_flag_and_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_temp(&dir, "ok.strm", "lemma map f ~s n = f (s n)\n\nnats = 1 :: map S nats\n");
    for seed in ["1", "0xdeadbeef", "12_345"] {
        let o = corec(&["transform", &file, "nats", "--seed", seed]);
        assert_eq!(code(&o), 0, "{seed}: {}", stderr(&o));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_corec"))
        .args(["transform", &file, "nats"])
        .env("COREC_SEED", "not-a-seed")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_corec"))
        .args(["transform", &file, "nats"])
        .env("COREC_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn counterexamples_depend_only_on_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_temp(&dir, "wrong.strm", "lemma map f ~s n = f (s (S n))\n\nnats = 1 :: map S nats\n");
    let a = corec(&["transform", &file, "nats", "--seed", "7"]);
    let b = corec(&["transform", &file, "nats", "--seed", "7"]);
    assert_eq!(stderr(&a), stderr(&b));
}
