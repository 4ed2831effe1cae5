mod common;

use std::rc::Rc;

use corec_core::corpus::{corpus, entry};
use corec_core::eval::{ArgSpec, EvalError, Machine, Resolver};
use corec_core::transform::{derive, derive_with, DeriveOptions};
use corec_core::{check_structural, parse_program, Scalar};
use proptest::prelude::*;

fn check(src: &str, name: &str) -> corec_core::StructReport {
    let p = parse_program(src).unwrap_or_else(|d| panic!("{src}: {d:?}"));
    check_structural(&p.env.derived[name])
}

#[test]
fn corpus_verdicts() {
    for e in corpus().iter().filter(|e| e.transform_error.is_none()) {
        let d = derive(&e.surface_def(), &e.program().env).unwrap();
        let r = check_structural(&d.def);
        assert_eq!(r.structural, e.structural, "{}: {:?}", e.name, r.offenders);
        assert_eq!(r.offenders.is_empty(), r.structural);
    }
}

#[test]
fn fib_is_accepted_only_after_index_normalization() {
    let e = entry("fib1").unwrap();
    let d = derive(&e.surface_def(), &e.program().env).unwrap();
    let raw = check_structural(&d.raw);
    assert!(!raw.structural);
    assert!(raw.offenders.iter().any(|o| o.index == "1 + q"), "{:?}", raw.offenders);
    assert!(check_structural(&d.def).structural);
}

#[test]
fn hand_written_definitions() {
    let base = "f = 0 :: f\n\n";
    let accepted = [
        "derived f n = match n with 0 => 0 | S p => f p end",
        "derived f n = match n with 0 => 0 | S p => match p with 0 => 1 | S q => f p + f q end end",
        "derived f n = 7",
    ];
    for d in accepted {
        let r = check(&format!("{base}{d}"), "f");
        assert!(r.structural, "{d}: {:?}", r.offenders);
    }
    let rejected = [
        ("derived f n = f n", "n", "parameter itself"),
        ("derived f n = match n with 0 => 0 | S p => f (S p) end", "S p", "not a variable"),
        ("derived f n = match n with 0 => 0 | S p => f (1 + p) end", "1 + p", "not a variable"),
        ("derived f n = match 3 with 0 => 0 | S p => f p end", "p", "not a predecessor"),
    ];
    for (d, index, reason) in rejected {
        let r = check(&format!("{base}{d}"), "f");
        assert!(!r.structural, "{d}");
        assert_eq!(r.offenders[0].index, index, "{d}");
        assert!(r.offenders[0].reason.contains(reason), "{d}: {}", r.offenders[0].reason);
    }
    // Calls to other definitions are not this check's business.
    let r = check("g = 0 :: g\n\nf = 0 :: f\n\nderived g n = 0\n\nderived f n = g (S n)", "f");
    assert!(r.structural);
}

/// Evaluates `name args` at `n` in a fresh memoizing machine whose call depth is capped.
fn nth_with_depth(env: &corec_core::Environment, name: &str, args: &[ArgSpec], n: u64, depth: usize) -> Result<Scalar, EvalError> {
    let mut m = Machine::new(Rc::new(env.clone()), Resolver::Derived)
        .with_memo(true)
        .with_max_depth(depth);
    let vals = m.bind_args(name, args)?;
    m.rec_call(&name.into(), vals, n)
}

/// Structural definitions need call depth at most linear in the index.
#[test]
fn accepted_definitions_terminate_within_linear_depth() {
    for e in corpus().iter().filter(|e| e.transform_error.is_none() && e.structural) {
        let env = common::derived_env(e);
        for n in [0u64, 1, 2, 10, 100, 500] {
            nth_with_depth(&env, e.def, &e.arg_specs(), n, n as usize + 4)
                .unwrap_or_else(|err| panic!("{} at {n}: {err}", e.name));
        }
    }
}

#[test]
fn rejected_definition_exceeds_any_depth() {
    let e = entry("bad").unwrap();
    let env = common::derived_env(e);
    let err = nth_with_depth(&env, "bad", &[], 0, 10_000).unwrap_err();
    assert_eq!(err, EvalError::Depth { limit: 10_000 });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Whatever random equation the transformation accepts and the checker
    /// certifies evaluates within linear call depth.
    #[test]
    fn random_structural_definitions_terminate(seed in any::<u64>(), depth in 1u32..5) {
        let def = common::Gen::new(seed).def(depth);
        let mut env = parse_program("unused = 0 :: unused").unwrap().env;
        env.surface.insert(def.name.clone(), def.clone());
        let Ok(d) = derive_with(&def, &env, &mut DeriveOptions { fuel: 2000, ..DeriveOptions::default() }) else {
            return Ok(());
        };
        prop_assume!(check_structural(&d.def).structural);
        env.insert_derived(d.def);
        let args: Vec<ArgSpec> = ["3", "S", "[1|2,3]"].iter().map(|a| a.parse().unwrap()).collect();
        for n in [0u64, 5, 12] {
            let r = nth_with_depth(&env, "g", &args, n, n as usize + 4);
            prop_assert!(r.is_ok(), "n = {}: {:?}\n{}", n, r, corec_core::pretty::surface_def(&def));
        }
    }
}
