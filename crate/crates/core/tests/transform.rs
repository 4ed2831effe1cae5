mod common;

use std::rc::Rc;

use corec_core::ast::{Environment, Ident};
use corec_core::corpus::{corpus, entry, CorpusEntry};
use corec_core::eval::{stroff_prefix, ArgSpec, Machine, Resolver};
use corec_core::transform::{
    derive, derive_with, normalize_indices, register_lemma, validate, DeriveOptions, FormShiftLemma, LemmaError,
    RuleId, Strategy, TransformError, DEFAULT_SEED,
};
use corec_core::{alpha_eq, parse_program, pretty};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn transformable() -> impl Iterator<Item = &'static CorpusEntry> {
    corpus().iter().filter(|e| e.transform_error.is_none())
}

#[test]
fn derived_forms_match_goldens() {
    let mut seen = 0;
    for e in transformable().filter(|e| e.golden.is_some()) {
        let golden = e.golden_program().unwrap();
        let want = &golden.env.derived[e.def];
        let got = derive(&e.surface_def(), &e.program().env).unwrap().def;
        assert!(
            alpha_eq(&got, want),
            "{}:\n got  {}\n want {}",
            e.name,
            pretty::index_def(&got),
            pretty::index_def(want)
        );
        seen += 1;
    }
    assert_eq!(seen, 6);
}

#[test]
fn zeroes_trace() {
    let e = entry("zeroes").unwrap();
    let d = derive(&e.surface_def(), &e.program().env).unwrap();
    let rules: Vec<RuleId> = d.trace.rules().collect();
    assert_eq!(rules, [RuleId::R2, RuleId::R1, RuleId::R6]);
    assert_eq!(d.trace.fuel_used, 3);
}

#[test]
fn nats_uses_the_map_lemma() {
    let e = entry("nats").unwrap();
    let d = derive(&e.surface_def(), &e.program().env).unwrap();
    let text = pretty::index_def(&d.def);
    assert!(text.contains("S (nats"), "{text}");
    assert!(d.trace.steps.iter().all(|s| s.before != s.after));
}

#[test]
fn hamming_is_residual_on_merge() {
    let e = entry("hamming").unwrap();
    match derive(&e.surface_def(), &e.program().env) {
        Err(TransformError::Residual {
            missing_lemmas, residual, ..
        }) => {
            assert_eq!(missing_lemmas, [Ident::new("merge")]);
            assert!(residual.contains("merge"), "{residual}");
        }
        other => panic!("expected a residual, got {other:?}"),
    }
}

#[test]
fn fuel_exhaustion() {
    let e = entry("nats").unwrap();
    let mut opts = DeriveOptions {
        fuel: 1,
        ..DeriveOptions::default()
    };
    let err = derive_with(&e.surface_def(), &e.program().env, &mut opts).unwrap_err();
    assert_eq!(err.code(), "E-FUEL");
}

#[test]
fn unproductive_definition_still_derives() {
    // `bad = tl bad` turns into `bad n = bad (S n)`, which the structural check rejects.
    let e = entry("bad").unwrap();
    let d = derive(&e.surface_def(), &e.program().env).unwrap();
    assert!(!corec_core::check_structural(&d.def).structural);
}

#[test]
fn index_normalization_preserves_meaning() {
    for e in transformable().filter(|e| e.oracle_error.is_none()) {
        let p = e.program();
        let d = derive(&e.surface_def(), &p.env).unwrap();
        let renormalized = normalize_indices(&d.raw);
        assert!(alpha_eq(&renormalized, &d.def), "{}", e.name);
        let mut raw_env = common::derived_env(e);
        raw_env.insert_derived(d.raw.clone());
        let len = e.check_len.min(100);
        let raw = stroff_prefix(&raw_env, e.def, &e.arg_specs(), len, true).unwrap();
        let norm = stroff_prefix(&common::derived_env(e), e.def, &e.arg_specs(), len, true).unwrap();
        assert_eq!(raw.values, norm.values, "{}", e.name);
    }
}

/// Each step's before and after terms agree with the oracle at every index up to `upto`.
fn assert_steps_sound(e: &CorpusEntry, opts: &mut DeriveOptions, upto: u64) {
    let d = derive_with(&e.surface_def(), &e.program().env, opts).unwrap();
    let index = &d.raw.index_param;
    let want: Vec<_> = corec_core::eval::oracle_prefix(&e.program().env, e.def, &e.arg_specs(), upto as usize + 1, Some(50_000_000))
        .unwrap()
        .values;
    for (i, s) in d.trace.steps.iter().enumerate() {
        for (side, term) in [("before", &s.before), ("after", &s.after)] {
            let got = common::term_values(e, index, term, upto)
                .unwrap_or_else(|err| panic!("{} step {} {side}: {err}", e.name, i + 1));
            assert_eq!(got, want, "{} step {} ({}) {side}: {}", e.name, i + 1, s.rule, pretty::index_expr(term));
        }
    }
}

#[test]
fn every_rewrite_step_preserves_evaluation() {
    for e in transformable().filter(|e| e.oracle_error.is_none()) {
        assert_steps_sound(e, &mut DeriveOptions::default(), 25);
    }
}

fn with_random_order(seed: u64) -> DeriveOptions {
    DeriveOptions {
        strategy: Strategy::Random(ChaCha8Rng::seed_from_u64(seed)),
        ..DeriveOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rule_order_does_not_change_the_result(seed in any::<u64>()) {
        for e in transformable() {
            let p = e.program();
            let def = e.surface_def();
            let fixed = derive(&def, &p.env).unwrap().def;
            let random = derive_with(&def, &p.env, &mut with_random_order(seed)).unwrap().def;
            prop_assert!(
                alpha_eq(&fixed, &random),
                "{}: {} vs {}",
                e.name,
                pretty::index_def(&fixed),
                pretty::index_def(&random)
            );
        }
    }

    #[test]
    fn random_order_steps_are_sound(seed in any::<u64>()) {
        for e in transformable().filter(|e| e.oracle_error.is_none()) {
            assert_steps_sound(e, &mut with_random_order(seed), 12);
        }
    }
}

// ---------------------------------------------------------------------------
// Form-shifting lemmas

fn lemma(src: &str) -> (Environment, FormShiftLemma) {
    let p = parse_program(src).unwrap();
    (p.env, p.lemmas.into_iter().next().unwrap())
}

#[test]
fn builtin_lemmas_hold() {
    let env = parse_program("unused = 0 :: unused").unwrap().env;
    for l in [FormShiftLemma::map(), FormShiftLemma::zip_with()] {
        validate(&l, &env, DEFAULT_SEED, 200).unwrap_or_else(|e| panic!("{e}"));
        validate(&l, &env, DEFAULT_SEED ^ 0xffff, 200).unwrap_or_else(|e| panic!("{e}"));
    }
}

#[test]
fn parsed_lemmas_equal_builtins() {
    let (_, m) = lemma("lemma map f ~s n = f (s n)");
    assert_eq!(m, FormShiftLemma::map());
    let (_, z) = lemma("lemma zipWith f ~s1 ~s2 n = f (s1 n) (s2 n)");
    assert_eq!(z, FormShiftLemma::zip_with());
}

#[test]
fn false_map_lemma_is_rejected_with_counterexample() {
    let (env, l) = lemma("lemma map f ~s n = f (s (S n))");
    match register_lemma(&env, l, DEFAULT_SEED) {
        Err(LemmaError::False { counterexample, .. }) => {
            assert_eq!(counterexample.index, 0);
            assert_ne!(counterexample.expected, counterexample.got);
            assert!(counterexample.to_string().starts_with("at n = 0 with f = "));
        }
        other => panic!("expected a counterexample, got {other:?}"),
    }
    let (env, l) = lemma("lemma map f ~s n = S (f (s n))");
    assert_eq!(register_lemma(&env, l, DEFAULT_SEED).unwrap_err().code(), "E-LEMMA-FALSE");
    let (env, l) = lemma("lemma zipWith f ~a ~b n = f (a (S n)) (b n)");
    assert_eq!(register_lemma(&env, l, DEFAULT_SEED).unwrap_err().code(), "E-LEMMA-FALSE");
    // Every binary function of the language commutes, so swapping is admitted.
    let (env, l) = lemma("lemma zipWith f ~a ~b n = f (b n) (a n)");
    assert!(register_lemma(&env, l, DEFAULT_SEED).is_ok());
}

#[test]
fn ill_shaped_lemmas() {
    for (src, code) in [
        ("lemma map f ~s n = f s", "E-LEMMA-SHAPE"),
        ("lemma map f ~s n = f (s n) (s n)", "E-LEMMA-SHAPE"),
        ("lemma zipWith f ~a n = f (a n)", "E-LEMMA-SHAPE"),
        ("lemma map f ~s n = s n", "E-LEMMA-SHAPE"),
        ("lemma frob f ~s n = f (s n)", "E-LEMMA-UNKNOWN"),
    ] {
        let (env, l) = lemma(src);
        let err = register_lemma(&env, l, DEFAULT_SEED).unwrap_err();
        assert_eq!(err.code(), code, "{src}: {err}");
    }
}

#[test]
fn user_lemma_for_user_interferer() {
    let src = "twice ~s = match s with x :: t -> x + x :: twice t end\n\n\
               t = 1 :: twice t\n\n\
               lemma twice ~s n = s n + s n";
    let p = parse_program(src).unwrap();
    assert!(derive(&p.env.surface["t"], &p.env).is_err());
    let env = register_lemma(&p.env, p.lemmas[0].clone(), DEFAULT_SEED).unwrap();
    let d = derive(&env.surface["t"], &env).unwrap();
    let mut env = env;
    env.insert_derived(d.def);
    let got = stroff_prefix(&env, "t", &[], 10, true).unwrap().values;
    let want: Vec<_> = (0..10).map(|i| corec_core::Scalar::from(1i64 << i)).collect();
    assert_eq!(got, want);
}

#[test]
fn derived_and_oracle_machines_share_arguments() {
    // Generator arguments bind the same way for both resolvers.
    let e = entry("map").unwrap();
    let env = Rc::new(e.program().env);
    let specs: Vec<ArgSpec> = e.arg_specs();
    for r in [Resolver::Derived, Resolver::Oracle] {
        let mut m = Machine::new(env.clone(), r);
        assert_eq!(m.bind_args("map", &specs).unwrap().len(), 2);
    }
}
