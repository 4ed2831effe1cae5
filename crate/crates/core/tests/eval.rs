mod common;

use std::rc::Rc;

use corec_core::ast::Op;
use corec_core::corpus::{corpus, corpus_file, entry, CorpusEntry};
use corec_core::eval::{
    nth_eval, oracle_prefix, stroff_from, stroff_prefix, verify_equation, ArgSpec, EvalError, FunVal, Machine,
    Resolver, VerifyOptions,
};
use corec_core::guard::Guardedness;
use corec_core::transform::{derive_with, DeriveOptions};
use corec_core::{parse_program, Environment, Ident, Scalar};
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn evaluable() -> impl Iterator<Item = &'static CorpusEntry> {
    corpus().iter().filter(|e| e.transform_error.is_none() && e.oracle_error.is_none())
}

fn big(values: &[Scalar]) -> Vec<BigInt> {
    values.iter().map(|v| v.0.clone()).collect()
}

fn machine(env: &Environment, resolver: Resolver) -> Machine {
    Machine::new(Rc::new(env.clone()), resolver).with_memo(true)
}

#[test]
fn reference_values() {
    for e in corpus().iter().filter(|e| e.oracle_error.is_none()) {
        let len = e.check_len;
        let want = common::reference(e.name, len).unwrap_or_else(|| panic!("no reference for {}", e.name));
        assert_eq!(big(&e.prefix), want[..e.prefix.len()], "{} manifest prefix", e.name);
        let env = common::derived_env(e);
        let oracle = oracle_prefix(&env, e.def, &e.arg_specs(), len, None).unwrap();
        assert_eq!(big(&oracle.values), want, "{} oracle", e.name);
        if e.transform_error.is_none() {
            let derived = stroff_prefix(&env, e.def, &e.arg_specs(), len, true).unwrap();
            assert_eq!(big(&derived.values), want, "{} derived", e.name);
        }
    }
}

#[test]
fn nth_of_stroff_is_the_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for e in evaluable() {
        let env = common::derived_env(e);
        let name = Ident::new(e.def);
        let mut by_stream = machine(&env, Resolver::Derived);
        let mut by_call = machine(&env, Resolver::Derived);
        let args = by_stream.bind_args(e.def, &e.arg_specs()).unwrap();
        let call_args = by_call.bind_args(e.def, &e.arg_specs()).unwrap();
        let s = by_stream.derived_stream(name.clone(), args, 0);
        for _ in 0..100 {
            let n = rng.gen_range(0..=300);
            let a = by_stream.nth(&s, n).unwrap();
            let b = by_call.rec_call(&name, call_args.clone(), n).unwrap();
            assert_eq!(a, b, "{} at {n}", e.name);
        }
    }
}

#[test]
fn restreaming_the_function_view_round_trips() {
    for e in corpus().iter().filter(|e| e.class == Guardedness::Guarded) {
        let env = e.program().env;
        let want = oracle_prefix(&env, e.def, &e.arg_specs(), 200, None).unwrap().values;
        let mut m = machine(&env, Resolver::Oracle);
        let args = m.bind_args(e.def, &e.arg_specs()).unwrap();
        let s = m.oracle_call_values(&Ident::new(e.def), args).unwrap();
        let view = Rc::new(move |m: &mut Machine, i: u64| m.nth(&s, i));
        let again = stroff_from(view, 0);
        assert_eq!(m.prefix(&again, 200).map_err(|(_, e)| e).unwrap(), want, "{}", e.name);
    }
}

#[test]
fn derived_matches_oracle_on_corpus() {
    for e in evaluable() {
        let r = verify_equation(&common::derived_env(e), e.def, &e.arg_specs(), e.check_len, VerifyOptions::default())
            .unwrap();
        assert!(r.equal, "{}: {:?}", e.name, r.first_divergence);
        assert_eq!(r.derived.produced, e.check_len);
    }
}

#[test]
fn memo_does_not_change_values() {
    for e in evaluable() {
        let env = common::derived_env(e);
        let len = e.check_len.min(18);
        let with = stroff_prefix(&env, e.def, &e.arg_specs(), len, true).unwrap();
        let without = stroff_prefix(&env, e.def, &e.arg_specs(), len, false).unwrap();
        assert_eq!(with.values, without.values, "{}", e.name);
    }
}

#[test]
fn unproductive_equation() {
    let e = entry("bad").unwrap();
    let err = oracle_prefix(&e.program().env, "bad", &[], 1, None).unwrap_err();
    assert_eq!(err.code(), "E-UNPRODUCTIVE");
    assert!(matches!(err, EvalError::Unproductive { produced: Some(0), .. }));

    // A black hole behind a produced element.
    let p = parse_program("h = 1 :: tl (tl h)").unwrap();
    let err = oracle_prefix(&p.env, "h", &[], 3, None).unwrap_err();
    assert!(matches!(err, EvalError::Unproductive { produced: Some(1), .. }), "{err:?}");
}

#[test]
fn corrupted_derivation_is_caught() {
    let p = parse_program(corpus_file("corrupted.strm").unwrap()).unwrap();
    let r = verify_equation(&p.env, "nats", &[], 20, VerifyOptions::default()).unwrap();
    assert!(!r.equal);
    let d = r.first_divergence.unwrap();
    assert_eq!(d.index, 5);
    assert_eq!((d.derived, d.oracle), (Scalar::from(7i64), Scalar::from(6i64)));
}

#[test]
fn evaluation_errors() {
    let e = entry("map").unwrap();
    let env = e.program().env;
    assert_eq!(nth_eval(&env, "map", &e.arg_specs(), 0, true).unwrap_err().code(), "E-NO-DERIVED");
    let env = common::derived_env(e);
    let err = nth_eval(&env, "map", &[ArgSpec::named("S")], 0, true).unwrap_err();
    assert_eq!(err.code(), "E-ARG");
    let err = nth_eval(&env, "map", &[ArgSpec::int(3), ArgSpec::cycle(&[1])], 0, true).unwrap_err();
    assert_eq!(err.code(), "E-ARG", "{err}");
    // A named stream argument is another top-level definition.
    let src = format!("{}\n\nones = 1 :: ones", e.source());
    let mut env = parse_program(&src).unwrap().env;
    env.derived = common::derived_env(e).derived;
    let args = [ArgSpec::Fun(FunVal::new(Op::Times, vec![Scalar::from(5i64)])), ArgSpec::named("ones")];
    let got = oracle_prefix(&env, "map", &args, 3, None).unwrap().values;
    assert_eq!(got, vec![Scalar::from(5i64); 3]);
}

#[test]
fn argument_syntax() {
    for (text, shown) in [
        ("-3", "-3"),
        ("S", "S"),
        ("(* 2)", "(* 2)"),
        ("(times 2)", "(* 2)"),
        ("(+ 1)", "(+ 1)"),
        ("[1,2|3]", "[1,2|3]"),
        ("[|0]", "[|0]"),
        ("nums(4)", "nums(4)"),
    ] {
        let spec: ArgSpec = text.parse().unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(spec.to_string(), shown);
    }
    for bad in ["[1|]", "[1,2]", "[x|1]", "(- 1)", ""] {
        assert!(bad.parse::<ArgSpec>().is_err(), "{bad}");
    }
}

fn arg_spec() -> impl Strategy<Value = ArgSpec> {
    let int = any::<i32>().prop_map(|v| ArgSpec::int(v.into()));
    let fun = prop_oneof![
        Just(ArgSpec::Fun(FunVal::new(Op::Succ, vec![]))),
        Just(ArgSpec::Fun(FunVal::new(Op::Plus, vec![]))),
        (-50i64..50).prop_map(|c| ArgSpec::Fun(FunVal::new(Op::Times, vec![Scalar::from(c)]))),
        (-50i64..50).prop_map(|c| ArgSpec::Fun(FunVal::new(Op::Plus, vec![Scalar::from(c)]))),
    ];
    let generator = (prop::collection::vec(-99i64..99, 0..4), prop::collection::vec(-99i64..99, 1..4)).prop_map(
        |(p, c)| ArgSpec::Generator {
            prefix: p.into_iter().map(Scalar::from).collect(),
            cycle: c.into_iter().map(Scalar::from).collect(),
        },
    );
    let leaf = prop_oneof![int, fun, generator, "[a-z][a-z0-9]{0,4}".prop_map(|n| ArgSpec::named(&n))];
    leaf.prop_recursive(2, 6, 3, |inner| {
        ("[a-z][a-z0-9]{0,4}", prop::collection::vec(inner, 1..3))
            .prop_map(|(name, args)| ArgSpec::Named { name: Ident::new(&name), args })
    })
}

/// Random well-formed programs whose derived form is compared against the oracle.
fn random_program_agrees(seed: u64, depth: u32) -> Result<(), TestCaseError> {
    let def = common::Gen::new(seed).def(depth);
    let mut env = parse_program("unused = 0 :: unused").unwrap().env;
    env.surface.insert(def.name.clone(), def.clone());
    let Ok(d) = derive_with(&def, &env, &mut DeriveOptions { fuel: 2000, ..DeriveOptions::default() }) else {
        return Ok(());
    };
    env.insert_derived(d.def.clone());
    let args: Vec<ArgSpec> = ["2", "(* 3)", "[1|2,-1]"].iter().map(|a| a.parse().unwrap()).collect();
    let len = 12;
    let Ok(oracle) = oracle_prefix(&env, "g", &args, len, Some(20_000)) else {
        return Ok(());
    };
    let derived = stroff_prefix(&env, "g", &args, len, true);
    prop_assert_eq!(
        derived.as_ref().map(|t| &t.values),
        Ok(&oracle.values),
        "\n{}\n{}",
        corec_core::pretty::surface_def(&def),
        corec_core::pretty::index_def(&d.def)
    );
    Ok(())
}

proptest! {
    #[test]
    fn arg_specs_print_and_parse(spec in arg_spec()) {
        let text = spec.to_string();
        let back: Result<ArgSpec, _> = text.parse();
        prop_assert_eq!(back, Ok(spec), "{}", text);
    }

    #[test]
    fn product_matches_leibniz_rule(
        xp in prop::collection::vec(-5i64..6, 0..3),
        xc in prop::collection::vec(-5i64..6, 1..3),
        yp in prop::collection::vec(-5i64..6, 0..3),
        yc in prop::collection::vec(-5i64..6, 1..3),
    ) {
        let e = entry("dTimes").unwrap();
        let env = common::derived_env(e);
        let len = 24;
        let args: Vec<ArgSpec> = [common::gen_spec(&xp, &xc), common::gen_spec(&yp, &yc)]
            .iter()
            .map(|a| a.parse().unwrap())
            .collect();
        let want = common::leibniz(&common::generator(&xp, &xc, len), &common::generator(&yp, &yc, len), len);
        let got = stroff_prefix(&env, "dTimes", &args, len, true).unwrap();
        prop_assert_eq!(big(&got.values), want);
    }

    #[test]
    fn nums_from_any_start(start in -1000i64..1000) {
        let e = entry("nums").unwrap();
        let env = common::derived_env(e);
        let got = stroff_prefix(&env, "nums", &[ArgSpec::int(start)], 50, true).unwrap();
        let want: Vec<BigInt> = (start..start + 50).map(BigInt::from).collect();
        prop_assert_eq!(big(&got.values), want);
    }

    #[test]
    fn random_programs_agree_with_oracle(seed in any::<u64>(), depth in 1u32..5) {
        random_program_agrees(seed, depth)?;
    }
}
