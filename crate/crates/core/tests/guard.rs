mod common;

use corec_core::ast::{Environment, Ident, ScalarExpr, Scalar, StreamExpr};
use corec_core::corpus::corpus;
use corec_core::guard::{classify_guardedness, corecursive_names, GuardReport, Guardedness};
use corec_core::parse_program;
use proptest::prelude::*;

fn classify(src: &str, name: &str) -> GuardReport {
    let p = parse_program(src).unwrap();
    classify_guardedness(&p.env.surface[name], &p.env)
}

fn rank(g: Guardedness) -> u8 {
    match g {
        Guardedness::Guarded => 0,
        Guardedness::NonGuardedStarStar => 1,
        Guardedness::NonGuardedStar => 2,
    }
}

#[test]
fn corpus_classes_and_interferers() {
    for e in corpus() {
        let p = e.program();
        let r = classify_guardedness(&p.env.surface[e.def], &p.env);
        assert_eq!(r.class, e.class, "{}", e.name);
        let mut named: Vec<&str> = r.offenders.iter().filter_map(|o| o.interferer.as_ref()).map(Ident::as_str).collect();
        named.dedup();
        assert_eq!(named, e.interferers, "{}", e.name);
    }
}

#[test]
fn offender_paths_and_spans() {
    let r = classify("fib0 = 0 :: 1 :: zipWith plus (tl fib0) fib0", "fib0");
    let paths: Vec<&str> = r.offenders.iter().map(|o| o.call_path.as_str()).collect();
    assert_eq!(paths, ["zipWith > tl > fib0", "zipWith > fib0"]);
    assert_eq!((r.offenders[1].span.start_line, r.offenders[1].span.start_col), (1, 41));
}

#[test]
fn star_cases() {
    for (src, name) in [
        ("bad = tl bad", "bad"),
        ("f = 1 :: tl f", "f"),
        ("f = match f with x :: t -> 1 :: t end", "f"),
        ("f = map S f", "f"),
        ("f = f", "f"),
    ] {
        assert_eq!(classify(src, name).class, Guardedness::NonGuardedStar, "{src}");
    }
    // `tl` inside an interferer under a constructor is charged to the interferer.
    let r = classify("f = 1 :: map S (tl f)", "f");
    assert_eq!(r.class, Guardedness::NonGuardedStarStar);
    assert_eq!(r.offenders[0].interferer.as_ref().map(Ident::as_str), Some("map"));
    // With both kinds of offender the worse one wins.
    let r = classify("f = 1 :: zipWith plus f (tl (tl f))", "f");
    assert_eq!(r.class, Guardedness::NonGuardedStarStar);
    let r = classify("f = zipWith plus (1 :: f) f", "f");
    assert_eq!(r.class, Guardedness::NonGuardedStar);
}

#[test]
fn guarded_cases() {
    for (src, name) in [
        ("f = 1 :: 2 :: f", "f"),
        ("f ~s = match s with x :: t -> x :: f t end", "f"),
        ("f ~s = match s with x :: t -> match t with y :: u -> x + y :: f u end end", "f"),
        ("ones = 1 :: ones\n\nf = map S ones", "f"),
        ("f ~s = hd s :: f (tl s)", "f"),
    ] {
        assert_eq!(classify(src, name).class, Guardedness::Guarded, "{src}");
    }
}

#[test]
fn mutual_recursion_goes_through_the_call_graph() {
    let src = "a = 1 :: b\n\nb = map S a\n\nc = 0 :: c";
    let p = parse_program(src).unwrap();
    let names = corecursive_names(&p.env, &Ident::new("a"));
    assert!(names.contains("a") && names.contains("b") && !names.contains("c"));
    assert_eq!(classify(src, "a").class, Guardedness::Guarded);
    assert_eq!(classify(src, "b").class, Guardedness::NonGuardedStar);
    // `d` reaches itself only through `e`, under `map` under a constructor.
    let r = classify("d = 1 :: map S e\n\ne = 2 :: d", "d");
    assert_eq!(r.class, Guardedness::NonGuardedStarStar);
    assert_eq!(r.offenders[0].call_path, "map > e");
}

fn env_with(def: corec_core::ast::SurfaceDef) -> Environment {
    let mut env = parse_program("unused = 0 :: unused").unwrap().env;
    env.surface.insert(def.name.clone(), def);
    env
}

fn classify_body(body: StreamExpr) -> GuardReport {
    let def = common::surface_g(body);
    let env = env_with(def.clone());
    classify_guardedness(&def, &env)
}

proptest! {
    #[test]
    fn class_matches_offenders(seed in any::<u64>(), depth in 0u32..6) {
        let r = classify_body(common::Gen::new(seed).stream(depth));
        prop_assert_eq!(r.class == Guardedness::Guarded, r.offenders.is_empty());
        let worst = r.offenders.iter().map(|o| rank(o.class)).max().unwrap_or(0);
        prop_assert_eq!(rank(r.class), worst);
    }

    #[test]
    fn a_constructor_in_front_never_hurts(seed in any::<u64>(), depth in 0u32..6) {
        let body = common::Gen::new(seed).stream(depth);
        let before = classify_body(body.clone()).class;
        let consed = StreamExpr::Cons(Box::new(ScalarExpr::Lit(Scalar::from(0i64))), Box::new(body));
        let after = classify_body(consed).class;
        prop_assert!(rank(after) <= rank(before), "{:?} then {:?}", before, after);
    }

    #[test]
    fn tail_in_front_is_never_guarded(seed in any::<u64>(), depth in 0u32..6) {
        let body = common::Gen::new(seed).stream(depth);
        let r0 = classify_body(body.clone());
        let r = classify_body(StreamExpr::Tail(Box::new(body)));
        prop_assert!(r.offenders.len() >= r0.offenders.len());
        if !r.offenders.is_empty() {
            prop_assert_ne!(r.class, Guardedness::Guarded);
        }
    }

    #[test]
    fn without_recursion_everything_is_guarded(seed in any::<u64>(), depth in 0u32..6) {
        let mut g = common::Gen::new(seed);
        g.recursive = false;
        let r = classify_body(g.stream(depth));
        prop_assert_eq!(r.class, Guardedness::Guarded);
    }
}
