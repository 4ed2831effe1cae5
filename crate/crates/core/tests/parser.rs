mod common;

use corec_core::ast::{ScalarKind, StreamMode};
use corec_core::corpus::corpus;
use corec_core::diag::DiagCode;
use corec_core::transform::derive;
use corec_core::{alpha_eq, parse_file, parse_program, pretty};
use proptest::prelude::*;

fn codes(src: &str) -> Vec<DiagCode> {
    match parse_program(src) {
        Ok(_) => vec![],
        Err(ds) => ds.into_iter().map(|d| d.code).collect(),
    }
}

#[test]
fn infers_parameter_kinds() {
    let p = parse_program("map f ~fun s = match s with x :: s' -> f x :: map f s' end").unwrap();
    let map = &p.env.surface["map"];
    assert_eq!(map.scalar_params[0].kind, ScalarKind::Function { arity: 1 });
    assert_eq!(map.stream_params[0].mode, StreamMode::ViewAsFunction);

    let p = parse_program("nums n = n :: nums (S n)").unwrap();
    assert_eq!(p.env.surface["nums"].scalar_params[0].kind, ScalarKind::Value);

    // Kind flows from a call site into an unannotated parameter.
    let p = parse_program("k s = hd s :: k (tl s)").unwrap();
    let k = &p.env.surface["k"];
    assert!(k.scalar_params.is_empty());
    assert_eq!(k.stream_params[0].mode, StreamMode::KeepAsStream);

    let p = parse_program("app h x = h x x :: app h x").unwrap();
    assert_eq!(p.env.surface["app"].scalar_params[0].kind, ScalarKind::Function { arity: 2 });
}

#[test]
fn sections_and_partial_application() {
    let a = parse_program("t = 1 :: map (* 2) t").unwrap();
    let b = parse_program("t = 1 :: map (times 2) t").unwrap();
    assert!(alpha_eq(&a.env.surface["t"], &b.env.surface["t"]));
    let c = parse_program("t = 1 :: zipWith (+) t t").unwrap();
    let d = parse_program("t = 1 :: zipWith plus t t").unwrap();
    assert!(alpha_eq(&c.env.surface["t"], &d.env.surface["t"]));
    assert!(parse_program("t = (+ 1) 2 :: t").is_ok());
}

#[test]
fn comments_and_layout() {
    let src = "-- leading comment\nzeroes = 0 -- trailing\n  :: zeroes\n\n\nones = 1 :: ones\n";
    let p = parse_program(src).unwrap();
    assert_eq!(p.env.surface.len(), 2);
}

#[test]
fn unbound_names() {
    assert_eq!(codes("f = 1 :: g"), vec![DiagCode::Unbound]);
    let err = parse_program("f = 1 ::\n  2 :: nope").unwrap_err();
    assert_eq!((err[0].span.start_line, err[0].span.start_col), (2, 8));
    assert_eq!(codes("f = 1 :: mystery f"), vec![DiagCode::Unbound]);
}

#[test]
fn arity_errors() {
    assert_eq!(codes("f x = x :: f"), vec![DiagCode::Arity]);
    assert_eq!(codes("f = 1 :: map S"), vec![DiagCode::Arity]);
    assert_eq!(codes("f = S 1 2 :: f"), vec![DiagCode::Arity]);
    assert_eq!(codes("f = 1 :: map (+) f"), vec![DiagCode::Arity]);
}

#[test]
fn duplicate_names() {
    assert_eq!(codes("f = 1 :: f\n\nf = 2 :: f"), vec![DiagCode::Dup]);
    assert_eq!(codes("f x x = x :: f x x"), vec![DiagCode::Dup]);
    assert_eq!(codes("S = 1 :: S"), vec![DiagCode::Dup]);
    assert_eq!(codes("f tl = 1 :: f tl"), vec![DiagCode::Dup]);
    assert_eq!(codes("f ~s = match s with x :: x -> f s end"), vec![DiagCode::Dup]);
}

#[test]
fn syntax_and_sort_errors() {
    assert_eq!(codes("f = 1 ::"), vec![DiagCode::Parse]);
    assert_eq!(codes("f = match f with x :: t -> t"), vec![DiagCode::Parse]);
    // `x` used both as a scalar and as a stream.
    assert_eq!(codes("f x = x :: x"), vec![DiagCode::Parse]);
    // Scalar parameters come first.
    assert_eq!(codes("f ~s a = a :: f s a"), vec![DiagCode::Parse]);
    // Index matches and shifts only belong to derived definitions.
    assert_eq!(codes("f = (f >> 1)"), vec![DiagCode::Parse]);
}

#[test]
fn derived_items() {
    let src = "zeroes = 0 :: zeroes\n\nderived zeroes n = match n with 0 => 0 | S p => zeroes p end";
    let p = parse_program(src).unwrap();
    assert!(p.env.derived_def("zeroes").is_some());
    assert_eq!(codes("derived nope n = 0"), vec![DiagCode::Unbound]);
    assert_eq!(codes("zeroes = 0 :: zeroes\n\nderived zeroes a n = 0"), vec![DiagCode::Arity]);
    assert_eq!(codes("zeroes = 0 :: zeroes\n\nderived zeroes n = zeroes"), vec![DiagCode::Arity]);
}

#[test]
fn lemma_items_are_collected_not_registered() {
    let p = parse_program("lemma map f ~s n = f (s n)").unwrap();
    assert_eq!(p.lemmas.len(), 1);
    assert_eq!(p.lemmas[0].to_string(), "lemma map f ~s n = f (s n)");
    assert_eq!(codes("lemma map f ~f n = f (f n)"), vec![DiagCode::Dup]);
}

#[test]
fn builtin_lemmas_are_preloaded_unless_shadowed() {
    let p = parse_program("nats = 1 :: map S nats").unwrap();
    assert!(p.env.lemmas.contains_key("map") && p.env.lemmas.contains_key("zipWith"));
    let p = parse_program("map f ~fun s = match s with x :: s' -> f x :: map f s' end").unwrap();
    assert!(!p.env.lemmas.contains_key("map"));
    assert!(p.env.lemmas.contains_key("zipWith"));
}

#[test]
fn missing_file_is_a_parse_error_naming_the_file() {
    let err = parse_file(std::path::Path::new("no/such/file.strm")).unwrap_err();
    assert_eq!(err[0].code, DiagCode::Parse);
    assert!(err[0].to_string().starts_with("no/such/file.strm:1:1"));
}

#[test]
fn corpus_surface_definitions_round_trip() {
    for e in corpus() {
        let p = e.program();
        for def in p.env.surface.values() {
            let text = pretty::surface_def(def);
            let back = parse_program(&text).unwrap_or_else(|d| panic!("{text}: {d:?}"));
            assert!(alpha_eq(def, &back.env.surface[def.name.as_str()]), "{text}");
        }
    }
}

#[test]
fn derived_definitions_round_trip() {
    for e in corpus().iter().filter(|e| e.transform_error.is_none()) {
        let p = e.program();
        let d = derive(&p.env.surface[e.def], &p.env).unwrap();
        for def in [&d.raw, &d.def] {
            let text = format!("{}\n\n{}", e.source(), pretty::index_def(def));
            let back = parse_program(&text).unwrap_or_else(|d| panic!("{text}: {d:?}"));
            assert!(alpha_eq(def, &back.env.derived[e.def]), "{text}");
        }
    }
}

proptest! {
    #[test]
    fn random_surface_definitions_round_trip(seed in any::<u64>(), depth in 1u32..6) {
        let def = common::Gen::new(seed).def(depth);
        let text = pretty::surface_def(&def);
        let back = parse_program(&text);
        prop_assert!(back.is_ok(), "{}: {:?}", text, back.err());
        let back = back.unwrap();
        prop_assert!(alpha_eq(&def, &back.env.surface["g"]), "{}", text);
    }
}
