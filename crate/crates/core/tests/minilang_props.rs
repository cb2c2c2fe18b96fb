mod common;

use common::gen;
use metaprio_core::exec::{execute, Outcome, Value};
use metaprio_core::minilang::{count_operators, expr_to_string, parse, parse_expr, pretty_print, StatementId};
use proptest::prelude::*;
use serde_json::Value as Json;

fn strip_spans(v: &mut Json) {
    match v {
        Json::Object(map) => {
            map.remove("span");
            map.values_mut().for_each(strip_spans);
        }
        Json::Array(items) => items.iter_mut().for_each(strip_spans),
        _ => {}
    }
}

fn shape(p: &metaprio_core::Program) -> Json {
    let mut v = serde_json::to_value(&p.functions).unwrap();
    strip_spans(&mut v);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expressions_round_trip(src in gen::int_expr()) {
        let e = parse_expr(&src).unwrap();
        let printed = expr_to_string(&e);
        prop_assert_eq!(parse_expr(&printed).unwrap(), e);
    }

    #[test]
    fn programs_round_trip(src in gen::program()) {
        let p = parse(&src).unwrap();
        let printed = pretty_print(&p);
        let q = parse(&printed).unwrap();
        prop_assert_eq!(shape(&p), shape(&q));
        prop_assert_eq!(pretty_print(&q), printed);
    }

    #[test]
    fn ids_are_dense_preorder(src in gen::program()) {
        let p = parse(&src).unwrap();
        let ids: Vec<u32> = p.statements().iter().map(|s| s.id.0).collect();
        prop_assert_eq!(ids, (1..=p.statement_count() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn operator_counts_match_tree(src in gen::program()) {
        let p = parse(&src).unwrap();
        for s in p.statements() {
            let expected: u32 = s.exprs().iter().map(|e| e.operator_count()).sum();
            prop_assert_eq!(count_operators(&p, s.id).unwrap(), expected);
        }
        prop_assert!(count_operators(&p, StatementId(p.statement_count() as u32 + 1)).is_err());
    }

    #[test]
    fn execution_is_deterministic(
        src in gen::program(),
        a in prop::collection::vec(-20i64..20, 0..6),
        n in -3i64..8,
    ) {
        let p = parse(&src).unwrap();
        let args = [Value::Array(a), Value::Int(n)];
        let first = execute(&p, "f", &args, 2_000).unwrap();
        let second = execute(&p, "f", &args, 2_000).unwrap();
        prop_assert!(first.steps <= 2_000 || first.output == Outcome::StepLimitExceeded);
        prop_assert!(first.statements.iter().all(|s| p.statement(*s).is_some()));
        prop_assert_eq!(first, second);
    }
}

#[test]
fn spans_do_not_affect_digest_of_equal_text() {
    let src = "fn f(x: int) -> int {\n  return x + 1\n}\n";
    assert_eq!(parse(src).unwrap().source_digest, parse(src).unwrap().source_digest);
    assert_ne!(
        parse(src).unwrap().source_digest,
        parse("fn f(x: int) -> int { return x + 2 }").unwrap().source_digest
    );
}

#[test]
fn malformed_programs_are_rejected() {
    for bad in [
        "fn f(x: int) -> int { return y }",
        "fn f(x: int) -> int { x = true; return x }",
        "fn f(x: int) -> int { return x",
        "fn f(x: int) -> int { return 1 } fn f(y: int) -> int { return 2 }",
        "fn f(a: [int]) -> int { return a + 1 }",
    ] {
        assert!(parse(bad).is_err(), "{bad}");
    }
}
