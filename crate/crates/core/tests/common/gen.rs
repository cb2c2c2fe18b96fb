//! Random well-typed MiniLang programs for property tests.

use proptest::prelude::*;

const VARS: [&str; 3] = ["x", "y", "z"];

fn var() -> impl Strategy<Value = String> {
    prop::sample::select(&VARS[..]).prop_map(str::to_string)
}

pub fn int_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (-9i64..10).prop_map(|v| if v < 0 { format!("(0 - {})", -v) } else { v.to_string() }),
        var(),
        Just("n".to_string()),
        Just("len(a)".to_string()),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        (inner.clone(), prop::sample::select(&["+", "-", "*"][..]), inner)
            .prop_map(|(l, op, r)| format!("({l} {op} {r})"))
    })
}

pub fn cond() -> impl Strategy<Value = String> {
    let atom = (int_expr(), prop::sample::select(&["<", "<=", ">", ">=", "==", "!="][..]), int_expr())
        .prop_map(|(l, op, r)| format!("{l} {op} {r}"))
        .boxed();
    prop_oneof![
        3 => atom.clone(),
        1 => (atom.clone(), prop::sample::select(&["&&", "||"][..]), atom)
            .prop_map(|(l, op, r)| format!("({l}) {op} ({r})")),
    ]
}

fn block(depth: u32) -> BoxedStrategy<String> {
    prop::collection::vec(stmt(depth), 1..4).prop_map(|v| v.join("\n")).boxed()
}

pub fn stmt(depth: u32) -> BoxedStrategy<String> {
    let assign = (var(), int_expr()).prop_map(|(v, e)| format!("{v} = {e}"));
    if depth == 0 {
        return assign.boxed();
    }
    prop_oneof![
        4 => assign,
        2 => (cond(), block(depth - 1), prop::option::of(block(depth - 1))).prop_map(|(c, t, e)| match e {
            Some(e) => format!("if ({c}) {{\n{t}\n}} else {{\n{e}\n}}"),
            None => format!("if ({c}) {{\n{t}\n}}"),
        }),
        1 => (cond(), block(depth - 1)).prop_map(|(c, b)| format!("while ({c}) {{\n{b}\nx = x + 1\n}}")),
        1 => (cond(), int_expr()).prop_map(|(c, e)| format!("if ({c}) {{\nreturn {e}\n}}")),
    ]
    .boxed()
}

/// A single function `f(a: [int], n: int) -> int` with every variable
/// defined up front.
pub fn program() -> impl Strategy<Value = String> {
    (prop::collection::vec(stmt(2), 1..6), int_expr()).prop_map(|(body, ret)| {
        format!(
            "fn f(a: [int], n: int) -> int {{\nx = 0\ny = n\nz = 1\n{}\nreturn {ret}\n}}\n",
            body.join("\n")
        )
    })
}
