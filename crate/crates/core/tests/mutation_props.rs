mod common;

use std::collections::BTreeSet;

use common::{gen, subject};
use metaprio_core::minilang::{parse, parse_unchecked, pretty_print, StmtKind};
use metaprio_core::mutation::{
    build_kill_matrix, generate_mutants, screen_mutants, MatrixRole, MutantStatus, MutationOperator,
};
use proptest::prelude::*;
use serde_json::Value as Json;

fn all_ops() -> BTreeSet<MutationOperator> {
    MutationOperator::ALL.into_iter().collect()
}

/// Statement with its own nested bodies removed, spans dropped.
fn local(kind: &StmtKind) -> Json {
    let mut k = kind.clone();
    match &mut k {
        StmtKind::If { then_body, else_body, .. } => {
            then_body.clear();
            else_body.clear();
        }
        StmtKind::While { body, .. } => body.clear(),
        _ => {}
    }
    serde_json::to_value(k).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mutants_are_first_order(src in gen::program()) {
        let p = parse(&src).unwrap();
        let ms = generate_mutants(&p, &all_ops());
        let ids: BTreeSet<&String> = ms.iter().map(|m| &m.id).collect();
        prop_assert_eq!(ids.len(), ms.len());
        let original = pretty_print(&p);
        let mut sources = BTreeSet::new();
        let mut sites = BTreeSet::new();
        for m in &ms {
            prop_assert_eq!(m.status, MutantStatus::Candidate);
            prop_assert!(sites.insert((m.location.clone(), m.operator, m.variant)));
            let mp = &m.mutated_program;
            let before = p.statements();
            let after = mp.statements();
            if m.operator == MutationOperator::SDL {
                prop_assert_eq!(after.len() + 1, before.len());
                prop_assert!(mp.statement(m.location.statement).is_none());
                for s in after {
                    prop_assert_eq!(local(&s.kind), local(&p.statement(s.id).unwrap().kind));
                }
            } else {
                prop_assert_eq!(after.len(), before.len());
                let changed: Vec<_> = before.iter().zip(&after)
                    .filter(|(a, b)| local(&a.kind) != local(&b.kind))
                    .map(|(a, _)| a.id)
                    .collect();
                prop_assert_eq!(changed, vec![m.location.statement]);
            }
            prop_assert_ne!(&m.source(), &original);
            sources.insert(m.source());
            prop_assert!(parse_unchecked(&m.source(), &m.id).is_ok());
            if m.operator != MutationOperator::SDL {
                prop_assert!(parse(&m.source()).is_ok());
            }
        }
        prop_assert!(sources.len() * 10 >= ms.len() * 9);
    }

    #[test]
    fn generation_is_deterministic(src in gen::program()) {
        let p = parse(&src).unwrap();
        prop_assert_eq!(generate_mutants(&p, &all_ops()), generate_mutants(&p, &all_ops()));
    }
}

#[test]
fn kill_matrices_are_reproducible() {
    let s = subject("range");
    let screened = screen_mutants(generate_mutants(&s.program, &all_ops()), &s.validation, 10_000);
    let build = || {
        build_kill_matrix(&s.program, &screened.viable, &s.mrs, &s.prioritizing, MatrixRole::Prioritizing, 10_000)
            .unwrap()
    };
    let km = build();
    assert!(km.is_consistent());
    assert_eq!(km, build());
    assert_eq!(km.mutants.len(), screened.viable.len());
    assert!(screened.screened_out.iter().all(|m| m.status == MutantStatus::ScreenedOut));
}

#[test]
fn operator_subsets_partition_the_full_set() {
    let s = subject("interp");
    let full = generate_mutants(&s.program, &all_ops());
    let mut count = 0;
    for op in MutationOperator::ALL {
        let only = generate_mutants(&s.program, &BTreeSet::from([op]));
        assert!(only.iter().all(|m| m.operator == op));
        count += only.len();
    }
    assert_eq!(count, full.len());
}
