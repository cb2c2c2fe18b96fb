mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{apfd_oracle, greedy_violation, matrix, permutations, random_matrix, seeded};
use metaprio_core::centrality::ScoreBreakdown;
use metaprio_core::evaluate::{
    apfd, apfd_from_ranks, avg_time_to_detect, baseline_average, effective_set_size, effectiveness_curve, evaluate,
    first_detection,
};
use metaprio_core::mutation::KillMatrix;
use metaprio_core::prioritize::{centrality_order, fault_based_order, random_orders, Ordering, Strategy as Kind};
use metaprio_core::rational::{int, ratio, Rational};
use num_traits::Zero;
use proptest::prelude::*;

fn kill_matrix() -> impl Strategy<Value = KillMatrix> {
    (1usize..7, 1usize..10, 0u64..u64::MAX, 0.05f64..0.7)
        .prop_map(|(n, m, seed, d)| random_matrix(&mut seeded(seed), n, m, d))
}

fn ordering(km: &KillMatrix, idx: &[usize]) -> Ordering {
    serde_json::from_value(serde_json::json!({
        "strategy": "fault_based",
        "sequence": idx.iter().map(|&i| km.mrs[i].clone()).collect::<Vec<_>>(),
    }))
    .unwrap()
}

fn breakdown(mr: &str, quality: Rational) -> ScoreBreakdown {
    ScoreBreakdown {
        mr: mr.into(),
        per_method: BTreeMap::new(),
        ta_total: 0,
        ti_total: 0,
        tfp_total: quality.clone(),
        quality,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn fault_order_is_greedy_permutation(km in kill_matrix()) {
        let o = fault_based_order(&km).unwrap();
        prop_assert!(o.is_permutation_of(&km.mrs));
        prop_assert_eq!(&o, &fault_based_order(&km).unwrap());
        let sets: BTreeMap<String, BTreeSet<usize>> =
            km.mrs.iter().enumerate().map(|(i, id)| (id.clone(), km.kill_set(i))).collect();
        prop_assert_eq!(greedy_violation(&sets, &o.sequence), None);
    }

    #[test]
    fn fault_order_ignores_mutant_column_order(km in kill_matrix(), seed in any::<u64>()) {
        let cols = random_orders(&(0..km.mutants.len()).map(|j| j.to_string()).collect::<Vec<_>>(), 1, seed);
        let perm: Vec<usize> = cols[0].sequence.iter().map(|s| s.parse().unwrap()).collect();
        let mut shuffled = km.clone();
        for r in 0..km.mrs.len() {
            shuffled.kills[r] = perm.iter().map(|&j| km.kills[r][j]).collect();
        }
        shuffled.mutants = perm.iter().map(|&j| km.mutants[j].clone()).collect();
        prop_assert_eq!(fault_based_order(&km).unwrap().sequence, fault_based_order(&shuffled).unwrap().sequence);
    }

    #[test]
    fn centrality_order_ignores_positive_rescaling(
        qualities in prop::collection::vec(0i64..20, 1..8),
        num in 1i64..50,
        den in 1i64..50,
    ) {
        let k = ratio(num, den);
        let plain: Vec<_> = qualities.iter().enumerate().map(|(i, &q)| breakdown(&format!("MR{i}"), int(q))).collect();
        let scaled: Vec<_> = qualities.iter().enumerate().map(|(i, &q)| breakdown(&format!("MR{i}"), int(q) * &k)).collect();
        let o = centrality_order(&plain).unwrap();
        prop_assert_eq!(&o.sequence, &centrality_order(&scaled).unwrap().sequence);
        for w in o.sequence.windows(2) {
            let q = |id: &str| plain.iter().find(|s| s.mr == id).unwrap().quality.clone();
            prop_assert!(q(&w[0]) > q(&w[1]) || (q(&w[0]) == q(&w[1]) && w[0] < w[1]));
        }
    }

    #[test]
    fn random_orders_are_seeded_permutations(n in 1usize..10, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("MR{i:02}")).collect();
        let a = random_orders(&ids, 20, seed);
        prop_assert_eq!(&a, &random_orders(&ids, 20, seed));
        prop_assert!(a.iter().all(|o| o.is_permutation_of(&ids) && o.seed == Some(seed)));
    }

    #[test]
    fn curves_and_apfd_are_well_formed(km in kill_matrix(), seed in any::<u64>()) {
        let o = &random_orders(&km.mrs, 1, seed)[0];
        let curve = effectiveness_curve(o, &km).unwrap();
        prop_assert_eq!(curve.len(), km.mrs.len());
        prop_assert!(curve[0] >= Rational::zero());
        prop_assert!(curve.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(curve.last().unwrap(), &int(100));
        let a = apfd(o, &km).unwrap();
        prop_assert!(a > Rational::zero() && a < int(1));
        let idx: Vec<usize> = o.sequence.iter().map(|id| km.mr_index(id).unwrap()).collect();
        prop_assert_eq!(&a, &apfd_oracle(&idx, &km));
        let ranks = first_detection(o, &km).unwrap();
        prop_assert_eq!(ranks.len(), km.killable_count());
        let t = avg_time_to_detect(o, &km).unwrap();
        prop_assert!(t > Rational::zero());
    }

    #[test]
    fn apfd_strictly_decreases_with_later_detection(
        ranks in prop::collection::vec(1usize..8, 1..10),
        which in any::<prop::sample::Index>(),
    ) {
        let n = 8;
        let i = which.index(ranks.len());
        prop_assume!(ranks[i] < n);
        let mut later = ranks.clone();
        later[i] += 1;
        prop_assert!(apfd_from_ranks(&later, n) < apfd_from_ranks(&ranks, n));
    }

    #[test]
    fn effective_size_is_first_small_gain(km in kill_matrix(), t in 1u32..40) {
        let o = fault_based_order(&km).unwrap();
        let curve = effectiveness_curve(&o, &km).unwrap();
        let threshold = ratio(t as i64, 2);
        let m = effective_set_size(&curve, &threshold);
        prop_assert!((1..=km.mrs.len()).contains(&m));
        // curve[k] is the kill percentage after k + 1 relations.
        for k in 1..m {
            prop_assert!(&curve[k] - &curve[k - 1] >= threshold);
        }
        if m < km.mrs.len() {
            prop_assert!(&curve[m] - &curve[m - 1] < threshold);
        }
    }
}

#[test]
fn greedy_never_beats_the_best_permutation() {
    for seed in 0..60u64 {
        let mut rng = seeded(seed);
        let n = 2 + (seed as usize % 5);
        let km = random_matrix(&mut rng, n, 7, 0.35);
        let best = permutations(n).iter().map(|p| apfd_oracle(p, &km)).max().unwrap();
        let greedy = apfd(&fault_based_order(&km).unwrap(), &km).unwrap();
        assert!(greedy <= best);
        for p in permutations(n) {
            assert_eq!(apfd(&ordering(&km, &p), &km).unwrap(), apfd_oracle(&p, &km));
        }
    }
}

#[test]
fn evaluation_rejects_bad_inputs() {
    let km = matrix(vec![vec![true, false], vec![false, false]]);
    let short = ordering(&km, &[0]);
    assert!(evaluate(&short, &km, &[int(5)]).is_err());
    let dead = matrix(vec![vec![false], vec![false]]);
    assert!(apfd(&ordering(&dead, &[0, 1]), &dead).is_err());
    assert!(baseline_average(&[], &km, &[int(5)]).is_err());
}

#[test]
fn baseline_mean_of_identical_orders_is_that_order() {
    let km = random_matrix(&mut seeded(9), 5, 9, 0.3);
    let o = ordering(&km, &[4, 2, 0, 1, 3]);
    let single = evaluate(&o, &km, &[int(5)]).unwrap();
    let mut copies = vec![o.clone(); 4];
    for c in &mut copies {
        c.strategy = Kind::Random;
    }
    let mean = baseline_average(&copies, &km, &[int(5)]).unwrap();
    assert_eq!(mean.curve, single.curve);
    assert_eq!(mean.apfd, single.apfd);
    assert_eq!(mean.avg_time_steps, single.avg_time_steps);
    assert_eq!(mean.orderings, 4);
    assert_eq!(mean.sequence, None);
}
