//! Measures of how quickly an ordering detects faults: cumulative kill
//! curves, effective set size, average time to detection, and APFD.
//!
//! Mutants that no relation kills are left out of every denominator.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use rayon::prelude::*;
use thiserror::Error;

use crate::mutation::KillMatrix;
use crate::prioritize::{Ordering, Strategy};
use crate::rational::{int, mean, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvaluateError {
    #[error("no relation kills any mutant")]
    NoKillableMutants,
    #[error("ordering is not a permutation of the kill matrix relations")]
    OrderingMismatch,
    #[error("orderings range over different relation sets")]
    MixedMrSets,
    #[error("no orderings to average")]
    NoOrderings,
}

fn rows(o: &Ordering, km: &KillMatrix) -> Result<Vec<usize>, EvaluateError> {
    if !o.is_permutation_of(&km.mrs) {
        return Err(EvaluateError::OrderingMismatch);
    }
    let index: BTreeMap<&str, usize> = km
        .mrs
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    Ok(o.sequence.iter().map(|id| index[id.as_str()]).collect())
}

/// 1-based position of the first relation in `o` killing each killable
/// mutant, in mutant order.
pub fn first_detection(o: &Ordering, km: &KillMatrix) -> Result<Vec<usize>, EvaluateError> {
    let order = rows(o, km)?;
    let killable = km.killable();
    if killable.is_empty() {
        return Err(EvaluateError::NoKillableMutants);
    }
    Ok(killable
        .iter()
        .map(|&j| {
            order
                .iter()
                .position(|&r| km.kills[r][j])
                .expect("killable mutants have a killer")
                + 1
        })
        .collect())
}

/// Percentage of killable mutants killed by the first `m` relations, for
/// `m = 1..=n`.
pub fn effectiveness_curve(o: &Ordering, km: &KillMatrix) -> Result<Vec<Rational>, EvaluateError> {
    let order = rows(o, km)?;
    let killable = km.killable_count();
    if killable == 0 {
        return Err(EvaluateError::NoKillableMutants);
    }
    let mut killed = BTreeSet::new();
    Ok(order
        .into_iter()
        .map(|r| {
            killed.extend(km.kill_set(r));
            int(100) * int(killed.len() as i64) / int(killable as i64)
        })
        .collect())
}

/// Smallest `m` whose next step gains less than `threshold` percentage
/// points; `n` when every step gains at least that much.
pub fn effective_set_size(curve: &[Rational], threshold: &Rational) -> usize {
    for m in 1..curve.len() {
        if &(&curve[m] - &curve[m - 1]) < threshold {
            return m;
        }
    }
    curve.len()
}

/// Mean, over killable mutants, of the summed cost of every relation run up
/// to and including the first one that kills it.
pub fn avg_time_to_detect(o: &Ordering, km: &KillMatrix) -> Result<Rational, EvaluateError> {
    let order = rows(o, km)?;
    let ranks = first_detection(o, km)?;
    let mut prefix = Vec::with_capacity(order.len());
    let mut acc = 0u64;
    for &r in &order {
        acc += km.cost(r);
        prefix.push(acc);
    }
    let total: u64 = ranks.iter().map(|&k| prefix[k - 1]).sum();
    Ok(int(total as i64) / int(ranks.len() as i64))
}

/// `1 - sum(ranks) / (n m) + 1 / (2 n)`.
pub fn apfd_from_ranks(ranks: &[usize], n: usize) -> Rational {
    let m = ranks.len() as i64;
    let n = n as i64;
    let sum: i64 = ranks.iter().map(|&r| r as i64).sum();
    int(1) - int(sum) / int(n * m) + int(1) / int(2 * n)
}

pub fn apfd(o: &Ordering, km: &KillMatrix) -> Result<Rational, EvaluateError> {
    let ranks = first_detection(o, km)?;
    Ok(apfd_from_ranks(&ranks, km.mrs.len()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationReport {
    pub strategy: Strategy,
    /// The evaluated ordering; `None` for an average over several.
    pub sequence: Option<Vec<String>>,
    pub orderings: usize,
    pub curve: Vec<Rational>,
    pub effective_size: Vec<(Rational, usize)>,
    pub apfd: Rational,
    pub avg_time_steps: Rational,
    pub killable_count: usize,
    pub mr_count: usize,
}

impl EvaluationReport {
    pub fn final_kill_pct(&self) -> Rational {
        self.curve.last().cloned().unwrap_or_else(Rational::zero)
    }
}

pub fn evaluate(o: &Ordering, km: &KillMatrix, thresholds: &[Rational]) -> Result<EvaluationReport, EvaluateError> {
    let curve = effectiveness_curve(o, km)?;
    Ok(EvaluationReport {
        strategy: o.strategy,
        sequence: Some(o.sequence.clone()),
        orderings: 1,
        effective_size: thresholds
            .iter()
            .map(|t| (t.clone(), effective_set_size(&curve, t)))
            .collect(),
        curve,
        apfd: apfd(o, km)?,
        avg_time_steps: avg_time_to_detect(o, km)?,
        killable_count: km.killable_count(),
        mr_count: km.mrs.len(),
    })
}

/// Pointwise mean curve, mean APFD and mean detection time over `orders`.
/// Effective sizes are read off the mean curve.
pub fn baseline_average(
    orders: &[Ordering],
    km: &KillMatrix,
    thresholds: &[Rational],
) -> Result<EvaluationReport, EvaluateError> {
    let first = orders.first().ok_or(EvaluateError::NoOrderings)?;
    if orders.iter().any(|o| !o.is_permutation_of(&first.sequence)) {
        return Err(EvaluateError::MixedMrSets);
    }
    let reports: Vec<EvaluationReport> = orders
        .par_iter()
        .map(|o| evaluate(o, km, &[]))
        .collect::<Result<_, _>>()?;
    let n = first.sequence.len();
    let curve: Vec<Rational> = (0..n)
        .map(|i| mean(&reports.iter().map(|r| r.curve[i].clone()).collect::<Vec<_>>()))
        .collect();
    Ok(EvaluationReport {
        strategy: first.strategy,
        sequence: None,
        orderings: orders.len(),
        effective_size: thresholds
            .iter()
            .map(|t| (t.clone(), effective_set_size(&curve, t)))
            .collect(),
        curve,
        apfd: mean(&reports.iter().map(|r| r.apfd.clone()).collect::<Vec<_>>()),
        avg_time_steps: mean(&reports.iter().map(|r| r.avg_time_steps.clone()).collect::<Vec<_>>()),
        killable_count: km.killable_count(),
        mr_count: km.mrs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mutation::MatrixRole;
    use crate::rational::{ratio, to_fixed};

    fn km(rows: &[(&str, &[usize])], faults: usize, costs: &[u64]) -> KillMatrix {
        KillMatrix {
            role: MatrixRole::Validation,
            mrs: rows.iter().map(|(id, _)| id.to_string()).collect(),
            mutants: (0..faults).map(|j| format!("f{j}")).collect(),
            kills: rows
                .iter()
                .map(|(_, ks)| (0..faults).map(|j| ks.contains(&j)).collect())
                .collect(),
            mr_cost_steps: costs.to_vec(),
        }
    }

    fn ord(seq: &[&str]) -> Ordering {
        Ordering {
            strategy: Strategy::Centrality,
            sequence: seq.iter().map(|s| s.to_string()).collect(),
            seed: None,
            provenance: BTreeMap::new(),
        }
    }

    #[test]
    fn curve_and_effective_size() {
        let m = km(&[("A", &[0]), ("B", &[0, 1]), ("C", &[2])], 4, &[1, 1, 1]);
        let curve = effectiveness_curve(&ord(&["B", "C", "A"]), &m).unwrap();
        let shown: Vec<String> = curve.iter().map(|c| to_fixed(c, 1)).collect();
        assert_eq!(shown, ["66.7", "100.0", "100.0"]);
        assert_eq!(effective_set_size(&curve, &int(5)), 2);
        assert_eq!(effective_set_size(&[int(100), int(100), int(100)], &int(5)), 1);
        assert_eq!(effective_set_size(&[int(10), int(20), int(30)], &int(5)), 3);
    }

    #[test]
    fn detection_time() {
        let m = km(&[("MR1", &[1]), ("MR2", &[0])], 2, &[10, 20]);
        assert_eq!(avg_time_to_detect(&ord(&["MR1", "MR2"]), &m).unwrap(), int(20));
        let single = km(&[("A", &[0])], 1, &[7]);
        assert_eq!(avg_time_to_detect(&ord(&["A"]), &single).unwrap(), int(7));
    }

    #[test]
    fn apfd_anchors() {
        assert_eq!(apfd_from_ranks(&[1], 1), ratio(1, 2));
        assert_eq!(apfd_from_ranks(&[1, 3], 3), ratio(1, 2));
        assert_eq!(apfd_from_ranks(&[1, 1, 1], 4), int(1) - ratio(1, 8));
    }

    #[test]
    fn nothing_killable() {
        let m = km(&[("A", &[])], 2, &[1]);
        assert_eq!(apfd(&ord(&["A"]), &m), Err(EvaluateError::NoKillableMutants));
        assert_eq!(effectiveness_curve(&ord(&["A"]), &m), Err(EvaluateError::NoKillableMutants));
    }

    #[test]
    fn averaging() {
        let m = km(&[("A", &[0]), ("B", &[0, 1])], 2, &[1, 1]);
        let avg = baseline_average(&[ord(&["A", "B"]), ord(&["B", "A"])], &m, &[int(5)]).unwrap();
        assert_eq!(avg.curve, vec![int(75), int(100)]);
        assert_eq!(
            baseline_average(&[ord(&["A", "B"]), ord(&["A", "C"])], &m, &[]),
            Err(EvaluateError::MixedMrSets)
        );
        let same = baseline_average(&[ord(&["A", "B"]), ord(&["A", "B"])], &m, &[]).unwrap();
        assert_eq!(same.apfd, apfd(&ord(&["A", "B"]), &m).unwrap());
    }
}
