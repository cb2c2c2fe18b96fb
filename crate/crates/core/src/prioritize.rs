//! Relation orderings: centrality, fault-based greedy, coverage greedy, and
//! seeded random permutations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::centrality::ScoreBreakdown;
use crate::exec::CoverageUnion;
use crate::mutation::KillMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Centrality,
    FaultBased,
    StmtCoverage,
    BranchCoverage,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Centrality,
        Strategy::FaultBased,
        Strategy::StmtCoverage,
        Strategy::BranchCoverage,
        Strategy::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Centrality => "centrality",
            Strategy::FaultBased => "fault_based",
            Strategy::StmtCoverage => "stmt_coverage",
            Strategy::BranchCoverage => "branch_coverage",
            Strategy::Random => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ordering {
    pub strategy: Strategy,
    pub sequence: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Digests of the artifacts the ordering was derived from.
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

impl Ordering {
    fn new(strategy: Strategy, sequence: Vec<String>, seed: Option<u64>) -> Self {
        Ordering {
            strategy,
            sequence,
            seed,
            provenance: BTreeMap::new(),
        }
    }

    /// Whether `sequence` is a permutation of `ids`.
    pub fn is_permutation_of(&self, ids: &[String]) -> bool {
        let mut a = self.sequence.clone();
        let mut b = ids.to_vec();
        a.sort();
        b.sort();
        a == b
    }

    /// The first `n` relations.
    pub fn top(&self, n: usize) -> &[String] {
        &self.sequence[..n.min(self.sequence.len())]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrioritizeError {
    #[error("relation `{0}` appears more than once")]
    DuplicateMr(String),
    #[error("kill matrix has no relations")]
    EmptyMatrix,
    #[error("coverage comes from different programs ({0} vs {1})")]
    MixedProgramDigest(String, String),
}

fn check_unique<'a>(ids: impl IntoIterator<Item = &'a String>) -> Result<(), PrioritizeError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(PrioritizeError::DuplicateMr(id.clone()));
        }
    }
    Ok(())
}

/// Quality descending, ties by id ascending.
pub fn centrality_order(scores: &[ScoreBreakdown]) -> Result<Ordering, PrioritizeError> {
    check_unique(scores.iter().map(|s| &s.mr))?;
    let mut sorted: Vec<&ScoreBreakdown> = scores.iter().collect();
    sorted.sort_by(|a, b| b.quality.cmp(&a.quality).then_with(|| a.mr.cmp(&b.mr)));
    Ok(Ordering::new(
        Strategy::Centrality,
        sorted.into_iter().map(|s| s.mr.clone()).collect(),
        None,
    ))
}

/// Additional greedy over `sets`. When nothing left adds to what has been
/// covered, the covered set is cleared and selection continues. `pick`
/// chooses among the tied candidates (given in id order).
pub fn additional_greedy<T: Ord + Clone>(
    items: &[(String, BTreeSet<T>)],
    mut pick: impl FnMut(&[usize]) -> usize,
) -> Vec<String> {
    let universe: BTreeSet<T> = items.iter().flat_map(|(_, s)| s.iter().cloned()).collect();
    let mut remaining: Vec<usize> = (0..items.len()).collect();
    remaining.sort_by(|&a, &b| items[a].0.cmp(&items[b].0));
    let mut uncovered = universe.clone();
    let mut out = Vec::with_capacity(items.len());
    while !remaining.is_empty() {
        let gain = |i: usize, unc: &BTreeSet<T>| items[i].1.intersection(unc).count();
        let mut best = remaining.iter().map(|&i| gain(i, &uncovered)).max().unwrap_or(0);
        if best == 0 && uncovered != universe {
            uncovered = universe.clone();
            best = remaining.iter().map(|&i| gain(i, &uncovered)).max().unwrap_or(0);
        }
        let tied: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| gain(i, &uncovered) == best)
            .collect();
        let chosen = tied[pick(&tied).min(tied.len() - 1)];
        for t in &items[chosen].1 {
            uncovered.remove(t);
        }
        remaining.retain(|&i| i != chosen);
        out.push(items[chosen].0.clone());
    }
    out
}

/// Greedy on not-yet-killed mutants; ties by id.
pub fn fault_based_order(km: &KillMatrix) -> Result<Ordering, PrioritizeError> {
    if km.mrs.is_empty() {
        return Err(PrioritizeError::EmptyMatrix);
    }
    check_unique(&km.mrs)?;
    let items: Vec<(String, BTreeSet<usize>)> = km
        .mrs
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), km.kill_set(i)))
        .collect();
    Ok(Ordering::new(
        Strategy::FaultBased,
        additional_greedy(&items, |_| 0),
        None,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageUnit {
    Statement,
    Branch,
}

/// Greedy on not-yet-covered statements or branches; ties broken by a
/// uniform draw from a generator seeded with `seed`.
pub fn coverage_order(
    coverage: &[(String, CoverageUnion)],
    unit: CoverageUnit,
    seed: u64,
) -> Result<Ordering, PrioritizeError> {
    check_unique(coverage.iter().map(|(id, _)| id))?;
    if let Some((_, first)) = coverage.first() {
        if let Some((_, other)) = coverage
            .iter()
            .find(|(_, c)| c.program_digest != first.program_digest)
        {
            return Err(PrioritizeError::MixedProgramDigest(
                first.program_digest.clone(),
                other.program_digest.clone(),
            ));
        }
    }
    let items: Vec<(String, BTreeSet<String>)> = coverage
        .iter()
        .map(|(id, c)| {
            let units = match unit {
                CoverageUnit::Statement => c.statements.iter().map(|s| s.to_string()).collect(),
                CoverageUnit::Branch => c
                    .branches
                    .iter()
                    .map(|(s, b)| format!("{s}:{b:?}"))
                    .collect(),
            };
            (id.clone(), units)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sequence = additional_greedy(&items, |tied| {
        if tied.len() == 1 {
            0
        } else {
            rng.random_range(0..tied.len())
        }
    });
    let strategy = match unit {
        CoverageUnit::Statement => Strategy::StmtCoverage,
        CoverageUnit::Branch => Strategy::BranchCoverage,
    };
    Ok(Ordering::new(strategy, sequence, Some(seed)))
}

/// `count` uniform permutations of `ids` from one seeded generator.
pub fn random_orders(ids: &[String], count: usize, seed: u64) -> Vec<Ordering> {
    let mut base = ids.to_vec();
    base.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut seq = base.clone();
            seq.shuffle(&mut rng);
            Ordering::new(Strategy::Random, seq, Some(seed))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{BranchTag, StatementId};
    use crate::mutation::MatrixRole;
    use crate::rational::{int, ratio, Rational};

    fn score(mr: &str, q: Rational) -> ScoreBreakdown {
        ScoreBreakdown {
            mr: mr.into(),
            per_method: BTreeMap::new(),
            ta_total: 0,
            ti_total: 0,
            tfp_total: q.clone(),
            quality: q,
        }
    }

    fn km(rows: &[(&str, &[usize])], faults: usize) -> KillMatrix {
        KillMatrix {
            role: MatrixRole::Prioritizing,
            mrs: rows.iter().map(|(id, _)| id.to_string()).collect(),
            mutants: (0..faults).map(|j| format!("f{j}")).collect(),
            kills: rows
                .iter()
                .map(|(_, ks)| (0..faults).map(|j| ks.contains(&j)).collect())
                .collect(),
            mr_cost_steps: vec![1; rows.len()],
        }
    }

    fn cov(stmts: &[u32]) -> CoverageUnion {
        CoverageUnion {
            program_digest: "d".into(),
            statements: stmts.iter().map(|&s| StatementId(s)).collect(),
            branches: BTreeSet::new(),
        }
    }

    #[test]
    fn centrality_sorting() {
        let o = centrality_order(&[score("A", ratio(253, 5)), score("B", ratio(16, 5)), score("C", int(7))]).unwrap();
        assert_eq!(o.sequence, ["A", "C", "B"]);
        let tied = centrality_order(&[score("b", int(1)), score("a", int(1))]).unwrap();
        assert_eq!(tied.sequence, ["a", "b"]);
        assert_eq!(
            centrality_order(&[score("a", int(1)), score("a", int(2))]),
            Err(PrioritizeError::DuplicateMr("a".into()))
        );
    }

    #[test]
    fn fault_greedy_trace() {
        let o = fault_based_order(&km(&[("A", &[0, 1, 2]), ("B", &[0]), ("C", &[3])], 4)).unwrap();
        assert_eq!(o.sequence, ["A", "C", "B"]);
        let none = fault_based_order(&km(&[("c", &[]), ("a", &[]), ("b", &[])], 2)).unwrap();
        assert_eq!(none.sequence, ["a", "b", "c"]);
        let same = fault_based_order(&km(&[("y", &[1]), ("x", &[1])], 2)).unwrap();
        assert_eq!(same.sequence, ["x", "y"]);
        assert_eq!(fault_based_order(&km(&[], 2)), Err(PrioritizeError::EmptyMatrix));
    }

    #[test]
    fn coverage_greedy_trace() {
        let input = vec![
            ("A".to_string(), cov(&[1, 2, 3])),
            ("B".to_string(), cov(&[3, 4])),
            ("C".to_string(), cov(&[1])),
        ];
        let o = coverage_order(&input, CoverageUnit::Statement, 0).unwrap();
        assert_eq!(o.sequence, ["A", "B", "C"]);

        let tie = vec![("A".to_string(), cov(&[1, 2])), ("B".to_string(), cov(&[1, 2]))];
        assert_eq!(
            coverage_order(&tie, CoverageUnit::Statement, 0).unwrap(),
            coverage_order(&tie, CoverageUnit::Statement, 0).unwrap()
        );
    }

    #[test]
    fn branchless_relation_goes_last() {
        let mut a = cov(&[1]);
        a.branches.insert((StatementId(1), BranchTag::True));
        let mut b = cov(&[1]);
        b.branches.insert((StatementId(1), BranchTag::False));
        let input = vec![("Z".to_string(), cov(&[1])), ("A".to_string(), a), ("B".to_string(), b)];
        for seed in 0..10 {
            let o = coverage_order(&input, CoverageUnit::Branch, seed).unwrap();
            assert_eq!(o.sequence[2], "Z");
        }
    }

    #[test]
    fn mixed_digests() {
        let mut other = cov(&[1]);
        other.program_digest = "e".into();
        let input = vec![("A".to_string(), cov(&[1])), ("B".to_string(), other)];
        assert!(matches!(
            coverage_order(&input, CoverageUnit::Statement, 0),
            Err(PrioritizeError::MixedProgramDigest(..))
        ));
    }

    #[test]
    fn random_permutations() {
        let ids: Vec<String> = (0..8).map(|i| format!("MR{i}")).collect();
        let os = random_orders(&ids, 100, 7);
        assert_eq!(os.len(), 100);
        assert!(os.iter().all(|o| o.is_permutation_of(&ids)));
        assert_eq!(os, random_orders(&ids, 100, 7));
        let single = random_orders(&ids[..1], 5, 1);
        assert!(single.iter().all(|o| o.sequence == ["MR0"]));
    }
}
