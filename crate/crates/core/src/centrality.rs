//! Statement-centrality weights and the per-relation quality score.
//!
//! For each covered function, `B_r` is the covered part of the backward slice
//! from the returns. Each `s` in `B_r` contributes the size of its covered
//! forward slice (affected statements), the summed forward-slice sizes of
//! those statements (projected impact), and `1 / (operators + hops to the
//! nearest return)` (fault propagation). Per-function sums are added across
//! functions.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dependence::{
    backward_slice, distance_to_output, forward_slice, pdg_for, restrict_to_covered, Direction, Pdg,
    SliceSet,
};
use crate::exec::CoverageUnion;
use crate::minilang::{build_cfg, Cfg, Function, Program, StatementId};
use crate::rational::{int, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CentralityError {
    #[error("relation `{0}` covers no statements")]
    EmptyCoverage(String),
    #[error("coverage was recorded on program {coverage} but the analysis is of {analysis}")]
    DigestMismatch { coverage: String, analysis: String },
}

/// Everything scoring needs to know about one function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionAnalysis {
    pub name: String,
    pub cfg: Cfg,
    pub pdg: Pdg,
    pub operators: BTreeMap<StatementId, u32>,
}

impl FunctionAnalysis {
    pub fn of(f: &Function) -> Self {
        let cfg = build_cfg(f);
        let pdg = pdg_for(f, &cfg);
        let operators = f
            .statements()
            .into_iter()
            .map(|s| (s.id, s.operator_count()))
            .collect();
        FunctionAnalysis {
            name: f.name.clone(),
            cfg,
            pdg,
            operators,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramAnalysis {
    pub program_digest: String,
    pub functions: Vec<FunctionAnalysis>,
}

impl ProgramAnalysis {
    pub fn of(p: &Program) -> Self {
        ProgramAnalysis {
            program_digest: p.source_digest.clone(),
            functions: p.functions.iter().map(FunctionAnalysis::of).collect(),
        }
    }

    pub fn function(&self, name: &str) -> Option<&FunctionAnalysis> {
        self.functions.iter().find(|f| f.name == name)
    }
}

/// Covered backward slice from the returns, returns included. Empty when the
/// function was never entered.
pub fn compute_br(pdg: &Pdg, cfg: &Cfg, u: &CoverageUnion) -> SliceSet {
    let seeds: BTreeSet<StatementId> = cfg.returns.clone();
    if pdg.statements.is_disjoint(&u.statements) {
        return SliceSet {
            seeds,
            direction: Direction::Backward,
            members: BTreeSet::new(),
        };
    }
    let slice = backward_slice(pdg, &seeds).expect("returns belong to their function");
    let mut full = slice.clone();
    full.members = slice.with_seeds();
    restrict_to_covered(&full, u)
}

fn covered_forward(pdg: &Pdg, s: StatementId, u: &CoverageUnion) -> BTreeSet<StatementId> {
    let slice = forward_slice(pdg, s).expect("slice seeds belong to the dependence graph");
    restrict_to_covered(&slice, u).members
}

/// `SA_s` for each `s` in `B_r`, and their sum.
pub fn statements_affected(
    pdg: &Pdg,
    br: &SliceSet,
    u: &CoverageUnion,
) -> (BTreeMap<StatementId, u64>, u64) {
    let per: BTreeMap<StatementId, u64> = br
        .members
        .iter()
        .map(|&s| (s, covered_forward(pdg, s, u).len() as u64))
        .collect();
    let total = per.values().sum();
    (per, total)
}

/// Per-statement projected impact (sum of `SI_{s'}` over the covered forward
/// slice of `s`), and the total. A statement reached from several members of
/// `B_r` is counted once for each.
pub fn projected_impact(
    pdg: &Pdg,
    br: &SliceSet,
    u: &CoverageUnion,
) -> (BTreeMap<StatementId, u64>, u64) {
    let mut sizes: BTreeMap<StatementId, u64> = BTreeMap::new();
    let mut size_of = |s: StatementId| -> u64 {
        *sizes
            .entry(s)
            .or_insert_with(|| covered_forward(pdg, s, u).len() as u64)
    };
    let mut per = BTreeMap::new();
    for &s in &br.members {
        let impacted = covered_forward(pdg, s, u);
        let contribution = impacted.into_iter().map(&mut size_of).sum();
        per.insert(s, contribution);
    }
    let total = per.values().sum();
    (per, total)
}

/// `PF_s` for each `s` in `B_r`, and `TFP`. A zero denominator gives 1.
pub fn fault_propagation(
    operators: &BTreeMap<StatementId, u32>,
    cfg: &Cfg,
    br: &SliceSet,
) -> (BTreeMap<StatementId, Rational>, Rational) {
    let per: BTreeMap<StatementId, Rational> = br
        .members
        .iter()
        .map(|&s| {
            let ops = operators.get(&s).copied().unwrap_or(0) as i64;
            let hops = distance_to_output(cfg, s).expect("statement belongs to this CFG") as i64;
            let denom = ops + hops;
            let pf = if denom == 0 {
                Rational::one()
            } else {
                Rational::one() / int(denom)
            };
            (s, pf)
        })
        .collect();
    let total = per.values().cloned().sum();
    (per, total)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodScore {
    pub br: BTreeSet<StatementId>,
    pub sa: BTreeMap<StatementId, u64>,
    pub impact: BTreeMap<StatementId, u64>,
    pub pf: BTreeMap<StatementId, Rational>,
    pub ta: u64,
    pub ti: u64,
    pub tfp: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreBreakdown {
    pub mr: String,
    /// Covered functions only, by name.
    pub per_method: BTreeMap<String, MethodScore>,
    pub ta_total: u64,
    pub ti_total: u64,
    pub tfp_total: Rational,
    pub quality: Rational,
}

pub fn score_function(fa: &FunctionAnalysis, u: &CoverageUnion) -> Option<MethodScore> {
    let br = compute_br(&fa.pdg, &fa.cfg, u);
    if fa.pdg.statements.is_disjoint(&u.statements) {
        return None;
    }
    let (sa, ta) = statements_affected(&fa.pdg, &br, u);
    let (impact, ti) = projected_impact(&fa.pdg, &br, u);
    let (pf, tfp) = fault_propagation(&fa.operators, &fa.cfg, &br);
    Some(MethodScore {
        br: br.members,
        sa,
        impact,
        pf,
        ta,
        ti,
        tfp,
    })
}

/// Quality score of one relation from the coverage of its source and
/// follow-up runs.
pub fn mr_quality_score(
    analysis: &ProgramAnalysis,
    mr: &str,
    coverage: &CoverageUnion,
) -> Result<ScoreBreakdown, CentralityError> {
    if coverage.statements.is_empty() {
        return Err(CentralityError::EmptyCoverage(mr.to_string()));
    }
    if !coverage.program_digest.is_empty()
        && !analysis.program_digest.is_empty()
        && coverage.program_digest != analysis.program_digest
    {
        return Err(CentralityError::DigestMismatch {
            coverage: coverage.program_digest.clone(),
            analysis: analysis.program_digest.clone(),
        });
    }
    let mut per_method = BTreeMap::new();
    for fa in &analysis.functions {
        if let Some(score) = score_function(fa, coverage) {
            per_method.insert(fa.name.clone(), score);
        }
    }
    let ta_total = per_method.values().map(|m| m.ta).sum();
    let ti_total = per_method.values().map(|m| m.ti).sum();
    let tfp_total: Rational = per_method
        .values()
        .fold(Rational::zero(), |acc, m| acc + &m.tfp);
    let quality = int(ta_total as i64) + int(ti_total as i64) + &tfp_total;
    Ok(ScoreBreakdown {
        mr: mr.to_string(),
        per_method,
        ta_total,
        ti_total,
        tfp_total,
        quality,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::execute;
    use crate::minilang::parse;
    use crate::rational::ratio;

    const P0: &str = "fn sum(a:[int])->int { total=0; i=0; while(i<len(a)){ total=total+a[i]; i=i+1 } return total }";

    fn ids(v: &[u32]) -> BTreeSet<StatementId> {
        v.iter().map(|&i| StatementId(i)).collect()
    }

    fn cover(p: &Program, v: &[u32]) -> CoverageUnion {
        CoverageUnion {
            program_digest: p.source_digest.clone(),
            statements: ids(v),
            branches: BTreeSet::new(),
        }
    }

    #[test]
    fn br_of_p0() {
        let p = parse(P0).unwrap();
        let a = ProgramAnalysis::of(&p);
        let f = &a.functions[0];
        assert_eq!(compute_br(&f.pdg, &f.cfg, &cover(&p, &[1, 2, 3, 4, 5, 6])).members, ids(&[1, 2, 3, 4, 5, 6]));
        assert_eq!(compute_br(&f.pdg, &f.cfg, &cover(&p, &[1, 2, 3, 6])).members, ids(&[1, 2, 3, 6]));
        assert!(compute_br(&f.pdg, &f.cfg, &cover(&p, &[])).members.is_empty());
    }

    #[test]
    fn p0_full_coverage_metrics() {
        let p = parse(P0).unwrap();
        let a = ProgramAnalysis::of(&p);
        let s = mr_quality_score(&a, "r", &cover(&p, &[1, 2, 3, 4, 5, 6])).unwrap();
        let m = &s.per_method["sum"];
        assert_eq!(m.sa[&StatementId(1)], 2);
        assert_eq!(m.sa[&StatementId(2)], 4);
        assert_eq!(m.pf[&StatementId(4)], ratio(1, 4));
        assert_eq!(m.pf[&StatementId(3)], ratio(1, 2));
        assert_eq!(m.pf[&StatementId(6)], ratio(1, 1));
        assert_eq!(s.quality, int(s.ta_total as i64) + int(s.ti_total as i64) + &s.tfp_total);
    }

    #[test]
    fn straight_line_impact() {
        let p = parse("fn f(x:int)->int{ a = x + 1; b = a * 2; return b }").unwrap();
        let a = ProgramAnalysis::of(&p);
        let f = &a.functions[0];
        let u = cover(&p, &[1, 2, 3]);
        let br = compute_br(&f.pdg, &f.cfg, &u);
        let (_, ti) = projected_impact(&f.pdg, &br, &u);
        assert_eq!(ti, 1);
    }

    #[test]
    fn single_return() {
        let p = parse("fn f(x:int)->int{ return x }").unwrap();
        let a = ProgramAnalysis::of(&p);
        let s = mr_quality_score(&a, "r", &cover(&p, &[1])).unwrap();
        assert_eq!((s.ta_total, s.ti_total), (0, 0));
        assert_eq!(s.quality, int(1));
    }

    #[test]
    fn uncovered_functions_are_skipped() {
        let p = parse("fn g(x:int)->int{ return x + 1 } fn f(x:int)->int{ return x }").unwrap();
        let a = ProgramAnalysis::of(&p);
        let s = mr_quality_score(&a, "r", &cover(&p, &[2])).unwrap();
        assert_eq!(s.per_method.keys().collect::<Vec<_>>(), vec!["f"]);
    }

    #[test]
    fn empty_coverage_is_rejected() {
        let p = parse(P0).unwrap();
        let a = ProgramAnalysis::of(&p);
        assert_eq!(
            mr_quality_score(&a, "r", &cover(&p, &[])),
            Err(CentralityError::EmptyCoverage("r".into()))
        );
    }

    #[test]
    fn coverage_from_a_run() {
        let p = parse(P0).unwrap();
        let prof = execute(&p, "sum", &[crate::exec::Value::Array(vec![])], 1000).unwrap();
        let u = crate::exec::coverage_union(&[prof]).unwrap();
        let s = mr_quality_score(&ProgramAnalysis::of(&p), "r", &u).unwrap();
        assert_eq!(s.per_method["sum"].br, ids(&[1, 2, 3, 6]));
    }
}
