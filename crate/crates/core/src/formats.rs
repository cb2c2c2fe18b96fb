//! On-disk JSON and CSV documents.
//!
//! Every document is written with sorted object keys, two-space indentation
//! and a trailing newline so that identical inputs give identical bytes.
//! Rationals are written as a 6-digit decimal plus an exact `num/den` string.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::centrality::{MethodScore, ScoreBreakdown};
use crate::exec::CoverageUnion;
use crate::evaluate::EvaluationReport;
use crate::minilang::StatementId;
use crate::mt::{MrRunResult, MrSpec, SuiteRole, TestSuite, Verdict};
use crate::mutation::{AorMode, Mutant, MutantStatus, MutationOperator};
use crate::prioritize::{Ordering, Strategy};
use crate::rational::{to_exact, to_fixed, Rational};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed rational `{0}`")]
    Rational(String),
}

/// Canonical JSON text for any serializable value.
pub fn to_json<T: Serialize>(value: &T) -> String {
    // Going through `Value` sorts object keys.
    let v = serde_json::to_value(value).expect("document types serialize");
    let mut out = serde_json::to_string_pretty(&v).expect("values serialize");
    out.push('\n');
    out
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, FormatError> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decimal {
    pub decimal: String,
    pub exact: String,
}

impl Decimal {
    pub fn of(r: &Rational, digits: u32) -> Self {
        Decimal {
            decimal: to_fixed(r, digits),
            exact: to_exact(r),
        }
    }

    pub fn value(&self) -> Result<Rational, FormatError> {
        parse_rational(&self.exact)
    }
}

pub fn parse_rational(s: &str) -> Result<Rational, FormatError> {
    s.trim()
        .parse::<Rational>()
        .map_err(|_| FormatError::Rational(s.to_string()))
}

/// Relation catalog: a JSON array of relation specs.
pub fn parse_mrs(text: &str) -> Result<Vec<MrSpec>, FormatError> {
    from_json(text)
}

pub fn parse_suite(text: &str) -> Result<TestSuite, FormatError> {
    from_json(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub test_id: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MrProfile {
    pub mr: String,
    pub coverage: CoverageUnion,
    pub cost_steps: u64,
    pub cases: Vec<CaseSummary>,
}

impl From<&MrRunResult> for MrProfile {
    fn from(r: &MrRunResult) -> Self {
        MrProfile {
            mr: r.mr.clone(),
            coverage: r.coverage.clone(),
            cost_steps: r.cost_steps,
            cases: r
                .cases
                .iter()
                .map(|c| CaseSummary {
                    test_id: c.test_id.clone(),
                    verdict: c.verdict,
                    reason: c.reason.clone(),
                })
                .collect(),
        }
    }
}

/// Coverage and verdicts of every relation on one source suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfilesDoc {
    pub program_digest: String,
    pub suite: SuiteRole,
    pub mrs: Vec<MrProfile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodScoreDoc {
    pub br: Vec<StatementId>,
    pub sa: BTreeMap<StatementId, u64>,
    pub impact: BTreeMap<StatementId, u64>,
    pub pf: BTreeMap<StatementId, String>,
    pub ta: u64,
    pub ti: u64,
    pub tfp: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreDoc {
    pub mr: String,
    pub per_method: BTreeMap<String, MethodScoreDoc>,
    pub ta_total: u64,
    pub ti_total: u64,
    pub tfp_total: Decimal,
    pub quality: Decimal,
}

impl From<&ScoreBreakdown> for ScoreDoc {
    fn from(s: &ScoreBreakdown) -> Self {
        ScoreDoc {
            mr: s.mr.clone(),
            per_method: s
                .per_method
                .iter()
                .map(|(name, m)| {
                    let doc = MethodScoreDoc {
                        br: m.br.iter().copied().collect(),
                        sa: m.sa.clone(),
                        impact: m.impact.clone(),
                        pf: m.pf.iter().map(|(k, v)| (*k, to_exact(v))).collect(),
                        ta: m.ta,
                        ti: m.ti,
                        tfp: Decimal::of(&m.tfp, 6),
                    };
                    (name.clone(), doc)
                })
                .collect(),
            ta_total: s.ta_total,
            ti_total: s.ti_total,
            tfp_total: Decimal::of(&s.tfp_total, 6),
            quality: Decimal::of(&s.quality, 6),
        }
    }
}

impl ScoreDoc {
    pub fn to_breakdown(&self) -> Result<ScoreBreakdown, FormatError> {
        let mut per_method = BTreeMap::new();
        for (name, m) in &self.per_method {
            let pf = m
                .pf
                .iter()
                .map(|(k, v)| Ok((*k, parse_rational(v)?)))
                .collect::<Result<_, FormatError>>()?;
            per_method.insert(
                name.clone(),
                MethodScore {
                    br: m.br.iter().copied().collect(),
                    sa: m.sa.clone(),
                    impact: m.impact.clone(),
                    pf,
                    ta: m.ta,
                    ti: m.ti,
                    tfp: m.tfp.value()?,
                },
            );
        }
        Ok(ScoreBreakdown {
            mr: self.mr.clone(),
            per_method,
            ta_total: self.ta_total,
            ti_total: self.ti_total,
            tfp_total: self.tfp_total.value()?,
            quality: self.quality.value()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoresDoc {
    pub program_digest: String,
    pub scores: Vec<ScoreDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutantDoc {
    pub id: String,
    pub operator: MutationOperator,
    pub statement: StatementId,
    pub path: Vec<u32>,
    pub description: String,
    pub status: MutantStatus,
    pub digest: String,
    pub source: String,
}

impl From<&Mutant> for MutantDoc {
    fn from(m: &Mutant) -> Self {
        MutantDoc {
            id: m.id.clone(),
            operator: m.operator,
            statement: m.location.statement,
            path: m.location.path.clone(),
            description: m.description.clone(),
            status: m.status,
            digest: m.mutated_program.source_digest.clone(),
            source: m.source(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutantsDoc {
    pub program_digest: String,
    pub operators: Vec<MutationOperator>,
    pub aor: AorMode,
    pub mutants: Vec<MutantDoc>,
}

/// One ordering or a list of them (random baselines).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderingFile {
    One(Ordering),
    Many(Vec<Ordering>),
}

impl OrderingFile {
    pub fn into_vec(self) -> Vec<Ordering> {
        match self {
            OrderingFile::One(o) => vec![o],
            OrderingFile::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub set_size: usize,
    pub pct_killed: String,
    pub exact: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectiveSize {
    pub threshold: String,
    pub set_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<Vec<String>>,
    pub orderings: usize,
    pub curve: Vec<CurvePoint>,
    pub effective_size: Vec<EffectiveSize>,
    pub apfd: Decimal,
    pub avg_time_steps: Decimal,
    pub final_kill_pct: String,
    pub killable_count: usize,
    pub mr_count: usize,
}

impl From<&EvaluationReport> for ReportDoc {
    fn from(r: &EvaluationReport) -> Self {
        ReportDoc {
            strategy: r.strategy,
            sequence: r.sequence.clone(),
            orderings: r.orderings,
            curve: r
                .curve
                .iter()
                .enumerate()
                .map(|(i, c)| CurvePoint {
                    set_size: i + 1,
                    pct_killed: to_fixed(c, 1),
                    exact: to_exact(c),
                })
                .collect(),
            effective_size: r
                .effective_size
                .iter()
                .map(|(t, m)| EffectiveSize {
                    threshold: to_fixed(t, 1),
                    set_size: *m,
                })
                .collect(),
            apfd: Decimal::of(&r.apfd, 6),
            avg_time_steps: Decimal::of(&r.avg_time_steps, 6),
            final_kill_pct: to_fixed(&r.final_kill_pct(), 1),
            killable_count: r.killable_count,
            mr_count: r.mr_count,
        }
    }
}

/// `set_size,pct_killed` rows for plotting.
pub fn curve_csv(curve: &[Rational]) -> String {
    let mut out = String::from("set_size,pct_killed\n");
    for (i, c) in curve.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, to_fixed(c, 1));
    }
    out
}
