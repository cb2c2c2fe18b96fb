//! Metamorphic relations: input transformations, output relations, and
//! running a relation over a suite of source test cases.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{coverage_union, eval_expr, CoverageUnion, ExecError, ExecutionProfile, Runner, Value};
use crate::minilang::{parse_expr, Expr, ParseError, Program};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MtError {
    #[error("transform `{transform}` cannot be applied: {reason}")]
    ShapeMismatch { transform: String, reason: String },
    #[error("relation `{relation}` does not apply to outputs {o_s} and {o_f}")]
    TypeMismatch {
        relation: String,
        o_s: String,
        o_f: String,
    },
    #[error("custom relation `{expr}` does not parse: {source}")]
    BadRelation { expr: String, source: ParseError },
    #[error("suite role `{0:?}` is not a source role")]
    NotSourceSuite(SuiteRole),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// Input transformation. `arg` selects the argument to transform; when
/// absent, the first array argument is used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    Permute {
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arg: Option<usize>,
    },
    Reverse {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arg: Option<usize>,
    },
    ScaleElements {
        k: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arg: Option<usize>,
    },
    AddConstant {
        c: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arg: Option<usize>,
    },
    DuplicateAll {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arg: Option<usize>,
    },
    Append {
        v: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arg: Option<usize>,
    },
    RemoveFirst {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arg: Option<usize>,
    },
    NegateElements {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arg: Option<usize>,
    },
}

impl Transform {
    pub fn name(&self) -> &'static str {
        match self {
            Transform::Permute { .. } => "permute",
            Transform::Reverse { .. } => "reverse",
            Transform::ScaleElements { .. } => "scale_elements",
            Transform::AddConstant { .. } => "add_constant",
            Transform::DuplicateAll { .. } => "duplicate_all",
            Transform::Append { .. } => "append",
            Transform::RemoveFirst { .. } => "remove_first",
            Transform::NegateElements { .. } => "negate_elements",
        }
    }

    fn arg(&self) -> Option<usize> {
        match self {
            Transform::Permute { arg, .. }
            | Transform::Reverse { arg }
            | Transform::ScaleElements { arg, .. }
            | Transform::AddConstant { arg, .. }
            | Transform::DuplicateAll { arg }
            | Transform::Append { arg, .. }
            | Transform::RemoveFirst { arg }
            | Transform::NegateElements { arg } => *arg,
        }
    }

    /// Index of the argument this transform rewrites.
    pub fn target(&self, args: &[Value]) -> Result<usize, MtError> {
        match self.arg() {
            Some(i) if i < args.len() => Ok(i),
            Some(i) => Err(self.mismatch(format!("argument {i} does not exist"))),
            None => args
                .iter()
                .position(|v| matches!(v, Value::Array(_)))
                .ok_or_else(|| self.mismatch("no array argument".into())),
        }
    }

    fn mismatch(&self, reason: String) -> MtError {
        MtError::ShapeMismatch {
            transform: self.name().into(),
            reason,
        }
    }
}

/// Output relation between the source output `o_s` and follow-up output
/// `o_f`. `n` is the length of the transformed source argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Relation {
    /// `o_f == o_s`
    Eq,
    /// `o_f == k * o_s` (elementwise for arrays)
    EqScaled { k: i64 },
    /// `o_f == o_s + c`, or `o_s + c * n` when `per_element` (elementwise
    /// for arrays)
    EqOffset {
        c: i64,
        #[serde(default)]
        per_element: bool,
    },
    /// `o_f <= o_s`
    Le,
    /// `o_f >= o_s`
    Ge,
    /// MiniLang boolean expression over `o_s`, `o_f` and `n`.
    Custom { expr: String },
}

impl Relation {
    pub fn name(&self) -> String {
        match self {
            Relation::Eq => "eq".into(),
            Relation::EqScaled { k } => format!("eq_scaled({k})"),
            Relation::EqOffset { c, per_element } => {
                if *per_element {
                    format!("eq_offset({c}*n)")
                } else {
                    format!("eq_offset({c})")
                }
            }
            Relation::Le => "le".into(),
            Relation::Ge => "ge".into(),
            Relation::Custom { expr } => format!("custom({expr})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MrSpec {
    pub id: String,
    pub transform: Transform,
    pub relation: Relation,
}

impl MrSpec {
    /// Parses a custom relation up front so bad specs fail at load time.
    pub fn validate(&self) -> Result<(), MtError> {
        if let Relation::Custom { expr } = &self.relation {
            parse_expr(expr).map_err(|source| MtError::BadRelation {
                expr: expr.clone(),
                source,
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteRole {
    PrioritizingSource,
    PrioritizingFollowup,
    ValidationSource,
    ValidationFollowup,
}

impl SuiteRole {
    pub fn is_source(self) -> bool {
        matches!(self, SuiteRole::PrioritizingSource | SuiteRole::ValidationSource)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    pub id: String,
    pub entry: String,
    pub args: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSuite {
    pub role: SuiteRole,
    pub cases: Vec<TestCase>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Error,
}

/// Metadata about the source input that relations may refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RelationMeta {
    pub n: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub test_id: String,
    pub verdict: Verdict,
    /// Why the verdict is `error`, when it is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub source: ExecutionProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followup: Option<ExecutionProfile>,
}

impl CaseRecord {
    /// True when the source run itself raised or hit the step limit.
    pub fn source_failed(&self) -> bool {
        self.source.output.is_error()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MrRunResult {
    pub mr: String,
    pub cases: Vec<CaseRecord>,
    pub coverage: CoverageUnion,
    pub cost_steps: u64,
}

impl MrRunResult {
    pub fn verdicts(&self) -> Vec<(String, Verdict)> {
        self.cases
            .iter()
            .map(|c| (c.test_id.clone(), c.verdict))
            .collect()
    }

    pub fn any_violated(&self) -> bool {
        self.cases.iter().any(|c| c.verdict == Verdict::Violated)
    }
}

pub fn derive_followup(source_args: &[Value], transform: &Transform) -> Result<Vec<Value>, MtError> {
    let target = transform.target(source_args)?;
    let mut args = source_args.to_vec();
    let value = &mut args[target];
    let checked = |v: Option<i64>| v.ok_or_else(|| transform.mismatch("integer overflow".into()));
    match (transform, value) {
        (Transform::Permute { seed, .. }, Value::Array(items)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            items.shuffle(&mut rng);
        }
        (Transform::Reverse { .. }, Value::Array(items)) => items.reverse(),
        (Transform::ScaleElements { k, .. }, Value::Array(items)) => {
            for x in items.iter_mut() {
                *x = checked(x.checked_mul(*k))?;
            }
        }
        (Transform::ScaleElements { k, .. }, Value::Int(x)) => *x = checked(x.checked_mul(*k))?,
        (Transform::AddConstant { c, .. }, Value::Array(items)) => {
            for x in items.iter_mut() {
                *x = checked(x.checked_add(*c))?;
            }
        }
        (Transform::AddConstant { c, .. }, Value::Int(x)) => *x = checked(x.checked_add(*c))?,
        (Transform::DuplicateAll { .. }, Value::Array(items)) => {
            let copy = items.clone();
            items.extend(copy);
        }
        (Transform::Append { v, .. }, Value::Array(items)) => items.push(*v),
        (Transform::RemoveFirst { .. }, Value::Array(items)) => {
            if items.is_empty() {
                return Err(transform.mismatch("array is empty".into()));
            }
            items.remove(0);
        }
        (Transform::NegateElements { .. }, Value::Array(items)) => {
            for x in items.iter_mut() {
                *x = checked(x.checked_neg())?;
            }
        }
        (Transform::NegateElements { .. }, Value::Int(x)) => *x = checked(x.checked_neg())?,
        (t, v) => {
            return Err(t.mismatch(format!("argument of type {} is not supported", v.ty())));
        }
    }
    Ok(args)
}

/// Length of the argument a transform rewrites (0 for scalars).
pub fn source_meta(source_args: &[Value], transform: &Transform) -> RelationMeta {
    let n = transform
        .target(source_args)
        .ok()
        .and_then(|i| match &source_args[i] {
            Value::Array(items) => Some(items.len() as i64),
            _ => None,
        })
        .unwrap_or(0);
    RelationMeta { n }
}

pub fn check_relation(
    o_s: &Value,
    o_f: &Value,
    relation: &Relation,
    meta: RelationMeta,
) -> Result<bool, MtError> {
    let mismatch = || MtError::TypeMismatch {
        relation: relation.name(),
        o_s: o_s.to_string(),
        o_f: o_f.to_string(),
    };
    // Elementwise `o_f == f(o_s)` for ints and equal-length arrays.
    let pointwise = |f: &dyn Fn(i64) -> Option<i64>| -> Result<bool, MtError> {
        match (o_s, o_f) {
            (Value::Int(s), Value::Int(t)) => Ok(f(*s) == Some(*t)),
            (Value::Array(s), Value::Array(t)) => {
                Ok(s.len() == t.len() && s.iter().zip(t).all(|(a, b)| f(*a) == Some(*b)))
            }
            _ => Err(mismatch()),
        }
    };
    match relation {
        Relation::Eq => {
            if o_s.ty() != o_f.ty() {
                return Err(mismatch());
            }
            Ok(o_s == o_f)
        }
        Relation::EqScaled { k } => pointwise(&|x| x.checked_mul(*k)),
        Relation::EqOffset { c, per_element } => {
            let offset = if *per_element {
                c.checked_mul(meta.n).ok_or_else(mismatch)?
            } else {
                *c
            };
            pointwise(&|x| x.checked_add(offset))
        }
        Relation::Le | Relation::Ge => match (o_s, o_f) {
            (Value::Int(s), Value::Int(f)) => Ok(if *relation == Relation::Le {
                f <= s
            } else {
                f >= s
            }),
            _ => Err(mismatch()),
        },
        Relation::Custom { expr } => {
            let parsed: Expr = parse_expr(expr).map_err(|source| MtError::BadRelation {
                expr: expr.clone(),
                source,
            })?;
            let bindings = BTreeMap::from([
                ("o_s".to_string(), o_s.clone()),
                ("o_f".to_string(), o_f.clone()),
                ("n".to_string(), Value::Int(meta.n)),
            ]);
            match eval_expr(&parsed, &bindings) {
                Ok(Value::Bool(b)) => Ok(b),
                _ => Err(mismatch()),
            }
        }
    }
}

/// Runs one relation over every source case: source run, follow-up
/// derivation and run, verdict. Failures of either run (or of the
/// transformation) yield an `error` verdict for that case.
pub fn run_mr(p: &Program, mr: &MrSpec, sources: &TestSuite, step_limit: u64) -> Result<MrRunResult, MtError> {
    let mut runner = Runner::new(p, step_limit);
    run_mr_with(&mut runner, mr, sources)
}

/// [`run_mr`] over a shared memoizing runner.
pub fn run_mr_with(runner: &mut Runner<'_>, mr: &MrSpec, sources: &TestSuite) -> Result<MrRunResult, MtError> {
    if !sources.role.is_source() {
        return Err(MtError::NotSourceSuite(sources.role));
    }
    let mut cases = Vec::with_capacity(sources.cases.len());
    let mut profiles = Vec::with_capacity(2 * sources.cases.len());
    for case in &sources.cases {
        let source = runner.run(&case.id, &case.entry, &case.args)?;
        profiles.push(source.clone());
        let followup_args = match derive_followup(&case.args, &mr.transform) {
            Ok(args) => args,
            Err(e) => {
                cases.push(CaseRecord {
                    test_id: case.id.clone(),
                    verdict: Verdict::Error,
                    reason: Some(e.to_string()),
                    source,
                    followup: None,
                });
                continue;
            }
        };
        let followup = runner.run(&format!("{}~{}", case.id, mr.id), &case.entry, &followup_args)?;
        profiles.push(followup.clone());
        let (verdict, reason) = match (source.output.value(), followup.output.value()) {
            (Some(o_s), Some(o_f)) => {
                let meta = source_meta(&case.args, &mr.transform);
                match check_relation(o_s, o_f, &mr.relation, meta) {
                    Ok(true) => (Verdict::Satisfied, None),
                    Ok(false) => (Verdict::Violated, None),
                    Err(e) => (Verdict::Error, Some(e.to_string())),
                }
            }
            (None, _) => (Verdict::Error, Some(format!("source run: {:?}", source.output))),
            (_, None) => (Verdict::Error, Some(format!("follow-up run: {:?}", followup.output))),
        };
        cases.push(CaseRecord {
            test_id: case.id.clone(),
            verdict,
            reason,
            source,
            followup: Some(followup),
        });
    }
    let cost_steps = profiles.iter().map(|p| p.steps).sum();
    let coverage = if profiles.is_empty() {
        CoverageUnion {
            program_digest: runner.program().source_digest.clone(),
            ..CoverageUnion::default()
        }
    } else {
        coverage_union(&profiles)?
    };
    Ok(MrRunResult {
        mr: mr.id.clone(),
        cases,
        coverage,
        cost_steps,
    })
}
