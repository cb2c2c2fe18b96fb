//! End-to-end experiment: analyse a subject, score and order its relations,
//! build mutants and kill matrices, and evaluate every ordering.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::centrality::{mr_quality_score, ProgramAnalysis, ScoreBreakdown};
use crate::evaluate::{baseline_average, evaluate, EvaluationReport};
use crate::exec::{Runner, DEFAULT_STEP_LIMIT};
use crate::formats::{
    curve_csv, to_json, MrProfile, MutantDoc, MutantsDoc, ProfilesDoc, ReportDoc, ScoreDoc, ScoresDoc,
};
use crate::minilang::{parse_labeled, sha256_hex, Program};
use crate::mt::{run_mr_with, MrRunResult, MrSpec, SuiteRole, TestSuite, Verdict};
use crate::mutation::{
    build_kill_matrix, generate_mutants_with, screen_mutants, AorMode, KillMatrix, MatrixRole, Mutant,
    MutationOperator,
};
use crate::prioritize::{
    centrality_order, coverage_order, fault_based_order, random_orders, CoverageUnit, Ordering,
};
use crate::rational::{from_f64, Rational};
use crate::report::{comparison_table, summary_rows, SummaryRow};

fn default_operators() -> Vec<MutationOperator> {
    MutationOperator::ALL.to_vec()
}

fn default_thresholds() -> Vec<f64> {
    vec![5.0, 2.5]
}

fn default_random_count() -> usize {
    100
}

fn default_step_limit() -> u64 {
    DEFAULT_STEP_LIMIT
}

/// Experiment description. Paths are relative to the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub subject: PathBuf,
    pub mrs: PathBuf,
    pub prioritizing_tests: PathBuf,
    pub validation_tests: PathBuf,
    #[serde(default = "default_operators")]
    pub operators: Vec<MutationOperator>,
    #[serde(default)]
    pub aor: AorMode,
    #[serde(default)]
    pub coverage_seed: u64,
    #[serde(default)]
    pub random_seed: u64,
    #[serde(default = "default_random_count")]
    pub random_count: usize,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default = "default_step_limit")]
    pub step_limit: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("config: cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("config: prioritizing and validation suites share {0}")]
    Disjointness(String),
    #[error("config: the relation catalog is empty")]
    EmptyMrList,
    #[error("{stage}: {message}")]
    Analysis { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Execution { stage: &'static str, message: String },
}

impl PipelineError {
    /// 2 for configuration problems, 3 for analysis, 4 for execution.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_)
            | PipelineError::Io { .. }
            | PipelineError::Disjointness(_)
            | PipelineError::EmptyMrList => 2,
            PipelineError::Analysis { .. } => 3,
            PipelineError::Execution { .. } => 4,
        }
    }
}

fn exec_err(stage: &'static str) -> impl Fn(String) -> PipelineError {
    move |message| PipelineError::Execution { stage, message }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| PipelineError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
    }
    fs::write(path, text).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Loaded and validated inputs.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub program: Program,
    pub mrs: Vec<MrSpec>,
    pub prioritizing: TestSuite,
    pub validation: TestSuite,
    pub operators: BTreeSet<MutationOperator>,
    pub aor: AorMode,
    pub coverage_seed: u64,
    pub random_seed: u64,
    pub random_count: usize,
    pub thresholds: Vec<Rational>,
    pub step_limit: u64,
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, PipelineError> {
    serde_json::from_str(&read(path)?).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

impl Experiment {
    pub fn load(cfg: &PipelineConfig, base: &Path) -> Result<Self, PipelineError> {
        let subject = base.join(&cfg.subject);
        let name = subject
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "subject".into());
        let program = parse_labeled(&read(&subject)?, &name).map_err(|e| PipelineError::Analysis {
            stage: "analyze",
            message: format!("{}: {e}", cfg.subject.display()),
        })?;

        let mrs: Vec<MrSpec> = serde_json::from_str(&read(&base.join(&cfg.mrs))?)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", cfg.mrs.display())))?;
        if mrs.is_empty() {
            return Err(PipelineError::EmptyMrList);
        }
        let mut ids = BTreeSet::new();
        for mr in &mrs {
            if !ids.insert(mr.id.clone()) {
                return Err(PipelineError::Config(format!("duplicate relation id `{}`", mr.id)));
            }
            mr.validate().map_err(|e| PipelineError::Config(format!("{}: {e}", mr.id)))?;
        }

        let suite = |p: &Path, role: SuiteRole| -> Result<TestSuite, PipelineError> {
            let s: TestSuite = serde_json::from_str(&read(&base.join(p))?)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
            if s.role != role {
                return Err(PipelineError::Config(format!(
                    "{} has role {:?}, expected {:?}",
                    p.display(),
                    s.role,
                    role
                )));
            }
            Ok(s)
        };
        let prioritizing = suite(&cfg.prioritizing_tests, SuiteRole::PrioritizingSource)?;
        let validation = suite(&cfg.validation_tests, SuiteRole::ValidationSource)?;
        check_disjoint(&prioritizing, &validation)?;

        let thresholds = cfg
            .thresholds
            .iter()
            .map(|&t| {
                from_f64(t)
                    .filter(|_| t > 0.0)
                    .ok_or_else(|| PipelineError::Config(format!("bad threshold {t}")))
            })
            .collect::<Result<_, _>>()?;
        if cfg.random_count == 0 {
            return Err(PipelineError::Config("random_count must be at least 1".into()));
        }

        Ok(Experiment {
            name,
            program,
            mrs,
            prioritizing,
            validation,
            operators: cfg.operators.iter().copied().collect(),
            aor: cfg.aor,
            coverage_seed: cfg.coverage_seed,
            random_seed: cfg.random_seed,
            random_count: cfg.random_count,
            thresholds,
            step_limit: cfg.step_limit,
        })
    }
}

/// The two suites may share neither test ids nor inputs.
pub fn check_disjoint(a: &TestSuite, b: &TestSuite) -> Result<(), PipelineError> {
    let ids: BTreeSet<&str> = a.cases.iter().map(|c| c.id.as_str()).collect();
    if let Some(c) = b.cases.iter().find(|c| ids.contains(c.id.as_str())) {
        return Err(PipelineError::Disjointness(format!("test id `{}`", c.id)));
    }
    let inputs: BTreeSet<_> = a.cases.iter().map(|c| (&c.entry, &c.args)).collect();
    if let Some(c) = b.cases.iter().find(|c| inputs.contains(&(&c.entry, &c.args))) {
        return Err(PipelineError::Disjointness(format!("the input of `{}`", c.id)));
    }
    Ok(())
}

/// Everything the pipeline computed, in memory.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub experiment: Experiment,
    pub analysis: ProgramAnalysis,
    pub prioritizing_runs: Vec<MrRunResult>,
    pub validation_runs: Vec<MrRunResult>,
    pub scores: Vec<ScoreBreakdown>,
    pub mutants: Vec<Mutant>,
    pub viable: Vec<Mutant>,
    pub prioritizing_matrix: KillMatrix,
    pub validation_matrix: KillMatrix,
    pub orderings: BTreeMap<String, Vec<Ordering>>,
    pub reports: Vec<EvaluationReport>,
}

impl PipelineRun {
    /// Relations with a violated case on the unmutated subject.
    pub fn unsound_mrs(&self) -> Vec<String> {
        self.prioritizing_runs
            .iter()
            .chain(&self.validation_runs)
            .filter(|r| r.cases.iter().any(|c| c.verdict == Verdict::Violated))
            .map(|r| r.mr.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn report(&self, strategy: &str) -> Option<&EvaluationReport> {
        self.reports.iter().find(|r| r.strategy.name() == strategy)
    }
}

fn run_all(p: &Program, mrs: &[MrSpec], suite: &TestSuite, step_limit: u64) -> Result<Vec<MrRunResult>, PipelineError> {
    let mut runner = Runner::new(p, step_limit);
    mrs.iter()
        .map(|mr| run_mr_with(&mut runner, mr, suite).map_err(|e| exec_err("run")(format!("{}: {e}", mr.id))))
        .collect()
}

pub fn run_experiment(x: Experiment) -> Result<PipelineRun, PipelineError> {
    let p = &x.program;
    let analysis = ProgramAnalysis::of(p);

    let prioritizing_runs = run_all(p, &x.mrs, &x.prioritizing, x.step_limit)?;
    let validation_runs = run_all(p, &x.mrs, &x.validation, x.step_limit)?;

    let scores = prioritizing_runs
        .iter()
        .map(|r| mr_quality_score(&analysis, &r.mr, &r.coverage))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| PipelineError::Analysis {
            stage: "score",
            message: e.to_string(),
        })?;

    let mutants = generate_mutants_with(p, &x.operators, x.aor);
    let screening = screen_mutants(mutants, &x.validation, x.step_limit);
    let mut all: Vec<Mutant> = screening
        .viable
        .iter()
        .chain(&screening.screened_out)
        .cloned()
        .collect();
    all.sort_by(|a, b| a.id.cmp(&b.id));
    let viable = screening.viable;

    let matrix = |suite: &TestSuite, role| {
        build_kill_matrix(p, &viable, &x.mrs, suite, role, x.step_limit)
            .map_err(|e| exec_err("kill-matrix")(e.to_string()))
    };
    let prioritizing_matrix = matrix(&x.prioritizing, MatrixRole::Prioritizing)?;
    let validation_matrix = matrix(&x.validation, MatrixRole::Validation)?;

    let order_err = |e: crate::prioritize::PrioritizeError| exec_err("prioritize")(e.to_string());
    let coverage: Vec<_> = prioritizing_runs
        .iter()
        .map(|r| (r.mr.clone(), r.coverage.clone()))
        .collect();
    let mut orderings = BTreeMap::new();
    orderings.insert("centrality".to_string(), vec![centrality_order(&scores).map_err(order_err)?]);
    orderings.insert(
        "fault_based".to_string(),
        vec![fault_based_order(&prioritizing_matrix).map_err(order_err)?],
    );
    orderings.insert(
        "stmt_coverage".to_string(),
        vec![coverage_order(&coverage, CoverageUnit::Statement, x.coverage_seed).map_err(order_err)?],
    );
    orderings.insert(
        "branch_coverage".to_string(),
        vec![coverage_order(&coverage, CoverageUnit::Branch, x.coverage_seed).map_err(order_err)?],
    );
    let ids: Vec<String> = x.mrs.iter().map(|m| m.id.clone()).collect();
    orderings.insert("random".to_string(), random_orders(&ids, x.random_count, x.random_seed));

    let eval_err = |e: crate::evaluate::EvaluateError| exec_err("evaluate")(e.to_string());
    let mut reports = Vec::new();
    for name in ["centrality", "fault_based", "stmt_coverage", "branch_coverage"] {
        reports.push(evaluate(&orderings[name][0], &validation_matrix, &x.thresholds).map_err(eval_err)?);
    }
    reports.push(baseline_average(&orderings["random"], &validation_matrix, &x.thresholds).map_err(eval_err)?);

    Ok(PipelineRun {
        analysis,
        prioritizing_runs,
        validation_runs,
        scores,
        mutants: all,
        viable,
        prioritizing_matrix,
        validation_matrix,
        orderings,
        reports,
        experiment: x,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutantCounts {
    pub generated: usize,
    pub viable: usize,
    pub screened_out: usize,
    pub killable_prioritizing: usize,
    pub killable_validation: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub subject: String,
    pub program_digest: String,
    pub mrs: usize,
    pub mutants: MutantCounts,
    pub unsound_mrs: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

impl PipelineRun {
    pub fn summary(&self) -> SummaryDoc {
        SummaryDoc {
            subject: self.experiment.name.clone(),
            program_digest: self.experiment.program.source_digest.clone(),
            mrs: self.experiment.mrs.len(),
            mutants: MutantCounts {
                generated: self.mutants.len(),
                viable: self.viable.len(),
                screened_out: self.mutants.len() - self.viable.len(),
                killable_prioritizing: self.prioritizing_matrix.killable_count(),
                killable_validation: self.validation_matrix.killable_count(),
            },
            unsound_mrs: self.unsound_mrs(),
            rows: summary_rows(&self.reports),
        }
    }

    /// Every artifact as `(relative path, contents)`, in path order.
    pub fn artifacts(&self) -> BTreeMap<String, String> {
        let x = &self.experiment;
        let digest = x.program.source_digest.clone();
        let mut files = BTreeMap::new();
        files.insert("analysis/pdg.json".to_string(), to_json(&self.analysis));
        for (name, role, runs) in [
            ("prioritizing", SuiteRole::PrioritizingSource, &self.prioritizing_runs),
            ("validation", SuiteRole::ValidationSource, &self.validation_runs),
        ] {
            let doc = ProfilesDoc {
                program_digest: digest.clone(),
                suite: role,
                mrs: runs.iter().map(MrProfile::from).collect(),
            };
            files.insert(format!("profiles/{name}.json"), to_json(&doc));
        }
        let scores = ScoresDoc {
            program_digest: digest.clone(),
            scores: self.scores.iter().map(ScoreDoc::from).collect(),
        };
        files.insert("scores.json".to_string(), to_json(&scores));
        let mutants = MutantsDoc {
            program_digest: digest.clone(),
            operators: x.operators.iter().copied().collect(),
            aor: x.aor,
            mutants: self.mutants.iter().map(MutantDoc::from).collect(),
        };
        files.insert("mutants.json".to_string(), to_json(&mutants));
        files.insert(
            "kill_matrices/prioritizing.json".to_string(),
            to_json(&self.prioritizing_matrix),
        );
        files.insert(
            "kill_matrices/validation.json".to_string(),
            to_json(&self.validation_matrix),
        );

        let inputs = BTreeMap::from([
            ("program".to_string(), digest.clone()),
            ("scores".to_string(), sha256_hex(files["scores.json"].as_bytes())),
            (
                "kill_matrix".to_string(),
                sha256_hex(files["kill_matrices/prioritizing.json"].as_bytes()),
            ),
            (
                "profiles".to_string(),
                sha256_hex(files["profiles/prioritizing.json"].as_bytes()),
            ),
        ]);
        for (name, orders) in &self.orderings {
            let keys: &[&str] = match name.as_str() {
                "centrality" => &["program", "scores"],
                "fault_based" => &["program", "kill_matrix"],
                "random" => &["program"],
                _ => &["program", "profiles"],
            };
            let stamped: Vec<Ordering> = orders
                .iter()
                .cloned()
                .map(|mut o| {
                    o.provenance = keys.iter().map(|k| (k.to_string(), inputs[*k].clone())).collect();
                    o
                })
                .collect();
            let text = if name == "random" {
                to_json(&stamped)
            } else {
                to_json(&stamped[0])
            };
            files.insert(format!("orderings/{name}.json"), text);
        }
        for r in &self.reports {
            let name = r.strategy.name();
            files.insert(format!("reports/{name}.json"), to_json(&ReportDoc::from(r)));
            files.insert(format!("curves/{name}.csv"), curve_csv(&r.curve));
        }
        files.insert("summary.json".to_string(), to_json(&self.summary()));
        files.insert("summary.txt".to_string(), comparison_table(&self.reports));

        let manifest: BTreeMap<&String, String> = files
            .iter()
            .map(|(k, v)| (k, sha256_hex(v.as_bytes())))
            .collect();
        let manifest = to_json(&manifest);
        files.insert("manifest.json".to_string(), manifest);
        files
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), PipelineError> {
        for (rel, text) in self.artifacts() {
            write(&dir.join(rel), &text)?;
        }
        Ok(())
    }
}

/// Loads `config`, runs the experiment and writes the artifacts to `out`
/// (or the configured output directory).
pub fn pipeline(config: &Path, out: Option<&Path>) -> Result<(PipelineRun, PathBuf), PipelineError> {
    let cfg = load_config(config)?;
    let base = config.parent().unwrap_or_else(|| Path::new("."));
    let dir = match (out, &cfg.output_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => base.join(o),
        (None, None) => {
            return Err(PipelineError::Config("no output directory given".into()));
        }
    };
    let run = run_experiment(Experiment::load(&cfg, base)?)?;
    run.write_to(&dir)?;
    Ok((run, dir))
}
