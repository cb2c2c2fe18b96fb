//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists with the same shape as the JSON documents the CLI writes; exact
//! rationals come back as `fractions.Fraction`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use metaprio_core::centrality::{mr_quality_score, ProgramAnalysis};
use metaprio_core::dependence::{backward_slice, compute_pdg, forward_slice};
use metaprio_core::evaluate::{apfd as apfd_of, evaluate as evaluate_of};
use metaprio_core::exec::{execute, CoverageUnion, Value, DEFAULT_STEP_LIMIT};
use metaprio_core::formats::{to_json, MrProfile, MutantDoc, ReportDoc, ScoreDoc};
use metaprio_core::minilang::{count_operators, parse, pretty_print, StatementId};
use metaprio_core::mt::{run_mr, MrSpec, TestSuite};
use metaprio_core::mutation::{generate_mutants_with, AorMode, KillMatrix, MutationOperator};
use metaprio_core::pipeline::pipeline as run_pipeline;
use metaprio_core::prioritize::{self, CoverageUnit, Ordering, Strategy};
use metaprio_core::rational::{from_f64, to_exact, Rational};
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (to_json(v),))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

fn fraction<'py>(py: Python<'py>, r: &Rational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((to_exact(r),))
}

/// A parsed and checked MiniLang program.
#[pyclass(module = "metaprio", frozen)]
struct Program {
    inner: metaprio_core::Program,
}

#[pymethods]
impl Program {
    #[new]
    fn new(source: &str) -> PyResult<Self> {
        parse(source).map(|inner| Program { inner }).map_err(value_err)
    }

    #[getter]
    fn digest(&self) -> String {
        self.inner.source_digest.clone()
    }

    #[getter]
    fn statement_count(&self) -> usize {
        self.inner.statement_count()
    }

    #[getter]
    fn functions(&self) -> Vec<String> {
        self.inner.functions.iter().map(|f| f.name.clone()).collect()
    }

    fn pretty(&self) -> String {
        pretty_print(&self.inner)
    }

    fn operators(&self, statement: u32) -> PyResult<u32> {
        count_operators(&self.inner, StatementId(statement)).map_err(|e| PyKeyError::new_err(e.to_string()))
    }

    /// CFGs, dependence graphs and operator counts of every function.
    fn analyze<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &ProgramAnalysis::of(&self.inner))
    }

    fn forward_slice(&self, function: &str, statement: u32) -> PyResult<Vec<u32>> {
        let pdg = compute_pdg(&self.inner, function).map_err(|e| PyKeyError::new_err(e.to_string()))?;
        let s = forward_slice(&pdg, StatementId(statement)).map_err(|e| PyKeyError::new_err(e.to_string()))?;
        Ok(s.members.iter().map(|id| id.0).collect())
    }

    fn backward_slice(&self, function: &str, seeds: Vec<u32>) -> PyResult<Vec<u32>> {
        let pdg = compute_pdg(&self.inner, function).map_err(|e| PyKeyError::new_err(e.to_string()))?;
        let seeds: BTreeSet<StatementId> = seeds.into_iter().map(StatementId).collect();
        let s = backward_slice(&pdg, &seeds).map_err(|e| PyKeyError::new_err(e.to_string()))?;
        Ok(s.members.iter().map(|id| id.0).collect())
    }

    /// Runs `entry` on `args` and returns the execution profile.
    #[pyo3(signature = (entry, args, step_limit = DEFAULT_STEP_LIMIT))]
    fn execute<'py>(
        &self,
        py: Python<'py>,
        entry: &str,
        args: &Bound<'py, PyAny>,
        step_limit: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let args: Vec<Value> = from_py(args)?;
        let profile = execute(&self.inner, entry, &args, step_limit).map_err(value_err)?;
        to_py(py, &profile)
    }

    /// First-order mutants, as dicts with the mutated source under `source`.
    #[pyo3(signature = (ops = None, full_aor = false))]
    fn mutants<'py>(&self, py: Python<'py>, ops: Option<Vec<String>>, full_aor: bool) -> PyResult<Bound<'py, PyAny>> {
        let operators: BTreeSet<MutationOperator> = match ops {
            Some(list) => list
                .iter()
                .map(|s| s.parse().map_err(PyValueError::new_err))
                .collect::<PyResult<_>>()?,
            None => MutationOperator::ALL.into_iter().collect(),
        };
        let aor = if full_aor { AorMode::Full } else { AorMode::Pairwise };
        let docs: Vec<MutantDoc> = generate_mutants_with(&self.inner, &operators, aor)
            .iter()
            .map(MutantDoc::from)
            .collect();
        to_py(py, &docs)
    }

    fn __repr__(&self) -> String {
        format!(
            "Program(functions={:?}, statements={})",
            self.functions(),
            self.inner.statement_count()
        )
    }
}

/// Runs one relation over a source suite; returns coverage, cost and
/// per-case verdicts.
#[pyfunction]
#[pyo3(signature = (program, mr, suite, step_limit = DEFAULT_STEP_LIMIT))]
fn run_relation<'py>(
    py: Python<'py>,
    program: &Program,
    mr: &Bound<'py, PyAny>,
    suite: &Bound<'py, PyAny>,
    step_limit: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let mr: MrSpec = from_py(mr)?;
    mr.validate().map_err(value_err)?;
    let suite: TestSuite = from_py(suite)?;
    let result = run_mr(&program.inner, &mr, &suite, step_limit).map_err(value_err)?;
    to_py(py, &MrProfile::from(&result))
}

/// Quality score of relation `mr` given its coverage union.
#[pyfunction]
fn score<'py>(py: Python<'py>, program: &Program, mr: &str, coverage: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let coverage: CoverageUnion = from_py(coverage)?;
    let s = mr_quality_score(&ProgramAnalysis::of(&program.inner), mr, &coverage).map_err(value_err)?;
    to_py(py, &ScoreDoc::from(&s))
}

/// Relation ids by descending quality, given documents returned by `score`.
#[pyfunction]
fn centrality_order(scores: &Bound<'_, PyAny>) -> PyResult<Vec<String>> {
    let docs: Vec<ScoreDoc> = from_py(scores)?;
    let breakdowns = docs
        .iter()
        .map(|d| d.to_breakdown().map_err(value_err))
        .collect::<PyResult<Vec<_>>>()?;
    Ok(prioritize::centrality_order(&breakdowns).map_err(value_err)?.sequence)
}

#[pyfunction]
fn fault_based_order(kill_matrix: &Bound<'_, PyAny>) -> PyResult<Vec<String>> {
    let km: KillMatrix = from_py(kill_matrix)?;
    Ok(prioritize::fault_based_order(&km).map_err(value_err)?.sequence)
}

/// `coverage` maps relation ids to coverage unions; `unit` is
/// `"statement"` or `"branch"`.
#[pyfunction]
#[pyo3(signature = (coverage, unit = "statement", seed = 0))]
fn coverage_order(coverage: &Bound<'_, PyAny>, unit: &str, seed: u64) -> PyResult<Vec<String>> {
    let map: BTreeMap<String, CoverageUnion> = from_py(coverage)?;
    let unit = match unit {
        "statement" => CoverageUnit::Statement,
        "branch" => CoverageUnit::Branch,
        other => return Err(PyValueError::new_err(format!("unknown coverage unit `{other}`"))),
    };
    let items: Vec<_> = map.into_iter().collect();
    Ok(prioritize::coverage_order(&items, unit, seed).map_err(value_err)?.sequence)
}

#[pyfunction]
#[pyo3(signature = (ids, count = 100, seed = 0))]
fn random_orders(ids: Vec<String>, count: usize, seed: u64) -> Vec<Vec<String>> {
    prioritize::random_orders(&ids, count, seed)
        .into_iter()
        .map(|o| o.sequence)
        .collect()
}

fn ordering(sequence: Vec<String>) -> Ordering {
    Ordering {
        strategy: Strategy::Centrality,
        sequence,
        seed: None,
        provenance: BTreeMap::new(),
    }
}

#[pyfunction]
fn apfd<'py>(py: Python<'py>, sequence: Vec<String>, kill_matrix: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let km: KillMatrix = from_py(kill_matrix)?;
    let v = apfd_of(&ordering(sequence), &km).map_err(value_err)?;
    fraction(py, &v)
}

#[pyfunction]
#[pyo3(signature = (sequence, kill_matrix, thresholds = vec![5.0, 2.5]))]
fn evaluate<'py>(
    py: Python<'py>,
    sequence: Vec<String>,
    kill_matrix: &Bound<'py, PyAny>,
    thresholds: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let km: KillMatrix = from_py(kill_matrix)?;
    let ts = thresholds
        .iter()
        .map(|&t| from_f64(t).ok_or_else(|| PyValueError::new_err(format!("bad threshold {t}"))))
        .collect::<PyResult<Vec<_>>>()?;
    let report = evaluate_of(&ordering(sequence), &km, &ts).map_err(value_err)?;
    to_py(py, &ReportDoc::from(&report))
}

/// Runs the experiment described by `config` and returns its summary.
#[pyfunction]
#[pyo3(signature = (config, out = None))]
fn pipeline<'py>(py: Python<'py>, config: &str, out: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let (run, _) = run_pipeline(Path::new(config), out.map(Path::new))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &run.summary())
}

#[pymodule]
pub fn metaprio(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Program>()?;
    m.add_function(wrap_pyfunction!(run_relation, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(centrality_order, m)?)?;
    m.add_function(wrap_pyfunction!(fault_based_order, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_order, m)?)?;
    m.add_function(wrap_pyfunction!(random_orders, m)?)?;
    m.add_function(wrap_pyfunction!(apfd, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline, m)?)?;
    Ok(())
}
