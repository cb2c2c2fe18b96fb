//! First-order mutant generation, screening, and kill matrices.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exec::Runner;
use crate::minilang::{
    expr_to_string, pretty_print, sha256_hex, BinaryOp, Expr, Program, StatementId, StmtKind,
};
use crate::mt::{run_mr_with, MrSpec, MtError, TestSuite, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MutationOperator {
    /// Arithmetic operator replacement.
    AOR,
    /// Relational operator replacement.
    ROR,
    /// Logical operator replacement.
    LOR,
    /// Constant replacement.
    CRP,
    /// Statement deletion.
    SDL,
}

impl MutationOperator {
    pub const ALL: [MutationOperator; 5] = [
        MutationOperator::AOR,
        MutationOperator::ROR,
        MutationOperator::LOR,
        MutationOperator::CRP,
        MutationOperator::SDL,
    ];
}

impl fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for MutationOperator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AOR" => Ok(MutationOperator::AOR),
            "ROR" => Ok(MutationOperator::ROR),
            "LOR" => Ok(MutationOperator::LOR),
            "CRP" => Ok(MutationOperator::CRP),
            "SDL" => Ok(MutationOperator::SDL),
            other => Err(format!("unknown mutation operator `{other}`")),
        }
    }
}

/// How arithmetic operators are replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AorMode {
    /// `+` with `-`, `*` with `/`.
    #[default]
    Pairwise,
    /// Every arithmetic operator with every other one.
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MutationSite {
    pub statement: StatementId,
    /// `[expression root, child, ...]`; empty for whole-statement mutations.
    pub path: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutantStatus {
    Candidate,
    ScreenedOut,
    Viable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mutant {
    pub id: String,
    pub operator: MutationOperator,
    pub location: MutationSite,
    pub variant: u32,
    pub description: String,
    pub mutated_program: Program,
    pub status: MutantStatus,
}

const ARITHMETIC: [BinaryOp; 5] = [
    BinaryOp::Add,
    BinaryOp::Sub,
    BinaryOp::Mul,
    BinaryOp::Div,
    BinaryOp::Rem,
];
const RELATIONAL: [BinaryOp; 6] = [
    BinaryOp::Lt,
    BinaryOp::Le,
    BinaryOp::Gt,
    BinaryOp::Ge,
    BinaryOp::Eq,
    BinaryOp::Ne,
];

enum Edit {
    Binary(BinaryOp),
    Literal(i64),
    Delete,
}

struct Candidate {
    operator: MutationOperator,
    site: MutationSite,
    variant: u32,
    description: String,
    edit: Edit,
}

fn binary_replacements(op: BinaryOp, operators: &BTreeSet<MutationOperator>, aor: AorMode) -> Option<(MutationOperator, Vec<BinaryOp>)> {
    if op.is_arithmetic() && operators.contains(&MutationOperator::AOR) {
        let targets = match aor {
            AorMode::Pairwise => match op {
                BinaryOp::Add => vec![BinaryOp::Sub],
                BinaryOp::Sub => vec![BinaryOp::Add],
                BinaryOp::Mul => vec![BinaryOp::Div],
                BinaryOp::Div => vec![BinaryOp::Mul],
                _ => Vec::new(),
            },
            AorMode::Full => ARITHMETIC.iter().copied().filter(|o| *o != op).collect(),
        };
        return Some((MutationOperator::AOR, targets));
    }
    if op.is_relational() && operators.contains(&MutationOperator::ROR) {
        let targets = RELATIONAL.iter().copied().filter(|o| *o != op).collect();
        return Some((MutationOperator::ROR, targets));
    }
    if op.is_logical() && operators.contains(&MutationOperator::LOR) {
        let other = if op == BinaryOp::And {
            BinaryOp::Or
        } else {
            BinaryOp::And
        };
        return Some((MutationOperator::LOR, vec![other]));
    }
    None
}

fn constant_replacements(c: i64) -> Vec<i64> {
    let mut out = Vec::new();
    for v in [c.checked_add(1), Some(0)].into_iter().flatten() {
        if v != c && !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Exhaustive first-order mutants with pairwise AOR.
pub fn generate_mutants(p: &Program, operators: &BTreeSet<MutationOperator>) -> Vec<Mutant> {
    generate_mutants_with(p, operators, AorMode::Pairwise)
}

pub fn generate_mutants_with(
    p: &Program,
    operators: &BTreeSet<MutationOperator>,
    aor: AorMode,
) -> Vec<Mutant> {
    let mut candidates = Vec::new();
    for stmt in p.statements() {
        if operators.contains(&MutationOperator::SDL)
            && matches!(stmt.kind, StmtKind::Assign { .. } | StmtKind::ArrayWrite { .. })
        {
            candidates.push(Candidate {
                operator: MutationOperator::SDL,
                site: MutationSite {
                    statement: stmt.id,
                    path: Vec::new(),
                },
                variant: 0,
                description: format!("delete statement {}", stmt.id),
                edit: Edit::Delete,
            });
        }
        for (root, expr) in stmt.exprs().into_iter().enumerate() {
            let mut prefix = vec![root as u32];
            expr.walk(&mut prefix, &mut |path, node| {
                let site = MutationSite {
                    statement: stmt.id,
                    path: path.to_vec(),
                };
                match node {
                    Expr::Binary(op, ..) => {
                        if let Some((operator, targets)) = binary_replacements(*op, operators, aor) {
                            for (variant, target) in targets.into_iter().enumerate() {
                                candidates.push(Candidate {
                                    operator,
                                    site: site.clone(),
                                    variant: variant as u32,
                                    description: format!(
                                        "`{}` -> `{}` at statement {}",
                                        op.symbol(),
                                        target.symbol(),
                                        stmt.id
                                    ),
                                    edit: Edit::Binary(target),
                                });
                            }
                        }
                    }
                    Expr::Int(c) if operators.contains(&MutationOperator::CRP) => {
                        for (variant, v) in constant_replacements(*c).into_iter().enumerate() {
                            candidates.push(Candidate {
                                operator: MutationOperator::CRP,
                                site: site.clone(),
                                variant: variant as u32,
                                description: format!("`{c}` -> `{v}` at statement {}", stmt.id),
                                edit: Edit::Literal(v),
                            });
                        }
                    }
                    _ => {}
                }
            });
        }
    }
    candidates.sort_by(|a, b| {
        (&a.site.statement, &a.site.path, a.operator, a.variant).cmp(&(
            &b.site.statement,
            &b.site.path,
            b.operator,
            b.variant,
        ))
    });

    candidates
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let id = format!("m{:04}", i + 1);
            let mut program = p.clone();
            apply(&mut program, &c.site, &c.edit);
            program.version_label = format!("{}+{}", p.version_label, id);
            program.source_digest = sha256_hex(pretty_print(&program).as_bytes());
            Mutant {
                id,
                operator: c.operator,
                location: c.site,
                variant: c.variant,
                description: format!("{} {}", c.operator, c.description),
                mutated_program: program,
                status: MutantStatus::Candidate,
            }
        })
        .collect()
}

fn apply(p: &mut Program, site: &MutationSite, edit: &Edit) {
    match edit {
        Edit::Delete => {
            p.remove_statement(site.statement)
                .expect("mutation site refers to an existing statement");
        }
        Edit::Binary(target) => {
            let node = p
                .statement_mut(site.statement)
                .and_then(|s| s.node_mut(&site.path))
                .expect("mutation site refers to an existing node");
            if let Expr::Binary(op, ..) = node {
                *op = *target;
            }
        }
        Edit::Literal(v) => {
            let node = p
                .statement_mut(site.statement)
                .and_then(|s| s.node_mut(&site.path))
                .expect("mutation site refers to an existing node");
            *node = Expr::Int(*v);
        }
    }
}

impl Mutant {
    /// Source text of the mutated program.
    pub fn source(&self) -> String {
        pretty_print(&self.mutated_program)
    }

    /// Renders the mutated expression node, if the mutation is node-level.
    pub fn mutated_node(&self) -> Option<String> {
        let mut p = self.mutated_program.clone();
        let node = p
            .statement_mut(self.location.statement)?
            .node_mut(&self.location.path)?;
        Some(expr_to_string(node))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Screening {
    pub viable: Vec<Mutant>,
    pub screened_out: Vec<Mutant>,
}

/// Drops mutants whose every source run on the validation suite raises or
/// exceeds the step limit. Every relation runs every source case, so this is
/// exactly the set of mutants on which all relation runs end in source-run
/// errors.
pub fn screen_mutants(mutants: Vec<Mutant>, validation_sources: &TestSuite, step_limit: u64) -> Screening {
    let failing: Vec<bool> = mutants
        .par_iter()
        .map(|m| {
            let mut runner = Runner::new(&m.mutated_program, step_limit);
            !validation_sources.cases.is_empty()
                && validation_sources.cases.iter().all(|case| {
                    runner
                        .run(&case.id, &case.entry, &case.args)
                        .map(|p| p.output.is_error())
                        .unwrap_or(true)
                })
        })
        .collect();
    let mut out = Screening::default();
    for (mut m, fails) in mutants.into_iter().zip(failing) {
        if fails {
            m.status = MutantStatus::ScreenedOut;
            out.screened_out.push(m);
        } else {
            m.status = MutantStatus::Viable;
            out.viable.push(m);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixRole {
    Prioritizing,
    Validation,
}

/// Relation x mutant detection records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KillMatrix {
    pub role: MatrixRole,
    pub mrs: Vec<String>,
    pub mutants: Vec<String>,
    /// `kills[mr][mutant]`
    pub kills: Vec<Vec<bool>>,
    /// Steps to run each relation's source and follow-up cases on the
    /// original program.
    pub mr_cost_steps: Vec<u64>,
}

impl KillMatrix {
    pub fn is_killable(&self, mutant: usize) -> bool {
        self.kills.iter().any(|row| row[mutant])
    }

    pub fn killable(&self) -> Vec<usize> {
        (0..self.mutants.len()).filter(|&j| self.is_killable(j)).collect()
    }

    pub fn killable_count(&self) -> usize {
        self.killable().len()
    }

    pub fn mr_index(&self, mr: &str) -> Option<usize> {
        self.mrs.iter().position(|m| m == mr)
    }

    pub fn kill_set(&self, mr: usize) -> BTreeSet<usize> {
        self.kills[mr]
            .iter()
            .enumerate()
            .filter(|(_, k)| **k)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn cost(&self, mr: usize) -> u64 {
        self.mr_cost_steps[mr]
    }

    /// Checks that dimensions agree.
    pub fn is_consistent(&self) -> bool {
        self.kills.len() == self.mrs.len()
            && self.mr_cost_steps.len() == self.mrs.len()
            && self.kills.iter().all(|row| row.len() == self.mutants.len())
    }
}

/// Runs every relation against every mutant. A mutant is killed by a
/// relation when some case is violated, or errs on the mutant while the
/// same case ran cleanly on the original.
pub fn build_kill_matrix(
    original: &Program,
    mutants: &[Mutant],
    mrs: &[MrSpec],
    sources: &TestSuite,
    role: MatrixRole,
    step_limit: u64,
) -> Result<KillMatrix, MtError> {
    let mut runner = Runner::new(original, step_limit);
    let mut baseline_errors = Vec::with_capacity(mrs.len());
    let mut costs = Vec::with_capacity(mrs.len());
    for mr in mrs {
        let run = run_mr_with(&mut runner, mr, sources)?;
        baseline_errors.push(
            run.cases
                .iter()
                .map(|c| c.verdict == Verdict::Error)
                .collect::<Vec<_>>(),
        );
        costs.push(run.cost_steps);
    }

    let columns: Vec<Vec<bool>> = mutants
        .par_iter()
        .map(|m| -> Result<Vec<bool>, MtError> {
            let mut runner = Runner::new(&m.mutated_program, step_limit);
            mrs.iter()
                .zip(&baseline_errors)
                .map(|(mr, original_errs)| {
                    let run = run_mr_with(&mut runner, mr, sources)?;
                    Ok(run.cases.iter().zip(original_errs).any(|(c, orig_err)| {
                        c.verdict == Verdict::Violated || (c.verdict == Verdict::Error && !orig_err)
                    }))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let kills = (0..mrs.len())
        .map(|i| columns.iter().map(|col| col[i]).collect())
        .collect();
    Ok(KillMatrix {
        role,
        mrs: mrs.iter().map(|m| m.id.clone()).collect(),
        mutants: mutants.iter().map(|m| m.id.clone()).collect(),
        kills,
        mr_cost_steps: costs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Value;
    use crate::minilang::parse;
    use crate::mt::{Relation, SuiteRole, TestCase, Transform};

    const P0: &str = "fn sum(a:[int])->int { total=0; i=0; while(i<len(a)){ total=total+a[i]; i=i+1 } return total }";

    fn ops(list: &[MutationOperator]) -> BTreeSet<MutationOperator> {
        list.iter().copied().collect()
    }

    fn suite(cases: &[&[i64]]) -> TestSuite {
        TestSuite {
            role: SuiteRole::ValidationSource,
            cases: cases
                .iter()
                .enumerate()
                .map(|(i, c)| TestCase {
                    id: format!("v{i}"),
                    entry: "sum".into(),
                    args: vec![Value::Array(c.to_vec())],
                })
                .collect(),
        }
    }

    #[test]
    fn single_aor_site() {
        let p = parse("fn f(a:int, b:int)->int{ x = a + b; return x }").unwrap();
        let ms = generate_mutants(&p, &ops(&[MutationOperator::AOR]));
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].mutated_node().unwrap(), "a - b");
    }

    #[test]
    fn ror_on_loop_condition() {
        let p = parse(P0).unwrap();
        let ms = generate_mutants(&p, &ops(&[MutationOperator::ROR]));
        assert_eq!(ms.len(), 5);
        let rendered: BTreeSet<String> = ms.iter().map(|m| m.mutated_node().unwrap()).collect();
        let expected: BTreeSet<String> = ["i <= len(a)", "i > len(a)", "i >= len(a)", "i == len(a)", "i != len(a)"]
            .into_iter()
            .map(String::from)
            .collect();
        assert_eq!(rendered, expected);
    }

    #[test]
    fn nothing_to_mutate() {
        let p = parse("fn f(x:int)->int{ return x }").unwrap();
        assert!(generate_mutants(&p, &ops(&MutationOperator::ALL)).is_empty());
    }

    #[test]
    fn constants_and_deletions() {
        let p = parse(P0).unwrap();
        let crp = generate_mutants(&p, &ops(&[MutationOperator::CRP]));
        // 0 -> 1 twice, 1 -> {2, 0}
        assert_eq!(crp.len(), 4);
        let sdl = generate_mutants(&p, &ops(&[MutationOperator::SDL]));
        let deleted: Vec<u32> = sdl.iter().map(|m| m.location.statement.0).collect();
        assert_eq!(deleted, vec![1, 2, 4, 5]);
        assert!(sdl.iter().all(|m| m.mutated_program.statement_count() == 5));
    }

    #[test]
    fn full_aor_cross_product() {
        let p = parse("fn f(a:int, b:int)->int{ return a % b }").unwrap();
        assert!(generate_mutants(&p, &ops(&[MutationOperator::AOR])).is_empty());
        assert_eq!(
            generate_mutants_with(&p, &ops(&[MutationOperator::AOR]), AorMode::Full).len(),
            4
        );
    }

    #[test]
    fn ids_are_ordered_and_unique() {
        let p = parse(P0).unwrap();
        let ms = generate_mutants(&p, &ops(&MutationOperator::ALL));
        let keys: Vec<_> = ms
            .iter()
            .map(|m| (m.location.clone(), m.operator, m.variant))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(keys, sorted);
        let ids: Vec<&str> = ms.iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids[0], "m0001");
        assert_eq!(ids.len(), ms.len());
    }

    #[test]
    fn screening_by_step_limit() {
        let p = parse("fn sum(a:[int])->int { total=0; i=0; while(i>=0){ total=total+1; i=i+1 } return total }").unwrap();
        let mut ms = generate_mutants(&p, &ops(&[MutationOperator::SDL]));
        // deleting `i=i+1` leaves `while (i >= 0)` spinning forever
        let stuck = ms.iter().position(|m| m.location.statement == StatementId(5)).unwrap();
        let stuck = ms.remove(stuck);
        let screening = screen_mutants(vec![stuck], &suite(&[&[1], &[2, 3]]), 10_000);
        assert_eq!(screening.screened_out.len(), 1);
        assert_eq!(screening.screened_out[0].status, MutantStatus::ScreenedOut);
    }

    #[test]
    fn partial_errors_stay_viable() {
        let p = parse("fn sum(a:[int])->int { return a[0] }").unwrap();
        let mut m = generate_mutants(&parse(P0).unwrap(), &ops(&[MutationOperator::CRP])).remove(0);
        m.mutated_program = p;
        let screening = screen_mutants(vec![m], &suite(&[&[], &[4]]), 1000);
        assert_eq!(screening.viable.len(), 1);
    }

    #[test]
    fn kill_matrix_records() {
        let p = parse(P0).unwrap();
        let negated = {
            let mut ms = generate_mutants(&p, &ops(&[MutationOperator::AOR]));
            ms.retain(|m| m.location.statement == StatementId(4));
            ms.remove(0)
        };
        assert_eq!(negated.mutated_node().unwrap(), "total - a[i]");
        let mrs = vec![
            MrSpec {
                id: "rev".into(),
                transform: Transform::Reverse { arg: None },
                relation: Relation::Eq,
            },
            MrSpec {
                id: "app".into(),
                transform: Transform::Append { v: 5, arg: None },
                relation: Relation::Custom {
                    expr: "o_f == o_s + 5".into(),
                },
            },
            MrSpec {
                id: "rev2".into(),
                transform: Transform::Reverse { arg: None },
                relation: Relation::Eq,
            },
        ];
        let km = build_kill_matrix(&p, &[negated], &mrs, &suite(&[&[1, 2]]), MatrixRole::Validation, 1000).unwrap();
        assert!(km.is_consistent());
        assert_eq!(km.kills, vec![vec![false], vec![true], vec![false]]);
        assert_eq!(km.kills[0], km.kills[2]);
        assert_eq!(km.mr_cost_steps[0], km.mr_cost_steps[2]);

        let empty = build_kill_matrix(&p, &[], &mrs, &suite(&[&[1, 2]]), MatrixRole::Validation, 1000).unwrap();
        assert!(empty.mutants.is_empty());
        assert!(empty.kills.iter().all(|row| row.is_empty()));
    }
}
