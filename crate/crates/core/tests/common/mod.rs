#![allow(dead_code)]

pub mod gen;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use metaprio_core::dependence::Pdg;
use metaprio_core::minilang::{parse, parse_labeled, Program, StatementId};
use metaprio_core::mt::{MrSpec, TestSuite};
use metaprio_core::mutation::{KillMatrix, MatrixRole};
use metaprio_core::rational::{int, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const P0: &str = "fn sum(a:[int])->int { total=0; i=0; while(i<len(a)){ total=total+a[i]; i=i+1 } return total }";

pub const SUBJECTS: [&str; 4] = ["sum", "range", "interp", "sort"];

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

pub struct Subject {
    pub name: &'static str,
    pub program: Program,
    pub mrs: Vec<MrSpec>,
    pub prioritizing: TestSuite,
    pub validation: TestSuite,
}

pub fn subject(name: &'static str) -> Subject {
    let dir = corpus_dir().join(name);
    let read = |f: &str| std::fs::read_to_string(dir.join(f)).unwrap();
    Subject {
        name,
        program: parse_labeled(&read(&format!("{name}.mini")), name).unwrap(),
        mrs: serde_json::from_str(&read("mrs.json")).unwrap(),
        prioritizing: serde_json::from_str(&read("prioritizing.json")).unwrap(),
        validation: serde_json::from_str(&read("validation.json")).unwrap(),
    }
}

/// Every bundled program: the corpus plus small hand-written fixtures.
pub fn fixtures() -> Vec<(String, Program)> {
    let mut out: Vec<(String, Program)> = SUBJECTS
        .iter()
        .map(|s| (s.to_string(), subject(s).program))
        .collect();
    let extra = [
        ("p0", P0),
        ("chain", "fn f(x:int)->int{ a = x + 1; b = a * 2; return b }"),
        ("single", "fn f(x:int)->int{ return x }"),
        (
            "diamond",
            "fn f(x:int)->int{ if (x > 0) { y = 1 } else { y = 2 } z = y + x; return z }",
        ),
        (
            "early",
            "fn f(a:[int], k:int)->int{ i = 0; while (i < len(a)) { if (a[i] == k) { return i } i = i + 1 } return -1 }",
        ),
        (
            "nested",
            "fn f(n:int)->int{ s = 0; i = 0; while (i < n) { j = 0; while (j < i) { s = s + j; j = j + 1 } i = i + 1 } return s }",
        ),
    ];
    out.extend(extra.iter().map(|(n, src)| (n.to_string(), parse(src).unwrap())));
    out
}

/// Reachability over the dependence graph by Warshall's algorithm on a
/// dense boolean matrix.
pub struct Closure {
    pub ids: Vec<StatementId>,
    index: BTreeMap<StatementId, usize>,
    reach: Vec<Vec<bool>>,
}

impl Closure {
    pub fn of(pdg: &Pdg) -> Self {
        let ids: Vec<StatementId> = pdg.statements.iter().copied().collect();
        let index: BTreeMap<StatementId, usize> = ids.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let n = ids.len();
        let mut reach = vec![vec![false; n]; n];
        for (a, b) in pdg.data_edges.iter().chain(&pdg.ctrl_edges) {
            reach[index[a]][index[b]] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    let via = reach[k].clone();
                    for (cell, &r) in reach[i].iter_mut().zip(&via) {
                        *cell |= r;
                    }
                }
            }
        }
        Closure { ids, index, reach }
    }

    pub fn forward(&self, s: StatementId) -> BTreeSet<StatementId> {
        let i = self.index[&s];
        self.ids
            .iter()
            .enumerate()
            .filter(|(j, _)| self.reach[i][*j])
            .map(|(_, t)| *t)
            .collect()
    }

    pub fn backward(&self, seeds: &BTreeSet<StatementId>) -> BTreeSet<StatementId> {
        self.ids
            .iter()
            .enumerate()
            .filter(|(j, _)| seeds.iter().any(|s| self.reach[*j][self.index[s]]))
            .map(|(_, t)| *t)
            .collect()
    }
}

/// Affected-statement and impact totals recomputed from the closure.
pub fn closure_metrics(
    c: &Closure,
    br: &BTreeSet<StatementId>,
    covered: &BTreeSet<StatementId>,
) -> (BTreeMap<StatementId, u64>, u64, u64) {
    let f = |s: StatementId| -> BTreeSet<StatementId> { c.forward(s).intersection(covered).copied().collect() };
    let sa: BTreeMap<StatementId, u64> = br.iter().map(|&s| (s, f(s).len() as u64)).collect();
    let ta = sa.values().sum();
    let ti = br
        .iter()
        .map(|&s| f(s).into_iter().map(|t| f(t).len() as u64).sum::<u64>())
        .sum();
    (sa, ta, ti)
}

pub fn matrix(kills: Vec<Vec<bool>>) -> KillMatrix {
    let n = kills.len();
    let m = kills.first().map_or(0, |r| r.len());
    KillMatrix {
        role: MatrixRole::Validation,
        mrs: (0..n).map(|i| format!("MR{i:02}")).collect(),
        mutants: (0..m).map(|j| format!("m{:04}", j + 1)).collect(),
        kills,
        mr_cost_steps: vec![1; n],
    }
}

/// Random kill matrix with at least one killable mutant.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64) -> KillMatrix {
    loop {
        let kills: Vec<Vec<bool>> = (0..n)
            .map(|_| (0..m).map(|_| rng.random_bool(density)).collect())
            .collect();
        let mut km = matrix(kills);
        km.mr_cost_steps = (0..n).map(|_| rng.random_range(1..50)).collect();
        if km.killable_count() > 0 {
            return km;
        }
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// APFD straight from the definition, with its own first-detection scan.
pub fn apfd_oracle(order: &[usize], km: &KillMatrix) -> Rational {
    let n = order.len() as i64;
    let mut ranks = Vec::new();
    for j in 0..km.mutants.len() {
        if let Some(pos) = order.iter().position(|&r| km.kills[r][j]) {
            ranks.push(pos as i64 + 1);
        }
    }
    let m = ranks.len() as i64;
    let sum: i64 = ranks.iter().sum();
    int(1) - int(sum) / int(n * m) + int(1) / int(2 * n)
}

/// Checks that every pick of an additional-greedy sequence gains the most
/// not-yet-covered units among relations not yet placed. Returns the first
/// violating position.
pub fn greedy_violation<T: Ord + Clone>(
    sets: &BTreeMap<String, BTreeSet<T>>,
    sequence: &[String],
) -> Option<usize> {
    let mut covered: BTreeSet<T> = BTreeSet::new();
    let mut remaining: BTreeSet<&String> = sets.keys().collect();
    for (pos, id) in sequence.iter().enumerate() {
        let gain = |k: &String, cov: &BTreeSet<T>| sets[k].difference(cov).count();
        let mut best = remaining.iter().map(|k| gain(k, &covered)).max().unwrap_or(0);
        if best == 0 && !covered.is_empty() {
            covered.clear();
            best = remaining.iter().map(|k| gain(k, &covered)).max().unwrap_or(0);
        }
        if !remaining.remove(id) || gain(id, &covered) != best {
            return Some(pos);
        }
        covered.extend(sets[id].iter().cloned());
    }
    if remaining.is_empty() {
        None
    } else {
        Some(sequence.len())
    }
}

/// All permutations of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, left: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..left.len() {
            let x = left.remove(i);
            prefix.push(x);
            go(prefix, left, out);
            prefix.pop();
            left.insert(i, x);
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}
