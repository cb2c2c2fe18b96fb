//! Intraprocedural data and control dependence, slicing over the resulting
//! dependence graph, and CFG hop distances to the function's returns.
//!
//! Data dependence uses reaching definitions solved iteratively to a fixed
//! point. Control dependence is read off the post-dominator tree of the CFG
//! augmented with an `entry -> exit` edge; dependences on the synthetic entry
//! and a loop header's dependence on itself are not recorded.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::exec::CoverageUnion;
use crate::minilang::{build_cfg, Cfg, CfgNode, Function, Program, StatementId};
use crate::LookupError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pdg {
    pub function: String,
    pub statements: BTreeSet<StatementId>,
    pub data_edges: BTreeSet<(StatementId, StatementId)>,
    pub ctrl_edges: BTreeSet<(StatementId, StatementId)>,
}

impl Pdg {
    pub fn successors(&self, s: StatementId) -> BTreeSet<StatementId> {
        self.data_edges
            .iter()
            .chain(&self.ctrl_edges)
            .filter(|(from, _)| *from == s)
            .map(|(_, to)| *to)
            .collect()
    }

    pub fn predecessors(&self, s: StatementId) -> BTreeSet<StatementId> {
        self.data_edges
            .iter()
            .chain(&self.ctrl_edges)
            .filter(|(_, to)| *to == s)
            .map(|(from, _)| *from)
            .collect()
    }

    fn adjacency(&self, reverse: bool) -> BTreeMap<StatementId, Vec<StatementId>> {
        let mut adj: BTreeMap<StatementId, Vec<StatementId>> = BTreeMap::new();
        for &(from, to) in self.data_edges.iter().chain(&self.ctrl_edges) {
            let (a, b) = if reverse { (to, from) } else { (from, to) };
            adj.entry(a).or_default().push(b);
        }
        adj
    }

    fn check(&self, s: StatementId) -> Result<(), LookupError> {
        if self.statements.contains(&s) {
            Ok(())
        } else {
            Err(LookupError::UnknownStatement(s))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// A slice: statements reachable along dependence edges from (forward) or
/// into (backward) the seeds. The seeds themselves are members only when a
/// path of at least one edge leads back to a seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceSet {
    pub seeds: BTreeSet<StatementId>,
    pub direction: Direction,
    pub members: BTreeSet<StatementId>,
}

impl SliceSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `members ∪ seeds`.
    pub fn with_seeds(&self) -> BTreeSet<StatementId> {
        self.members.union(&self.seeds).copied().collect()
    }
}

pub fn compute_pdg(p: &Program, function: &str) -> Result<Pdg, LookupError> {
    let f = p
        .function(function)
        .ok_or_else(|| LookupError::UnknownFunction(function.to_string()))?;
    let cfg = build_cfg(f);
    Ok(pdg_for(f, &cfg))
}

/// Dependence graph of `f` given its already-built CFG.
pub fn pdg_for(f: &Function, cfg: &Cfg) -> Pdg {
    Pdg {
        function: f.name.clone(),
        statements: f.statement_ids(),
        data_edges: data_dependences(f, cfg),
        ctrl_edges: control_dependences(cfg),
    }
}

type Def = (String, StatementId);

fn data_dependences(f: &Function, cfg: &Cfg) -> BTreeSet<(StatementId, StatementId)> {
    let stmts: BTreeMap<StatementId, _> = f.statements().into_iter().map(|s| (s.id, s)).collect();
    let defs: BTreeMap<StatementId, BTreeSet<String>> =
        stmts.iter().map(|(id, s)| (*id, s.defs())).collect();

    let mut reach_in: BTreeMap<CfgNode, BTreeSet<Def>> = BTreeMap::new();
    let mut reach_out: BTreeMap<CfgNode, BTreeSet<Def>> = BTreeMap::new();
    let nodes: Vec<CfgNode> = cfg.nodes.iter().copied().collect();
    let mut changed = true;
    while changed {
        changed = false;
        for &node in &nodes {
            let input: BTreeSet<Def> = cfg
                .predecessors(node)
                .flat_map(|p| reach_out.get(&p).into_iter().flatten().cloned())
                .collect();
            let output = match node.statement() {
                Some(id) => {
                    let killed = &defs[&id];
                    let mut out: BTreeSet<Def> = input
                        .iter()
                        .filter(|(var, _)| !killed.contains(var))
                        .cloned()
                        .collect();
                    out.extend(killed.iter().map(|v| (v.clone(), id)));
                    out
                }
                None => input.clone(),
            };
            reach_in.insert(node, input);
            if reach_out.get(&node) != Some(&output) {
                reach_out.insert(node, output);
                changed = true;
            }
        }
    }

    let mut edges = BTreeSet::new();
    for (id, stmt) in &stmts {
        let reaching = &reach_in[&CfgNode::Stmt(*id)];
        for var in stmt.uses() {
            for (dvar, def) in reaching {
                if *dvar == var {
                    edges.insert((*def, *id));
                }
            }
        }
    }
    edges
}

/// Post-dominator sets on the CFG augmented with `entry -> exit`.
pub(crate) fn post_dominators(cfg: &Cfg) -> BTreeMap<CfgNode, BTreeSet<CfgNode>> {
    let all: BTreeSet<CfgNode> = cfg.nodes.clone();
    let succs = |n: CfgNode| -> Vec<CfgNode> {
        let mut v: Vec<CfgNode> = cfg.successors(n).collect();
        if n == CfgNode::Entry {
            v.push(CfgNode::Exit);
        }
        v
    };
    let mut pdom: BTreeMap<CfgNode, BTreeSet<CfgNode>> = all
        .iter()
        .map(|&n| {
            let init = if n == CfgNode::Exit {
                BTreeSet::from([n])
            } else {
                all.clone()
            };
            (n, init)
        })
        .collect();
    let mut changed = true;
    while changed {
        changed = false;
        for &n in all.iter().rev() {
            if n == CfgNode::Exit {
                continue;
            }
            let mut acc: Option<BTreeSet<CfgNode>> = None;
            for s in succs(n) {
                let ps = &pdom[&s];
                acc = Some(match acc {
                    None => ps.clone(),
                    Some(a) => a.intersection(ps).copied().collect(),
                });
            }
            let mut next = acc.unwrap_or_default();
            next.insert(n);
            if pdom[&n] != next {
                pdom.insert(n, next);
                changed = true;
            }
        }
    }
    pdom
}

fn immediate_post_dominators(
    pdom: &BTreeMap<CfgNode, BTreeSet<CfgNode>>,
) -> BTreeMap<CfgNode, CfgNode> {
    let mut ipdom = BTreeMap::new();
    for (&n, set) in pdom {
        // The closest strict post-dominator is the one post-dominated by all
        // the others, i.e. the one with the largest post-dominator set.
        if let Some(&closest) = set
            .iter()
            .filter(|&&d| d != n)
            .max_by_key(|d| pdom[d].len())
        {
            ipdom.insert(n, closest);
        }
    }
    ipdom
}

fn control_dependences(cfg: &Cfg) -> BTreeSet<(StatementId, StatementId)> {
    let pdom = post_dominators(cfg);
    let ipdom = immediate_post_dominators(&pdom);
    let mut edges = BTreeSet::new();
    for edge in &cfg.edges {
        let (a, b) = (edge.from, edge.to);
        let Some(controller) = a.statement() else {
            continue;
        };
        // b post-dominates a: no dependence created by this edge.
        if pdom[&a].contains(&b) && b != a {
            continue;
        }
        let stop = ipdom.get(&a).copied();
        let mut t = Some(b);
        while let Some(node) = t {
            if Some(node) == stop {
                break;
            }
            if let Some(controlled) = node.statement() {
                if controlled != controller {
                    edges.insert((controller, controlled));
                }
            }
            t = ipdom.get(&node).copied();
        }
    }
    edges
}

fn reach(
    adj: &BTreeMap<StatementId, Vec<StatementId>>,
    seeds: &BTreeSet<StatementId>,
) -> BTreeSet<StatementId> {
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<StatementId> = seeds
        .iter()
        .flat_map(|s| adj.get(s).into_iter().flatten().copied())
        .collect();
    while let Some(n) = queue.pop_front() {
        if seen.insert(n) {
            queue.extend(adj.get(&n).into_iter().flatten().copied());
        }
    }
    seen
}

pub fn backward_slice(pdg: &Pdg, seeds: &BTreeSet<StatementId>) -> Result<SliceSet, LookupError> {
    for &s in seeds {
        pdg.check(s)?;
    }
    Ok(SliceSet {
        seeds: seeds.clone(),
        direction: Direction::Backward,
        members: reach(&pdg.adjacency(true), seeds),
    })
}

pub fn forward_slice(pdg: &Pdg, s: StatementId) -> Result<SliceSet, LookupError> {
    pdg.check(s)?;
    let seeds = BTreeSet::from([s]);
    let members = reach(&pdg.adjacency(false), &seeds);
    Ok(SliceSet {
        seeds,
        direction: Direction::Forward,
        members,
    })
}

/// Fewest CFG edges from `s` to any return statement of its function.
pub fn distance_to_output(cfg: &Cfg, s: StatementId) -> Result<u32, LookupError> {
    if !cfg.contains(s) {
        return Err(LookupError::UnknownStatement(s));
    }
    let start = CfgNode::Stmt(s);
    let mut dist: BTreeMap<CfgNode, u32> = BTreeMap::from([(start, 0)]);
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        let d = dist[&n];
        if n.statement().is_some_and(|id| cfg.returns.contains(&id)) {
            return Ok(d);
        }
        for next in cfg.successors(n) {
            if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(next) {
                e.insert(d + 1);
                queue.push_back(next);
            }
        }
    }
    // Well-formed functions always reach a return.
    Err(LookupError::UnknownStatement(s))
}

pub fn restrict_to_covered(slice: &SliceSet, u: &CoverageUnion) -> SliceSet {
    SliceSet {
        seeds: slice.seeds.clone(),
        direction: slice.direction,
        members: slice
            .members
            .intersection(&u.statements)
            .copied()
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse;

    const P0: &str = "fn sum(a:[int])->int { total=0; i=0; while(i<len(a)){ total=total+a[i]; i=i+1 } return total }";
    const LINE: &str = "fn f()->int{ x = 1; y = x + 1; return y }";

    fn ids(v: &[u32]) -> BTreeSet<StatementId> {
        v.iter().map(|&i| StatementId(i)).collect()
    }

    fn pairs(v: &[(u32, u32)]) -> BTreeSet<(StatementId, StatementId)> {
        v.iter()
            .map(|&(a, b)| (StatementId(a), StatementId(b)))
            .collect()
    }

    fn p0() -> (Program, Pdg, Cfg) {
        let p = parse(P0).unwrap();
        let pdg = compute_pdg(&p, "sum").unwrap();
        let cfg = build_cfg(&p.functions[0]);
        (p, pdg, cfg)
    }

    #[test]
    fn straight_line_pdg() {
        let p = parse(LINE).unwrap();
        let pdg = compute_pdg(&p, "f").unwrap();
        assert_eq!(pdg.data_edges, pairs(&[(1, 2), (2, 3)]));
        assert!(pdg.ctrl_edges.is_empty());
    }

    #[test]
    fn p0_pdg() {
        let (_, pdg, _) = p0();
        assert_eq!(pdg.ctrl_edges, pairs(&[(3, 4), (3, 5)]));
        let expected = pairs(&[
            (1, 4),
            (4, 4),
            (4, 6),
            (2, 3),
            (2, 5),
            (5, 5),
            (5, 3),
            (2, 4),
            (5, 4),
        ]);
        assert!(pdg.data_edges.is_superset(&expected));
        // total=0 also reaches the return when the loop is skipped
        assert_eq!(pdg.data_edges, &expected | &pairs(&[(1, 6)]));
    }

    #[test]
    fn dead_definition_has_no_outgoing_edge() {
        let p = parse("fn f(x:int)->int{ d = 5; y = x; return y }").unwrap();
        let pdg = compute_pdg(&p, "f").unwrap();
        assert!(pdg.successors(StatementId(1)).is_empty());
    }

    #[test]
    fn unknown_function() {
        let p = parse(LINE).unwrap();
        assert_eq!(
            compute_pdg(&p, "nope"),
            Err(LookupError::UnknownFunction("nope".into()))
        );
    }

    #[test]
    fn backward_slices() {
        let p = parse(LINE).unwrap();
        let pdg = compute_pdg(&p, "f").unwrap();
        let b = backward_slice(&pdg, &ids(&[3])).unwrap();
        assert_eq!(b.members, ids(&[1, 2]));
        assert_eq!(b.with_seeds(), ids(&[1, 2, 3]));
        let src = backward_slice(&pdg, &ids(&[1])).unwrap();
        assert_eq!(src.with_seeds(), ids(&[1]));

        let (_, pdg, _) = p0();
        let br = backward_slice(&pdg, &ids(&[6])).unwrap();
        assert_eq!(br.with_seeds(), ids(&[1, 2, 3, 4, 5, 6]));
        assert!(backward_slice(&pdg, &ids(&[42])).is_err());
    }

    #[test]
    fn forward_slices() {
        let (_, pdg, _) = p0();
        assert_eq!(forward_slice(&pdg, StatementId(1)).unwrap().members, ids(&[4, 6]));
        assert_eq!(
            forward_slice(&pdg, StatementId(2)).unwrap().members,
            ids(&[3, 4, 5, 6])
        );
        assert!(forward_slice(&pdg, StatementId(6)).unwrap().is_empty());
        // the loop header lies on the cycle 3 -> 5 -> 3
        assert!(forward_slice(&pdg, StatementId(3))
            .unwrap()
            .members
            .contains(&StatementId(3)));
    }

    #[test]
    fn distances() {
        let (_, _, cfg) = p0();
        assert_eq!(distance_to_output(&cfg, StatementId(6)).unwrap(), 0);
        assert_eq!(distance_to_output(&cfg, StatementId(3)).unwrap(), 1);
        assert_eq!(distance_to_output(&cfg, StatementId(4)).unwrap(), 3);
        assert_eq!(distance_to_output(&cfg, StatementId(1)).unwrap(), 3);
        assert!(distance_to_output(&cfg, StatementId(7)).is_err());
    }

    #[test]
    fn multiple_returns_take_the_nearest() {
        let p = parse("fn f(x:int)->int{ y = x; if (y > 0) { return 1 } z = 2; return z }").unwrap();
        let cfg = build_cfg(&p.functions[0]);
        assert_eq!(distance_to_output(&cfg, StatementId(1)).unwrap(), 2);
        assert_eq!(distance_to_output(&cfg, StatementId(4)).unwrap(), 1);
    }

    #[test]
    fn restriction() {
        let slice = SliceSet {
            seeds: ids(&[9]),
            direction: Direction::Backward,
            members: ids(&[1, 2, 3]),
        };
        let cov = |v: &[u32]| CoverageUnion {
            program_digest: String::new(),
            statements: ids(v),
            branches: BTreeSet::new(),
        };
        assert_eq!(restrict_to_covered(&slice, &cov(&[1, 3])).members, ids(&[1, 3]));
        assert_eq!(restrict_to_covered(&slice, &cov(&[1, 2, 3, 4])).members, ids(&[1, 2, 3]));
        assert!(restrict_to_covered(&slice, &cov(&[])).members.is_empty());
        assert_eq!(restrict_to_covered(&slice, &cov(&[])).seeds, ids(&[9]));
    }
}
