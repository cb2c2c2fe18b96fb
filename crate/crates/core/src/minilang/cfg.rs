//! Per-function control-flow graphs over statement ids.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use super::ast::{Function, Statement, StatementId, StmtKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CfgNode {
    Entry,
    Stmt(StatementId),
    Exit,
}

impl CfgNode {
    pub fn statement(self) -> Option<StatementId> {
        match self {
            CfgNode::Stmt(id) => Some(id),
            _ => None,
        }
    }
}

impl fmt::Display for CfgNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CfgNode::Entry => f.write_str("entry"),
            CfgNode::Stmt(id) => write!(f, "{id}"),
            CfgNode::Exit => f.write_str("exit"),
        }
    }
}

// Statements serialize as their integer id, the synthetic nodes as strings.
impl Serialize for CfgNode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            CfgNode::Entry => s.serialize_str("entry"),
            CfgNode::Exit => s.serialize_str("exit"),
            CfgNode::Stmt(id) => s.serialize_u32(id.0),
        }
    }
}

impl<'de> Deserialize<'de> for CfgNode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct NodeVisitor;
        impl Visitor<'_> for NodeVisitor {
            type Value = CfgNode;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a statement id, \"entry\" or \"exit\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<CfgNode, E> {
                u32::try_from(v)
                    .map(|v| CfgNode::Stmt(StatementId(v)))
                    .map_err(|_| E::custom("statement id out of range"))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<CfgNode, E> {
                u64::try_from(v)
                    .map_err(|_| E::custom("negative statement id"))
                    .and_then(|v| self.visit_u64(v))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<CfgNode, E> {
                match v {
                    "entry" => Ok(CfgNode::Entry),
                    "exit" => Ok(CfgNode::Exit),
                    other => Err(E::custom(format!("unknown cfg node `{other}`"))),
                }
            }
        }
        d.deserialize_any(NodeVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchTag {
    None,
    True,
    False,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CfgEdge {
    pub from: CfgNode,
    pub to: CfgNode,
    pub branch: BranchTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cfg {
    pub function: String,
    pub nodes: BTreeSet<CfgNode>,
    pub edges: BTreeSet<CfgEdge>,
    pub returns: BTreeSet<StatementId>,
}

impl Cfg {
    pub fn successors(&self, node: CfgNode) -> impl Iterator<Item = CfgNode> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.from == node)
            .map(|e| e.to)
    }

    pub fn predecessors(&self, node: CfgNode) -> impl Iterator<Item = CfgNode> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.to == node)
            .map(|e| e.from)
    }

    pub fn out_edges(&self, node: CfgNode) -> impl Iterator<Item = &CfgEdge> + '_ {
        self.edges.iter().filter(move |e| e.from == node)
    }

    pub fn contains(&self, id: StatementId) -> bool {
        self.nodes.contains(&CfgNode::Stmt(id))
    }
}

pub fn build_cfg(f: &Function) -> Cfg {
    let mut b = Builder {
        nodes: BTreeSet::from([CfgNode::Entry, CfgNode::Exit]),
        edges: BTreeSet::new(),
        returns: BTreeSet::new(),
    };
    let first = b.lower(&f.body, CfgNode::Exit);
    b.edge(CfgNode::Entry, first, BranchTag::None);
    Cfg {
        function: f.name.clone(),
        nodes: b.nodes,
        edges: b.edges,
        returns: b.returns,
    }
}

struct Builder {
    nodes: BTreeSet<CfgNode>,
    edges: BTreeSet<CfgEdge>,
    returns: BTreeSet<StatementId>,
}

impl Builder {
    fn edge(&mut self, from: CfgNode, to: CfgNode, branch: BranchTag) {
        self.edges.insert(CfgEdge { from, to, branch });
    }

    /// Lowers `body` so that control leaving it flows to `next`; returns the
    /// node control enters the body through.
    fn lower(&mut self, body: &[Statement], next: CfgNode) -> CfgNode {
        let mut follow = next;
        for stmt in body.iter().rev() {
            follow = self.lower_stmt(stmt, follow);
        }
        follow
    }

    fn lower_stmt(&mut self, stmt: &Statement, next: CfgNode) -> CfgNode {
        let node = CfgNode::Stmt(stmt.id);
        self.nodes.insert(node);
        match &stmt.kind {
            StmtKind::Return { .. } => {
                self.returns.insert(stmt.id);
                self.edge(node, CfgNode::Exit, BranchTag::None);
            }
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => {
                let then_entry = self.lower(then_body, next);
                let else_entry = self.lower(else_body, next);
                self.edge(node, then_entry, BranchTag::True);
                self.edge(node, else_entry, BranchTag::False);
            }
            StmtKind::While { body, .. } => {
                let body_entry = self.lower(body, node);
                self.edge(node, body_entry, BranchTag::True);
                self.edge(node, next, BranchTag::False);
            }
            StmtKind::Assign { .. } | StmtKind::ArrayWrite { .. } | StmtKind::Call { .. } => {
                self.edge(node, next, BranchTag::None);
            }
        }
        node
    }
}
