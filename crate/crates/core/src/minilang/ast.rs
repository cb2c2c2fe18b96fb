//! Syntax tree for MiniLang programs.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Program-global statement identifier, dense from 1 in source order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatementId(pub u32);

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Type {
    Int,
    Bool,
    IntArray,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("int"),
            Type::Bool => f.write_str("bool"),
            Type::IntArray => f.write_str("[int]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem
        )
    }

    pub fn is_relational(self) -> bool {
        matches!(
            self,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge | BinaryOp::Eq | BinaryOp::Ne
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::And | BinaryOp::Or)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Neg,
    Not,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Not => "!",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    ArrayLit(Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Len(Box<Expr>),
    Call(String, Vec<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Direct children, in the order used by node paths.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => Vec::new(),
            Expr::ArrayLit(items) | Expr::Call(_, items) => items.iter().collect(),
            Expr::Index(base, index) => vec![base, index],
            Expr::Len(inner) | Expr::Unary(_, inner) => vec![inner],
            Expr::Binary(_, lhs, rhs) => vec![lhs, rhs],
        }
    }

    pub fn child_mut(&mut self, index: usize) -> Option<&mut Expr> {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => None,
            Expr::ArrayLit(items) | Expr::Call(_, items) => items.get_mut(index),
            Expr::Index(base, idx) => match index {
                0 => Some(base),
                1 => Some(idx),
                _ => None,
            },
            Expr::Len(inner) | Expr::Unary(_, inner) => (index == 0).then_some(&mut **inner),
            Expr::Binary(_, lhs, rhs) => match index {
                0 => Some(lhs),
                1 => Some(rhs),
                _ => None,
            },
        }
    }

    pub fn node_mut(&mut self, path: &[u32]) -> Option<&mut Expr> {
        match path.split_first() {
            None => Some(self),
            Some((head, rest)) => self.child_mut(*head as usize)?.node_mut(rest),
        }
    }

    /// Pre-order walk yielding each node with its path relative to `self`.
    pub fn walk(&self, prefix: &mut Vec<u32>, visit: &mut dyn FnMut(&[u32], &Expr)) {
        visit(prefix, self);
        for (i, child) in self.children().into_iter().enumerate() {
            prefix.push(i as u32);
            child.walk(prefix, visit);
            prefix.pop();
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        if let Expr::Var(name) = self {
            out.insert(name.clone());
        }
        for child in self.children() {
            child.collect_vars(out);
        }
    }

    /// Arithmetic, relational and logical operator nodes in this tree.
    pub fn operator_count(&self) -> u32 {
        let own = match self {
            Expr::Binary(..) | Expr::Unary(..) => 1,
            _ => 0,
        };
        own + self.children().iter().map(|c| c.operator_count()).sum::<u32>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StmtKind {
    Assign {
        target: String,
        value: Expr,
    },
    ArrayWrite {
        target: String,
        index: Expr,
        value: Expr,
    },
    If {
        cond: Expr,
        then_body: Vec<Statement>,
        else_body: Vec<Statement>,
    },
    While {
        cond: Expr,
        body: Vec<Statement>,
    },
    Return {
        value: Expr,
    },
    /// Call evaluated for its side-effect free result, which is discarded.
    Call {
        call: Expr,
    },
}

/// Tag form of [`StmtKind`], used in reports and JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatementKind {
    Assign,
    If,
    While,
    Return,
    Call,
    ArrayWrite,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Statement {
    pub id: StatementId,
    pub kind: StmtKind,
    pub span: Span,
}

impl Statement {
    pub fn kind_tag(&self) -> StatementKind {
        match self.kind {
            StmtKind::Assign { .. } => StatementKind::Assign,
            StmtKind::ArrayWrite { .. } => StatementKind::ArrayWrite,
            StmtKind::If { .. } => StatementKind::If,
            StmtKind::While { .. } => StatementKind::While,
            StmtKind::Return { .. } => StatementKind::Return,
            StmtKind::Call { .. } => StatementKind::Call,
        }
    }

    /// Expression roots owned by this statement (not by nested bodies).
    /// The index into this list is the first element of a node path.
    pub fn exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Assign { value, .. } => vec![value],
            StmtKind::ArrayWrite { index, value, .. } => vec![index, value],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::Return { value } => vec![value],
            StmtKind::Call { call } => vec![call],
        }
    }

    pub fn expr_mut(&mut self, root: usize) -> Option<&mut Expr> {
        match &mut self.kind {
            StmtKind::Assign { value, .. } => (root == 0).then_some(value),
            StmtKind::ArrayWrite { index, value, .. } => match root {
                0 => Some(index),
                1 => Some(value),
                _ => None,
            },
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => (root == 0).then_some(cond),
            StmtKind::Return { value } => (root == 0).then_some(value),
            StmtKind::Call { call } => (root == 0).then_some(call),
        }
    }

    /// Node addressed by `path` = `[root, child, child, ...]`.
    pub fn node_mut(&mut self, path: &[u32]) -> Option<&mut Expr> {
        let (root, rest) = path.split_first()?;
        self.expr_mut(*root as usize)?.node_mut(rest)
    }

    /// Variables defined. An array write defines the whole array.
    pub fn defs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        match &self.kind {
            StmtKind::Assign { target, .. } | StmtKind::ArrayWrite { target, .. } => {
                out.insert(target.clone());
            }
            _ => {}
        }
        out
    }

    /// Variables used. An array write is a partial update, so it also uses
    /// the array it writes into.
    pub fn uses(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for e in self.exprs() {
            e.collect_vars(&mut out);
        }
        if let StmtKind::ArrayWrite { target, .. } = &self.kind {
            out.insert(target.clone());
        }
        out
    }

    pub fn operator_count(&self) -> u32 {
        self.exprs().iter().map(|e| e.operator_count()).sum()
    }

    pub fn is_return(&self) -> bool {
        matches!(self.kind, StmtKind::Return { .. })
    }

    pub fn nested_bodies(&self) -> Vec<&Vec<Statement>> {
        match &self.kind {
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => vec![then_body, else_body],
            StmtKind::While { body, .. } => vec![body],
            _ => Vec::new(),
        }
    }

    pub fn nested_bodies_mut(&mut self) -> Vec<&mut Vec<Statement>> {
        match &mut self.kind {
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => vec![then_body, else_body],
            StmtKind::While { body, .. } => vec![body],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    pub returns: Type,
    pub body: Vec<Statement>,
    pub span: Span,
}

impl Function {
    /// All statements of the function in id (pre-order) order.
    pub fn statements(&self) -> Vec<&Statement> {
        let mut out = Vec::new();
        collect(&self.body, &mut out);
        out
    }

    pub fn statement_ids(&self) -> BTreeSet<StatementId> {
        self.statements().iter().map(|s| s.id).collect()
    }
}

fn collect<'a>(body: &'a [Statement], out: &mut Vec<&'a Statement>) {
    for stmt in body {
        out.push(stmt);
        for nested in stmt.nested_bodies() {
            collect(nested, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Program {
    pub version_label: String,
    pub functions: Vec<Function>,
    /// Hex SHA-256 of the canonical source text.
    pub source_digest: String,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn statements(&self) -> Vec<&Statement> {
        self.functions.iter().flat_map(|f| f.statements()).collect()
    }

    pub fn statement(&self, id: StatementId) -> Option<&Statement> {
        self.statements().into_iter().find(|s| s.id == id)
    }

    pub fn function_of(&self, id: StatementId) -> Option<&Function> {
        self.functions
            .iter()
            .find(|f| f.statements().iter().any(|s| s.id == id))
    }

    pub fn statement_count(&self) -> usize {
        self.statements().len()
    }

    pub fn statement_mut(&mut self, id: StatementId) -> Option<&mut Statement> {
        self.functions
            .iter_mut()
            .find_map(|f| find_mut(&mut f.body, id))
    }

    /// Removes statement `id` from whichever body holds it.
    pub fn remove_statement(&mut self, id: StatementId) -> Option<Statement> {
        self.functions
            .iter_mut()
            .find_map(|f| remove_in(&mut f.body, id))
    }

    /// Copy of the program with every span zeroed, for structural comparison.
    pub fn without_spans(&self) -> Program {
        let mut p = self.clone();
        for f in &mut p.functions {
            f.span = Span::default();
            clear_spans(&mut f.body);
        }
        p
    }
}

fn find_mut(body: &mut [Statement], id: StatementId) -> Option<&mut Statement> {
    for stmt in body.iter_mut() {
        if stmt.id == id {
            return Some(stmt);
        }
        for nested in stmt.nested_bodies_mut() {
            if let Some(found) = find_mut(nested, id) {
                return Some(found);
            }
        }
    }
    None
}

fn remove_in(body: &mut Vec<Statement>, id: StatementId) -> Option<Statement> {
    if let Some(pos) = body.iter().position(|s| s.id == id) {
        return Some(body.remove(pos));
    }
    for stmt in body.iter_mut() {
        for nested in stmt.nested_bodies_mut() {
            if let Some(found) = remove_in(nested, id) {
                return Some(found);
            }
        }
    }
    None
}

fn clear_spans(body: &mut [Statement]) {
    for stmt in body {
        stmt.span = Span::default();
        for nested in stmt.nested_bodies_mut() {
            clear_spans(nested);
        }
    }
}
