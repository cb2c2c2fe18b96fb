//! Deterministic tree-walking evaluator with statement and branch tracing.
//!
//! Every statement visit (including each evaluation of a loop header) costs
//! one step. The step count is the cost model used for time-to-detect, so it
//! must not depend on anything but the program and its arguments.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::{
    BinaryOp, BranchTag, Expr, Program, Statement, StatementId, StmtKind, Type, UnaryOp,
};

pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;
const MAX_CALL_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Array(Vec<i64>),
}

impl Value {
    pub fn ty(&self) -> Type {
        match self {
            Value::Int(_) => Type::Int,
            Value::Bool(_) => Type::Bool,
            Value::Array(_) => Type::IntArray,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Array(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("division by zero at statement {0}")]
    DivisionByZero(StatementId),
    #[error("index {index} out of bounds for length {len} at statement {stmt}")]
    IndexOutOfBounds {
        stmt: StatementId,
        index: i64,
        len: usize,
    },
    #[error("integer overflow at statement {0}")]
    Overflow(StatementId),
    #[error("unbound variable `{name}` at statement {stmt}")]
    UnboundVariable { stmt: StatementId, name: String },
    #[error("type mismatch in `{op}` at statement {stmt}")]
    TypeMismatch { stmt: StatementId, op: String },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("call depth limit exceeded")]
    CallDepthExceeded,
    #[error("function `{0}` finished without returning")]
    MissingReturn(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Returned(Value),
    RuntimeError(String),
    StepLimitExceeded,
}

impl Outcome {
    pub fn value(&self) -> Option<&Value> {
        match self {
            Outcome::Returned(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_error(&self) -> bool {
        !matches!(self, Outcome::Returned(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionProfile {
    pub test_id: String,
    pub program_digest: String,
    pub statements: BTreeSet<StatementId>,
    pub branches: BTreeSet<(StatementId, BranchTag)>,
    pub steps: u64,
    pub output: Outcome,
}

/// Union of statements and branches over a set of profiles (`U_s`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageUnion {
    pub program_digest: String,
    pub statements: BTreeSet<StatementId>,
    pub branches: BTreeSet<(StatementId, BranchTag)>,
}

/// Failures that prevent an execution from starting at all.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("unknown entry function `{0}`")]
    UnknownFunction(String),
    #[error("`{function}` expects ({expected}), got ({got})")]
    ArgumentMismatch {
        function: String,
        expected: String,
        got: String,
    },
    #[error("profiles come from different programs ({0} vs {1})")]
    MixedProgramDigest(String, String),
}

pub fn execute(
    p: &Program,
    entry: &str,
    args: &[Value],
    step_limit: u64,
) -> Result<ExecutionProfile, ExecError> {
    let f = p
        .function(entry)
        .ok_or_else(|| ExecError::UnknownFunction(entry.to_string()))?;
    let expected: Vec<Type> = f.params.iter().map(|p| p.ty).collect();
    let got: Vec<Type> = args.iter().map(Value::ty).collect();
    if expected != got {
        let render = |v: &[Type]| v.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ");
        return Err(ExecError::ArgumentMismatch {
            function: entry.to_string(),
            expected: render(&expected),
            got: render(&got),
        });
    }

    let mut m = Machine {
        program: p,
        step_limit,
        steps: 0,
        depth: 0,
        statements: BTreeSet::new(),
        branches: BTreeSet::new(),
    };
    let output = match m.call(entry, args.to_vec()) {
        Ok(v) => Outcome::Returned(v),
        Err(Halt::Error(e)) => Outcome::RuntimeError(e.to_string()),
        Err(Halt::StepLimit) => Outcome::StepLimitExceeded,
    };
    Ok(ExecutionProfile {
        test_id: String::new(),
        program_digest: p.source_digest.clone(),
        statements: m.statements,
        branches: m.branches,
        steps: m.steps,
        output,
    })
}

pub fn coverage_union(profiles: &[ExecutionProfile]) -> Result<CoverageUnion, ExecError> {
    let mut union = CoverageUnion::default();
    if let Some(first) = profiles.first() {
        union.program_digest = first.program_digest.clone();
    }
    for p in profiles {
        if p.program_digest != union.program_digest {
            return Err(ExecError::MixedProgramDigest(
                union.program_digest.clone(),
                p.program_digest.clone(),
            ));
        }
        union.statements.extend(p.statements.iter().copied());
        union.branches.extend(p.branches.iter().copied());
    }
    Ok(union)
}

/// Evaluates a free-standing expression over `bindings`. Calls are rejected
/// since there is no program to resolve them against.
pub fn eval_expr(e: &Expr, bindings: &BTreeMap<String, Value>) -> Result<Value, RuntimeError> {
    let env: HashMap<String, Value> = bindings.clone().into_iter().collect();
    let empty = Program {
        version_label: String::new(),
        functions: Vec::new(),
        source_digest: String::new(),
    };
    let mut m = Machine {
        program: &empty,
        step_limit: u64::MAX,
        steps: 0,
        depth: 0,
        statements: BTreeSet::new(),
        branches: BTreeSet::new(),
    };
    m.eval(e, &env, StatementId(0)).map_err(|h| match h {
        Halt::Error(e) => e,
        Halt::StepLimit => RuntimeError::CallDepthExceeded,
    })
}

/// Memoizing executor for one program. Runs are keyed by entry and
/// arguments, which is sound because execution is deterministic.
pub struct Runner<'p> {
    program: &'p Program,
    step_limit: u64,
    cache: HashMap<(String, Vec<Value>), ExecutionProfile>,
}

impl<'p> Runner<'p> {
    pub fn new(program: &'p Program, step_limit: u64) -> Self {
        Runner {
            program,
            step_limit,
            cache: HashMap::new(),
        }
    }

    pub fn program(&self) -> &'p Program {
        self.program
    }

    pub fn run(
        &mut self,
        test_id: &str,
        entry: &str,
        args: &[Value],
    ) -> Result<ExecutionProfile, ExecError> {
        let key = (entry.to_string(), args.to_vec());
        let profile = match self.cache.get(&key) {
            Some(p) => p.clone(),
            None => {
                let p = execute(self.program, entry, args, self.step_limit)?;
                self.cache.insert(key, p.clone());
                p
            }
        };
        Ok(ExecutionProfile {
            test_id: test_id.to_string(),
            ..profile
        })
    }
}

enum Halt {
    Error(RuntimeError),
    StepLimit,
}

impl From<RuntimeError> for Halt {
    fn from(e: RuntimeError) -> Self {
        Halt::Error(e)
    }
}

type Env = HashMap<String, Value>;

struct Machine<'p> {
    program: &'p Program,
    step_limit: u64,
    steps: u64,
    depth: usize,
    statements: BTreeSet<StatementId>,
    branches: BTreeSet<(StatementId, BranchTag)>,
}

impl Machine<'_> {
    fn call(&mut self, name: &str, args: Vec<Value>) -> Result<Value, Halt> {
        let program = self.program;
        let f = program
            .function(name)
            .ok_or_else(|| RuntimeError::UnknownFunction(name.to_string()))?;
        if self.depth >= MAX_CALL_DEPTH {
            return Err(RuntimeError::CallDepthExceeded.into());
        }
        self.depth += 1;
        let mut env: Env = f
            .params
            .iter()
            .map(|p| p.name.clone())
            .zip(args)
            .collect();
        let result = self.block(&f.body, &mut env);
        self.depth -= 1;
        match result? {
            Some(v) => Ok(v),
            None => Err(RuntimeError::MissingReturn(name.to_string()).into()),
        }
    }

    fn visit(&mut self, id: StatementId) -> Result<(), Halt> {
        self.steps += 1;
        if self.steps > self.step_limit {
            return Err(Halt::StepLimit);
        }
        self.statements.insert(id);
        Ok(())
    }

    fn block(&mut self, body: &[Statement], env: &mut Env) -> Result<Option<Value>, Halt> {
        for stmt in body {
            if let Some(v) = self.statement(stmt, env)? {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    fn statement(&mut self, stmt: &Statement, env: &mut Env) -> Result<Option<Value>, Halt> {
        let id = stmt.id;
        match &stmt.kind {
            StmtKind::Assign { target, value } => {
                self.visit(id)?;
                let v = self.eval(value, env, id)?;
                env.insert(target.clone(), v);
                Ok(None)
            }
            StmtKind::ArrayWrite {
                target,
                index,
                value,
            } => {
                self.visit(id)?;
                let i = self.eval_int(index, env, id, "[]")?;
                let v = self.eval_int(value, env, id, "=")?;
                let arr = match env.get_mut(target) {
                    Some(Value::Array(items)) => items,
                    Some(_) => {
                        return Err(RuntimeError::TypeMismatch {
                            stmt: id,
                            op: "[]=".into(),
                        }
                        .into())
                    }
                    None => {
                        return Err(RuntimeError::UnboundVariable {
                            stmt: id,
                            name: target.clone(),
                        }
                        .into())
                    }
                };
                let len = arr.len();
                let slot = usize::try_from(i)
                    .ok()
                    .and_then(|i| arr.get_mut(i))
                    .ok_or(RuntimeError::IndexOutOfBounds {
                        stmt: id,
                        index: i,
                        len,
                    })?;
                *slot = v;
                Ok(None)
            }
            StmtKind::Return { value } => {
                self.visit(id)?;
                Ok(Some(self.eval(value, env, id)?))
            }
            StmtKind::Call { call } => {
                self.visit(id)?;
                self.eval(call, env, id)?;
                Ok(None)
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                self.visit(id)?;
                let taken = self.eval_bool(cond, env, id)?;
                self.branches.insert((id, tag(taken)));
                if taken {
                    self.block(then_body, env)
                } else {
                    self.block(else_body, env)
                }
            }
            StmtKind::While { cond, body } => loop {
                self.visit(id)?;
                let taken = self.eval_bool(cond, env, id)?;
                self.branches.insert((id, tag(taken)));
                if !taken {
                    return Ok(None);
                }
                if let Some(v) = self.block(body, env)? {
                    return Ok(Some(v));
                }
            },
        }
    }

    fn eval_int(&mut self, e: &Expr, env: &Env, id: StatementId, op: &str) -> Result<i64, Halt> {
        match self.eval(e, env, id)? {
            Value::Int(v) => Ok(v),
            _ => Err(RuntimeError::TypeMismatch {
                stmt: id,
                op: op.into(),
            }
            .into()),
        }
    }

    fn eval_bool(&mut self, e: &Expr, env: &Env, id: StatementId) -> Result<bool, Halt> {
        match self.eval(e, env, id)? {
            Value::Bool(b) => Ok(b),
            _ => Err(RuntimeError::TypeMismatch {
                stmt: id,
                op: "condition".into(),
            }
            .into()),
        }
    }

    fn eval(&mut self, e: &Expr, env: &Env, id: StatementId) -> Result<Value, Halt> {
        Ok(match e {
            Expr::Int(v) => Value::Int(*v),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Var(name) => env
                .get(name)
                .cloned()
                .ok_or_else(|| RuntimeError::UnboundVariable {
                    stmt: id,
                    name: name.clone(),
                })?,
            Expr::ArrayLit(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.eval_int(item, env, id, "[..]")?);
                }
                Value::Array(out)
            }
            Expr::Index(base, index) => {
                let i = self.eval_int(index, env, id, "[]")?;
                let arr = self.eval_array(base, env, id)?;
                let v = usize::try_from(i)
                    .ok()
                    .and_then(|i| arr.get(i).copied())
                    .ok_or(RuntimeError::IndexOutOfBounds {
                        stmt: id,
                        index: i,
                        len: arr.len(),
                    })?;
                Value::Int(v)
            }
            Expr::Len(inner) => Value::Int(self.eval_array(inner, env, id)?.len() as i64),
            Expr::Call(name, args) => {
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.eval(a, env, id)?);
                }
                self.call(name, values)?
            }
            Expr::Unary(UnaryOp::Neg, inner) => {
                let v = self.eval_int(inner, env, id, "-")?;
                Value::Int(v.checked_neg().ok_or(RuntimeError::Overflow(id))?)
            }
            Expr::Unary(UnaryOp::Not, inner) => Value::Bool(!self.eval_bool(inner, env, id)?),
            Expr::Binary(BinaryOp::And, lhs, rhs) => {
                Value::Bool(self.eval_bool(lhs, env, id)? && self.eval_bool(rhs, env, id)?)
            }
            Expr::Binary(BinaryOp::Or, lhs, rhs) => {
                Value::Bool(self.eval_bool(lhs, env, id)? || self.eval_bool(rhs, env, id)?)
            }
            Expr::Binary(op, lhs, rhs) => {
                let l = self.eval(lhs, env, id)?;
                let r = self.eval(rhs, env, id)?;
                binary(*op, l, r, id)?
            }
        })
    }

    fn eval_array(&mut self, e: &Expr, env: &Env, id: StatementId) -> Result<Vec<i64>, Halt> {
        // Avoid cloning whole arrays for plain variable reads.
        if let Expr::Var(name) = e {
            return match env.get(name) {
                Some(Value::Array(items)) => Ok(items.clone()),
                Some(_) => Err(RuntimeError::TypeMismatch {
                    stmt: id,
                    op: "[]".into(),
                }
                .into()),
                None => Err(RuntimeError::UnboundVariable {
                    stmt: id,
                    name: name.clone(),
                }
                .into()),
            };
        }
        match self.eval(e, env, id)? {
            Value::Array(items) => Ok(items),
            _ => Err(RuntimeError::TypeMismatch {
                stmt: id,
                op: "[]".into(),
            }
            .into()),
        }
    }
}

fn tag(taken: bool) -> BranchTag {
    if taken {
        BranchTag::True
    } else {
        BranchTag::False
    }
}

fn binary(op: BinaryOp, l: Value, r: Value, id: StatementId) -> Result<Value, RuntimeError> {
    let mismatch = || RuntimeError::TypeMismatch {
        stmt: id,
        op: op.symbol().into(),
    };
    match op {
        BinaryOp::Eq | BinaryOp::Ne => {
            if l.ty() != r.ty() {
                return Err(mismatch());
            }
            let eq = l == r;
            Ok(Value::Bool(if op == BinaryOp::Eq { eq } else { !eq }))
        }
        _ => {
            let (Value::Int(a), Value::Int(b)) = (l, r) else {
                return Err(mismatch());
            };
            let overflow = RuntimeError::Overflow(id);
            Ok(match op {
                BinaryOp::Add => Value::Int(a.checked_add(b).ok_or(overflow)?),
                BinaryOp::Sub => Value::Int(a.checked_sub(b).ok_or(overflow)?),
                BinaryOp::Mul => Value::Int(a.checked_mul(b).ok_or(overflow)?),
                BinaryOp::Div | BinaryOp::Rem => {
                    if b == 0 {
                        return Err(RuntimeError::DivisionByZero(id));
                    }
                    let v = if op == BinaryOp::Div {
                        a.checked_div(b)
                    } else {
                        a.checked_rem(b)
                    };
                    Value::Int(v.ok_or(overflow)?)
                }
                BinaryOp::Lt => Value::Bool(a < b),
                BinaryOp::Le => Value::Bool(a <= b),
                BinaryOp::Gt => Value::Bool(a > b),
                BinaryOp::Ge => Value::Bool(a >= b),
                BinaryOp::Eq | BinaryOp::Ne | BinaryOp::And | BinaryOp::Or => {
                    unreachable!("handled above")
                }
            })
        }
    }
}
