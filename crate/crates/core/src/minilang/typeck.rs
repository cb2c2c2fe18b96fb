//! Static checks: types, arity, return coverage, unreachable code.

use std::collections::HashMap;

use super::ast::*;
use super::ParseError;

struct Signature {
    params: Vec<Type>,
    returns: Type,
}

pub fn check_program(functions: &[Function]) -> Result<(), ParseError> {
    let mut sigs: HashMap<&str, Signature> = HashMap::new();
    for f in functions {
        if sigs.contains_key(f.name.as_str()) {
            return Err(ParseError::DuplicateFunction {
                name: f.name.clone(),
                line: f.span.line,
                col: f.span.col,
            });
        }
        sigs.insert(
            &f.name,
            Signature {
                params: f.params.iter().map(|p| p.ty).collect(),
                returns: f.returns,
            },
        );
    }
    for f in functions {
        check_function(f, &sigs)?;
    }
    Ok(())
}

fn check_function(f: &Function, sigs: &HashMap<&str, Signature>) -> Result<(), ParseError> {
    let mut env: HashMap<String, Type> = HashMap::new();
    for p in &f.params {
        if env.insert(p.name.clone(), p.ty).is_some() {
            return Err(type_error(
                f.span,
                format!("duplicate parameter `{}` in `{}`", p.name, f.name),
            ));
        }
    }
    let mut ctx = Ctx {
        env,
        sigs,
        returns: f.returns,
    };
    ctx.block(&f.body)?;
    if !terminates(&f.body) {
        return Err(ParseError::MissingReturn {
            function: f.name.clone(),
            line: f.span.end_line,
            col: f.span.end_col,
        });
    }
    Ok(())
}

/// True when every path through `body` ends in `return`. Rejects statements
/// that follow a terminating statement, so the CFG has no dead nodes.
fn terminates(body: &[Statement]) -> bool {
    body.last().is_some_and(stmt_terminates)
}

fn stmt_terminates(stmt: &Statement) -> bool {
    match &stmt.kind {
        StmtKind::Return { .. } => true,
        StmtKind::If {
            then_body,
            else_body,
            ..
        } => terminates(then_body) && terminates(else_body),
        _ => false,
    }
}

fn check_reachable(body: &[Statement]) -> Result<(), ParseError> {
    for pair in body.windows(2) {
        if stmt_terminates(&pair[0]) {
            let s = &pair[1];
            return Err(ParseError::UnreachableCode {
                line: s.span.line,
                col: s.span.col,
            });
        }
    }
    Ok(())
}

fn type_error(span: Span, message: String) -> ParseError {
    ParseError::Type {
        line: span.line,
        col: span.col,
        message,
    }
}

struct Ctx<'a> {
    env: HashMap<String, Type>,
    sigs: &'a HashMap<&'a str, Signature>,
    returns: Type,
}

impl Ctx<'_> {
    fn block(&mut self, body: &[Statement]) -> Result<(), ParseError> {
        check_reachable(body)?;
        for stmt in body {
            self.statement(stmt)?;
        }
        Ok(())
    }

    fn statement(&mut self, stmt: &Statement) -> Result<(), ParseError> {
        let span = stmt.span;
        match &stmt.kind {
            StmtKind::Assign { target, value } => {
                let ty = self.expr(value, span)?;
                match self.env.get(target) {
                    Some(existing) if *existing != ty => {
                        return Err(type_error(
                            span,
                            format!("`{target}` has type {existing}, assigned {ty}"),
                        ))
                    }
                    Some(_) => {}
                    None => {
                        self.env.insert(target.clone(), ty);
                    }
                }
            }
            StmtKind::ArrayWrite {
                target,
                index,
                value,
            } => {
                match self.env.get(target) {
                    Some(Type::IntArray) => {}
                    Some(other) => {
                        return Err(type_error(
                            span,
                            format!("cannot index `{target}` of type {other}"),
                        ))
                    }
                    None => return Err(type_error(span, format!("undefined variable `{target}`"))),
                }
                self.expect(index, Type::Int, span)?;
                self.expect(value, Type::Int, span)?;
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                self.expect(cond, Type::Bool, span)?;
                self.block(then_body)?;
                self.block(else_body)?;
            }
            StmtKind::While { cond, body } => {
                self.expect(cond, Type::Bool, span)?;
                self.block(body)?;
            }
            StmtKind::Return { value } => {
                let returns = self.returns;
                self.expect(value, returns, span)?;
            }
            StmtKind::Call { call } => {
                self.expr(call, span)?;
            }
        }
        Ok(())
    }

    fn expect(&self, e: &Expr, want: Type, span: Span) -> Result<(), ParseError> {
        let got = self.expr(e, span)?;
        if got == want {
            Ok(())
        } else {
            Err(type_error(span, format!("expected {want}, found {got}")))
        }
    }

    fn expr(&self, e: &Expr, span: Span) -> Result<Type, ParseError> {
        Ok(match e {
            Expr::Int(_) => Type::Int,
            Expr::Bool(_) => Type::Bool,
            Expr::Var(name) => *self
                .env
                .get(name)
                .ok_or_else(|| type_error(span, format!("undefined variable `{name}`")))?,
            Expr::ArrayLit(items) => {
                for item in items {
                    self.expect(item, Type::Int, span)?;
                }
                Type::IntArray
            }
            Expr::Index(base, index) => {
                self.expect(base, Type::IntArray, span)?;
                self.expect(index, Type::Int, span)?;
                Type::Int
            }
            Expr::Len(inner) => {
                self.expect(inner, Type::IntArray, span)?;
                Type::Int
            }
            Expr::Call(name, args) => {
                let sig = self
                    .sigs
                    .get(name.as_str())
                    .ok_or_else(|| type_error(span, format!("unknown function `{name}`")))?;
                if sig.params.len() != args.len() {
                    return Err(type_error(
                        span,
                        format!(
                            "`{name}` takes {} argument(s), got {}",
                            sig.params.len(),
                            args.len()
                        ),
                    ));
                }
                for (arg, want) in args.iter().zip(&sig.params) {
                    self.expect(arg, *want, span)?;
                }
                sig.returns
            }
            Expr::Unary(UnaryOp::Neg, inner) => {
                self.expect(inner, Type::Int, span)?;
                Type::Int
            }
            Expr::Unary(UnaryOp::Not, inner) => {
                self.expect(inner, Type::Bool, span)?;
                Type::Bool
            }
            Expr::Binary(op, lhs, rhs) => {
                if op.is_arithmetic() {
                    self.expect(lhs, Type::Int, span)?;
                    self.expect(rhs, Type::Int, span)?;
                    Type::Int
                } else if op.is_logical() {
                    self.expect(lhs, Type::Bool, span)?;
                    self.expect(rhs, Type::Bool, span)?;
                    Type::Bool
                } else if matches!(op, BinaryOp::Eq | BinaryOp::Ne) {
                    let l = self.expr(lhs, span)?;
                    self.expect(rhs, l, span)?;
                    Type::Bool
                } else {
                    self.expect(lhs, Type::Int, span)?;
                    self.expect(rhs, Type::Int, span)?;
                    Type::Bool
                }
            }
        })
    }
}
