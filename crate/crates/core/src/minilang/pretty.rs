//! Canonical source rendering. Reparsing the output yields the same tree.

use std::fmt::Write;

use super::ast::*;

pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for (i, f) in p.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| format!("{}: {}", p.name, p.ty))
            .collect();
        let _ = writeln!(out, "fn {}({}) -> {} {{", f.name, params.join(", "), f.returns);
        body(&mut out, &f.body, 1);
        out.push_str("}\n");
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn body(out: &mut String, stmts: &[Statement], depth: usize) {
    for s in stmts {
        statement(out, s, depth);
    }
}

fn statement(out: &mut String, s: &Statement, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Assign { target, value } => {
            let _ = writeln!(out, "{target} = {};", expr_to_string(value));
        }
        StmtKind::ArrayWrite {
            target,
            index,
            value,
        } => {
            let _ = writeln!(
                out,
                "{target}[{}] = {};",
                expr_to_string(index),
                expr_to_string(value)
            );
        }
        StmtKind::Return { value } => {
            let _ = writeln!(out, "return {};", expr_to_string(value));
        }
        StmtKind::Call { call } => {
            let _ = writeln!(out, "{};", expr_to_string(call));
        }
        StmtKind::While { cond, body: inner } => {
            let _ = writeln!(out, "while ({}) {{", expr_to_string(cond));
            body(out, inner, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::If {
            cond,
            then_body,
            else_body,
        } => {
            let _ = writeln!(out, "if ({}) {{", expr_to_string(cond));
            body(out, then_body, depth + 1);
            indent(out, depth);
            if else_body.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                body(out, else_body, depth + 1);
                indent(out, depth);
                out.push_str("}\n");
            }
        }
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Expr::Var(name) => out.push_str(name),
        Expr::ArrayLit(items) => {
            out.push('[');
            list(out, items);
            out.push(']');
        }
        Expr::Index(base, index) => {
            write_operand(out, base, u8::MAX);
            out.push('[');
            write_expr(out, index);
            out.push(']');
        }
        Expr::Len(inner) => {
            out.push_str("len(");
            write_expr(out, inner);
            out.push(')');
        }
        Expr::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            list(out, args);
            out.push(')');
        }
        Expr::Unary(op, inner) => {
            out.push_str(op.symbol());
            match **inner {
                // `-5` would reparse as a literal
                Expr::Int(_) if *op == UnaryOp::Neg => {
                    out.push('(');
                    write_expr(out, inner);
                    out.push(')');
                }
                _ => write_operand(out, inner, u8::MAX - 1),
            }
        }
        Expr::Binary(op, lhs, rhs) => {
            let prec = op.precedence();
            write_operand(out, lhs, prec);
            let _ = write!(out, " {} ", op.symbol());
            write_operand(out, rhs, prec + 1);
        }
    }
}

/// Writes `e`, parenthesised when it binds looser than `min_prec`.
fn write_operand(out: &mut String, e: &Expr, min_prec: u8) {
    let prec = match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(..) => u8::MAX - 1,
        Expr::Int(v) if *v < 0 => u8::MAX - 1,
        _ => u8::MAX,
    };
    if prec < min_prec {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn list(out: &mut String, items: &[Expr]) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, item);
    }
}
