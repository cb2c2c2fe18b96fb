//! Recursive-descent parser. Statement ids are handed out in source order
//! as statements are opened, so a loop header precedes its body.

use super::ast::*;
use super::lexer::{Tok, Token};
use super::ParseError;

pub struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    next_id: u32,
}

impl Parser {
    pub fn new(tokens: Vec<Token>) -> Self {
        Parser {
            tokens,
            pos: 0,
            next_id: 1,
        }
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn current(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn previous(&self) -> &Token {
        &self.tokens[self.pos.saturating_sub(1)]
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, expected: &str) -> Result<T, ParseError> {
        let t = self.current();
        Err(ParseError::Syntax {
            line: t.line,
            col: t.col,
            message: format!("expected {expected}, found {}", t.tok.describe()),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            self.error(&tok.describe())
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            _ => self.error("identifier"),
        }
    }

    fn span_from(&self, start: &Token) -> Span {
        let end = self.previous();
        Span {
            line: start.line,
            col: start.col,
            end_line: end.end_line,
            end_col: end.end_col,
        }
    }

    pub fn program(&mut self) -> Result<Vec<Function>, ParseError> {
        let mut functions = Vec::new();
        while *self.peek() != Tok::Eof {
            functions.push(self.function()?);
        }
        Ok(functions)
    }

    fn function(&mut self) -> Result<Function, ParseError> {
        let start = self.expect(Tok::Fn)?;
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let pname = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                params.push(Param { name: pname, ty });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        // An omitted return type means `int`.
        let returns = if self.eat(&Tok::Arrow) {
            self.ty()?
        } else {
            Type::Int
        };
        let body = self.block()?;
        Ok(Function {
            name,
            params,
            returns,
            body,
            span: self.span_from(&start),
        })
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        if self.eat(&Tok::LBracket) {
            match self.peek() {
                Tok::Ident(n) if n == "int" => {
                    self.bump();
                }
                _ => return self.error("`int` (only int arrays are supported)"),
            }
            self.expect(Tok::RBracket)?;
            return Ok(Type::IntArray);
        }
        match self.peek() {
            Tok::Ident(n) if n == "int" => {
                self.bump();
                Ok(Type::Int)
            }
            Tok::Ident(n) if n == "bool" => {
                self.bump();
                Ok(Type::Bool)
            }
            _ => self.error("type"),
        }
    }

    fn block(&mut self) -> Result<Vec<Statement>, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut body = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return self.error("`}`");
            }
            if self.eat(&Tok::Semi) {
                continue;
            }
            body.push(self.statement()?);
        }
        self.expect(Tok::RBrace)?;
        Ok(body)
    }

    fn fresh_id(&mut self) -> StatementId {
        let id = StatementId(self.next_id);
        self.next_id += 1;
        id
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let start = self.current().clone();
        match self.peek().clone() {
            Tok::If => self.if_statement(),
            Tok::While => {
                self.bump();
                let id = self.fresh_id();
                let cond = self.expr()?;
                let header = self.span_from(&start);
                let body = self.block()?;
                Ok(Statement {
                    id,
                    kind: StmtKind::While { cond, body },
                    span: header,
                })
            }
            Tok::Return => {
                self.bump();
                let id = self.fresh_id();
                let value = self.expr()?;
                let span = self.span_from(&start);
                self.eat(&Tok::Semi);
                Ok(Statement {
                    id,
                    kind: StmtKind::Return { value },
                    span,
                })
            }
            Tok::Ident(name) => {
                let id = self.fresh_id();
                let kind = match self.peek_at(1) {
                    Tok::Assign => {
                        self.bump();
                        self.bump();
                        StmtKind::Assign {
                            target: name,
                            value: self.expr()?,
                        }
                    }
                    Tok::LBracket => {
                        self.bump();
                        self.bump();
                        let index = self.expr()?;
                        self.expect(Tok::RBracket)?;
                        self.expect(Tok::Assign)?;
                        StmtKind::ArrayWrite {
                            target: name,
                            index,
                            value: self.expr()?,
                        }
                    }
                    Tok::LParen if name != "len" => StmtKind::Call { call: self.expr()? },
                    _ => {
                        self.bump();
                        return self.error("`=`, `[` or `(` after identifier");
                    }
                };
                let span = self.span_from(&start);
                self.eat(&Tok::Semi);
                Ok(Statement { id, kind, span })
            }
            _ => self.error("statement"),
        }
    }

    fn if_statement(&mut self) -> Result<Statement, ParseError> {
        let start = self.expect(Tok::If)?;
        let id = self.fresh_id();
        let cond = self.expr()?;
        let header = self.span_from(&start);
        let then_body = self.block()?;
        let else_body = if self.eat(&Tok::Else) {
            if *self.peek() == Tok::If {
                vec![self.if_statement()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Statement {
            id,
            kind: StmtKind::If {
                cond,
                then_body,
                else_body,
            },
            span: header,
        })
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        Some(match self.peek() {
            Tok::OrOr => BinaryOp::Or,
            Tok::AndAnd => BinaryOp::And,
            Tok::EqEq => BinaryOp::Eq,
            Tok::Ne => BinaryOp::Ne,
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            Tok::Plus => BinaryOp::Add,
            Tok::Minus => BinaryOp::Sub,
            Tok::Star => BinaryOp::Mul,
            Tok::Slash => BinaryOp::Div,
            Tok::Percent => BinaryOp::Rem,
            _ => return None,
        })
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            if op.precedence() < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Minus => {
                let minus = self.bump();
                if let Tok::Int(v) = *self.peek() {
                    // `-<literal>` is a negative literal, not a negation node.
                    self.bump();
                    let value = i64::try_from(-(v as i128)).map_err(|_| ParseError::Syntax {
                        line: minus.line,
                        col: minus.col,
                        message: format!("integer literal `-{v}` out of range"),
                    })?;
                    return self.postfix(Expr::Int(value));
                }
                Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?)))
            }
            Tok::Bang => {
                self.bump();
                Ok(Expr::Unary(UnaryOp::Not, Box::new(self.unary()?)))
            }
            _ => {
                let base = self.primary()?;
                self.postfix(base)
            }
        }
    }

    fn postfix(&mut self, mut base: Expr) -> Result<Expr, ParseError> {
        while self.eat(&Tok::LBracket) {
            let index = self.expr()?;
            self.expect(Tok::RBracket)?;
            base = Expr::Index(Box::new(base), Box::new(index));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.current().clone();
        match tok.tok {
            Tok::Int(v) => {
                self.bump();
                let value = i64::try_from(v).map_err(|_| ParseError::Syntax {
                    line: tok.line,
                    col: tok.col,
                    message: format!("integer literal `{v}` out of range"),
                })?;
                Ok(Expr::Int(value))
            }
            Tok::True => {
                self.bump();
                Ok(Expr::Bool(true))
            }
            Tok::False => {
                self.bump();
                Ok(Expr::Bool(false))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::LBracket => {
                self.bump();
                let mut items = Vec::new();
                if *self.peek() != Tok::RBracket {
                    loop {
                        items.push(self.expr()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBracket)?;
                Ok(Expr::ArrayLit(items))
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat(&Tok::LParen) {
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen)?;
                    if name == "len" {
                        if args.len() != 1 {
                            return Err(ParseError::Type {
                                line: tok.line,
                                col: tok.col,
                                message: format!("`len` takes 1 argument, got {}", args.len()),
                            });
                        }
                        return Ok(Expr::Len(Box::new(args.pop().expect("one arg"))));
                    }
                    Ok(Expr::Call(name, args))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            _ => self.error("expression"),
        }
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub fn expect_eof(&self) -> Result<(), ParseError> {
        if self.at_eof() {
            Ok(())
        } else {
            self.error("end of input")
        }
    }
}
