//! Recursive-descent parser for minilang.

use super::ast::{AssignOp, BinOp, Expr, Param, Program, Stmt, StmtKind, Type, UnOp};
use super::error::ParseError;
use super::lexer::{lex, Token, TokenKind};

/// Builtins usable in expressions, with their arity.
pub const EXPR_BUILTINS: &[(&str, usize)] = &[("len", 1), ("zeros", 1), ("abs", 1)];
/// Builtins usable as statements.
pub const STMT_BUILTINS: &[(&str, usize)] = &[("swap", 3)];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

pub fn parse(source: &str) -> Result<Program, ParseError> {
    let mut p = Parser { toks: lex(source)?, pos: 0 };
    let program = p.function()?;
    if p.peek().kind != TokenKind::Eof {
        return Err(p.error("expected end of input after function"));
    }
    Ok(program)
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Token {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)]
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: &str) -> ParseError {
        let t = self.peek();
        let found = if t.kind == TokenKind::Eof { "end of input".to_string() } else { format!("`{}`", t.text()) };
        ParseError::Syntax { line: t.line, col: t.col, message: format!("{message}, found {found}") }
    }

    fn unsupported(&self, message: String) -> ParseError {
        let t = self.peek();
        ParseError::Unsupported { line: t.line, col: t.col, message }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek().kind, TokenKind::Punct(q) if q == p)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek().kind, TokenKind::Keyword(q) if q == k)
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.is_punct(p) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{p}`")))
        }
    }

    fn expect_keyword(&mut self, k: &str) -> Result<(), ParseError> {
        if self.is_keyword(k) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{k}`")))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match &self.peek().kind {
            TokenKind::Ident(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    fn function(&mut self) -> Result<Program, ParseError> {
        self.expect_keyword("fn")?;
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let pname = self.ident()?;
                self.expect_punct(":")?;
                let ty = self.ty()?;
                params.push(Param { name: pname, ty });
                if self.is_punct(",") {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let body = self.block()?;
        Program::new(name, params, body)
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        if self.is_keyword("int") {
            self.advance();
            if self.is_punct("[") {
                self.advance();
                self.expect_punct("]")?;
                return Ok(Type::IntArray);
            }
            Ok(Type::Int)
        } else if self.is_keyword("bool") {
            self.advance();
            Ok(Type::Bool)
        } else {
            Err(self.error("expected type"))
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_punct("{")?;
        let mut out = Vec::new();
        while !self.is_punct("}") {
            if self.peek().kind == TokenKind::Eof {
                return Err(self.error("expected `}`"));
            }
            out.push(self.statement()?);
        }
        self.advance();
        Ok(out)
    }

    fn assign_op(&mut self) -> Option<AssignOp> {
        let op = match self.peek().kind {
            TokenKind::Punct("=") => AssignOp::Set,
            TokenKind::Punct("+=") => AssignOp::Add,
            TokenKind::Punct("-=") => AssignOp::Sub,
            TokenKind::Punct("*=") => AssignOp::Mul,
            TokenKind::Punct("/=") => AssignOp::Div,
            TokenKind::Punct("%=") => AssignOp::Rem,
            _ => return None,
        };
        self.advance();
        Some(op)
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        if self.is_keyword("if") {
            return self.if_statement();
        }
        if self.is_keyword("while") {
            self.advance();
            let cond = self.expr()?;
            let body = self.block()?;
            return Ok(Stmt::new(StmtKind::While { cond, body }));
        }
        if self.is_keyword("for") {
            self.advance();
            let var = self.ident()?;
            self.expect_keyword("in")?;
            let start = self.expr()?;
            self.expect_punct("..")?;
            let end = self.expr()?;
            let mut step = 1;
            if self.is_keyword("step") {
                self.advance();
                step = match self.expr()? {
                    Expr::Int(v) if v != 0 => v,
                    _ => return Err(self.unsupported("`step` must be a non-zero integer literal".into())),
                };
            }
            let body = self.block()?;
            if body_assigns(&body, &var) {
                return Err(self.unsupported(format!("loop variable `{var}` is assigned inside its loop")));
            }
            return Ok(Stmt::new(StmtKind::For { var, start, end, step, body }));
        }
        if self.is_keyword("return") {
            self.advance();
            let value = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            return Ok(Stmt::new(StmtKind::Return(value)));
        }
        let name = self.ident()?;
        let kind = if self.is_punct("(") {
            self.advance();
            let args = self.args()?;
            match STMT_BUILTINS.iter().find(|(n, _)| *n == name) {
                Some((_, arity)) if *arity == args.len() => StmtKind::Call { name, args },
                Some((_, arity)) => return Err(self.unsupported(format!("`{name}` takes {arity} arguments"))),
                None => return Err(self.unsupported(format!("call to unknown procedure `{name}`"))),
            }
        } else if self.is_punct("[") {
            self.advance();
            let index = self.expr()?;
            self.expect_punct("]")?;
            let op = self.assign_op().ok_or_else(|| self.error("expected assignment operator"))?;
            let value = self.expr()?;
            StmtKind::Store { array: name, index, op, value }
        } else {
            let decl = if self.is_punct(":") {
                self.advance();
                Some(self.ty()?)
            } else {
                None
            };
            let op = self.assign_op().ok_or_else(|| self.error("expected assignment operator"))?;
            if decl.is_some() && op != AssignOp::Set {
                return Err(self.unsupported("declarations must use `=`".into()));
            }
            let value = self.expr()?;
            StmtKind::Assign { target: name, decl, op, value }
        };
        self.expect_punct(";")?;
        Ok(Stmt::new(kind))
    }

    fn if_statement(&mut self) -> Result<Stmt, ParseError> {
        self.expect_keyword("if")?;
        let cond = self.expr()?;
        let then_body = self.block()?;
        let else_body = if self.is_keyword("else") {
            self.advance();
            if self.is_keyword("if") {
                vec![self.if_statement()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt::new(StmtKind::If { cond, then_body, else_body }))
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if self.is_punct(",") {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        Some(match self.peek().kind {
            TokenKind::Punct("||") => BinOp::Or,
            TokenKind::Punct("&&") => BinOp::And,
            TokenKind::Punct("==") => BinOp::Eq,
            TokenKind::Punct("!=") => BinOp::Ne,
            TokenKind::Punct("<") => BinOp::Lt,
            TokenKind::Punct("<=") => BinOp::Le,
            TokenKind::Punct(">") => BinOp::Gt,
            TokenKind::Punct(">=") => BinOp::Ge,
            TokenKind::Punct("+") => BinOp::Add,
            TokenKind::Punct("-") => BinOp::Sub,
            TokenKind::Punct("*") => BinOp::Mul,
            TokenKind::Punct("/") => BinOp::Div,
            TokenKind::Punct("%") => BinOp::Rem,
            _ => return None,
        })
    }

    // Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.is_punct("-") {
            self.advance();
            // A minus directly followed by a literal is a negative literal.
            if let TokenKind::Int(v) = self.peek().kind {
                if !matches!(self.peek_at(1).kind, TokenKind::Punct("[")) {
                    self.advance();
                    return Ok(Expr::Int(-v));
                }
            }
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        if self.is_punct("!") {
            self.advance();
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.peek().clone();
        match tok.kind {
            TokenKind::Int(v) => {
                self.advance();
                Ok(Expr::Int(v))
            }
            TokenKind::Keyword("true") => {
                self.advance();
                Ok(Expr::Bool(true))
            }
            TokenKind::Keyword("false") => {
                self.advance();
                Ok(Expr::Bool(false))
            }
            TokenKind::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                self.advance();
                if self.is_punct("[") {
                    self.advance();
                    let idx = self.expr()?;
                    self.expect_punct("]")?;
                    Ok(Expr::Index(name, Box::new(idx)))
                } else if self.is_punct("(") {
                    self.advance();
                    let args = self.args()?;
                    match EXPR_BUILTINS.iter().find(|(n, _)| *n == name) {
                        Some((_, arity)) if *arity == args.len() => Ok(Expr::Call(name, args)),
                        Some((_, arity)) => Err(self.unsupported(format!("`{name}` takes {arity} arguments"))),
                        None => Err(self.unsupported(format!("call to unknown function `{name}`"))),
                    }
                } else {
                    Ok(Expr::Var(name))
                }
            }
            _ => Err(self.error("expected expression")),
        }
    }
}

fn body_assigns(body: &[Stmt], var: &str) -> bool {
    let mut hit = false;
    super::ast::walk(body, &mut |s| hit |= s.written_var() == Some(var));
    hit
}
