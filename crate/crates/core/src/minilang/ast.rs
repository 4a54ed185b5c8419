//! Syntax tree and the `Program` container.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::error::ParseError;
use super::printer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatementId(pub u32);

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// A conditional or loop guard. Numbered by the guard's statement id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BranchSiteId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "T")]
    True,
    #[serde(rename = "F")]
    False,
}

impl From<bool> for Arm {
    fn from(b: bool) -> Self {
        if b {
            Arm::True
        } else {
            Arm::False
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Type {
    Int,
    Bool,
    IntArray,
}

impl Type {
    pub fn tokens(self) -> Vec<String> {
        match self {
            Type::Int => vec!["int".into()],
            Type::Bool => vec!["bool".into()],
            Type::IntArray => vec!["int".into(), "[".into(), "]".into()],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    Index(String, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Visits every variable name read by the expression.
    pub fn for_each_var<'a>(&'a self, f: &mut dyn FnMut(&'a str)) {
        match self {
            Expr::Int(_) | Expr::Bool(_) => {}
            Expr::Var(v) => f(v),
            Expr::Index(a, i) => {
                f(a);
                i.for_each_var(f);
            }
            Expr::Unary(_, e) => e.for_each_var(f),
            Expr::Binary(_, l, r) => {
                l.for_each_var(f);
                r.for_each_var(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.for_each_var(f)),
        }
    }

    pub fn reads(&self, name: &str) -> bool {
        let mut hit = false;
        self.for_each_var(&mut |v| hit |= v == name);
        hit
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl AssignOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::Div => "/=",
            AssignOp::Rem => "%=",
        }
    }

    pub fn binop(self) -> Option<BinOp> {
        match self {
            AssignOp::Set => None,
            AssignOp::Add => Some(BinOp::Add),
            AssignOp::Sub => Some(BinOp::Sub),
            AssignOp::Mul => Some(BinOp::Mul),
            AssignOp::Div => Some(BinOp::Div),
            AssignOp::Rem => Some(BinOp::Rem),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatementKind {
    Assign,
    ArrayStore,
    IfGuard,
    WhileGuard,
    ForGuard,
    Return,
    Call,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StmtKind {
    Assign { target: String, decl: Option<Type>, op: AssignOp, value: Expr },
    Store { array: String, index: Expr, op: AssignOp, value: Expr },
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    For { var: String, start: Expr, end: Expr, step: i64, body: Vec<Stmt> },
    Return(Option<Expr>),
    Call { name: String, args: Vec<Expr> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub id: StatementId,
    pub kind: StmtKind,
}

impl Stmt {
    /// Builds a statement with a placeholder id; `Program::new` renumbers.
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt { id: StatementId(u32::MAX), kind }
    }

    pub fn tag(&self) -> StatementKind {
        match &self.kind {
            StmtKind::Assign { .. } => StatementKind::Assign,
            StmtKind::Store { .. } => StatementKind::ArrayStore,
            StmtKind::If { .. } => StatementKind::IfGuard,
            StmtKind::While { .. } => StatementKind::WhileGuard,
            StmtKind::For { .. } => StatementKind::ForGuard,
            StmtKind::Return(_) => StatementKind::Return,
            StmtKind::Call { .. } => StatementKind::Call,
        }
    }

    pub fn is_guard(&self) -> bool {
        matches!(self.kind, StmtKind::If { .. } | StmtKind::While { .. } | StmtKind::For { .. })
    }

    /// Canonical token sequence of the statement itself (guards contribute
    /// their condition, not their bodies).
    pub fn tokens(&self) -> Vec<String> {
        printer::statement_tokens(self)
    }

    /// Nested statement lists, in source order.
    pub fn children(&self) -> Vec<&Vec<Stmt>> {
        match &self.kind {
            StmtKind::If { then_body, else_body, .. } => vec![then_body, else_body],
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => vec![body],
            _ => Vec::new(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Vec<Stmt>> {
        match &mut self.kind {
            StmtKind::If { then_body, else_body, .. } => vec![then_body, else_body],
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => vec![body],
            _ => Vec::new(),
        }
    }

    /// Variable written by this statement (not counting nested statements).
    pub fn written_var(&self) -> Option<&str> {
        match &self.kind {
            StmtKind::Assign { target, .. } => Some(target),
            StmtKind::Store { array, .. } => Some(array),
            StmtKind::For { var, .. } => Some(var),
            StmtKind::Call { name, args } if name == "swap" => match args.first() {
                Some(Expr::Var(a)) => Some(a),
                _ => None,
            },
            _ => None,
        }
    }

    /// Expressions evaluated by this statement itself.
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Assign { value, .. } => vec![value],
            StmtKind::Store { index, value, .. } => vec![index, value],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::For { start, end, .. } => vec![start, end],
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Call { args, .. } => args.iter().collect(),
        }
    }

    /// Variables read by this statement itself, including the implicit read of
    /// compound assignments, array stores and `for` increments.
    pub fn own_reads(&self) -> Vec<String> {
        let mut out = Vec::new();
        for e in self.own_exprs() {
            e.for_each_var(&mut |v| out.push(v.to_string()));
        }
        match &self.kind {
            StmtKind::Assign { target, op, .. } if *op != AssignOp::Set => out.push(target.clone()),
            StmtKind::Store { array, .. } => out.push(array.clone()),
            StmtKind::For { var, .. } => out.push(var.clone()),
            _ => {}
        }
        out
    }
}

/// Visits statements in pre-order.
pub fn walk<'a>(body: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in body {
        f(s);
        for child in s.children() {
            walk(child, f);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

/// A parsed minilang function plus derived indexes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    /// Token stream of the pretty-printed body.
    pub tokens: Vec<String>,
    /// Declared variables in declaration order (parameters first).
    pub variables: Vec<String>,
    pub branch_sites: Vec<BranchSiteId>,
    stmt_tokens: Vec<Vec<String>>,
    stmt_kinds: Vec<StatementKind>,
    var_index: HashMap<String, usize>,
}

impl Program {
    /// Assembles a program, renumbering statements in pre-order and deriving
    /// the variable list, branch sites and token streams.
    pub fn new(name: impl Into<String>, params: Vec<Param>, mut body: Vec<Stmt>) -> Result<Program, ParseError> {
        let mut next = 0u32;
        renumber(&mut body, &mut next);

        let mut variables: Vec<String> = Vec::new();
        let declare = |v: &str, vars: &mut Vec<String>| {
            if !vars.iter().any(|x| x == v) {
                vars.push(v.to_string());
            }
        };
        for p in &params {
            if variables.contains(&p.name) {
                return Err(ParseError::Unsupported {
                    line: 0,
                    col: 0,
                    message: format!("duplicate parameter `{}`", p.name),
                });
            }
            declare(&p.name, &mut variables);
        }
        let mut stmt_tokens = Vec::new();
        let mut stmt_kinds = Vec::new();
        let mut branch_sites = Vec::new();
        let mut reads: Vec<String> = Vec::new();
        walk(&body, &mut |s| {
            if let StmtKind::Assign { target, .. } = &s.kind {
                declare(target, &mut variables);
            }
            if let StmtKind::For { var, .. } = &s.kind {
                declare(var, &mut variables);
            }
            if s.is_guard() {
                branch_sites.push(BranchSiteId(s.id.0));
            }
            reads.extend(s.own_reads());
            stmt_tokens.push(s.tokens());
            stmt_kinds.push(s.tag());
        });
        if let Some(missing) = reads.iter().find(|r| !variables.contains(r)) {
            return Err(ParseError::UndefinedVariable(missing.clone()));
        }
        let var_index = variables.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        let tokens = super::lexer::token_texts(&printer::print_body(&body))?;
        Ok(Program {
            name: name.into(),
            params,
            body,
            tokens,
            variables,
            branch_sites,
            stmt_tokens,
            stmt_kinds,
            var_index,
        })
    }

    pub fn statement_count(&self) -> usize {
        self.stmt_tokens.len()
    }

    pub fn statement_tokens(&self, id: StatementId) -> &[String] {
        &self.stmt_tokens[id.0 as usize]
    }

    pub fn statement_kind(&self, id: StatementId) -> StatementKind {
        self.stmt_kinds[id.0 as usize]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    /// Full source text of the program.
    pub fn to_source(&self) -> String {
        printer::print_program(self)
    }

    /// Finds a statement by id.
    pub fn find(&self, id: StatementId) -> Option<&Stmt> {
        let mut found = None;
        walk(&self.body, &mut |s| {
            if s.id == id {
                found = Some(s);
            }
        });
        found
    }
}

fn renumber(body: &mut [Stmt], next: &mut u32) {
    for s in body {
        s.id = StatementId(*next);
        *next += 1;
        for child in s.children_mut() {
            renumber(child, next);
        }
    }
}
