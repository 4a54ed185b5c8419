//! Constant and copy propagation with folding.

use std::collections::BTreeMap;

use super::analysis::{array_vars, subst, written_in, VarSet};
use crate::minilang::ast::{AssignOp, Expr, StmtKind, UnOp};
use crate::minilang::interp::binary;
use crate::minilang::{Program, Stmt, Value};

/// Facts valid at a program point: a variable equals a literal or another
/// scalar variable.
type Env = BTreeMap<String, Expr>;

pub fn propagate(p: &Program) -> Vec<Stmt> {
    let arrays = array_vars(p);
    let mut env = Env::new();
    block(&p.body, &mut env, &arrays)
}

fn lookup(env: &Env) -> impl Fn(&str) -> Option<Expr> + '_ {
    |v| env.get(v).cloned()
}

fn rewrite(e: &Expr, env: &Env) -> Expr {
    fold(&subst(e, &lookup(env)))
}

/// Folds operators whose operands are literals; anything that would fail at
/// runtime is left in place.
pub fn fold(e: &Expr) -> Expr {
    match e {
        Expr::Unary(op, x) => {
            let x = fold(x);
            match (op, &x) {
                (UnOp::Neg, Expr::Int(v)) if v.checked_neg().is_some() => Expr::Int(-v),
                (UnOp::Not, Expr::Bool(b)) => Expr::Bool(!b),
                _ => Expr::Unary(*op, Box::new(x)),
            }
        }
        Expr::Binary(op, l, r) => {
            let (l, r) = (fold(l), fold(r));
            let lit = |x: &Expr| match x {
                Expr::Int(v) => Some(Value::Int(*v)),
                Expr::Bool(b) => Some(Value::Bool(*b)),
                _ => None,
            };
            if let (Some(a), Some(b)) = (lit(&l), lit(&r)) {
                match binary(*op, a, b) {
                    Ok(Value::Int(v)) => return Expr::Int(v),
                    Ok(Value::Bool(v)) => return Expr::Bool(v),
                    _ => {}
                }
            }
            Expr::Binary(*op, Box::new(l), Box::new(r))
        }
        Expr::Index(a, i) => Expr::Index(a.clone(), Box::new(fold(i))),
        Expr::Call(n, args) => Expr::Call(n.clone(), args.iter().map(fold).collect()),
        _ => e.clone(),
    }
}

fn kill(env: &mut Env, v: &str) {
    env.remove(v);
    env.retain(|_, e| !matches!(e, Expr::Var(x) if x == v));
}

fn kill_all(env: &mut Env, vars: &VarSet) {
    for v in vars {
        kill(env, v);
    }
}

fn meet(a: &Env, b: &Env) -> Env {
    a.iter().filter(|(k, v)| b.get(*k) == Some(v)).map(|(k, v)| (k.clone(), v.clone())).collect()
}

fn block(body: &[Stmt], env: &mut Env, arrays: &VarSet) -> Vec<Stmt> {
    let mut out = Vec::with_capacity(body.len());
    for s in body {
        let kind = match &s.kind {
            StmtKind::Assign { target, decl, op, value } => {
                let value = rewrite(value, env);
                kill(env, target);
                if *op == AssignOp::Set {
                    match &value {
                        Expr::Int(_) | Expr::Bool(_) => {
                            env.insert(target.clone(), value.clone());
                        }
                        Expr::Var(src) if src != target && !arrays.contains(src) && !arrays.contains(target) => {
                            env.insert(target.clone(), value.clone());
                        }
                        _ => {}
                    }
                }
                StmtKind::Assign { target: target.clone(), decl: *decl, op: *op, value }
            }
            StmtKind::Store { array, index, op, value } => {
                let k = StmtKind::Store { array: array.clone(), index: rewrite(index, env), op: *op, value: rewrite(value, env) };
                kill(env, array);
                k
            }
            StmtKind::Call { name, args } => {
                let args: Vec<Expr> = args.iter().enumerate().map(|(i, a)| if i == 0 { a.clone() } else { rewrite(a, env) }).collect();
                if let Some(Expr::Var(a)) = args.first() {
                    kill(env, a);
                }
                StmtKind::Call { name: name.clone(), args }
            }
            StmtKind::Return(e) => StmtKind::Return(e.as_ref().map(|e| rewrite(e, env))),
            StmtKind::If { cond, then_body, else_body } => {
                let cond = rewrite(cond, env);
                let mut te = env.clone();
                let mut ee = env.clone();
                let then_body = block(then_body, &mut te, arrays);
                let else_body = block(else_body, &mut ee, arrays);
                *env = meet(&te, &ee);
                StmtKind::If { cond, then_body, else_body }
            }
            StmtKind::While { cond, body } => {
                kill_all(env, &written_in(body));
                let cond = rewrite(cond, env);
                let mut inner = env.clone();
                let body = block(body, &mut inner, arrays);
                StmtKind::While { cond, body }
            }
            StmtKind::For { var, start, end, step, body } => {
                let start = rewrite(start, env);
                let end = rewrite(end, env);
                let mut w = written_in(body);
                w.insert(var.clone());
                kill_all(env, &w);
                let mut inner = env.clone();
                let body = block(body, &mut inner, arrays);
                StmtKind::For { var: var.clone(), start, end, step: *step, body }
            }
        };
        out.push(Stmt { id: s.id, kind });
    }
    out
}
