//! Dead-code elimination driven by liveness.

use std::collections::{HashMap, HashSet};

use super::analysis::{definitely_assigned, expr_reads, is_safe, Liveness, VarSet};
use crate::minilang::ast::{AssignOp, StmtKind};
use crate::minilang::{Program, StatementId, Stmt};

/// One round of removals: dead assignments with safe right-hand sides,
/// statements after a `return`, and empty `if`s with safe conditions.
pub fn eliminate_once(p: &Program) -> Vec<Stmt> {
    let live = Liveness::of(p);
    let da = definitely_assigned(p);
    let mut dead = HashSet::new();
    crate::minilang::ast::walk(&p.body, &mut |s| {
        if removable(s, &live, &da) {
            dead.insert(s.id);
        }
    });
    prune(&p.body, &dead, &da)
}

fn reads_assigned(e: &crate::minilang::ast::Expr, assigned: &VarSet) -> bool {
    expr_reads(e).iter().all(|v| assigned.contains(v))
}

fn removable(s: &Stmt, live: &Liveness, da: &HashMap<StatementId, VarSet>) -> bool {
    let StmtKind::Assign { target, op, value, .. } = &s.kind else { return false };
    let assigned = &da[&s.id];
    !live.live_after(s.id).contains(target)
        && is_safe(value)
        && reads_assigned(value, assigned)
        && (*op == AssignOp::Set || (matches!(op, AssignOp::Add | AssignOp::Sub | AssignOp::Mul) && assigned.contains(target)))
}

fn prune(body: &[Stmt], dead: &HashSet<StatementId>, da: &HashMap<StatementId, VarSet>) -> Vec<Stmt> {
    let mut out = Vec::new();
    for s in body {
        if dead.contains(&s.id) {
            continue;
        }
        let kind = match &s.kind {
            StmtKind::If { cond, then_body, else_body } => {
                let t = prune(then_body, dead, da);
                let e = prune(else_body, dead, da);
                if t.is_empty() && e.is_empty() && is_safe(cond) && reads_assigned(cond, &da[&s.id]) {
                    continue;
                }
                StmtKind::If { cond: cond.clone(), then_body: t, else_body: e }
            }
            StmtKind::While { cond, body } => StmtKind::While { cond: cond.clone(), body: prune(body, dead, da) },
            StmtKind::For { var, start, end, step, body } => {
                StmtKind::For { var: var.clone(), start: start.clone(), end: end.clone(), step: *step, body: prune(body, dead, da) }
            }
            other => other.clone(),
        };
        let is_return = matches!(kind, StmtKind::Return(_));
        out.push(Stmt { id: s.id, kind });
        if is_return {
            break;
        }
    }
    out
}
