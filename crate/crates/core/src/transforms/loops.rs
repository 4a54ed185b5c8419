//! Loop unrolling and loop-invariant code motion.

use std::collections::HashMap;

use super::analysis::{definitely_assigned, depends_on_writes, expr_reads, is_safe, subst_body, written_in, Liveness, VarSet};
use crate::minilang::ast::{walk, AssignOp, BinOp, Expr, StmtKind};
use crate::minilang::{Program, StatementId, Stmt};

/// Unrolls every loop by `factor`. A `while` loop repeats its body under
/// re-checks of the condition. A `for` loop strides by `factor` steps and
/// guards each extra copy with the bound test, the copy reading `v + j·step`
/// for the loop variable; it is skipped when the loop variable is live after
/// the loop or the body writes the loop variable or a variable of the bound.
pub fn unroll(p: &Program, factor: usize) -> Vec<Stmt> {
    if factor < 2 {
        return p.body.clone();
    }
    let live = Liveness::of(p);
    unroll_block(&p.body, factor, &live)
}

fn nest(copies: Vec<(Option<Expr>, Vec<Stmt>)>) -> Vec<Stmt> {
    // copies[0] is unguarded; copy j sits under guard j inside copy j-1.
    let mut inner: Vec<Stmt> = Vec::new();
    for (guard, body) in copies.into_iter().rev() {
        let mut b = body;
        b.extend(inner);
        inner = match guard {
            Some(cond) => vec![Stmt::new(StmtKind::If { cond, then_body: b, else_body: Vec::new() })],
            None => b,
        };
    }
    inner
}

fn unroll_block(body: &[Stmt], factor: usize, live: &Liveness) -> Vec<Stmt> {
    body.iter()
        .map(|s| {
            let kind = match &s.kind {
                StmtKind::If { cond, then_body, else_body } => StmtKind::If {
                    cond: cond.clone(),
                    then_body: unroll_block(then_body, factor, live),
                    else_body: unroll_block(else_body, factor, live),
                },
                StmtKind::While { cond, body } => {
                    let b = unroll_block(body, factor, live);
                    let copies = (0..factor).map(|j| ((j > 0).then(|| cond.clone()), b.clone())).collect();
                    StmtKind::While { cond: cond.clone(), body: nest(copies) }
                }
                StmtKind::For { var, start, end, step, body } => {
                    let b = unroll_block(body, factor, live);
                    let written = written_in(body);
                    let bound_written = expr_reads(end).contains(var) || depends_on_writes(end, body);
                    let blocked = live.live_after(s.id).contains(var) || written.contains(var) || bound_written;
                    let wide = step.checked_mul(factor as i64).filter(|_| !blocked);
                    if let Some(wide) = wide {
                        let copies = (0..factor)
                            .map(|j| {
                                if j == 0 {
                                    return (None, b.clone());
                                }
                                let off = step * j as i64;
                                let shifted = if off > 0 {
                                    Expr::binary(BinOp::Add, Expr::var(var), Expr::Int(off))
                                } else {
                                    Expr::binary(BinOp::Sub, Expr::var(var), Expr::Int(-off))
                                };
                                let cmp = if *step > 0 { BinOp::Lt } else { BinOp::Gt };
                                let guard = Expr::binary(cmp, shifted.clone(), end.clone());
                                let v = var.clone();
                                let body_j = subst_body(&b, &move |x| (x == v).then(|| shifted.clone()));
                                (Some(guard), body_j)
                            })
                            .collect();
                        StmtKind::For { var: var.clone(), start: start.clone(), end: end.clone(), step: wide, body: nest(copies) }
                    } else {
                        StmtKind::For { var: var.clone(), start: start.clone(), end: end.clone(), step: *step, body: b }
                    }
                }
                other => other.clone(),
            };
            Stmt { id: s.id, kind }
        })
        .collect()
}

/// Moves loop-invariant assignments out of loops. A top-level body
/// statement `t = e` moves when `e` cannot fail, reads only variables that
/// are assigned before the loop and unchanged inside it, `t` is written once
/// in the loop, is not read earlier in the body or by the loop header, and
/// is dead after the loop.
pub fn hoist(p: &Program) -> Vec<Stmt> {
    let live = Liveness::of(p);
    let da = definitely_assigned(p);
    hoist_block(&p.body, &live, &da)
}

fn count_writes(body: &[Stmt], v: &str) -> usize {
    let mut n = 0;
    walk(body, &mut |s| {
        if s.written_var() == Some(v) {
            n += 1;
        }
    });
    n
}

fn reads_any(body: &[Stmt], v: &str) -> bool {
    let mut hit = false;
    walk(body, &mut |s| hit |= s.own_reads().iter().any(|r| r == v));
    hit
}

fn hoist_block(body: &[Stmt], live: &Liveness, da: &HashMap<StatementId, VarSet>) -> Vec<Stmt> {
    let mut out = Vec::new();
    for s in body {
        match &s.kind {
            StmtKind::If { cond, then_body, else_body } => out.push(Stmt {
                id: s.id,
                kind: StmtKind::If { cond: cond.clone(), then_body: hoist_block(then_body, live, da), else_body: hoist_block(else_body, live, da) },
            }),
            StmtKind::While { .. } | StmtKind::For { .. } => {
                let (header_reads, loop_var, inner) = match &s.kind {
                    StmtKind::While { cond, body } => (expr_reads(cond), None, body),
                    StmtKind::For { var, start, end, body, .. } => {
                        let mut r = expr_reads(start);
                        r.extend(expr_reads(end));
                        (r, Some(var.clone()), body)
                    }
                    _ => unreachable!(),
                };
                let mut inner = hoist_block(inner, live, da);
                let before = &da[&s.id];
                let after = live.live_after(s.id);
                let mut moved = Vec::new();
                loop {
                    let mut written = written_in(&inner);
                    written.extend(loop_var.clone());
                    let pick = inner.iter().position(|st| {
                        let StmtKind::Assign { target, op: AssignOp::Set, value, .. } = &st.kind else { return false };
                        let pos = inner.iter().position(|x| std::ptr::eq(x, st)).unwrap();
                        let reads = expr_reads(value);
                        is_safe(value)
                            && reads.iter().all(|v| before.contains(v) && loop_var.as_ref() != Some(v))
                            && !depends_on_writes(value, &inner)
                            && count_writes(&inner, target) == 1
                            && Some(target) != loop_var.as_ref()
                            && !header_reads.contains(target)
                            && !after.contains(target)
                            && !reads_any(&inner[..pos], target)
                    });
                    match pick {
                        Some(i) => moved.push(inner.remove(i)),
                        None => break,
                    }
                }
                out.extend(moved);
                let kind = match &s.kind {
                    StmtKind::While { cond, .. } => StmtKind::While { cond: cond.clone(), body: inner },
                    StmtKind::For { var, start, end, step, .. } => StmtKind::For { var: var.clone(), start: start.clone(), end: end.clone(), step: *step, body: inner },
                    _ => unreachable!(),
                };
                out.push(Stmt { id: s.id, kind });
            }
            _ => out.push(s.clone()),
        }
    }
    out
}
