//! Dataflow helpers over the structured AST: liveness, definite
//! assignment, loop write sets and expression safety.

use std::collections::{BTreeSet, HashMap};

use crate::minilang::ast::{walk, AssignOp, BinOp, Expr, StmtKind};
use crate::minilang::{Program, StatementId, Stmt, Type};

pub type VarSet = BTreeSet<String>;

pub fn expr_reads(e: &Expr) -> VarSet {
    let mut out = VarSet::new();
    e.for_each_var(&mut |v| {
        out.insert(v.to_string());
    });
    out
}

/// Whether `e` may evaluate differently after `body` runs. Element writes
/// leave array lengths alone, so `len(a)` only depends on rebinding `a`.
pub fn depends_on_writes(e: &Expr, body: &[Stmt]) -> bool {
    let written = written_in(body);
    let mut rebound = VarSet::new();
    walk(body, &mut |s| {
        if let StmtKind::Assign { target: v, .. } | StmtKind::For { var: v, .. } = &s.kind {
            rebound.insert(v.clone());
        }
    });
    fn go(e: &Expr, written: &VarSet, rebound: &VarSet) -> bool {
        match e {
            Expr::Int(_) | Expr::Bool(_) => false,
            Expr::Var(v) => written.contains(v),
            Expr::Index(a, i) => written.contains(a) || go(i, written, rebound),
            Expr::Unary(_, x) => go(x, written, rebound),
            Expr::Binary(_, l, r) => go(l, written, rebound) || go(r, written, rebound),
            Expr::Call(name, args) if name == "len" && args.len() == 1 => match &args[0] {
                Expr::Var(a) => rebound.contains(a),
                x => go(x, written, rebound),
            },
            Expr::Call(_, args) => args.iter().any(|a| go(a, written, rebound)),
        }
    }
    go(e, &written, &rebound)
}

/// Variables live immediately after each statement. The function exit
/// keeps array parameters live since callers observe them. A dead-target
/// assignment that could be deleted does not make its operands live, so
/// values that only feed themselves around a loop count as dead.
pub struct Liveness {
    pub after: HashMap<StatementId, VarSet>,
    exit: VarSet,
    assigned: HashMap<StatementId, VarSet>,
}

impl Liveness {
    pub fn of(p: &Program) -> Liveness {
        let exit: VarSet = p.params.iter().filter(|q| q.ty == Type::IntArray).map(|q| q.name.clone()).collect();
        let mut l = Liveness { after: HashMap::new(), exit: exit.clone(), assigned: definitely_assigned(p) };
        l.block(&p.body, exit);
        l
    }

    pub fn live_after(&self, id: StatementId) -> &VarSet {
        &self.after[&id]
    }

    fn block(&mut self, body: &[Stmt], out: VarSet) -> VarSet {
        let mut live = out;
        for s in body.iter().rev() {
            self.after.insert(s.id, live.clone());
            live = self.stmt(s, live);
        }
        live
    }

    fn stmt(&mut self, s: &Stmt, out: VarSet) -> VarSet {
        match &s.kind {
            StmtKind::Assign { target, op, value, .. } => {
                let deletable = *op == AssignOp::Set
                    && !out.contains(target)
                    && is_safe(value)
                    && expr_reads(value).iter().all(|v| self.assigned[&s.id].contains(v));
                if deletable {
                    return out;
                }
                let mut l = out;
                if *op == AssignOp::Set {
                    l.remove(target);
                } else {
                    l.insert(target.clone());
                }
                l.extend(expr_reads(value));
                l
            }
            StmtKind::Store { array, index, value, .. } => {
                let mut l = out;
                l.insert(array.clone());
                l.extend(expr_reads(index));
                l.extend(expr_reads(value));
                l
            }
            StmtKind::Call { args, .. } => {
                let mut l = out;
                for a in args {
                    l.extend(expr_reads(a));
                }
                l
            }
            StmtKind::Return(e) => {
                let mut l = self.exit.clone();
                if let Some(e) = e {
                    l.extend(expr_reads(e));
                }
                l
            }
            StmtKind::If { cond, then_body, else_body } => {
                let mut l = self.block(then_body, out.clone());
                l.extend(self.block(else_body, out));
                l.extend(expr_reads(cond));
                l
            }
            StmtKind::While { cond, body } => {
                let mut head: VarSet = out.iter().cloned().chain(expr_reads(cond)).collect();
                loop {
                    let mut next = self.block(body, head.clone());
                    next.extend(out.iter().cloned());
                    next.extend(expr_reads(cond));
                    if next == head {
                        break;
                    }
                    head = next;
                }
                head
            }
            StmtKind::For { var, start, end, body, .. } => {
                // The loop variable is redefined at every head evaluation.
                let mut head: VarSet = out.clone();
                head.remove(var);
                loop {
                    let mut next = self.block(body, head.clone());
                    next.extend(out.iter().cloned());
                    next.remove(var);
                    if next == head {
                        break;
                    }
                    head = next;
                }
                let mut l = head;
                l.extend(expr_reads(start));
                l.extend(expr_reads(end));
                l
            }
        }
    }
}

/// Variables certainly assigned before each statement executes.
pub fn definitely_assigned(p: &Program) -> HashMap<StatementId, VarSet> {
    let mut map = HashMap::new();
    let params: VarSet = p.params.iter().map(|q| q.name.clone()).collect();
    da_block(&p.body, params, &mut map);
    map
}

fn da_block(body: &[Stmt], mut set: VarSet, map: &mut HashMap<StatementId, VarSet>) -> VarSet {
    for s in body {
        map.insert(s.id, set.clone());
        set = match &s.kind {
            StmtKind::Assign { target, .. } => {
                let mut n = set;
                n.insert(target.clone());
                n
            }
            StmtKind::If { then_body, else_body, .. } => {
                let t = da_block(then_body, set.clone(), map);
                let e = da_block(else_body, set.clone(), map);
                t.intersection(&e).cloned().collect()
            }
            StmtKind::While { body, .. } => {
                da_block(body, set.clone(), map);
                set
            }
            StmtKind::For { var, body, .. } => {
                let mut n = set;
                n.insert(var.clone());
                da_block(body, n.clone(), map);
                n
            }
            _ => set,
        };
    }
    set
}

/// Every variable written anywhere inside `body`, loop variables included.
pub fn written_in(body: &[Stmt]) -> VarSet {
    let mut out = VarSet::new();
    walk(body, &mut |s| {
        if let Some(v) = s.written_var() {
            out.insert(v.to_string());
        }
    });
    out
}

/// Whether evaluating `e` can never fail when every variable it reads is
/// assigned. Index, division, remainder and calls other than `len` may
/// fail; integer overflow is not considered.
pub fn is_safe(e: &Expr) -> bool {
    match e {
        Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => true,
        Expr::Index(..) => false,
        Expr::Unary(_, x) => is_safe(x),
        Expr::Binary(BinOp::Div | BinOp::Rem, ..) => false,
        Expr::Binary(_, l, r) => is_safe(l) && is_safe(r),
        Expr::Call(name, args) => name == "len" && args.iter().all(is_safe),
    }
}

/// Variables that can hold arrays: array parameters and anything assigned
/// from `zeros(..)` or from another array variable.
pub fn array_vars(p: &Program) -> VarSet {
    let mut arrays: VarSet = p.params.iter().filter(|q| q.ty == Type::IntArray).map(|q| q.name.clone()).collect();
    loop {
        let mut grew = false;
        walk(&p.body, &mut |s| {
            if let StmtKind::Assign { target, value, .. } = &s.kind {
                let is_array = match value {
                    Expr::Call(n, _) => n == "zeros",
                    Expr::Var(v) => arrays.contains(v),
                    _ => false,
                };
                if is_array && !arrays.contains(target) {
                    grew = true;
                }
            }
        });
        if !grew {
            return arrays;
        }
        walk(&p.body, &mut |s| {
            if let StmtKind::Assign { target, value, .. } = &s.kind {
                let is_array = match value {
                    Expr::Call(n, _) => n == "zeros",
                    Expr::Var(v) => arrays.contains(v),
                    _ => false,
                };
                if is_array {
                    arrays.insert(target.clone());
                }
            }
        });
    }
}

/// Replaces variable reads (not array names of index expressions) using `f`.
pub fn subst(e: &Expr, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
    match e {
        Expr::Var(v) => f(v).unwrap_or_else(|| e.clone()),
        Expr::Int(_) | Expr::Bool(_) => e.clone(),
        Expr::Index(a, i) => Expr::Index(a.clone(), Box::new(subst(i, f))),
        Expr::Unary(op, x) => Expr::Unary(*op, Box::new(subst(x, f))),
        Expr::Binary(op, l, r) => Expr::Binary(*op, Box::new(subst(l, f)), Box::new(subst(r, f))),
        Expr::Call(n, args) => Expr::Call(n.clone(), args.iter().map(|a| subst(a, f)).collect()),
    }
}

/// Applies [`subst`] to every expression a statement list reads, including
/// nested bodies. Targets are left alone.
pub fn subst_body(body: &[Stmt], f: &dyn Fn(&str) -> Option<Expr>) -> Vec<Stmt> {
    body.iter()
        .map(|s| {
            let kind = match &s.kind {
                StmtKind::Assign { target, decl, op, value } => StmtKind::Assign { target: target.clone(), decl: *decl, op: *op, value: subst(value, f) },
                StmtKind::Store { array, index, op, value } => StmtKind::Store { array: array.clone(), index: subst(index, f), op: *op, value: subst(value, f) },
                StmtKind::If { cond, then_body, else_body } => StmtKind::If { cond: subst(cond, f), then_body: subst_body(then_body, f), else_body: subst_body(else_body, f) },
                StmtKind::While { cond, body } => StmtKind::While { cond: subst(cond, f), body: subst_body(body, f) },
                StmtKind::For { var, start, end, step, body } => {
                    StmtKind::For { var: var.clone(), start: subst(start, f), end: subst(end, f), step: *step, body: subst_body(body, f) }
                }
                StmtKind::Return(e) => StmtKind::Return(e.as_ref().map(|e| subst(e, f))),
                StmtKind::Call { name, args } => {
                    // The array operand of swap is written, not read by value.
                    let args = args.iter().enumerate().map(|(i, a)| if i == 0 && name == "swap" { a.clone() } else { subst(a, f) }).collect();
                    StmtKind::Call { name: name.clone(), args }
                }
            };
            Stmt { id: s.id, kind }
        })
        .collect()
}
