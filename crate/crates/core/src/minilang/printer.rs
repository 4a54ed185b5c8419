//! Canonical rendering of syntax trees as tokens and source text.

use super::ast::{Expr, Program, Stmt, StmtKind, Type, UnOp};

const UNARY_PREC: u8 = 6;

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(..) => UNARY_PREC,
        Expr::Int(v) if *v < 0 => UNARY_PREC,
        _ => 7,
    }
}

fn push_wrapped(out: &mut Vec<String>, e: &Expr, wrap: bool) {
    if wrap {
        out.push("(".into());
        expr_tokens_into(e, out);
        out.push(")".into());
    } else {
        expr_tokens_into(e, out);
    }
}

fn expr_tokens_into(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::Int(v) if *v < 0 => {
            out.push("-".into());
            out.push(v.unsigned_abs().to_string());
        }
        Expr::Int(v) => out.push(v.to_string()),
        Expr::Bool(b) => out.push(b.to_string()),
        Expr::Var(v) => out.push(v.clone()),
        Expr::Index(a, i) => {
            out.push(a.clone());
            out.push("[".into());
            expr_tokens_into(i, out);
            out.push("]".into());
        }
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnOp::Neg => "-".into(),
                UnOp::Not => "!".into(),
            });
            // `- 3` would re-parse as a folded literal, so keep the operand grouped.
            let wrap = expr_prec(inner) < UNARY_PREC
                || (*op == UnOp::Neg && matches!(**inner, Expr::Int(v) if v >= 0));
            push_wrapped(out, inner, wrap);
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            push_wrapped(out, l, expr_prec(l) < p);
            out.push(op.symbol().into());
            push_wrapped(out, r, expr_prec(r) <= p);
        }
        Expr::Call(name, args) => {
            out.push(name.clone());
            out.push("(".into());
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(",".into());
                }
                expr_tokens_into(a, out);
            }
            out.push(")".into());
        }
    }
}

pub fn expr_tokens(e: &Expr) -> Vec<String> {
    let mut out = Vec::new();
    expr_tokens_into(e, &mut out);
    out
}

pub fn statement_tokens(s: &Stmt) -> Vec<String> {
    let mut out = Vec::new();
    match &s.kind {
        StmtKind::Assign { target, decl, op, value } => {
            out.push(target.clone());
            if let Some(ty) = decl {
                out.push(":".into());
                out.extend(ty.tokens());
            }
            out.push(op.symbol().into());
            expr_tokens_into(value, &mut out);
        }
        StmtKind::Store { array, index, op, value } => {
            out.push(array.clone());
            out.push("[".into());
            expr_tokens_into(index, &mut out);
            out.push("]".into());
            out.push(op.symbol().into());
            expr_tokens_into(value, &mut out);
        }
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => expr_tokens_into(cond, &mut out),
        StmtKind::For { var, start, end, step, .. } => {
            out.push(var.clone());
            out.push("in".into());
            expr_tokens_into(start, &mut out);
            out.push("..".into());
            expr_tokens_into(end, &mut out);
            if *step != 1 {
                out.push("step".into());
                expr_tokens_into(&Expr::Int(*step), &mut out);
            }
        }
        StmtKind::Return(e) => {
            out.push("return".into());
            if let Some(e) = e {
                expr_tokens_into(e, &mut out);
            }
        }
        StmtKind::Call { name, args } => expr_tokens_into(&Expr::Call(name.clone(), args.clone()), &mut out),
    }
    out
}

fn join(tokens: &[String]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        let prev = if i > 0 { tokens[i - 1].as_str() } else { "" };
        let tight = i == 0
            || matches!(t.as_str(), "[" | "]" | ")" | "," | ":")
            || matches!(prev, "(" | "[")
            || (t == "(" && prev.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_'))
            || t == ".."
            || prev == "..";
        if !tight {
            s.push(' ');
        }
        s.push_str(t);
    }
    s
}

fn print_block(body: &[Stmt], depth: usize, out: &mut String) {
    for s in body {
        print_stmt(s, depth, out);
    }
}

fn print_stmt(s: &Stmt, depth: usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    match &s.kind {
        StmtKind::If { cond, then_body, else_body } => {
            out.push_str(&format!("{pad}if {} {{\n", join(&expr_tokens(cond))));
            print_block(then_body, depth + 1, out);
            print_else(else_body, depth, out);
        }
        StmtKind::While { cond, body } => {
            out.push_str(&format!("{pad}while {} {{\n", join(&expr_tokens(cond))));
            print_block(body, depth + 1, out);
            out.push_str(&format!("{pad}}}\n"));
        }
        StmtKind::For { body, .. } => {
            out.push_str(&format!("{pad}for {} {{\n", join(&statement_tokens(s))));
            print_block(body, depth + 1, out);
            out.push_str(&format!("{pad}}}\n"));
        }
        _ => out.push_str(&format!("{pad}{};\n", join(&statement_tokens(s)))),
    }
}

fn print_else(else_body: &[Stmt], depth: usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    if else_body.is_empty() {
        out.push_str(&format!("{pad}}}\n"));
        return;
    }
    if let [single] = else_body {
        if let StmtKind::If { cond, then_body, else_body } = &single.kind {
            out.push_str(&format!("{pad}}} else if {} {{\n", join(&expr_tokens(cond))));
            print_block(then_body, depth + 1, out);
            print_else(else_body, depth, out);
            return;
        }
    }
    out.push_str(&format!("{pad}}} else {{\n"));
    print_block(else_body, depth + 1, out);
    out.push_str(&format!("{pad}}}\n"));
}

pub fn print_body(body: &[Stmt]) -> String {
    let mut out = String::new();
    print_block(body, 1, &mut out);
    out
}

fn type_text(ty: Type) -> &'static str {
    match ty {
        Type::Int => "int",
        Type::Bool => "bool",
        Type::IntArray => "int[]",
    }
}

pub fn print_program(p: &Program) -> String {
    let params: Vec<String> = p.params.iter().map(|q| format!("{}: {}", q.name, type_text(q.ty))).collect();
    format!("fn {}({}) {{\n{}}}\n", p.name, params.join(", "), print_body(&p.body))
}
