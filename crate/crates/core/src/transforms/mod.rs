//! Semantics-preserving rewrites of minilang programs and the prediction
//! stability protocol built on them.

mod analysis;
mod dce;
mod loops;
mod propagate;

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use analysis::{definitely_assigned, is_safe, Liveness};
pub use propagate::fold;

use crate::minilang::{execute, observe, ExecError, ExecLimits, Program, Stmt, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    ConstVarPropagation,
    DeadCodeElim,
    LoopUnroll { factor: usize },
    Hoisting,
    Identity,
}

impl TransformKind {
    /// The four rewrites measured for stability, unrolling by 2.
    pub const MEASURED: [TransformKind; 4] =
        [TransformKind::ConstVarPropagation, TransformKind::DeadCodeElim, TransformKind::LoopUnroll { factor: 2 }, TransformKind::Hoisting];

    pub fn name(&self) -> String {
        match self {
            TransformKind::ConstVarPropagation => "const_var_propagation".into(),
            TransformKind::DeadCodeElim => "dead_code_elim".into(),
            TransformKind::LoopUnroll { factor } => format!("loop_unroll({factor})"),
            TransformKind::Hoisting => "hoisting".into(),
            TransformKind::Identity => "identity".into(),
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn rebuild(p: &Program, body: Vec<Stmt>) -> Option<Program> {
    Program::new(p.name.clone(), p.params.clone(), body).ok()
}

/// Applies one rewrite. Returns the input unchanged with `false` when
/// nothing fires. The identity transform always reports `true`.
pub fn apply_transform(p: &Program, kind: TransformKind) -> (Program, bool) {
    let out = match kind {
        TransformKind::Identity => return (p.clone(), true),
        TransformKind::ConstVarPropagation => rebuild(p, propagate::propagate(p)),
        TransformKind::DeadCodeElim => {
            let mut cur = p.clone();
            for _ in 0..32 {
                match rebuild(&cur, dce::eliminate_once(&cur)) {
                    Some(next) if next.tokens != cur.tokens => cur = next,
                    _ => break,
                }
            }
            Some(cur)
        }
        TransformKind::LoopUnroll { factor } => rebuild(p, loops::unroll(p, factor)),
        TransformKind::Hoisting => rebuild(p, loops::hoist(p)),
    };
    match out {
        Some(q) if q.tokens != p.tokens => (q, true),
        _ => (p.clone(), false),
    }
}

/// True iff both programs take the same parameters and, on every input,
/// either both finish with the same return value and final array
/// parameters, or both stop with a runtime error. Hitting the step limit
/// counts as a difference.
pub fn check_equivalence(p1: &Program, p2: &Program, inputs: &[Vec<Value>], limits: ExecLimits) -> bool {
    if p1.params != p2.params {
        return false;
    }
    inputs.iter().all(|input| match (execute(p1, input, limits), execute(p2, input, limits)) {
        (Ok(a), Ok(b)) => observe(p1, &a) == observe(p2, &b),
        (Err(ExecError::Runtime { .. }), Err(ExecError::Runtime { .. })) => true,
        _ => false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub kind: TransformKind,
    pub applicable: usize,
    pub changed: usize,
    pub fraction: f64,
}

/// Re-predicts every program the transform applies to and counts changed
/// predictions. `predict` gets the program's index and a program (original
/// or rewrite) and returns `None` when it cannot be traced; such programs
/// are excluded like inapplicable ones.
pub fn measure_stability<F>(programs: &[Program], kind: TransformKind, predict: F) -> StabilityReport
where
    F: Fn(usize, &Program) -> Option<usize> + Sync,
{
    let outcomes: Vec<Option<bool>> = programs
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let (q, applied) = apply_transform(p, kind);
            if !applied {
                return None;
            }
            Some(predict(i, p)? != predict(i, &q)?)
        })
        .collect();
    let applicable = outcomes.iter().flatten().count();
    let changed = outcomes.iter().flatten().filter(|&&c| c).count();
    let fraction = if applicable == 0 { 0.0 } else { changed as f64 / applicable as f64 };
    StabilityReport { kind, applicable, changed, fraction }
}

/// One row per (model, transform): percentage of applicable programs whose
/// prediction changed.
pub fn write_stability_csv<W: Write>(mut w: W, rows: &[(String, StabilityReport)]) -> io::Result<()> {
    writeln!(w, "model,transform,applicable,changed,percent_changed")?;
    for (model, r) in rows {
        writeln!(w, "{model},{},{},{},{:.2}", r.kind, r.applicable, r.changed, 100.0 * r.fraction)?;
    }
    Ok(())
}
