//! Corpus tracing: random runs grouped by path until the path budget is
//! met.

use log::info;
use rayon::prelude::*;

use super::Corpus;
use crate::minilang::{execute, ExecLimits, ExecutionTrace, InputDist, Program, StatementId};
use crate::rng::{seeded, substream};
use crate::trace_model::{PathTraces, ProgramTraces};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceBudget {
    pub max_paths: usize,
    pub n_eps: usize,
    pub attempt_cap: usize,
    pub input: InputDist,
    pub limits: ExecLimits,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceOutcome {
    /// Retained programs in manifest order.
    pub store: Vec<ProgramTraces>,
    /// Dropped program ids with the reason.
    pub dropped: Vec<(String, String)>,
}

/// Runs `p` on random inputs until `max_paths` paths each have `n_eps`
/// runs or `attempt_cap` runs were tried. Keeps the complete paths in
/// discovery order. Any failing run rejects the whole program.
pub fn trace_program(p: &Program, id: &str, budget: &TraceBudget, seed: u64) -> Result<ProgramTraces, String> {
    let mut rng = seeded(seed);
    let mut paths: Vec<(Vec<StatementId>, Vec<ExecutionTrace>)> = Vec::new();
    let mut complete = 0;
    for _ in 0..budget.attempt_cap {
        let input: Vec<_> = p.params.iter().map(|q| budget.input.sample(q.ty, &mut rng)).collect();
        let t = execute(p, &input, budget.limits).map_err(|e| format!("{e} on input {input:?}"))?;
        let ids = t.statement_ids();
        if ids.is_empty() {
            continue;
        }
        let slot = match paths.iter().position(|(k, _)| *k == ids) {
            Some(i) => i,
            None => {
                paths.push((ids, Vec::new()));
                paths.len() - 1
            }
        };
        let runs = &mut paths[slot].1;
        if runs.len() < budget.n_eps {
            runs.push(t);
            if runs.len() == budget.n_eps {
                complete += 1;
                if complete == budget.max_paths {
                    break;
                }
            }
        }
    }
    let kept: Vec<PathTraces> = paths
        .into_iter()
        .filter(|(_, runs)| runs.len() == budget.n_eps)
        .take(budget.max_paths)
        .map(|(_, runs)| {
            let group = crate::trace_model::group_by_path(runs).pop().expect("one path");
            PathTraces::from_group(&group, budget.n_eps)
        })
        .collect();
    if kept.is_empty() {
        return Err(format!("no path reached {} runs in {} attempts", budget.n_eps, budget.attempt_cap));
    }
    let executions = kept.len() * budget.n_eps;
    Ok(ProgramTraces { program_id: id.to_string(), paths: kept, executions })
}

pub fn program_seed(root: u64, id: &str) -> u64 {
    substream(root, &format!("inputs/{id}"))
}

/// Traces every corpus program in parallel with per-program seeds.
/// Programs that cannot be traced are dropped and reported.
pub fn trace_corpus(corpus: &Corpus, budget: &TraceBudget, seed: u64) -> Result<TraceOutcome, super::DatasetError> {
    let programs = corpus.programs()?;
    let results: Vec<Result<ProgramTraces, String>> = programs
        .par_iter()
        .zip(&corpus.manifest.entries)
        .map(|(p, e)| trace_program(p, &e.program_id, budget, program_seed(seed, &e.program_id)))
        .collect();
    let mut out = TraceOutcome { store: Vec::new(), dropped: Vec::new() };
    for (r, e) in results.into_iter().zip(&corpus.manifest.entries) {
        match r {
            Ok(t) => out.store.push(t),
            Err(why) => {
                info!("dropping {}: {why}", e.program_id);
                out.dropped.push((e.program_id.clone(), why));
            }
        }
    }
    Ok(out)
}
