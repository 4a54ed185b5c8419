//! Blended-trace store: one JSON line per program.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{BlendedTrace, Coverage, OrderedPair, PathGroup, PathKey};
use crate::minilang::{Arm, BranchSiteId, ProgramState, StatementId};

/// One path of a program: its statements, the state trace of each retained
/// concrete run, and the branch arms those runs covered.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathTraces {
    pub path_key: PathKey,
    pub stmt_ids: Vec<StatementId>,
    pub concretes: Vec<Vec<ProgramState>>,
    #[serde(default)]
    pub branches: Vec<(BranchSiteId, Arm)>,
}

impl PathTraces {
    pub fn from_group(g: &PathGroup, n_eps: usize) -> PathTraces {
        PathTraces {
            path_key: g.key(),
            stmt_ids: g.symbolic.statements.clone(),
            concretes: g
                .traces
                .iter()
                .take(n_eps)
                .map(|t| t.steps.iter().map(|s| s.state.clone()).collect())
                .collect(),
            branches: g.coverage().into_iter().collect(),
        }
    }

    pub fn coverage(&self) -> Coverage {
        self.branches.iter().copied().collect()
    }

    pub fn blended(&self) -> BlendedTrace {
        let pairs = self
            .stmt_ids
            .iter()
            .enumerate()
            .map(|(j, &statement)| OrderedPair { statement, states: self.concretes.iter().map(|c| c[j].clone()).collect() })
            .collect();
        BlendedTrace { path_key: self.path_key, pairs, concrete_count: self.concretes.len() }
    }

    pub fn from_blended(bt: &BlendedTrace, branches: Vec<(BranchSiteId, Arm)>) -> PathTraces {
        PathTraces {
            path_key: bt.path_key,
            stmt_ids: bt.pairs.iter().map(|p| p.statement).collect(),
            concretes: (0..bt.concrete_count).map(|j| bt.column(j).states).collect(),
            branches,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramTraces {
    pub program_id: String,
    pub paths: Vec<PathTraces>,
    /// Number of executions whose states feed the blended traces.
    #[serde(default)]
    pub executions: usize,
}

impl ProgramTraces {
    pub fn blended(&self) -> Vec<BlendedTrace> {
        self.paths.iter().map(PathTraces::blended).collect()
    }

    pub fn coverage(&self) -> Coverage {
        self.paths.iter().flat_map(|p| p.branches.iter().copied()).collect()
    }
}

pub fn write_store<W: Write>(mut w: W, programs: &[ProgramTraces]) -> io::Result<()> {
    for p in programs {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_store<R: BufRead>(r: R) -> io::Result<Vec<ProgramTraces>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(io::Error::other)?);
    }
    Ok(out)
}
