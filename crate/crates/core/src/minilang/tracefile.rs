//! Line-delimited JSON trace files: one record per execution.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::ast::{Arm, BranchSiteId};
use super::interp::{ExecutionTrace, TraceStep};
use super::value::{ProgramState, Value};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub program_id: String,
    pub input: Vec<Value>,
    pub steps: Vec<TraceStep>,
    pub branches: Vec<(BranchSiteId, Arm)>,
    #[serde(rename = "return", default)]
    pub return_value: Option<Value>,
}

impl TraceRecord {
    pub fn from_trace(program_id: &str, t: &ExecutionTrace) -> TraceRecord {
        TraceRecord {
            program_id: program_id.to_string(),
            input: t.input.clone(),
            steps: t.steps.clone(),
            branches: t.covered_branches.iter().copied().collect(),
            return_value: t.return_value.clone(),
        }
    }

    /// Rebuilds the trace; the initial state is the input followed by ⊥ for
    /// every non-parameter variable.
    pub fn into_trace(self, num_vars: usize) -> ExecutionTrace {
        let mut init = self.input.clone();
        init.resize(num_vars, Value::Bottom);
        ExecutionTrace {
            input: self.input,
            initial_state: ProgramState(init),
            steps: self.steps,
            covered_branches: self.branches.into_iter().collect(),
            return_value: self.return_value,
        }
    }
}

pub fn write_records<W: Write>(mut w: W, records: &[TraceRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> io::Result<Vec<TraceRecord>> {
    r.lines()
        .filter(|l| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
        .map(|l| serde_json::from_str(&l?).map_err(io::Error::other))
        .collect()
}
