//! Symbolic, state and blended traces derived from concrete executions.
//!
//! A symbolic trace is the statement projection of a run and identifies a
//! program path; a state trace is the state projection. Runs sharing a path
//! are grouped, and a blended trace zips the path's statements with the
//! per-statement states of `N_ε` of those runs.

mod store;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::seq::index::sample;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::minilang::{Arm, BranchSiteId, ExecutionTrace, ProgramState, StatementId};
use crate::rng::seeded;

pub use store::{read_store, write_store, PathTraces, ProgramTraces};

pub type Coverage = BTreeSet<(BranchSiteId, Arm)>;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("execution trace has no steps")]
    EmptyTrace,
    #[error("concrete trace {index} does not follow path {expected}")]
    PathMismatch { index: usize, expected: PathKey },
    #[error("need {needed} concrete traces, have {available}")]
    InsufficientConcretes { needed: usize, available: usize },
    #[error("cannot keep {k} of {available} concrete traces")]
    BadKeepCount { k: usize, available: usize },
}

/// Canonical hash of a statement-id sequence.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathKey(pub u64);

impl PathKey {
    pub fn of(stmts: &[StatementId]) -> PathKey {
        let mut h = Sha256::new();
        for s in stmts {
            h.update(s.0.to_le_bytes());
        }
        let d = h.finalize();
        PathKey(u64::from_le_bytes(d[..8].try_into().expect("32-byte digest")))
    }
}

impl fmt::Display for PathKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl fmt::Debug for PathKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PathKey({self})")
    }
}

impl Serialize for PathKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PathKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        u64::from_str_radix(&s, 16).map(PathKey).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicTrace {
    pub path_key: PathKey,
    pub statements: Vec<StatementId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateTrace {
    pub states: Vec<ProgramState>,
}

/// One blended-trace step: a statement and the state it produced in each
/// chosen concrete run (ordered by concrete index).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedPair {
    pub statement: StatementId,
    pub states: Vec<ProgramState>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlendedTrace {
    pub path_key: PathKey,
    pub pairs: Vec<OrderedPair>,
    pub concrete_count: usize,
}

impl BlendedTrace {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn symbolic(&self) -> SymbolicTrace {
        SymbolicTrace { path_key: self.path_key, statements: self.pairs.iter().map(|p| p.statement).collect() }
    }

    /// State trace of the `j`-th concrete column.
    pub fn column(&self, j: usize) -> StateTrace {
        StateTrace { states: self.pairs.iter().map(|p| p.states[j].clone()).collect() }
    }

    /// Keeps only the first `max_len` ordered pairs.
    pub fn truncated(&self, max_len: usize) -> BlendedTrace {
        BlendedTrace {
            path_key: self.path_key,
            pairs: self.pairs.iter().take(max_len).cloned().collect(),
            concrete_count: self.concrete_count,
        }
    }
}

pub fn project_symbolic(t: &ExecutionTrace) -> Result<SymbolicTrace, TraceError> {
    if t.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    let statements = t.statement_ids();
    Ok(SymbolicTrace { path_key: PathKey::of(&statements), statements })
}

pub fn project_states(t: &ExecutionTrace) -> Result<StateTrace, TraceError> {
    if t.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    Ok(StateTrace { states: t.steps.iter().map(|s| s.state.clone()).collect() })
}

/// Runs that traverse one program path, in discovery order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathGroup {
    pub symbolic: SymbolicTrace,
    pub traces: Vec<ExecutionTrace>,
}

impl PathGroup {
    pub fn key(&self) -> PathKey {
        self.symbolic.path_key
    }

    pub fn coverage(&self) -> Coverage {
        crate::minilang::branch_coverage(&self.traces)
    }
}

/// Partitions runs by path. Groups are ordered by first discovery and keep
/// discovery order internally. Empty runs have no path and are skipped.
pub fn group_by_path(traces: impl IntoIterator<Item = ExecutionTrace>) -> Vec<PathGroup> {
    let mut groups: Vec<PathGroup> = Vec::new();
    let mut index: HashMap<Vec<StatementId>, usize> = HashMap::new();
    for t in traces {
        let Ok(sym) = project_symbolic(&t) else { continue };
        match index.get(&sym.statements) {
            Some(&g) => groups[g].traces.push(t),
            None => {
                index.insert(sym.statements.clone(), groups.len());
                groups.push(PathGroup { symbolic: sym, traces: vec![t] });
            }
        }
    }
    groups
}

/// Zips `sym` with the states of the first `n_eps` runs in `concretes`.
pub fn build_blended(sym: &SymbolicTrace, concretes: &[ExecutionTrace], n_eps: usize) -> Result<BlendedTrace, TraceError> {
    for (index, c) in concretes.iter().enumerate() {
        if c.statement_ids() != sym.statements {
            return Err(TraceError::PathMismatch { index, expected: sym.path_key });
        }
    }
    if concretes.len() < n_eps {
        return Err(TraceError::InsufficientConcretes { needed: n_eps, available: concretes.len() });
    }
    let chosen = &concretes[..n_eps];
    let pairs = sym
        .statements
        .iter()
        .enumerate()
        .map(|(j, &statement)| OrderedPair { statement, states: chosen.iter().map(|c| c.steps[j].state.clone()).collect() })
        .collect();
    Ok(BlendedTrace { path_key: sym.path_key, pairs, concrete_count: n_eps })
}

/// Greedy set cover over branch arms: repeatedly takes the path that adds
/// the most uncovered arms (ties go to the earliest path) until the union of
/// all paths' coverage is reached.
pub fn select_min_coverage_set(groups: &[(PathKey, Coverage)]) -> Vec<PathKey> {
    let universe: Coverage = groups.iter().flat_map(|(_, c)| c.iter().copied()).collect();
    let mut covered = Coverage::new();
    let mut taken = vec![false; groups.len()];
    let mut out = Vec::new();
    if groups.is_empty() {
        return out;
    }
    loop {
        let mut best: Option<(usize, usize)> = None;
        for (i, (_, cov)) in groups.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let gain = cov.difference(&covered).count();
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        match best {
            // A program without guards still needs one path to be embedded.
            Some((i, gain)) if gain > 0 || out.is_empty() => {
                taken[i] = true;
                covered.extend(groups[i].1.iter().copied());
                out.push(groups[i].0);
            }
            _ => break,
        }
        if covered == universe {
            break;
        }
    }
    out
}

/// Keeps `k` concrete columns chosen uniformly at random; column order is
/// preserved.
pub fn downsample_concretes(bt: &BlendedTrace, k: usize, seed: u64) -> Result<BlendedTrace, TraceError> {
    if k == 0 || k > bt.concrete_count {
        return Err(TraceError::BadKeepCount { k, available: bt.concrete_count });
    }
    let mut rng = seeded(seed);
    let mut keep = sample(&mut rng, bt.concrete_count, k).into_vec();
    keep.sort_unstable();
    let pairs = bt
        .pairs
        .iter()
        .map(|p| OrderedPair { statement: p.statement, states: keep.iter().map(|&j| p.states[j].clone()).collect() })
        .collect();
    Ok(BlendedTrace { path_key: bt.path_key, pairs, concrete_count: k })
}
