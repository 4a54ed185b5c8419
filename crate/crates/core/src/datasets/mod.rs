//! Synthetic corpora for the classification and naming tasks, their
//! splits and manifests, and the tracing pipeline that turns a corpus into
//! a blended-trace store.
//!
//! On disk a corpus is a directory holding `manifest.json` and one `.ml`
//! file per program under `src/`.

mod templates;
mod tracing;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use tracing::{program_seed, trace_corpus, trace_program, TraceBudget, TraceOutcome};

use crate::minilang::{execute, observe, parse, ExecLimits, InputDist, Observation, ParseError, Program, Value};
use crate::rng::{seeded, substream};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid corpus spec: {0}")]
    Spec(String),
    #[error("could not generate {wanted} distinct variants of `{label}` (got {got})")]
    Exhausted { label: String, wanted: usize, got: usize },
    #[error("oracle check failed: {0}")]
    Oracle(String),
    #[error("program {id}: {source}")]
    Parse { id: String, source: ParseError },
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classify,
    Name,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub task: Task,
    /// Class labels or method names.
    pub labels: Vec<String>,
    pub variants_per_label: usize,
    pub seed: u64,
    pub input: InputDist,
    /// Path budget per program (U_max).
    pub max_paths: usize,
    /// Concrete runs per path (n_eps).
    pub n_eps: usize,
    /// Random executions tried per program before tracing gives up.
    pub attempt_cap: usize,
}

/// Small values and short arrays make paths recur often enough to collect
/// several runs per path.
pub const CORPUS_INPUTS: InputDist = InputDist { int_min: -9, int_max: 9, min_array_len: 1, max_array_len: 6 };

impl CorpusSpec {
    pub fn classification(seed: u64) -> CorpusSpec {
        CorpusSpec {
            task: Task::Classify,
            labels: templates::CLASSES.iter().map(|s| s.to_string()).collect(),
            variants_per_label: 200,
            seed,
            input: CORPUS_INPUTS,
            max_paths: 6,
            n_eps: 5,
            attempt_cap: 1000,
        }
    }

    pub fn naming(seed: u64) -> CorpusSpec {
        CorpusSpec {
            task: Task::Name,
            labels: templates::NAMES.iter().map(|s| s.to_string()).collect(),
            variants_per_label: 50,
            ..CorpusSpec::classification(seed)
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let known: &[&str] = match self.task {
            Task::Classify => &templates::CLASSES,
            Task::Name => &templates::NAMES,
        };
        if self.task == Task::Classify && self.labels.len() < 2 {
            return Err(DatasetError::Spec("classification needs at least two labels".into()));
        }
        if self.labels.is_empty() || self.variants_per_label == 0 {
            return Err(DatasetError::Spec("need at least one label and one variant per label".into()));
        }
        if let Some(l) = self.labels.iter().find(|l| !known.contains(&l.as_str())) {
            return Err(DatasetError::Spec(format!("no templates for `{l}`")));
        }
        let distinct: HashSet<_> = self.labels.iter().collect();
        if distinct.len() != self.labels.len() {
            return Err(DatasetError::Spec("duplicate labels".into()));
        }
        if self.max_paths == 0 || self.n_eps == 0 || self.attempt_cap == 0 {
            return Err(DatasetError::Spec("trace budget must be positive".into()));
        }
        Ok(())
    }

    pub fn budget(&self) -> TraceBudget {
        TraceBudget { max_paths: self.max_paths, n_eps: self.n_eps, attempt_cap: self.attempt_cap, input: self.input, limits: ExecLimits::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub program_id: String,
    /// Path of the source file relative to the corpus directory.
    pub source: String,
    /// Class label or method name.
    pub label: String,
    pub split: Split,
    /// Seed the variant was drawn from.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub spec: CorpusSpec,
    pub entries: Vec<ManifestEntry>,
    pub config_hash: String,
}

impl DatasetManifest {
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.spec.labels.iter().position(|l| l == label)
    }

    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.entries.iter().enumerate().filter(|(_, e)| e.split == split).map(|(i, _)| i).collect()
    }
}

/// A manifest with the source text of every entry, in entry order.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub manifest: DatasetManifest,
    pub sources: Vec<String>,
}

impl Corpus {
    pub fn write(&self, dir: &Path) -> Result<(), DatasetError> {
        fs::create_dir_all(dir.join("src"))?;
        for (e, src) in self.manifest.entries.iter().zip(&self.sources) {
            fs::write(dir.join(&e.source), src)?;
        }
        let json = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(dir.join("manifest.json"), json + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Corpus, DatasetError> {
        let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        let sources = manifest.entries.iter().map(|e| fs::read_to_string(dir.join(&e.source))).collect::<Result<Vec<_>, _>>()?;
        let corpus = Corpus { manifest, sources };
        if corpus.manifest.config_hash != corpus_hash(&corpus.manifest.spec, &corpus.manifest.entries, &corpus.sources) {
            return Err(DatasetError::Manifest("config hash does not match the manifest and sources".into()));
        }
        Ok(corpus)
    }

    pub fn programs(&self) -> Result<Vec<Program>, DatasetError> {
        self.manifest
            .entries
            .iter()
            .zip(&self.sources)
            .map(|(e, s)| parse(s).map_err(|source| DatasetError::Parse { id: e.program_id.clone(), source }))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

fn corpus_hash(spec: &CorpusSpec, entries: &[ManifestEntry], sources: &[String]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(spec).expect("spec serializes"));
    for (e, s) in entries.iter().zip(sources) {
        h.update(serde_json::to_vec(e).expect("entry serializes"));
        h.update(s.as_bytes());
    }
    format!("{:x}", h.finalize())
}

fn variant_seed(root: u64, label: &str, k: usize) -> u64 {
    substream(root, &format!("corpus/{label}/{k}"))
}

/// Draws variants of `label` in seed order until `want` distinct canonical
/// sources exist. Sources already present in `seen` are skipped, so no text
/// appears twice anywhere in the corpus.
fn draw_variants(spec: &CorpusSpec, label: &str, seen: &mut HashSet<String>) -> Result<Vec<(u64, String)>, DatasetError> {
    let want = spec.variants_per_label;
    let cap = want * 50;
    let mut out = Vec::with_capacity(want);
    let mut next = 0;
    while out.len() < want && next < cap {
        let batch = (want - out.len()).max(16).min(cap - next);
        let drawn: Vec<(u64, Result<String, ParseError>)> = (next..next + batch)
            .into_par_iter()
            .map(|k| {
                let seed = variant_seed(spec.seed, label, k);
                let mut rng = seeded(seed);
                let raw = match spec.task {
                    Task::Classify => templates::classification_source(&mut rng, label),
                    Task::Name => templates::naming_source(&mut rng, label),
                };
                (seed, parse(&raw).map(|p| p.to_source()))
            })
            .collect();
        next += batch;
        for (seed, src) in drawn {
            let src = src.map_err(|source| DatasetError::Parse { id: format!("{label} (seed {seed})"), source })?;
            if out.len() < want && seen.insert(src.clone()) {
                out.push((seed, src));
            }
        }
    }
    if out.len() < want {
        return Err(DatasetError::Exhausted { label: label.to_string(), wanted: want, got: out.len() });
    }
    Ok(out)
}

fn same_signature(a: &Program, b: &Program) -> bool {
    a.params.iter().map(|q| q.ty).eq(b.params.iter().map(|q| q.ty))
}

/// Observations of `p` on `inputs`; any failed run is a template bug.
fn observations(p: &Program, inputs: &[Vec<Value>]) -> Result<Vec<Observation>, DatasetError> {
    inputs
        .iter()
        .map(|i| {
            let t = execute(p, i, ExecLimits::default()).map_err(|e| DatasetError::Oracle(format!("{}: {e} on {i:?}", p.to_source())))?;
            Ok(observe(p, &t))
        })
        .collect()
}

const ORACLE_INPUTS: usize = 24;

/// Checks that every variant of a label behaves like the label's first
/// variant, and for classification that the labels are pairwise
/// distinguishable on a shared input set.
pub fn check_semantics(corpus: &Corpus) -> Result<(), DatasetError> {
    let spec = &corpus.manifest.spec;
    let programs = corpus.programs()?;
    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in corpus.manifest.entries.iter().enumerate() {
        let l = corpus.manifest.label_index(&e.label).ok_or_else(|| DatasetError::Manifest(format!("unknown label {}", e.label)))?;
        by_label.entry(l).or_default().push(i);
    }
    let mut reference: Vec<(usize, Vec<Observation>)> = Vec::new();
    let mut shared: Option<Vec<Vec<Value>>> = None;
    for (&label, members) in &by_label {
        let first = &programs[members[0]];
        let inputs = match (spec.task, &shared) {
            (Task::Classify, Some(s)) => s.clone(),
            _ => {
                let s = crate::minilang::random_inputs_with(first, ORACLE_INPUTS, substream(spec.seed, "oracle"), &spec.input)
                    .map_err(|e| DatasetError::Oracle(e.to_string()))?;
                if spec.task == Task::Classify {
                    shared = Some(s.clone());
                }
                s
            }
        };
        let want = observations(first, &inputs)?;
        let bad: Vec<String> = members
            .par_iter()
            .filter_map(|&m| {
                let p = &programs[m];
                if !same_signature(p, first) {
                    return Some(format!("{} has a different signature", corpus.manifest.entries[m].program_id));
                }
                match observations(p, &inputs) {
                    Ok(o) if o == want => None,
                    Ok(_) => Some(format!("{} disagrees with its label", corpus.manifest.entries[m].program_id)),
                    Err(e) => Some(e.to_string()),
                }
            })
            .collect();
        if let Some(b) = bad.into_iter().next() {
            return Err(DatasetError::Oracle(b));
        }
        reference.push((label, want));
    }
    if spec.task == Task::Classify {
        for (i, (la, a)) in reference.iter().enumerate() {
            for (lb, b) in &reference[i + 1..] {
                if a == b {
                    return Err(DatasetError::Oracle(format!("labels {} and {} agree on every shared input", spec.labels[*la], spec.labels[*lb])));
                }
            }
        }
    }
    Ok(())
}

/// Per label: shuffle, then 20% valid and 20% test (rounded down), the rest
/// train.
fn assign_splits(spec: &CorpusSpec, label: &str, n: usize) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(substream(spec.seed, &format!("split/{label}"))));
    let n_valid = n / 5;
    let n_test = n / 5;
    let mut out = vec![Split::Train; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank < n_valid {
            Split::Valid
        } else if rank < n_valid + n_test {
            Split::Test
        } else {
            Split::Train
        };
    }
    out
}

fn generate(spec: &CorpusSpec) -> Result<Corpus, DatasetError> {
    spec.validate()?;
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    let mut sources = Vec::new();
    for label in &spec.labels {
        let variants = draw_variants(spec, label, &mut seen)?;
        let splits = assign_splits(spec, label, variants.len());
        for (k, ((seed, src), split)) in variants.into_iter().zip(splits).enumerate() {
            let program_id = format!("{label}_{k:03}");
            entries.push(ManifestEntry { source: format!("src/{program_id}.ml"), program_id, label: label.clone(), split, seed });
            sources.push(src);
        }
    }
    let config_hash = corpus_hash(spec, &entries, &sources);
    let corpus = Corpus { manifest: DatasetManifest { spec: spec.clone(), entries, config_hash }, sources };
    check_semantics(&corpus)?;
    Ok(corpus)
}

pub fn gen_classification_corpus(spec: &CorpusSpec) -> Result<Corpus, DatasetError> {
    if spec.task != Task::Classify {
        return Err(DatasetError::Spec("expected a classification spec".into()));
    }
    generate(spec)
}

pub fn gen_naming_corpus(spec: &CorpusSpec) -> Result<Corpus, DatasetError> {
    if spec.task != Task::Name {
        return Err(DatasetError::Spec("expected a naming spec".into()));
    }
    generate(spec)
}

pub fn gen_corpus(spec: &CorpusSpec) -> Result<Corpus, DatasetError> {
    generate(spec)
}
