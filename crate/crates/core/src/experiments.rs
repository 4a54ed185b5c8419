//! End-to-end pipelines: corpus + trace store → trained model → reports.
//! The CLI and the acceptance suite both drive these.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{program_seed, trace_program, Corpus, DatasetError, Split, Task, TraceBudget};
use crate::embedder::{evaluate, predict_all, train_classifier, EncodedProgram, EpochMetrics, LabeledProgram, Liger, ModelConfig, ModelError, TrainConfig, Vocab};
use crate::minilang::Program;
use crate::rng::substream;
use crate::seqdec::{predict_names, score_predictions, train_namer, NameModel, NameVocab, NamedProgram, Prediction, Prf, MAX_NAME_LEN};
use crate::trace_model::{downsample_concretes, select_min_coverage_set, PathTraces, ProgramTraces, TraceError};
use crate::transforms::{measure_stability, StabilityReport, TransformKind};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{0}")]
    Mismatch(String),
}

/// Model and training settings plus the root seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl RunSpec {
    pub fn init_seed(&self) -> u64 {
        substream(self.seed, "init")
    }
}

/// Corpus programs that survived tracing, with their traces, in manifest
/// order.
pub struct Traced {
    pub entries: Vec<usize>,
    pub programs: Vec<Program>,
    pub traces: Vec<ProgramTraces>,
}

pub fn align(corpus: &Corpus, store: &[ProgramTraces]) -> Result<Traced, ExperimentError> {
    let programs = corpus.programs()?;
    let index: HashMap<&str, usize> = corpus.manifest.entries.iter().enumerate().map(|(i, e)| (e.program_id.as_str(), i)).collect();
    let mut out = Traced { entries: Vec::new(), programs: Vec::new(), traces: Vec::new() };
    let mut pairs = Vec::with_capacity(store.len());
    for t in store {
        let &i = index.get(t.program_id.as_str()).ok_or_else(|| ExperimentError::Mismatch(format!("trace store names unknown program {}", t.program_id)))?;
        pairs.push((i, t));
    }
    pairs.sort_by_key(|(i, _)| *i);
    for (i, t) in pairs {
        out.entries.push(i);
        out.programs.push(programs[i].clone());
        out.traces.push(t.clone());
    }
    Ok(out)
}

/// Vocabulary over the training split's programs.
pub fn train_vocab(corpus: &Corpus) -> Result<Vocab, ExperimentError> {
    let programs = corpus.programs()?;
    let train: Vec<&Program> = corpus.manifest.entries.iter().zip(&programs).filter(|(e, _)| e.split == Split::Train).map(|(_, p)| p).collect();
    Ok(Vocab::build(train))
}

#[derive(Clone, Debug)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub valid: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Splits<T> {
    fn push(&mut self, split: Split, x: T) {
        match split {
            Split::Train => self.train.push(x),
            Split::Valid => self.valid.push(x),
            Split::Test => self.test.push(x),
        }
    }

    pub fn get(&self, split: Split) -> &[T] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }
}

fn encode_all(traced: &Traced, vocab: &Vocab, cfg: &ModelConfig) -> Result<Vec<EncodedProgram>, ExperimentError> {
    traced
        .programs
        .par_iter()
        .zip(&traced.traces)
        .map(|(p, t)| EncodedProgram::from_traces(vocab, p, t, cfg).map_err(ExperimentError::from))
        .collect()
}

pub fn classification_data(corpus: &Corpus, store: &[ProgramTraces], vocab: &Vocab, cfg: &ModelConfig) -> Result<Splits<LabeledProgram>, ExperimentError> {
    let traced = align(corpus, store)?;
    let encoded = encode_all(&traced, vocab, cfg)?;
    let mut out = Splits { train: Vec::new(), valid: Vec::new(), test: Vec::new() };
    for (&i, program) in traced.entries.iter().zip(encoded) {
        let e = &corpus.manifest.entries[i];
        let label = corpus.manifest.label_index(&e.label).ok_or_else(|| ExperimentError::Mismatch(format!("unknown label {}", e.label)))?;
        out.push(e.split, LabeledProgram { id: e.program_id.clone(), program, label });
    }
    Ok(out)
}

pub fn naming_data(corpus: &Corpus, store: &[ProgramTraces], vocab: &Vocab, cfg: &ModelConfig) -> Result<Splits<NamedProgram>, ExperimentError> {
    let traced = align(corpus, store)?;
    let encoded = encode_all(&traced, vocab, cfg)?;
    let mut out = Splits { train: Vec::new(), valid: Vec::new(), test: Vec::new() };
    for (&i, program) in traced.entries.iter().zip(encoded) {
        let e = &corpus.manifest.entries[i];
        out.push(e.split, NamedProgram { id: e.program_id.clone(), program, name: e.label.clone() });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub ablation: String,
    pub seed: u64,
    pub history: Vec<EpochMetrics>,
    pub train_programs: usize,
    pub test_programs: usize,
    pub valid_acc: f64,
    pub test_acc: f64,
    pub test_macro_f1: f64,
    /// Executions whose states the training traces use.
    pub executions: usize,
}

fn check_task(corpus: &Corpus, task: Task) -> Result<(), ExperimentError> {
    if corpus.manifest.spec.task != task {
        return Err(ExperimentError::Mismatch(format!("corpus is for the {:?} task", corpus.manifest.spec.task)));
    }
    Ok(())
}

fn executions_in(store: &[ProgramTraces], corpus: &Corpus, split: Split) -> usize {
    let splits: HashMap<&str, Split> = corpus.manifest.entries.iter().map(|e| (e.program_id.as_str(), e.split)).collect();
    store.iter().filter(|t| splits.get(t.program_id.as_str()) == Some(&split)).map(|t| t.executions).sum()
}

pub fn new_classifier(corpus: &Corpus, spec: &RunSpec) -> Result<Liger, ExperimentError> {
    check_task(corpus, Task::Classify)?;
    let config = ModelConfig { labels: corpus.manifest.spec.labels.len(), ..spec.model.clone() };
    Ok(Liger::new(config, train_vocab(corpus)?, spec.init_seed())?)
}

/// Trains on `train_store` and evaluates on `eval_store` (often the same
/// store).
pub fn run_classification(
    corpus: &Corpus,
    train_store: &[ProgramTraces],
    eval_store: &[ProgramTraces],
    spec: &RunSpec,
) -> Result<(Liger, ClassifyReport), ExperimentError> {
    let mut model = new_classifier(corpus, spec)?;
    let data = classification_data(corpus, train_store, &model.vocab, &model.config)?;
    let history = train_classifier(&mut model, &data.train, &data.valid, &spec.train, spec.seed)?;
    let eval = if std::ptr::eq(train_store, eval_store) { data } else { classification_data(corpus, eval_store, &model.vocab, &model.config)? };
    let (valid_acc, _) = if eval.valid.is_empty() { (0.0, 0.0) } else { evaluate(&model, &eval.valid, spec.train.chunk)? };
    let (test_acc, test_macro_f1) = evaluate(&model, &eval.test, spec.train.chunk)?;
    let report = ClassifyReport {
        ablation: model.config.ablation.name().to_string(),
        seed: spec.seed,
        history,
        train_programs: eval.train.len(),
        test_programs: eval.test.len(),
        valid_acc,
        test_acc,
        test_macro_f1,
        executions: executions_in(train_store, corpus, Split::Train),
    };
    Ok((model, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub program_id: String,
    pub gold: String,
    pub predicted: String,
}

pub fn classify_split(model: &Liger, corpus: &Corpus, store: &[ProgramTraces], split: Split, chunk: usize) -> Result<(f64, f64, Vec<PredictionRow>), ExperimentError> {
    let data = classification_data(corpus, store, &model.vocab, &model.config)?;
    let set = data.get(split);
    let (acc, f1) = evaluate(model, set, chunk)?;
    let labels = &corpus.manifest.spec.labels;
    let rows = predict_all(model, set, chunk)?
        .into_iter()
        .zip(set)
        .map(|(p, e)| PredictionRow { program_id: e.id.clone(), gold: labels[e.label].clone(), predicted: labels[p].clone() })
        .collect();
    Ok((acc, f1, rows))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reduction {
    pub keep_concretes: Option<usize>,
    pub min_set: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub programs: usize,
    pub paths_before: usize,
    pub paths_after: usize,
    pub executions_before: usize,
    pub executions_after: usize,
    pub coverage_preserved: bool,
}

/// Applies the min-set path selection, then keeps `k` random concrete runs
/// per remaining path.
pub fn reduce_program(t: &ProgramTraces, r: Reduction, seed: u64) -> Result<ProgramTraces, ExperimentError> {
    let mut paths: Vec<PathTraces> = t.paths.clone();
    if r.min_set {
        let groups: Vec<_> = paths.iter().map(|p| (p.path_key, p.coverage())).collect();
        let keep = select_min_coverage_set(&groups);
        paths = keep.iter().map(|k| paths.iter().find(|p| p.path_key == *k).expect("selected path exists").clone()).collect();
    }
    if let Some(k) = r.keep_concretes {
        paths = paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let bt = downsample_concretes(&p.blended(), k, substream(seed, &format!("{}/{i}", t.program_id)))?;
                Ok(PathTraces::from_blended(&bt, p.branches.clone()))
            })
            .collect::<Result<_, TraceError>>()?;
    }
    let executions = paths.iter().map(|p| p.concretes.len()).sum();
    Ok(ProgramTraces { program_id: t.program_id.clone(), paths, executions })
}

pub fn reduce_store(store: &[ProgramTraces], r: Reduction, seed: u64) -> Result<(Vec<ProgramTraces>, ReductionReport), ExperimentError> {
    let seed = substream(seed, "reduce");
    let out: Vec<ProgramTraces> = store.par_iter().map(|t| reduce_program(t, r, seed)).collect::<Result<_, _>>()?;
    let coverage_preserved = store.iter().zip(&out).all(|(a, b)| a.coverage() == b.coverage());
    let report = ReductionReport {
        programs: store.len(),
        paths_before: store.iter().map(|t| t.paths.len()).sum(),
        paths_after: out.iter().map(|t| t.paths.len()).sum(),
        executions_before: store.iter().map(|t| t.executions).sum(),
        executions_after: out.iter().map(|t| t.executions).sum(),
        coverage_preserved,
    };
    Ok((out, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NameReport {
    pub ablation: String,
    pub seed: u64,
    pub history: Vec<EpochMetrics>,
    pub test_programs: usize,
    pub test: Prf,
    pub exact_match: f64,
}

pub fn new_namer(corpus: &Corpus, spec: &RunSpec) -> Result<NameModel, ExperimentError> {
    check_task(corpus, Task::Name)?;
    let names = NameVocab::build(corpus.manifest.spec.labels.iter().map(String::as_str));
    Ok(NameModel::new(spec.model.clone(), train_vocab(corpus)?, names, spec.init_seed())?)
}

pub fn name_split(model: &NameModel, corpus: &Corpus, store: &[ProgramTraces], split: Split, chunk: usize) -> Result<(Prf, f64, Vec<Prediction>), ExperimentError> {
    let data = naming_data(corpus, store, &model.vocab, &model.config)?;
    let preds = predict_names(model, data.get(split), MAX_NAME_LEN, chunk)?;
    let (counts, exact) = score_predictions(&preds);
    Ok((counts.prf(), exact, preds))
}

pub fn run_naming(corpus: &Corpus, store: &[ProgramTraces], spec: &RunSpec) -> Result<(NameModel, NameReport, Vec<Prediction>), ExperimentError> {
    let mut model = new_namer(corpus, spec)?;
    let data = naming_data(corpus, store, &model.vocab, &model.config)?;
    let history = train_namer(&mut model, &data.train, &data.valid, &spec.train, spec.seed)?;
    let preds = predict_names(&model, &data.test, MAX_NAME_LEN, spec.train.chunk)?;
    let (counts, exact_match) = score_predictions(&preds);
    let report = NameReport {
        ablation: model.config.ablation.name().to_string(),
        seed: spec.seed,
        history,
        test_programs: data.test.len(),
        test: counts.prf(),
        exact_match,
    };
    Ok((model, report, preds))
}

/// Retraces `p` with the seed of program `id` and predicts its class.
/// `None` when the program cannot be traced within the budget.
pub fn retrace_predict(model: &Liger, p: &Program, id: &str, budget: &TraceBudget, seed: u64) -> Option<usize> {
    let t = trace_program(p, id, budget, program_seed(seed, id)).ok()?;
    let ex = EncodedProgram::from_traces(&model.vocab, p, &t, &model.config).ok()?;
    model.predict(&[&ex]).ok().map(|v| v[0])
}

/// Stability of `model` on the test split for each transform kind.
/// Originals and rewrites are both retraced with the program's own seed.
pub fn stability(model: &Liger, corpus: &Corpus, kinds: &[TransformKind], budget: &TraceBudget, seed: u64) -> Result<Vec<StabilityReport>, ExperimentError> {
    let programs = corpus.programs()?;
    let test: Vec<(String, Program)> = corpus
        .manifest
        .entries
        .iter()
        .zip(programs)
        .filter(|(e, _)| e.split == Split::Test)
        .map(|(e, p)| (e.program_id.clone(), p))
        .collect();
    let programs: Vec<Program> = test.iter().map(|(_, p)| p.clone()).collect();
    Ok(kinds
        .iter()
        .map(|&kind| measure_stability(&programs, kind, |i, p| retrace_predict(model, p, &test[i].0, budget, seed)))
        .collect())
}
