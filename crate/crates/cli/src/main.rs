use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use ligerlab::datasets::{gen_corpus, trace_corpus, Corpus, CorpusSpec, Split, Task};
use ligerlab::embedder::{write_metrics_csv, Ablation, CellKind, ModelConfig, TrainConfig};
use ligerlab::experiments::{
    classify_split, name_split, new_classifier, new_namer, reduce_store, run_classification, run_naming, stability, ReductionReport,
    Reduction, RunSpec,
};
use ligerlab::numcore::{read_checkpoint, write_checkpoint, Checkpoint, NumError, ParamSet};
use ligerlab::seqdec::write_predictions_tsv;
use ligerlab::trace_model::{read_store, write_store, ProgramTraces};
use ligerlab::transforms::{write_stability_csv, TransformKind};

#[derive(Parser)]
#[command(name = "ligerlab", version, about = "Program embeddings from blended execution traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum TaskArg {
    Classify,
    Name,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum AblationArg {
    Full,
    Static,
    Dynamic,
    Noattn,
}

impl From<AblationArg> for Ablation {
    fn from(a: AblationArg) -> Ablation {
        match a {
            AblationArg::Full => Ablation::Full,
            AblationArg::Static => Ablation::StaticOnly,
            AblationArg::Dynamic => Ablation::DynamicOnly,
            AblationArg::Noattn => Ablation::NoAttention,
        }
    }
}

#[derive(Args, Clone, Debug, Serialize)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "full")]
    ablation: AblationArg,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 64)]
    embed: usize,
    #[arg(long, default_value_t = 2e-3)]
    lr: f64,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    /// Use GRU cells instead of plain tanh cells.
    #[arg(long)]
    gru: bool,
}

impl ModelArgs {
    fn run_spec(&self, seed: u64, n_eps: usize) -> RunSpec {
        RunSpec {
            model: ModelConfig {
                hidden: self.hidden,
                embed: self.embed,
                ablation: self.ablation.into(),
                n_eps,
                cell: if self.gru { CellKind::Gru } else { CellKind::Vanilla },
                ..ModelConfig::default()
            },
            train: TrainConfig { epochs: self.epochs, batch: self.batch, lr: self.lr, patience: self.patience, ..TrainConfig::default() },
            seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Gen {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        corpus: PathBuf,
        /// Variants per label; defaults to 200 (classify) or 50 (name).
        #[arg(long)]
        variants: Option<usize>,
        #[arg(long, default_value = "report")]
        report: PathBuf,
    },
    /// Trace every corpus program into a blended-trace store.
    Trace {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "report")]
        report: PathBuf,
    },
    /// Train a classifier and save a checkpoint.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "report")]
        report: PathBuf,
    },
    /// Evaluate a saved classifier on the test split.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value = "report")]
        report: PathBuf,
    },
    /// Train and evaluate every ablation mode with one seed.
    Ablate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "report")]
        report: PathBuf,
    },
    /// Shrink a trace store: min-set path selection and/or fewer concrete runs.
    Reduce {
        #[arg(long)]
        traces: PathBuf,
        /// Where to write the reduced store.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        keep_concretes: Option<usize>,
        #[arg(long)]
        min_set: bool,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "report")]
        report: PathBuf,
    },
    /// Prediction stability of a saved classifier under program rewrites.
    Stability {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "report")]
        report: PathBuf,
    },
    /// Train and evaluate the method-name model.
    Name {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "report")]
        report: PathBuf,
    },
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load_corpus(dir: &Path) -> Result<Corpus> {
    Corpus::read(dir).with_context(|| format!("reading corpus {}", dir.display()))
}

fn load_store(path: &Path) -> Result<Vec<ProgramTraces>> {
    let f = File::open(path).with_context(|| format!("opening trace store {}", path.display()))?;
    read_store(BufReader::new(f)).with_context(|| format!("parsing trace store {}", path.display()))
}

/// Concrete runs per path; every path in the store must agree.
fn store_n_eps(store: &[ProgramTraces]) -> Result<usize> {
    let mut counts = store.iter().flat_map(|t| t.paths.iter().map(|p| p.concretes.len()));
    let Some(first) = counts.next() else { bail!("trace store is empty") };
    if counts.any(|c| c != first) {
        bail!("trace store mixes paths with different numbers of concrete runs");
    }
    Ok(first)
}

fn sidecar(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn reduction_sidecar(store: &Path) -> PathBuf {
    let mut s = store.as_os_str().to_owned();
    s.push(".reduction.json");
    PathBuf::from(s)
}

fn save_checkpoint(path: &Path, params: &ParamSet, hash: String, spec: &RunSpec, task: Task) -> Result<()> {
    let mut w = create(path)?;
    write_checkpoint(&mut w, &Checkpoint::from_params(params, hash, spec.seed))?;
    w.flush()?;
    write_json(&sidecar(path), &json!({ "task": task, "run": spec }))
}

fn load_run_spec(ckpt: &Path) -> Result<(Task, RunSpec)> {
    let path = sidecar(ckpt);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?)?;
    Ok((serde_json::from_value(v["task"].clone())?, serde_json::from_value(v["run"].clone())?))
}

fn restore(ckpt: &Path, params: &mut ParamSet, hash: &str) -> Result<()> {
    let f = File::open(ckpt).with_context(|| format!("opening checkpoint {}", ckpt.display()))?;
    let ck = read_checkpoint(BufReader::new(f))?;
    match ck.restore_into(params, hash) {
        Err(NumError::ConfigMismatch { expected, found }) => {
            bail!("checkpoint/config hash mismatch: the checkpoint was trained with config {found}, this corpus and config give {expected}")
        }
        r => Ok(r?),
    }
}

fn threads() -> Result<()> {
    if let Ok(v) = std::env::var("LIGERLAB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("LIGERLAB_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("LIGERLAB_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    threads()?;
    match cli.command {
        Command::Gen { task, seed, corpus, variants, report } => {
            let mut spec = match task {
                TaskArg::Classify => CorpusSpec::classification(seed),
                TaskArg::Name => CorpusSpec::naming(seed),
            };
            if let Some(v) = variants {
                spec.variants_per_label = v;
            }
            let c = gen_corpus(&spec)?;
            c.write(&corpus)?;
            write_json(&report.join("gen_config.json"), &json!({ "command": "gen", "seed": seed, "spec": spec }))?;
            println!("wrote {} programs to {}", c.len(), corpus.display());
        }
        Command::Trace { corpus, traces, seed, report } => {
            let c = load_corpus(&corpus)?;
            let budget = c.manifest.spec.budget();
            let out = trace_corpus(&c, &budget, seed)?;
            let mut w = create(&traces)?;
            write_store(&mut w, &out.store)?;
            w.flush()?;
            let dropped: Vec<_> = out.dropped.iter().map(|(id, why)| json!({ "program_id": id, "reason": why })).collect();
            write_json(&report.join("trace_config.json"), &json!({ "command": "trace", "seed": seed, "corpus": corpus, "traces": traces, "spec": c.manifest.spec }))?;
            write_json(
                &report.join("trace_report.json"),
                &json!({
                    "programs": c.len(),
                    "retained": out.store.len(),
                    "paths": out.store.iter().map(|t| t.paths.len()).sum::<usize>(),
                    "executions": out.store.iter().map(|t| t.executions).sum::<usize>(),
                    "dropped": dropped,
                }),
            )?;
            println!("traced {} of {} programs", out.store.len(), c.len());
        }
        Command::Train { corpus, traces, ckpt, seed, model, report } => {
            let c = load_corpus(&corpus)?;
            let store = load_store(&traces)?;
            let spec = model.run_spec(seed, store_n_eps(&store)?);
            write_json(&report.join("train_config.json"), &json!({ "command": "train", "seed": seed, "args": model, "run": spec }))?;
            let (m, rep) = run_classification(&c, &store, &store, &spec)?;
            save_checkpoint(&ckpt, &m.params, m.config_hash(), &spec, Task::Classify)?;
            write_metrics_csv(create(&report.join("train_metrics.csv"))?, &rep.history)?;
            write_json(&report.join("train_report.json"), &rep)?;
            println!("test accuracy {:.4}, macro-F1 {:.4}", rep.test_acc, rep.test_macro_f1);
        }
        Command::Eval { corpus, traces, ckpt, report } => {
            let c = load_corpus(&corpus)?;
            let store = load_store(&traces)?;
            let (task, spec) = load_run_spec(&ckpt)?;
            if task != Task::Classify {
                bail!("{} is not a classifier checkpoint", ckpt.display());
            }
            let mut m = new_classifier(&c, &spec)?;
            let hash = m.config_hash();
            restore(&ckpt, &mut m.params, &hash)?;
            let (acc, f1, rows) = classify_split(&m, &c, &store, Split::Test, spec.train.chunk)?;
            let reduction: Option<ReductionReport> = match fs::read_to_string(reduction_sidecar(&traces)) {
                Ok(s) => Some(serde_json::from_str(&s)?),
                Err(_) => None,
            };
            let mut w = create(&report.join("eval_predictions.csv"))?;
            writeln!(w, "program_id,gold,predicted")?;
            for r in &rows {
                writeln!(w, "{},{},{}", r.program_id, r.gold, r.predicted)?;
            }
            w.flush()?;
            write_json(&report.join("eval_config.json"), &json!({ "command": "eval", "corpus": corpus, "traces": traces, "ckpt": ckpt, "run": spec }))?;
            write_json(
                &report.join("eval_report.json"),
                &json!({
                    "split": "test",
                    "programs": rows.len(),
                    "accuracy": acc,
                    "macro_f1": f1,
                    "branch_coverage_preserved": reduction.as_ref().map(|r| r.coverage_preserved).unwrap_or(true),
                    "reduction": reduction,
                }),
            )?;
            println!("test accuracy {acc:.4}, macro-F1 {f1:.4}");
        }
        Command::Ablate { corpus, traces, seed, model, report } => {
            let c = load_corpus(&corpus)?;
            let store = load_store(&traces)?;
            let n_eps = store_n_eps(&store)?;
            write_json(&report.join("ablate_config.json"), &json!({ "command": "ablate", "seed": seed, "args": model }))?;
            let mut w = create(&report.join("ablation.csv"))?;
            writeln!(w, "mode,valid_acc,test_acc,test_macro_f1,epochs")?;
            let mut reports = Vec::new();
            for mode in [AblationArg::Full, AblationArg::Static, AblationArg::Dynamic, AblationArg::Noattn] {
                let spec = ModelArgs { ablation: mode, ..model.clone() }.run_spec(seed, n_eps);
                let (_, rep) = run_classification(&c, &store, &store, &spec)?;
                writeln!(w, "{},{:.6},{:.6},{:.6},{}", rep.ablation, rep.valid_acc, rep.test_acc, rep.test_macro_f1, rep.history.len())?;
                println!("{:<14} test accuracy {:.4}", rep.ablation, rep.test_acc);
                reports.push(rep);
            }
            w.flush()?;
            write_json(&report.join("ablation_report.json"), &reports)?;
        }
        Command::Reduce { traces, out, keep_concretes, min_set, seed, report } => {
            if keep_concretes.is_none() && !min_set {
                bail!("nothing to do: pass --keep-concretes K and/or --min-set");
            }
            let store = load_store(&traces)?;
            let r = Reduction { keep_concretes, min_set };
            let (reduced, rep) = reduce_store(&store, r, seed)?;
            let mut w = create(&out)?;
            write_store(&mut w, &reduced)?;
            w.flush()?;
            write_json(&reduction_sidecar(&out), &rep)?;
            write_json(&report.join("reduce_config.json"), &json!({ "command": "reduce", "seed": seed, "traces": traces, "out": out, "reduction": r }))?;
            write_json(&report.join("reduce_report.json"), &rep)?;
            println!(
                "executions {} -> {}, paths {} -> {}, branch coverage preserved: {}",
                rep.executions_before, rep.executions_after, rep.paths_before, rep.paths_after, rep.coverage_preserved
            );
        }
        Command::Stability { corpus, ckpt, seed, report } => {
            let c = load_corpus(&corpus)?;
            let (task, spec) = load_run_spec(&ckpt)?;
            if task != Task::Classify {
                bail!("{} is not a classifier checkpoint", ckpt.display());
            }
            let mut m = new_classifier(&c, &spec)?;
            let hash = m.config_hash();
            restore(&ckpt, &mut m.params, &hash)?;
            let budget = ligerlab::datasets::TraceBudget { n_eps: spec.model.n_eps, ..c.manifest.spec.budget() };
            let kinds: Vec<TransformKind> = std::iter::once(TransformKind::Identity).chain(TransformKind::MEASURED).collect();
            let reps = stability(&m, &c, &kinds, &budget, seed)?;
            let name = format!("liger_{}", m.config.ablation.name());
            let rows: Vec<_> = reps.iter().map(|r| (name.clone(), r.clone())).collect();
            write_stability_csv(create(&report.join("stability.csv"))?, &rows)?;
            write_json(&report.join("stability_config.json"), &json!({ "command": "stability", "seed": seed, "ckpt": ckpt, "run": spec }))?;
            write_json(&report.join("stability_report.json"), &reps)?;
            for r in &reps {
                println!("{:<24} {:>4} applicable, {:>6.2}% changed", r.kind.name(), r.applicable, 100.0 * r.fraction);
            }
        }
        Command::Name { corpus, traces, ckpt, seed, model, report } => {
            let c = load_corpus(&corpus)?;
            let store = load_store(&traces)?;
            let spec = model.run_spec(seed, store_n_eps(&store)?);
            write_json(&report.join("name_config.json"), &json!({ "command": "name", "seed": seed, "args": model, "run": spec }))?;
            let (m, rep, preds) = run_naming(&c, &store, &spec)?;
            save_checkpoint(&ckpt, &m.params, m.config_hash(), &spec, Task::Name)?;
            // reload through the checkpoint so reported numbers match what was saved
            let mut fresh = new_namer(&c, &spec)?;
            let hash = fresh.config_hash();
            restore(&ckpt, &mut fresh.params, &hash)?;
            let (prf, exact, _) = name_split(&fresh, &c, &store, Split::Test, spec.train.chunk)?;
            debug_assert_eq!(prf, rep.test);
            write_predictions_tsv(create(&report.join("name_predictions.tsv"))?, &preds)?;
            write_metrics_csv(create(&report.join("name_metrics.csv"))?, &rep.history)?;
            write_json(&report.join("name_report.json"), &rep)?;
            println!("test sub-token precision {:.4}, recall {:.4}, F1 {:.4}, exact {:.4}", prf.precision, prf.recall, prf.f1, exact);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
