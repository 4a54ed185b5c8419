//! Mini-batch training with Adam, gradient clipping and early stopping.

use std::io::{self, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{EncodedProgram, Liger};
use super::ModelError;
use crate::numcore::{AdamConfig, AdamState, Gradients, Graph, ParamSet, CLIP_NORM};
use crate::rng::{seeded, substream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub clip: f64,
    /// Examples per gradient graph; graphs of one batch may run in parallel.
    pub chunk: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 30, batch: 16, lr: 1e-4, patience: 5, clip: CLIP_NORM, chunk: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub acc: f64,
    pub f1: f64,
}

pub fn write_metrics_csv<W: Write>(mut w: W, history: &[EpochMetrics]) -> io::Result<()> {
    writeln!(w, "epoch,loss,acc,f1")?;
    for m in history {
        writeln!(w, "{},{:.6},{:.6},{:.6}", m.epoch, m.loss, m.acc, m.f1)?;
    }
    Ok(())
}

/// Generic loop shared by the classifier and the name decoder.
///
/// `loss_grad` returns the summed loss of a chunk and adds its gradient
/// (already divided by the batch size) into the given buffer. `validate`
/// returns `(acc, f1, selection score)`. The parameters with the best
/// selection score are restored at the end.
pub fn fit<E, L, V>(params: &mut ParamSet, train: &[E], cfg: &TrainConfig, seed: u64, loss_grad: L, mut validate: V) -> Result<Vec<EpochMetrics>, ModelError>
where
    E: Sync,
    L: Fn(&ParamSet, &[&E], f64, &mut Gradients) -> Result<f64, ModelError> + Sync,
    V: FnMut(&ParamSet) -> Result<(f64, f64, f64), ModelError>,
{
    if train.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if cfg.batch == 0 || cfg.chunk == 0 {
        return Err(ModelError::Config("batch and chunk must be positive".into()));
    }
    let mut adam = AdamState::new(params, AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let mut rng = seeded(substream(seed, "batching"));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, ParamSet)> = None;
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch) {
            let scale = 1.0 / batch.len() as f64;
            let chunks: Vec<&[usize]> = batch.chunks(cfg.chunk).collect();
            let p: &ParamSet = params;
            let parts: Vec<Result<(f64, Gradients), ModelError>> = chunks
                .par_iter()
                .map(|c| {
                    let items: Vec<&E> = c.iter().map(|&i| &train[i]).collect();
                    let mut grads = Gradients::zeros_like(p);
                    let l = loss_grad(p, &items, scale, &mut grads)?;
                    Ok((l, grads))
                })
                .collect();
            let mut grads = Gradients::zeros_like(params);
            for part in parts {
                let (l, g) = part?;
                total += l;
                grads.add(&g);
            }
            grads.clip_global_norm(cfg.clip);
            adam.step(params, &grads)?;
        }
        let (acc, f1, score) = validate(params)?;
        history.push(EpochMetrics { epoch, loss: total / train.len() as f64, acc, f1 });
        log::info!("epoch {epoch}: loss {:.4} acc {acc:.4} f1 {f1:.4}", total / train.len() as f64);
        match &best {
            Some((b, _)) if score <= *b => {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
            _ => {
                best = Some((score, params.clone()));
                stale = 0;
            }
        }
    }
    if let Some((_, p)) = best {
        *params = p;
    }
    Ok(history)
}

#[derive(Clone, Debug)]
pub struct LabeledProgram {
    pub id: String,
    pub program: EncodedProgram,
    pub label: usize,
}

/// Accuracy and macro-F1 over classes that occur in gold or predictions.
pub fn accuracy_and_macro_f1(gold: &[usize], pred: &[usize], classes: usize) -> (f64, f64) {
    if gold.is_empty() {
        return (0.0, 0.0);
    }
    let correct = gold.iter().zip(pred).filter(|(a, b)| a == b).count();
    let mut f1s = Vec::new();
    for c in 0..classes {
        let tp = gold.iter().zip(pred).filter(|&(&g, &p)| g == c && p == c).count() as f64;
        let gold_c = gold.iter().filter(|&&g| g == c).count() as f64;
        let pred_c = pred.iter().filter(|&&p| p == c).count() as f64;
        if gold_c == 0.0 && pred_c == 0.0 {
            continue;
        }
        f1s.push(if tp == 0.0 { 0.0 } else { 2.0 * tp / (gold_c + pred_c) });
    }
    let f1 = if f1s.is_empty() { 0.0 } else { f1s.iter().sum::<f64>() / f1s.len() as f64 };
    (correct as f64 / gold.len() as f64, f1)
}

/// Predicts every example, evaluating `chunk` programs per graph.
pub fn predict_all(model: &Liger, data: &[LabeledProgram], chunk: usize) -> Result<Vec<usize>, ModelError> {
    let parts: Vec<Result<Vec<usize>, ModelError>> = data
        .par_chunks(chunk.max(1))
        .map(|c| {
            let batch: Vec<&EncodedProgram> = c.iter().map(|e| &e.program).collect();
            model.predict(&batch)
        })
        .collect();
    let mut out = Vec::with_capacity(data.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn evaluate(model: &Liger, data: &[LabeledProgram], chunk: usize) -> Result<(f64, f64), ModelError> {
    let pred = predict_all(model, data, chunk)?;
    let gold: Vec<usize> = data.iter().map(|e| e.label).collect();
    Ok(accuracy_and_macro_f1(&gold, &pred, model.config.labels))
}

/// Trains `model` in place on `train`, early-stopping on validation accuracy.
pub fn train_classifier(model: &mut Liger, train: &[LabeledProgram], valid: &[LabeledProgram], cfg: &TrainConfig, seed: u64) -> Result<Vec<EpochMetrics>, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if let Some(bad) = train.iter().chain(valid).find(|e| e.label >= model.config.labels) {
        return Err(ModelError::BadInput(format!("{}: label {} out of range", bad.id, bad.label)));
    }
    let mut params = std::mem::take(&mut model.params);
    let shape = model.clone();
    let result = fit(
        &mut params,
        train,
        cfg,
        seed,
        |p, items, scale, grads| {
            let batch: Vec<&EncodedProgram> = items.iter().map(|e| &e.program).collect();
            let labels: Vec<usize> = items.iter().map(|e| e.label).collect();
            let mut g = Graph::new(p);
            let (logits, _) = shape.logits(&mut g, &batch)?;
            let ce = g.cross_entropy(logits, &labels)?;
            let loss = g.value(ce).scalar_value();
            let scaled = g.scale(ce, scale);
            g.backward(scaled, grads)?;
            Ok(loss)
        },
        |p| {
            let eval_set = if valid.is_empty() { train } else { valid };
            let mut m = shape.clone();
            m.params = p.clone();
            let (acc, f1) = evaluate(&m, eval_set, cfg.chunk)?;
            Ok((acc, f1, acc))
        },
    );
    model.params = params;
    result
}
