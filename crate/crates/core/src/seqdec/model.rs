//! Attention decoder that emits a method name from a program's trace
//! encoding.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metric::{split_subwords, subtoken_prf_words, SubtokenCounts};
use crate::embedder::{argmax, config_hash, fit, EncodedProgram, Encoder, EncoderOutput, EpochMetrics, ModelConfig, ModelError, Rnn, TrainConfig, Vocab};
use crate::numcore::{Graph, NumError, ParamId, ParamSet, Tensor, Var};

pub const NAME_BEGIN: &str = "<begin>";
pub const NAME_END: &str = "<end>";
pub const NAME_UNK: &str = "<unk>";

/// Masked-out attention logits.
const MASK: f64 = -1e30;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameVocab {
    words: Vec<String>,
}

impl NameVocab {
    /// Specials, then the sorted sub-words of `names`.
    pub fn build<'a>(names: impl IntoIterator<Item = &'a str>) -> NameVocab {
        let mut set: Vec<String> = names.into_iter().flat_map(split_subwords).collect();
        set.sort();
        set.dedup();
        let mut words = vec![NAME_BEGIN.to_string(), NAME_END.to_string(), NAME_UNK.to_string()];
        words.extend(set);
        NameVocab { words }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, w: &str) -> usize {
        self.words.iter().position(|x| x == w).unwrap_or(2)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn begin(&self) -> usize {
        0
    }

    pub fn end(&self) -> usize {
        1
    }

    /// Sub-word ids of a gold name followed by END.
    pub fn target(&self, name: &str) -> Vec<usize> {
        let mut t: Vec<usize> = split_subwords(name).iter().map(|w| self.id(w)).collect();
        t.push(self.end());
        t
    }
}

/// Decoder weights: output-side embedding, bridge from `H_P`, decoder RNN,
/// the a2 scorer and the output projection over `[H^d_t ⊕ c_t]`.
#[derive(Clone, Debug)]
pub struct DecoderParams {
    pub embed: ParamId,
    pub bridge_w: ParamId,
    pub bridge_b: ParamId,
    pub rnn: Rnn,
    pub a2_d: ParamId,
    pub a2_a: ParamId,
    pub a2_b: ParamId,
    pub a2_out: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
}

impl DecoderParams {
    pub fn register(ps: &mut ParamSet, cfg: &ModelConfig, names: usize) -> DecoderParams {
        let (d_e, d_h) = (cfg.embed, cfg.hidden);
        DecoderParams {
            embed: ps.add("dec.embed", Tensor::zeros(names, d_e)),
            bridge_w: ps.add("dec.bridge.w", Tensor::zeros(d_h, d_h)),
            bridge_b: ps.add("dec.bridge.b", Tensor::zeros(1, d_h)),
            rnn: Rnn::register(ps, "dec.rnn", cfg.cell, d_e + d_h, d_h),
            a2_d: ps.add("a2.w_d", Tensor::zeros(d_h, d_h)),
            a2_a: ps.add("a2.w_a", Tensor::zeros(d_h, d_h)),
            a2_b: ps.add("a2.b", Tensor::zeros(1, d_h)),
            a2_out: ps.add("a2.w_out", Tensor::zeros(d_h, 1)),
            out_w: ps.add("dec.out.w", Tensor::zeros(2 * d_h, names)),
            out_b: ps.add("dec.out.b", Tensor::zeros(1, names)),
        }
    }
}

/// Per-batch annotation layout: every program's prefix states padded to a
/// common width, with a trailing zero row for padding.
struct Memory {
    values: Var,
    proj: Var,
    index: Vec<usize>,
    mask: Var,
    width: usize,
}

#[derive(Clone, Debug)]
pub struct NameModel {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub names: NameVocab,
    pub params: ParamSet,
    pub encoder: Encoder,
    pub decoder: DecoderParams,
}

impl NameModel {
    pub fn new(config: ModelConfig, vocab: Vocab, names: NameVocab, seed: u64) -> Result<NameModel, ModelError> {
        config.validate().map_err(ModelError::Config)?;
        let mut params = ParamSet::new();
        let encoder = Encoder::register(&mut params, &config, vocab.len());
        let decoder = DecoderParams::register(&mut params, &config, names.len());
        params.init_uniform(seed);
        Ok(NameModel { config, vocab, names, params, encoder, decoder })
    }

    pub fn config_hash(&self) -> String {
        config_hash(&serde_json::to_string(&self.config).expect("config serializes"), &self.vocab, &[self.names.words()])
    }

    fn memory(&self, g: &mut Graph, enc: &EncoderOutput, programs: usize) -> Result<Memory, NumError> {
        let n = enc.annotation_owner.len();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); programs];
        for (i, &o) in enc.annotation_owner.iter().enumerate() {
            rows[o].push(i);
        }
        let width = rows.iter().map(Vec::len).max().unwrap_or(1);
        let mut index = Vec::with_capacity(programs * width);
        let mut mask = Vec::with_capacity(programs * width);
        for r in &rows {
            for k in 0..width {
                index.push(r.get(k).copied().unwrap_or(n));
                mask.push(if k < r.len() { 0.0 } else { MASK });
            }
        }
        let zero = g.input(Tensor::zeros(1, self.config.hidden));
        let values = g.concat_rows(&[enc.annotations, zero])?;
        let w = g.param(self.decoder.a2_a);
        let proj = g.matmul(values, w)?;
        let mask = g.input(Tensor::matrix(programs, width, mask));
        Ok(Memory { values, proj, index, mask, width })
    }

    /// `c_t` and the attention weights `[programs, width]` for decoder
    /// state `h_prev`.
    fn attend(&self, g: &mut Graph, mem: &Memory, h_prev: Var) -> Result<(Var, Var), NumError> {
        let programs = g.shape(h_prev).0;
        let w = g.param(self.decoder.a2_d);
        let hd = g.matmul(h_prev, w)?;
        let rep: Vec<usize> = (0..programs).flat_map(|p| std::iter::repeat_n(p, mem.width)).collect();
        let hd = g.gather_rows(hd, &rep)?;
        let pa = g.gather_rows(mem.proj, &mem.index)?;
        let pre = g.add(hd, pa)?;
        let b = g.param(self.decoder.a2_b);
        let pre = g.add_row(pre, b)?;
        let hid = g.tanh(pre);
        let wo = g.param(self.decoder.a2_out);
        let mu = g.matmul(hid, wo)?;
        let mu = g.reshape(mu, programs, mem.width)?;
        let mu = g.add(mu, mem.mask)?;
        let alpha = g.softmax_rows(mu);
        let vals = g.gather_rows(mem.values, &mem.index)?;
        let c = g.group_weighted_sum(vals, alpha)?;
        Ok((c, alpha))
    }

    fn initial_state(&self, g: &mut Graph, h_p: Var) -> Result<Var, NumError> {
        let w = g.param(self.decoder.bridge_w);
        let b = g.param(self.decoder.bridge_b);
        let x = g.matmul(h_p, w)?;
        let x = g.add_row(x, b)?;
        Ok(g.tanh(x))
    }

    /// One decoder step; returns the new state, the logits and the weights.
    fn step(&self, g: &mut Graph, mem: &Memory, h_prev: Var, prev_words: &[usize]) -> Result<(Var, Var, Var), NumError> {
        let (c, alpha) = self.attend(g, mem, h_prev)?;
        let e = g.param(self.decoder.embed);
        let x = g.gather_rows(e, prev_words)?;
        let x = g.concat_cols(&[x, c])?;
        let xp = self.decoder.rnn.project(g, x)?;
        let h = self.decoder.rnn.step(g, &xp, Some(h_prev))?;
        let hc = g.concat_cols(&[h, c])?;
        let ow = g.param(self.decoder.out_w);
        let ob = g.param(self.decoder.out_b);
        let logits = g.matmul(hc, ow)?;
        let logits = g.add_row(logits, ob)?;
        Ok((h, logits, alpha))
    }

    /// Summed teacher-forced cross-entropy of `targets` (each ending in END).
    pub fn loss(&self, g: &mut Graph, batch: &[&EncodedProgram], targets: &[Vec<usize>]) -> Result<Var, ModelError> {
        let enc = self.encoder.forward(g, &self.config, batch)?;
        let mem = self.memory(g, &enc, batch.len())?;
        let mut h = self.initial_state(g, enc.program_emb)?;
        let steps = targets.iter().map(Vec::len).max().unwrap_or(0);
        let mut prev = vec![self.names.begin(); batch.len()];
        let mut losses = Vec::new();
        for t in 0..steps {
            let (h2, logits, _) = self.step(g, &mem, h, &prev)?;
            h = h2;
            let active: Vec<usize> = (0..batch.len()).filter(|&b| targets[b].len() > t).collect();
            let gold: Vec<usize> = active.iter().map(|&b| targets[b][t]).collect();
            let l = g.gather_rows(logits, &active)?;
            losses.push(g.cross_entropy(l, &gold)?);
            for (b, p) in prev.iter_mut().enumerate() {
                if let Some(&w) = targets[b].get(t) {
                    *p = w;
                }
            }
        }
        let all = g.concat_rows(&losses)?;
        Ok(g.sum(all))
    }

    /// Greedy decoding of every program in `batch`; at most `max_len`
    /// sub-words each.
    pub fn decode(&self, batch: &[&EncodedProgram], max_len: usize) -> Result<Vec<Decoded>, ModelError> {
        let mut g = Graph::new(&self.params);
        let enc = self.encoder.forward(&mut g, &self.config, batch)?;
        let mem = self.memory(&mut g, &enc, batch.len())?;
        let mut h = self.initial_state(&mut g, enc.program_emb)?;
        let mut prev = vec![self.names.begin(); batch.len()];
        let mut out: Vec<Decoded> = (0..batch.len()).map(|_| Decoded::default()).collect();
        let mut done = vec![false; batch.len()];
        for _ in 0..max_len {
            let (h2, logits, alpha) = self.step(&mut g, &mem, h, &prev)?;
            h = h2;
            for b in 0..batch.len() {
                if done[b] {
                    continue;
                }
                let w = argmax(g.value(logits).row_slice(b));
                let n = enc.annotation_owner.iter().filter(|&&o| o == b).count();
                out[b].attention.push(g.value(alpha).row_slice(b)[..n].to_vec());
                if w == self.names.end() {
                    done[b] = true;
                } else {
                    out[b].words.push(self.names.word(w).to_string());
                    prev[b] = w;
                }
            }
            if done.iter().all(|&d| d) {
                break;
            }
        }
        Ok(out)
    }

    /// `c_t` for decoder state `h_prev` over explicit annotations, with the
    /// weights.
    pub fn attention_context(&self, h_prev: &[f64], annotations: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        let d = self.config.hidden;
        if annotations.is_empty() {
            return Err(ModelError::BadInput("no annotations".into()));
        }
        if h_prev.len() != d || annotations.iter().any(|a| a.len() != d) {
            return Err(ModelError::BadInput("attention dimension mismatch".into()));
        }
        let mut g = Graph::new(&self.params);
        let rows: Vec<f64> = annotations.iter().flatten().copied().collect();
        let ann = g.input(Tensor::matrix(annotations.len(), d, rows));
        let enc_like = EncoderOutput {
            program_emb: ann,
            path_emb: ann,
            path_owner: vec![0],
            annotations: ann,
            annotation_owner: vec![0; annotations.len()],
            weights: Vec::new(),
        };
        let mem = self.memory(&mut g, &enc_like, 1)?;
        let h = g.input(Tensor::row(h_prev.to_vec()));
        let (c, alpha) = self.attend(&mut g, &mem, h)?;
        Ok((g.value(c).data().to_vec(), g.value(alpha).data().to_vec()))
    }
}

/// A greedy decoding: sub-words and, per emission step, the attention
/// weights over the program's annotations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Decoded {
    pub words: Vec<String>,
    pub attention: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct NamedProgram {
    pub id: String,
    pub program: EncodedProgram,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub program_id: String,
    pub gold: String,
    pub predicted: Vec<String>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn predict_names(model: &NameModel, data: &[NamedProgram], max_len: usize, chunk: usize) -> Result<Vec<Prediction>, ModelError> {
    let parts: Vec<Result<Vec<Prediction>, ModelError>> = data
        .par_chunks(chunk.max(1))
        .map(|c| {
            let batch: Vec<&EncodedProgram> = c.iter().map(|e| &e.program).collect();
            let decoded = model.decode(&batch, max_len)?;
            Ok(c.iter()
                .zip(decoded)
                .map(|(e, d)| {
                    let prf = subtoken_prf_words(&d.words, &split_subwords(&e.name));
                    Prediction { program_id: e.id.clone(), gold: e.name.clone(), predicted: d.words, precision: prf.precision, recall: prf.recall, f1: prf.f1 }
                })
                .collect())
        })
        .collect();
    let mut out = Vec::with_capacity(data.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Micro-averaged corpus counts and the exact-match rate.
pub fn score_predictions(preds: &[Prediction]) -> (SubtokenCounts, f64) {
    let mut counts = SubtokenCounts::default();
    let mut exact = 0;
    for p in preds {
        let gold = split_subwords(&p.gold);
        counts.add(&p.predicted, &gold);
        let mut a = p.predicted.clone();
        let mut b = gold;
        a.sort();
        b.sort();
        exact += usize::from(a == b);
    }
    let rate = if preds.is_empty() { 0.0 } else { exact as f64 / preds.len() as f64 };
    (counts, rate)
}

pub fn write_predictions_tsv<W: Write>(mut w: W, preds: &[Prediction]) -> io::Result<()> {
    writeln!(w, "program_id\tgold_name\tpredicted_subwords\tprecision\trecall\tf1")?;
    for p in preds {
        writeln!(w, "{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}", p.program_id, p.gold, p.predicted.join(" "), p.precision, p.recall, p.f1)?;
    }
    Ok(())
}

/// Longest gold name plus slack, used as the decoding limit.
pub const MAX_NAME_LEN: usize = 6;

/// Trains in place; early-stops on validation micro-F1.
pub fn train_namer(model: &mut NameModel, train: &[NamedProgram], valid: &[NamedProgram], cfg: &TrainConfig, seed: u64) -> Result<Vec<EpochMetrics>, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyDataset);
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
            let targets: Vec<Vec<usize>> = items.iter().map(|e| shape.names.target(&e.name)).collect();
            let mut g = Graph::new(p);
            let l = shape.loss(&mut g, &batch, &targets)?;
            let v = g.value(l).scalar_value();
            let s = g.scale(l, scale);
            g.backward(s, grads)?;
            Ok(v)
        },
        |p| {
            let eval_set = if valid.is_empty() { train } else { valid };
            let mut m = shape.clone();
            m.params = p.clone();
            let preds = predict_names(&m, eval_set, MAX_NAME_LEN, cfg.chunk)?;
            let (counts, exact) = score_predictions(&preds);
            let f1 = counts.prf().f1;
            Ok((exact, f1, f1))
        },
    );
    model.params = params;
    result
}
