//! The trace encoder (statement RNN, state RNN, fusion, flow RNN, pooling)
//! and the classification head.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::config::{Ablation, ModelConfig};
use super::rnn::{encode_sequences, Rnn};
use super::vocab::Vocab;
use super::ModelError;
use crate::minilang::{Program, StatementId};
use crate::numcore::{softmax, Graph, NumError, ParamId, ParamSet, Tensor, Var};
use crate::trace_model::{BlendedTrace, ProgramTraces};

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedStep {
    /// Index into `EncodedProgram::statements`.
    pub stmt: usize,
    /// Indices into `EncodedProgram::states`, one per concrete trace.
    pub states: Vec<usize>,
}

/// A program's blended traces as vocabulary ids, with statements and states
/// deduplicated.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedProgram {
    pub statements: Vec<Vec<usize>>,
    pub states: Vec<Vec<usize>>,
    pub paths: Vec<Vec<EncodedStep>>,
}

impl EncodedProgram {
    /// Keeps the first `max_paths` traces, truncates each to
    /// `max_trace_len`, and uses the first `n_eps` concretes of every pair.
    pub fn from_blended(vocab: &Vocab, program: &Program, blended: &[BlendedTrace], cfg: &ModelConfig) -> Result<EncodedProgram, ModelError> {
        if blended.is_empty() {
            return Err(ModelError::BadInput(format!("{}: no blended traces", program.name)));
        }
        let n = if cfg.ablation.uses_states() { cfg.n_eps } else { 0 };
        let mut stmt_ix: HashMap<StatementId, usize> = HashMap::new();
        let mut state_ix: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut out = EncodedProgram { statements: Vec::new(), states: Vec::new(), paths: Vec::new() };
        for bt in blended.iter().take(cfg.max_paths) {
            if bt.is_empty() {
                return Err(ModelError::BadInput("empty blended trace".into()));
            }
            if bt.concrete_count < n {
                return Err(ModelError::BadInput(format!("path has {} concretes, model needs {n}", bt.concrete_count)));
            }
            let mut steps = Vec::with_capacity(bt.len().min(cfg.max_trace_len));
            for pair in bt.pairs.iter().take(cfg.max_trace_len) {
                let stmt = *stmt_ix.entry(pair.statement).or_insert_with(|| {
                    out.statements.push(vocab.encode_tokens(program.statement_tokens(pair.statement)));
                    out.statements.len() - 1
                });
                let states = pair.states[..n]
                    .iter()
                    .map(|s| {
                        let toks = vocab.encode_state(s);
                        *state_ix.entry(toks.clone()).or_insert_with(|| {
                            out.states.push(toks);
                            out.states.len() - 1
                        })
                    })
                    .collect();
                steps.push(EncodedStep { stmt, states });
            }
            out.paths.push(steps);
        }
        Ok(out)
    }

    pub fn from_traces(vocab: &Vocab, program: &Program, traces: &ProgramTraces, cfg: &ModelConfig) -> Result<EncodedProgram, ModelError> {
        EncodedProgram::from_blended(vocab, program, &traces.blended(), cfg)
    }

    /// A copy with the paths in the given order.
    pub fn permuted(&self, order: &[usize]) -> EncodedProgram {
        EncodedProgram { statements: self.statements.clone(), states: self.states.clone(), paths: order.iter().map(|&i| self.paths[i].clone()).collect() }
    }
}

/// Encoder weights: embedding table, RNN1 (statements), RNN2 (states), the
/// a1 scorer and RNN3 (flow).
#[derive(Clone, Debug)]
pub struct Encoder {
    pub embed: ParamId,
    pub rnn1: Rnn,
    pub rnn2: Rnn,
    pub rnn3: Rnn,
    pub a1_h: ParamId,
    pub a1_c: ParamId,
    pub a1_b: ParamId,
    pub a1_out: ParamId,
}

/// Attention weights of one fused step over the paths active at that step.
#[derive(Clone, Debug)]
pub struct StepWeights {
    pub step: usize,
    /// Batch-level path indices, one per weight row.
    pub paths: Vec<usize>,
    /// `[paths, group]`; `None` when the statement vector passes through.
    pub weights: Option<Var>,
}

pub struct EncoderOutput {
    /// `[programs, d_h]`
    pub program_emb: Var,
    /// `[paths, d_h]` in batch order (program by program).
    pub path_emb: Var,
    pub path_owner: Vec<usize>,
    /// Every prefix state `H^e_{i_j}`, `[annotations, d_h]`.
    pub annotations: Var,
    pub annotation_owner: Vec<usize>,
    pub weights: Vec<StepWeights>,
}

impl Encoder {
    pub fn register(ps: &mut ParamSet, cfg: &ModelConfig, vocab_len: usize) -> Encoder {
        let (d_e, d_h) = (cfg.embed, cfg.hidden);
        let embed = ps.add("embed", Tensor::zeros(vocab_len, d_e));
        let rnn1 = Rnn::register(ps, "rnn1", cfg.cell, d_e, d_h);
        let rnn2 = Rnn::register(ps, "rnn2", cfg.cell, d_e, d_h);
        let a1_h = ps.add("a1.w_h", Tensor::zeros(d_h, d_h));
        let a1_c = ps.add("a1.w_c", Tensor::zeros(d_h, d_h));
        let a1_b = ps.add("a1.b", Tensor::zeros(1, d_h));
        let a1_out = ps.add("a1.w_out", Tensor::zeros(d_h, 1));
        let rnn3 = Rnn::register(ps, "rnn3", cfg.cell, d_h, d_h);
        Encoder { embed, rnn1, rnn2, rnn3, a1_h, a1_c, a1_b, a1_out }
    }

    fn table(&self, g: &mut Graph, rnn: &Rnn) -> Result<Vec<Var>, NumError> {
        let e = g.param(self.embed);
        rnn.project(g, e)
    }

    /// Final RNN1 states for `seqs`.
    pub fn statements(&self, g: &mut Graph, seqs: &[Vec<usize>]) -> Result<Var, NumError> {
        let t = self.table(g, &self.rnn1)?;
        encode_sequences(g, &self.rnn1, &t, seqs)
    }

    /// Final RNN2 states for `seqs`.
    pub fn states(&self, g: &mut Graph, seqs: &[Vec<usize>]) -> Result<Var, NumError> {
        let t = self.table(g, &self.rnn2)?;
        encode_sequences(g, &self.rnn2, &t, seqs)
    }

    /// Fuses `a` groups of `group` item rows selected from `items` by `idx`.
    /// `proj` is `items · a1.w_h`; `prev_c` is `H_prev · a1.w_c` (at least
    /// `a` rows) or `None` on the first pair.
    #[allow(clippy::too_many_arguments)]
    fn fuse(
        &self,
        g: &mut Graph,
        ablation: Ablation,
        group: usize,
        items: Var,
        proj: Option<Var>,
        idx: &[usize],
        a: usize,
        prev_c: Option<Var>,
    ) -> Result<(Var, Option<Var>), NumError> {
        let values = g.gather_rows(items, idx)?;
        if ablation == Ablation::StaticOnly {
            return Ok((values, None));
        }
        let weights = match (ablation, proj, prev_c) {
            (Ablation::NoAttention, _, _) | (_, _, None) | (_, None, _) => g.input(Tensor::filled(a, group, 1.0 / group as f64)),
            (_, Some(proj), Some(prev_c)) => {
                let p = g.gather_rows(proj, idx)?;
                let rep: Vec<usize> = (0..a).flat_map(|r| std::iter::repeat_n(r, group)).collect();
                let c = g.gather_rows(prev_c, &rep)?;
                let pre = g.add(p, c)?;
                let b = g.param(self.a1_b);
                let pre = g.add_row(pre, b)?;
                let hid = g.tanh(pre);
                let w_out = g.param(self.a1_out);
                let scores = g.matmul(hid, w_out)?;
                let scores = g.reshape(scores, a, group)?;
                g.softmax_rows(scores)
            }
        };
        let fused = g.group_weighted_sum(values, weights)?;
        Ok((fused, Some(weights)))
    }

    pub fn forward(&self, g: &mut Graph, cfg: &ModelConfig, batch: &[&EncodedProgram]) -> Result<EncoderOutput, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::BadInput("empty batch".into()));
        }
        let ablation = cfg.ablation;
        let group = cfg.group_size();
        let d_h = cfg.hidden;

        // Batch-wide item table: statements first, then states.
        let mut stmt_seqs: Vec<Vec<usize>> = Vec::new();
        let mut state_seqs: Vec<Vec<usize>> = Vec::new();
        let mut offsets = Vec::with_capacity(batch.len());
        for p in batch {
            offsets.push((stmt_seqs.len(), state_seqs.len()));
            if ablation.uses_statements() {
                stmt_seqs.extend(p.statements.iter().cloned());
            }
            if ablation.uses_states() {
                state_seqs.extend(p.states.iter().cloned());
            }
        }
        let n_stmt = stmt_seqs.len();
        let mut parts = Vec::new();
        if !stmt_seqs.is_empty() {
            parts.push(self.statements(g, &stmt_seqs)?);
        }
        if !state_seqs.is_empty() {
            parts.push(self.states(g, &state_seqs)?);
        }
        let items = if parts.len() == 1 { parts[0] } else { g.concat_rows(&parts)? };
        let attends = matches!(ablation, Ablation::Full | Ablation::DynamicOnly);
        let proj = if attends {
            let w = g.param(self.a1_h);
            Some(g.matmul(items, w)?)
        } else {
            None
        };

        // Flatten paths; process them longest first so the active set at every
        // step is a prefix.
        struct PathRef<'a> {
            owner: usize,
            steps: &'a [EncodedStep],
            stmt_off: usize,
            state_off: usize,
        }
        let mut paths = Vec::new();
        for (b, p) in batch.iter().enumerate() {
            if p.paths.is_empty() {
                return Err(ModelError::BadInput("program without paths".into()));
            }
            for steps in &p.paths {
                if steps.is_empty() {
                    return Err(ModelError::BadInput("empty path".into()));
                }
                if ablation.uses_states() && steps.iter().any(|s| s.states.len() < cfg.n_eps) {
                    return Err(ModelError::BadInput(format!("path step has fewer than {} states", cfg.n_eps)));
                }
                paths.push(PathRef { owner: b, steps, stmt_off: offsets[b].0, state_off: n_stmt + offsets[b].1 });
            }
        }
        let mut order: Vec<usize> = (0..paths.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(paths[i].steps.len()));
        let max_len = paths[order[0]].steps.len();

        let mut hs: Vec<Var> = Vec::with_capacity(max_len);
        let mut weights = Vec::with_capacity(max_len);
        let mut h_prev: Option<Var> = None;
        for j in 0..max_len {
            let a = order.iter().take_while(|&&i| paths[i].steps.len() > j).count();
            let mut idx = Vec::with_capacity(a * group);
            for &pi in &order[..a] {
                let p = &paths[pi];
                let st = &p.steps[j];
                if ablation.uses_statements() {
                    idx.push(p.stmt_off + st.stmt);
                }
                if ablation.uses_states() {
                    idx.extend(st.states[..cfg.n_eps].iter().map(|&s| p.state_off + s));
                }
            }
            let prev_c = match (attends, h_prev) {
                (true, Some(h)) => {
                    let w = g.param(self.a1_c);
                    Some(g.matmul(h, w)?)
                }
                _ => None,
            };
            let (fused, w) = self.fuse(g, ablation, group, items, proj, &idx, a, prev_c)?;
            weights.push(StepWeights { step: j, paths: order[..a].to_vec(), weights: w });
            let xp = self.rnn3.project(g, fused)?;
            let prev = match h_prev {
                Some(h) if g.shape(h).0 > a => Some(g.gather_rows(h, &(0..a).collect::<Vec<_>>())?),
                other => other,
            };
            let h = self.rnn3.step(g, &xp, prev)?;
            hs.push(h);
            h_prev = Some(h);
        }

        let mut step_off = Vec::with_capacity(hs.len());
        let mut total = 0;
        for &h in &hs {
            step_off.push(total);
            total += g.shape(h).0;
        }
        let annotations = if hs.len() == 1 { hs[0] } else { g.concat_rows(&hs)? };
        let mut annotation_owner = vec![0; total];
        let mut final_row = vec![0; paths.len()];
        for (slot, &pi) in order.iter().enumerate() {
            let len = paths[pi].steps.len();
            for off in &step_off[..len] {
                annotation_owner[off + slot] = paths[pi].owner;
            }
            final_row[pi] = step_off[len - 1] + slot;
        }
        let path_emb = g.gather_rows(annotations, &final_row)?;
        let path_owner: Vec<usize> = paths.iter().map(|p| p.owner).collect();

        let mut pooled = Vec::with_capacity(batch.len());
        let mut start = 0;
        for ex in batch {
            let end = start + ex.paths.len();
            let rows: Vec<usize> = (start..end).collect();
            let mine = g.gather_rows(path_emb, &rows)?;
            pooled.push(g.max_rows(mine)?);
            start = end;
        }
        let program_emb = if pooled.len() == 1 { pooled[0] } else { g.concat_rows(&pooled)? };
        debug_assert_eq!(g.shape(program_emb), (batch.len(), d_h));
        Ok(EncoderOutput { program_emb, path_emb, path_owner, annotations, annotation_owner, weights })
    }
}

/// Output and weights of one fusion step.
#[derive(Clone, Debug, PartialEq)]
pub struct Fused {
    pub output: Vec<f64>,
    /// One weight per fused vector (statement first); a single 1.0 under
    /// `static_only`.
    pub alpha: Vec<f64>,
}

/// Element-wise maximum over trace embeddings.
pub fn pool_program(traces: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
    let first = traces.first().ok_or_else(|| ModelError::BadInput("pooling needs at least one trace".into()))?;
    let mut out = first.clone();
    for t in &traces[1..] {
        if t.len() != out.len() {
            return Err(ModelError::BadInput("trace embeddings differ in length".into()));
        }
        for (o, x) in out.iter_mut().zip(t) {
            if *x > *o {
                *o = *x;
            }
        }
    }
    Ok(out)
}

/// The classifier: encoder plus `softmax(Z · H_P)`.
#[derive(Clone, Debug)]
pub struct Liger {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: ParamSet,
    pub encoder: Encoder,
    pub z: ParamId,
}

impl Liger {
    pub fn new(config: ModelConfig, vocab: Vocab, seed: u64) -> Result<Liger, ModelError> {
        config.validate().map_err(ModelError::Config)?;
        let mut params = ParamSet::new();
        let encoder = Encoder::register(&mut params, &config, vocab.len());
        let z = params.add("z", Tensor::zeros(config.hidden, config.labels));
        params.init_uniform(seed);
        Ok(Liger { config, vocab, params, encoder, z })
    }

    pub fn config_hash(&self) -> String {
        config_hash(&serde_json::to_string(&self.config).expect("config serializes"), &self.vocab, &[])
    }

    pub fn encode(&self, program: &Program, blended: &[BlendedTrace]) -> Result<EncodedProgram, ModelError> {
        EncodedProgram::from_blended(&self.vocab, program, blended, &self.config)
    }

    /// Logits `[batch, labels]` on a graph over `params`.
    pub fn logits(&self, g: &mut Graph, batch: &[&EncodedProgram]) -> Result<(Var, EncoderOutput), ModelError> {
        let enc = self.encoder.forward(g, &self.config, batch)?;
        let z = g.param(self.z);
        let logits = g.matmul(enc.program_emb, z)?;
        Ok((logits, enc))
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, g: &mut Graph, batch: &[&EncodedProgram], labels: &[usize]) -> Result<Var, ModelError> {
        let (logits, _) = self.logits(g, batch)?;
        let ce = g.cross_entropy(logits, labels)?;
        Ok(g.scale(ce, 1.0 / batch.len() as f64))
    }

    pub fn probabilities(&self, batch: &[&EncodedProgram]) -> Result<Vec<Vec<f64>>, ModelError> {
        let mut g = Graph::new(&self.params);
        let (logits, _) = self.logits(&mut g, batch)?;
        let t = g.value(logits);
        Ok((0..t.rows()).map(|r| softmax(t.row_slice(r))).collect())
    }

    pub fn predict(&self, batch: &[&EncodedProgram]) -> Result<Vec<usize>, ModelError> {
        Ok(self.probabilities(batch)?.iter().map(|p| argmax(p)).collect())
    }

    /// Program embedding `H_P` of one program.
    pub fn embed_program(&self, ex: &EncodedProgram) -> Result<Vec<f64>, ModelError> {
        let mut g = Graph::new(&self.params);
        let enc = self.encoder.forward(&mut g, &self.config, &[ex])?;
        Ok(g.value(enc.program_emb).data().to_vec())
    }

    /// `softmax(Z · H_P)`.
    pub fn classify(&self, h_p: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut g = Graph::new(&self.params);
        let h = g.input(Tensor::row(h_p.to_vec()));
        let z = g.param(self.z);
        let l = g.matmul(h, z)?;
        Ok(softmax(g.value(l).data()))
    }

    pub fn encode_statement(&self, tokens: &[usize]) -> Result<Vec<f64>, ModelError> {
        if tokens.is_empty() {
            return Err(ModelError::BadInput("empty statement".into()));
        }
        let mut g = Graph::new(&self.params);
        let v = self.encoder.statements(&mut g, &[tokens.to_vec()])?;
        Ok(g.value(v).data().to_vec())
    }

    pub fn encode_state(&self, tokens: &[usize]) -> Result<Vec<f64>, ModelError> {
        if tokens.is_empty() {
            return Err(ModelError::BadInput("empty state".into()));
        }
        let mut g = Graph::new(&self.params);
        let v = self.encoder.states(&mut g, &[tokens.to_vec()])?;
        Ok(g.value(v).data().to_vec())
    }

    /// One fusion step on explicit vectors. `h_prev = None` marks the first
    /// ordered pair.
    pub fn fuse_step(&self, h_stmt: &[f64], h_states: &[Vec<f64>], h_prev: Option<&[f64]>) -> Result<Fused, ModelError> {
        let d = self.config.hidden;
        let ablation = self.config.ablation;
        if h_stmt.len() != d || h_states.iter().any(|s| s.len() != d) || h_prev.is_some_and(|h| h.len() != d) {
            return Err(ModelError::BadInput("fuse_step dimension mismatch".into()));
        }
        if ablation != Ablation::StaticOnly && h_states.len() != self.config.n_eps {
            return Err(ModelError::BadInput(format!("expected {} state vectors, got {}", self.config.n_eps, h_states.len())));
        }
        let mut rows: Vec<f64> = Vec::new();
        if ablation.uses_statements() {
            rows.extend_from_slice(h_stmt);
        }
        if ablation.uses_states() {
            for s in h_states {
                rows.extend_from_slice(s);
            }
        }
        let group = self.config.group_size();
        let mut g = Graph::new(&self.params);
        let items = g.input(Tensor::matrix(group, d, rows));
        let attends = matches!(ablation, Ablation::Full | Ablation::DynamicOnly);
        let proj = if attends {
            let w = g.param(self.encoder.a1_h);
            Some(g.matmul(items, w)?)
        } else {
            None
        };
        let prev_c = match (attends, h_prev) {
            (true, Some(h)) => {
                let h = g.input(Tensor::row(h.to_vec()));
                let w = g.param(self.encoder.a1_c);
                Some(g.matmul(h, w)?)
            }
            _ => None,
        };
        let idx: Vec<usize> = (0..group).collect();
        let (out, w) = self.encoder.fuse(&mut g, ablation, group, items, proj, &idx, 1, prev_c)?;
        let alpha = match w {
            Some(w) => g.value(w).data().to_vec(),
            None => vec![1.0],
        };
        Ok(Fused { output: g.value(out).data().to_vec(), alpha })
    }

    /// Final flow state and every prefix state of one blended trace.
    pub fn encode_blended(&self, program: &Program, bt: &BlendedTrace) -> Result<(Vec<f64>, Vec<Vec<f64>>), ModelError> {
        let ex = self.encode(program, std::slice::from_ref(bt))?;
        let mut g = Graph::new(&self.params);
        let enc = self.encoder.forward(&mut g, &self.config, &[&ex])?;
        let ann = g.value(enc.annotations);
        let prefixes = (0..ann.rows()).map(|r| ann.row_slice(r).to_vec()).collect();
        Ok((g.value(enc.path_emb).data().to_vec(), prefixes))
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// sha256 over the model config, the token vocabulary and any extra token
/// lists, as hex.
pub fn config_hash(config_json: &str, vocab: &Vocab, extra: &[&[String]]) -> String {
    let mut h = Sha256::new();
    h.update(config_json.as_bytes());
    for list in std::iter::once(vocab.tokens()).chain(extra.iter().copied()) {
        h.update(b"\x00");
        for t in list {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
