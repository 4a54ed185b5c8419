//! Recurrent cells and a prefix-sharing sequence encoder.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::numcore::{Graph, NumError, ParamId, ParamSet, Tensor, Var};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    /// `h = tanh(W x + V h_prev)`
    #[default]
    Vanilla,
    Gru,
}

/// Weights of one recurrent layer. Vanilla cells have one input and one
/// recurrent matrix; GRU cells have three of each (update, reset, candidate).
#[derive(Clone, Debug)]
pub struct Rnn {
    pub kind: CellKind,
    pub w: Vec<ParamId>,
    pub v: Vec<ParamId>,
    pub hidden: usize,
}

impl Rnn {
    pub fn register(ps: &mut ParamSet, prefix: &str, kind: CellKind, d_in: usize, d_h: usize) -> Rnn {
        let gates: &[&str] = match kind {
            CellKind::Vanilla => &[""],
            CellKind::Gru => &[".z", ".r", ".n"],
        };
        let w = gates.iter().map(|s| ps.add(format!("{prefix}.w{s}"), Tensor::zeros(d_in, d_h))).collect();
        let v = gates.iter().map(|s| ps.add(format!("{prefix}.v{s}"), Tensor::zeros(d_h, d_h))).collect();
        Rnn { kind, w, v, hidden: d_h }
    }

    /// `x · W` for every gate.
    pub fn project(&self, g: &mut Graph, x: Var) -> Result<Vec<Var>, NumError> {
        self.w.iter().map(|&w| {
            let w = g.param(w);
            g.matmul(x, w)
        }).collect()
    }

    /// One step from pre-projected inputs. `h = None` means a zero state.
    pub fn step(&self, g: &mut Graph, xp: &[Var], h: Option<Var>) -> Result<Var, NumError> {
        match self.kind {
            CellKind::Vanilla => {
                let pre = match h {
                    Some(h) => {
                        let v = g.param(self.v[0]);
                        let hv = g.matmul(h, v)?;
                        g.add(xp[0], hv)?
                    }
                    None => xp[0],
                };
                Ok(g.tanh(pre))
            }
            CellKind::Gru => {
                let (rows, _) = g.shape(xp[0]);
                let h = match h {
                    Some(h) => h,
                    None => g.input(Tensor::zeros(rows, self.hidden)),
                };
                let gate = |g: &mut Graph, i: usize, hin: Var| -> Result<Var, NumError> {
                    let v = g.param(self.v[i]);
                    let hv = g.matmul(hin, v)?;
                    g.add(xp[i], hv)
                };
                let z = gate(g, 0, h)?;
                let z = g.sigmoid(z);
                let r = gate(g, 1, h)?;
                let r = g.sigmoid(r);
                let rh = g.mul(r, h)?;
                let n = gate(g, 2, rh)?;
                let n = g.tanh(n);
                let d = g.sub(h, n)?;
                let zd = g.mul(z, d)?;
                g.add(n, zd)
            }
        }
    }
}

/// Runs `rnn` over every sequence of `seqs` and returns the final hidden
/// states, one row per sequence. `table` holds the per-gate projections of
/// the embedding table (`E · W`), so each step only gathers rows. Shared
/// prefixes are computed once.
pub fn encode_sequences(g: &mut Graph, rnn: &Rnn, table: &[Var], seqs: &[Vec<usize>]) -> Result<Var, NumError> {
    if seqs.iter().any(Vec::is_empty) {
        return Err(NumError::Shape("empty sequence".into()));
    }
    // levels[t] holds (parent node at level t-1, token) for trie depth t+1.
    let mut levels: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut lookup: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut ends = Vec::with_capacity(seqs.len());
    for s in seqs {
        let mut parent = 0;
        for (t, &tok) in s.iter().enumerate() {
            if levels.len() <= t {
                levels.push(Vec::new());
            }
            let level = &mut levels[t];
            parent = *lookup.entry((t, parent, tok)).or_insert_with(|| {
                level.push((parent, tok));
                level.len() - 1
            });
        }
        ends.push((s.len() - 1, parent));
    }
    let mut hs: Vec<Var> = Vec::with_capacity(levels.len());
    for (t, level) in levels.iter().enumerate() {
        let toks: Vec<usize> = level.iter().map(|&(_, tok)| tok).collect();
        let xp = table.iter().map(|&tb| g.gather_rows(tb, &toks)).collect::<Result<Vec<_>, _>>()?;
        let prev = if t == 0 {
            None
        } else {
            let parents: Vec<usize> = level.iter().map(|&(p, _)| p).collect();
            Some(g.gather_rows(hs[t - 1], &parents)?)
        };
        hs.push(rnn.step(g, &xp, prev)?);
    }
    let mut offsets = Vec::with_capacity(levels.len());
    let mut total = 0;
    for l in &levels {
        offsets.push(total);
        total += l.len();
    }
    let all = if hs.len() == 1 { hs[0] } else { g.concat_rows(&hs)? };
    let idx: Vec<usize> = ends.iter().map(|&(t, i)| offsets[t] + i).collect();
    g.gather_rows(all, &idx)
}
