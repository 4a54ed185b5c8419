use super::*;
use crate::minilang::{execute, parse, ExecLimits, Program, Value};
use crate::numcore::{Gradients, Graph, Tensor};
use crate::trace_model::{group_by_path, BlendedTrace, PathTraces};

fn small(ablation: Ablation, n_eps: usize) -> ModelConfig {
    ModelConfig { hidden: 6, embed: 5, ablation, n_eps, max_trace_len: 50, max_paths: 6, labels: 3, cell: CellKind::Vanilla }
}

fn traced(src: &str, inputs: &[Vec<Value>], n_eps: usize) -> (Program, Vec<BlendedTrace>) {
    let p = parse(src).unwrap();
    let runs: Vec<_> = inputs.iter().map(|i| execute(&p, i, ExecLimits::default()).unwrap()).collect();
    let groups = group_by_path(runs);
    let bts = groups
        .iter()
        .filter(|g| g.traces.len() >= n_eps)
        .map(|g| PathTraces::from_group(g, n_eps).blended())
        .collect();
    (p, bts)
}

fn ints(xs: &[i64]) -> Vec<Vec<Value>> {
    xs.iter().map(|&x| vec![Value::Int(x)]).collect()
}

const ABS: &str = "fn f(x: int) { y = x; if x < 0 { y = 0 - x; } return y; }";

fn model(cfg: ModelConfig, programs: &[&Program], seed: u64) -> Liger {
    Liger::new(cfg, Vocab::build(programs.iter().copied()), seed).unwrap()
}

#[test]
fn statement_and_state_shapes() {
    let (p, _) = traced(ABS, &ints(&[1]), 1);
    let m = model(small(Ablation::Full, 2), &[&p], 1);
    let toks = m.vocab.encode_tokens(&["i".into(), "+=".into(), "i".into(), "x".into()]);
    assert_eq!(m.encode_statement(&toks).unwrap().len(), 6);
    assert!(m.encode_statement(&[]).is_err());
    let a = m.encode_statement(&m.vocab.encode_tokens(&["i".into(), "+=".into(), "i".into()])).unwrap();
    let b = m.encode_statement(&m.vocab.encode_tokens(&["i".into(), "*=".into(), "2".into()])).unwrap();
    assert_ne!(a, b);
    let s = m.vocab.encode_state(&crate::minilang::ProgramState(vec![Value::Int(7)]));
    let e = m.encode_state(&s).unwrap();
    assert_eq!(e.len(), 6);
    assert_eq!(e, m.encode_state(&s).unwrap());
}

#[test]
fn zero_weights_give_zero_vectors() {
    for cell in [CellKind::Vanilla, CellKind::Gru] {
        let (p, bts) = traced(ABS, &ints(&[1, 2]), 2);
        let mut m = model(ModelConfig { cell, ..small(Ablation::Full, 2) }, &[&p], 1);
        m.params.zero_all();
        let toks = m.vocab.encode_tokens(p.statement_tokens(crate::minilang::StatementId(0)));
        assert!(m.encode_statement(&toks).unwrap().iter().all(|&x| x == 0.0));
        let (h, prefixes) = m.encode_blended(&p, &bts[0]).unwrap();
        assert!(h.iter().all(|&x| x == 0.0));
        assert_eq!(prefixes.len(), bts[0].len());
    }
}

#[test]
fn equal_values_encode_equally() {
    let (p1, b1) = traced("fn f(x: int) { y = x + x; return y; }", &ints(&[3]), 1);
    let (p2, b2) = traced("fn f(x: int) { y = x * 2; return y; }", &ints(&[3]), 1);
    let m = model(small(Ablation::Full, 1), &[&p1, &p2], 4);
    let last = |b: &[BlendedTrace]| b[0].pairs[b[0].len() - 1].states[0].clone();
    let s1 = m.vocab.encode_state(&last(&b1));
    let s2 = m.vocab.encode_state(&last(&b2));
    assert_eq!(m.encode_state(&s1).unwrap(), m.encode_state(&s2).unwrap());
}

#[test]
fn identical_blended_traces_give_identical_embeddings() {
    let src = "fn g(x: int) { y = x; if x < 0 { y = 0 - x; } return y; }";
    let (p1, b1) = traced(ABS, &ints(&[1, 2, -1, -2]), 2);
    let (p2, b2) = traced(src, &ints(&[1, 2, -1, -2]), 2);
    let m = model(small(Ablation::Full, 2), &[&p1, &p2], 4);
    let e1 = m.embed_program(&m.encode(&p1, &b1).unwrap()).unwrap();
    let e2 = m.embed_program(&m.encode(&p2, &b2).unwrap()).unwrap();
    assert_eq!(e1, e2);
}

#[test]
fn fusion_weights() {
    let (p, _) = traced(ABS, &ints(&[1]), 1);
    let m = model(small(Ablation::Full, 2), &[&p], 2);
    let v = |k: f64| (0..6).map(|i| (i as f64 * 0.1 + k).sin()).collect::<Vec<_>>();
    let first = m.fuse_step(&v(0.0), &[v(1.0), v(2.0)], None).unwrap();
    assert_eq!(first.alpha, vec![1.0 / 3.0; 3]);
    let later = m.fuse_step(&v(0.0), &[v(1.0), v(2.0)], Some(&v(3.0))).unwrap();
    assert!((later.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(later.alpha.iter().all(|&a| a > 0.0));
    assert!(m.fuse_step(&v(0.0), &[v(1.0)], None).is_err());

    let s = Liger { config: small(Ablation::StaticOnly, 0), ..m.clone() };
    let out = s.fuse_step(&v(0.0), &[], Some(&v(3.0))).unwrap();
    assert_eq!(out.output, v(0.0));

    let mut cfg = small(Ablation::NoAttention, 4);
    cfg.hidden = 6;
    let n = Liger { config: cfg, ..m.clone() };
    let four = [v(1.0), v(2.0), v(3.0), v(4.0)];
    let out = n.fuse_step(&v(0.0), &four, Some(&v(5.0))).unwrap();
    assert_eq!(out.alpha, vec![0.2; 5]);

    let d = Liger { config: small(Ablation::DynamicOnly, 2), ..m.clone() };
    let out = d.fuse_step(&v(0.0), &[v(1.0), v(2.0)], Some(&v(3.0))).unwrap();
    assert_eq!(out.alpha.len(), 2);
}

#[test]
fn fusion_closed_form() {
    // a1 = w_out · tanh(W_h h + W_c H_prev + b) with W_h = I and W_c = b = 0
    // scores ln 2 for the statement and 0 for two zero states.
    let (p, _) = traced(ABS, &ints(&[1]), 1);
    let mut m = model(small(Ablation::Full, 2), &[&p], 2);
    let e = &m.encoder;
    let (wh, wc, b, wo) = (e.a1_h, e.a1_c, e.a1_b, e.a1_out);
    let mut eye = Tensor::zeros(6, 6);
    for i in 0..6 {
        eye.data_mut()[i * 6 + i] = 1.0;
    }
    *m.params.get_mut(wh) = eye;
    m.params.get_mut(wc).data_mut().iter_mut().for_each(|x| *x = 0.0);
    m.params.get_mut(b).data_mut().iter_mut().for_each(|x| *x = 0.0);
    let mut out = vec![0.0; 6];
    out[0] = 2f64.ln() / 0.5f64.tanh();
    *m.params.get_mut(wo) = Tensor::matrix(6, 1, out);
    let mut h = vec![0.0; 6];
    h[0] = 0.5;
    let f = m.fuse_step(&h, &[vec![0.0; 6], vec![0.0; 6]], Some(&[0.3; 6])).unwrap();
    for (a, want) in f.alpha.iter().zip([0.5, 0.25, 0.25]) {
        assert!((a - want).abs() < 1e-12);
    }
    assert!((f.output[0] - 0.25).abs() < 1e-12);
}

#[test]
fn batched_fusion_matches_single_step() {
    let (p, bts) = traced(ABS, &ints(&[1, 2, 3, -1, -2, -3]), 3);
    let m = model(small(Ablation::Full, 3), &[&p], 8);
    let (_, prefixes) = m.encode_blended(&p, &bts[1]).unwrap();
    let ex = m.encode(&p, std::slice::from_ref(&bts[1])).unwrap();
    // Step 1 of the path, rebuilt from explicit vectors.
    let st = &ex.paths[0][1];
    let hs = m.encode_statement(&ex.statements[st.stmt]).unwrap();
    let hv: Vec<Vec<f64>> = st.states.iter().map(|&s| m.encode_state(&ex.states[s]).unwrap()).collect();
    let fused = m.fuse_step(&hs, &hv, Some(&prefixes[0])).unwrap();

    let mut g = Graph::new(&m.params);
    let enc = m.encoder.forward(&mut g, &m.config, &[&ex]).unwrap();
    let w = enc.weights[1].weights.unwrap();
    for (a, b) in g.value(w).data().iter().zip(&fused.alpha) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn pooling() {
    assert_eq!(pool_program(&[vec![1.0, -2.0], vec![0.0, 3.0]]).unwrap(), vec![1.0, 3.0]);
    assert_eq!(pool_program(&[vec![4.0, 5.0]]).unwrap(), vec![4.0, 5.0]);
    assert!(pool_program(&[]).is_err());
}

#[test]
fn path_order_does_not_change_embedding() {
    let src = "fn f(x: int) { y = 0; if x > 2 { y = 1; } else { if x < -2 { y = 2; } } return y; }";
    let xs: Vec<i64> = (-9..=9).collect();
    let (p, bts) = traced(src, &ints(&xs), 2);
    assert_eq!(bts.len(), 3);
    let m = model(small(Ablation::Full, 2), &[&p], 3);
    let ex = m.encode(&p, &bts).unwrap();
    let base = m.embed_program(&ex).unwrap();
    for order in [[2, 1, 0], [1, 2, 0], [0, 2, 1]] {
        assert_eq!(m.embed_program(&ex.permuted(&order)).unwrap(), base);
    }
    // Batching with another program gives the same rows.
    let mut g = Graph::new(&m.params);
    let other = ex.permuted(&[1]);
    let enc = m.encoder.forward(&mut g, &m.config, &[&other, &ex]).unwrap();
    assert_eq!(g.value(enc.program_emb).row_slice(1), base.as_slice());
}

#[test]
fn zero_head_is_uniform() {
    let (p, bts) = traced(ABS, &ints(&[1, 2]), 2);
    let mut m = model(small(Ablation::Full, 2), &[&p], 3);
    m.params.get_mut(m.z).data_mut().iter_mut().for_each(|x| *x = 0.0);
    let ex = m.encode(&p, &bts).unwrap();
    let probs = m.probabilities(&[&ex]).unwrap();
    assert!(probs[0].iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    let mut g = Graph::new(&m.params);
    let l = m.loss(&mut g, &[&ex], &[1]).unwrap();
    assert!((g.value(l).scalar_value() - 3f64.ln()).abs() < 1e-12);
    let c = m.classify(&[0.5; 6]).unwrap();
    assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

/// Central differences on a two-pair, two-concrete trace through the whole
/// classifier. Relative error is `|a - n| / max(|a|, |n|, 1e-5)`.
#[test]
fn end_to_end_gradient_check() {
    for cell in [CellKind::Vanilla, CellKind::Gru] {
        let (p, bts) = traced("fn f(x: int) { y = x * 2; return y; }", &ints(&[1, -3]), 2);
        assert_eq!(bts[0].len(), 2);
        let mut m = model(ModelConfig { cell, ..small(Ablation::Full, 2) }, &[&p], 11);
        // Larger weights keep the attention non-trivial.
        for id in m.params.ids().collect::<Vec<_>>() {
            m.params.get_mut(id).data_mut().iter_mut().for_each(|x| *x *= 8.0);
        }
        let ex = m.encode(&p, &bts).unwrap();
        let loss_at = |params: &crate::numcore::ParamSet| {
            let mut g = Graph::new(params);
            let l = m.loss(&mut g, &[&ex], &[2]).unwrap();
            g.value(l).scalar_value()
        };
        let mut grads = Gradients::zeros_like(&m.params);
        {
            let mut g = Graph::new(&m.params);
            let l = m.loss(&mut g, &[&ex], &[2]).unwrap();
            g.backward(l, &mut grads).unwrap();
        }
        let mut ps = m.params.clone();
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        for id in m.params.ids() {
            for k in 0..ps.get(id).len() {
                let a = grads.get(id).data()[k];
                let orig = ps.get(id).data()[k];
                ps.get_mut(id).data_mut()[k] = orig + 1e-5;
                let up = loss_at(&ps);
                ps.get_mut(id).data_mut()[k] = orig - 1e-5;
                let down = loss_at(&ps);
                ps.get_mut(id).data_mut()[k] = orig;
                let n = (up - down) / 2e-5;
                worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-5));
                checked += 1;
            }
        }
        assert!(checked > 100);
        assert!(worst < 1e-3, "{cell:?}: worst rel err {worst}");
    }
}

fn toy_dataset(m: &Liger, progs: &[(&Program, &[BlendedTrace], usize)]) -> Vec<LabeledProgram> {
    progs
        .iter()
        .enumerate()
        .map(|(i, (p, b, l))| LabeledProgram { id: format!("p{i}"), program: m.encode(p, b).unwrap(), label: *l })
        .collect()
}

#[test]
fn overfits_one_batch() {
    let (p1, b1) = traced(ABS, &ints(&[1, 2, -1, -2]), 2);
    let (p2, b2) = traced("fn f(x: int) { y = x * 2; return y; }", &ints(&[1, 2]), 2);
    let mut m = model(small(Ablation::Full, 2), &[&p1, &p2], 5);
    let data = toy_dataset(&m, &[(&p1, &b1, 0), (&p2, &b2, 1)]);
    let batch: Vec<&EncodedProgram> = data.iter().map(|d| &d.program).collect();
    let mut adam = crate::numcore::AdamState::new(&m.params, crate::numcore::AdamConfig { lr: 1e-2, ..Default::default() });
    let mut last = f64::INFINITY;
    for _ in 0..10 {
        let mut grads = Gradients::zeros_like(&m.params);
        let loss = {
            let mut g = Graph::new(&m.params);
            let l = m.loss(&mut g, &batch, &[0, 1]).unwrap();
            g.backward(l, &mut grads).unwrap();
            g.value(l).scalar_value()
        };
        assert!(loss < last, "{loss} !< {last}");
        last = loss;
        adam.step(&mut m.params, &grads).unwrap();
    }
}

#[test]
fn training_is_deterministic_and_degenerate_labels_are_trivial() {
    let (p1, b1) = traced(ABS, &ints(&[1, 2, -1, -2]), 2);
    let (p2, b2) = traced("fn f(x: int) { y = x * 2; return y; }", &ints(&[1, 2]), 2);
    let cfg = TrainConfig { epochs: 3, batch: 2, lr: 1e-2, patience: 5, clip: 5.0, chunk: 1 };
    let run = || {
        let mut m = model(small(Ablation::Full, 2), &[&p1, &p2], 5);
        let data = toy_dataset(&m, &[(&p1, &b1, 0), (&p2, &b2, 1), (&p1, &b1, 0)]);
        let h = train_classifier(&mut m, &data, &data, &cfg, 9).unwrap();
        (h, m.params)
    };
    let (h1, p1s) = run();
    let (h2, p2s) = run();
    assert_eq!(h1, h2);
    assert_eq!(p1s, p2s);

    let mut one = model(ModelConfig { labels: 1, ..small(Ablation::Full, 2) }, &[&p1], 5);
    let data = toy_dataset(&one, &[(&p1, &b1, 0), (&p2, &b2, 0)]);
    let h = train_classifier(&mut one, &data, &data, &TrainConfig { epochs: 1, ..cfg }, 1).unwrap();
    assert_eq!(h[0].acc, 1.0);
    assert!(train_classifier(&mut one, &[], &data, &cfg, 1).is_err());
}

#[test]
fn metrics_csv_layout() {
    let mut out = Vec::new();
    write_metrics_csv(&mut out, &[EpochMetrics { epoch: 1, loss: 0.5, acc: 0.25, f1: 0.125 }]).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "epoch,loss,acc,f1\n1,0.500000,0.250000,0.125000\n");
    // Class 0: tp 1, gold 1, pred 2. Class 1: tp 1, gold 2, pred 1. Class 2 absent.
    let (acc, f1) = accuracy_and_macro_f1(&[0, 1, 1], &[0, 1, 0], 3);
    assert!((acc - 2.0 / 3.0).abs() < 1e-12 && (f1 - 2.0 / 3.0).abs() < 1e-12);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn attention_is_a_distribution(seed in 0u64..10_000, k in 1usize..5) {
            let (p, _) = traced(ABS, &ints(&[1]), 1);
            let m = model(small(Ablation::Full, k), &[&p], seed);
            let v = |s: f64| (0..6).map(|i| ((i as f64 + s) * 1.7).sin() * 3.0).collect::<Vec<_>>();
            let states: Vec<Vec<f64>> = (0..k).map(|j| v(seed as f64 + j as f64)).collect();
            let f = m.fuse_step(&v(0.5), &states, Some(&v(9.0))).unwrap();
            prop_assert!((f.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(f.alpha.iter().all(|&a| a > 0.0));
        }
    }
}
