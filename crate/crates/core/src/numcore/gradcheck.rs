//! Autodiff against central finite differences.
//!
//! Relative error is `|a - n| / max(|a|, |n|, 1e-5)`; the floor keeps
//! near-zero gradients from turning rounding noise into huge ratios.

use rand::Rng;

use super::*;
use crate::rng::seeded;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-5)
}

/// Checks every parameter scalar of `params` for the loss built by `f`.
fn check<F>(params: &ParamSet, f: F) -> f64
where
    F: Fn(&mut Graph) -> Var,
{
    let mut grads = Gradients::zeros_like(params);
    {
        let mut g = Graph::new(params);
        let loss = f(&mut g);
        g.backward(loss, &mut grads).unwrap();
    }
    let eval = |p: &ParamSet| {
        let mut g = Graph::new(p);
        let l = f(&mut g);
        g.value(l).scalar_value()
    };
    let mut worst: f64 = 0.0;
    let mut p = params.clone();
    for id in params.ids() {
        for k in 0..params.get(id).len() {
            let orig = p.get(id).data()[k];
            p.get_mut(id).data_mut()[k] = orig + H;
            let up = eval(&p);
            p.get_mut(id).data_mut()[k] = orig - H;
            let down = eval(&p);
            p.get_mut(id).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * H);
            worst = worst.max(rel_err(grads.get(id).data()[k], numeric));
        }
    }
    worst
}

fn random(rng: &mut crate::rng::Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn over_points<F>(name: &str, mut case: F)
where
    F: FnMut(&mut crate::rng::Rng) -> f64,
{
    let mut rng = seeded(0x6772_6164);
    for point in 0..100 {
        let e = case(&mut rng);
        assert!(e < TOL, "{name}: point {point} rel err {e}");
    }
}

#[test]
fn two_layer_net() {
    over_points("two_layer", |rng| {
        let mut p = ParamSet::new();
        let w1 = p.add("w1", random(rng, 4, 5));
        let b1 = p.add("b1", random(rng, 1, 5));
        let w2 = p.add("w2", random(rng, 5, 3));
        let x = random(rng, 2, 4);
        let targets = [rng.gen_range(0..3), rng.gen_range(0..3)];
        check(&p, |g| {
            let x = g.input(x.clone());
            let (w1, b1, w2) = (g.param(w1), g.param(b1), g.param(w2));
            let h = g.matmul(x, w1).unwrap();
            let h = g.add_row(h, b1).unwrap();
            let h = g.tanh(h);
            let o = g.matmul(h, w2).unwrap();
            g.cross_entropy(o, &targets).unwrap()
        })
    });
}

#[test]
fn gated_elementwise_ops() {
    over_points("elementwise", |rng| {
        let mut p = ParamSet::new();
        let a = p.add("a", random(rng, 3, 4));
        let b = p.add("b", random(rng, 3, 4));
        check(&p, |g| {
            let (a, b) = (g.param(a), g.param(b));
            let s = g.sigmoid(a);
            let m = g.mul(s, b).unwrap();
            let d = g.sub(m, a).unwrap();
            let d = g.scale(d, 1.7);
            let d = g.add_scalar(d, 0.3);
            let t = g.tanh(d);
            let q = g.mul(t, t).unwrap();
            let e = g.add(q, b).unwrap();
            g.sum(e)
        })
    });
}

#[test]
fn concat_gather_reshape() {
    over_points("structural", |rng| {
        let mut p = ParamSet::new();
        let a = p.add("a", random(rng, 3, 2));
        let b = p.add("b", random(rng, 3, 3));
        let c = p.add("c", random(rng, 2, 5));
        let w = random(rng, 10, 1);
        let idx: Vec<usize> = (0..6).map(|_| rng.gen_range(0..5)).collect();
        check(&p, |g| {
            let (a, b, c) = (g.param(a), g.param(b), g.param(c));
            let ab = g.concat_cols(&[a, b]).unwrap();
            let abc = g.concat_rows(&[ab, c]).unwrap();
            let sel = g.gather_rows(abc, &idx).unwrap();
            let r = g.reshape(sel, 3, 10).unwrap();
            let r = g.tanh(r);
            let w = g.input(w.clone());
            let o = g.matmul(r, w).unwrap();
            let o = g.mul(o, o).unwrap();
            g.sum(o)
        })
    });
}

#[test]
fn attention_pattern() {
    // Softmax scores over groups, then a weighted sum of the group members.
    over_points("attention", |rng| {
        let mut p = ParamSet::new();
        let v = p.add("v", random(rng, 6, 4));
        let w = p.add("w", random(rng, 4, 1));
        let z = p.add("z", random(rng, 4, 3));
        let target = rng.gen_range(0..3);
        check(&p, |g| {
            let (v, w, z) = (g.param(v), g.param(w), g.param(z));
            let s = g.matmul(v, w).unwrap();
            let s = g.reshape(s, 2, 3).unwrap();
            let a = g.softmax_rows(s);
            let h = g.group_weighted_sum(v, a).unwrap();
            let h = g.tanh(h);
            let pooled = g.max_rows(h).unwrap();
            let o = g.matmul(pooled, z).unwrap();
            g.cross_entropy(o, &[target]).unwrap()
        })
    });
}

#[test]
fn recurrent_unroll() {
    over_points("rnn", |rng| {
        let mut p = ParamSet::new();
        let w = p.add("w", random(rng, 3, 4));
        let u = p.add("u", random(rng, 4, 4));
        let xs: Vec<Tensor> = (0..4).map(|_| random(rng, 2, 3)).collect();
        check(&p, |g| {
            let (w, u) = (g.param(w), g.param(u));
            let mut h = g.input(Tensor::zeros(2, 4));
            for x in &xs {
                let x = g.input(x.clone());
                let a = g.matmul(x, w).unwrap();
                let b = g.matmul(h, u).unwrap();
                let s = g.add(a, b).unwrap();
                h = g.tanh(s);
            }
            g.sum(h)
        })
    });
}

#[test]
fn softmax_closed_forms() {
    let u = softmax(&[0.0, 0.0, 0.0]);
    assert!(u.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    let s = softmax(&[2f64.ln(), 0.0, 0.0]);
    for (a, b) in s.iter().zip([0.5, 0.25, 0.25]) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn uniform_cross_entropy_is_ln_k() {
    let p = ParamSet::new();
    let mut g = Graph::new(&p);
    let l = g.input(Tensor::row(vec![0.7; 4]));
    for t in 0..4 {
        let ce = g.cross_entropy(l, &[t]).unwrap();
        assert!((g.value(ce).scalar_value() - 4f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn linear_and_tanh_gradients() {
    let mut p = ParamSet::new();
    let w = p.add("w", Tensor::row(vec![0.5, -2.0, 3.0]));
    let x = Tensor::row(vec![1.0, 4.0, -7.0]);
    let mut grads = Gradients::zeros_like(&p);
    let mut g = Graph::new(&p);
    let wv = g.param(w);
    let xv = g.input(x.clone());
    let m = g.mul(wv, xv).unwrap();
    let loss = g.sum(m);
    g.backward(loss, &mut grads).unwrap();
    assert_eq!(grads.get(w).data(), x.data());

    let mut p = ParamSet::new();
    let w = p.add("w", Tensor::scalar(0.0));
    let mut grads = Gradients::zeros_like(&p);
    let mut g = Graph::new(&p);
    let wv = g.param(w);
    let t = g.tanh(wv);
    g.backward(t, &mut grads).unwrap();
    assert_eq!(grads.get(w).scalar_value(), 1.0);
    // A second pass accumulates.
    g.backward(t, &mut grads).unwrap();
    assert_eq!(grads.get(w).scalar_value(), 2.0);
}

#[test]
fn backward_rejects_non_scalar() {
    let mut p = ParamSet::new();
    let w = p.add("w", Tensor::zeros(2, 2));
    let mut grads = Gradients::zeros_like(&p);
    let mut g = Graph::new(&p);
    let wv = g.param(w);
    assert!(matches!(g.backward(wv, &mut grads), Err(NumError::NotScalar((2, 2)))));
}

#[test]
fn max_routes_to_first_argmax() {
    let mut p = ParamSet::new();
    let w = p.add("w", Tensor::matrix(3, 2, vec![1.0, 5.0, 3.0, 5.0, 3.0, 0.0]));
    let mut grads = Gradients::zeros_like(&p);
    let mut g = Graph::new(&p);
    let wv = g.param(w);
    let m = g.max_rows(wv).unwrap();
    assert_eq!(g.value(m).data(), &[3.0, 5.0]);
    let s = g.sum(m);
    g.backward(s, &mut grads).unwrap();
    assert_eq!(grads.get(w).data(), &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn shape_errors() {
    let p = ParamSet::new();
    let mut g = Graph::new(&p);
    let a = g.input(Tensor::zeros(2, 3));
    let b = g.input(Tensor::zeros(2, 3));
    assert!(g.matmul(a, b).is_err());
    let c = g.input(Tensor::zeros(3, 2));
    assert!(g.add(a, c).is_err());
    assert!(g.concat_cols(&[a, c]).is_err());
    assert!(g.gather_rows(a, &[2]).is_err());
    assert!(g.cross_entropy(a, &[0]).is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn softmax_is_a_distribution(xs in proptest::collection::vec(-50.0f64..50.0, 1..12)) {
            let s = softmax(&xs);
            prop_assert!(s.iter().all(|&p| p >= 0.0));
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
