use motran_core::nn::{grad_check, Adam, AdamConfig, GruVars, Graph, ParamSet, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn t(shape: &[usize], data: &[f64]) -> Tensor {
    Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
}

fn random(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn matmul_hand_case() {
    let g = Graph::new();
    let a = g.constant(t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    let b = g.constant(t(
        &[3, 4],
        &[1.0, 0.0, -1.0, 2.0, 0.5, 1.0, 0.0, -2.0, 2.0, -1.0, 1.0, 0.0],
    ));
    let c = g.matmul(a, b).unwrap();
    assert_eq!(g.shape(c), vec![2, 4]);
    // row 0: [1+1+6, 0+2-3, -1+0+3, 2-4+0]; row 1: [4+2.5+12, 0+5-6, -4+0+6, 8-10+0]
    assert_eq!(g.value(c).data(), &[8.0, -1.0, 2.0, -2.0, 18.5, -1.0, 2.0, -2.0]);
}

#[test]
fn shape_mismatch_names_op() {
    let g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[2, 3]));
    let err = g.matmul(a, b).unwrap_err().to_string();
    assert!(err.contains("matmul") && err.contains("[2, 3]"), "{err}");
    let c = g.constant(Tensor::zeros(&[3]));
    assert!(g.add(a, c).unwrap_err().to_string().contains("add"));
}

#[test]
fn trivial_values() {
    let g = Graph::new();
    let x = g.constant(t(&[3], &[0.3, -2.0, 5.0]));
    assert_eq!(g.item(g.mse(x, x).unwrap()), 0.0);
    let z = g.constant(Tensor::scalar(0.0));
    assert_eq!(g.item(g.sigmoid(z)), 0.5);
    assert_eq!(g.value(g.relu(x)).data(), &[0.3, 0.0, 5.0]);
    assert_eq!(g.item(g.lsq(x, 1.0)), (0.49 + 9.0 + 16.0) / 3.0);
}

#[test]
fn sum_gives_ones() {
    let g = Graph::new();
    let w = g.leaf(t(&[2, 2], &[1.0, -3.0, 0.5, 2.0]));
    let loss = g.sum(w);
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(w).unwrap(), &[1.0; 4]);
}

#[test]
fn scalar_mse_hand_derivative() {
    let (w0, x0, y0) = (1.5, -2.0, 0.7);
    let g = Graph::new();
    let w = g.leaf(Tensor::scalar(w0));
    let x = g.constant(Tensor::scalar(x0));
    let y = g.constant(Tensor::scalar(y0));
    let loss = g.mse(g.mul(w, x).unwrap(), y).unwrap();
    let grads = g.backward(loss).unwrap();
    let want = 2.0 * x0 * (w0 * x0 - y0);
    assert!((grads.get(w).unwrap()[0] - want).abs() < 1e-12);
}

#[test]
fn branches_sum_contributions() {
    // f(w) = w² + 3w, f'(w) = 2w + 3
    let g = Graph::new();
    let w = g.leaf(Tensor::scalar(1.25));
    let sq = g.mul(w, w).unwrap();
    let lin = g.scale(w, 3.0);
    let loss = g.sum(g.add(sq, lin).unwrap());
    let grads = g.backward(loss).unwrap();
    assert!((grads.get(w).unwrap()[0] - 5.5).abs() < 1e-12);
}

#[test]
fn unreachable_params_get_zero() {
    let mut p = ParamSet::new();
    p.insert("used", Tensor::scalar(2.0)).unwrap();
    p.insert("unused", Tensor::from_vec(vec![1.0, 2.0])).unwrap();
    let g = Graph::new();
    let b = p.bind(&g, true);
    let loss = g.sum(g.mul(b.var("used"), b.var("used")).unwrap());
    let grads = b.grads(&g, &g.backward(loss).unwrap());
    assert_eq!(grads["unused"], vec![0.0, 0.0]);
    assert_eq!(grads["used"], vec![4.0]);
}

#[test]
fn detach_blocks_gradient() {
    let g = Graph::new();
    let w = g.leaf(Tensor::scalar(3.0));
    let d = g.detach(w);
    let loss = g.sum(g.mul(w, d).unwrap());
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(w).unwrap(), &[3.0]);
}

#[test]
fn non_scalar_backward_rejected() {
    let g = Graph::new();
    let w = g.leaf(Tensor::zeros(&[2]));
    assert!(g.backward(w).is_err());
}

#[test]
fn ops_do_not_mutate_inputs() {
    let g = Graph::new();
    let a = g.leaf(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
    let before = g.value(a);
    let y = g.tanh(g.matmul(a, a).unwrap());
    let _ = g.backward(g.sum(y)).unwrap();
    assert_eq!(g.value(a), before);
}

fn gru_params(input: usize, hidden: usize, seed: u64) -> ParamSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParamSet::new();
    p.init_gru("cell", input, hidden, &mut rng).unwrap();
    // non-zero biases so every gradient path is exercised
    for name in ["cell.b_ih", "cell.b_hh"] {
        let b = p.get_mut(name).unwrap();
        for v in b.data_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    p
}

#[test]
fn gru_zero_weights_halve_state() {
    let mut p = ParamSet::new();
    p.insert("cell.w_ih", Tensor::zeros(&[3, 12])).unwrap();
    p.insert("cell.w_hh", Tensor::zeros(&[4, 12])).unwrap();
    p.insert("cell.b_ih", Tensor::zeros(&[12])).unwrap();
    p.insert("cell.b_hh", Tensor::zeros(&[12])).unwrap();
    let g = Graph::new();
    let b = p.bind(&g, false);
    let x = g.constant(t(&[1, 3], &[0.3, -1.0, 2.0]));
    let h = g.constant(t(&[1, 4], &[0.8, -0.4, 0.1, 1.0]));
    let h2 = g.gru_step(x, h, b.gru("cell")).unwrap();
    assert_eq!(g.value(h2).data(), &[0.4, -0.2, 0.05, 0.5]);
}

#[test]
fn gru_step_finite_difference() {
    let p = gru_params(4, 4, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random(&[1, 4], &mut rng);
    let h0 = random(&[1, 4], &mut rng);
    let err = grad_check(&p, 1e-5, |g, b| {
        let h = g.gru_step(g.constant(x.clone()), g.constant(h0.clone()), b.gru("cell"))?;
        Ok(g.sum(h))
    })
    .unwrap();
    assert!(err < 1e-4, "max rel error {err}");
}

#[test]
fn fused_gru_matches_unrolled_steps() {
    let (batch, steps, input, hidden) = (3, 10, 5, 4);
    let p = gru_params(input, hidden, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let xs = random(&[batch, steps, input], &mut rng);
    let weights = random(&[batch, steps, hidden], &mut rng);

    let g = Graph::new();
    let b = p.bind(&g, true);
    let x = g.leaf(xs.clone());
    let out = g.gru(x, b.gru("cell")).unwrap();
    let w = g.constant(weights.clone());
    let loss = g.sum(g.mul(out, w).unwrap());
    let fused_grads = g.backward(loss).unwrap();
    let fused = b.grads(&g, &fused_grads);
    let fused_dx = fused_grads.get(x).unwrap().to_vec();

    let g2 = Graph::new();
    let b2 = p.bind(&g2, true);
    let x2 = g2.leaf(xs);
    let mut h = g2.constant(Tensor::zeros(&[batch, hidden]));
    let mut terms = Vec::new();
    let mut hs = Vec::new();
    for k in 0..steps {
        let x_k = g2.reshape(g2.slice(g2.reshape(x2, &[batch, steps * input]).unwrap(), k * input, (k + 1) * input).unwrap(), &[batch, input]).unwrap();
        h = g2.gru_step(x_k, h, b2.gru("cell")).unwrap();
        hs.push(h);
        let w_k = g2.slice(g2.constant(weights.clone().reshaped(&[batch, steps * hidden]).unwrap()), k * hidden, (k + 1) * hidden).unwrap();
        terms.push(g2.sum(g2.mul(h, w_k).unwrap()));
    }
    let mut loss2 = terms[0];
    for term in &terms[1..] {
        loss2 = g2.add(loss2, *term).unwrap();
    }
    let stacked = g2.concat(&hs).unwrap();
    let out_v = g.value(out);
    let stacked_v = g2.value(stacked);
    for bi in 0..batch {
        for k in 0..steps {
            for j in 0..hidden {
                let a = out_v.data()[(bi * steps + k) * hidden + j];
                let s = stacked_v.data()[bi * steps * hidden + k * hidden + j];
                assert!((a - s).abs() < 1e-12);
                assert!(a.abs() <= 1.0 && a.is_finite());
            }
        }
    }
    let unrolled_grads = g2.backward(loss2).unwrap();
    let unrolled = b2.grads(&g2, &unrolled_grads);
    for (name, gv) in &fused {
        for (a, u) in gv.iter().zip(&unrolled[name]) {
            assert!((a - u).abs() < 1e-10, "{name}: {a} vs {u}");
        }
    }
    for (a, u) in fused_dx.iter().zip(unrolled_grads.get(x2).unwrap()) {
        assert!((a - u).abs() < 1e-10);
    }
}

#[test]
fn fused_gru_finite_difference() {
    let p = gru_params(3, 4, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random(&[2, 6, 3], &mut rng);
    let w = random(&[2, 6, 4], &mut rng);
    let err = grad_check(&p, 1e-5, |g, b| {
        let out = g.gru(g.constant(x.clone()), b.gru("cell"))?;
        Ok(g.sum(g.mul(out, g.constant(w.clone()))?))
    })
    .unwrap();
    assert!(err < 1e-4, "max rel error {err}");
}

#[test]
fn gru_rejects_bad_input_width() {
    let p = gru_params(3, 4, 5);
    let g = Graph::new();
    let b = p.bind(&g, false);
    let x = g.constant(Tensor::zeros(&[1, 5, 2]));
    assert!(g.gru(x, b.gru("cell")).is_err());
    let _: GruVars = b.gru("cell");
}

#[test]
fn adam_zero_gradient_is_noop() {
    let mut p = ParamSet::new();
    p.insert("w", Tensor::from_vec(vec![1.0, -2.0])).unwrap();
    let before = p.clone();
    let mut adam = Adam::new(AdamConfig::default());
    let zero = p.zero_grads();
    adam.step(&mut p, &zero).unwrap();
    assert_eq!(p, before);
}

#[test]
fn adam_first_step_magnitude_is_lr() {
    let mut p = ParamSet::new();
    p.insert("w", Tensor::from_vec(vec![1.0, -2.0, 0.5])).unwrap();
    let lr = 0.01;
    let mut adam = Adam::new(AdamConfig { lr, ..AdamConfig::default() });
    let grads = [("w".to_string(), vec![3.0, -0.2, 40.0])].into_iter().collect();
    adam.step(&mut p, &grads).unwrap();
    let w = p.get("w").unwrap().data();
    assert!(((1.0 - w[0]) - lr).abs() < 1e-6);
    assert!(((w[1] + 2.0) - lr).abs() < 1e-6);
    assert!(((0.5 - w[2]) - lr).abs() < 1e-6);
}

#[test]
fn adam_quadratic_bowl() {
    let mut p = ParamSet::new();
    p.insert("w", Tensor::from_vec(vec![5.0, 5.0])).unwrap();
    let mut adam = Adam::new(AdamConfig { lr: 0.1, ..AdamConfig::default() });
    for _ in 0..200 {
        let g = Graph::new();
        let b = p.bind(&g, true);
        let w = b.var("w");
        let loss = g.sum(g.mul(w, w).unwrap());
        let grads = b.grads(&g, &g.backward(loss).unwrap());
        adam.step(&mut p, &grads).unwrap();
    }
    let w = p.get("w").unwrap().data();
    assert!(w[0].hypot(w[1]) < 0.1, "{w:?}");
}

#[test]
fn param_checkpoint_round_trip_bit_exact() {
    let p = gru_params(3, 5, 99);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    p.save_json(&path).unwrap();
    let back = ParamSet::load_json(&path).unwrap();
    for ((n1, a), (n2, b)) in p.iter().zip(back.iter()) {
        assert_eq!(n1, n2);
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn duplicate_param_rejected() {
    let mut p = ParamSet::new();
    p.insert("a", Tensor::scalar(1.0)).unwrap();
    assert!(p.insert("a", Tensor::scalar(2.0)).is_err());
}

#[test]
fn backward_is_deterministic() {
    let p = gru_params(3, 4, 5);
    let x = random(&[2, 6, 3], &mut ChaCha8Rng::seed_from_u64(1));
    let run = || {
        let g = Graph::new();
        let b = p.bind(&g, true);
        let out = g.gru(g.constant(x.clone()), b.gru("cell")).unwrap();
        let loss = g.mean(g.tanh(out));
        (g.item(loss).to_bits(), b.grads(&g, &g.backward(loss).unwrap()))
    };
    let (l1, g1) = run();
    let (l2, g2) = run();
    assert_eq!(l1, l2);
    for (k, v) in &g1 {
        let bits: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
        let bits2: Vec<u64> = g2[k].iter().map(|x| x.to_bits()).collect();
        assert_eq!(bits, bits2);
    }
}

/// Every elementwise and structural op against central differences.
fn check_op(shape: Vec<usize>, seed: u64, op: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParamSet::new();
    p.insert("a", random(&shape, &mut rng)).unwrap();
    p.insert("b", random(&shape, &mut rng)).unwrap();
    let cols = *shape.last().unwrap();
    p.insert("bias", random(&[cols], &mut rng)).unwrap();
    p.insert("w", random(&[cols, 3], &mut rng)).unwrap();
    let probe = random(&shape, &mut rng);
    grad_check(&p, 1e-5, |g, bd| {
        let (a, b) = (bd.var("a"), bd.var("b"));
        let weigh = |v| -> motran_core::Result<_> {
            let pr = g.constant(probe.clone());
            Ok(g.sum(g.mul(v, pr)?))
        };
        Ok(match op {
            0 => weigh(g.add(a, b)?)?,
            1 => weigh(g.sub(a, b)?)?,
            2 => weigh(g.mul(a, b)?)?,
            3 => weigh(g.tanh(a))?,
            4 => weigh(g.sigmoid(a))?,
            5 => weigh(g.softplus(a))?,
            6 => weigh(g.add_row(a, bd.var("bias"))?)?,
            7 => g.mse(a, b)?,
            8 => g.lsq(a, 0.3),
            9 => g.bce_with_logits(a, g.sigmoid(b))?,
            10 => g.mean(g.mul(a, a)?),
            11 => {
                let c = g.concat(&[a, b])?;
                let s = g.slice(c, 1, cols + 1)?;
                g.sum(g.mul(s, s)?)
            }
            12 => {
                let y = g.linear(a, bd.var("w"), g.slice(g.concat(&[bd.var("bias"), bd.var("bias")])?, 0, 3)?)?;
                g.sum(g.tanh(y))
            }
            13 => weigh(g.scale(g.relu(g.add(a, g.constant(Tensor::full(&shape, 0.01)))?), 2.0))?,
            _ => unreachable!(),
        })
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn elementwise_ops_match_finite_differences(rows in 1usize..4, cols in 3usize..5, seed in 0u64..1000, op in 0usize..14) {
        let err = check_op(vec![rows, cols], seed, op);
        prop_assert!(err < 1e-4, "op {op}: {err}");
    }

    #[test]
    fn sequence_ops_match_finite_differences(batch in 1usize..3, blocks in 1usize..4, ch in 1usize..4, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        let shape = [batch, blocks * 2, ch];
        p.insert("a", random(&shape, &mut rng)).unwrap();
        let w1 = random(&[batch, blocks, ch], &mut rng);
        let w2 = random(&[batch, ch], &mut rng);
        let err = grad_check(&p, 1e-5, |g, b| {
            let a = b.var("a");
            let r = g.reverse_time(g.tanh(a))?;
            let pooled = g.pool_time(r, 2)?;
            let t1 = g.sum(g.mul(pooled, g.constant(w1.clone()))?);
            let m = g.mean_time(g.mul(a, a)?)?;
            let t2 = g.sum(g.mul(m, g.constant(w2.clone()))?);
            g.add(t1, t2)
        }).unwrap();
        prop_assert!(err < 1e-4, "{err}");
    }
}

#[test]
fn tensor_shape_checked() {
    assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
    let x = Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap();
    assert!(x.clone().reshaped(&[3, 2]).is_ok());
    assert!(x.reshaped(&[4]).is_err());
}
