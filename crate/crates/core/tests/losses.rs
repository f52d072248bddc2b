mod common;

use std::f64::consts::PI;

use common::{random_tensor, tag, tiny_bundle};
use motran_core::losses::*;
use motran_core::models::{grad_check_bundle, grad_check_sets, BoundBundle, Trainable};
use motran_core::nn::{Graph, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn roles() -> DomainRoles {
    DomainRoles {
        source: tag("src"),
        target: tag("tgt"),
    }
}

fn swapped() -> DomainRoles {
    DomainRoles {
        source: tag("tgt"),
        target: tag("src"),
    }
}

#[test]
fn paper_weights_on_unit_components() {
    let w = LossWeights::default();
    assert!((total_loss([1.0; 5], &w) - 102.11).abs() < 1e-9);
    assert_eq!(total_loss([0.0; 5], &w), 0.0);
    let zero = LossWeights {
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
        lambda4: 0.0,
    };
    assert_eq!(total_loss([0.7, 3.0, 4.0, 5.0, 6.0], &zero), 0.7);
}

#[test]
fn report_total_matches_weighted_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = LossWeights::default();
    for _ in 0..100 {
        let c: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.0..10.0));
        let r = LossReport::new(c[0], c[1], c[2], c[3], c[4], &w);
        let want = c[0] + 0.01 * c[1] + 100.0 * c[2] + 0.1 * c[3] + 1.0 * c[4];
        assert!((r.total - want).abs() < 1e-9);
    }
}

#[test]
fn report_csv_round_trip() {
    let r = LossReport::new(0.1, 0.2, 0.3, 0.4, 0.5, &LossWeights::default());
    assert_eq!(LOSS_CSV_HEADER, "step,gan,ae,pred,cycle,percep,total");
    let (step, back) = LossReport::parse_csv_row(&r.csv_row(12)).unwrap();
    assert_eq!(step, 12);
    assert_eq!(back, r);
}

#[test]
fn negative_weights_rejected() {
    let w = LossWeights {
        lambda3: -1.0,
        ..LossWeights::default()
    };
    assert!(w.validate().is_err());
}

#[test]
fn constant_half_discriminator() {
    let g = Graph::new();
    let half = g.constant(Tensor::full(&[4, 1], 0.5));
    assert_eq!(g.item(lsgan_disc(&g, half, half).unwrap()), 0.25);
    assert_eq!(g.item(lsgan_gen(&g, half)), 0.25);
}

#[test]
fn perfect_discriminator() {
    let g = Graph::new();
    let ones = g.constant(Tensor::full(&[4, 1], 1.0));
    let zeros = g.constant(Tensor::zeros(&[4, 1]));
    assert_eq!(g.item(lsgan_disc(&g, ones, zeros).unwrap()), 0.0);
    assert_eq!(g.item(lsgan_gen(&g, zeros)), 1.0);
}

#[test]
fn constant_half_discriminator_through_model() {
    let mut m = tiny_bundle(1);
    for d in ["discriminator/src", "discriminator/tgt"] {
        let p = m.set_mut(d).unwrap();
        p.get_mut("out.w").unwrap().data_mut().iter_mut().for_each(|v| *v = 0.0);
        p.get_mut("out.b").unwrap().data_mut()[0] = 0.5;
    }
    let g = Graph::new();
    let b = m.bind(&g, Trainable::All);
    let xs = g.constant(random_tensor(&[2, 8, 6], 1));
    let xt = g.constant(random_tensor(&[2, 8, 6], 2));
    let (disc, gen) = gan_losses(&g, &b, xs, xt, &roles()).unwrap();
    // two directions
    assert_eq!(g.item(disc), 0.5);
    assert_eq!(g.item(gen), 0.5);
}

#[test]
fn gan_gradients_respect_detachment() {
    let m = tiny_bundle(2);
    let xs = random_tensor(&[2, 8, 6], 3);
    let xt = random_tensor(&[2, 8, 6], 4);
    let grads = |use_disc: bool| {
        let g = Graph::new();
        let b = m.bind(&g, Trainable::All);
        let (disc, gen) = gan_losses(&g, &b, g.constant(xs.clone()), g.constant(xt.clone()), &roles()).unwrap();
        let loss = if use_disc { disc } else { gen };
        b.grads(&g, &g.backward(loss).unwrap())
    };
    let norm = |m: &motran_core::nn::GradMap| m.values().flatten().map(|v| v.abs()).sum::<f64>();
    let d = grads(true);
    for set in ["encoder", "generator/src", "generator/tgt"] {
        assert_eq!(norm(&d[set]), 0.0, "{set}");
    }
    assert!(norm(&d["discriminator/src"]) > 0.0);
    let gl = grads(false);
    for set in ["encoder", "generator/src", "generator/tgt"] {
        assert!(norm(&gl[set]) > 0.0, "{set}");
    }
}

#[test]
fn ae_examples() {
    let g = Graph::new();
    let x = g.constant(random_tensor(&[2, 8, 6], 5));
    let shifted = g.add(x, g.constant(Tensor::full(&[2, 8, 6], 1.0))).unwrap();
    assert!((g.item(g.mse(x, shifted).unwrap()) - 1.0).abs() < 1e-12);

    // A decoder with zero output layer reproduces an all-zero window.
    let mut m = tiny_bundle(3);
    for name in ["out.w", "out.b"] {
        m.decoder.get_mut(name).unwrap().data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    let g = Graph::new();
    let b = m.bind(&g, Trainable::Nothing);
    let zero = g.constant(Tensor::zeros(&[1, 8, 6]));
    assert_eq!(g.item(ae_loss(&g, &b, zero).unwrap()), 0.0);

    let m = tiny_bundle(3);
    let b = m.bind(&g, Trainable::Nothing);
    let x = g.constant(random_tensor(&[2, 8, 6], 5));
    assert!(g.item(ae_loss(&g, &b, x).unwrap()) > 0.0);
}

#[test]
fn pred_wraps_heading_error() {
    let g = Graph::new();
    let label = g.constant(Tensor::new(vec![1, 2], vec![1.0, PI - 0.01]).unwrap());
    let pred = g.constant(Tensor::new(vec![1, 2], vec![1.0, -PI + 0.01]).unwrap());
    let loss = g.item(polar_mse(&g, pred, label).unwrap());
    assert!((loss - 0.02f64.powi(2)).abs() < 1e-12, "{loss}");
    assert_eq!(g.item(polar_mse(&g, label, label).unwrap()), 0.0);

    let a = g.constant(Tensor::new(vec![2, 2], vec![1.0, 0.3, 2.0, -1.0]).unwrap());
    let turned = g.constant(Tensor::new(vec![2, 2], vec![1.0, 0.3 + 2.0 * PI, 2.0, -1.0 - 2.0 * PI]).unwrap());
    assert!(g.item(polar_mse(&g, a, turned).unwrap()) < 1e-24);
}

#[test]
fn cycle_is_symmetric() {
    let m = tiny_bundle(4);
    let g = Graph::new();
    let b = m.bind(&g, Trainable::Nothing);
    let xs = g.constant(random_tensor(&[2, 8, 6], 6));
    let xt = g.constant(random_tensor(&[2, 8, 6], 7));
    let one = g.item(cycle_loss(&g, &b, xs, xt, &roles()).unwrap());
    let other = g.item(cycle_loss(&g, &b, xt, xs, &swapped()).unwrap());
    assert_eq!(one, other);
    assert!(one > 0.0);
}

#[test]
fn percep_reference_is_detached() {
    let m = tiny_bundle(5);
    let xs = random_tensor(&[1, 8, 6], 8);
    let xt = random_tensor(&[1, 8, 6], 9);

    let g = Graph::new();
    let b = m.bind(&g, Trainable::Generators);
    let loss = percep_loss(&g, &b, g.constant(xs.clone()), g.constant(xt.clone()), &roles()).unwrap();
    assert!(g.item(loss) >= 0.0);
    let got = b.grads(&g, &g.backward(loss).unwrap());

    // Same loss with the reference codes entered as plain constants.
    let g2 = Graph::new();
    let b2 = m.bind(&g2, Trainable::Generators);
    let ref_s = m.bind(&g2, Trainable::Nothing).encode(&g2, g2.constant(xs.clone())).unwrap();
    let ref_t = m.bind(&g2, Trainable::Nothing).encode(&g2, g2.constant(xt.clone())).unwrap();
    let fake_t = b2.generate(&g2, b2.encode(&g2, g2.constant(xs)).unwrap(), &tag("tgt")).unwrap();
    let fake_s = b2.generate(&g2, b2.encode(&g2, g2.constant(xt)).unwrap(), &tag("src")).unwrap();
    let l2 = g2
        .add(
            g2.mse(b2.encode(&g2, fake_t).unwrap(), ref_s).unwrap(),
            g2.mse(b2.encode(&g2, fake_s).unwrap(), ref_t).unwrap(),
        )
        .unwrap();
    let want = b2.grads(&g2, &g2.backward(l2).unwrap());
    for set in ["encoder", "generator/src", "generator/tgt"] {
        for (name, v) in &want[set] {
            for (a, w) in got[set][name].iter().zip(v) {
                assert!((a - w).abs() < 1e-12, "{set}::{name}");
            }
        }
        assert!(got[set].values().flatten().any(|v| *v != 0.0), "{set}");
    }
}

#[test]
fn unregistered_domain_rejected() {
    let m = tiny_bundle(1);
    let g = Graph::new();
    let b = m.bind(&g, Trainable::Nothing);
    let x = g.constant(Tensor::zeros(&[1, 8, 6]));
    let bad = DomainRoles {
        source: tag("src"),
        target: tag("elsewhere"),
    };
    assert!(matches!(gan_losses(&g, &b, x, x, &bad), Err(motran_core::Error::Usage(_))));
}

#[test]
fn generator_terms_match_separate_functions() {
    let m = tiny_bundle(6);
    let g = Graph::new();
    let b = m.bind(&g, Trainable::Nothing);
    let xs = g.constant(random_tensor(&[2, 8, 6], 10));
    let xt = g.constant(random_tensor(&[2, 8, 6], 11));
    let ys = g.constant(random_tensor(&[2, 2], 12));
    let terms = GeneratorTerms::compute(&g, &b, xs, ys, xt, &roles(), TermMask::ALL).unwrap();
    let ae = g.item(ae_loss(&g, &b, xs).unwrap()) + g.item(ae_loss(&g, &b, xt).unwrap());
    assert!((g.item(terms.ae.unwrap()) - ae).abs() < 1e-12);
    assert_eq!(g.item(terms.pred.unwrap()), g.item(pred_loss(&g, &b, xs, ys).unwrap()));
    assert_eq!(g.item(terms.cycle.unwrap()), g.item(cycle_loss(&g, &b, xs, xt, &roles()).unwrap()));
    assert_eq!(g.item(terms.percep.unwrap()), g.item(percep_loss(&g, &b, xs, xt, &roles()).unwrap()));
    assert_eq!(g.item(terms.gan.unwrap()), g.item(gan_losses(&g, &b, xs, xt, &roles()).unwrap().1));
    let report = terms.report(&g, &LossWeights::default());
    assert!((report.total - g.item(terms.total(&g, &LossWeights::default()).unwrap())).abs() < 1e-9);
}

mod gradient_checks {
    use super::*;

    const TOL: f64 = 1e-4;

    fn inputs() -> (Tensor, Tensor, Tensor) {
        let y = Tensor::new(vec![1, 2], vec![2.5, 0.4]).unwrap();
        (random_tensor(&[1, 8, 6], 21), random_tensor(&[1, 8, 6], 22), y)
    }

    #[test]
    fn gan_terms() {
        let (xs, xt, _) = inputs();
        // The discriminator loss sees fakes as constants, so only the
        // discriminators are perturbed for it.
        let discs = ["discriminator/src", "discriminator/tgt"];
        let err = grad_check_sets(&tiny_bundle(7), 1e-5, &discs, |g, b| {
            Ok(gan_losses(g, b, g.constant(xs.clone()), g.constant(xt.clone()), &roles())?.0)
        })
        .unwrap();
        assert!(err < TOL, "disc: {err}");
        let err = grad_check_bundle(&tiny_bundle(7), 1e-5, |g, b| {
            Ok(gan_losses(g, b, g.constant(xs.clone()), g.constant(xt.clone()), &roles())?.1)
        })
        .unwrap();
        assert!(err < TOL, "gen: {err}");
    }

    #[test]
    fn ae_term() {
        let (xs, _, _) = inputs();
        let err = grad_check_bundle(&tiny_bundle(8), 1e-5, |g, b| ae_loss(g, b, g.constant(xs.clone()))).unwrap();
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn pred_term() {
        let (xs, _, y) = inputs();
        let err = grad_check_bundle(&tiny_bundle(9), 1e-5, |g, b| {
            pred_loss(g, b, g.constant(xs.clone()), g.constant(y.clone()))
        })
        .unwrap();
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn cycle_term() {
        let (xs, xt, _) = inputs();
        let err = grad_check_bundle(&tiny_bundle(10), 1e-5, |g, b| {
            cycle_loss(g, b, g.constant(xs.clone()), g.constant(xt.clone()), &roles())
        })
        .unwrap();
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn percep_term() {
        // Finite differences run on a copy of the loss whose reference codes
        // are constants at the unperturbed values; its analytic gradient must
        // equal that of the loss with the detached reference.
        let (xs, xt, _) = inputs();
        let m = tiny_bundle(11);
        let g0 = Graph::new();
        let b0 = m.bind(&g0, Trainable::Nothing);
        let ref_s = g0.value(b0.encode(&g0, g0.constant(xs.clone())).unwrap());
        let ref_t = g0.value(b0.encode(&g0, g0.constant(xt.clone())).unwrap());
        let fixed = |g: &Graph, b: &BoundBundle| {
            let fake_t = b.generate(g, b.encode(g, g.constant(xs.clone()))?, &tag("tgt"))?;
            let fake_s = b.generate(g, b.encode(g, g.constant(xt.clone()))?, &tag("src"))?;
            g.add(
                g.mse(b.encode(g, fake_t)?, g.constant(ref_s.clone()))?,
                g.mse(b.encode(g, fake_s)?, g.constant(ref_t.clone()))?,
            )
        };
        let err = grad_check_bundle(&m, 1e-5, fixed).unwrap();
        assert!(err < TOL, "{err}");

        let g1 = Graph::new();
        let b1 = m.bind(&g1, Trainable::All);
        let loss = percep_loss(&g1, &b1, g1.constant(xs.clone()), g1.constant(xt.clone()), &roles()).unwrap();
        let got = b1.grads(&g1, &g1.backward(loss).unwrap());
        let g2 = Graph::new();
        let b2 = m.bind(&g2, Trainable::All);
        let reference = fixed(&g2, &b2).unwrap();
        assert_eq!(g1.item(loss), g2.item(reference));
        let want = b2.grads(&g2, &g2.backward(reference).unwrap());
        assert_eq!(got, want);
    }
}
