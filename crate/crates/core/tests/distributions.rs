//! Reference checks for the closed-form distribution code against
//! independent numerical routes.

use cpib_core::autograd::{gradcheck, Tape, Tensor};
use cpib_core::distributions::*;
use cpib_core::rng;
use proptest::prelude::*;
use rand::Rng;

/// Beta-binomial pmf of `k - 1` successes in `K - 1` trials via rising
/// factorials, without log-gamma.
fn pmf_oracle(a: f64, b: f64, cap: usize) -> Vec<f64> {
    let n = cap - 1;
    (0..=n)
        .map(|j| {
            let ln_choose: f64 = (1..=j).map(|i| ((n - j + i) as f64 / i as f64).ln()).sum();
            let up_a: f64 = (0..j).map(|i| (a + i as f64).ln()).sum();
            let up_b: f64 = (0..n - j).map(|i| (b + i as f64).ln()).sum();
            let up_ab: f64 = (0..n).map(|i| (a + b + i as f64).ln()).sum();
            (ln_choose + up_a + up_b - up_ab).exp()
        })
        .collect()
}

/// Simpson quadrature of `q log(q / p)` for 1-d normals.
fn kl_quadrature(qm: f64, qs: f64, pm: f64, ps: f64) -> f64 {
    let lo = qm - 14.0 * qs;
    let hi = qm + 14.0 * qs;
    let n = 40_000;
    let h = (hi - lo) / n as f64;
    let log_n = |x: f64, m: f64, s: f64| {
        -0.5 * ((x - m) / s).powi(2) - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    };
    let f = |x: f64| {
        let lq = log_n(x, qm, qs);
        lq.exp() * (lq - log_n(x, pm, ps))
    };
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn compound_matches_pmf_oracle_on_grid() {
    let shapes = [0.5, 1.0, 2.0, 5.0];
    for &a in &shapes {
        for &b in &shapes {
            for &cap in &[1usize, 2, 10, 100] {
                let got = compound_probs(a, b, cap).unwrap();
                let want = pmf_oracle(a, b, cap);
                let total: f64 = got.iter().sum();
                assert!((total - 1.0).abs() < 1e-10, "a={a} b={b} K={cap} sum={total}");
                for (k, (g, w)) in got.iter().zip(&want).enumerate() {
                    assert!((g - w).abs() < 1e-10, "a={a} b={b} K={cap} k={k}: {g} vs {w}");
                }
            }
        }
    }
}

#[test]
fn compound_mode_locations() {
    for cap in 4..=100 {
        let p = compound_probs(2.0, 2.0, cap).unwrap();
        let mode = argmax(&p) + 1;
        assert!(mode >= 2 && mode <= cap - 1, "K={cap} mode={mode}");
        assert_eq!(argmax(&compound_probs(1.0, 3.0, cap).unwrap()), 0);
    }
}

#[test]
fn compound_gradient_matches_finite_differences() {
    let ab = Tensor::matrix(2, 2, vec![2.0, 2.0, 0.7, 3.5]);
    let weights: Vec<f64> = (0..2 * 7).map(|i| ((i * 37 % 11) as f64) / 11.0 - 0.4).collect();
    let err = gradcheck(
        |tape, x| {
            let lp = compound_log_probs_var(x, 7)?;
            let w = tape.constant(Tensor::matrix(2, 7, weights.clone()));
            lp.mul(w)?.sum()
        },
        &ab,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn gaussian_kl_matches_quadrature() {
    let cases = [
        (1.0, 1.0, 0.0, 1.0),
        (0.3, 0.8, 0.0, 1.0),
        (-1.5, 2.5, 0.4, 0.7),
        (2.0, 0.2, -1.0, 3.0),
    ];
    for &(qm, qs, pm, ps) in &cases {
        let q = DiagGaussian::new(vec![qm], vec![qs]).unwrap();
        let p = DiagGaussian::new(vec![pm], vec![ps]).unwrap();
        let closed = gaussian_kl(&q, &p, 1).unwrap();
        let quad = kl_quadrature(qm, qs, pm, ps);
        assert!((closed - quad).abs() < 1e-8, "{closed} vs {quad}");
    }
    let q = DiagGaussian::new(vec![1.0], vec![1.0]).unwrap();
    assert!((gaussian_kl(&q, &DiagGaussian::standard(1), 1).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn gaussian_kl_is_additive_over_coordinates() {
    let mut r = rng::stream(11, "kl-additive");
    for _ in 0..50 {
        let k = r.random_range(1..8);
        let mk = |r: &mut rng::Stream| {
            let mu = (0..k).map(|_| r.random_range(-2.0..2.0)).collect();
            let sd = (0..k).map(|_| r.random_range(0.2..2.5)).collect();
            DiagGaussian::new(mu, sd).unwrap()
        };
        let (q, p) = (mk(&mut r), mk(&mut r));
        let whole = gaussian_kl(&q, &p, k).unwrap();
        let parts: f64 = (0..k)
            .map(|l| {
                let ql = DiagGaussian::new(vec![q.mu()[l]], vec![q.sigma()[l]]).unwrap();
                let pl = DiagGaussian::new(vec![p.mu()[l]], vec![p.sigma()[l]]).unwrap();
                gaussian_kl(&ql, &pl, 1).unwrap()
            })
            .sum();
        assert!((whole - parts).abs() < 1e-12);
    }
}

#[test]
fn gaussian_kl_gradcheck_at_reference_point() {
    // KL(N(0.3, 0.8^2) || N(0, 1)) as a function of (mu, sigma).
    let x = Tensor::vector(vec![0.3, 0.8]);
    let err = gradcheck(
        |_, v| {
            let mu = v.slice_last(0, 1)?;
            let sigma = v.slice_last(1, 1)?;
            standard_normal_kl_var(mu, sigma)?.sum()
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn categorical_kl_matches_hand_summation() {
    let q = [0.1f64, 0.2, 0.3, 0.4];
    let p = [0.25f64, 0.25, 0.4, 0.1];
    let cross: f64 = q.iter().zip(&p).map(|(a, b)| a * b.ln()).sum();
    let ent: f64 = q.iter().map(|a| a * a.ln()).sum();
    assert!((categorical_kl(&q, &p).unwrap() - (ent - cross)).abs() < 1e-8);
    assert!((categorical_kl(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 0.693_147_180_559_945_3).abs() < 1e-12);
}

#[test]
fn gumbel_hard_frequencies_are_uniform_for_equal_logits() {
    let k = 5;
    let n = 100_000;
    let rc = RelaxedCategorical::new(vec![0.0; k], 0.1).unwrap();
    let mut r = rng::stream(5, "gumbel-freq");
    let mut counts = vec![0usize; k];
    for _ in 0..n {
        counts[argmax(&gumbel_softmax_sample(&rc, &mut r))] += 1;
    }
    let p = 1.0 / k as f64;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - n as f64 * p).abs() < 3.0 * sd, "{c}");
    }
}

#[test]
fn gumbel_softmax_gradcheck_with_fixed_noise() {
    let mut r = rng::stream(9, "gs-grad");
    let noise = gumbel_noise(&mut r, 6);
    let logits = Tensor::matrix(2, 3, vec![0.2, -1.0, 0.5, 1.5, 0.0, -0.3]);
    let weights = Tensor::matrix(2, 3, vec![1.0, -2.0, 0.5, 0.3, 0.9, -1.1]);
    let err = gradcheck(
        |tape, x| {
            let g = tape.constant(Tensor::matrix(2, 3, noise.clone()));
            let w = tape.constant(weights.clone());
            gumbel_softmax_var(x, g, 0.5)?.mul(w)?.sum()
        },
        &logits,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn gaussian_rsample_moments() {
    let g = DiagGaussian::new(vec![0.5, -1.0], vec![0.3, 2.0]).unwrap();
    let mut r = rng::stream(13, "rsample");
    let n = 100_000;
    let draws: Vec<Vec<f64>> = (0..n).map(|_| gaussian_rsample(&g, &mut r)).collect();
    for l in 0..2 {
        let mean = draws.iter().map(|d| d[l]).sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d[l] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let s = g.sigma()[l];
        assert!((mean - g.mu()[l]).abs() < 3.0 * s / (n as f64).sqrt(), "mean {mean}");
        assert!((var / (s * s) - 1.0).abs() < 0.05, "var {var}");
    }
}

#[test]
fn rsample_gradient_flows_to_mu_and_sigma() {
    let tape = Tape::<f64>::new();
    let mu = tape.param(Tensor::vector(vec![0.1, 0.2]));
    let sigma = tape.param(Tensor::vector(vec![0.5, 1.5]));
    let eps = tape.constant(Tensor::vector(vec![0.7, -0.4]));
    let z = mu.add(sigma.mul(eps).unwrap()).unwrap();
    tape.backward(z.sum().unwrap()).unwrap();
    assert_eq!(mu.grad().unwrap().data(), &[1.0, 1.0]);
    assert_eq!(sigma.grad().unwrap().data(), &[0.7, -0.4]);
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
}

proptest! {
    #[test]
    fn gaussian_kl_nonnegative(
        qm in -3.0f64..3.0, qs in 0.1f64..3.0, pm in -3.0f64..3.0, ps in 0.1f64..3.0
    ) {
        let q = DiagGaussian::new(vec![qm], vec![qs]).unwrap();
        let p = DiagGaussian::new(vec![pm], vec![ps]).unwrap();
        prop_assert!(gaussian_kl(&q, &p, 1).unwrap() >= -1e-15);
        prop_assert_eq!(gaussian_kl(&q, &q, 1).unwrap(), 0.0);
    }

    #[test]
    fn categorical_kl_nonnegative(raw_q in prop::collection::vec(0.01f64..1.0, 2..10)) {
        let k = raw_q.len();
        let s: f64 = raw_q.iter().sum();
        let q: Vec<f64> = raw_q.iter().map(|v| v / s).collect();
        let p = vec![1.0 / k as f64; k];
        prop_assert!(categorical_kl(&q, &p).unwrap() >= 0.0);
        prop_assert!(categorical_kl(&q, &q).unwrap().abs() < 1e-12);
    }

    #[test]
    fn compound_sums_to_one(a in 0.05f64..20.0, b in 0.05f64..20.0, cap in 1usize..150) {
        let total: f64 = compound_probs(a, b, cap).unwrap().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }
}
