mod common;

use dynlsm::engine::{elbo_fixed_scale, elbo_fixed_scale_gaussian, sweep};
use dynlsm::likelihood::expected_square_logit;
use dynlsm::simulate::{simulate_binary, simulate_gaussian};
use dynlsm::{
    init_state, Family, LikelihoodKind, ModelConfig, NetworkSeries, ScaleMode, VariationalState,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use common::rng;

/// Probabilists' Gauss-Hermite rule (weights sum to one) by Golub-Welsch.
fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    let jac = DMatrix::from_fn(m, m, |r, c| {
        if r + 1 == c || c + 1 == r {
            (r.max(c) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let nodes = eig.eigenvalues.iter().cloned().collect();
    let weights = (0..m).map(|k| eig.eigenvectors[(0, k)].powi(2)).collect();
    (nodes, weights)
}

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean).powi(2) / var)
}

fn ln_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Node chain joint `(x_i1, x_i2)` for `d = 1`, `T = 2`.
fn node_joint(st: &VariationalState, i: usize) -> (DVector<f64>, DMatrix<f64>) {
    let (a, b) = (st.marginal(i, 0), st.marginal(i, 1));
    let c = st.cross_cov(i, 0)[(0, 0)];
    (
        DVector::from_vec(vec![a.mean[0], b.mean[0]]),
        DMatrix::from_row_slice(2, 2, &[a.cov[(0, 0)], c, c, b.cov[(0, 0)]]),
    )
}

/// ELBO of a two-node, two-time, one-dimensional model by tensor
/// Gauss-Hermite quadrature over `(x_0, x_1, beta)`.
fn elbo_by_quadrature(st: &VariationalState, data: &NetworkSeries, cfg: &ModelConfig) -> f64 {
    let ScaleMode::Fixed { sigma0, tau } = cfg.scales else {
        panic!("fixed scales only")
    };
    let (nodes, weights) = gauss_hermite(12);
    let (m0, s0) = node_joint(st, 0);
    let (m1, s1) = node_joint(st, 1);
    let (l0, l1) = (
        s0.clone().cholesky().unwrap().l(),
        s1.clone().cholesky().unwrap().l(),
    );
    let (ld0, ld1) = (s0.determinant().ln(), s1.determinant().ln());
    let (s0i, s1i) = (s0.try_inverse().unwrap(), s1.try_inverse().unwrap());
    let ln_q2 = |x: &DVector<f64>, m: &DVector<f64>, inv: &DMatrix<f64>, ld: f64| {
        let r = x - m;
        -(2.0 * std::f64::consts::PI).ln() - 0.5 * ld - 0.5 * r.dot(&(inv * &r))
    };
    let k = nodes.len();
    let mut total = 0.0;
    for a in 0..k {
        for b in 0..k {
            let x0 = &m0 + &l0 * DVector::from_vec(vec![nodes[a], nodes[b]]);
            for c in 0..k {
                for e in 0..k {
                    let x1 = &m1 + &l1 * DVector::from_vec(vec![nodes[c], nodes[e]]);
                    for g in 0..k {
                        let beta = st.beta.mean + st.beta.var.sqrt() * nodes[g];
                        let w = weights[a] * weights[b] * weights[c] * weights[e] * weights[g];
                        let mut f = 0.0;
                        for t in 0..2 {
                            if !data.is_observed(t, 0, 1) {
                                continue;
                            }
                            let eta = beta + x0[t] * x1[t];
                            let y = data.value(t, 0, 1);
                            f += cfg.alpha
                                * match data.kind() {
                                    LikelihoodKind::Gaussian => {
                                        let s = data.noise_sd().unwrap();
                                        ln_normal(y, eta, s * s)
                                    }
                                    LikelihoodKind::Bernoulli => {
                                        y * ln_sigmoid(eta) + (1.0 - y) * ln_sigmoid(-eta)
                                    }
                                };
                        }
                        for x in [&x0, &x1] {
                            f += ln_normal(x[0], 0.0, sigma0 * sigma0);
                            f += ln_normal(x[1], x[0], tau * tau);
                        }
                        f += ln_normal(beta, cfg.beta_prior.mean, cfg.beta_prior.var);
                        f -= ln_q2(&x0, &m0, &s0i, ld0) + ln_q2(&x1, &m1, &s1i, ld1);
                        f -= ln_normal(beta, st.beta.mean, st.beta.var);
                        total += w * f;
                    }
                }
            }
        }
    }
    total
}

fn fixed_cfg(d: usize, family: Family) -> ModelConfig {
    ModelConfig {
        d,
        family,
        scales: ScaleMode::Fixed {
            sigma0: 0.8,
            tau: 0.4,
        },
        ..Default::default()
    }
}

fn two_node(kind: LikelihoodKind) -> NetworkSeries {
    let values = [0.0, 0.7, 0.7, 0.0, 0.0, 1.0, 1.0, 0.0];
    let values = match kind {
        LikelihoodKind::Gaussian => values.iter().map(|v| v * 1.3 - 0.2).collect(),
        LikelihoodKind::Bernoulli => values
            .iter()
            .map(|v| if *v > 0.5 { 1.0 } else { 0.0 })
            .collect(),
    };
    let sd = (kind == LikelihoodKind::Gaussian).then_some(0.5);
    NetworkSeries::new(kind, 2, 2, values, None, sd).unwrap()
}

#[test]
fn gaussian_elbo_matches_quadrature() {
    let data = two_node(LikelihoodKind::Gaussian);
    let cfg = fixed_cfg(1, Family::Smf);
    let mut st = init_state(&cfg, &data).unwrap();
    for _ in 0..3 {
        sweep(&mut st, &data, &cfg).unwrap();
        let got = elbo_fixed_scale_gaussian(&st, &data, &cfg).unwrap();
        let want = elbo_by_quadrature(&st, &data, &cfg);
        assert!((got - want).abs() <= 1e-6 * want.abs(), "{got} vs {want}");
    }
    assert!(st.cross_cov(0, 0)[(0, 0)].abs() > 0.0);
}

#[test]
fn tangent_elbo_is_a_lower_bound() {
    let data = two_node(LikelihoodKind::Bernoulli);
    let cfg = fixed_cfg(1, Family::Smf);
    let mut st = init_state(&cfg, &data).unwrap();
    for _ in 0..3 {
        sweep(&mut st, &data, &cfg).unwrap();
        let bound = elbo_fixed_scale(&st, &data, &cfg).unwrap();
        let exact = elbo_by_quadrature(&st, &data, &cfg);
        assert!(bound <= exact + 1e-9, "{bound} > {exact}");
    }
}

fn assert_monotone(data: &NetworkSeries, cfg: &ModelConfig, sweeps: usize) {
    let mut st = init_state(cfg, data).unwrap();
    let mut prev = elbo_fixed_scale(&st, data, cfg).unwrap();
    for k in 0..sweeps {
        sweep(&mut st, data, cfg).unwrap();
        let cur = elbo_fixed_scale(&st, data, cfg).unwrap();
        assert!(
            cur >= prev - 1e-8 * prev.abs(),
            "sweep {k}: {prev} -> {cur}"
        );
        prev = cur;
    }
}

#[test]
fn mean_field_elbo_is_monotone() {
    let sim = simulate_gaussian(8, 5, 2, 0.3, 0.1, 0.4, 77).unwrap();
    assert_monotone(&sim.series, &fixed_cfg(2, Family::Mf), 25);
}

#[test]
fn tangent_elbo_is_monotone() {
    let sim = simulate_binary(10, 4, 2, 0.2, 0.5, 1.0, 78).unwrap();
    assert_monotone(&sim.series, &fixed_cfg(2, Family::Smf), 25);
    assert_monotone(&sim.series, &fixed_cfg(2, Family::Mf), 25);
}

#[test]
fn expected_square_logit_matches_monte_carlo() {
    let sim = simulate_binary(6, 2, 3, 0.2, 0.0, 1.0, 79).unwrap();
    let cfg = fixed_cfg(3, Family::Smf);
    let mut st = init_state(&cfg, &sim.series).unwrap();
    for _ in 0..2 {
        sweep(&mut st, &sim.series, &cfg).unwrap();
    }
    let (mi, mj) = (st.marginal(1, 1).clone(), st.marginal(4, 1).clone());
    let (li, lj) = (
        mi.cov.clone().cholesky().unwrap().l(),
        mj.cov.clone().cholesky().unwrap().l(),
    );
    let mut r = rng(80);
    let draws = 200_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..draws {
        let z = |r: &mut rand_chacha::ChaCha20Rng| {
            DVector::from_fn(3, |_, _| r.sample::<f64, _>(StandardNormal))
        };
        let xi = &mi.mean + &li * z(&mut r);
        let xj = &mj.mean + &lj * z(&mut r);
        let beta = st.beta.mean + st.beta.var.sqrt() * r.sample::<f64, _>(StandardNormal);
        let v = (beta + xi.dot(&xj)).powi(2);
        sum += v;
        sum2 += v * v;
    }
    let mean = sum / draws as f64;
    let se = ((sum2 / draws as f64 - mean * mean) / draws as f64).sqrt();
    let want = expected_square_logit(&st, 1, 1, 4);
    assert!((mean - want).abs() < 5.0 * se, "{mean} vs {want} (se {se})");
}
