use dynlsm::simulate::{mask_edges, simulate_binary, simulate_gaussian, unmask};
use dynlsm::validate_series;

fn increment_moments(truth: &[nalgebra::DMatrix<f64>]) -> (f64, f64) {
    // pooled lag variance and covariance between consecutive increments
    let (n, d) = truth[0].shape();
    let (mut var, mut cov, mut nv, mut nc) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for k in 0..d {
            let inc: Vec<f64> = (1..truth.len())
                .map(|t| truth[t][(i, k)] - truth[t - 1][(i, k)])
                .collect();
            for (s, e) in inc.iter().enumerate() {
                var += e * e;
                nv += 1.0;
                if s + 1 < inc.len() {
                    cov += e * inc[s + 1];
                    nc += 1.0;
                }
            }
        }
    }
    (var / nv, cov / nc)
}

#[test]
fn independent_increments_have_variance_tau_squared() {
    let tau = 0.3;
    let sim = simulate_binary(200, 30, 2, tau, 0.0, 1.0, 11).unwrap();
    let (var, cov) = increment_moments(&sim.truth);
    assert!((var / (tau * tau) - 1.0).abs() < 0.05, "variance {var}");
    assert!(cov.abs() < 0.05 * tau * tau, "covariance {cov}");
}

#[test]
fn correlated_increments_share_rho() {
    let (tau, rho) = (0.3, 0.8);
    let sim = simulate_binary(400, 10, 2, tau, rho, 1.0, 12).unwrap();
    let (var, cov) = increment_moments(&sim.truth);
    assert!((var / (tau * tau) - 1.0).abs() < 0.05, "variance {var}");
    assert!((cov / (tau * tau) - rho).abs() < 0.05, "covariance {cov}");
}

#[test]
fn gaussian_noise_averages_out() {
    let sim = simulate_gaussian(200, 3, 2, 0.5, 0.1, 0.1, 13).unwrap();
    let s = &sim.series;
    let (mut sum, mut sum2, mut count) = (0.0, 0.0, 0.0);
    for (t, i, j) in s.observed_pairs() {
        let x = &sim.truth[t];
        let r = s.value(t, i, j) - 0.1 - x.row(i).dot(&x.row(j));
        sum += r;
        sum2 += r * r;
        count += 1.0;
    }
    let mean = sum / count;
    let sd = (sum2 / count - mean * mean).sqrt();
    assert!(mean.abs() < 3.0 * 0.1 / count.sqrt(), "mean {mean}");
    assert!((sd / 0.1 - 1.0).abs() < 0.01, "sd {sd}");
}

#[test]
fn simulated_series_validate() {
    let b = simulate_binary(15, 4, 3, 0.1, 0.5, 1.0, 14).unwrap();
    assert_eq!(validate_series(&b.series).unwrap(), b.series);
    assert!(b.probs.iter().all(|p| (0.0..=1.0).contains(p)));
    let g = simulate_gaussian(15, 4, 3, 0.1, 0.1, 0.1, 14).unwrap();
    assert_eq!(validate_series(&g.series).unwrap(), g.series);
}

#[test]
fn simulation_is_deterministic_per_seed() {
    let a = simulate_binary(10, 3, 2, 0.1, 0.8, 1.0, 5).unwrap();
    let b = simulate_binary(10, 3, 2, 0.1, 0.8, 1.0, 5).unwrap();
    let c = simulate_binary(10, 3, 2, 0.1, 0.8, 1.0, 6).unwrap();
    assert_eq!(a.series, b.series);
    assert_eq!(a.truth, b.truth);
    assert_ne!(a.truth, c.truth);
}

#[test]
fn holdout_fraction_within_binomial_band() {
    let sim = simulate_binary(60, 5, 2, 0.1, 0.0, 1.0, 15).unwrap();
    let p = 0.2;
    let (train, heldout) = mask_edges(&sim.series, p, 16).unwrap();
    let pairs = sim.series.n_observed_pairs() as f64;
    let sd = (pairs * p * (1.0 - p)).sqrt();
    assert!((heldout.len() as f64 - pairs * p).abs() < 3.0 * sd);
    assert_eq!(
        train.n_observed_pairs() + heldout.len(),
        sim.series.n_observed_pairs()
    );
    for e in &heldout {
        assert!(!train.is_observed(e.t, e.i, e.j) && !train.is_observed(e.t, e.j, e.i));
        assert_eq!(train.value(e.t, e.i, e.j), 0.0);
    }
    assert_eq!(unmask(&train, &heldout).unwrap(), sim.series);
}

#[test]
fn masking_never_reveals_unobserved_pairs() {
    let sim = simulate_binary(20, 3, 2, 0.1, 0.0, 1.0, 17).unwrap();
    let (once, _) = mask_edges(&sim.series, 0.5, 1).unwrap();
    let (twice, second) = mask_edges(&once, 0.5, 2).unwrap();
    assert!(second.iter().all(|e| once.is_observed(e.t, e.i, e.j)));
    assert!(twice.n_observed_pairs() <= once.n_observed_pairs());
}

#[test]
fn invalid_arguments_are_rejected() {
    assert!(simulate_binary(10, 3, 2, 0.1, 1.0, 1.0, 0).is_err());
    assert!(simulate_binary(1, 3, 2, 0.1, 0.0, 1.0, 0).is_err());
    assert!(simulate_gaussian(10, 3, 2, 0.1, 0.0, 0.0, 0).is_err());
    let sim = simulate_binary(5, 2, 2, 0.1, 0.0, 1.0, 0).unwrap();
    assert!(mask_edges(&sim.series, 1.0, 0).is_err());
}
