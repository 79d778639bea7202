//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use dynlsm::chain::ChainPotentials;
use dynlsm::CanonicalGaussian;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut kronrod = K15_WEIGHTS[7] * f(c);
    let mut gauss = G7_WEIGHTS[3] * f(c);
    for k in 0..7 {
        let x = h * GK_NODES[k];
        let s = f(c - x) + f(c + x);
        kronrod += K15_WEIGHTS[k] * s;
        if k % 2 == 1 {
            gauss += G7_WEIGHTS[k / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature by interval bisection.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let (whole, _) = gk15(&f, a, b);
    let scale = whole.abs().max(1e-300);
    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = gk15(&f, lo, hi);
        if err <= rel_tol * scale || depth > 50 {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

/// `ln ∫ exp(k u - (a e^u + b e^-u) / 2) du`, i.e. the log of
/// `∫ x^(k-1) exp(-(a x + b / x) / 2) dx`. The integrand is log-concave in
/// `u`; it is centred at its mode and cut where it falls 80 nats below.
pub fn log_gig_kernel_integral(k: f64, a: f64, b: f64) -> f64 {
    let g = |u: f64| k * u - 0.5 * (a * u.exp() + b * (-u).exp());
    let s = (k * k + a * b).sqrt();
    let mode_exp = if k >= 0.0 { (k + s) / a } else { b / (s - k) };
    let u0 = mode_exp.ln();
    let g0 = g(u0);
    let curvature = 0.5 * (a * u0.exp() + b * (-u0).exp());
    let width = 1.0 / curvature.sqrt();
    let mut lo = u0 - width;
    while g(lo) > g0 - 80.0 {
        lo = u0 - 2.0 * (u0 - lo);
    }
    let mut hi = u0 + width;
    while g(hi) > g0 - 80.0 {
        hi = u0 + 2.0 * (hi - u0);
    }
    // split at the mode so both halves are monotone
    let f = |u: f64| (g(u) - g0).exp();
    let mass = integrate(f, lo, u0, 1e-13) + integrate(f, u0, hi, 1e-13);
    g0 + mass.ln()
}

/// `E[1/X]` for `X ~ GIG(p, a, b)` by quadrature of the unnormalised density.
pub fn gig_mean_inverse_quadrature(p: f64, a: f64, b: f64) -> f64 {
    (log_gig_kernel_integral(p - 1.0, a, b) - log_gig_kernel_integral(p, a, b)).exp()
}

/// `E[1/X]` for `X ~ InvGamma(shape, rate)` by quadrature of
/// `x^(-shape-1) exp(-rate / x)`.
pub fn ig_mean_inverse_quadrature(shape: f64, rate: f64) -> f64 {
    (log_gig_kernel_integral(-shape - 1.0, 0.0, 2.0 * rate)
        - log_gig_kernel_integral(-shape, 0.0, 2.0 * rate))
    .exp()
}

/// `ln K_{n + 1/2}(x)` from the terminating series
/// `sqrt(pi / 2x) e^-x sum_k (n+k)! / (k! (n-k)! (2x)^k)`.
pub fn log_k_half_integer(n: u32, x: f64) -> f64 {
    let mut log_terms = vec![0.0];
    let mut log_term = 0.0;
    for k in 1..=n {
        let (n, k) = (n as f64, k as f64);
        log_term += ((n + k) * (n - k + 1.0) / (k * 2.0 * x)).ln();
        log_terms.push(log_term);
    }
    let m = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_terms.iter().map(|l| (l - m).exp()).sum();
    0.5 * (std::f64::consts::PI / (2.0 * x)).ln() - x + m + sum.ln()
}

/// Random symmetric positive definite `d x d` matrix with eigenvalues
/// bounded below by `floor`.
pub fn random_spd(rng: &mut ChaCha20Rng, d: usize, floor: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * floor
}

/// Chain with unary precisions dominating the coupling, so the joint
/// precision is positive definite.
pub fn random_pd_chain(rng: &mut ChaCha20Rng, d: usize, t_len: usize) -> ChainPotentials {
    let coupling = rng.random_range(0.0..3.0);
    let unary = (0..t_len)
        .map(|_| CanonicalGaussian {
            j: random_spd(rng, d, 2.0 * coupling + 0.05),
            h: DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)),
        })
        .collect();
    ChainPotentials { unary, coupling }
}

/// Dense block-tridiagonal precision of a chain, inverted directly.
/// Returns means, marginal covariances and lag-one cross-covariances.
pub fn dense_marginals(
    pots: &ChainPotentials,
) -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let t_len = pots.unary.len();
    let d = pots.unary[0].h.len();
    let dim = t_len * d;
    let mut prec = DMatrix::zeros(dim, dim);
    let mut shift = DVector::zeros(dim);
    for (t, u) in pots.unary.iter().enumerate() {
        prec.view_mut((t * d, t * d), (d, d)).copy_from(&u.j);
        shift.rows_mut(t * d, d).copy_from(&u.h);
        if t + 1 < t_len {
            for k in 0..d {
                prec[(t * d + k, (t + 1) * d + k)] = -pots.coupling;
                prec[((t + 1) * d + k, t * d + k)] = -pots.coupling;
            }
        }
    }
    let cov = prec
        .try_inverse()
        .expect("dense chain precision invertible");
    let mean = &cov * shift;
    let means = (0..t_len)
        .map(|t| mean.rows(t * d, d).into_owned())
        .collect();
    let covs = (0..t_len)
        .map(|t| cov.view((t * d, t * d), (d, d)).into_owned())
        .collect();
    let cross = (0..t_len.saturating_sub(1))
        .map(|t| cov.view((t * d, (t + 1) * d), (d, d)).into_owned())
        .collect();
    (means, covs, cross)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
