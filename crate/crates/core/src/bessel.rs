//! Logarithm of the modified Bessel function of the second kind, `log K_nu(x)`,
//! for real order and positive argument.
//!
//! Orders below [`DEBYE_ORDER`] use Temme's series (`x < 2`) or Steed's
//! continued fraction (`x >= 2`) for the fractional order `mu in [-1/2, 1/2]`
//! followed by upward recurrence carried as ratios `K_{k+1} / K_k`, which
//! never overflow. Larger orders use the uniform asymptotic (Debye)
//! expansion. Both paths work entirely on the log scale.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Orders at or above this use the uniform asymptotic expansion.
pub const DEBYE_ORDER: f64 = 50.0;

const EPS: f64 = 1e-17;
const MAX_ITER: usize = 100_000;
const DEBYE_TERMS: usize = 14;

/// Taylor coefficients of `1/Gamma(1+z) = sum_k c_k z^k`.
const RECIP_GAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// `(gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu))` for `|mu| <= 1/2`, where
/// `gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)` and
/// `gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2`.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let mut even = 0.0;
    let mut odd = 0.0;
    // Horner over even and odd coefficients separately, in mu^2
    let mu2 = mu * mu;
    for k in (0..RECIP_GAMMA.len()).rev() {
        if k % 2 == 0 {
            even = even * mu2 + RECIP_GAMMA[k];
        }
    }
    for k in (0..RECIP_GAMMA.len()).rev() {
        if k % 2 == 1 {
            odd = odd * mu2 + RECIP_GAMMA[k];
        }
    }
    // 1/Gamma(1 +- mu) = even(mu^2) +- mu * odd(mu^2)
    let gampl = even + mu * odd;
    let gammi = even - mu * odd;
    (-odd, even, gampl, gammi)
}

/// `(log K_mu(x), K_{mu+1}(x) / K_mu(x))` for `|mu| <= 1/2`.
fn fractional_order(mu: f64, x: f64) -> (f64, f64) {
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < 1e-15 {
            1.0
        } else {
            pimu / pimu.sin()
        };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < 1e-15 { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..MAX_ITER {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu * mu);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        (sum.ln(), sum1 * (2.0 / x) / sum)
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu * mu;
        let mut c = a1;
        let mut q = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 2..MAX_ITER {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        let log_k = 0.5 * (PI / (2.0 * x)).ln() - x - s.ln();
        (log_k, (mu + x + 0.5 - h) / x)
    }
}

/// Debye polynomials `u_k(p)` as coefficient vectors (ascending powers).
fn debye_polynomials() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
        for k in 0..DEBYE_TERMS {
            let u = &polys[k];
            let mut next = vec![0.0; u.len() + 3];
            // (1/2) p^2 (1 - p^2) u'(p)
            for (m, &coef) in u.iter().enumerate().skip(1) {
                let dm = coef * m as f64 * 0.5;
                next[m + 1] += dm;
                next[m + 3] -= dm;
            }
            // (1/8) int_0^p (1 - 5 s^2) u(s) ds
            for (m, &coef) in u.iter().enumerate() {
                next[m + 1] += 0.125 * coef / (m + 1) as f64;
                next[m + 3] -= 0.625 * coef / (m + 3) as f64;
            }
            polys.push(next);
        }
        polys
    })
}

fn log_k_debye(nu: f64, x: f64) -> f64 {
    let z = x / nu;
    let root = z.hypot(1.0);
    let p = 1.0 / root;
    // eta = sqrt(1 + z^2) + log(z / (1 + sqrt(1 + z^2)))
    let eta = root + (z / (1.0 + root)).ln();
    let mut series = 0.0;
    let mut nu_pow = 1.0;
    for (k, poly) in debye_polynomials().iter().enumerate() {
        let uk = poly.iter().rev().fold(0.0, |acc, &c| acc * p + c);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        series += sign * uk / nu_pow;
        nu_pow *= nu;
    }
    0.5 * (PI / (2.0 * nu)).ln() - nu * eta - 0.25 * (z * z).ln_1p() + series.ln()
}

/// `log K_nu(x)` for real `nu` and `x > 0`.
pub fn log_bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Argument(format!(
            "Bessel K argument must be positive and finite, got {x}"
        )));
    }
    if !nu.is_finite() {
        return Err(Error::Argument(format!(
            "Bessel K order must be finite, got {nu}"
        )));
    }
    let nu = nu.abs();
    if nu >= DEBYE_ORDER {
        return Ok(log_k_debye(nu, x));
    }
    Ok(log_k_recurrence(nu, x))
}

/// Temme/Steed at the fractional order plus upward ratio recurrence.
pub(crate) fn log_k_recurrence(nu: f64, x: f64) -> f64 {
    let steps = nu.round();
    let mu = nu - steps;
    let (mut log_k, mut ratio) = fractional_order(mu, x);
    for i in 0..steps as usize {
        log_k += ratio.ln();
        // K_{m+1} = K_{m-1} + (2m/x) K_m with m = mu + i + 1
        ratio = 1.0 / ratio + 2.0 * (mu + i as f64 + 1.0) / x;
    }
    log_k
}
