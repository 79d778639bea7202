//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

pub fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive definite matrix, `None` if not PD.
pub fn inverse_pd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| symmetrize(c.inverse()))
}

/// `log det` of a symmetric positive definite matrix, `None` if not PD.
pub fn log_det_pd(m: &DMatrix<f64>) -> Option<f64> {
    let c = m.clone().cholesky()?;
    Some(2.0 * c.l().diagonal().iter().map(|x| x.ln()).sum::<f64>())
}

/// Differential entropy of a Gaussian with covariance `cov`.
pub fn gaussian_entropy(cov: &DMatrix<f64>) -> Option<f64> {
    let k = cov.nrows() as f64;
    Some(0.5 * (k * (1.0 + (2.0 * std::f64::consts::PI).ln()) + log_det_pd(cov)?))
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            s += a[(r, c)] * b[(c, r)];
        }
    }
    s
}

/// `v' M v` without allocating.
pub fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let mut s = 0.0;
    for c in 0..m.ncols() {
        let mut col = 0.0;
        for r in 0..m.nrows() {
            col += m[(r, c)] * v[r];
        }
        s += col * v[c];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_product_matches_dense() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 3.0]);
        assert!((trace_product(&a, &b) - (&a * &b).trace()).abs() < 1e-14);
    }

    #[test]
    fn quad_form_matches_dense() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let v = DVector::from_vec(vec![0.5, -2.0]);
        assert!((quad_form(&m, &v) - v.dot(&(&m * &v))).abs() < 1e-14);
    }

    #[test]
    fn entropy_of_standard_normal() {
        let h = gaussian_entropy(&DMatrix::identity(1, 1)).unwrap();
        assert!((h - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()).abs() < 1e-14);
        assert!(log_det_pd(&DMatrix::from_row_slice(1, 1, &[-1.0])).is_none());
    }
}
