//! Evaluation metrics, plug-in edge prediction and Procrustes alignment.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{LikelihoodKind, VariationalState};

/// Sample Pearson correlation.
pub fn pcc(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Shape(format!(
            "pcc needs two equal-length inputs of length >= 2, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Argument("pcc of a zero-variance input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Area under the ROC curve as the Mann-Whitney statistic, ties counted 1/2.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Argument("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Argument("auc needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of mid-ranks of the positives
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        let mid = (k + end + 1) as f64 / 2.0;
        rank_sum += mid * order[k..end].iter().filter(|&&o| labels[o]).count() as f64;
        k = end;
    }
    let (p, q) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Root mean squared error of latent inner products over ordered pairs
/// `i != j` and all time points.
pub fn rmse_inner_products(est: &[DMatrix<f64>], truth: &[DMatrix<f64>]) -> Result<f64> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(Error::Shape(format!(
            "trajectories have {} and {} time points",
            est.len(),
            truth.len()
        )));
    }
    let n = truth[0].nrows();
    let mut ss = 0.0;
    for (e, x) in est.iter().zip(truth) {
        if e.nrows() != n || x.nrows() != n {
            return Err(Error::Shape(
                "node counts differ across trajectories".into(),
            ));
        }
        let diff = e * e.transpose() - x * x.transpose();
        ss += diff.norm_squared() - diff.diagonal().norm_squared();
    }
    if n < 2 {
        return Err(Error::Shape("need at least two nodes".into()));
    }
    Ok((ss / (est.len() * n * (n - 1)) as f64).sqrt())
}

/// Plug-in predictions for `(t, i, j)` triples: the mean `mu_beta + mu_it'mu_jt`
/// for gaussian data, its logistic transform for bernoulli data.
pub fn predict_edges(
    state: &VariationalState,
    kind: LikelihoodKind,
    pairs: &[(usize, usize, usize)],
) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|&(t, i, j)| {
            if t >= state.t_len || i >= state.n || j >= state.n {
                return Err(Error::Argument(format!(
                    "pair (t={t}, i={i}, j={j}) outside n={}, T={}",
                    state.n, state.t_len
                )));
            }
            let m = state.beta.mean + state.mean(i, t).dot(state.mean(j, t));
            Ok(match kind {
                LikelihoodKind::Gaussian => m,
                LikelihoodKind::Bernoulli => 1.0 / (1.0 + (-m).exp()),
            })
        })
        .collect()
}

/// Fraction of held-out entries that are true edges predicted above 0.5.
pub fn tp_ratio(preds: &[f64], labels: &[bool]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions but {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Argument("empty held-out set".into()));
    }
    let hits = preds
        .iter()
        .zip(labels)
        .filter(|(&p, &l)| l && p > 0.5)
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Orthogonal `R` minimising `||x R - target||_F`, with each left singular
/// vector of `x'target` sign-fixed so its largest-magnitude entry is positive.
pub fn procrustes_rotation(x: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "procrustes shapes {:?} and {:?}",
            x.shape(),
            target.shape()
        )));
    }
    let svd = (x.transpose() * target).svd(true, true);
    let (mut u, mut v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Argument("SVD failed in procrustes alignment".into())),
    };
    for k in 0..u.ncols() {
        let col = u.column(k);
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            u.column_mut(k).neg_mut();
            v_t.row_mut(k).neg_mut();
        }
    }
    Ok(u * v_t)
}

/// One `n x d` matrix per time point.
pub type Trajectory = Vec<DMatrix<f64>>;

/// Sequentially rotate each time point onto its already-aligned predecessor.
/// Returns the aligned trajectory and the rotations (identity at `t = 0`).
pub fn procrustes_align(trajectory: &[DMatrix<f64>]) -> Result<(Trajectory, Trajectory)> {
    let Some(first) = trajectory.first() else {
        return Err(Error::Shape("empty trajectory".into()));
    };
    let d = first.ncols();
    let mut aligned = vec![first.clone()];
    let mut rotations = vec![DMatrix::identity(d, d)];
    for x in &trajectory[1..] {
        let r = procrustes_rotation(x, aligned.last().expect("non-empty"))?;
        aligned.push(x * &r);
        rotations.push(r);
    }
    Ok((aligned, rotations))
}
