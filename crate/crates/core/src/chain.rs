//! Exact Gaussian message passing along one node's temporal chain.
//!
//! The chain density is `prod_t phi_t(x_t) * prod_t exp(c * x_t' x_{t+1})`
//! with every unary potential in canonical form. Its precision is block
//! tridiagonal with `unary[t].J` on the diagonal and `-c I` off the diagonal,
//! so a forward and a backward sweep of Schur complements yield all unary and
//! pairwise marginals in `O(T d^3)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::model::{CanonicalGaussian, GaussianMoment};

#[derive(Debug, Clone, PartialEq)]
pub struct ChainPotentials {
    pub unary: Vec<CanonicalGaussian>,
    /// Coupling `c` of `psi(x, y) = exp(c y'x)`; the expected inverse
    /// transition variance.
    pub coupling: f64,
}

impl ChainPotentials {
    pub fn len(&self) -> usize {
        self.unary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unary.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.unary.first().map_or(0, CanonicalGaussian::dim)
    }
}

/// `forward[t]` is the message from `t` into `t + 1`, `backward[t]` the
/// message from `t + 1` into `t`. Boundary messages are the constant
/// function, i.e. `(J = 0, h = 0)`, and are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    pub forward: Vec<CanonicalGaussian>,
    pub backward: Vec<CanonicalGaussian>,
}

impl MessageSet {
    /// Message arriving at `t` from `t - 1`.
    fn incoming_past(&self, t: usize, d: usize) -> CanonicalGaussian {
        if t == 0 {
            CanonicalGaussian::zeros(d)
        } else {
            self.forward[t - 1].clone()
        }
    }

    /// Message arriving at `t` from `t + 1`.
    fn incoming_future(&self, t: usize, d: usize) -> CanonicalGaussian {
        if t >= self.backward.len() {
            CanonicalGaussian::zeros(d)
        } else {
            self.backward[t].clone()
        }
    }
}

/// Joint Gaussian of `(x_t, x_{t+1})`, stacked as a `2d` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMarginal {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl PairMarginal {
    pub fn dim(&self) -> usize {
        self.mean.len() / 2
    }

    /// `Cov(x_t, x_{t+1})`.
    pub fn cross_cov(&self) -> DMatrix<f64> {
        let d = self.dim();
        self.cov.view((0, d), (d, d)).into_owned()
    }

    pub fn first(&self) -> GaussianMoment {
        let d = self.dim();
        GaussianMoment {
            mean: self.mean.rows(0, d).into_owned(),
            cov: self.cov.view((0, 0), (d, d)).into_owned(),
        }
    }

    pub fn second(&self) -> GaussianMoment {
        let d = self.dim();
        GaussianMoment {
            mean: self.mean.rows(d, d).into_owned(),
            cov: self.cov.view((d, d), (d, d)).into_owned(),
        }
    }
}

fn not_pd(context: &'static str, t: usize) -> Error {
    Error::NotPositiveDefinite {
        context,
        node: None,
        time: Some(t),
    }
}

/// Integrate `x` out of `exp(-x'Px/2 + h'x) exp(c y'x)`, giving the message
/// `(J = -c^2 P^-1, h = c P^-1 h)` in `y`.
fn marginalize(p: &CanonicalGaussian, c: f64, t: usize) -> Result<CanonicalGaussian> {
    let d = p.dim();
    if c == 0.0 {
        return Ok(CanonicalGaussian::zeros(d));
    }
    let chol =
        p.j.clone()
            .cholesky()
            .ok_or_else(|| not_pd("chain message marginalization", t))?;
    let p_inv = symmetrize(chol.inverse());
    let p_inv_h = chol.solve(&p.h);
    Ok(CanonicalGaussian {
        j: p_inv * (-c * c),
        h: p_inv_h * c,
    })
}

pub fn compute_messages(pots: &ChainPotentials) -> Result<MessageSet> {
    let t_len = pots.len();
    let d = pots.dim();
    if t_len < 2 {
        return Ok(MessageSet {
            forward: Vec::new(),
            backward: Vec::new(),
        });
    }
    let c = pots.coupling;

    let mut forward: Vec<CanonicalGaussian> = Vec::with_capacity(t_len - 1);
    for t in 0..t_len - 1 {
        let combined = match forward.last() {
            Some(m) => &pots.unary[t] + m,
            None => pots.unary[t].clone(),
        };
        forward.push(marginalize(&combined, c, t)?);
    }

    let mut backward = vec![CanonicalGaussian::zeros(d); t_len - 1];
    for t in (1..t_len).rev() {
        let combined = if t == t_len - 1 {
            pots.unary[t].clone()
        } else {
            &pots.unary[t] + &backward[t]
        };
        backward[t - 1] = marginalize(&combined, c, t)?;
    }

    Ok(MessageSet { forward, backward })
}

pub fn unary_marginals(pots: &ChainPotentials, msgs: &MessageSet) -> Result<Vec<GaussianMoment>> {
    let d = pots.dim();
    (0..pots.len())
        .map(|t| {
            let belief =
                &(&pots.unary[t] + &msgs.incoming_past(t, d)) + &msgs.incoming_future(t, d);
            belief
                .to_moment()
                .map_err(|_| not_pd("chain unary marginal", t))
        })
        .collect()
}

pub fn binary_marginals(pots: &ChainPotentials, msgs: &MessageSet) -> Result<Vec<PairMarginal>> {
    let d = pots.dim();
    let c = pots.coupling;
    (0..pots.len().saturating_sub(1))
        .map(|t| {
            let left = &pots.unary[t] + &msgs.incoming_past(t, d);
            let right = &pots.unary[t + 1] + &msgs.incoming_future(t + 1, d);
            let mut j = DMatrix::zeros(2 * d, 2 * d);
            j.view_mut((0, 0), (d, d)).copy_from(&left.j);
            j.view_mut((d, d), (d, d)).copy_from(&right.j);
            for k in 0..d {
                j[(k, d + k)] = -c;
                j[(d + k, k)] = -c;
            }
            let mut h = DVector::zeros(2 * d);
            h.rows_mut(0, d).copy_from(&left.h);
            h.rows_mut(d, d).copy_from(&right.h);
            let joint = CanonicalGaussian { j, h }
                .to_moment()
                .map_err(|_| not_pd("chain binary marginal", t))?;
            Ok(PairMarginal {
                mean: joint.mean,
                cov: joint.cov,
            })
        })
        .collect()
}

/// Unary marginals plus the `T - 1` cross-covariances of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMarginals {
    pub unary: Vec<GaussianMoment>,
    pub cross: Vec<DMatrix<f64>>,
}

/// Full smoothing pass: messages, unary and pairwise marginals.
pub fn smooth(pots: &ChainPotentials) -> Result<ChainMarginals> {
    let msgs = compute_messages(pots)?;
    let unary = unary_marginals(pots, &msgs)?;
    let cross = binary_marginals(pots, &msgs)?
        .iter()
        .map(PairMarginal::cross_cov)
        .collect();
    Ok(ChainMarginals { unary, cross })
}

/// Reference marginals from the dense `Td x Td` chain precision.
///
/// Intended for small chains only; it is the independent check on
/// [`compute_messages`] and friends.
pub fn dense_chain_oracle(
    pots: &ChainPotentials,
) -> Result<(Vec<GaussianMoment>, Vec<PairMarginal>)> {
    let t_len = pots.len();
    let d = pots.dim();
    let size = t_len * d;
    let mut j = DMatrix::zeros(size, size);
    let mut h = DVector::zeros(size);
    for (t, u) in pots.unary.iter().enumerate() {
        j.view_mut((t * d, t * d), (d, d)).copy_from(&u.j);
        h.rows_mut(t * d, d).copy_from(&u.h);
        if t + 1 < t_len {
            for k in 0..d {
                j[(t * d + k, (t + 1) * d + k)] = -pots.coupling;
                j[((t + 1) * d + k, t * d + k)] = -pots.coupling;
            }
        }
    }
    let full = CanonicalGaussian { j, h }
        .to_moment()
        .map_err(|_| Error::NotPositiveDefinite {
            context: "dense chain precision",
            node: None,
            time: None,
        })?;
    let unary = (0..t_len)
        .map(|t| GaussianMoment {
            mean: full.mean.rows(t * d, d).into_owned(),
            cov: full.cov.view((t * d, t * d), (d, d)).into_owned(),
        })
        .collect();
    let pairs = (0..t_len.saturating_sub(1))
        .map(|t| PairMarginal {
            mean: full.mean.rows(t * d, 2 * d).into_owned(),
            cov: full.cov.view((t * d, t * d), (2 * d, 2 * d)).into_owned(),
        })
        .collect();
    Ok((unary, pairs))
}
