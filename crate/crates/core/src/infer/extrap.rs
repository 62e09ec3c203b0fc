//! Rank-1 summaries of positive factor matrices, used to continue a mode
//! beyond the modeled range.

use crate::complete::FactorMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};

use super::spline::HingeSpline;

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITERS: usize = 1000;

/// Dominant singular triplet `U ≈ û σ̂ v̂^T` of one mode's factor matrix,
/// plus a spline for `log û` over the mode's transformed midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationModel {
    pub u_hat: Vec<f64>,
    pub sigma_hat: f64,
    pub v_hat: Vec<f64>,
    pub spline: HingeSpline,
}

impl ExtrapolationModel {
    /// Stand-in factor row at transformed coordinate `h`:
    /// `exp(m̂(h)) σ̂ v̂`.
    pub fn row_at(&self, h: f64) -> Vec<f64> {
        let scale = self.spline.eval(h).exp() * self.sigma_hat;
        self.v_hat.iter().map(|v| scale * v).collect()
    }
}

/// Dominant singular triplet by power iteration on the Gram matrix
/// `U^T U`, started from the all-ones vector. Signs are chosen so that
/// `û` and `v̂` sum to a non-negative value.
pub fn dominant_triplet(u: &FactorMatrix) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let (rows, rank) = (u.rows(), u.rank());
    let mut gram = vec![0.0; rank * rank];
    for i in 0..rows {
        let row = u.row(i);
        for p in 0..rank {
            for q in 0..rank {
                gram[p * rank + q] += row[p] * row[q];
            }
        }
    }
    let mut v = vec![1.0 / (rank as f64).sqrt(); rank];
    let mut converged = false;
    for _ in 0..POWER_MAX_ITERS {
        let mut w: Vec<f64> = (0..rank)
            .map(|p| dot(&gram[p * rank..(p + 1) * rank], &v))
            .collect();
        let norm = norm2(&w);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Invalid("factor matrix is zero or non-finite".into()));
        }
        w.iter_mut().for_each(|x| *x /= norm);
        let delta = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = w;
        if delta < POWER_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(POWER_MAX_ITERS));
    }
    let mut left: Vec<f64> = (0..rows).map(|i| dot(u.row(i), &v)).collect();
    let sigma = norm2(&left);
    left.iter_mut().for_each(|x| *x /= sigma);
    if left.iter().sum::<f64>() < 0.0 {
        left.iter_mut().for_each(|x| *x = -*x);
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok((left, sigma, v))
}
