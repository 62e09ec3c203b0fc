//! Univariate hinge-function regression fit by forward stepwise selection.

use crate::error::{Error, Result};
use crate::linalg::dot;

/// Default cap on hinge terms (intercept excluded).
pub const DEFAULT_MAX_TERMS: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `max(0, x - c)`
    Right,
    /// `max(0, c - x)`
    Left,
}

impl Direction {
    pub fn token(self) -> &'static str {
        match self {
            Direction::Right => "+",
            Direction::Left => "-",
        }
    }

    #[inline]
    pub fn basis(self, knot: f64, x: f64) -> f64 {
        match self {
            Direction::Right => (x - knot).max(0.0),
            Direction::Left => (knot - x).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeTerm {
    pub knot: f64,
    pub direction: Direction,
    pub coef: f64,
}

/// `intercept + Σ coef * max(0, ±(x - knot))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeSpline {
    pub intercept: f64,
    pub terms: Vec<HingeTerm>,
}

impl HingeSpline {
    pub fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .fold(self.intercept, |acc, t| acc + t.coef * t.direction.basis(t.knot, x))
    }
}

/// Incremental orthonormal basis with its triangular factor, so that
/// `B = Q R` for the accepted basis columns `B`.
struct Basis {
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

impl Basis {
    /// Orthogonalizes `v` against the basis (two Gram-Schmidt passes).
    /// Returns the unit residual direction, its norm and the projection
    /// coefficients, or `None` if `v` is numerically in the span.
    fn project(&self, v: &[f64]) -> Option<(Vec<f64>, f64, Vec<f64>)> {
        let vnorm = dot(v, v).sqrt();
        if vnorm == 0.0 {
            return None;
        }
        let mut w = v.to_vec();
        let mut coeffs = vec![0.0; self.q.len()];
        for _ in 0..2 {
            for (c, q) in coeffs.iter_mut().zip(&self.q) {
                let p = dot(q, &w);
                *c += p;
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= p * qi;
                }
            }
        }
        let wnorm = dot(&w, &w).sqrt();
        if wnorm <= 1e-10 * vnorm {
            return None;
        }
        w.iter_mut().for_each(|x| *x /= wnorm);
        Some((w, wnorm, coeffs))
    }

    fn push(&mut self, q: Vec<f64>, norm: f64, mut coeffs: Vec<f64>) {
        coeffs.push(norm);
        self.q.push(q);
        self.r.push(coeffs);
    }
}

struct Candidate {
    knot: f64,
    cols: Vec<(Direction, Vec<f64>, f64, Vec<f64>)>,
    gain: f64,
}

/// Forward stepwise hinge regression: starting from the mean, repeatedly
/// adds the mirrored hinge pair whose knot most reduces the residual sum of
/// squares, until `max_terms` basis functions are used or the improvement
/// drops below `1e-12`. Knots are interior abscissae (both ends when only
/// two points are given), ties go to the smallest knot.
pub fn fit_hinge_spline(xs: &[f64], ys: &[f64], max_terms: usize) -> Result<HingeSpline> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::LengthMismatch(n, ys.len()));
    }
    if n < 2
        || xs.windows(2).any(|w| !(w[0] < w[1]))
        || xs.iter().chain(ys).any(|v| !v.is_finite())
    {
        return Err(Error::SplineInput);
    }
    let knots: Vec<f64> = if n >= 3 { xs[1..n - 1].to_vec() } else { vec![xs[0]] };
    let mut used = vec![false; knots.len()];

    let ones = vec![1.0 / (n as f64).sqrt(); n];
    let mut basis = Basis {
        q: vec![ones],
        r: vec![vec![(n as f64).sqrt()]],
    };
    let mut chosen: Vec<(f64, Direction)> = Vec::new();
    let mut resid: Vec<f64> = {
        let mean = ys.iter().sum::<f64>() / n as f64;
        ys.iter().map(|y| y - mean).collect()
    };

    while chosen.len() < max_terms {
        let slots = max_terms - chosen.len();
        let mut best: Option<(usize, Candidate)> = None;
        for (ki, &knot) in knots.iter().enumerate() {
            if used[ki] {
                continue;
            }
            let mut cols = Vec::new();
            let mut trial = Basis {
                q: basis.q.clone(),
                r: Vec::new(),
            };
            for dir in [Direction::Right, Direction::Left] {
                let col: Vec<f64> = xs.iter().map(|&x| dir.basis(knot, x)).collect();
                if let Some((q, norm, coeffs)) = trial.project(&col) {
                    trial.q.push(q.clone());
                    cols.push((dir, q, norm, coeffs));
                }
            }
            if cols.len() > slots {
                // keep the single more useful column
                cols.sort_by(|a, b| dot(&b.1, &resid).abs().total_cmp(&dot(&a.1, &resid).abs()));
                cols.truncate(slots);
                let (dir, _, _, _) = cols[0];
                let col: Vec<f64> = xs.iter().map(|&x| dir.basis(knot, x)).collect();
                let (q, norm, coeffs) = basis.project(&col).expect("column was independent");
                cols[0] = (dir, q, norm, coeffs);
            }
            let gain: f64 = cols.iter().map(|c| dot(&c.1, &resid).powi(2)).sum();
            let better = match &best {
                None => true,
                Some((_, b)) => gain > b.gain * (1.0 + 1e-12) + 1e-300,
            };
            if better {
                best = Some((ki, Candidate { knot, cols, gain }));
            }
        }
        let Some((ki, cand)) = best else { break };
        if cand.gain < 1e-12 || cand.cols.is_empty() {
            break;
        }
        used[ki] = true;
        for (dir, q, norm, coeffs) in cand.cols {
            let p = dot(&q, &resid);
            resid.iter_mut().zip(&q).for_each(|(r, qi)| *r -= p * qi);
            basis.push(q, norm, coeffs);
            chosen.push((cand.knot, dir));
        }
    }

    // coefficients: R c = Q^T y
    let m = basis.q.len();
    let qty: Vec<f64> = basis.q.iter().map(|q| dot(q, ys)).collect();
    let mut c = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = qty[i];
        for (k, ck) in c.iter().enumerate().skip(i + 1) {
            s -= basis.r[k][i] * ck;
        }
        c[i] = s / basis.r[i][i];
    }
    Ok(HingeSpline {
        intercept: c[0],
        terms: chosen
            .into_iter()
            .zip(&c[1..])
            .map(|((knot, direction), &coef)| HingeTerm {
                knot,
                direction,
                coef,
            })
            .collect(),
    })
}
