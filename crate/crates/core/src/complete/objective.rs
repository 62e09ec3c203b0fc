//! Completion objectives and their row-wise restrictions.
//!
//! For a row `u` of mode `j`, every observation `k` in the fiber `Ω_i`
//! contributes the Hadamard product `a_k` of the matching rows of all other
//! factors, so that `t̂_k = a_k · u`.

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::tensor::SparseTensor;

use super::{CPModel, FactorMatrix};

/// Per-mode lists of the observations touching each row (`Ω_i`).
#[derive(Debug, Clone)]
pub struct Fibers {
    ptr: Vec<Vec<usize>>,
    ids: Vec<Vec<usize>>,
}

impl Fibers {
    pub fn new(t: &SparseTensor) -> Self {
        let d = t.ndim();
        let mut ptr = Vec::with_capacity(d);
        let mut ids = Vec::with_capacity(d);
        for j in 0..d {
            let n = t.dims()[j];
            let mut counts = vec![0usize; n + 1];
            for k in 0..t.nnz() {
                counts[t.index(k)[j] + 1] += 1;
            }
            for i in 0..n {
                counts[i + 1] += counts[i];
            }
            let mut fill = counts.clone();
            let mut list = vec![0usize; t.nnz()];
            for k in 0..t.nnz() {
                let i = t.index(k)[j];
                list[fill[i]] = k;
                fill[i] += 1;
            }
            ptr.push(counts);
            ids.push(list);
        }
        Self { ptr, ids }
    }

    /// Observation ids in row `i` of mode `mode`.
    pub fn row(&self, mode: usize, i: usize) -> &[usize] {
        &self.ids[mode][self.ptr[mode][i]..self.ptr[mode][i + 1]]
    }
}

/// Data for one row subproblem: design vectors `a_k` (row-major,
/// `n x rank`) and log-observations.
#[derive(Debug, Clone)]
pub struct RowTerms {
    pub rank: usize,
    pub design: Vec<f64>,
    pub log_t: Vec<f64>,
}

impl RowTerms {
    pub fn len(&self) -> usize {
        self.log_t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_t.is_empty()
    }

    pub fn a(&self, k: usize) -> &[f64] {
        &self.design[k * self.rank..(k + 1) * self.rank]
    }
}

/// Gathers the row subproblem for `row` of `mode` given the current
/// factors. `log_t` holds the log of every tensor value.
pub fn row_terms(
    t: &SparseTensor,
    log_t: &[f64],
    factors: &[FactorMatrix],
    fibers: &Fibers,
    mode: usize,
    row: usize,
) -> RowTerms {
    let rank = factors[0].rank();
    let obs = fibers.row(mode, row);
    let mut design = vec![1.0; obs.len() * rank];
    let mut logs = Vec::with_capacity(obs.len());
    for (n, &k) in obs.iter().enumerate() {
        let idx = t.index(k);
        let a = &mut design[n * rank..(n + 1) * rank];
        for (j, f) in factors.iter().enumerate() {
            if j == mode {
                continue;
            }
            for (ar, fr) in a.iter_mut().zip(f.row(idx[j])) {
                *ar *= fr;
            }
        }
        logs.push(log_t[k]);
    }
    RowTerms {
        rank,
        design,
        log_t: logs,
    }
}

/// Row objective `Σ (log t_k - a_k·u)^2 + λ ||u||^2`.
pub fn row_objective_phi1(terms: &RowTerms, u: &[f64], reg: f64) -> f64 {
    let data: f64 = (0..terms.len())
        .map(|k| {
            let r = terms.log_t[k] - dot(terms.a(k), u);
            r * r
        })
        .sum();
    data + reg * dot(u, u)
}

pub fn row_gradient_phi1(terms: &RowTerms, u: &[f64], reg: f64) -> Vec<f64> {
    let mut g: Vec<f64> = u.iter().map(|x| 2.0 * reg * x).collect();
    for k in 0..terms.len() {
        let a = terms.a(k);
        let r = terms.log_t[k] - dot(a, u);
        for (gi, ai) in g.iter_mut().zip(a) {
            *gi -= 2.0 * r * ai;
        }
    }
    g
}

/// Row-major `rank x rank` Hessian `2 Σ a_k a_k^T + 2λ I`.
pub fn row_hessian_phi1(terms: &RowTerms, reg: f64) -> Vec<f64> {
    let n = terms.rank;
    let mut h = vec![0.0; n * n];
    for k in 0..terms.len() {
        let a = terms.a(k);
        for p in 0..n {
            for q in 0..n {
                h[p * n + q] += 2.0 * a[p] * a[q];
            }
        }
    }
    for p in 0..n {
        h[p * n + p] += 2.0 * reg;
    }
    h
}

/// Row objective `Σ (log t_k - log(a_k·u))^2 + λ ||u||^2 - η Σ log u_r`;
/// `+∞` outside the positive domain.
pub fn row_objective_phi2(terms: &RowTerms, u: &[f64], reg: f64, eta: f64) -> f64 {
    if u.iter().any(|x| !(*x > 0.0)) {
        return f64::INFINITY;
    }
    let mut data = 0.0;
    for k in 0..terms.len() {
        let m = dot(terms.a(k), u);
        if !(m > 0.0) {
            return f64::INFINITY;
        }
        let l = terms.log_t[k] - m.ln();
        data += l * l;
    }
    let barrier: f64 = u.iter().map(|x| x.ln()).sum();
    data + reg * dot(u, u) - eta * barrier
}

pub fn row_gradient_phi2(terms: &RowTerms, u: &[f64], reg: f64, eta: f64) -> Vec<f64> {
    let mut g: Vec<f64> = u.iter().map(|x| 2.0 * reg * x - eta / x).collect();
    for k in 0..terms.len() {
        let a = terms.a(k);
        let m = dot(a, u);
        let l = terms.log_t[k] - m.ln();
        let c = -2.0 * l / m;
        for (gi, ai) in g.iter_mut().zip(a) {
            *gi += c * ai;
        }
    }
    g
}

/// `Σ 2(1 + log t_k - log m_k)/m_k^2 a_k a_k^T + 2λ I + η diag(1/u^2)`.
pub fn row_hessian_phi2(terms: &RowTerms, u: &[f64], reg: f64, eta: f64) -> Vec<f64> {
    let n = terms.rank;
    let mut h = vec![0.0; n * n];
    for k in 0..terms.len() {
        let a = terms.a(k);
        let m = dot(a, u);
        let c = 2.0 * (1.0 + terms.log_t[k] - m.ln()) / (m * m);
        for p in 0..n {
            for q in 0..n {
                h[p * n + q] += c * a[p] * a[q];
            }
        }
    }
    for p in 0..n {
        h[p * n + p] += 2.0 * reg + eta / (u[p] * u[p]);
    }
    h
}

/// Full log-ls objective `λ Σ ||U_j||_F^2 + Σ_Ω (log t_i - t̂_i)^2`.
pub fn objective_phi1(t: &SparseTensor, model: &CPModel, reg: f64) -> f64 {
    let data: f64 = t
        .entries()
        .map(|(idx, v)| {
            let r = v.ln() - model.reconstruct_element(idx);
            r * r
        })
        .sum();
    data + reg * model.frobenius_sq()
}

/// Full positive-regime objective
/// `λ Σ ||U_j||_F^2 + Σ_Ω (log t_i - log t̂_i)^2 - η Σ_j Σ log U_j`.
pub fn objective_phi2(t: &SparseTensor, model: &CPModel, reg: f64, eta: f64) -> Result<f64> {
    let mut barrier = 0.0;
    for (j, f) in model.factors.iter().enumerate() {
        for (k, &v) in f.as_slice().iter().enumerate() {
            if !(v > 0.0) {
                return Err(Error::NonPositiveFactor {
                    mode: j,
                    row: k / f.rank(),
                    value: v,
                });
            }
            barrier += v.ln();
        }
    }
    let data: f64 = t
        .entries()
        .map(|(idx, v)| {
            let r = v.ln() - model.reconstruct_element(idx).ln();
            r * r
        })
        .sum();
    Ok(data + reg * model.frobenius_sq() - eta * barrier)
}
