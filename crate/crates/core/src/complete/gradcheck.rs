//! Central finite-difference checks of the analytic row gradients and
//! Hessian-vector products.

use crate::tensor::SparseTensor;

use super::objective::{
    row_gradient_phi1, row_gradient_phi2, row_hessian_phi1, row_hessian_phi2, row_objective_phi1,
    row_objective_phi2, row_terms, Fibers, RowTerms,
};
use super::CPModel;

/// Maximum relative discrepancies between analytic and finite-difference
/// derivatives of one row objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub gradient: f64,
    pub hessian_vector: f64,
}

impl GradCheck {
    pub fn max(&self) -> f64 {
        self.gradient.max(self.hessian_vector)
    }
}

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(f64::MIN_POSITIVE, f64::max);
    diff / scale
}

fn check(
    u: &[f64],
    step: f64,
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    hess: &[f64],
) -> GradCheck {
    let n = u.len();
    let shifted = |dir: &[f64], h: f64| -> Vec<f64> {
        u.iter().zip(dir).map(|(x, d)| x + h * d).collect()
    };
    let mut fd_grad = vec![0.0; n];
    for r in 0..n {
        let mut e = vec![0.0; n];
        e[r] = 1.0;
        fd_grad[r] = (f(&shifted(&e, step)) - f(&shifted(&e, -step))) / (2.0 * step);
    }
    // fixed, non-axis-aligned probe direction
    let dir: Vec<f64> = (0..n).map(|r| 1.0 - 0.37 * r as f64).collect();
    let gp = grad(&shifted(&dir, step));
    let gm = grad(&shifted(&dir, -step));
    let fd_hv: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * step)).collect();
    let hv: Vec<f64> = (0..n)
        .map(|p| (0..n).map(|q| hess[p * n + q] * dir[q]).sum())
        .collect();
    GradCheck {
        gradient: rel_err(&grad(u), &fd_grad),
        hessian_vector: rel_err(&hv, &fd_hv),
    }
}

fn terms_for(t: &SparseTensor, model: &CPModel, mode: usize, row: usize) -> RowTerms {
    let log_t: Vec<f64> = t.values().iter().map(|v| v.ln()).collect();
    row_terms(t, &log_t, &model.factors, &Fibers::new(t), mode, row)
}

/// Checks the log-ls row gradient and Hessian of `row` in `mode`.
pub fn grad_check_phi1(
    t: &SparseTensor,
    model: &CPModel,
    mode: usize,
    row: usize,
    reg: f64,
    step: f64,
) -> GradCheck {
    let terms = terms_for(t, model, mode, row);
    let u = model.factors[mode].row(row);
    check(
        u,
        step,
        |v| row_objective_phi1(&terms, v, reg),
        |v| row_gradient_phi1(&terms, v, reg),
        &row_hessian_phi1(&terms, reg),
    )
}

/// Checks the positive-regime row gradient and Hessian, barrier included.
pub fn grad_check_phi2(
    t: &SparseTensor,
    model: &CPModel,
    mode: usize,
    row: usize,
    reg: f64,
    eta: f64,
    step: f64,
) -> GradCheck {
    let terms = terms_for(t, model, mode, row);
    let u = model.factors[mode].row(row);
    check(
        u,
        step,
        |v| row_objective_phi2(&terms, v, reg, eta),
        |v| row_gradient_phi2(&terms, v, reg, eta),
        &row_hessian_phi2(&terms, u, reg, eta),
    )
}
