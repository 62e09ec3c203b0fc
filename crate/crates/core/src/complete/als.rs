use crate::error::{Error, Result};
use crate::linalg::spd_solve;
use crate::par;
use crate::tensor::SparseTensor;

use super::objective::{objective_phi1, row_objective_phi1, row_terms, Fibers, RowTerms};
use super::{init_factors, rel_change, CPModel, FitConfig, FitReport, Regime};

/// Fits a log-ls CP model by alternating least squares from random factors.
pub fn fit_als(t: &SparseTensor, cfg: &FitConfig) -> Result<FitReport> {
    let factors = init_factors(t.dims(), cfg.rank, cfg.seed, Regime::LogLs);
    fit_als_from(t, cfg, CPModel { factors, regime: Regime::LogLs })
}

/// Solves `(A^T A + λ I) u = A^T log t` for one row. Falls back to the
/// current row when the solve fails or would not lower the row objective.
pub(crate) fn solve_row(terms: &RowTerms, current: &[f64], reg: f64) -> Vec<f64> {
    let n = terms.rank;
    let mut gram = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for k in 0..terms.len() {
        let a = terms.a(k);
        let y = terms.log_t[k];
        for p in 0..n {
            rhs[p] += y * a[p];
            for q in 0..=p {
                gram[p * n + q] += a[p] * a[q];
            }
        }
    }
    for p in 0..n {
        for q in 0..p {
            gram[q * n + p] = gram[p * n + q];
        }
        gram[p * n + p] += reg;
    }
    let solved = spd_solve(&gram, &rhs, n).or_else(|| {
        // singular Gram (fewer observations than rank, λ = 0)
        let trace: f64 = (0..n).map(|p| gram[p * n + p]).sum();
        let jitter = 1e-12 * trace.max(f64::MIN_POSITIVE);
        let mut g = gram.clone();
        for p in 0..n {
            g[p * n + p] += jitter;
        }
        spd_solve(&g, &rhs, n)
    });
    match solved {
        Some(u) if row_objective_phi1(terms, &u, reg) <= row_objective_phi1(terms, current, reg) => u,
        _ => current.to_vec(),
    }
}

pub fn fit_als_from(t: &SparseTensor, cfg: &FitConfig, init: CPModel) -> Result<FitReport> {
    cfg.validate()?;
    if t.nnz() == 0 {
        return Err(Error::EmptyTensor { rejected: 0 });
    }
    if init.dims() != t.dims() || init.rank() != cfg.rank {
        return Err(Error::Invalid("initial model does not match tensor/rank".into()));
    }
    let log_t: Vec<f64> = t.values().iter().map(|v| v.ln()).collect();
    let fibers = Fibers::new(t);
    let mut model = CPModel {
        factors: init.factors,
        regime: Regime::LogLs,
    };
    let parallel = cfg.workers != 1;

    par::install(cfg.workers, || {
        let mut obj = objective_phi1(t, &model, cfg.reg);
        let mut history = vec![obj];
        let mut sweeps = 0;
        while sweeps < cfg.max_sweeps {
            sweeps += 1;
            for mode in 0..t.ndim() {
                let factors = &model.factors;
                let rows = par::map_range(t.dims()[mode], parallel, |i| {
                    let current = factors[mode].row(i);
                    if fibers.row(mode, i).is_empty() {
                        return current.to_vec();
                    }
                    let terms = row_terms(t, &log_t, factors, &fibers, mode, i);
                    solve_row(&terms, current, cfg.reg)
                });
                let f = &mut model.factors[mode];
                for (i, row) in rows.into_iter().enumerate() {
                    f.row_mut(i).copy_from_slice(&row);
                }
            }
            let next = objective_phi1(t, &model, cfg.reg);
            if !next.is_finite() {
                return Err(Error::FitFailure {
                    sweep: sweeps,
                    reason: format!("objective became {next}"),
                });
            }
            history.push(next);
            let change = rel_change(obj, next);
            obj = next;
            if change < cfg.tol {
                break;
            }
        }
        let min_factor_entry = model.min_entry();
        Ok(FitReport {
            model: model.clone(),
            sweeps,
            objective: obj,
            history,
            min_factor_entry,
        })
    })
}
