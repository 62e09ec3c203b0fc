use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, spd_solve};
use crate::par;
use crate::tensor::SparseTensor;

use super::objective::{
    objective_phi2, row_gradient_phi2, row_hessian_phi2, row_objective_phi2, row_terms, Fibers,
    RowTerms,
};
use super::{init_factors, rel_change, CPModel, FitConfig, FitReport, Regime};

const MAX_HALVINGS: usize = 30;

/// Fits a positive CP model of the log-ratio loss by alternating Newton
/// minimization under a decreasing log barrier.
pub fn fit_amn(t: &SparseTensor, cfg: &FitConfig) -> Result<FitReport> {
    let factors = init_factors(t.dims(), cfg.rank, cfg.seed, Regime::LogRatioPositive);
    fit_amn_from(
        t,
        cfg,
        CPModel {
            factors,
            regime: Regime::LogRatioPositive,
        },
    )
}

/// Result of Newton iterations on one row.
pub(crate) struct RowUpdate {
    pub u: Vec<f64>,
    /// Smallest entry of any accepted iterate.
    pub min_entry: f64,
}

/// Damped Newton on a single row objective. Steps are halved until the
/// iterate stays positive and the objective does not increase; a failed
/// Hessian solve falls back to a steepest-descent direction.
pub(crate) fn newton_row(
    terms: &RowTerms,
    start: &[f64],
    reg: f64,
    eta: f64,
    iters: usize,
) -> RowUpdate {
    let mut u = start.to_vec();
    let mut f = row_objective_phi2(terms, &u, reg, eta);
    let mut min_entry = u.iter().copied().fold(f64::INFINITY, f64::min);
    let n = u.len();
    for _ in 0..iters {
        let g = row_gradient_phi2(terms, &u, reg, eta);
        if g.iter().any(|v| !v.is_finite()) {
            break;
        }
        let gnorm = norm2(&g);
        if gnorm == 0.0 {
            break;
        }
        let h = row_hessian_phi2(terms, &u, reg, eta);
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let dir = match spd_solve(&h, &neg_g, n) {
            Some(d) if dot(&d, &g) < 0.0 => d,
            _ => {
                let scale = (norm2(&u) / gnorm).min(1.0);
                neg_g.iter().map(|v| v * scale).collect()
            }
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = u.iter().zip(&dir).map(|(x, d)| x + alpha * d).collect();
            if cand.iter().all(|v| *v > 0.0) {
                let fc = row_objective_phi2(terms, &cand, reg, eta);
                if fc <= f {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((cand, fc)) = accepted else { break };
        let decrease = f - fc;
        min_entry = cand.iter().copied().fold(min_entry, f64::min);
        u = cand;
        f = fc;
        if decrease <= 1e-15 * (1.0 + f.abs()) {
            break;
        }
    }
    RowUpdate { u, min_entry }
}

pub fn fit_amn_from(t: &SparseTensor, cfg: &FitConfig, init: CPModel) -> Result<FitReport> {
    cfg.validate()?;
    if t.nnz() == 0 {
        return Err(Error::EmptyTensor { rejected: 0 });
    }
    if init.dims() != t.dims() || init.rank() != cfg.rank {
        return Err(Error::Invalid("initial model does not match tensor/rank".into()));
    }
    let mut model = CPModel::new(init.factors, Regime::LogRatioPositive)?;
    let log_t: Vec<f64> = t.values().iter().map(|v| v.ln()).collect();
    let fibers = Fibers::new(t);
    let parallel = cfg.workers != 1;
    let schedule = cfg.barrier.schedule();

    par::install(cfg.workers, || {
        let mut min_seen = model.min_entry();
        let mut sweeps = 0;
        let mut history = vec![objective_phi2(t, &model, cfg.reg, schedule[0])?];
        let mut obj = history[0];
        for &eta in &schedule {
            obj = objective_phi2(t, &model, cfg.reg, eta)?;
            for _ in 0..cfg.max_sweeps {
                sweeps += 1;
                for mode in 0..t.ndim() {
                    let factors = &model.factors;
                    let rows = par::map_range(t.dims()[mode], parallel, |i| {
                        let current = factors[mode].row(i);
                        if fibers.row(mode, i).is_empty() {
                            return RowUpdate {
                                u: current.to_vec(),
                                min_entry: f64::INFINITY,
                            };
                        }
                        let terms = row_terms(t, &log_t, factors, &fibers, mode, i);
                        newton_row(&terms, current, cfg.reg, eta, cfg.barrier.newton_iters)
                    });
                    let f = &mut model.factors[mode];
                    for (i, upd) in rows.into_iter().enumerate() {
                        min_seen = min_seen.min(upd.min_entry);
                        f.row_mut(i).copy_from_slice(&upd.u);
                    }
                }
                let next = objective_phi2(t, &model, cfg.reg, eta).unwrap_or(f64::NAN);
                if !next.is_finite() {
                    return Err(Error::FitFailure {
                        sweep: sweeps,
                        reason: format!("objective became {next} at barrier {eta:e}"),
                    });
                }
                history.push(next);
                let change = rel_change(obj, next);
                obj = next;
                if change < cfg.tol {
                    break;
                }
            }
        }
        Ok(FitReport {
            model: model.clone(),
            sweeps,
            objective: obj,
            history,
            min_factor_entry: min_seen,
        })
    })
}
