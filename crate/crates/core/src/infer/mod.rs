//! Prediction from a completed CP model.
//!
//! Inside the grid, a prediction is the multilinear interpolation (in the
//! transformed coordinates `h_j`) of reconstructed elements at the
//! surrounding midpoints; for log-ls models the elements are exponentiated
//! before they are combined. Between a domain edge and the outermost
//! midpoint the two outermost midpoints are extrapolated linearly.
//!
//! Outside the grid, positive models substitute the factor row of each
//! out-of-range mode with `exp(m̂(h(x))) σ̂ v̂` from that mode's
//! [`ExtrapolationModel`] and interpolate only along in-range modes.

mod extrap;
pub mod spline;

use std::borrow::Cow;

use crate::complete::{CPModel, Regime};
use crate::error::{Error, Result};
use crate::par;
use crate::space::{Grid, Mode, ModeAnchor, Value};

pub use extrap::{dominant_triplet, ExtrapolationModel, POWER_MAX_ITERS, POWER_TOL};
pub use spline::{fit_hinge_spline, Direction, HingeSpline, HingeTerm, DEFAULT_MAX_TERMS};

/// Predictions are floored here so log-based metrics stay finite.
pub const TIME_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Predicted execution time in seconds.
    pub time: f64,
    /// The raw interpolant fell below [`TIME_FLOOR`] and was clamped.
    pub floored: bool,
    /// At least one mode was extrapolated beyond the grid.
    pub extrapolated: bool,
}

/// A grid, its completed CP model and optional per-mode extrapolation
/// models.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceModel {
    grid: Grid,
    cp: CPModel,
    extrap: Vec<Option<ExtrapolationModel>>,
}

type Contribution<'a> = (Cow<'a, [f64]>, f64);

impl PerformanceModel {
    pub fn new(grid: Grid, cp: CPModel) -> Result<Self> {
        let d = grid.ndim();
        Self::with_extrapolation(grid, cp, vec![None; d])
    }

    pub fn with_extrapolation(
        grid: Grid,
        cp: CPModel,
        extrap: Vec<Option<ExtrapolationModel>>,
    ) -> Result<Self> {
        if cp.dims() != grid.dims() {
            return Err(Error::Invalid(format!(
                "model dims {:?} do not match grid dims {:?}",
                cp.dims(),
                grid.dims()
            )));
        }
        if extrap.len() != grid.ndim() {
            return Err(Error::LengthMismatch(extrap.len(), grid.ndim()));
        }
        for (j, e) in extrap.iter().enumerate() {
            let Some(e) = e else { continue };
            if cp.regime != Regime::LogRatioPositive {
                return Err(Error::ExtrapolationRegime);
            }
            if grid.specs()[j].is_categorical() {
                return Err(Error::CategoricalExtrapolation(grid.specs()[j].name.clone()));
            }
            if e.v_hat.len() != cp.rank() || e.u_hat.len() != grid.dims()[j] {
                return Err(Error::Invalid(format!(
                    "extrapolation model for mode {j} has the wrong shape"
                )));
            }
        }
        Ok(Self { grid, cp, extrap })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cp(&self) -> &CPModel {
        &self.cp
    }

    pub fn regime(&self) -> Regime {
        self.cp.regime
    }

    pub fn extrapolation(&self, mode: usize) -> Option<&ExtrapolationModel> {
        self.extrap[mode].as_ref()
    }

    pub fn extrapolations(&self) -> &[Option<ExtrapolationModel>] {
        &self.extrap
    }

    pub fn reconstruct_element(&self, index: &[usize]) -> f64 {
        self.cp.reconstruct_element(index)
    }

    /// Rank-1 summary and `log û` spline for numerical mode `mode`.
    pub fn build_extrapolation(&self, mode: usize, max_terms: usize) -> Result<ExtrapolationModel> {
        if self.cp.regime != Regime::LogRatioPositive {
            return Err(Error::ExtrapolationRegime);
        }
        let (scale, midpoints) = match self.grid.mode(mode) {
            Mode::Numerical {
                scale, midpoints, ..
            } => (*scale, midpoints),
            Mode::Categorical { .. } => {
                return Err(Error::CategoricalExtrapolation(
                    self.grid.specs()[mode].name.clone(),
                ))
            }
        };
        let factor = &self.cp.factors[mode];
        if let Some(k) = factor.as_slice().iter().position(|v| !(*v > 0.0)) {
            return Err(Error::NonPositiveFactor {
                mode,
                row: k / factor.rank(),
                value: factor.as_slice()[k],
            });
        }
        let (u_hat, sigma_hat, v_hat) = dominant_triplet(factor)?;
        if u_hat.iter().chain(&v_hat).any(|v| !(*v > 0.0)) {
            return Err(Error::Invalid(format!(
                "dominant singular vectors of mode {mode} are not strictly positive"
            )));
        }
        let xs: Vec<f64> = midpoints.iter().map(|&m| scale.apply(m)).collect();
        let ys: Vec<f64> = u_hat.iter().map(|u| u.ln()).collect();
        let spline = fit_hinge_spline(&xs, &ys, max_terms)?;
        Ok(ExtrapolationModel {
            u_hat,
            sigma_hat,
            v_hat,
            spline,
        })
    }

    /// Builds and stores the extrapolation model for `mode`.
    pub fn add_extrapolation(&mut self, mode: usize, max_terms: usize) -> Result<()> {
        let e = self.build_extrapolation(mode, max_terms)?;
        self.extrap[mode] = Some(e);
        Ok(())
    }

    fn check_arity(&self, x: &[Value]) -> Result<()> {
        if x.len() != self.grid.ndim() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.ndim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn anchor_rows(&self, j: usize, anchor: ModeAnchor) -> Vec<Contribution<'_>> {
        let f = &self.cp.factors[j];
        match anchor {
            ModeAnchor::Fixed(i) => vec![(Cow::Borrowed(f.row(i)), 1.0)],
            ModeAnchor::Pair { base, weight, .. } => {
                let mut out = Vec::with_capacity(2);
                if weight != 1.0 {
                    out.push((Cow::Borrowed(f.row(base)), 1.0 - weight));
                }
                if weight != 0.0 {
                    out.push((Cow::Borrowed(f.row(base + 1)), weight));
                }
                out
            }
        }
    }

    /// Weighted sum over every corner of the per-mode contributions.
    fn combine(&self, per_mode: &[Vec<Contribution<'_>>], extrapolated: bool) -> Result<Prediction> {
        let d = per_mode.len();
        let rank = self.cp.rank();
        let mut pos = vec![0usize; d];
        let mut total = 0.0;
        loop {
            let mut weight = 1.0;
            for (j, &p) in pos.iter().enumerate() {
                weight *= per_mode[j][p].1;
            }
            let element: f64 = (0..rank)
                .map(|r| {
                    pos.iter()
                        .enumerate()
                        .map(|(j, &p)| per_mode[j][p].0[r])
                        .product::<f64>()
                })
                .sum();
            let value = match self.cp.regime {
                Regime::LogLs => element.exp(),
                Regime::LogRatioPositive => element,
            };
            total += weight * value;

            let mut j = d;
            loop {
                if j == 0 {
                    return finish(total, extrapolated);
                }
                j -= 1;
                pos[j] += 1;
                if pos[j] < per_mode[j].len() {
                    break;
                }
                pos[j] = 0;
            }
        }
    }

    fn assemble(&self, x: &[Value], allow_extrap: bool) -> Result<Prediction> {
        self.check_arity(x)?;
        let mut per_mode = Vec::with_capacity(x.len());
        let mut extrapolated = false;
        for (j, v) in x.iter().enumerate() {
            match (self.grid.mode(j), v) {
                (Mode::Numerical { scale, .. }, Value::Num(xv)) => {
                    if self.grid.contains(j, *xv) {
                        per_mode.push(self.anchor_rows(j, self.grid.numeric_anchor(j, *xv)));
                        continue;
                    }
                    let out = self.grid.mode_index(j, v).unwrap_err();
                    if !allow_extrap {
                        return Err(out);
                    }
                    let h = scale.apply(*xv);
                    if !h.is_finite() {
                        return Err(out);
                    }
                    let e = self.extrap[j].as_ref().ok_or_else(|| {
                        if self.cp.regime == Regime::LogRatioPositive {
                            Error::MissingExtrapolation(self.grid.specs()[j].name.clone())
                        } else {
                            Error::ExtrapolationRegime
                        }
                    })?;
                    extrapolated = true;
                    per_mode.push(vec![(Cow::Owned(e.row_at(h)), 1.0)]);
                }
                (Mode::Categorical { .. }, Value::Cat(_)) => {
                    let i = self.grid.mode_index(j, v)?;
                    per_mode.push(self.anchor_rows(j, ModeAnchor::Fixed(i)));
                }
                _ => {
                    return Err(Error::InvalidParameter {
                        name: self.grid.specs()[j].name.clone(),
                        reason: format!("value `{v}` has the wrong kind for this parameter"),
                    })
                }
            }
        }
        self.combine(&per_mode, extrapolated)
    }

    /// Interpolated prediction for an in-domain configuration.
    pub fn predict(&self, x: &[Value]) -> Result<f64> {
        self.assemble(x, false).map(|p| p.time)
    }

    /// Prediction that extrapolates any out-of-domain numerical mode with a
    /// stored extrapolation model; identical to [`predict`](Self::predict)
    /// when every coordinate is in the domain.
    pub fn predict_extrapolated(&self, x: &[Value]) -> Result<f64> {
        self.assemble(x, true).map(|p| p.time)
    }

    /// Like [`predict_extrapolated`](Self::predict_extrapolated) with
    /// diagnostic flags.
    pub fn predict_detailed(&self, x: &[Value]) -> Result<Prediction> {
        self.assemble(x, true)
    }

    /// Predicts many configurations, spread over `workers` threads.
    pub fn predict_batch(&self, xs: &[Vec<Value>], workers: usize) -> Vec<Result<Prediction>> {
        par::install(workers, || {
            par::map_slice(xs, workers != 1, |x| self.predict_detailed(x))
        })
    }
}

fn finish(total: f64, extrapolated: bool) -> Result<Prediction> {
    if total.is_nan() {
        return Err(Error::Invalid("prediction is not a number".into()));
    }
    let floored = total < TIME_FLOOR;
    Ok(Prediction {
        time: if floored { TIME_FLOOR } else { total },
        floored,
        extrapolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complete::FactorMatrix;
    use crate::space::{build_grid, ParameterSpec};

    fn one_mode(values: &[f64], regime: Regime) -> PerformanceModel {
        let grid = build_grid(vec![ParameterSpec::log("x", 1.0, 100.0, values.len())]).unwrap();
        let f = FactorMatrix::from_vec(values.len(), 1, values.to_vec()).unwrap();
        PerformanceModel::new(grid, CPModel::new(vec![f], regime).unwrap()).unwrap()
    }

    #[test]
    fn exponentiated_log_interpolation() {
        let m = one_mode(&[2f64.ln(), 8f64.ln()], Regime::LogLs);
        let p = m.predict(&[Value::Num(128f64.sqrt())]).unwrap();
        assert!((p - 5.0).abs() < 1e-12, "{p}");
        // midpoints are exact
        assert_eq!(m.predict(&[Value::Num(4.0)]).unwrap(), 2f64.ln().exp());
        assert_eq!(m.predict(&[Value::Num(32.0)]).unwrap(), 8f64.ln().exp());
    }

    #[test]
    fn out_of_domain_is_signalled() {
        let m = one_mode(&[0.1, 0.2], Regime::LogLs);
        assert!(matches!(
            m.predict(&[Value::Num(150.0)]),
            Err(Error::OutOfDomain { mode: 0, .. })
        ));
        assert!(matches!(
            m.predict_extrapolated(&[Value::Num(150.0)]),
            Err(Error::ExtrapolationRegime)
        ));
        let p = one_mode(&[0.1, 0.2], Regime::LogRatioPositive);
        assert!(matches!(
            p.predict_extrapolated(&[Value::Num(150.0)]),
            Err(Error::MissingExtrapolation(_))
        ));
    }

    #[test]
    fn edge_band_can_floor() {
        // steeply decreasing positive model, queried near the upper edge
        let m = one_mode(&[10.0, 0.1], Regime::LogRatioPositive);
        let p = m.predict_detailed(&[Value::Num(100.0)]).unwrap();
        assert!(p.floored);
        assert_eq!(p.time, TIME_FLOOR);
    }

    #[test]
    fn categorical_extrapolation_rejected() {
        let grid = build_grid(vec![ParameterSpec::categorical("c", ["a", "b"])]).unwrap();
        let f = FactorMatrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        let m = PerformanceModel::new(grid, CPModel::new(vec![f], Regime::LogRatioPositive).unwrap())
            .unwrap();
        assert!(matches!(
            m.build_extrapolation(0, 5),
            Err(Error::CategoricalExtrapolation(_))
        ));
    }
}
