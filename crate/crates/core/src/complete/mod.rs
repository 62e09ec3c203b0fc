//! Low-rank CP tensor completion.
//!
//! Two loss regimes are supported:
//!
//! - [`Regime::LogLs`]: least squares against log-transformed entries,
//!   `(log t_i - t̂_i)^2`, minimized by alternating least squares
//!   ([`fit_als`]). Reconstructed elements estimate log-time.
//! - [`Regime::LogRatioPositive`]: squared log accuracy ratio
//!   `(log t_i - log t̂_i)^2` with strictly positive factors, minimized by
//!   row-wise Newton steps inside a log-barrier continuation
//!   ([`fit_amn`]). Reconstructed elements estimate time directly.
//!
//! Both objectives carry a ridge term `λ Σ_j ||U_j||_F^2`.

mod als;
mod amn;
pub mod gradcheck;
pub mod objective;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;

pub use als::{fit_als, fit_als_from};
pub use amn::{fit_amn, fit_amn_from};
pub use objective::{objective_phi1, objective_phi2, Fibers};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Least squares on log-transformed entries.
    LogLs,
    /// Log-ratio loss with positive factors.
    LogRatioPositive,
}

impl Regime {
    pub fn token(self) -> &'static str {
        match self {
            Regime::LogLs => "ls-log",
            Regime::LogRatioPositive => "logq2",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ls-log" => Ok(Regime::LogLs),
            "logq2" => Ok(Regime::LogRatioPositive),
            other => Err(Error::Invalid(format!(
                "unknown loss `{other}` (expected ls-log or logq2)"
            ))),
        }
    }
}

/// Row-major `rows x rank` factor matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    rows: usize,
    rank: usize,
    data: Vec<f64>,
}

impl FactorMatrix {
    pub fn zeros(rows: usize, rank: usize) -> Self {
        Self {
            rows,
            rank,
            data: vec![0.0; rows * rank],
        }
    }

    pub fn from_vec(rows: usize, rank: usize, data: Vec<f64>) -> Result<Self, Error> {
        if data.len() != rows * rank {
            return Err(Error::LengthMismatch(data.len(), rows * rank));
        }
        Ok(Self { rows, rank, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.rank..(i + 1) * self.rank]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.rank..(i + 1) * self.rank]
    }

    pub fn get(&self, i: usize, r: usize) -> f64 {
        self.data[i * self.rank + r]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// A rank-R CP decomposition: one factor matrix per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CPModel {
    pub factors: Vec<FactorMatrix>,
    pub regime: Regime,
}

impl CPModel {
    pub fn new(factors: Vec<FactorMatrix>, regime: Regime) -> Result<Self, Error> {
        let rank = factors.first().map(FactorMatrix::rank).unwrap_or(0);
        if rank == 0 || factors.iter().any(|f| f.rank() != rank) {
            return Err(Error::Invalid("factor matrices must share a positive rank".into()));
        }
        if regime == Regime::LogRatioPositive {
            for (j, f) in factors.iter().enumerate() {
                if let Some(k) = f.as_slice().iter().position(|v| !(*v > 0.0)) {
                    return Err(Error::NonPositiveFactor {
                        mode: j,
                        row: k / rank,
                        value: f.as_slice()[k],
                    });
                }
            }
        }
        Ok(Self { factors, regime })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(FactorMatrix::rows).collect()
    }

    pub fn rank(&self) -> usize {
        self.factors[0].rank()
    }

    pub fn ndim(&self) -> usize {
        self.factors.len()
    }

    /// `t̂_i = Σ_r Π_j U_j[i_j, r]`.
    pub fn reconstruct_element(&self, index: &[usize]) -> f64 {
        let rank = self.rank();
        (0..rank)
            .map(|r| {
                self.factors
                    .iter()
                    .zip(index)
                    .map(|(f, &i)| f.get(i, r))
                    .product::<f64>()
            })
            .sum()
    }

    /// Reconstruction from explicit per-mode row vectors.
    pub fn reconstruct_rows(rows: &[&[f64]]) -> f64 {
        let rank = rows[0].len();
        (0..rank)
            .map(|r| rows.iter().map(|row| row[r]).product::<f64>())
            .sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.factors.iter().map(FactorMatrix::frobenius_sq).sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.factors
            .iter()
            .map(FactorMatrix::min_entry)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Log-barrier continuation schedule for the positive regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier {
    pub eta_init: f64,
    pub eta_factor: f64,
    pub eta_min: f64,
    /// Newton iterations per row subproblem.
    pub newton_iters: usize,
}

impl Default for Barrier {
    fn default() -> Self {
        Self {
            eta_init: 10.0,
            eta_factor: 8.0,
            eta_min: 1e-11,
            newton_iters: 40,
        }
    }
}

impl Barrier {
    /// The barrier values visited: `eta_init` divided by `eta_factor` until
    /// the first value at or below `eta_min`.
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = vec![self.eta_init];
        let mut eta = self.eta_init;
        while eta > self.eta_min {
            eta /= self.eta_factor;
            out.push(eta);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub rank: usize,
    /// Ridge weight λ.
    pub reg: f64,
    /// Sweep cap (per barrier level for the positive regime).
    pub max_sweeps: usize,
    /// Relative objective change below which sweeping stops.
    pub tol: f64,
    pub seed: u64,
    pub barrier: Barrier,
    /// Worker threads for row solves; 1 is sequential.
    pub workers: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rank: 1,
            reg: 1e-4,
            max_sweeps: 100,
            tol: 1e-5,
            seed: 0,
            barrier: Barrier::default(),
            workers: 1,
        }
    }
}

impl FitConfig {
    pub fn with_rank(rank: usize) -> Self {
        Self {
            rank,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let b = &self.barrier;
        if self.rank == 0 {
            return Err(Error::Invalid("rank must be at least 1".into()));
        }
        if !(self.reg >= 0.0) {
            return Err(Error::Invalid(format!("regularization {} must be >= 0", self.reg)));
        }
        if !(b.eta_init > b.eta_min && b.eta_min > 0.0 && b.eta_factor > 1.0) {
            return Err(Error::Invalid(format!("bad barrier schedule {b:?}")));
        }
        Ok(())
    }
}

/// Outcome of a completion run.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: CPModel,
    /// Sweeps performed (summed over barrier levels).
    pub sweeps: usize,
    /// Final objective value (at the last barrier value for the positive
    /// regime).
    pub objective: f64,
    /// Objective after initialization followed by the value after every
    /// sweep.
    pub history: Vec<f64>,
    /// Smallest factor entry observed across all iterates.
    pub min_factor_entry: f64,
}

/// Random starting factors: uniform on `[-0.5, 0.5]` for the log-ls regime
/// and on `[0.1, 1.1]` for the positive one.
pub fn init_factors(dims: &[usize], rank: usize, seed: u64, regime: Regime) -> Vec<FactorMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = match regime {
        Regime::LogLs => (-0.5, 0.5),
        Regime::LogRatioPositive => (0.1, 1.1),
    };
    dims.iter()
        .map(|&n| {
            let data = (0..n * rank).map(|_| rng.gen_range(lo..=hi)).collect();
            FactorMatrix { rows: n, rank, data }
        })
        .collect()
}

/// Relative change used as the sweep stopping rule.
pub(crate) fn rel_change(prev: f64, cur: f64) -> f64 {
    (prev - cur).abs() / prev.abs().max(f64::MIN_POSITIVE)
}
