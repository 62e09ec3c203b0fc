//! Execution-time modeling over multi-parameter spaces.
//!
//! Observed runs are binned into a regular-grid tensor ([`space`],
//! [`tensor`]), a low-rank CP decomposition is fit by tensor completion
//! ([`complete`]), and predictions come from multilinear interpolation of
//! reconstructed elements inside the grid or from rank-1 + spline
//! extrapolation outside it ([`infer`]). [`metrics`] provides the
//! scale-independent error measures used for evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::should_implement_trait)]

pub mod cli;
pub mod complete;
pub mod error;
pub mod infer;
pub mod linalg;
pub mod metrics;
pub mod model_file;
pub mod par;
pub mod space;
pub mod synth;
pub mod tensor;

pub use complete::{fit_als, fit_amn, CPModel, FactorMatrix, FitConfig, FitReport, Regime};
pub use error::{Error, Result};
pub use infer::{ExtrapolationModel, HingeSpline, PerformanceModel};
pub use metrics::{evaluate_metrics, Metric, MetricReport};
pub use space::{build_grid, Grid, ParameterSpec, Scale, Value};
pub use tensor::{bin_observations, ObservationSet, SparseTensor};
