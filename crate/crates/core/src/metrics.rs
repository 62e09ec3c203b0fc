//! Aggregate prediction-error metrics.
//!
//! MLogQ (mean absolute log accuracy ratio) is the headline metric: it is
//! the only one here, together with MLogQ2, that scores over- and
//! under-prediction by the same factor equally. The others are kept for
//! comparison reporting. All logs are natural.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Mape,
    Mae,
    Mse,
    Smape,
    Lgmape,
    MLogQ,
    MLogQ2,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Mape,
        Metric::Mae,
        Metric::Mse,
        Metric::Smape,
        Metric::Lgmape,
        Metric::MLogQ,
        Metric::MLogQ2,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Metric::Mape => "mape",
            Metric::Mae => "mae",
            Metric::Mse => "mse",
            Metric::Smape => "smape",
            Metric::Lgmape => "lgmape",
            Metric::MLogQ => "mlogq",
            Metric::MLogQ2 => "mlogq2",
        }
    }

    /// Per-sample term whose mean is the metric (SMAPE's factor 2 included).
    fn term(self, m: f64, y: f64) -> f64 {
        match self {
            Metric::Mape => (m - y).abs() / y,
            Metric::Mae => (m - y).abs(),
            Metric::Mse => (m - y) * (m - y),
            Metric::Smape => 2.0 * (m - y).abs() / (y + m),
            Metric::Lgmape => ((m - y).abs() / y).ln(),
            Metric::MLogQ => (m / y).ln().abs(),
            Metric::MLogQ2 => {
                let l = (m / y).ln();
                l * l
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.token() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Invalid(format!("unknown metric `{s}`")))
    }
}

/// Parses a comma-separated metric list such as `mlogq,mape`.
pub fn parse_metric_list(s: &str) -> Result<Vec<Metric>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mape: f64,
    pub mae: f64,
    pub mse: f64,
    pub smape: f64,
    /// `-inf` when some prediction matches its truth exactly.
    pub lgmape: f64,
    pub lgmape_exact_match: bool,
    pub mlogq: f64,
    pub mlogq2: f64,
    pub count: usize,
}

impl MetricReport {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Mape => self.mape,
            Metric::Mae => self.mae,
            Metric::Mse => self.mse,
            Metric::Smape => self.smape,
            Metric::Lgmape => self.lgmape,
            Metric::MLogQ => self.mlogq,
            Metric::MLogQ2 => self.mlogq2,
        }
    }
}

fn check_positive(xs: &[f64]) -> Result<()> {
    match xs.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        Some(index) => Err(Error::NonPositiveValue {
            index,
            value: xs[index],
        }),
        None => Ok(()),
    }
}

fn mean_of(metric: Metric, preds: &[f64], truths: &[f64]) -> f64 {
    let sum: f64 = preds
        .iter()
        .zip(truths)
        .map(|(&m, &y)| metric.term(m, y))
        .sum();
    sum / preds.len() as f64
}

/// Evaluates every metric over paired predictions and truths.
pub fn evaluate_metrics(preds: &[f64], truths: &[f64]) -> Result<MetricReport> {
    if preds.len() != truths.len() {
        return Err(Error::LengthMismatch(preds.len(), truths.len()));
    }
    if preds.is_empty() {
        return Err(Error::Invalid("metrics need at least one sample".into()));
    }
    check_positive(preds)?;
    check_positive(truths)?;
    let exact = preds.iter().zip(truths).any(|(m, y)| m == y);
    Ok(MetricReport {
        mape: mean_of(Metric::Mape, preds, truths),
        mae: mean_of(Metric::Mae, preds, truths),
        mse: mean_of(Metric::Mse, preds, truths),
        smape: mean_of(Metric::Smape, preds, truths),
        lgmape: if exact {
            f64::NEG_INFINITY
        } else {
            mean_of(Metric::Lgmape, preds, truths)
        },
        lgmape_exact_match: exact,
        mlogq: mean_of(Metric::MLogQ, preds, truths),
        mlogq2: mean_of(Metric::MLogQ2, preds, truths),
        count: preds.len(),
    })
}

/// MLogQ alone, for callers that only need the headline number.
pub fn mlogq(preds: &[f64], truths: &[f64]) -> Result<f64> {
    evaluate_metrics(preds, truths).map(|r| r.mlogq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error() {
        let y = [1.0, 2.5, 1e-3];
        let r = evaluate_metrics(&y, &y).unwrap();
        for m in [Metric::Mape, Metric::Mae, Metric::Mse, Metric::Smape, Metric::MLogQ, Metric::MLogQ2] {
            assert_eq!(r.get(m), 0.0, "{m}");
        }
        assert!(r.lgmape_exact_match);
        assert_eq!(r.lgmape, f64::NEG_INFINITY);
    }

    #[test]
    fn double_prediction() {
        let r = evaluate_metrics(&[2.0], &[1.0]).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert_eq!(r.mape, 1.0);
        assert_eq!(r.mae, 1.0);
        assert_eq!(r.mse, 1.0);
        assert!((r.smape - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.mlogq - ln2).abs() < 1e-15);
        assert!((r.mlogq2 - ln2 * ln2).abs() < 1e-15);
        assert_eq!(r.lgmape, 0.0);
    }

    #[test]
    fn relative_error_favours_underprediction() {
        let under = evaluate_metrics(&[1e-16], &[1.0]).unwrap();
        let over = evaluate_metrics(&[2.0], &[1.0]).unwrap();
        assert!(under.mape < over.mape);
        assert!(over.mlogq < under.mlogq);
        assert!((under.mlogq - 16.0 * 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(evaluate_metrics(&[1.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(evaluate_metrics(&[1.0], &[-1.0]).is_err());
        assert!(evaluate_metrics(&[], &[]).is_err());
    }

    #[test]
    fn metric_tokens() {
        assert_eq!(
            parse_metric_list("mlogq,MAPE").unwrap(),
            vec![Metric::MLogQ, Metric::Mape]
        );
        assert!(parse_metric_list("rmse").is_err());
    }
}
