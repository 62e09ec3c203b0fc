//! Closed-form execution-time kernels and synthetic dataset generation.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::space::Grid;

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `δmnk + β(mn + nk + mk + mnk/√H)` over `(m, n, k)`.
    GemmAnalytic { delta: f64, beta: f64, cache: f64 },
    /// `c · Π x_j^{a_j}`.
    SeparablePower { coeff: f64, exponents: Vec<f64> },
    /// `Π x_j` while `Σ x_j ≤ split`, `high · Σ x_j` beyond it.
    PiecewiseBilinear { split: f64, high: f64 },
}

impl Kernel {
    pub fn gemm(delta: f64, beta: f64, cache: f64) -> Self {
        Kernel::GemmAnalytic { delta, beta, cache }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::GemmAnalytic { .. } => "gemm-analytic",
            Kernel::SeparablePower { .. } => "separable-power",
            Kernel::PiecewiseBilinear { .. } => "piecewise-bilinear",
        }
    }

    /// Number of inputs, if fixed by the kernel.
    pub fn arity(&self) -> Option<usize> {
        match self {
            Kernel::GemmAnalytic { .. } => Some(3),
            Kernel::SeparablePower { exponents, .. } => Some(exponents.len()),
            Kernel::PiecewiseBilinear { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: &str| {
            Err(Error::InvalidParameter {
                name: name.to_string(),
                reason: reason.to_string(),
            })
        };
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match self {
            Kernel::GemmAnalytic { delta, beta, cache } => {
                if !pos(*delta) {
                    return bad("delta", "must be positive");
                }
                if !pos(*beta) {
                    return bad("beta", "must be positive");
                }
                if !pos(*cache) {
                    return bad("cache", "must be positive");
                }
            }
            Kernel::SeparablePower { coeff, exponents } => {
                if !pos(*coeff) {
                    return bad("coeff", "must be positive");
                }
                if exponents.is_empty() || exponents.iter().any(|a| !a.is_finite()) {
                    return bad("exponents", "need at least one finite exponent");
                }
            }
            Kernel::PiecewiseBilinear { split, high } => {
                if !pos(*split) {
                    return bad("split", "must be positive");
                }
                if !pos(*high) {
                    return bad("high", "must be positive");
                }
            }
        }
        Ok(())
    }

    /// Noise-free time at `x` (all coordinates must be positive).
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if let Some(n) = self.arity() {
            if x.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
        }
        if x.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        if let Some(index) = x.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveValue {
                index,
                value: x[index],
            });
        }
        Ok(match self {
            Kernel::GemmAnalytic { delta, beta, cache } => {
                let (m, n, k) = (x[0], x[1], x[2]);
                delta * m * n * k + beta * (m * n + n * k + m * k + m * n * k / cache.sqrt())
            }
            Kernel::SeparablePower { coeff, exponents } => x
                .iter()
                .zip(exponents)
                .fold(*coeff, |acc, (v, a)| acc * v.powf(*a)),
            Kernel::PiecewiseBilinear { split, high } => {
                let sum: f64 = x.iter().sum();
                if sum <= *split {
                    x.iter().product()
                } else {
                    high * sum
                }
            }
        })
    }
}

/// One sampled parameter: log-uniform over `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl Range {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Range {
            name: name.into(),
            lower,
            upper,
        }
    }

    /// Parses `name=lower:upper`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("expected `name=lower:upper`, got `{s}`"));
        let (name, bounds) = s.split_once('=').ok_or_else(bad)?;
        let (lo, hi) = bounds.split_once(':').ok_or_else(bad)?;
        let r = Range::new(
            name.trim(),
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
        );
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !(self.lower > 0.0) || !(self.lower <= self.upper) || !self.upper.is_finite() {
            return Err(Error::InvalidParameter {
                name: self.name.clone(),
                reason: format!("range [{}, {}] must satisfy 0 < lower <= upper", self.lower, self.upper),
            });
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.lower == self.upper {
            return self.lower;
        }
        let (a, b) = (self.lower.ln(), self.upper.ln());
        rng.gen_range(a..=b).exp().clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub configurations: Vec<Vec<f64>>,
    pub times: Vec<f64>,
}

impl Dataset {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.names.clone();
        header.push("time".into());
        w.write_record(&header)?;
        for (x, t) in self.configurations.iter().zip(&self.times) {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            rec.push(t.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Multiplicative noise factor `1 + N(0, σ)`, redrawn until positive.
struct Noise {
    normal: Option<Normal<f64>>,
}

impl Noise {
    fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "noise".into(),
                reason: "must be a finite non-negative number".into(),
            });
        }
        let normal = if sigma > 0.0 {
            Some(Normal::new(0.0, sigma).map_err(|e| Error::Invalid(e.to_string()))?)
        } else {
            None
        };
        Ok(Noise { normal })
    }

    fn factor(&self, rng: &mut impl Rng) -> f64 {
        let Some(normal) = &self.normal else { return 1.0 };
        loop {
            let f = 1.0 + normal.sample(rng);
            if f > 0.0 {
                return f;
            }
        }
    }
}

fn check_arity(kernel: &Kernel, n: usize) -> Result<()> {
    kernel.validate()?;
    match kernel.arity() {
        Some(a) if a != n => Err(Error::DimensionMismatch { expected: a, got: n }),
        _ if n == 0 => Err(Error::DimensionMismatch { expected: 1, got: 0 }),
        _ => Ok(()),
    }
}

/// Draws `samples` configurations log-uniformly over `ranges` and evaluates
/// `kernel` with multiplicative noise of standard deviation `noise`.
pub fn synthesize(kernel: &Kernel, ranges: &[Range], samples: usize, noise: f64, seed: u64) -> Result<Dataset> {
    check_arity(kernel, ranges.len())?;
    ranges.iter().try_for_each(Range::validate)?;
    let noise = Noise::new(noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut configurations = Vec::with_capacity(samples);
    let mut times = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x: Vec<f64> = ranges.iter().map(|r| r.sample(&mut rng)).collect();
        times.push(kernel.eval(&x)? * noise.factor(&mut rng));
        configurations.push(x);
    }
    Ok(Dataset {
        names: ranges.iter().map(|r| r.name.clone()).collect(),
        configurations,
        times,
    })
}

/// Evaluates `kernel` at every midpoint of an all-numerical grid.
pub fn at_midpoints(kernel: &Kernel, grid: &Grid, noise: f64, seed: u64) -> Result<Dataset> {
    check_arity(kernel, grid.ndim())?;
    let noise = Noise::new(noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut configurations = Vec::new();
    let mut times = Vec::new();
    for idx in grid.indices() {
        let x = idx
            .iter()
            .enumerate()
            .map(|(j, &i)| {
                grid.midpoints(j).map(|m| m[i]).ok_or_else(|| Error::InvalidParameter {
                    name: grid.specs()[j].name.clone(),
                    reason: "kernels take numerical parameters only".into(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        times.push(kernel.eval(&x)? * noise.factor(&mut rng));
        configurations.push(x);
    }
    Ok(Dataset {
        names: grid.specs().iter().map(|s| s.name.clone()).collect(),
        configurations,
        times,
    })
}
