//! Versioned plain-text model files.
//!
//! Every real is written with 17 significant digits, which round-trips an
//! IEEE double exactly, so a loaded model predicts bit-identically.
//!
//! ```text
//! cpr-model 1
//! regime logq2
//! rank 2
//! reg 1.0000000000000000e-4
//! density 5.0000000000000000e-1
//! param m,log,32.0,4096.0,8
//! edges ...
//! midpoints ...
//! factor 0
//! row ...
//! extrap 0
//! ...
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::complete::{CPModel, FactorMatrix, Regime};
use crate::error::{Error, Result};
use crate::infer::{Direction, ExtrapolationModel, HingeSpline, HingeTerm, PerformanceModel};
use crate::space::{parse_space, Grid, Mode};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "cpr-model";

/// A performance model plus the training metadata reported by `info`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: PerformanceModel,
    pub reg: f64,
    pub density: f64,
}

fn real(out: &mut String, v: f64) {
    let _ = write!(out, " {v:.16e}");
}

fn reals_line(out: &mut String, key: &str, vs: &[f64]) {
    out.push_str(key);
    vs.iter().for_each(|&v| real(out, v));
    out.push('\n');
}

impl ModelFile {
    pub fn new(model: PerformanceModel, reg: f64, density: f64) -> Self {
        Self { model, reg, density }
    }

    pub fn to_text(&self) -> String {
        let m = &self.model;
        let cp = m.cp();
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(out, "regime {}", cp.regime.token());
        let _ = writeln!(out, "rank {}", cp.rank());
        reals_line(&mut out, "reg", &[self.reg]);
        reals_line(&mut out, "density", &[self.density]);
        for (j, spec) in m.grid().specs().iter().enumerate() {
            let _ = writeln!(out, "param {spec}");
            if let Mode::Numerical { edges, midpoints, .. } = m.grid().mode(j) {
                reals_line(&mut out, "edges", edges);
                reals_line(&mut out, "midpoints", midpoints);
            }
        }
        for (j, f) in cp.factors.iter().enumerate() {
            let _ = writeln!(out, "factor {j}");
            for i in 0..f.rows() {
                reals_line(&mut out, "row", f.row(i));
            }
        }
        for (j, e) in m.extrapolations().iter().enumerate() {
            let Some(e) = e else { continue };
            let _ = writeln!(out, "extrap {j}");
            reals_line(&mut out, "u_hat", &e.u_hat);
            reals_line(&mut out, "sigma_hat", &[e.sigma_hat]);
            reals_line(&mut out, "v_hat", &e.v_hat);
            reals_line(&mut out, "intercept", &[e.spline.intercept]);
            let _ = writeln!(out, "terms {}", e.spline.terms.len());
            for t in &e.spline.terms {
                out.push_str("term");
                real(&mut out, t.knot);
                let _ = write!(out, " {}", t.direction.token());
                real(&mut out, t.coef);
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Parser::new(text).parse()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

struct Parser<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

fn corrupt(line: usize, what: impl std::fmt::Display) -> Error {
    Error::ModelFormat(format!("line {}: {what}", line + 1))
}

fn parse_num<T: FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| corrupt(line, format!("bad number `{s}`")))
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate().peekable(),
        }
    }

    fn peek_key(&mut self) -> Option<&'a str> {
        self.lines
            .peek()
            .map(|(_, l)| l.split_once(' ').map_or(*l, |(k, _)| k))
    }

    /// Next line, which must start with `key`; returns its remainder.
    fn expect(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self
            .lines
            .next()
            .ok_or_else(|| Error::ModelFormat(format!("unexpected end of file, expected `{key}`")))?;
        let (k, rest) = line.split_once(' ').unwrap_or((line, ""));
        if k != key {
            return Err(corrupt(n, format!("expected `{key}`, found `{k}`")));
        }
        Ok((n, rest))
    }

    fn reals(&mut self, key: &str, len: Option<usize>) -> Result<Vec<f64>> {
        let (n, rest) = self.expect(key)?;
        let vs = rest
            .split_whitespace()
            .map(|s| parse_num::<f64>(n, s))
            .collect::<Result<Vec<_>>>()?;
        if let Some(len) = len {
            if vs.len() != len {
                return Err(corrupt(n, format!("`{key}` needs {len} values, found {}", vs.len())));
            }
        }
        Ok(vs)
    }

    fn scalar(&mut self, key: &str) -> Result<f64> {
        Ok(self.reals(key, Some(1))?[0])
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let (n, rest) = self.expect(key)?;
        parse_num(n, rest.trim())
    }

    fn parse(mut self) -> Result<ModelFile> {
        let (n, rest) = self.expect(MAGIC)?;
        let version: u32 = parse_num(n, rest.trim())?;
        if version != FORMAT_VERSION {
            return Err(Error::Version(version));
        }
        let (n, rest) = self.expect("regime")?;
        let regime: Regime = rest.trim().parse().map_err(|e| corrupt(n, e))?;
        let rank = self.count("rank")?;
        let reg = self.scalar("reg")?;
        let density = self.scalar("density")?;

        let mut specs = Vec::new();
        let mut geometry = Vec::new();
        while self.peek_key() == Some("param") {
            let (n, rest) = self.expect("param")?;
            let mut parsed = parse_space(rest).map_err(|e| corrupt(n, e))?;
            if parsed.len() != 1 {
                return Err(corrupt(n, "expected one parameter"));
            }
            let spec = parsed.remove(0);
            let cells = spec.cells();
            geometry.push(if spec.is_categorical() {
                None
            } else {
                Some((self.reals("edges", Some(cells + 1))?, self.reals("midpoints", Some(cells))?))
            });
            specs.push(spec);
        }
        let grid = Grid::from_parts(specs, geometry)?;

        let mut factors = Vec::with_capacity(grid.ndim());
        for (j, &rows) in grid.dims().iter().enumerate() {
            let (n, rest) = self.expect("factor")?;
            if parse_num::<usize>(n, rest.trim())? != j {
                return Err(corrupt(n, format!("expected factor {j}")));
            }
            let mut data = Vec::with_capacity(rows * rank);
            for _ in 0..rows {
                data.extend(self.reals("row", Some(rank))?);
            }
            factors.push(FactorMatrix::from_vec(rows, rank, data)?);
        }
        let cp = CPModel::new(factors, regime)?;

        let mut extrap = vec![None; grid.ndim()];
        while self.peek_key() == Some("extrap") {
            let (n, rest) = self.expect("extrap")?;
            let j: usize = parse_num(n, rest.trim())?;
            if j >= grid.ndim() || extrap[j].is_some() {
                return Err(corrupt(n, format!("bad extrapolation mode {j}")));
            }
            let u_hat = self.reals("u_hat", Some(grid.dims()[j]))?;
            let sigma_hat = self.scalar("sigma_hat")?;
            let v_hat = self.reals("v_hat", Some(rank))?;
            let intercept = self.scalar("intercept")?;
            let count = self.count("terms")?;
            let mut terms = Vec::with_capacity(count);
            for _ in 0..count {
                let (n, rest) = self.expect("term")?;
                let f: Vec<&str> = rest.split_whitespace().collect();
                let [knot, dir, coef] = f.as_slice() else {
                    return Err(corrupt(n, "term needs knot, direction and coefficient"));
                };
                let direction = match *dir {
                    "+" => Direction::Right,
                    "-" => Direction::Left,
                    other => return Err(corrupt(n, format!("bad direction `{other}`"))),
                };
                terms.push(HingeTerm {
                    knot: parse_num(n, knot)?,
                    direction,
                    coef: parse_num(n, coef)?,
                });
            }
            extrap[j] = Some(ExtrapolationModel {
                u_hat,
                sigma_hat,
                v_hat,
                spline: HingeSpline { intercept, terms },
            });
        }
        self.expect("end")?;
        if let Some((n, l)) = self.lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(corrupt(n, format!("trailing content `{l}`")));
        }
        let model = PerformanceModel::with_extrapolation(grid, cp, extrap)?;
        Ok(ModelFile { model, reg, density })
    }
}
