//! Parameter specifications and the regular-grid discretization of the
//! modeling domain.
//!
//! Each numerical parameter range is split into `cells` sub-intervals with
//! linear or logarithmic spacing. Every sub-interval is represented by a
//! midpoint; tensor element `i` along a mode is associated with midpoint
//! `i`. Log-spaced modes use the ceiling of the geometric mean of the two
//! bounding edges, so midpoints of integer-valued parameters are integers.
//! Categorical parameters index their labels directly.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Coordinate transform applied along a numerical mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

impl Scale {
    /// `h_j`: identity for linear modes, natural log for log modes.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Scale::Linear => x,
            Scale::Log => x.ln(),
        }
    }

    #[inline]
    pub fn invert(self, h: f64) -> f64 {
        match self {
            Scale::Linear => h,
            Scale::Log => h.exp(),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Scale::Linear => "lin",
            Scale::Log => "log",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    Numerical {
        scale: Scale,
        lower: f64,
        upper: f64,
        cells: usize,
    },
    Categorical {
        labels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpec {
    pub name: String,
    pub kind: ParamKind,
}

impl ParameterSpec {
    pub fn linear(name: impl Into<String>, lower: f64, upper: f64, cells: usize) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Numerical {
                scale: Scale::Linear,
                lower,
                upper,
                cells,
            },
        }
    }

    pub fn log(name: impl Into<String>, lower: f64, upper: f64, cells: usize) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Numerical {
                scale: Scale::Log,
                lower,
                upper,
                cells,
            },
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        labels: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Categorical {
                labels: labels.into_iter().map(Into::into).collect(),
            },
        }
    }

    /// Number of tensor elements along this mode.
    pub fn cells(&self) -> usize {
        match &self.kind {
            ParamKind::Numerical { cells, .. } => *cells,
            ParamKind::Categorical { labels } => labels.len(),
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ParamKind::Categorical { .. })
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidParameter {
            name: self.name.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(',') {
            return Err(self.invalid("name must be non-empty and contain no commas"));
        }
        match &self.kind {
            ParamKind::Numerical {
                scale,
                lower,
                upper,
                cells,
            } => {
                if !lower.is_finite() || !upper.is_finite() {
                    return Err(self.invalid("bounds must be finite"));
                }
                if lower >= upper {
                    return Err(self.invalid(format!("lower {lower} must be below upper {upper}")));
                }
                if *scale == Scale::Log && *lower <= 0.0 {
                    return Err(self.invalid(format!(
                        "log-spaced parameter needs a positive lower bound, got {lower}"
                    )));
                }
                if *cells == 0 {
                    return Err(self.invalid("cell count must be at least 1"));
                }
            }
            ParamKind::Categorical { labels } => {
                if labels.is_empty() {
                    return Err(self.invalid("needs at least one category"));
                }
                let mut seen = std::collections::HashSet::new();
                for l in labels {
                    if l.is_empty() || l.contains('|') || l.contains(',') {
                        return Err(self.invalid(format!("bad category label `{l}`")));
                    }
                    if !seen.insert(l.as_str()) {
                        return Err(self.invalid(format!("duplicate category `{l}`")));
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ParameterSpec {
    /// Renders the spec as one line of a parameter-space file.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParamKind::Numerical {
                scale,
                lower,
                upper,
                cells,
            } => write!(
                f,
                "{},{},{:?},{:?},{}",
                self.name,
                scale.token(),
                lower,
                upper,
                cells
            ),
            ParamKind::Categorical { labels } => {
                write!(f, "{},cat,{}", self.name, labels.join("|"))
            }
        }
    }
}

/// One coordinate of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Cat(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Numerical {
        scale: Scale,
        edges: Vec<f64>,
        midpoints: Vec<f64>,
    },
    Categorical {
        labels: Vec<String>,
        index: HashMap<String, usize>,
    },
}

impl Mode {
    pub fn len(&self) -> usize {
        match self {
            Mode::Numerical { midpoints, .. } => midpoints.len(),
            Mode::Categorical { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-mode position of a configuration relative to the midpoint lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeAnchor {
    /// A single tensor index with weight one: categorical modes and
    /// numerical modes with one cell.
    Fixed(usize),
    /// Interpolate between midpoints `base` and `base + 1` with weight
    /// `weight` on the upper one. `edge` marks the boundary bands where
    /// `weight` falls outside `[0, 1)`.
    Pair { base: usize, weight: f64, edge: bool },
}

/// The discretized modeling domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    specs: Vec<ParameterSpec>,
    modes: Vec<Mode>,
}

/// Ceiling that ignores floating-point fuzz around exact integers.
fn ceil_exact(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 1e-12 * v.abs().max(1.0) {
        r
    } else {
        v.ceil()
    }
}

fn check_midpoints(spec: &ParameterSpec, edges: &[f64], mids: &[f64]) -> Result<()> {
    for (i, m) in mids.iter().enumerate() {
        if !(edges[i] <= *m && *m <= edges[i + 1]) {
            return Err(spec.invalid(format!(
                "midpoint {m} of cell {i} lies outside [{}, {}]; use a coarser cell count",
                edges[i],
                edges[i + 1]
            )));
        }
    }
    if let Some(w) = mids.windows(2).find(|w| w[0] >= w[1]) {
        return Err(spec.invalid(format!(
            "adjacent midpoints collapse to {}; use a coarser cell count",
            w[0]
        )));
    }
    Ok(())
}

fn build_mode(spec: &ParameterSpec) -> Result<Mode> {
    spec.validate()?;
    match &spec.kind {
        ParamKind::Numerical {
            scale,
            lower,
            upper,
            cells,
        } => {
            let n = *cells;
            let (lo, hi) = (scale.apply(*lower), scale.apply(*upper));
            let mut edges: Vec<f64> = (0..=n)
                .map(|i| scale.invert(lo + (hi - lo) * i as f64 / n as f64))
                .collect();
            edges[0] = *lower;
            edges[n] = *upper;
            if edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(spec.invalid("edges are not strictly increasing"));
            }
            let midpoints: Vec<f64> = edges
                .windows(2)
                .map(|w| match scale {
                    Scale::Linear => 0.5 * (w[0] + w[1]),
                    Scale::Log => ceil_exact((0.5 * (w[0].ln() + w[1].ln())).exp()),
                })
                .collect();
            check_midpoints(spec, &edges, &midpoints)?;
            Ok(Mode::Numerical {
                scale: *scale,
                edges,
                midpoints,
            })
        }
        ParamKind::Categorical { labels } => Ok(Mode::Categorical {
            labels: labels.clone(),
            index: labels
                .iter()
                .enumerate()
                .map(|(i, l)| (l.clone(), i))
                .collect(),
        }),
    }
}

/// Builds the grid for an ordered list of parameters.
pub fn build_grid(specs: Vec<ParameterSpec>) -> Result<Grid> {
    if specs.is_empty() {
        return Err(Error::Invalid("a grid needs at least one parameter".into()));
    }
    let mut names = std::collections::HashSet::new();
    for s in &specs {
        if !names.insert(s.name.as_str()) {
            return Err(s.invalid("duplicate parameter name"));
        }
    }
    let modes = specs.iter().map(build_mode).collect::<Result<Vec<_>>>()?;
    Ok(Grid { specs, modes })
}

impl Grid {
    /// Rebuilds a grid from stored edges and midpoints (one entry per
    /// numerical mode, `None` for categorical ones), checking them against
    /// the specs.
    pub fn from_parts(
        specs: Vec<ParameterSpec>,
        geometry: Vec<Option<(Vec<f64>, Vec<f64>)>>,
    ) -> Result<Grid> {
        if specs.len() != geometry.len() {
            return Err(Error::LengthMismatch(specs.len(), geometry.len()));
        }
        let mut modes = Vec::with_capacity(specs.len());
        for (spec, geo) in specs.iter().zip(geometry) {
            spec.validate()?;
            let mode = match (&spec.kind, geo) {
                (ParamKind::Numerical { scale, cells, .. }, Some((edges, midpoints))) => {
                    if edges.len() != cells + 1 || midpoints.len() != *cells {
                        return Err(spec.invalid("stored geometry does not match cell count"));
                    }
                    if edges.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(spec.invalid("edges are not strictly increasing"));
                    }
                    check_midpoints(spec, &edges, &midpoints)?;
                    Mode::Numerical {
                        scale: *scale,
                        edges,
                        midpoints,
                    }
                }
                (ParamKind::Categorical { .. }, None) => build_mode(spec)?,
                _ => return Err(spec.invalid("stored geometry does not match parameter kind")),
            };
            modes.push(mode);
        }
        let grid = Grid { specs, modes };
        Ok(grid)
    }

    pub fn specs(&self) -> &[ParameterSpec] {
        &self.specs
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, j: usize) -> &Mode {
        &self.modes[j]
    }

    pub fn ndim(&self) -> usize {
        self.specs.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modes.iter().map(Mode::len).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn edges(&self, j: usize) -> Option<&[f64]> {
        match &self.modes[j] {
            Mode::Numerical { edges, .. } => Some(edges),
            Mode::Categorical { .. } => None,
        }
    }

    pub fn midpoints(&self, j: usize) -> Option<&[f64]> {
        match &self.modes[j] {
            Mode::Numerical { midpoints, .. } => Some(midpoints),
            Mode::Categorical { .. } => None,
        }
    }

    pub fn scale(&self, j: usize) -> Option<Scale> {
        match &self.modes[j] {
            Mode::Numerical { scale, .. } => Some(*scale),
            Mode::Categorical { .. } => None,
        }
    }

    fn check_arity(&self, x: &[Value]) -> Result<()> {
        if x.len() != self.ndim() {
            return Err(Error::DimensionMismatch {
                expected: self.ndim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn type_error(&self, j: usize, v: &Value) -> Error {
        Error::InvalidParameter {
            name: self.specs[j].name.clone(),
            reason: format!("value `{v}` has the wrong kind for this parameter"),
        }
    }

    /// Whether numerical coordinate `x` lies in the closed domain of mode `j`.
    pub fn contains(&self, j: usize, x: f64) -> bool {
        match &self.modes[j] {
            Mode::Numerical { edges, .. } => x >= edges[0] && x <= edges[edges.len() - 1],
            Mode::Categorical { .. } => true,
        }
    }

    fn out_of_domain(&self, j: usize, x: f64) -> Error {
        let edges = self.edges(j).unwrap_or(&[f64::NAN]);
        Error::OutOfDomain {
            mode: j,
            name: self.specs[j].name.clone(),
            value: x,
            lower: edges[0],
            upper: edges[edges.len() - 1],
        }
    }

    /// Tensor index of a single coordinate along mode `j`.
    pub fn mode_index(&self, j: usize, v: &Value) -> Result<usize> {
        match (&self.modes[j], v) {
            (Mode::Numerical { edges, .. }, Value::Num(x)) => {
                let x = *x;
                let n = edges.len() - 1;
                if !(x >= edges[0] && x <= edges[n]) {
                    return Err(self.out_of_domain(j, x));
                }
                let i = edges.partition_point(|e| *e <= x);
                Ok((i.saturating_sub(1)).min(n - 1))
            }
            (Mode::Categorical { index, .. }, Value::Cat(label)) => {
                index
                    .get(label)
                    .copied()
                    .ok_or_else(|| Error::UnknownCategory {
                        name: self.specs[j].name.clone(),
                        label: label.clone(),
                    })
            }
            _ => Err(self.type_error(j, v)),
        }
    }

    /// Maps a configuration to the multi-index of the cell containing it.
    pub fn cell_index(&self, x: &[Value]) -> Result<Vec<usize>> {
        self.check_arity(x)?;
        x.iter()
            .enumerate()
            .map(|(j, v)| self.mode_index(j, v))
            .collect()
    }

    /// Interpolation anchor of a numerical coordinate along mode `j`. The
    /// coordinate is not domain-checked here.
    pub fn numeric_anchor(&self, j: usize, x: f64) -> ModeAnchor {
        let Mode::Numerical {
            scale, midpoints, ..
        } = &self.modes[j]
        else {
            panic!("numeric_anchor on categorical mode {j}");
        };
        let n = midpoints.len();
        if n == 1 {
            return ModeAnchor::Fixed(0);
        }
        let (base, edge) = if x < midpoints[0] {
            (0, true)
        } else if x >= midpoints[n - 1] {
            (n - 2, true)
        } else {
            (midpoints.partition_point(|m| *m <= x) - 1, false)
        };
        let h0 = scale.apply(midpoints[base]);
        let h1 = scale.apply(midpoints[base + 1]);
        ModeAnchor::Pair {
            base,
            weight: (scale.apply(x) - h0) / (h1 - h0),
            edge,
        }
    }

    /// Per-mode interpolation anchors of an in-domain configuration.
    pub fn interpolation_anchor(&self, x: &[Value]) -> Result<Vec<ModeAnchor>> {
        self.check_arity(x)?;
        x.iter()
            .enumerate()
            .map(|(j, v)| match (&self.modes[j], v) {
                (Mode::Numerical { .. }, Value::Num(xv)) => {
                    if !self.contains(j, *xv) || xv.is_nan() {
                        Err(self.out_of_domain(j, *xv))
                    } else {
                        Ok(self.numeric_anchor(j, *xv))
                    }
                }
                (Mode::Categorical { .. }, Value::Cat(_)) => {
                    self.mode_index(j, v).map(ModeAnchor::Fixed)
                }
                _ => Err(self.type_error(j, v)),
            })
            .collect()
    }

    /// The configuration sitting at the midpoint of cell `index`.
    pub fn midpoint_config(&self, index: &[usize]) -> Vec<Value> {
        self.modes
            .iter()
            .zip(index)
            .map(|(m, &i)| match m {
                Mode::Numerical { midpoints, .. } => Value::Num(midpoints[i]),
                Mode::Categorical { labels, .. } => Value::Cat(labels[i].clone()),
            })
            .collect()
    }

    /// All multi-indices of the grid in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let dims = self.dims();
        let total: usize = dims.iter().product();
        (0..total).map(move |mut flat| {
            let mut idx = vec![0; dims.len()];
            for j in (0..dims.len()).rev() {
                idx[j] = flat % dims[j];
                flat /= dims[j];
            }
            idx
        })
    }
}

/// Parses a parameter-space definition: one `name,lin|log,lower,upper,cells`
/// or `name,cat,a|b|c` line per parameter, `#` comments allowed.
pub fn parse_space(text: &str) -> Result<Vec<ParameterSpec>> {
    let mut specs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| Error::BadRow {
            row: lineno + 1,
            reason: format!("{reason}: `{line}`"),
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let spec = match fields.as_slice() {
            [name, kind @ ("lin" | "log"), lo, hi, cells] => {
                let lo: f64 = lo.parse().map_err(|_| bad("bad lower bound"))?;
                let hi: f64 = hi.parse().map_err(|_| bad("bad upper bound"))?;
                let cells: usize = cells.parse().map_err(|_| bad("bad cell count"))?;
                if *kind == "lin" {
                    ParameterSpec::linear(*name, lo, hi, cells)
                } else {
                    ParameterSpec::log(*name, lo, hi, cells)
                }
            }
            [name, "cat", labels] => {
                ParameterSpec::categorical(*name, labels.split('|').map(str::trim))
            }
            _ => return Err(bad("expected `name,lin|log,lower,upper,cells` or `name,cat,a|b`")),
        };
        spec.validate()?;
        specs.push(spec);
    }
    Ok(specs)
}

pub fn load_space(path: impl AsRef<Path>) -> Result<Vec<ParameterSpec>> {
    parse_space(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(spec: ParameterSpec) -> Grid {
        build_grid(vec![spec]).unwrap()
    }

    #[test]
    fn log_midpoint_single_cell() {
        let g = one(ParameterSpec::log("m", 32.0, 64.0, 1));
        assert_eq!(g.midpoints(0).unwrap(), &[46.0]);
    }

    #[test]
    fn linear_edges_and_midpoints() {
        let g = one(ParameterSpec::linear("x", 0.0, 10.0, 2));
        assert_eq!(g.edges(0).unwrap(), &[0.0, 5.0, 10.0]);
        assert_eq!(g.midpoints(0).unwrap(), &[2.5, 7.5]);
    }

    #[test]
    fn log_two_cells() {
        let g = one(ParameterSpec::log("x", 1.0, 100.0, 2));
        let e = g.edges(0).unwrap();
        assert_eq!(e[0], 1.0);
        assert!((e[1] - 10.0).abs() < 1e-12);
        assert_eq!(e[2], 100.0);
        assert_eq!(g.midpoints(0).unwrap(), &[4.0, 32.0]);
    }

    #[test]
    fn exact_integer_geometric_mean_is_not_bumped() {
        // sqrt(1 * 4) = 2 must not round up to 3 through exp/ln fuzz
        let g = one(ParameterSpec::log("x", 1.0, 16.0, 2));
        assert_eq!(g.midpoints(0).unwrap(), &[2.0, 8.0]);
    }

    #[test]
    fn rejects_bad_specs() {
        for spec in [
            ParameterSpec::log("a", 0.0, 10.0, 2),
            ParameterSpec::linear("b", 5.0, 5.0, 2),
            ParameterSpec::linear("c", 0.0, 1.0, 0),
            ParameterSpec::categorical("d", ["x", "x"]),
        ] {
            let name = spec.name.clone();
            match build_grid(vec![spec]) {
                Err(Error::InvalidParameter { name: n, .. }) => assert_eq!(n, name),
                other => panic!("expected rejection of {name}, got {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_collapsed_log_midpoints() {
        let err = build_grid(vec![ParameterSpec::log("t", 1.0, 2.0, 4)]).unwrap_err();
        assert!(err.to_string().contains("coarser"), "{err}");
    }

    #[test]
    fn cell_index_boundaries() {
        let g = one(ParameterSpec::log("x", 1.0, 100.0, 2));
        let e1 = g.edges(0).unwrap()[1];
        assert_eq!(g.cell_index(&[Value::Num(e1)]).unwrap(), vec![1]);
        assert_eq!(g.cell_index(&[Value::Num(100.0)]).unwrap(), vec![1]);
        assert_eq!(g.cell_index(&[Value::Num(1.0)]).unwrap(), vec![0]);
        match g.cell_index(&[Value::Num(150.0)]) {
            Err(Error::OutOfDomain { mode: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn categorical_lookup() {
        let g = build_grid(vec![
            ParameterSpec::categorical("alg", ["a", "b", "c"]),
            ParameterSpec::linear("x", 0.0, 1.0, 1),
        ])
        .unwrap();
        assert_eq!(
            g.cell_index(&[Value::Cat("c".into()), Value::Num(0.3)])
                .unwrap(),
            vec![2, 0]
        );
        assert!(matches!(
            g.cell_index(&[Value::Cat("z".into()), Value::Num(0.3)]),
            Err(Error::UnknownCategory { .. })
        ));
    }

    #[test]
    fn anchors_on_log_mode() {
        let g = one(ParameterSpec::log("x", 1.0, 100.0, 2));
        assert_eq!(
            g.numeric_anchor(0, 4.0),
            ModeAnchor::Pair {
                base: 0,
                weight: 0.0,
                edge: false
            }
        );
        let ModeAnchor::Pair { base, weight, edge } = g.numeric_anchor(0, 128f64.sqrt()) else {
            panic!()
        };
        assert_eq!((base, edge), (0, false));
        assert!((weight - 0.5).abs() < 1e-14);
        let ModeAnchor::Pair { base, weight, edge } = g.numeric_anchor(0, 2.0) else {
            panic!()
        };
        assert_eq!((base, edge), (0, true));
        assert!((weight + 1.0 / 3.0).abs() < 1e-14);
        // last midpoint is in the upper edge band and gets weight exactly 1
        assert_eq!(
            g.numeric_anchor(0, 32.0),
            ModeAnchor::Pair {
                base: 0,
                weight: 1.0,
                edge: true
            }
        );
    }

    #[test]
    fn space_file_roundtrip() {
        let text = "# comment\nm,log,32,4096,8\nx,lin,0,1.5,3\nalg,cat,a|b\n";
        let specs = parse_space(text).unwrap();
        assert_eq!(specs.len(), 3);
        let rendered: String = specs.iter().map(|s| format!("{s}\n")).collect();
        assert_eq!(parse_space(&rendered).unwrap(), specs);
        assert!(parse_space("m,log,32\n").is_err());
    }
}
