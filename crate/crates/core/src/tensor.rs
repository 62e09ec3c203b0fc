//! Observation ingestion and binning into a partially observed tensor.

use std::path::Path;

use crate::error::{Error, Result};
use crate::par;
use crate::space::{Grid, Mode, Value};

/// Measured configurations and their execution times in seconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationSet {
    pub configurations: Vec<Vec<Value>>,
    pub times: Vec<f64>,
}

impl ObservationSet {
    pub fn new(configurations: Vec<Vec<Value>>, times: Vec<f64>) -> Result<Self> {
        if configurations.len() != times.len() {
            return Err(Error::LengthMismatch(configurations.len(), times.len()));
        }
        if let Some((i, &t)) = times.iter().enumerate().find(|(_, t)| !(**t > 0.0)) {
            return Err(Error::BadRow {
                row: i + 1,
                reason: format!("time {t} is not positive"),
            });
        }
        Ok(Self {
            configurations,
            times,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A CSV file as header plus raw string records, comment lines skipped.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: impl AsRef<Path>) -> Result<Table> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let records = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Table { headers, records })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Parses the grid parameters of every record (header-keyed, so column
    /// order is free).
    pub fn configurations(&self, grid: &Grid) -> Result<Vec<Vec<Value>>> {
        let cols = grid
            .specs()
            .iter()
            .map(|s| self.column(&s.name))
            .collect::<Result<Vec<_>>>()?;
        self.records
            .iter()
            .enumerate()
            .map(|(r, rec)| {
                cols.iter()
                    .enumerate()
                    .map(|(j, &c)| {
                        let raw = rec.get(c).map(String::as_str).unwrap_or("");
                        parse_value(grid, j, raw).map_err(|reason| Error::BadRow { row: r + 1, reason })
                    })
                    .collect()
            })
            .collect()
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        let c = self.column("time")?;
        self.records
            .iter()
            .enumerate()
            .map(|(r, rec)| {
                let raw = rec.get(c).map(String::as_str).unwrap_or("");
                let t: f64 = raw.parse().map_err(|_| Error::BadRow {
                    row: r + 1,
                    reason: format!("unparseable time `{raw}`"),
                })?;
                if !(t > 0.0) || !t.is_finite() {
                    return Err(Error::BadRow {
                        row: r + 1,
                        reason: format!("time {t} is not positive"),
                    });
                }
                Ok(t)
            })
            .collect()
    }
}

fn parse_value(grid: &Grid, j: usize, raw: &str) -> std::result::Result<Value, String> {
    let name = &grid.specs()[j].name;
    match grid.mode(j) {
        Mode::Numerical { .. } => raw
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Value::Num)
            .ok_or_else(|| format!("unparseable number `{raw}` in column `{name}`")),
        Mode::Categorical { index, .. } => {
            if index.contains_key(raw) {
                Ok(Value::Cat(raw.to_string()))
            } else {
                Err(format!("unknown category `{raw}` in column `{name}`"))
            }
        }
    }
}

/// Reads an observation CSV: a header naming every grid parameter plus a
/// `time` column.
pub fn load_observations(path: impl AsRef<Path>, grid: &Grid) -> Result<ObservationSet> {
    observations_from_table(&Table::read(path)?, grid)
}

pub fn observations_from_table(table: &Table, grid: &Grid) -> Result<ObservationSet> {
    table.column("time")?;
    let configurations = table.configurations(grid)?;
    let times = table.times()?;
    ObservationSet::new(configurations, times)
}

/// Partially observed tensor: observed multi-indices with the mean time and
/// sample count of each cell. Entries are kept in lexicographic index order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    dims: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    counts: Vec<u32>,
}

/// Tensor built from observations plus the number of rows dropped for
/// lying outside the grid.
#[derive(Debug, Clone)]
pub struct Binned {
    pub tensor: SparseTensor,
    pub out_of_domain: usize,
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

impl SparseTensor {
    /// Builds a tensor from `(index, value)` entries, one sample per cell.
    pub fn from_entries(dims: Vec<usize>, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let mut entries = entries;
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let d = dims.len();
        let mut t = SparseTensor {
            dims,
            indices: Vec::with_capacity(entries.len() * d),
            values: Vec::with_capacity(entries.len()),
            counts: Vec::with_capacity(entries.len()),
        };
        for (k, (idx, v)) in entries.into_iter().enumerate() {
            if idx.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: idx.len(),
                });
            }
            if idx.iter().zip(&t.dims).any(|(i, n)| i >= n) {
                return Err(Error::Invalid(format!("index {idx:?} outside dims {:?}", t.dims)));
            }
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveValue { index: k, value: v });
            }
            if k > 0 && t.index(k - 1) == idx.as_slice() {
                return Err(Error::Invalid(format!("duplicate index {idx:?}")));
            }
            t.indices.extend_from_slice(&idx);
            t.values.push(v);
            t.counts.push(1);
        }
        Ok(t)
    }

    /// Fully observed tensor from row-major values.
    pub fn from_dense(dims: Vec<usize>, values: &[f64]) -> Result<Self> {
        let total: usize = dims.iter().product();
        if values.len() != total {
            return Err(Error::LengthMismatch(values.len(), total));
        }
        let d = dims.len();
        let entries = (0..total)
            .map(|mut flat| {
                let mut idx = vec![0; d];
                for j in (0..d).rev() {
                    idx[j] = flat % dims[j];
                    flat /= dims[j];
                }
                idx
            })
            .zip(values.iter().copied())
            .collect();
        Self::from_entries(dims, entries)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Number of observed entries `|Ω|`.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn index(&self, k: usize) -> &[usize] {
        let d = self.dims.len();
        &self.indices[k * d..(k + 1) * d]
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self, k: usize) -> u32 {
        self.counts[k]
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        (0..self.nnz()).map(move |k| (self.index(k), self.values[k]))
    }

    pub fn get(&self, idx: &[usize]) -> Option<f64> {
        let (mut lo, mut hi) = (0, self.nnz());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.index(mid).cmp(idx) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(self.values[mid]),
            }
        }
        None
    }

    /// Fraction of cells holding at least one observation.
    pub fn density(&self) -> f64 {
        let total: f64 = self.dims.iter().map(|&n| n as f64).product();
        if total == 0.0 {
            0.0
        } else {
            self.nnz() as f64 / total
        }
    }
}

/// Free-standing form of [`SparseTensor::density`].
pub fn density(t: &SparseTensor) -> f64 {
    t.density()
}

pub fn bin_observations(obs: &ObservationSet, grid: &Grid) -> Result<Binned> {
    bin_observations_with(obs, grid, 1)
}

/// Bins observations into grid cells, storing per-cell mean times. Cell
/// lookup is spread over `workers` threads; sums run over sorted samples
/// so the result does not depend on row order or worker count.
pub fn bin_observations_with(obs: &ObservationSet, grid: &Grid, workers: usize) -> Result<Binned> {
    let dims = grid.dims();
    let located = par::install(workers, || {
        par::map_range(obs.len(), workers != 1, |r| {
            match grid.cell_index(&obs.configurations[r]) {
                Ok(idx) => Ok(Some(idx)),
                Err(Error::OutOfDomain { .. }) => Ok(None),
                Err(e) => Err(match e {
                    Error::BadRow { .. } => e,
                    other => Error::BadRow {
                        row: r + 1,
                        reason: other.to_string(),
                    },
                }),
            }
        })
    });
    let mut cells: Vec<(Vec<usize>, f64)> = Vec::with_capacity(obs.len());
    let mut out_of_domain = 0;
    for (r, loc) in located.into_iter().enumerate() {
        match loc? {
            Some(idx) => cells.push((idx, obs.times[r])),
            None => out_of_domain += 1,
        }
    }
    if cells.is_empty() {
        return Err(Error::EmptyTensor {
            rejected: out_of_domain,
        });
    }
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let d = dims.len();
    let mut t = SparseTensor {
        dims,
        indices: Vec::new(),
        values: Vec::new(),
        counts: Vec::new(),
    };
    let mut start = 0;
    let mut buf = Vec::new();
    while start < cells.len() {
        let mut end = start + 1;
        while end < cells.len() && cells[end].0 == cells[start].0 {
            end += 1;
        }
        buf.clear();
        buf.extend(cells[start..end].iter().map(|c| c.1));
        let n = end - start;
        t.indices.extend_from_slice(&cells[start].0);
        t.values.push(pairwise_sum(&buf) / n as f64);
        t.counts.push(n as u32);
        start = end;
    }
    debug_assert_eq!(t.indices.len(), t.values.len() * d);
    Ok(Binned {
        tensor: t,
        out_of_domain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_grid, ParameterSpec};

    fn grid2() -> Grid {
        build_grid(vec![
            ParameterSpec::log("m", 32.0, 4096.0, 4),
            ParameterSpec::log("n", 32.0, 4096.0, 4),
        ])
        .unwrap()
    }

    #[test]
    fn parses_single_row() {
        let t = Table::from_reader("m,n,time\n64,64,0.002\n".as_bytes()).unwrap();
        let obs = observations_from_table(&t, &grid2()).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs.times, vec![0.002]);
    }

    #[test]
    fn zero_time_names_row() {
        let t = Table::from_reader("m,n,time\n64,64,0\n".as_bytes()).unwrap();
        match observations_from_table(&t, &grid2()) {
            Err(Error::BadRow { row: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_order_is_free() {
        let g = grid2();
        let a = Table::from_reader("m,n,time\n64,128,0.5\n".as_bytes()).unwrap();
        let b = Table::from_reader("# note\nn,time,m\n128,0.5,64\n".as_bytes()).unwrap();
        assert_eq!(
            observations_from_table(&a, &g).unwrap(),
            observations_from_table(&b, &g).unwrap()
        );
    }

    #[test]
    fn missing_time_column() {
        let t = Table::from_reader("m,n\n64,64\n".as_bytes()).unwrap();
        assert_eq!(
            observations_from_table(&t, &grid2()).unwrap_err(),
            Error::MissingColumn("time".into())
        );
    }

    #[test]
    fn same_cell_is_averaged() {
        let g = grid2();
        let obs = ObservationSet::new(
            vec![
                vec![Value::Num(40.0), Value::Num(40.0)],
                vec![Value::Num(41.0), Value::Num(42.0)],
                vec![Value::Num(4000.0), Value::Num(40.0)],
                vec![Value::Num(9000.0), Value::Num(40.0)],
            ],
            vec![1.0, 3.0, 5.0, 7.0],
        )
        .unwrap();
        let b = bin_observations(&obs, &g).unwrap();
        assert_eq!(b.out_of_domain, 1);
        assert_eq!(b.tensor.nnz(), 2);
        assert_eq!(b.tensor.get(&[0, 0]), Some(2.0));
        assert_eq!(b.tensor.count(0), 2);
        assert_eq!(b.tensor.get(&[3, 0]), Some(5.0));
    }

    #[test]
    fn all_out_of_domain_is_an_error() {
        let obs = ObservationSet::new(vec![vec![Value::Num(1.0), Value::Num(1.0)]], vec![1.0]).unwrap();
        assert!(matches!(
            bin_observations(&obs, &grid2()),
            Err(Error::EmptyTensor { rejected: 1 })
        ));
    }

    #[test]
    fn density_values() {
        let full = SparseTensor::from_dense(vec![2, 2], &[1.0; 4]).unwrap();
        assert_eq!(full.density(), 1.0);
        let one = SparseTensor::from_entries(vec![4, 4], vec![(vec![1, 2], 3.0)]).unwrap();
        assert_eq!(one.density(), 0.0625);
        let empty = SparseTensor::from_entries(vec![4, 4], vec![]).unwrap();
        assert_eq!(empty.density(), 0.0);
    }

    #[test]
    fn from_entries_rejects_nonpositive() {
        assert!(SparseTensor::from_entries(vec![2], vec![(vec![0], -1.0)]).is_err());
        assert!(SparseTensor::from_entries(vec![2], vec![(vec![0], 1.0), (vec![0], 2.0)]).is_err());
    }
}
