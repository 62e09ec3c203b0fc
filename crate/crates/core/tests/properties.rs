use cpr::complete::{fit_als, fit_amn, CPModel, FactorMatrix, FitConfig, Regime};
use cpr::infer::PerformanceModel;
use cpr::metrics::evaluate_metrics;
use cpr::space::{build_grid, Grid, ParameterSpec, Value};
use cpr::tensor::{bin_observations, bin_observations_with, ObservationSet, SparseTensor};
use proptest::prelude::*;

fn log_spec() -> impl Strategy<Value = ParameterSpec> {
    (1.0f64..1e3, 1.5f64..1e3, 1usize..12)
        .prop_map(|(lo, ratio, cells)| ParameterSpec::log("x", lo, lo * ratio * (cells as f64), cells))
}

fn lin_spec() -> impl Strategy<Value = ParameterSpec> {
    (-1e3f64..1e3, 1e-3f64..1e3, 1usize..12).prop_map(|(lo, width, cells)| ParameterSpec::linear("x", lo, lo + width, cells))
}

fn small_grid() -> Grid {
    build_grid(vec![
        ParameterSpec::log("m", 1.0, 1024.0, 5),
        ParameterSpec::linear("n", 0.0, 10.0, 4),
        ParameterSpec::categorical("algo", ["a", "b", "c"]),
    ])
    .unwrap()
}

fn config() -> impl Strategy<Value = Vec<Value>> {
    (0.0f64..=1.0, 0.0f64..=10.0, 0usize..3).prop_map(|(u, n, c)| {
        vec![
            Value::Num(1024f64.powf(u).clamp(1.0, 1024.0)),
            Value::Num(n),
            Value::Cat(["a", "b", "c"][c].to_string()),
        ]
    })
}

fn observations() -> impl Strategy<Value = Vec<(Vec<Value>, f64)>> {
    prop::collection::vec((config(), 1e-6f64..1e3), 1..200)
}

fn obs_set(rows: &[(Vec<Value>, f64)]) -> ObservationSet {
    ObservationSet::new(rows.iter().map(|r| r.0.clone()).collect(), rows.iter().map(|r| r.1).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn midpoints_lie_in_their_cells(spec in prop_oneof![log_spec(), lin_spec()]) {
        let grid = build_grid(vec![spec]).unwrap();
        let (e, m) = (grid.edges(0).unwrap(), grid.midpoints(0).unwrap());
        prop_assert_eq!(e.len(), m.len() + 1);
        for i in 0..m.len() {
            prop_assert!(e[i] < e[i + 1]);
            prop_assert!(e[i] <= m[i] && m[i] <= e[i + 1]);
        }
    }

    #[test]
    fn cell_index_brackets_value(spec in prop_oneof![log_spec(), lin_spec()], u in 0.0f64..=1.0) {
        let grid = build_grid(vec![spec]).unwrap();
        let e = grid.edges(0).unwrap().to_vec();
        let x = (e[0] + u * (e[e.len() - 1] - e[0])).clamp(e[0], e[e.len() - 1]);
        let i = grid.cell_index(&[Value::Num(x)]).unwrap()[0];
        prop_assert!(e[i] <= x);
        prop_assert!(x < e[i + 1] || (i + 2 == e.len() && x == e[i + 1]));
    }

    #[test]
    fn binning_conserves_time(rows in observations()) {
        let grid = small_grid();
        let t = bin_observations(&obs_set(&rows), &grid).unwrap().tensor;
        let total: f64 = rows.iter().map(|r| r.1).sum();
        let binned: f64 = (0..t.nnz()).map(|k| t.value(k) * t.count(k) as f64).sum();
        prop_assert!((binned - total).abs() <= 1e-12 * total);
        let counted: u32 = (0..t.nnz()).map(|k| t.count(k)).sum();
        prop_assert_eq!(counted as usize, rows.len());
        prop_assert!(t.values().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn binning_ignores_row_order(rows in observations(), rot in 0usize..200, workers in 1usize..5) {
        let grid = small_grid();
        let a = bin_observations(&obs_set(&rows), &grid).unwrap().tensor;
        let mut shuffled = rows.clone();
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        let b = bin_observations_with(&obs_set(&shuffled), &grid, workers).unwrap().tensor;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mlogq_scale_independent(a in 1.0f64..1e6, ys in prop::collection::vec(1e-9f64..1e9, 1..30)) {
        let up: Vec<f64> = ys.iter().map(|y| y * a).collect();
        let down: Vec<f64> = ys.iter().map(|y| y / a).collect();
        let (u, d) = (evaluate_metrics(&up, &ys).unwrap(), evaluate_metrics(&down, &ys).unwrap());
        prop_assert!((u.mlogq - d.mlogq).abs() <= 1e-12 * u.mlogq.max(1e-300));
        prop_assert!((u.mlogq2 - d.mlogq2).abs() <= 1e-12 * u.mlogq2.max(1e-300));
    }

    #[test]
    fn mlogq_symmetric_under_swap(pairs in prop::collection::vec((1e-9f64..1e9, 1e-9f64..1e9), 1..30)) {
        let (m, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (a, b) = (evaluate_metrics(&m, &y).unwrap(), evaluate_metrics(&y, &m).unwrap());
        prop_assert!((a.mlogq - b.mlogq).abs() <= 1e-12 * a.mlogq.max(1e-300));
        prop_assert!((a.smape - b.smape).abs() <= 1e-12 * a.smape.max(1e-300));
    }

    #[test]
    fn small_error_expansion(eps in -1e-3f64..1e-3, ys in prop::collection::vec(1e-6f64..1e6, 1..20)) {
        prop_assume!(eps.abs() > 1e-9);
        let m: Vec<f64> = ys.iter().map(|y| y * (1.0 + eps)).collect();
        let r = evaluate_metrics(&m, &ys).unwrap();
        let q = (eps / (1.0 + eps)).abs();
        prop_assert!((r.mlogq - q).abs() <= eps.abs() * q);
        prop_assert!((r.mape - eps.abs()).abs() <= 1e-6 * eps.abs());
    }

    #[test]
    fn batch_prediction_matches_single(xs in prop::collection::vec(config(), 1..50), workers in 0usize..5) {
        let grid = small_grid();
        let factors = grid
            .dims()
            .iter()
            .enumerate()
            .map(|(j, &n)| FactorMatrix::from_vec(n, 2, (0..2 * n).map(|k| 0.2 + 0.1 * ((k + j) % 7) as f64).collect()).unwrap())
            .collect();
        let model = PerformanceModel::new(grid, CPModel::new(factors, Regime::LogRatioPositive).unwrap()).unwrap();
        let batch = model.predict_batch(&xs, workers);
        for (x, b) in xs.iter().zip(batch) {
            prop_assert_eq!(b.unwrap().time.to_bits(), model.predict(x).unwrap().to_bits());
        }
    }
}

fn random_tensor(seed: u64) -> SparseTensor {
    let dims = vec![5, 4, 3];
    let entries = (0..60)
        .filter(|k| !(k * 7 + seed as usize).is_multiple_of(3))
        .map(|k| (vec![k / 12, (k / 3) % 4, k % 3], 1.0 + ((k as u64 * 2654435761 + seed) % 97) as f64 / 10.0))
        .collect();
    SparseTensor::from_entries(dims, entries).unwrap()
}

#[test]
fn fits_are_deterministic_across_workers() {
    let t = random_tensor(3);
    for rank in [1, 3] {
        let base = FitConfig {
            rank,
            seed: 5,
            max_sweeps: 20,
            ..FitConfig::default()
        };
        let a = fit_als(&t, &base).unwrap();
        let b = fit_als(&t, &base).unwrap();
        let c = fit_als(&t, &FitConfig { workers: 4, ..base.clone() }).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.model, c.model);
        assert_eq!(a.history, c.history);
        let p = fit_amn(&t, &FitConfig { max_sweeps: 3, ..base.clone() }).unwrap();
        let q = fit_amn(&t, &FitConfig { max_sweeps: 3, workers: 3, ..base.clone() }).unwrap();
        assert_eq!(p.model, q.model);
    }
}

#[test]
fn density_matches_occupancy_count() {
    use rand::{Rng, SeedableRng};
    let grid = build_grid((0..3).map(|j| ParameterSpec::linear(format!("x{j}"), 0.0, 1.0, 32)).collect()).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let configs: Vec<Vec<Value>> = (0..1 << 14)
        .map(|_| (0..3).map(|_| Value::Num(rng.gen_range(0.0..1.0))).collect())
        .collect();
    let mut cells = std::collections::HashSet::new();
    for x in &configs {
        let idx: Vec<usize> = x
            .iter()
            .map(|v| match v {
                Value::Num(u) => (u * 32.0).floor() as usize,
                Value::Cat(_) => unreachable!(),
            })
            .collect();
        cells.insert(idx);
    }
    let obs = ObservationSet::new(configs, vec![1.0; 1 << 14]).unwrap();
    let t = bin_observations(&obs, &grid).unwrap().tensor;
    assert_eq!(t.nnz(), cells.len());
    let expect = 1.0 - (1.0 - 1.0 / 32768f64).powi(16384);
    assert!((t.density() - expect).abs() < 0.01, "{} vs {expect}", t.density());
    assert!((expect - 0.394).abs() < 1e-3);
}
