use std::path::Path;
use std::process::{Command, Output};

fn cpr(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpr"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run cpr")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().parse().unwrap()))
        .unwrap_or_else(|| panic!("`{key}` missing from\n{report}"))
}

/// Two-parameter log space with a separable power-law dataset.
fn setup(dir: &Path) {
    std::fs::write(dir.join("space.txt"), "# two sizes\nm,log,32,512,4\nn,log,8,128,4\n").unwrap();
    let o = cpr(
        &[
            "synth", "--kernel", "separable-power", "--coeff", "1e-6", "--exponents", "1.5,-0.5",
            "--range", "m=32:512", "--range", "n=8:128", "--samples", "500", "--seed", "3", "--out", "data.csv",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn synth_gemm_hand_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = cpr(
        &["synth", "--kernel", "gemm-analytic", "--range", "m=64:64", "--range", "n=64:64", "--range", "k=64:64",
          "--samples", "1", "--out", "g.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    let t: f64 = text.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((t - (2.62144e-4 + 1.2288e-4 + 4.096e-5)).abs() < 1e-15, "{t}");
    assert!((t - 4.2599e-4).abs() < 1e-8, "{t}");
}

#[test]
fn synth_is_deterministic_and_positive() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let o = cpr(&["synth", "--kernel", "gemm-analytic", "--samples", "300", "--seed", "8", "--noise", "0.01", "--out", name], dir.path());
        assert!(o.status.success());
    }
    let (a, b) = (
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap(),
    );
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.lines().skip(1).all(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap() > 0.0));
}

#[test]
fn synth_rejects_bad_kernel_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = cpr(&["synth", "--kernel", "gemm-analytic", "--delta=-1", "--samples", "3", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("delta"));
}

#[test]
fn train_evaluate_predict_info() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    let o = cpr(
        &["train", "--space", "space.txt", "--data", "data.csv", "--rank", "2", "--loss", "ls-log", "--out", "m.model"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    assert!(value(&report, "density ") > 0.0);
    value(&report, "objective ");
    value(&report, "sweeps ");
    // cell means and edge bands keep a coarse 4x4 grid far from exact
    let q = value(&report, "train_mlogq ");
    assert!(q.is_finite() && q < 1.0, "{q}");

    let o = cpr(&["evaluate", "--model", "m.model", "--data", "data.csv", "--metrics", "mlogq,mape", "--per-point", "pp.csv"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 2);
    let pp = std::fs::read_to_string(d.join("pp.csv")).unwrap();
    assert_eq!(pp.lines().next().unwrap(), "m,n,time,predicted_time,log_ratio");
    assert_eq!(pp.lines().count(), 501);

    // midpoint rows reproduce exp(element); the out-of-domain row is NA
    std::fs::write(d.join("q.csv"), "n,m\n23,91\n23,5000\n").unwrap();
    let o = cpr(&["predict", "--model", "m.model", "--input", "q.csv", "--out", "p.csv"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let p = std::fs::read_to_string(d.join("p.csv")).unwrap();
    let lines: Vec<&str> = p.lines().collect();
    assert_eq!(lines[0], "n,m,predicted_time");
    assert!(lines[2].ends_with(",NA"));
    let predicted: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
    let file = cpr::model_file::ModelFile::load(d.join("m.model")).unwrap();
    let grid = file.model.grid();
    let idx = grid
        .cell_index(&[cpr::Value::Num(91.0), cpr::Value::Num(23.0)])
        .unwrap();
    assert_eq!(grid.midpoints(0).unwrap()[idx[0]], 91.0);
    assert_eq!(grid.midpoints(1).unwrap()[idx[1]], 23.0);
    assert_eq!(predicted, file.model.reconstruct_element(&idx).exp());

    let o = cpr(&["info", "--model", "m.model"], d);
    let info = stdout(&o);
    assert!(info.contains("dims 4x4"), "{info}");
    assert!(info.contains("rank 2") && info.contains("regime ls-log") && info.contains("reg 0.0001"));
    assert!(info.contains("density "));
}

#[test]
fn near_exact_fit_evaluates_below_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("space.txt"), "m,log,32,512,4\nn,log,8,128,4\n").unwrap();
    // one observation per midpoint; log t is a sum of two terms, so rank 2
    let mids_m = [46.0, 91.0, 182.0, 363.0];
    let mids_n = [12.0, 23.0, 46.0, 91.0];
    let mut csv = String::from("m,n,time\n");
    for m in mids_m {
        for n in mids_n {
            csv.push_str(&format!("{m},{n},{}\n", 1e-6 * m * n));
        }
    }
    std::fs::write(d.join("mid.csv"), csv).unwrap();
    let o = cpr(&["train", "--space", "space.txt", "--data", "mid.csv", "--rank", "2", "--loss", "ls-log", "--reg", "1e-9", "--out", "m.model"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(value(&stdout(&o), "train_mlogq ") < 1e-3);
    let o = cpr(&["evaluate", "--model", "m.model", "--data", "mid.csv", "--metrics", "mlogq"], d);
    assert!(value(&stdout(&o), "mlogq ") < 1e-3);
}

#[test]
fn extrapolation_needs_positive_regime() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    let o = cpr(
        &["train", "--space", "space.txt", "--data", "data.csv", "--rank", "1", "--loss", "ls-log", "--extrapolate", "m", "--out", "x.model"],
        d,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("extrapolation requires logq2"));

    let o = cpr(
        &["train", "--space", "space.txt", "--data", "data.csv", "--rank", "1", "--loss", "logq2", "--extrapolate", "m", "--out", "p.model"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    std::fs::write(d.join("q.csv"), "m,n\n2048,16\n").unwrap();
    let o = cpr(&["predict", "--model", "p.model", "--input", "q.csv", "--out", "p.csv"], d);
    assert!(o.status.success());
    let p = std::fs::read_to_string(d.join("p.csv")).unwrap();
    let t: f64 = p.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    let truth = 1e-6 * 2048f64.powf(1.5) / 16f64.sqrt();
    assert!((t / truth).ln().abs() < 0.3, "{t} vs {truth}");
}

#[test]
fn training_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    for out in ["a.model", "b.model"] {
        let o = cpr(&["train", "--space", "space.txt", "--data", "data.csv", "--rank", "2", "--loss", "logq2", "--seed", "4", "--out", out], d);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(d.join("a.model")).unwrap(), std::fs::read(d.join("b.model")).unwrap());
}

#[test]
fn input_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    std::fs::write(d.join("notime.csv"), "m,n\n64,16\n").unwrap();
    let o = cpr(&["train", "--space", "space.txt", "--data", "notime.csv", "--rank", "1", "--loss", "ls-log", "--out", "m.model"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("time"));

    let o = cpr(&["train", "--space", "space.txt", "--data", "data.csv", "--rank", "1", "--loss", "ls-log", "--out", "m.model"], d);
    assert!(o.status.success());
    std::fs::write(d.join("zero.csv"), "m,n,time\n64,16,0\n").unwrap();
    let o = cpr(&["evaluate", "--model", "m.model", "--data", "zero.csv"], d);
    assert_eq!(o.status.code(), Some(1));

    std::fs::write(d.join("nom.csv"), "n\n16\n").unwrap();
    let o = cpr(&["predict", "--model", "m.model", "--input", "nom.csv", "--out", "p.csv"], d);
    assert_eq!(o.status.code(), Some(1));

    std::fs::write(d.join("empty.csv"), "m,n\n").unwrap();
    let o = cpr(&["predict", "--model", "m.model", "--input", "empty.csv", "--out", "p.csv"], d);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(d.join("p.csv")).unwrap().trim(), "m,n,predicted_time");

    let o = cpr(&["train", "--space", "space.txt", "--data", "data.csv", "--rank", "1", "--loss", "l2", "--out", "m.model"], d);
    assert_eq!(o.status.code(), Some(1));

    let text = std::fs::read_to_string(d.join("m.model")).unwrap();
    std::fs::write(d.join("v.model"), text.replacen("cpr-model 1", "cpr-model 999", 1)).unwrap();
    let o = cpr(&["info", "--model", "v.model"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("999"));
}
