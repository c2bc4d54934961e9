use std::path::Path;
use std::process::{Command, Output};

use rcn_core::fixtures::shift_register;
use rcn_core::{Matrix, Realization};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rcn-realize"));
    cmd.env_remove("RCN_REALIZE_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn delay_pipeline_train_reduce_forecast() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let o = run(&[
        "gen-data",
        "time-delay",
        "--tau",
        "3",
        "--len",
        "600",
        "--seed",
        "4",
        "--out",
        d,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let series = dir.path().join("series.csv");
    assert!(std::fs::read_to_string(&series)
        .unwrap()
        .starts_with("k,u_0\n"));

    let o = run(&[
        "train",
        "--series",
        path(&series),
        "--nodes",
        "20",
        "--activation",
        "linear",
        "--leakage",
        "0.9",
        "--horizon",
        "3",
        "--train-len",
        "400",
        "--washout",
        "50",
        "--state-only",
        "--out",
        d,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("train_mse="));

    let model = dir.path().join("model.json");
    let o = run(&[
        "reduce",
        "--model",
        path(&model),
        "--tol",
        "1e-6",
        "--out",
        d,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let reduced =
        Realization::from_json(&std::fs::read_to_string(dir.path().join("reduced.json")).unwrap())
            .unwrap();
    assert!(reduced.dim < 20, "dim {}", reduced.dim);

    let o = run(&[
        "forecast",
        "--model",
        path(&dir.path().join("reduced.json")),
        "--series",
        path(&series),
        "--horizon",
        "3",
        "--washout",
        "400",
        "--out",
        d,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let last = out.lines().last().unwrap();
    let mse: f64 = last
        .strip_prefix("mse=")
        .expect("final line is mse=")
        .parse()
        .unwrap();
    assert!(mse < 1e-2, "{mse}");
    assert!(dir.path().join("predictions.csv").exists());
}

#[test]
fn reduce_leaves_irreducible_model_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let r = shift_register(4, 0.5);
    let model = dir.path().join("shift.json");
    std::fs::write(&model, r.to_json().unwrap()).unwrap();
    let o = run(&["reduce", "--model", path(&model), "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let back =
        Realization::from_json(&std::fs::read_to_string(dir.path().join("reduced.json")).unwrap())
            .unwrap();
    assert_eq!(back, r);
    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace.json")).unwrap())
            .unwrap();
    assert_eq!(trace["iterations"].as_array().unwrap().len(), 0);
}

#[test]
fn rossler_forecast_prints_mse_last() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let o = run(&["gen-data", "rossler", "--component", "0", "--out", d]);
    assert!(o.status.success(), "{}", stderr(&o));
    let series = dir.path().join("series.csv");
    let o = run(&[
        "train",
        "--series",
        path(&series),
        "--nodes",
        "40",
        "--horizon",
        "10",
        "--train-len",
        "5000",
        "--washout",
        "500",
        "--seed",
        "1",
        "--out",
        d,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&[
        "forecast",
        "--model",
        path(&dir.path().join("model.json")),
        "--series",
        path(&series),
        "--horizon",
        "10",
        "--washout",
        "5000",
        "--out",
        d,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mse: f64 = out
        .lines()
        .last()
        .unwrap()
        .strip_prefix("mse=")
        .unwrap()
        .parse()
        .unwrap();
    assert!(mse.is_finite() && mse < 1e-2, "{mse}");
}

#[test]
fn experiment_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("timedelay.json");
    std::fs::write(
        &cfg,
        r#"{"kind": "time_delay_sweep", "taus": [2, 4], "trials": 2, "train_len": 300, "washout": 50, "forecast_len": 100}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "experiment",
        "--config",
        path(&cfg),
        "--out",
        path(&out),
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["report.csv", "report.json", "nmin_vs_tau.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "tau,trial,seed,n0,n_min,train_mse,forecast_mse,retries"
    );
    assert_eq!(csv.lines().count(), 5);

    let again = dir.path().join("again");
    let o = bin()
        .args(["experiment", "--config", path(&cfg), "--out", path(&again)])
        .env("RCN_REALIZE_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(out.join("report.csv")).unwrap(),
        std::fs::read(again.join("report.csv")).unwrap()
    );
}

#[test]
fn malformed_config_exits_one_naming_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"kind": "time_delay_sweep", "taus": [3], "washout": 5000}"#,
    )
    .unwrap();
    let o = run(&[
        "experiment",
        "--config",
        path(&cfg),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("washout"), "{}", stderr(&o));

    std::fs::write(&cfg, r#"{"kind": "time_delay_sweep", "tau_max": 3}"#).unwrap();
    let o = run(&["experiment", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tau_max"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["experiment"]).status.code(), Some(1));
    assert_eq!(
        run(&["reduce", "--model", "/nonexistent/model.json"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["reduce", "--model", "x.json", "--tol", "3"])
            .status
            .code(),
        Some(1)
    );
    let o = bin()
        .args(["gen-data", "time-delay"])
        .env("RCN_REALIZE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(run(&["--help"]).status.success());
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let r = Realization::new(
        Matrix::identity(3, 3) * 0.5,
        Matrix::zeros(3, 1),
        Matrix::from_element(1, 3, 1.0),
    )
    .unwrap();
    let model = dir.path().join("dead.json");
    std::fs::write(&model, r.to_json().unwrap()).unwrap();
    let o = run(&["reduce", "--model", path(&model), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        rcn_core::ExperimentConfig::from_json(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 4);
}
