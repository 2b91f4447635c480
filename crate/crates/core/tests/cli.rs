use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scatter-kalman"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_tiny(subcommand: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = config("tiny.toml");
    let mut args = vec![subcommand, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn forward_writes_fields_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_tiny("forward", dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["true_contrast.csv", "true_contrast.pgm", "far_field.csv", "total_field.csv", "manifest.toml"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let manifest = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"OK\""));
    // 8 directions times 16 observations plus header
    let far = fs::read_to_string(dir.path().join("far_field.csv")).unwrap();
    assert_eq!(far.lines().count(), 8 * 16 + 1);
}

#[test]
fn reconstruct_history_has_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_tiny("reconstruct", dir.path(), &["--set", "outer_iterations=2", "--workers", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mse = fs::read_to_string(dir.path().join("mse.csv")).unwrap();
    let rows = scatter_kalman::io::parse_mse_csv(&mse).unwrap();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert!(rows.iter().all(|r| r.1.is_finite()));
    assert!(dir.path().join("final_estimate.csv").is_file());
    let manifest = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("outer_iterations = 2"));
}

#[test]
fn invalid_config_value_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_tiny("forward", dir.path(), &["--set", "M=0"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error: kind=config"), "{err}");
    assert!(err.contains('M'), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_tiny("synth", dir.path(), &["--set", "wavelength=3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("wavelength"));
}

#[test]
fn missing_config_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["synth", "--config", "/nonexistent/x.toml", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: kind="));
}

#[test]
fn unwritable_output_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run_tiny("synth", &blocker.join("sub"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: kind=io"), "{}", stderr(&o));
}

#[test]
fn sweep_without_axis_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_tiny("sweep", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("axis"), "{}", stderr(&o));
}

#[test]
fn tiny_sweep_writes_one_summary_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_tiny(
        "sweep",
        dir.path(),
        &[
            "--set",
            "sweep.axis=\"sigma\"",
            "--set",
            "sweep.values=[0.0, 0.1]",
            "--set",
            "sweep.algorithms=[\"flm\", \"kfl_init\"]",
            "--set",
            "outer_iterations=1",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "sigma,algorithm,final_mse,min_mse,min_iteration,status");
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
    assert!(dir.path().join("sigma_0.1").join("kfl_init").join("mse.csv").is_file());
}

#[test]
fn equivalence_reports_small_deviations() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_tiny("equivalence", dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("equivalence.csv")).unwrap();
    let devs: Vec<f64> = table
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(!devs.is_empty());
    assert!(devs.iter().all(|&d| d <= 1e-10), "{devs:?}");
}

#[test]
fn bad_subcommand_is_rejected() {
    let o = run(&["invert", "--config", "x", "--out", "y"]);
    assert!(!o.status.success());
}
