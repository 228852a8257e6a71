//! End-to-end CLI behaviour: exit codes, artifacts, determinism.

use std::path::Path;
use std::process::{Command, Output};

fn sddpde(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sddpde"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

#[test]
fn list_presets_is_stable_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let out = sddpde(&["list-presets"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text
        .lines()
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    // Golden list: preset names are a stable public surface.
    assert_eq!(
        names,
        vec![
            "zero",
            "decay",
            "linear-dde-oracle",
            "threshold-solve",
            "manifold-project",
            "variational-check",
            "holder-cusp",
            "certify",
        ]
    );

    let again = sddpde(&["list-presets"], dir.path());
    assert_eq!(again.stdout, text.as_bytes());
}

#[test]
fn unknown_preset_exits_one_with_hint() {
    let dir = tempfile::tempdir().unwrap();
    let out = sddpde(&["preset", "certfy"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("certify"), "hint missing: {err}");
}

#[test]
fn zero_preset_writes_zero_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = sddpde(&["preset", "zero", "--out", "artifacts"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let csv = std::fs::read_to_string(dir.path().join("artifacts/trajectory.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let c1: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(c1, 0.0);
    }
    assert!(dir.path().join("artifacts/window_log.jsonl").exists());
    assert!(dir.path().join("artifacts/report.json").exists());
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "run.kind = dance\n").unwrap();
    let out = sddpde(&["run", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(dir.path().join("unknown.cfg"), "run.kindd = solve\n").unwrap();
    let out = sddpde(&["run", "unknown.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("run.kindd"), "{err}");

    let out = sddpde(&["run", "missing.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unreachable_threshold_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad-delay.cfg"),
        "model.delay.kind = threshold\nmodel.delay.c3 = 0.1\nmodel.h = 1.0\n",
    )
    .unwrap();
    let out = sddpde(&["run", "bad-delay.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("1/C₃"), "diagnostic should name the bound: {err}");
}

#[test]
fn identical_config_and_seed_give_bit_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "\
model.spectrum.n_modes = 4
initial.kind = bump
run.kind = solve
run.t_final = 0.4
run.seed = 7
";
    std::fs::write(dir.path().join("exp.cfg"), cfg).unwrap();
    let a = sddpde(&["run", "exp.cfg", "--out", "a"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{a:?}");
    let b = sddpde(&["run", "exp.cfg", "--out", "b"], dir.path());
    assert_eq!(b.status.code(), Some(0));
    let csv_a = std::fs::read(dir.path().join("a/trajectory.csv")).unwrap();
    let csv_b = std::fs::read(dir.path().join("b/trajectory.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn env_overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.cfg"),
        "model.spectrum.n_modes = 4\ninitial.kind = zero\nrun.kind = solve\nrun.t_final = 0.2\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sddpde"))
        .args(["run", "exp.cfg", "--out", "o"])
        .env("SDDPDE_RUN_T_FINAL", "0.1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["t_final"].as_f64().unwrap(), 0.1);

    let out = Command::new(env!("CARGO_BIN_EXE_sddpde"))
        .args(["run", "exp.cfg", "--out", "o2"])
        .env("SDDPDE_NOT_A_KEY", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn manifold_preset_reports_membership() {
    let dir = tempfile::tempdir().unwrap();
    let out = sddpde(&["preset", "manifold-project", "--out", "m"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("m/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["projected"]["member"], serde_json::Value::Bool(true));
    assert!(dir.path().join("m/projected_segment.csv").exists());
}

#[test]
fn decay_preset_matches_the_semigroup() {
    let dir = tempfile::tempdir().unwrap();
    let out = sddpde(&["preset", "decay", "--out", "d"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let csv = std::fs::read_to_string(dir.path().join("d/trajectory.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let mut cols = line.split(',');
        let t: f64 = cols.next().unwrap().parse().unwrap();
        let _r = cols.next().unwrap();
        let c1: f64 = cols.next().unwrap().parse().unwrap();
        assert!((c1 - (-t).exp()).abs() < 1e-10, "t={t}: {c1}");
    }
}

#[test]
fn variational_preset_passes_the_derivative_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = sddpde(&["preset", "variational-check", "--out", "v"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("v/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["check"]["pass"], serde_json::Value::Bool(true));
}

#[test]
fn linear_oracle_preset_agrees_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = sddpde(&["preset", "linear-dde-oracle", "--out", "lin"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("lin/report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["oracle_pass"], serde_json::Value::Bool(true));
    assert!(report["oracle_divergence"].as_f64().unwrap() <= 1e-5);
    assert!(dir.path().join("lin/trajectory.csv").exists());
}

#[test]
fn failed_check_exits_two_with_diagnostic_report() {
    // The flipped variational sign is not the semiflow derivative; the run
    // must complete, report the failure, and exit 2.
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("flip.cfg"),
        "\
model.spectrum.n_modes = 2
model.nonlinearity.kernel = gaussian
model.nonlinearity.kernel_amplitude = 0.3
model.nonlinearity.kernel_width = 0.6
model.nonlinearity.b = tanh
model.delay.kind = constant
model.delay.r_const = 0.5
model.h = 1.0
initial.kind = bump
initial.amplitude = 0.3
run.kind = variational
variational.a_sign = positive
variational.t_eval = 0.3
",
    )
    .unwrap();
    let out = sddpde(&["run", "flip.cfg", "--out", "f"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("f/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(false));
}
