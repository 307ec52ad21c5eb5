use std::fs;
use std::process::{Command, Output};

fn driftgreen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftgreen"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn sweep_m_writes_report_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = driftgreen(&[
        "sweep-m", "--C", "1", "--n", "3", "--m", "100,1000,10000,100000", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("rows.csv")).unwrap();
    assert!(csv.starts_with("m,C,n,r,G,ln_m\n"));
    assert_eq!(csv.lines().count(), 5);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["kind"], "MSweep");
    assert!(report["fit"]["slope"].as_f64().unwrap() > 0.0);
    assert!(report["timestamp"].is_string());
    assert_eq!(report["config_echo"]["C"], 1.0);
}

#[test]
fn csv_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = driftgreen(&[
            "sweep-c", "--m", "1000", "--C", "0.5,1,1.5", "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(
        fs::read(a.path().join("rows.csv")).unwrap(),
        fs::read(b.path().join("rows.csv")).unwrap()
    );
}

#[test]
fn verify_exit_codes() {
    let spec = r#"{"family":"truncated_inverse","C":1,"m":10000}"#;
    assert_eq!(code(&driftgreen(&["verify", "--spec", spec, "--n", "3"])), 0);
    assert_eq!(
        code(&driftgreen(&["verify", "--spec", spec, "--n", "3", "--mis-scale", "2.0"])),
        4
    );
}

#[test]
fn verify_reads_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    fs::write(&path, r#"{"family":"power_regularized","C":1,"beta":0.3}"#).unwrap();
    let out = driftgreen(&["verify", "--spec", path.to_str().unwrap(), "--n", "4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&driftgreen(&["sweep-beta", "--C", "1"])), 2);
    assert_eq!(code(&driftgreen(&["sweep-m", "--C", "1", "--m", "10,100"])), 2);
    assert_eq!(code(&driftgreen(&["verify", "--spec", r#"{"family":"nope"}"#])), 2);
    assert_eq!(code(&driftgreen(&["fd-check", "--m", "5", "--C", "1", "--N", "17", "--rho", "0.05"])), 2);
    assert_eq!(code(&driftgreen(&["no-such-command"])), 2);
}

#[test]
fn divergent_spec_exits_3() {
    let spec = r#"{"family":"small_constant","epsilon":1.5}"#;
    assert_eq!(code(&driftgreen(&["verify", "--spec", spec])), 3);
}

#[test]
fn fd_check_exports_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = driftgreen(&[
        "fd-check", "--m", "5", "--C", "1", "--N", "17", "--rho", "0.25", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(matches!(code(&out), 0 | 4), "{}", String::from_utf8_lossy(&out.stderr));
    let solution = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert!(solution.starts_with("x,y,z,u\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    for key in ["N", "h", "rho", "m", "C", "iters", "residual", "symmetry_deviation"] {
        assert!(!summary[key].is_null(), "missing {key}");
    }
    assert!(dir.path().join("rows.csv").exists());
}

#[test]
fn blowup_and_bounds_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = driftgreen(&[
        "blowup", "--C", "1", "--m", "5,10", "--N", "17", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(dir.path().join("rows.csv")).unwrap();
    assert!(csv.starts_with("m,C,N,u0,comparator,peclet,iterations\n"));

    let dir = tempfile::tempdir().unwrap();
    let out = driftgreen(&["bounds", "--C", "1", "--m", "100,10000", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("rows.csv")).unwrap();
    assert!(csv.starts_with("m,C,n,r,G,r_pow_n2_times_G\n"));
}

#[test]
fn profile_export_is_decreasing_in_r() {
    let out = driftgreen(&["profile", "--spec", r#"{"family":"truncated_inverse","C":1,"m":100}"#, "--mesh", "32"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,G,Gprime"));
    let r: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(r[0], 1.0);
    assert!(r.windows(2).all(|w| w[0] > w[1]));
}
