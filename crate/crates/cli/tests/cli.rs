use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anneal-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn bound_curve_reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let o = run(&[
            "bound-curve",
            "--rho",
            "1:20",
            "--points",
            "7",
            "--out",
            &out_arg(dir.path()),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["bound_curve.csv", "bound_curve.svg"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let csv = fs::read_to_string(a.path().join("bound_curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("schedule,rho,coefficient,tau_star"));
    assert_eq!(lines.count(), 4 * 7);
    assert!(!csv.contains('\r'));
}

#[test]
fn single_point_curve_is_at_most_the_tuned_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "bound-curve",
        "--rho",
        "1:1",
        "--points",
        "1",
        "--schedules",
        "poly:2",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("bound_curve.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let coefficient: f64 = rows[0].split(',').nth(2).unwrap().parse().unwrap();
    // Tuned coefficient 2 sqrt(I(0) / H(0)) with H(0) = 1/3, I(0) = 3/2.
    assert!(coefficient <= 2.0 * 4.5f64.sqrt() * (1.0 + 1e-12));
}

#[test]
fn stamp_only_changes_the_svg() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&["bound-curve", "--points", "3", "--out", &out_arg(a.path())]);
    run(&[
        "--stamp",
        "bound-curve",
        "--points",
        "3",
        "--out",
        &out_arg(b.path()),
    ]);
    let csv = |d: &Path| fs::read(d.join("bound_curve.csv")).unwrap();
    assert_eq!(csv(a.path()), csv(b.path()));
    let svg = |d: &Path| fs::read_to_string(d.join("bound_curve.svg")).unwrap();
    assert!(!svg(a.path()).contains("generated at"));
    assert!(svg(b.path()).contains("generated at"));
}

#[test]
fn rho_below_one_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "bound-curve",
        "--rho",
        "0.5:3",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rho"));
    assert!(!dir.path().join("bound_curve.csv").exists());
}

#[test]
fn adversary_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "adversary",
        "--kind",
        "fixed",
        "--steps",
        "400",
        "--rho",
        "4",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("verdict: true"), "{stdout}");
    assert!(stdout.contains("lower bound 0.05"));
    let csv = fs::read_to_string(dir.path().join("adversary_fixed.csv")).unwrap();
    assert_eq!(csv.lines().count(), 401);

    let o = run(&[
        "adversary",
        "--kind",
        "invsqrt",
        "--steps",
        "10000",
        "--rho",
        "5",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("lower bound 0.045"));

    let o = run(&[
        "adversary",
        "--kind",
        "fixed",
        "--steps",
        "400",
        "--rho",
        "12",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(1, 10)"));
}

#[test]
fn lemma3_audit_reports_case_count() {
    let o = run(&["lemma3-audit", "--cases", "50", "--seed", "3"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("cases = 50, violations = 0"));
}

#[test]
fn sgd_run_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let o = run(&[
            "sgd-run",
            "--steps",
            "300",
            "--rho",
            "3",
            "--seed",
            "5",
            "--out",
            &out_arg(dir.path()),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["sgd_run.csv", "sgd_run.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap()
        );
    }
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let cfg = r#"{
        "version": 1,
        "problem": {"kind": "abs", "grad_scale": 1.0, "diameter": 1.0, "noise": "none", "steps": 200},
        "grid": {"decade_lo": -2, "decade_hi": 0},
        "seeds": [1],
        "levels": [1, 2, 3, 4]
    }"#;
    let path = dir.join("cfg.json");
    fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn grid_robustness_bundle_is_complete_and_thread_independent() {
    let work = tempfile::tempdir().unwrap();
    let cfg = small_config(work.path());
    let (a, b) = (work.path().join("a"), work.path().join("b"));
    let o1 = bin()
        .args([
            "grid-robustness",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
        ])
        .env("ANNEAL_LAB_THREADS", "1")
        .output()
        .unwrap();
    assert!(
        o1.status.success(),
        "{}",
        String::from_utf8_lossy(&o1.stderr)
    );
    let o2 = run(&[
        "--threads",
        "3",
        "grid-robustness",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(o2.status.success());
    for name in [
        "raw.csv",
        "aggregated.csv",
        "manifest.json",
        "degradation.svg",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let agg = fs::read_to_string(a.join("aggregated.csv")).unwrap();
    let rows: Vec<&str> = agg.lines().skip(1).collect();
    // Four levels for each of the five default variants.
    assert_eq!(rows.len(), 4 * 5);
    for v in [
        "cosine",
        "linear",
        "fixed",
        "fixed_uniform_avg",
        "fixed_poly_avg",
    ] {
        assert_eq!(
            rows.iter()
                .filter(|r| r.starts_with(&format!("{v},")))
                .count(),
            4
        );
    }
    let raw = fs::read_to_string(a.join("raw.csv")).unwrap();
    assert_eq!(raw.lines().next(), Some("schedule,lr,seed,loss"));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"version": 1, "problem": {"kind": "logreg", "n": 10, "dim": 2, "flip": 0.1, "seed": 0, "batch": 5, "epochs": 1},
            "grid": {"decade_lo": -1, "decade_hi": 0, "typo": 3}, "seeds": [1], "levels": [1]}"#,
    )
    .unwrap();
    let o = run(&[
        "grid-robustness",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`grid.typo`"), "{err}");
}

#[test]
fn checked_in_desk_config_matches_the_builtin_default() {
    let text = fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/desk.json"
    ))
    .unwrap();
    let cfg = anneal_lab::config::ExperimentConfig::parse(&text).unwrap();
    assert_eq!(cfg, anneal_lab::config::ExperimentConfig::desk());
}
