use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ident(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ident"))
        .args(args)
        .output()
        .expect("spawn ident")
}

fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/burgers_clean.csv")
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bundled_sample_recovers_burgers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = ident(&[
        "identify",
        "--pipeline",
        "weak_ident",
        "--data",
        sample().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("u_t ="), "{}", stdout(&o));
    let r = report(&out);
    let coeffs = r["chosen"]["coefficients"].as_array().unwrap();
    assert_eq!(coeffs.len(), 1);
    assert_eq!(coeffs[0][0], "u*u_x");
    let c = coeffs[0][1].as_f64().unwrap();
    assert!((c + 1.0).abs() < 0.03, "coefficient {c}");
    for f in ["candidates.csv", "rr_curve.csv", "coefficients.csv", "field.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }

    let e = ident(&[
        "evaluate",
        "--report",
        out.join("report.json").to_str().unwrap(),
        "--pde",
        "burgers",
    ]);
    assert_eq!(e.status.code(), Some(0), "{}", stderr(&e));
    let v: serde_json::Value = serde_json::from_str(&stdout(&e)).unwrap();
    assert_eq!(v["support"]["jaccard"], 1.0);
}

#[test]
fn missing_data_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no-such-field.csv");
    let o = ident(&[
        "identify",
        "--data",
        missing.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no-such-field.csv"), "{}", stderr(&o));
}

#[test]
fn unknown_pipeline_is_rejected() {
    let o = ident(&["identify", "--pipeline", "nope", "--data", sample().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope"));
}

fn noisy_config(dir: &Path) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(
        &p,
        r#"{"seed": 1, "simulate": {"pde": "burgers", "nx": 101, "nt": 51},
            "noise": {"kind": "percent_of_rms", "level": 0.02}}"#,
    )
    .unwrap();
    p
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = noisy_config(dir.path());
    let outs: Vec<PathBuf> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for out in &outs {
        let o = ident(&[
            "identify",
            "--config",
            cfg.to_str().unwrap(),
            "--pipeline",
            "ident",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
    }
    for f in [
        "report.json",
        "candidates.csv",
        "rr_curve.csv",
        "coefficients.csv",
        "field.csv",
    ] {
        let a = fs::read(outs[0].join(f)).unwrap();
        let b = fs::read(outs[1].join(f)).unwrap();
        assert!(a == b, "{f} differs between identical runs");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = noisy_config(dir.path());
    let field = |seed: Option<&str>, name: &str| {
        let out = dir.path().join(name);
        let mut args = vec![
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        let o = ident(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read_to_string(out).unwrap()
    };
    let from_config = field(None, "c.csv");
    assert_eq!(field(Some("1"), "one.csv"), from_config);
    assert_ne!(field(Some("7"), "seven.csv"), from_config);
}

#[test]
fn assemble_fd_writes_labelled_system() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("system.csv");
    let o = ident(&[
        "assemble",
        "--data",
        sample().to_str().unwrap(),
        "--form",
        "fd",
        "--dict-alpha",
        "2",
        "--dict-beta",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("x,t,"), "{header}");
    assert!(header.ends_with(",rhs"), "{header}");
    assert!(header.split(',').any(|c| c == "u*u_x"), "{header}");
    let width = header.split(',').count();
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == width));
}

#[test]
fn malformed_field_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    let text = fs::read_to_string(sample()).unwrap();
    let mut lines: Vec<&str> = text.lines().take(4).collect();
    lines.push("1.0,oops");
    fs::write(&bad, lines.join("\n")).unwrap();
    let o = ident(&[
        "identify",
        "--data",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.csv"), "{}", stderr(&o));
}
