use std::path::{Path, PathBuf};
use std::process::Command;

const DESK: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk_scale.cfg");

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eddy-pint"))
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    binary()
        .arg("run")
        .arg(config)
        .arg("--output")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

/// Desk config with `edits` appended to the named sections.
fn variant(dir: &Path, name: &str, edits: &[(&str, &str)]) -> PathBuf {
    let mut text = std::fs::read_to_string(DESK).unwrap();
    for (section, line) in edits {
        let key = line.split('=').next().unwrap().trim();
        let header = format!("[{section}]\n");
        let start = text.find(&header).unwrap() + header.len();
        let end = text[start..].find("\n[").map_or(text.len(), |e| start + e + 1);
        let body: String = text[start..end]
            .lines()
            .filter(|l| l.split('=').next().unwrap().trim() != key)
            .map(|l| format!("{l}\n"))
            .collect();
        text = format!("{}{line}\n{body}{}", &text[..start], &text[end..]);
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn series(path: &Path) -> Vec<(f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,value"));
    lines
        .map(|l| {
            let (t, v) = l.split_once(',').unwrap();
            (t.parse().unwrap(), v.parse().unwrap())
        })
        .collect()
}

fn at_boundaries(s: &[(f64, f64)], boundaries: &[f64]) -> Vec<f64> {
    boundaries
        .iter()
        .map(|b| {
            s.iter()
                .find(|(t, _)| (t - b).abs() < 1e-12)
                .expect("boundary sample")
                .1
        })
        .collect()
}

#[test]
fn desk_config_writes_declared_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("desk");
    let res = run(Path::new(DESK), &out, &["--dump-matrices"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for f in [
        "effective_config.toml",
        "observable.csv",
        "jumps.csv",
        "trajectory.csv",
        "report.txt",
        "M_sigma.mtx",
        "K_nu.mtx",
        "X_s.mtx",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    for key in [
        "iterations = ",
        "speedup_theoretical = ",
        "stability_bound = ",
        "time_fine_s",
        "time_coarse_s",
        "observable = flux_linkage",
    ] {
        assert!(report.contains(key), "{key} missing from report");
    }
    assert_eq!(series(&out.join("observable.csv")).len(), 11);
    let jumps = std::fs::read_to_string(out.join("jumps.csv")).unwrap();
    assert!(jumps.starts_with("iteration,window,jump_norm\n"));
}

#[test]
fn unstable_fine_step_is_refused_before_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = variant(tmp.path(), "unstable.cfg", &[("time", "h_fine = 1.0e-4")]);
    let out = tmp.path().join("out");
    let res = run(&cfg, &out, &[]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("stability"));
    assert!(!out.join("observable.csv").exists());

    let cfg = variant(
        tmp.path(),
        "unstable_seq.cfg",
        &[("time", "h_fine = 1.0e-4"), ("solver", "kind = \"seq-explicit\"")],
    );
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(3));
    assert!(!out.join("observable.csv").exists());

    // Implicit Euler has no step restriction.
    let cfg = variant(
        tmp.path(),
        "implicit.cfg",
        &[("time", "h_fine = 1.0e-4"), ("solver", "kind = \"seq-implicit\"")],
    );
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(0));
}

#[test]
fn parareal_matches_sequential_solvers() {
    let tmp = tempfile::tempdir().unwrap();
    let par = tmp.path().join("par");
    assert_eq!(run(Path::new(DESK), &par, &[]).status.code(), Some(0));
    let par = series(&par.join("observable.csv"));
    let boundaries: Vec<f64> = par.iter().map(|(t, _)| *t).collect();
    let par: Vec<f64> = par.iter().map(|(_, v)| *v).collect();

    let cfg = variant(tmp.path(), "exp.cfg", &[("solver", "kind = \"seq-explicit\"")]);
    let exp = tmp.path().join("exp");
    assert_eq!(run(&cfg, &exp, &[]).status.code(), Some(0));
    let exp_series = series(&exp.join("observable.csv"));
    assert!(exp_series.len() > boundaries.len());
    let exp = at_boundaries(&exp_series, &boundaries);

    let cfg = variant(tmp.path(), "imp.cfg", &[("solver", "kind = \"seq-implicit\"")]);
    let imp = tmp.path().join("imp");
    assert_eq!(run(&cfg, &imp, &[]).status.code(), Some(0));
    let imp = at_boundaries(&series(&imp.join("observable.csv")), &boundaries);

    let scale = exp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for n in 0..boundaries.len() {
        // Same discretization: agreement at the Parareal tolerance.
        assert!(
            (par[n] - exp[n]).abs() <= 1e-4 * scale,
            "window {n}: {} vs {}",
            par[n],
            exp[n]
        );
        // Implicit vs explicit Euler: first-order discretization gap, largest
        // right after PWM switching edges.
        assert!(
            (par[n] - imp[n]).abs() <= 5e-2 * scale,
            "window {n}: {} vs {}",
            par[n],
            imp[n]
        );
    }
}

#[test]
fn effective_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    assert_eq!(run(Path::new(DESK), &first, &["--workers", "2"]).status.code(), Some(0));
    let second = tmp.path().join("second");
    assert_eq!(
        run(&first.join("effective_config.toml"), &second, &[]).status.code(),
        Some(0)
    );
    for f in ["observable.csv", "jumps.csv", "trajectory.csv"] {
        assert_eq!(
            std::fs::read(first.join(f)).unwrap(),
            std::fs::read(second.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn non_convergence_exits_with_code_4_and_keeps_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = variant(tmp.path(), "short.cfg", &[("solver", "max_iter = 1")]);
    let out = tmp.path().join("out");
    let res = run(&cfg, &out, &[]);
    assert_eq!(res.status.code(), Some(4));
    assert!(out.join("observable.csv").is_file());
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("converged = false"));
}

#[test]
fn malformed_config_exits_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "[solver]\nwindows = \"ten\"\n").unwrap();
    assert_eq!(run(&cfg, &tmp.path().join("out"), &[]).status.code(), Some(2));
    assert_eq!(
        run(&tmp.path().join("missing.cfg"), &tmp.path().join("out"), &[])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn excitation_subcommand_samples_the_signal() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("pwm.csv");
    let res = binary()
        .args(["excitation", DESK, "--samples", "801", "--output"])
        .arg(&file)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(0));
    let text = std::fs::read_to_string(&file).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,i"));
    let values: Vec<f64> = lines.map(|l| l.split_once(',').unwrap().1.parse().unwrap()).collect();
    assert_eq!(values.len(), 801);
    assert!(values.iter().all(|v| v.abs() == 1.0));

    let res = binary()
        .args(["excitation", DESK, "--level", "coarse", "--samples", "9"])
        .output()
        .unwrap();
    let text = String::from_utf8(res.stdout).unwrap();
    let values: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
        .collect();
    // 0.8·sin(2π·50·t) at t = 0, 0.005, ..., 0.04.
    assert_eq!(values.len(), 9);
    for (v, want) in values.iter().zip([0.0, 0.8, 0.0, -0.8, 0.0, 0.8, 0.0, -0.8, 0.0]) {
        assert!((v - want).abs() < 1e-12);
    }
}
