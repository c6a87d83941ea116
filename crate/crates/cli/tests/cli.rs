use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn gausson(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gausson")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    gausson(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// (Omega, multiplicity) for each grid rate, taken from the first row at that rate.
fn multiplicity_column(csv: &str) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let w: f64 = cols[0].parse().unwrap();
        let m: usize = cols[7].parse().unwrap();
        if out.last().is_none_or(|l| l.0 != w) {
            out.push((w, m));
        }
    }
    out
}

/// Multiplicity runs, collapsing consecutive equal counts. Rates with no
/// root do not appear in the file; a jump in Omega larger than one grid
/// step marks a zero run.
fn runs(col: &[(f64, usize)], step: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev: Option<f64> = None;
    for &(w, m) in col {
        if let Some(p) = prev {
            if w - p > 1.5 * step && out.last() != Some(&0) {
                out.push(0);
            }
        }
        if out.last() != Some(&m) {
            out.push(m);
        }
        prev = Some(w);
    }
    out
}

const FAST_SCAN: [&str; 4] = ["--n-omega", "201", "--n-grid", "150"];

fn scan(preset: &str) -> (TempDir, Output) {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["stationary-scan", "--preset", preset];
    args.extend(FAST_SCAN);
    let o = run_in(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    (dir, o)
}

#[test]
fn fig1_scan_has_gap() {
    let (dir, o) = scan("fig1");
    let col = multiplicity_column(&read(dir.path(), "branch_scan.csv"));
    assert_eq!(runs(&col, 0.01), [1, 0, 1]);
    let out = stdout(&o);
    assert!(out.contains("[0.0000000000, 0.8164965809] count 1"), "{out}");
    assert!(out.contains("[0.8164965809, 1.1547005384] count 0"), "{out}");
}

#[test]
fn fig2_scan_reaches_three_roots() {
    let (dir, o) = scan("fig2");
    let col = multiplicity_column(&read(dir.path(), "branch_scan.csv"));
    assert_eq!(col.len(), 201, "every rate has a root");
    assert_eq!(runs(&col, 0.01), [1, 2, 3, 1]);
    assert!(stdout(&o).contains("fold at Omega = 1.58323581"));
    assert_eq!(read(dir.path(), "summary.txt"), stdout(&o));
}

#[test]
fn fig3_scan_window_opens_below_omega2() {
    let (dir, o) = scan("fig3");
    let col = multiplicity_column(&read(dir.path(), "branch_scan.csv"));
    assert_eq!(runs(&col, 0.01), [1, 0, 2, 1]);
    let first_two = col.iter().find(|c| c.1 == 2).unwrap().0;
    assert!(first_two > 1.0 && first_two < (4.0f64 / 3.0).sqrt(), "{first_two}");
    assert!(stdout(&o).contains("fold at Omega = 1.02357397"));
}

#[test]
fn presets_encode_the_reference_trap_exactly() {
    for (preset, b) in [("fig1", 0.0), ("fig2", 1.0), ("fig3", -1.0)] {
        let dir = TempDir::new().unwrap();
        let o = run_in(dir.path(), &["evolve-ode", "--preset", preset, "--t-end", "0.1"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let cfg = read(dir.path(), "resolved_config.txt");
        let get = |k: &str| -> f64 {
            cfg.lines().find_map(|l| l.strip_prefix(&format!("{k}="))).unwrap().parse().unwrap()
        };
        assert_eq!(get("omega1"), (2.0f64 / 3.0).sqrt());
        assert_eq!(get("omega2"), (4.0f64 / 3.0).sqrt());
        assert_eq!(get("b"), b);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, _) = scan("fig3");
    let (b, _) = scan("fig3");
    assert_eq!(read(a.path(), "branch_scan.csv"), read(b.path(), "branch_scan.csv"));

    let ode = ["evolve-ode", "--preset", "fig2", "--omega", "0.4", "--a11", "1.2", "--b12", "0.1", "--xi1", "0.3"];
    let (c, d) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert!(run_in(c.path(), &ode).status.success());
    assert!(run_in(d.path(), &ode).status.success());
    assert_eq!(read(c.path(), "trajectory.csv"), read(d.path(), "trajectory.csv"));

    let stab = ["stability", "--preset", "fig1", "--n-omega", "41"];
    assert!(run_in(c.path(), &stab).status.success());
    assert!(run_in(d.path(), &stab).status.success());
    assert_eq!(read(c.path(), "spectra.csv"), read(d.path(), "spectra.csv"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# test run\npreset = fig2\nomega = 0.9\nt-end = 2\nsample_every=0.5\n").unwrap();
    let out = dir.path().join("out");
    let o = gausson(&[
        "evolve-ode",
        "--config",
        cfg.to_str().unwrap(),
        "--t-end",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved = read(&out, "resolved_config.txt");
    assert!(resolved.contains("\nt_end=1\n"), "{resolved}");
    assert!(resolved.contains("\nomega=0.9\n") && resolved.contains("\nb=1\n"), "{resolved}");
    let traj = read(&out, "trajectory.csv");
    assert_eq!(traj.lines().count(), 1 + 3);
}

#[test]
fn trajectory_columns() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["evolve-ode", "--preset", "fig2", "--omega", "0.9", "--from-stationary", "--t-end", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = read(dir.path(), "trajectory.csv");
    assert_eq!(
        traj.lines().next().unwrap(),
        "t,A11,A22,A12,B11,B22,B12,xi1,xi2,pi1,pi2,N,f,norm,energy,min_eig_A"
    );
    assert!(stdout(&o).contains("stationary root"));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = TempDir::new().unwrap();
    for args in [
        vec!["evolve-ode", "--omega1", "-1"],
        vec!["evolve-ode", "--dt", "abc"],
        vec!["evolve-ode", "--method", "euler"],
        vec!["evolve-ode", "--preset", "fig9"],
        vec!["evolve-ode", "--bogus", "1"],
        vec!["evolve-ode", "--preset", "fig1", "--omega", "1.0", "--from-stationary"],
        vec!["evolve-ode", "--preset", "fig2", "--omega", "0.9", "--from-stationary", "--root", "5"],
        vec!["evolve-pde", "--n", "100"],
        vec!["evolve-pde", "--frame", "spinning"],
        vec!["stationary-scan", "--omega-min", "1", "--omega-max", "0.5"],
        vec!["stationary-scan", "--omega1", "1", "--omega2", "1"],
        vec!["stability", "--scan", "/nonexistent/scan.csv"],
        vec!["evolve-ode", "--config", "/nonexistent/run.cfg"],
    ] {
        let o = run_in(dir.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "omega = 0.5\nwarp = 9\n").unwrap();
    let o = run_in(dir.path(), &["evolve-ode", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("warp"));
}

#[test]
fn solver_breakdown_exits_with_3_and_keeps_samples() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &["evolve-ode", "--preset", "fig1", "--omega", "1", "--a11", "0.9", "--a22", "1.1", "--t-end", "400", "--sample-every", "1"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("positive definiteness"));
    let rows = read(dir.path(), "trajectory.csv").lines().count();
    assert!(rows > 10);
}

#[test]
fn stability_reports_thresholds_and_rest_frequencies() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["stability", "--preset", "fig1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let w1 = (2.0f64 / 3.0).sqrt();
    let w2 = (4.0f64 / 3.0).sqrt();
    assert!(out.contains(&format!("{:+.12e}i", w1)), "{out}");
    assert!(out.contains(&format!("{:+.12e}i", -w2)), "{out}");
    assert!(out.contains(&format!("Omega = {w1:.9}")) && out.contains("(marginal -> unstable)"), "{out}");
    assert!(out.contains(&format!("Omega = {w2:.9}")) && out.contains("(unstable -> marginal)"), "{out}");
    let spectra = read(dir.path(), "spectra.csv");
    assert!(spectra.starts_with("Omega,branch_id,subsystem,re_lambda_1,im_lambda_1,"));
    assert_eq!(spectra.lines().count(), 1 + 201);
}

#[test]
fn stability_classifies_a_scan_file() {
    let (scan_dir, _) = scan("fig3");
    let scan_file = scan_dir.path().join("branch_scan.csv");
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["stability", "--preset", "fig3", "--n-omega", "11", "--scan", scan_file.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("shape-flow classification by branch"));
    let shape_rows = read(dir.path(), "spectra.csv").lines().filter(|l| l.contains(",shape,")).count();
    let scan_rows = read(scan_dir.path(), "branch_scan.csv").lines().count() - 1;
    assert_eq!(shape_rows, scan_rows);

    // a scan from a different trap is rejected
    let o = run_in(dir.path(), &["stability", "--preset", "fig2", "--scan", scan_file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn pde_run_writes_diagnostics_and_snapshots() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &[
            "evolve-pde", "--preset", "fig2", "--omega", "0.9", "--from-stationary", "--n", "64", "--half-width", "8",
            "--t-end", "0.2", "--sample-every", "0.1", "--snapshots",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let diag = read(dir.path(), "pde_diagnostics.csv");
    let mut lines = diag.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,norm,energy,cov_xx,cov_yy,cov_xy,fidelity_vs_gausson,floor_cells"
    );
    for line in lines {
        let fid: f64 = line.split(',').nth(6).unwrap().parse().unwrap();
        assert!(fid > 1.0 - 1e-8, "{line}");
    }
    for k in 0..3 {
        let snap = dir.path().join(format!("snapshot_{k:05}.bin"));
        assert_eq!(std::fs::metadata(&snap).unwrap().len(), 24 + 64 * 64 * 8);
    }
}

#[test]
fn dt_study_reports_second_order() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &[
            "evolve-pde", "--preset", "fig2", "--omega", "0.5", "--a11", "1.5", "--b12", "0.2", "--xi1", "0.3", "--n", "64",
            "--half-width", "8", "--dt-study", "--study-t-end", "0.2", "--study-dts", "2e-3,1e-3,5e-4",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let order: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("observed convergence order: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((order - 2.0).abs() < 0.2, "{order}");
    assert_eq!(read(dir.path(), "dt_study.csv").lines().count(), 4);
}
