use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use gausson::export::{
    fmt_f64, read_branch_scan_csv, write_branch_scan_csv, write_dt_study_csv, write_pde_diagnostics_csv,
    write_spectra_csv, write_trajectory_csv,
};
use gausson::model::{GaussonState, Stability, SymMatrix, TrapConfig};
use gausson::nalgebra::Vector3;
use gausson::ode::{integrate_partial, Method, OdeSettings};
use gausson::pde::{
    dt_study, gausson_reference, write_snapshot, Field2D, Frame, Grid2D, LogNls, PdeSettings, SplitStepSolver,
};
use gausson::stability::{classify, classify_scan, com_spectrum_with_tol, com_thresholds, SpectrumReport};
use gausson::stationary::{find_all_roots, residual, trace_branches, ContinuationSettings};

use crate::params::Params;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn trap(p: &Params) -> Result<TrapConfig> {
    Ok(TrapConfig::planar(p.f64("omega1")?, p.f64("omega2")?, p.f64("omega")?, p.f64("b")?)?)
}

/// Creates the output directory and echoes the resolved parameters into it.
fn prepare_out(p: &Params) -> Result<PathBuf> {
    let dir = PathBuf::from(p.raw("out").unwrap_or("gausson_out"));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::config(format!("parameter `out`: cannot create {}: {e}", dir.display())))?;
    write_text(&dir.join("resolved_config.txt"), &p.render())?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

fn continuation_settings(p: &Params) -> Result<ContinuationSettings> {
    let s = ContinuationSettings {
        omega_min: p.f64("omega_min")?,
        omega_max: p.f64("omega_max")?,
        n_omega: p.usize("n_omega")?,
        n_grid: p.usize("n_grid")?,
        newton_tol: p.f64("newton_tol")?,
        newton_max_iter: p.usize("newton_max_iter")?,
        dedupe_radius: p.f64("dedupe_radius")?,
        arc_step: p.f64("arc_step")?,
        alpha_max: p.opt_f64("alpha_max")?,
    };
    s.validate()?;
    Ok(s)
}

fn format_eigenvalue(l: &gausson::num_complex::Complex64) -> String {
    format!("{:+.12e} {:+.12e}i", l.re, l.im)
}

/// Contiguous runs of equal classification along a branch.
fn classification_runs(points: &[(f64, Option<Stability>)]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < points.len() {
        let mut j = i;
        while j + 1 < points.len() && points[j + 1].1 == points[i].1 {
            j += 1;
        }
        let label = points[i].1.map_or_else(|| "unclassified".to_string(), |s| s.to_string());
        let _ = write!(out, " {label} on [{:.6}, {:.6}] ({} points);", points[i].0, points[j].0, j - i + 1);
        i = j + 1;
    }
    out
}

pub fn stationary_scan(p: &Params) -> Result<()> {
    let config = trap(p)?.with_rotation(0.0)?;
    let settings = continuation_settings(p)?;
    let stab_tol = p.f64("stab_tol")?;
    let dir = prepare_out(p)?;

    let mut scan = trace_branches(&config, &settings)?;
    classify_scan(&mut scan, stab_tol)?;
    write_branch_scan_csv(create(&dir.join("branch_scan.csv"))?, &scan)?;

    let mut summary = scan.summary();
    let _ = writeln!(summary, "shape-flow classification by branch:");
    for b in &scan.branches {
        let pts: Vec<(f64, Option<Stability>)> = scan.branch_points(b.id).map(|q| (q.omega, q.stability)).collect();
        let _ = writeln!(summary, "  branch {}:{}", b.id, classification_runs(&pts));
    }
    write_text(&dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn initial_state(p: &Params, config: &TrapConfig) -> Result<GaussonState> {
    let center = Vector3::new(p.f64("xi1")?, p.f64("xi2")?, 0.0);
    let momentum = Vector3::new(p.f64("pi1")?, p.f64("pi2")?, 0.0);
    let base = if p.bool("from_stationary")? {
        let roots = find_all_roots(config, &ContinuationSettings::default())?;
        if roots.is_empty() {
            return Err(CliError::config(format!(
                "parameter `omega`: no stationary Gausson exists at omega = {}",
                config.rotation()
            )));
        }
        let pick = match p.raw("root") {
            None | Some("auto") => (0..roots.len())
                .max_by(|&i, &j| (roots[i].alpha1 * roots[i].alpha2).total_cmp(&(roots[j].alpha1 * roots[j].alpha2)))
                .expect("non-empty"),
            Some(_) => {
                let k = p.usize("root")?;
                if k >= roots.len() {
                    return Err(CliError::config(format!(
                        "parameter `root`: index {k} out of range, {} roots at this rotation rate",
                        roots.len()
                    )));
                }
                k
            }
        };
        let r = roots[pick];
        println!(
            "initial state: stationary root {pick} of {}: alpha1 = {}, alpha2 = {}, beta = {}",
            roots.len(),
            fmt_f64(r.alpha1),
            fmt_f64(r.alpha2),
            fmt_f64(r.beta)
        );
        r.to_state()?
    } else {
        let auto = |key: &str, fallback: f64| -> Result<f64> {
            match p.raw(key) {
                None | Some("auto") => Ok(fallback),
                Some(_) => p.f64(key),
            }
        };
        let a = SymMatrix::planar(auto("a11", config.omega1())?, auto("a22", config.omega2())?, p.f64("a12")?);
        let b = SymMatrix::planar(p.f64("b11")?, p.f64("b22")?, p.f64("b12")?);
        GaussonState::centered(a, b)?
    };
    Ok(base
        .with_center(center, momentum)?
        .with_amplitude(p.f64("amplitude")?)?
        .with_phase(p.f64("phase")?)?)
}

pub fn evolve_ode(p: &Params) -> Result<()> {
    let config = trap(p)?;
    let method = match p.raw("method") {
        Some("rk45") => Method::Rk45Adaptive,
        Some("rk4") => Method::Rk4Fixed,
        other => return Err(CliError::config(format!("parameter `method`: expected rk45 or rk4, got {other:?}"))),
    };
    let settings = OdeSettings {
        method,
        dt: p.f64("dt")?,
        rel_tol: p.f64("rel_tol")?,
        abs_tol: p.f64("abs_tol")?,
        t_end: p.f64("t_end")?,
        sample_every: p.f64("sample_every")?,
        ..OdeSettings::default()
    };
    settings.validate()?;
    let init = initial_state(p, &config)?;
    let dir = prepare_out(p)?;

    let (traj, failure) = integrate_partial(&init, &config, &settings)?;
    write_trajectory_csv(create(&dir.join("trajectory.csv"))?, &traj)?;

    let last = traj.last().expect("trajectory starts with the initial state");
    let shape_dev = |s: &GaussonState| {
        s.a().packed().iter().zip(init.a().packed()).chain(s.b().packed().iter().zip(init.b().packed()))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let max_dev = traj.samples.iter().map(shape_dev).fold(0.0, f64::max);
    let d0 = traj.diagnostics[0];
    let d1 = *traj.diagnostics.last().expect("non-empty");
    println!("samples: {}", traj.len());
    println!("final time: {}", fmt_f64(last.t()));
    println!("max |(A, B) - (A0, B0)|: {}", fmt_f64(max_dev));
    println!("norm drift: {}", fmt_f64(d1.norm - d0.norm));
    println!("energy drift: {}", fmt_f64(d1.energy - d0.energy));
    if let Some(rate) = traj.width_growth_rate() {
        println!("width growth rate: {}", fmt_f64(rate));
    }
    match failure {
        None => Ok(()),
        Some(e) => Err(CliError::solver(e.to_string())),
    }
}

fn pde_settings(p: &Params) -> Result<PdeSettings> {
    let frame = match p.raw("frame") {
        Some("lab") => Frame::Lab,
        Some("rotating") => Frame::Rotating,
        other => return Err(CliError::config(format!("parameter `frame`: expected lab or rotating, got {other:?}"))),
    };
    let s = PdeSettings {
        dt: p.f64("dt")?,
        t_end: p.f64("t_end")?,
        log_epsilon: p.f64("log_epsilon")?,
        frame,
        sample_every: p.f64("sample_every")?,
    };
    s.validate()?;
    Ok(s)
}

pub fn evolve_pde(p: &Params) -> Result<()> {
    let config = trap(p)?;
    let grid = Grid2D::new(p.usize("n")?, p.f64("half_width")?)?;
    let settings = pde_settings(p)?;
    let init = initial_state(p, &config)?;
    let field = Field2D::from_state(grid, &init)?;
    let dir = prepare_out(p)?;
    println!("boundary amplitude of the initial field: {}", fmt_f64(field.boundary_max()));

    if p.bool("dt_study")? {
        let base = PdeSettings { t_end: p.f64("study_t_end")?, ..settings };
        let dts = p.f64_list("study_dts")?;
        for &dt in &dts {
            PdeSettings { dt, ..base }.validate()?;
        }
        let study = dt_study(&field, LogNls::from_config(&config)?, base, &dts)?;
        write_dt_study_csv(create(&dir.join("dt_study.csv"))?, &study)?;
        for (dt, err) in study.dts.iter().zip(&study.errors) {
            println!("dt = {dt:e}: error {err:.6e}");
        }
        println!("observed convergence order: {:.4}", study.observed_order);
        return Ok(());
    }

    let snapshots = p.bool("snapshots")?;
    let mut solver = SplitStepSolver::from_config(grid, &config, settings)?;
    let mut reference = gausson_reference(config, init, settings.frame);
    let mut index = 0usize;
    let evolution = solver.evolve_with(&field, Some(&mut reference), |f, _| {
        if snapshots {
            write_snapshot(&dir.join(format!("snapshot_{index:05}.bin")), f)?;
        }
        index += 1;
        Ok(())
    })?;
    write_pde_diagnostics_csv(create(&dir.join("pde_diagnostics.csv"))?, &evolution.diagnostics)?;

    let d = &evolution.diagnostics;
    let (d0, d1) = (d[0], d[d.len() - 1]);
    let min_fid = d.iter().filter_map(|x| x.fidelity_vs_gausson).fold(f64::INFINITY, f64::min);
    println!("samples: {}", d.len());
    println!("final time: {}", fmt_f64(d1.t));
    println!("norm drift: {}", fmt_f64(d1.norm - d0.norm));
    println!("energy drift: {}", fmt_f64(d1.energy - d0.energy));
    println!("min fidelity vs Gausson: {}", fmt_f64(min_fid));
    Ok(())
}

pub fn stability(p: &Params) -> Result<()> {
    let config = trap(p)?;
    let stab_tol = p.f64("stab_tol")?;
    let (lo, hi, n) = (p.f64("omega_min")?, p.f64("omega_max")?, p.usize("n_omega")?);
    if !(lo >= 0.0 && hi > lo && n >= 2) {
        return Err(CliError::config("parameters `omega_min`, `omega_max`, `n_omega`: need 0 <= min < max and n >= 2"));
    }
    let dir = prepare_out(p)?;
    let mut summary = String::new();

    let here = com_spectrum_with_tol(&config, stab_tol)?;
    let _ = writeln!(summary, "center-of-mass spectrum at Omega = {} ({}):", config.rotation(), here.classification);
    for l in &here.eigenvalues {
        let _ = writeln!(summary, "  {}", format_eigenvalue(l));
    }

    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let com: Vec<(f64, SpectrumReport)> = grid
        .iter()
        .map(|&w| Ok((w, com_spectrum_with_tol(&config.with_rotation(w)?, stab_tol)?)))
        .collect::<Result<_>>()?;
    let thresholds = com_thresholds(&config, lo, hi, n, p.f64("threshold_tol")?)?;
    let _ = writeln!(summary, "center-of-mass classification changes at:");
    for w in &thresholds {
        let below = com_spectrum_with_tol(&config.with_rotation((w - 1e-6).max(0.0))?, stab_tol)?.classification;
        let above = com_spectrum_with_tol(&config.with_rotation(w + 1e-6)?, stab_tol)?.classification;
        let _ = writeln!(summary, "  Omega = {w:.12} ({below} -> {above})");
    }

    let mut shape: Vec<(f64, Option<usize>, SpectrumReport)> = Vec::new();
    if let Some(path) = p.raw("scan") {
        let file = File::open(path).map_err(|e| CliError::config(format!("parameter `scan`: cannot open {path}: {e}")))?;
        let rows = read_branch_scan_csv(file)?;
        for row in rows {
            let mut point = row.point;
            let at = config.with_rotation(point.omega)?;
            let r = residual(point.coords(), &at);
            if r.iter().any(|v| v.abs() > 1e-8) {
                return Err(CliError::config(format!(
                    "parameter `scan`: point at Omega = {} is not stationary for this trap (residual {:?})",
                    point.omega, r
                )));
            }
            let rep = classify(&mut point, &config, stab_tol)?;
            shape.push((point.omega, point.branch_id, rep));
        }
        let _ = writeln!(summary, "shape-flow classification by branch:");
        let mut ids: Vec<Option<usize>> = shape.iter().map(|s| s.1).collect();
        ids.sort();
        ids.dedup();
        for id in ids {
            let pts: Vec<(f64, Option<Stability>)> =
                shape.iter().filter(|s| s.1 == id).map(|s| (s.0, Some(s.2.classification))).collect();
            let name = id.map_or_else(|| "unassigned".to_string(), |i| i.to_string());
            let max_re = shape.iter().filter(|s| s.1 == id).map(|s| s.2.max_real_part).fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(summary, "  branch {name}:{} max Re(lambda) = {max_re:.6e}", classification_runs(&pts));
        }
    }

    let rows: Vec<(f64, Option<usize>, &SpectrumReport)> = com
        .iter()
        .map(|(w, r)| (*w, None, r))
        .chain(shape.iter().map(|(w, b, r)| (*w, *b, r)))
        .collect();
    write_spectra_csv(create(&dir.join("spectra.csv"))?, &rows)?;
    write_text(&dir.join("stability_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}
