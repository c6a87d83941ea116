//! `gausson` command-line driver.

mod commands;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use params::Params;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Self { code: 3, msg: msg.into() }
    }
}

impl From<gausson::Error> for CliError {
    fn from(e: gausson::Error) -> Self {
        if e.is_config_error() {
            Self::config(e.to_string())
        } else {
            Self::solver(e.to_string())
        }
    }
}

struct Opt {
    key: &'static str,
    default: Option<&'static str>,
    flag: bool,
    help: &'static str,
}

const fn opt(key: &'static str, default: &'static str, help: &'static str) -> Opt {
    Opt { key, default: Some(default), flag: false, help }
}

const fn opt_none(key: &'static str, help: &'static str) -> Opt {
    Opt { key, default: None, flag: false, help }
}

const fn flag(key: &'static str, help: &'static str) -> Opt {
    Opt { key, default: Some("false"), flag: true, help }
}

const COMMON: &[Opt] = &[
    opt_none("omega1", "trap frequency along the first principal axis [default: sqrt(2/3)]"),
    opt_none("omega2", "trap frequency along the second principal axis [default: sqrt(4/3)]"),
    opt_none("b", "strength of the logarithmic nonlinearity (positive attracts) [default: 0]"),
    opt("omega", "0", "rotation rate"),
    opt_none("preset", "parameter set fig1 (b = 0), fig2 (b = 1) or fig3 (b = -1) on the reference trap"),
    opt("out", "gausson_out", "output directory"),
    opt_none("config", "key=value parameter file; command-line flags override it"),
];

const SCAN: &[Opt] = &[
    opt("omega_min", "0", "lower end of the rotation scan"),
    opt("omega_max", "2", "upper end of the rotation scan"),
    opt("n_omega", "801", "number of rotation rates in the scan"),
    opt("n_grid", "400", "cells per axis of the multi-start lattice"),
    opt("newton_tol", "1e-12", "residual tolerance of the root polish"),
    opt("newton_max_iter", "60", "Newton iteration cap"),
    opt("dedupe_radius", "1e-6", "distance below which two roots are identified"),
    opt("arc_step", "5e-3", "maximum pseudo-arclength step"),
    opt("alpha_max", "auto", "edge of the multi-start box (auto: 4 max(omega2, |b|) + 4)"),
    opt("stab_tol", "1e-7", "real-part threshold for spectral instability"),
];

const INITIAL: &[Opt] = &[
    flag("from_stationary", "start from a stationary Gausson at the given rotation rate"),
    opt("root", "auto", "which stationary root, by index in (alpha1, alpha2) order (auto: most localized)"),
    opt("a11", "auto", "initial A11 (auto: omega1)"),
    opt("a22", "auto", "initial A22 (auto: omega2)"),
    opt("a12", "0", "initial A12"),
    opt("b11", "0", "initial B11"),
    opt("b22", "0", "initial B22"),
    opt("b12", "0", "initial B12"),
    opt("xi1", "0", "initial center, first coordinate"),
    opt("xi2", "0", "initial center, second coordinate"),
    opt("pi1", "0", "initial mean momentum, first coordinate"),
    opt("pi2", "0", "initial mean momentum, second coordinate"),
    opt("amplitude", "1", "initial amplitude N"),
    opt("phase", "0", "initial phase f"),
];

const ODE: &[Opt] = &[
    opt("method", "rk45", "rk45 (adaptive Dormand-Prince) or rk4 (fixed step)"),
    opt("dt", "1e-3", "step (rk4) or initial step (rk45)"),
    opt("t_end", "10", "duration"),
    opt("sample_every", "0.1", "time between output rows"),
    opt("rel_tol", "1e-10", "relative tolerance (rk45)"),
    opt("abs_tol", "1e-12", "absolute tolerance (rk45)"),
];

const PDE: &[Opt] = &[
    opt("n", "256", "grid points per axis (power of two)"),
    opt("half_width", "12", "box half-width L; the box is [-L, L)^2"),
    opt("dt", "1e-3", "time step"),
    opt("t_end", "10", "duration"),
    opt("sample_every", "0.1", "time between diagnostics rows"),
    opt("log_epsilon", "1e-30", "floor of |psi|^2 inside the logarithm"),
    opt("frame", "lab", "lab (turning trap) or rotating (co-rotating frame)"),
    flag("snapshots", "write a binary field snapshot at every sample"),
    flag("dt_study", "run the time-step convergence study instead of a single evolution"),
    opt("study_t_end", "0.5", "duration of each run in the convergence study"),
    opt("study_dts", "2e-3,1e-3,5e-4,2.5e-4", "step sizes of the convergence study"),
];

const STABILITY: &[Opt] = &[
    opt("omega_min", "0", "lower end of the center-of-mass rotation grid"),
    opt("omega_max", "2", "upper end of the center-of-mass rotation grid"),
    opt("n_omega", "201", "points of the center-of-mass rotation grid"),
    opt("threshold_tol", "1e-9", "bisection tolerance for classification thresholds"),
    opt("stab_tol", "1e-7", "real-part threshold for spectral instability"),
    opt_none("scan", "branch scan CSV (from stationary-scan) to classify point by point"),
];

fn subcommand(name: &'static str, about: &'static str, groups: &[&[Opt]]) -> Command {
    let mut cmd = Command::new(name).about(about);
    for group in groups {
        for o in group.iter() {
            let mut arg = Arg::new(o.key).long(o.key.replace('_', "-")).help(o.help);
            arg = if o.flag {
                arg.action(ArgAction::SetTrue)
            } else {
                let arg = arg.action(ArgAction::Set).allow_negative_numbers(true);
                match o.default {
                    Some(d) => arg.help(format!("{} [default: {d}]", o.help)),
                    None => arg,
                }
            };
            if o.key == "preset" {
                arg = arg.value_parser(["fig1", "fig2", "fig3"]);
            }
            cmd = cmd.arg(arg);
        }
    }
    cmd
}

fn cli() -> Command {
    Command::new("gausson")
        .about("Gaussian solutions of the logarithmic Schroedinger equation in rotating anisotropic traps")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(subcommand(
            "stationary-scan",
            "trace stationary Gaussons over the rotation rate and classify them",
            &[COMMON, SCAN],
        ))
        .subcommand(subcommand("evolve-ode", "integrate the Gaussian-ansatz equations of motion", &[COMMON, INITIAL, ODE]))
        .subcommand(subcommand(
            "evolve-pde",
            "evolve a Gaussian initial field with the split-step solver",
            &[COMMON, INITIAL, PDE],
        ))
        .subcommand(subcommand(
            "stability",
            "center-of-mass spectra over rotation and shape spectra of a branch scan",
            &[COMMON, STABILITY],
        ))
}

fn reference_frequencies() -> (String, String) {
    use gausson::model::{REFERENCE_OMEGA1_SQ, REFERENCE_OMEGA2_SQ};
    // shortest round-trip representation, parsed back bit for bit
    (REFERENCE_OMEGA1_SQ.sqrt().to_string(), REFERENCE_OMEGA2_SQ.sqrt().to_string())
}

fn preset_values(name: &str) -> Result<[(&'static str, String); 3], CliError> {
    let b = match name {
        "fig1" => "0",
        "fig2" => "1",
        "fig3" => "-1",
        other => return Err(CliError::config(format!("parameter `preset`: unknown preset `{other}`"))),
    };
    let (w1, w2) = reference_frequencies();
    Ok([("omega1", w1), ("omega2", w2), ("b", b.to_string())])
}

/// Defaults, then preset, then config file, then command line.
fn resolve(m: &ArgMatches, groups: &[&[Opt]]) -> Result<Params, CliError> {
    let cli = Params::from_matches(m);
    let allowed: Vec<String> = groups.iter().flat_map(|g| g.iter().map(|o| o.key.to_string())).collect();
    let file = match cli.raw("config") {
        Some(path) => Params::from_file(&PathBuf::from(path), &allowed)?,
        None => Params::default(),
    };
    let mut p = Params::default();
    if let Some(name) = cli.raw("preset").or(file.raw("preset")) {
        for (k, v) in preset_values(name)? {
            p.set_default(k, v);
        }
    }
    let mut p = p.overlay(&file).overlay(&cli);
    let (w1, w2) = reference_frequencies();
    p.set_default("omega1", w1);
    p.set_default("omega2", w2);
    p.set_default("b", "0");
    for group in groups {
        for o in group.iter() {
            if let Some(d) = o.default {
                p.set_default(o.key, d);
            }
        }
    }
    Ok(p)
}

fn run() -> Result<(), CliError> {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return if code == 0 { Ok(()) } else { Err(CliError { code, msg: String::new() }) };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    match name {
        "stationary-scan" => commands::stationary_scan(&resolve(sub, &[COMMON, SCAN])?),
        "evolve-ode" => commands::evolve_ode(&resolve(sub, &[COMMON, INITIAL, ODE])?),
        "evolve-pde" => commands::evolve_pde(&resolve(sub, &[COMMON, INITIAL, PDE])?),
        "stability" => commands::stability(&resolve(sub, &[COMMON, STABILITY])?),
        _ => unreachable!("unknown subcommand"),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.msg.is_empty() {
                eprintln!("error: {}", e.msg);
            }
            ExitCode::from(e.code)
        }
    }
}
