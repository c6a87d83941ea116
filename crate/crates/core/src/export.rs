//! CSV output. Floats are written in scientific notation with 17 significant
//! digits so every value round-trips exactly.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::{Dim, Stability, StationaryPoint};
use crate::ode::Trajectory;
use crate::pde::{DtStudy, PdeDiagnostics};
use crate::stability::SpectrumReport;
use crate::stationary::BranchScan;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), fmt_f64)
}

pub fn write_trajectory_csv<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let dim = traj.samples.first().map_or(Dim::Two, |s| s.dim());
    let mut header: Vec<&str> = vec!["t"];
    match dim {
        Dim::Two => header.extend(["A11", "A22", "A12", "B11", "B22", "B12", "xi1", "xi2", "pi1", "pi2"]),
        Dim::Three => header.extend([
            "A11", "A22", "A33", "A12", "A13", "A23", "B11", "B22", "B33", "B12", "B13", "B23", "xi1", "xi2", "xi3",
            "pi1", "pi2", "pi3",
        ]),
    }
    header.extend(["N", "f", "norm", "energy", "min_eig_A"]);
    out.write_record(&header)?;
    let n = dim.n();
    for (s, d) in traj.samples.iter().zip(&traj.diagnostics) {
        let mut row = vec![fmt_f64(s.t())];
        row.extend(s.a().packed().iter().map(|v| fmt_f64(*v)));
        row.extend(s.b().packed().iter().map(|v| fmt_f64(*v)));
        row.extend(s.xi().iter().take(n).map(|v| fmt_f64(*v)));
        row.extend(s.pi().iter().take(n).map(|v| fmt_f64(*v)));
        row.extend([s.amplitude(), s.phase(), d.norm, d.energy, d.min_eig_a].map(fmt_f64));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub const BRANCH_SCAN_HEADER: [&str; 8] = ["Omega", "branch_id", "alpha1", "alpha2", "beta", "residual", "stability", "multiplicity"];

/// One row per (Ω, root); stability is empty when unclassified.
pub fn write_branch_scan_csv<W: Write>(w: W, scan: &BranchScan) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(BRANCH_SCAN_HEADER)?;
    for (i, &omega) in scan.omega_grid.iter().enumerate() {
        for p in scan.points_at(i) {
            out.write_record([
                fmt_f64(omega),
                p.branch_id.map_or_else(String::new, |b| b.to_string()),
                fmt_f64(p.alpha1),
                fmt_f64(p.alpha2),
                fmt_f64(p.beta),
                fmt_f64(p.residual),
                p.stability.map_or_else(String::new, |s| s.to_string()),
                scan.multiplicity[i].to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// A stationary point read back from a scan file, with the multiplicity
/// recorded for its rotation rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub point: StationaryPoint,
    pub multiplicity: usize,
}

pub fn read_branch_scan_csv<R: Read>(r: R) -> Result<Vec<ScanRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != BRANCH_SCAN_HEADER {
        return Err(Error::Parse(format!("unexpected scan header: {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let num = |s: &str, what: &str| -> Result<f64> { s.parse().map_err(|_| Error::Parse(format!("bad {what} value '{s}'"))) };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut p = StationaryPoint::new(
            num(&rec[2], "alpha1")?,
            num(&rec[3], "alpha2")?,
            num(&rec[4], "beta")?,
            num(&rec[0], "Omega")?,
            num(&rec[5], "residual")?,
        );
        if !rec[1].is_empty() {
            p.branch_id = Some(rec[1].parse().map_err(|_| Error::Parse(format!("bad branch_id '{}'", &rec[1])))?);
        }
        if !rec[6].is_empty() {
            p.stability = Some(rec[6].parse::<Stability>()?);
        }
        let multiplicity = rec[7].parse().map_err(|_| Error::Parse(format!("bad multiplicity '{}'", &rec[7])))?;
        rows.push(ScanRow { point: p, multiplicity });
    }
    Ok(rows)
}

/// One spectrum per row:
/// Omega, branch_id, subsystem, re_lambda_k, im_lambda_k (k = 1..K), classification.
pub fn write_spectra_csv<W: Write>(w: W, rows: &[(f64, Option<usize>, &SpectrumReport)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let k = rows.iter().map(|r| r.2.eigenvalues.len()).max().unwrap_or(0);
    let mut header = vec!["Omega".to_string(), "branch_id".into(), "subsystem".into()];
    for i in 1..=k {
        header.push(format!("re_lambda_{i}"));
        header.push(format!("im_lambda_{i}"));
    }
    header.push("max_real_part".into());
    header.push("classification".into());
    out.write_record(&header)?;
    for (omega, branch, rep) in rows {
        let mut row = vec![fmt_f64(*omega), branch.map_or_else(String::new, |b| b.to_string()), rep.subsystem.to_string()];
        for i in 0..k {
            match rep.eigenvalues.get(i) {
                Some(l) => {
                    row.push(fmt_f64(l.re));
                    row.push(fmt_f64(l.im));
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        row.push(fmt_f64(rep.max_real_part));
        row.push(rep.classification.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_pde_diagnostics_csv<W: Write>(w: W, diags: &[PdeDiagnostics]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "norm", "energy", "cov_xx", "cov_yy", "cov_xy", "fidelity_vs_gausson", "floor_cells"])?;
    for d in diags {
        out.write_record([
            fmt_f64(d.t),
            fmt_f64(d.norm),
            fmt_f64(d.energy),
            fmt_f64(d.covariance[0]),
            fmt_f64(d.covariance[1]),
            fmt_f64(d.covariance[2]),
            fmt_opt(d.fidelity_vs_gausson),
            d.floor_cells.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_dt_study_csv<W: Write>(w: W, study: &DtStudy) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["dt", "error", "order_to_next"])?;
    for (k, (&dt, &err)) in study.dts.iter().zip(&study.errors).enumerate() {
        let order = study.pairwise_orders.get(k).map_or_else(String::new, |o| fmt_f64(*o));
        out.write_record([fmt_f64(dt), fmt_f64(err), order])?;
    }
    out.flush()?;
    Ok(())
}
