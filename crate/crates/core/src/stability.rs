//! Linear stability of stationary Gaussons: the six-dimensional shape flow
//! (A, B) and the four-dimensional center-of-mass flow (ξ, π).

use std::fmt;

use nalgebra::{DMatrix, Matrix3, Matrix4, SMatrix};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Dim, Stability, StationaryPoint, TrapConfig};
use crate::ode::shape_velocity;
use crate::stationary::BranchScan;

pub type Matrix6 = SMatrix<f64, 6, 6>;

pub const DEFAULT_STAB_TOL: f64 = 1e-7;
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    Shape,
    CenterOfMass,
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subsystem::Shape => "shape",
            Subsystem::CenterOfMass => "com",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Sorted by imaginary part, then real part.
    pub eigenvalues: Vec<Complex64>,
    pub max_real_part: f64,
    pub classification: Stability,
    pub subsystem: Subsystem,
}

impl SpectrumReport {
    fn from_eigenvalues(mut eigenvalues: Vec<Complex64>, subsystem: Subsystem, stab_tol: f64) -> Self {
        eigenvalues.sort_by(|p, q| p.im.total_cmp(&q.im).then(p.re.total_cmp(&q.re)));
        let max_real_part = eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        let classification = if max_real_part > stab_tol {
            Stability::Unstable
        } else if eigenvalues.iter().any(|l| l.re.abs() <= stab_tol) {
            Stability::Marginal
        } else {
            Stability::Stable
        };
        Self {
            eigenvalues,
            max_real_part,
            classification,
            subsystem,
        }
    }

    /// Largest distance from an eigenvalue to the nearest conjugate of
    /// another eigenvalue (zero for an exactly real matrix).
    pub fn conjugate_defect(&self) -> f64 {
        self.symmetry_defect(|l| l.conj())
    }

    /// Largest distance from −λ to the spectrum. Vanishes for a Hamiltonian
    /// linearization.
    pub fn reflection_defect(&self) -> f64 {
        self.symmetry_defect(|l| -l)
    }

    fn symmetry_defect(&self, map: impl Fn(Complex64) -> Complex64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|&l| {
                let m = map(l);
                self.eigenvalues.iter().map(|&k| (k - m).norm()).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
}

fn eigenvalues(m: DMatrix<f64>, what: &str) -> Result<Vec<Complex64>> {
    let schur = m
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenSolverFailure(format!("Schur iteration did not converge for the {what} matrix")))?;
    let ev = schur.complex_eigenvalues();
    if ev.iter().any(|l| !(l.re.is_finite() && l.im.is_finite())) {
        return Err(Error::EigenSolverFailure(format!("non-finite eigenvalue for the {what} matrix")));
    }
    Ok(ev.iter().map(|l| Complex64::new(l.re, l.im)).collect())
}

fn planar_only(config: &TrapConfig) -> Result<()> {
    if config.dim() != Dim::Two {
        return Err(Error::invalid("dim", "stability analysis is planar only"));
    }
    Ok(())
}

/// Symmetric 2×2 basis matrix for packed coordinate k ∈ {11, 22, 12}.
fn basis(k: usize) -> Matrix3<f64> {
    let mut e = Matrix3::zeros();
    match k {
        0 => e[(0, 0)] = 1.0,
        1 => e[(1, 1)] = 1.0,
        _ => {
            e[(0, 1)] = 1.0;
            e[(1, 0)] = 1.0;
        }
    }
    e
}

fn pack(m: &Matrix3<f64>) -> [f64; 3] {
    [m[(0, 0)], m[(1, 1)], m[(0, 1)]]
}

fn unpack(x: &[f64; 6]) -> (Matrix3<f64>, Matrix3<f64>) {
    let a = x[0] * basis(0) + x[1] * basis(1) + x[2] * basis(2);
    let b = x[3] * basis(0) + x[4] * basis(1) + x[5] * basis(2);
    (a, b)
}

fn flow(x: &[f64; 6], config: &TrapConfig) -> [f64; 6] {
    let (a, b) = unpack(x);
    let (da, db) = shape_velocity(&a, &b, config);
    let (p, q) = (pack(&da), pack(&db));
    [p[0], p[1], p[2], q[0], q[1], q[2]]
}

fn at_point(point: &StationaryPoint, config: &TrapConfig) -> Result<(TrapConfig, [f64; 6])> {
    planar_only(config)?;
    let c = config.with_rotation(point.omega)?;
    Ok((c, [point.alpha1, point.alpha2, 0.0, 0.0, 0.0, point.beta]))
}

fn central_differences(x0: &[f64; 6], config: &TrapConfig, h: f64) -> Matrix6 {
    let mut j = Matrix6::zeros();
    for k in 0..6 {
        let (mut xp, mut xm) = (*x0, *x0);
        xp[k] += h;
        xm[k] -= h;
        let (fp, fm) = (flow(&xp, config), flow(&xm, config));
        for r in 0..6 {
            j[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

/// Jacobian of the shape flow in coordinates (A₁₁, A₂₂, A₁₂, B₁₁, B₂₂, B₁₂)
/// at the point, by central differences with step `h`. The trap and
/// nonlinearity come from `config`, the rotation rate from the point.
pub fn shape_jacobian_with_step(point: &StationaryPoint, config: &TrapConfig, h: f64) -> Result<Matrix6> {
    let (c, x0) = at_point(point, config)?;
    Ok(central_differences(&x0, &c, h))
}

pub fn shape_jacobian(point: &StationaryPoint, config: &TrapConfig) -> Result<Matrix6> {
    shape_jacobian_with_step(point, config, DEFAULT_FD_STEP)
}

/// Max entry difference between the step-h and step-h/2 Jacobians.
pub fn richardson_estimate(point: &StationaryPoint, config: &TrapConfig, h: f64) -> Result<f64> {
    let coarse = shape_jacobian_with_step(point, config, h)?;
    let fine = shape_jacobian_with_step(point, config, 0.5 * h)?;
    Ok((coarse - fine).abs().max())
}

/// The shape Jacobian from the linearized flow
/// δȦ = δB·A + A·δB + B·δA + δA·B + [Ω̂, δA],
/// δḂ = B·δB + δB·B − A·δA − δA·A + 2b·δA + [Ω̂, δB].
pub fn shape_jacobian_analytic(point: &StationaryPoint, config: &TrapConfig) -> Result<Matrix6> {
    let (c, x0) = at_point(point, config)?;
    let (a, b) = unpack(&x0);
    let g = crate::ode::rotation_generator(&c);
    let nl = 2.0 * c.b();
    let mut j = Matrix6::zeros();
    for k in 0..6 {
        let e = basis(k % 3);
        let (da, db) = if k < 3 {
            (b * e + e * b + (g * e - e * g), -(a * e + e * a) + e * nl)
        } else {
            (e * a + a * e, b * e + e * b + (g * e - e * g))
        };
        let (p, q) = (pack(&da), pack(&db));
        for r in 0..3 {
            j[(r, k)] = p[r];
            j[(r + 3, k)] = q[r];
        }
    }
    Ok(j)
}

/// Center-of-mass generator in coordinates (ξ₁, ξ₂, π₁, π₂).
pub fn com_matrix(config: &TrapConfig) -> Result<Matrix4<f64>> {
    planar_only(config)?;
    let w = config.rotation();
    let [v1, v2, _] = config.potential_diagonal();
    #[rustfmt::skip]
    let m = Matrix4::new(
        0.0, w, 1.0, 0.0,
        -w, 0.0, 0.0, 1.0,
        -v1, 0.0, 0.0, w,
        0.0, -v2, -w, 0.0,
    );
    Ok(m)
}

pub fn com_spectrum_with_tol(config: &TrapConfig, stab_tol: f64) -> Result<SpectrumReport> {
    let m = com_matrix(config)?;
    let ev = eigenvalues(DMatrix::from_iterator(4, 4, m.iter().copied()), "center-of-mass")?;
    Ok(SpectrumReport::from_eigenvalues(ev, Subsystem::CenterOfMass, stab_tol))
}

/// Spectrum of the center-of-mass motion; independent of b.
pub fn com_spectrum(config: &TrapConfig) -> Result<SpectrumReport> {
    com_spectrum_with_tol(config, DEFAULT_STAB_TOL)
}

/// Shape-flow spectrum at a stationary point; records the classification
/// in the point.
pub fn classify(point: &mut StationaryPoint, config: &TrapConfig, stab_tol: f64) -> Result<SpectrumReport> {
    let j = shape_jacobian(point, config)?;
    let ev = eigenvalues(DMatrix::from_iterator(6, 6, j.iter().copied()), "shape")?;
    let report = SpectrumReport::from_eigenvalues(ev, Subsystem::Shape, stab_tol);
    point.stability = Some(report.classification);
    Ok(report)
}

/// Classifies every point of a scan in parallel; reports follow `scan.points`.
pub fn classify_scan(scan: &mut BranchScan, stab_tol: f64) -> Result<Vec<SpectrumReport>> {
    let config = scan.config;
    scan.points
        .par_iter_mut()
        .map(|p| classify(p, &config, stab_tol))
        .collect()
}

/// Rotation rates in [lo, hi] where the center-of-mass classification
/// changes, located on an `n`-point grid and refined by bisection to `tol`.
pub fn com_thresholds(config: &TrapConfig, lo: f64, hi: f64, n: usize, tol: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi > lo && n >= 2 && tol > 0.0) {
        return Err(Error::invalid("omega_max", "threshold search needs lo < hi, n ≥ 2, tol > 0"));
    }
    let class = |w: f64| -> Result<Stability> { Ok(com_spectrum(&config.with_rotation(w)?)?.classification) };
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let classes = grid.iter().map(|&w| class(w)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for i in 0..n - 1 {
        if classes[i] == classes[i + 1] {
            continue;
        }
        let (mut a, mut b) = (grid[i], grid[i + 1]);
        while b - a > tol {
            let m = 0.5 * (a + b);
            if class(m)? == classes[i] {
                a = m;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stationary::{solve_linear_rotating, solve_zero_rotation, Region};

    #[test]
    fn finite_difference_matches_analytic_jacobian() {
        for (w, b) in [(0.0, 0.0), (0.5, 0.0), (0.0, 1.0), (0.3, -1.0)] {
            let c = TrapConfig::reference(w, b);
            let p = if b == 0.0 {
                solve_linear_rotating(&c, Region::Below).unwrap()
            } else {
                let mut p = solve_zero_rotation(&TrapConfig::reference(0.0, b)).unwrap();
                p.beta = 0.17;
                p
            };
            let fd = shape_jacobian(&p, &c).unwrap();
            let an = shape_jacobian_analytic(&p, &c).unwrap();
            assert!((fd - an).abs().max() < 1e-8, "{fd}{an}");
            assert!(richardson_estimate(&p, &c, 1e-5).unwrap() < 1e-8);
        }
    }

    #[test]
    fn harmonic_ground_state_modes() {
        let c = TrapConfig::reference(0.0, 0.0);
        let mut p = solve_zero_rotation(&c).unwrap();
        let r = classify(&mut p, &c, DEFAULT_STAB_TOL).unwrap();
        let (w1, w2) = (c.omega1(), c.omega2());
        let mut expected = [2.0 * w1, 2.0 * w2, w1 + w2, -2.0 * w1, -2.0 * w2, -(w1 + w2)];
        expected.sort_by(f64::total_cmp);
        for (l, e) in r.eigenvalues.iter().zip(expected) {
            assert!(l.re.abs() < 1e-8 && (l.im - e).abs() < 1e-8, "{:?}", r.eigenvalues);
        }
        assert_eq!(r.classification, Stability::Marginal);
        assert_eq!(p.stability, Some(Stability::Marginal));
    }

    #[test]
    fn com_at_rest_is_two_oscillators() {
        let c = TrapConfig::reference(0.0, 0.7);
        let r = com_spectrum(&c).unwrap();
        let (w1, w2) = (c.omega1(), c.omega2());
        let expected = [-w2, -w1, w1, w2];
        for (l, e) in r.eigenvalues.iter().zip(expected) {
            assert!(l.re.abs() < 1e-12 && (l.im - e).abs() < 1e-12);
        }
        assert_eq!(r.classification, Stability::Marginal);
    }

    #[test]
    fn com_gap_is_unstable() {
        let r = com_spectrum(&TrapConfig::reference(1.0, 0.0)).unwrap();
        assert_eq!(r.classification, Stability::Unstable);
        assert!(r.max_real_part > 0.1);
        let r = com_spectrum(&TrapConfig::reference(1.5, 0.0)).unwrap();
        assert_eq!(r.classification, Stability::Marginal);
        assert!(r.conjugate_defect() < 1e-12 && r.reflection_defect() < 1e-9);
    }

    #[test]
    fn rejects_spatial_trap() {
        let c = TrapConfig::spatial(1.0, 1.2, 1.4, 0.0, 0.0).unwrap();
        assert!(com_spectrum(&c).is_err());
    }
}
