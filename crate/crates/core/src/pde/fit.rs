//! Moment fit of a field to the Gaussian ansatz.

use nalgebra::Vector3;
use num_complex::Complex64;

use super::fft::Fft2;
use super::Field2D;
use crate::error::{Error, Result};
use crate::model::{GaussonState, SymMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    /// First moments of |ψ|².
    pub center: [f64; 2],
    /// Second central moments Σ of |ψ|²; for a Gausson Σ = A⁻¹/2.
    pub covariance: SymMatrix,
    /// Mean momentum ⟨p⟩.
    pub momentum: [f64; 2],
    /// Width matrix A = Σ⁻¹/2 of the comparison Gaussian.
    pub a: SymMatrix,
    /// Phase-curvature matrix fitted from the probability current.
    pub b: SymMatrix,
    /// Overlap with the comparison Gaussian, |⟨φ|ψ⟩|²/(‖φ‖²‖ψ‖²).
    pub fidelity: f64,
}

/// ∂ψ/∂x and ∂ψ/∂y by spectral differentiation.
pub(crate) fn gradient(fft: &mut Fft2, field: &Field2D) -> (Vec<Complex64>, Vec<Complex64>) {
    let g = field.grid;
    let n = g.n();
    let ks = g.wavenumbers();
    let mut spec = field.values.clone();
    fft.forward_t(&mut spec);
    let mut dx = spec.clone();
    let mut dy = spec;
    for j in 0..n {
        for i in 0..n {
            dx[j * n + i] *= Complex64::new(0.0, ks[i]);
            dy[j * n + i] *= Complex64::new(0.0, ks[j]);
        }
    }
    fft.inverse_t(&mut dx);
    fft.inverse_t(&mut dy);
    (dx, dy)
}

pub(crate) fn fit_with(fft: &mut Fft2, field: &Field2D) -> Result<GaussianFit> {
    let g = field.grid;
    let n = g.n();
    let xs = g.coordinates();
    let (dx, dy) = gradient(fft, field);

    let mut m0 = 0.0;
    let mut m1 = [0.0; 2];
    let mut j1 = [0.0; 2];
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            let psi = field.values[k];
            let rho = psi.norm_sqr();
            m0 += rho;
            m1[0] += rho * xs[i];
            m1[1] += rho * xs[j];
            j1[0] += (psi.conj() * dx[k]).im;
            j1[1] += (psi.conj() * dy[k]).im;
        }
    }
    if !(m0 > 0.0) {
        return Err(Error::DegenerateMoments { det: 0.0 });
    }
    let center = [m1[0] / m0, m1[1] / m0];
    let momentum = [j1[0] / m0, j1[1] / m0];

    // Σ = ⟨r̃ r̃ᵀ⟩ and C = ⟨r̃ (v − π)ᵀ⟩ with v the local velocity
    let mut s = [0.0; 3];
    let mut c = [[0.0; 2]; 2];
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            let psi = field.values[k];
            let rho = psi.norm_sqr();
            let r = [xs[i] - center[0], xs[j] - center[1]];
            let cur = [(psi.conj() * dx[k]).im - rho * momentum[0], (psi.conj() * dy[k]).im - rho * momentum[1]];
            s[0] += rho * r[0] * r[0];
            s[1] += rho * r[1] * r[1];
            s[2] += rho * r[0] * r[1];
            for (p, rp) in r.iter().enumerate() {
                for (q, cq) in cur.iter().enumerate() {
                    c[p][q] += rp * cq;
                }
            }
        }
    }
    let covariance = SymMatrix::planar(s[0] / m0, s[1] / m0, s[2] / m0);
    let det = covariance.det();
    let tr = covariance.trace();
    if !(det.is_finite() && det > 1e-24 * tr * tr) {
        return Err(Error::DegenerateMoments { det });
    }
    let inv = covariance.inverse().ok_or(Error::DegenerateMoments { det })?;
    let a = inv.scale(0.5);

    // the phase −½ r̃·B·r̃ gives v − π = −B r̃, so C = −Σ B
    let c = [[c[0][0] / m0, c[0][1] / m0], [c[1][0] / m0, c[1][1] / m0]];
    let (i11, i22, i12) = (inv.get(0, 0), inv.get(1, 1), inv.get(0, 1));
    let bm = [
        [-(i11 * c[0][0] + i12 * c[1][0]), -(i11 * c[0][1] + i12 * c[1][1])],
        [-(i12 * c[0][0] + i22 * c[1][0]), -(i12 * c[0][1] + i22 * c[1][1])],
    ];
    let b = SymMatrix::planar(bm[0][0], bm[1][1], 0.5 * (bm[0][1] + bm[1][0]));

    let probe = GaussonState::centered(a, b)?
        .with_center(Vector3::new(center[0], center[1], 0.0), Vector3::new(momentum[0], momentum[1], 0.0))?;
    let phi = Field2D::from_state(g, &probe)?;
    let fidelity = phi.fidelity(field);

    Ok(GaussianFit {
        center,
        covariance,
        momentum,
        a,
        b,
        fidelity,
    })
}

/// Fits center, covariance and phase curvature from the moments of |ψ|²
/// and of the probability current, and measures the overlap with the
/// Gaussian having those moments.
pub fn fit_gaussian(field: &Field2D) -> Result<GaussianFit> {
    fit_with(&mut Fft2::new(field.grid.n()), field)
}
