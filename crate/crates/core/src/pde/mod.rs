//! Split-step Fourier solver for the planar logarithmic Schrödinger equation
//!
//! ```text
//! i ∂ψ/∂t = −½∇²ψ + ½ r·V̂(t)·r ψ − b log|ψ|² ψ
//! ```
//!
//! on a periodic square box, used to check that Gaussons are exact
//! solutions of the full field equation. In the lab frame the trap turns,
//! V̂(t) = R(Ωt)·Diag(ω₁², ω₂²)·R(Ωt)ᵀ; in the rotating frame the trap is
//! fixed and the Hamiltonian gains −Ω·L_z.

mod fft;
mod fit;
mod io;
mod solver;

pub use fit::{fit_gaussian, GaussianFit};
pub use io::{read_snapshot, write_snapshot};
pub use solver::{dt_study, evolve, gausson_reference, DtStudy, Evolution, PdeDiagnostics, SplitStepSolver};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Dim, GaussonState, TrapConfig};

/// Square periodic grid [−L, L)² with n points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    n: usize,
    half_width: f64,
}

impl Grid2D {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::invalid("n", format!("grid size must be a power of two ≥ 4, got {n}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid("L", format!("box half-width must be positive, got {half_width}")));
        }
        Ok(Self { n, half_width })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }

    /// Angular wavenumber of FFT bin `i` in the standard ordering.
    pub fn k(&self, i: usize) -> f64 {
        let m = if i < self.n / 2 { i as f64 } else { i as f64 - self.n as f64 };
        std::f64::consts::PI * m / self.half_width
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.k(i)).collect()
    }
}

impl Default for Grid2D {
    fn default() -> Self {
        Self { n: 256, half_width: 12.0 }
    }
}

/// Complex field on a grid, row-major with `values[i·n + j] = ψ(xᵢ, yⱼ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub grid: Grid2D,
    pub values: Vec<Complex64>,
    pub t: f64,
}

impl Field2D {
    pub fn new(grid: Grid2D, values: Vec<Complex64>, t: f64) -> Result<Self> {
        if values.len() != grid.n * grid.n {
            return Err(Error::invalid("values", format!("expected {} samples, got {}", grid.n * grid.n, values.len())));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { t });
        }
        let f = Self { grid, values, t };
        if !(f.norm() > 0.0) {
            return Err(Error::invalid("values", "field has zero norm"));
        }
        Ok(f)
    }

    /// Samples a planar ansatz state on the grid.
    pub fn from_state(grid: Grid2D, state: &GaussonState) -> Result<Self> {
        if state.dim() != Dim::Two {
            return Err(Error::invalid("dim", "the field solver is planar only"));
        }
        let xs = grid.coordinates();
        let values = xs
            .iter()
            .flat_map(|&x| xs.iter().map(move |&y| [x, y]))
            .map(|r| state.psi(&r))
            .collect();
        Self::new(grid, values, state.t())
    }

    pub fn from_fn(grid: Grid2D, t: f64, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let xs = grid.coordinates();
        let values = xs.iter().flat_map(|&x| xs.iter().map(move |&y| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(grid, values, t)
    }

    /// Σ|ψ|²·dx².
    pub fn norm(&self) -> f64 {
        let dx = self.grid.dx();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx * dx
    }

    /// ⟨self|other⟩ = Σ conj(self)·other·dx².
    pub fn inner(&self, other: &Field2D) -> Complex64 {
        let dx = self.grid.dx();
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<Complex64>() * (dx * dx)
    }

    /// |⟨self|other⟩|² / (‖self‖²‖other‖²).
    pub fn fidelity(&self, other: &Field2D) -> f64 {
        self.inner(other).norm_sqr() / (self.norm() * other.norm())
    }

    /// Largest |ψ| on the outermost ring of grid points.
    pub fn boundary_max(&self) -> f64 {
        let n = self.grid.n;
        (0..n)
            .flat_map(|k| [(0, k), (n - 1, k), (k, 0), (k, n - 1)])
            .map(|(i, j)| self.values[i * n + j].norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Trap turns with angle Ωt; no angular-momentum term.
    Lab,
    /// Trap fixed; −Ω·L_z is applied as an exact rotation of the field.
    Rotating,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeSettings {
    pub dt: f64,
    pub t_end: f64,
    /// Floor ε in log(max(|ψ|², ε)).
    pub log_epsilon: f64,
    pub frame: Frame,
    /// Time between recorded diagnostics; rounded to a whole number of steps.
    pub sample_every: f64,
}

impl Default for PdeSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 10.0,
            log_epsilon: 1e-30,
            frame: Frame::Lab,
            sample_every: 0.1,
        }
    }
}

impl PdeSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::invalid("t_end", format!("must be non-negative, got {}", self.t_end)));
        }
        if !(self.log_epsilon.is_finite() && self.log_epsilon >= 0.0) {
            return Err(Error::invalid("log_epsilon", format!("must be non-negative, got {}", self.log_epsilon)));
        }
        if !(self.sample_every.is_finite() && self.sample_every > 0.0) {
            return Err(Error::invalid("sample_every", format!("must be positive, got {}", self.sample_every)));
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::invalid("dt", format!("t_end = {} is not a whole number of steps of {}", self.t_end, self.dt)));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn sample_stride(&self) -> usize {
        ((self.sample_every / self.dt).round() as usize).max(1)
    }
}

/// Coefficients of the field equation: trap curvatures, rotation rate and b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNls {
    pub v: [f64; 2],
    pub rotation: f64,
    pub b: f64,
}

impl LogNls {
    pub fn from_config(config: &TrapConfig) -> Result<Self> {
        if config.dim() != Dim::Two {
            return Err(Error::invalid("dim", "the field solver is planar only"));
        }
        let [v1, v2, _] = config.potential_diagonal();
        Ok(Self {
            v: [v1, v2],
            rotation: config.rotation(),
            b: config.b(),
        })
    }

    /// No trap, no rotation.
    pub fn free(b: f64) -> Self {
        Self { v: [0.0, 0.0], rotation: 0.0, b }
    }

    /// (Vxx, Vyy, Vxy) at time t in the given frame.
    pub fn potential_at(&self, t: f64, frame: Frame) -> [f64; 3] {
        let [v1, v2] = self.v;
        match frame {
            Frame::Rotating => [v1, v2, 0.0],
            Frame::Lab => {
                let (s, c) = (self.rotation * t).sin_cos();
                [c * c * v1 + s * s * v2, s * s * v1 + c * c * v2, c * s * (v1 - v2)]
            }
        }
    }
}
