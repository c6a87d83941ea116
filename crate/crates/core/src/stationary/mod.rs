//! Stationary Gaussons of the planar rotating problem.
//!
//! In the frame where V̂ = Diag(ω₁², ω₂²), a stationary state has
//! A = Diag(α₁, α₂) and B = offdiag(β), and (α₁, α₂, β) solves
//!
//! ```text
//! r₁ = (α₁ + α₂)β − (α₁ − α₂)Ω                 = 0
//! r₂ = β² − α₁² + ω₁² + 2bα₁ + 2βΩ              = 0
//! r₃ = β² − α₂² + ω₂² + 2bα₂ − 2βΩ              = 0
//! ```
//!
//! Only roots with α₁, α₂ > 0 describe normalizable packets.

mod closed_form;
mod continuation;
mod roots;

pub use closed_form::{solve_linear_rotating, solve_zero_rotation, Region};
pub use continuation::{trace_branches, Branch, BranchEnd, BranchScan, MultiplicityInterval, TransitionEvent, TransitionKind};
pub use roots::{find_all_roots, newton_at_fixed_rotation};

use crate::error::{Error, Result};
use crate::model::{Dim, TrapConfig};

/// The three stationarity equations for a planar trap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaritySystem {
    config: TrapConfig,
}

impl StationaritySystem {
    /// Rejects 3D traps and the isotropic case ω₁ = ω₂.
    pub fn new(config: TrapConfig) -> Result<Self> {
        if config.dim() != Dim::Two {
            return Err(Error::invalid("dim", "stationary analysis is planar only"));
        }
        if config.omega1() >= config.omega2() {
            return Err(Error::invalid(
                "omega2",
                format!("stationary analysis needs omega1 < omega2, got {} and {}", config.omega1(), config.omega2()),
            ));
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> &TrapConfig {
        &self.config
    }

    pub fn residual(&self, alpha1: f64, alpha2: f64, beta: f64) -> [f64; 3] {
        residual([alpha1, alpha2, beta], &self.config)
    }
}

/// (r₁, r₂, r₃) at `point = (α₁, α₂, β)` using the signed rotation rate.
pub fn residual(point: [f64; 3], config: &TrapConfig) -> [f64; 3] {
    let [a1, a2, beta] = point;
    let w = config.rotation();
    let [v1, v2, _] = config.potential_diagonal();
    let b = config.b();
    [
        (a1 + a2) * beta - (a1 - a2) * w,
        beta * beta - a1 * a1 + v1 + 2.0 * b * a1 + 2.0 * beta * w,
        beta * beta - a2 * a2 + v2 + 2.0 * b * a2 - 2.0 * beta * w,
    ]
}

pub(crate) fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Knobs for the multi-start root search and the branch tracing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationSettings {
    pub omega_min: f64,
    pub omega_max: f64,
    /// Number of rotation rates in the scan grid.
    pub n_omega: usize,
    /// Cells per axis of the (α₁, α₂) start lattice.
    pub n_grid: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub dedupe_radius: f64,
    /// Upper bound on the pseudo-arclength step.
    pub arc_step: f64,
    /// Upper edge of the search box; `None` means 4·max(ω₂, |b|) + 4.
    pub alpha_max: Option<f64>,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            omega_min: 0.0,
            omega_max: 2.0,
            n_omega: 801,
            n_grid: 400,
            newton_tol: 1e-12,
            newton_max_iter: 60,
            dedupe_radius: 1e-6,
            arc_step: 5e-3,
            alpha_max: None,
        }
    }
}

impl ContinuationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_min.is_finite() && self.omega_min >= 0.0) {
            return Err(Error::invalid("omega_min", "scan interval must start at a non-negative rotation rate"));
        }
        if !(self.omega_max.is_finite() && self.omega_max > self.omega_min) {
            return Err(Error::invalid("omega_max", "must exceed omega_min"));
        }
        if self.n_omega < 2 {
            return Err(Error::invalid("n_omega", "need at least two grid points"));
        }
        if self.n_grid < 4 {
            return Err(Error::invalid("n_grid", "need at least four cells per axis"));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::invalid("newton_max_iter", "must be positive"));
        }
        for (name, v) in [
            ("newton_tol", self.newton_tol),
            ("dedupe_radius", self.dedupe_radius),
            ("arc_step", self.arc_step),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if let Some(a) = self.alpha_max {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::invalid("alpha_max", format!("must be positive, got {a}")));
            }
        }
        Ok(())
    }

    /// Search-box edge for a given trap.
    pub fn alpha_max_for(&self, config: &TrapConfig) -> f64 {
        self.alpha_max
            .unwrap_or_else(|| 4.0 * config.omega2().max(config.b().abs()) + 4.0)
    }

    pub fn omega_grid(&self) -> Vec<f64> {
        let n = self.n_omega;
        let step = (self.omega_max - self.omega_min) / (n - 1) as f64;
        (0..n)
            .map(|i| if i == n - 1 { self.omega_max } else { self.omega_min + i as f64 * step })
            .collect()
    }
}

/// Planar system with β eliminated through r₁ = 0, as a function of
/// x = (Ω, α₁, α₂). Works with the rotation magnitude.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Reduced {
    v1: f64,
    v2: f64,
    b: f64,
}

impl Reduced {
    pub(crate) fn new(config: &TrapConfig) -> Self {
        let [v1, v2, _] = config.potential_diagonal();
        Self { v1, v2, b: config.b() }
    }

    pub(crate) fn beta(w: f64, a1: f64, a2: f64) -> f64 {
        w * (a1 - a2) / (a1 + a2)
    }

    /// (r₂, r₃) with β = Ω(α₁ − α₂)/(α₁ + α₂).
    pub(crate) fn eval(&self, w: f64, a1: f64, a2: f64) -> [f64; 2] {
        let beta = Self::beta(w, a1, a2);
        [
            beta * beta - a1 * a1 + self.v1 + 2.0 * self.b * a1 + 2.0 * beta * w,
            beta * beta - a2 * a2 + self.v2 + 2.0 * self.b * a2 - 2.0 * beta * w,
        ]
    }

    /// Full three-equation residual magnitude at the reduced point.
    pub(crate) fn residual(&self, w: f64, a1: f64, a2: f64) -> f64 {
        let beta = Self::beta(w, a1, a2);
        let r1 = (a1 + a2) * beta - (a1 - a2) * w;
        let [r2, r3] = self.eval(w, a1, a2);
        max_abs(&[r1, r2, r3])
    }

    /// Rows ∂(r₂, r₃)/∂(Ω, α₁, α₂).
    pub(crate) fn jacobian(&self, w: f64, a1: f64, a2: f64) -> [[f64; 3]; 2] {
        let s = a1 + a2;
        let d = a1 - a2;
        let beta = w * d / s;
        let b_w = d / s;
        let b_1 = 2.0 * w * a2 / (s * s);
        let b_2 = -2.0 * w * a1 / (s * s);
        [
            [
                2.0 * beta * b_w + 2.0 * beta + 2.0 * w * b_w,
                2.0 * beta * b_1 - 2.0 * a1 + 2.0 * self.b + 2.0 * w * b_1,
                2.0 * beta * b_2 + 2.0 * w * b_2,
            ],
            [
                2.0 * beta * b_w - 2.0 * beta - 2.0 * w * b_w,
                2.0 * beta * b_1 - 2.0 * w * b_1,
                2.0 * beta * b_2 - 2.0 * a2 + 2.0 * self.b - 2.0 * w * b_2,
            ],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_vanishes_on_linear_ground_state() {
        let c = TrapConfig::reference(0.0, 0.0);
        let r = residual([c.omega1(), c.omega2(), 0.0], &c);
        assert!(max_abs(&r) < 1e-15, "{r:?}");
    }

    #[test]
    fn residual_vanishes_on_zero_rotation_branch() {
        let c = TrapConfig::reference(0.0, 1.0);
        let r = residual([(5.0f64 / 3.0).sqrt() + 1.0, (7.0f64 / 3.0).sqrt() + 1.0, 0.0], &c);
        assert!(max_abs(&r) < 1e-14, "{r:?}");
    }

    #[test]
    fn residual_small_at_tabulated_rotating_linear_point() {
        let c = TrapConfig::reference(0.5, 0.0);
        let r = residual([0.750459, 1.210079, -0.117218], &c);
        assert!(r.iter().all(|v| v.abs() < 1e-5), "{r:?}");
    }

    #[test]
    fn residual_reflection_symmetry() {
        let c = TrapConfig::reference(0.7, 0.4);
        let m = c.with_rotation(-0.7).unwrap();
        let p = [1.3, 0.8, 0.21];
        let r = residual(p, &c);
        let q = residual([p[0], p[1], -p[2]], &m);
        for i in 0..3 {
            assert!((r[i].abs() - q[i].abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn system_rejects_isotropic_and_spatial_traps() {
        assert!(StationaritySystem::new(TrapConfig::planar(1.0, 1.0, 0.2, 0.0).unwrap()).is_err());
        assert!(StationaritySystem::new(TrapConfig::spatial(1.0, 1.5, 2.0, 0.2, 0.0).unwrap()).is_err());
        assert!(StationaritySystem::new(TrapConfig::reference(0.2, 0.0)).is_ok());
    }

    #[test]
    fn reduced_jacobian_matches_finite_differences() {
        let c = TrapConfig::reference(0.0, 0.7);
        let red = Reduced::new(&c);
        let x = [0.9, 1.4, 0.6];
        let j = red.jacobian(x[0], x[1], x[2]);
        let h = 1e-6;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fp = red.eval(xp[0], xp[1], xp[2]);
            let fm = red.eval(xm[0], xm[1], xm[2]);
            for row in 0..2 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                assert!((fd - j[row][k]).abs() < 1e-8, "row {row} col {k}: {fd} vs {}", j[row][k]);
            }
        }
    }

    #[test]
    fn settings_validation() {
        assert!(ContinuationSettings::default().validate().is_ok());
        let bad = ContinuationSettings { omega_max: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ContinuationSettings { dedupe_radius: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let c = TrapConfig::reference(0.0, -3.0);
        assert!((ContinuationSettings::default().alpha_max_for(&c) - 16.0).abs() < 1e-15);
    }
}
