//! Closed ODE system for the ansatz parameters (A, B, ξ, π, N, f) in the
//! co-rotating frame, its integrators and conserved quantities.
//!
//! The shape equations read
//!
//! ```text
//! dA/dt = BA + AB + [Ω̂, A]
//! dB/dt = B² − A² + V̂ + 2bA + [Ω̂, B]
//! ```
//!
//! with Ω̂ᵢⱼ = εᵢⱼₖ Ωᵏ. This commutator orientation is the one whose fixed
//! points satisfy the planar stationarity equations in [`crate::stationary`]
//! and the one reproduced by the lab-frame PDE solver for a rotating trap
//! V̂(t) = R(Ωt) V̂ R(Ωt)ᵀ.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::{gausson_norm, Dim, GaussonState, SymMatrix, TrapConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Classical fixed-step fourth-order Runge–Kutta; fully deterministic.
    Rk4Fixed,
    /// Dormand–Prince 5(4) with PI step-size control.
    Rk45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSettings {
    pub method: Method,
    /// Fixed step for RK4, initial step for RK45.
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    /// Time between recorded samples. For RK4 it is rounded to a whole
    /// number of steps.
    pub sample_every: f64,
    /// Smallest admissible adaptive step.
    pub dt_min: f64,
    /// Integration aborts once the smallest eigenvalue of A drops below this.
    pub pd_floor: f64,
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self {
            method: Method::Rk45Adaptive,
            dt: 1e-3,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            t_end: 10.0,
            sample_every: 0.1,
            dt_min: 1e-14,
            pd_floor: 1e-12,
        }
    }
}

impl OdeSettings {
    pub fn rk4(dt: f64, t_end: f64, sample_every: f64) -> Self {
        Self {
            method: Method::Rk4Fixed,
            dt,
            t_end,
            sample_every,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("t_end", self.t_end)?;
        positive("sample_every", self.sample_every)?;
        positive("dt_min", self.dt_min)?;
        if !(self.pd_floor >= 0.0) {
            return Err(Error::invalid("pd_floor", "must be non-negative"));
        }
        Ok(())
    }
}

/// Time derivative of every ansatz parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub a: SymMatrix,
    pub b: SymMatrix,
    pub xi: Vector3<f64>,
    pub pi: Vector3<f64>,
    pub amplitude: f64,
    pub phase: f64,
}

/// Antisymmetric generator Ω̂ᵢⱼ = εᵢⱼₖ Ωᵏ for rotation about the third axis.
pub fn rotation_generator(config: &TrapConfig) -> Matrix3<f64> {
    let w = config.rotation();
    Matrix3::new(0.0, w, 0.0, -w, 0.0, 0.0, 0.0, 0.0, 0.0)
}

fn potential3(config: &TrapConfig) -> Matrix3<f64> {
    let [v1, v2, v3] = config.potential_diagonal();
    Matrix3::from_diagonal(&Vector3::new(v1, v2, v3))
}

fn shape_rhs(a: &Matrix3<f64>, b: &Matrix3<f64>, gen: &Matrix3<f64>, v: &Matrix3<f64>, nl: f64) -> (Matrix3<f64>, Matrix3<f64>) {
    let da = b * a + a * b + (gen * a - a * gen);
    let db = b * b - a * a + v + a * (2.0 * nl) + (gen * b - b * gen);
    (da, db)
}

/// (dA/dt, dB/dt) for arbitrary symmetric A, B (no definiteness check).
pub(crate) fn shape_velocity(a: &Matrix3<f64>, b: &Matrix3<f64>, config: &TrapConfig) -> (Matrix3<f64>, Matrix3<f64>) {
    shape_rhs(a, b, &rotation_generator(config), &potential3(config), config.b())
}

/// Right-hand side of the ansatz flow.
pub fn rhs(state: &GaussonState, config: &TrapConfig) -> Derivative {
    let dim = state.dim();
    let a = state.a().to_matrix3();
    let b = state.b().to_matrix3();
    let v = potential3(config);
    let (da, db) = shape_rhs(&a, &b, &rotation_generator(config), &v, config.b());
    let w = config.angular_velocity();
    let (xi, pi) = (state.xi(), state.pi());
    Derivative {
        a: SymMatrix::from_upper(dim, &da),
        b: SymMatrix::from_upper(dim, &db),
        xi: pi - w.cross(xi),
        pi: -(v * xi) - w.cross(pi),
        amplitude: 0.5 * state.b().trace() * state.amplitude(),
        phase: -0.5 * (state.a().trace() + pi.dot(pi) - xi.dot(&(v * xi))),
    }
}

/// Layout of the flat state vector: packed A, packed B, ξ, π, N, f.
#[derive(Debug, Clone, Copy)]
struct Layout {
    dim: Dim,
}

impl Layout {
    fn len(&self) -> usize {
        2 * self.dim.packed_len() + 2 * self.dim.n() + 2
    }

    fn pack(&self, s: &GaussonState) -> Vec<f64> {
        let n = self.dim.n();
        let mut y = Vec::with_capacity(self.len());
        y.extend_from_slice(s.a().packed());
        y.extend_from_slice(s.b().packed());
        y.extend(s.xi().iter().take(n));
        y.extend(s.pi().iter().take(n));
        y.push(s.amplitude());
        y.push(s.phase());
        y
    }

    fn vec3(&self, y: &[f64]) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        for (i, x) in y.iter().enumerate() {
            v[i] = *x;
        }
        v
    }

    fn unpack(&self, y: &[f64], t: f64) -> Result<GaussonState> {
        let p = self.dim.packed_len();
        let n = self.dim.n();
        GaussonState::new(
            SymMatrix::from_packed(self.dim, &y[..p]),
            SymMatrix::from_packed(self.dim, &y[p..2 * p]),
            self.vec3(&y[2 * p..2 * p + n]),
            self.vec3(&y[2 * p + n..2 * p + 2 * n]),
            y[2 * p + 2 * n],
            y[2 * p + 2 * n + 1],
            t,
        )
    }

    /// Flat right-hand side. The A and B components are computed from the A
    /// and B entries alone, so the shape sequence of a fixed-step run does not
    /// depend on the center-of-mass data at all.
    fn eval(&self, config: &TrapConfig, gen: &Matrix3<f64>, v: &Matrix3<f64>, y: &[f64], dy: &mut [f64]) {
        let p = self.dim.packed_len();
        let n = self.dim.n();
        let a_s = SymMatrix::from_packed(self.dim, &y[..p]);
        let b_s = SymMatrix::from_packed(self.dim, &y[p..2 * p]);
        let (da, db) = shape_rhs(&a_s.to_matrix3(), &b_s.to_matrix3(), gen, v, config.b());
        dy[..p].copy_from_slice(SymMatrix::from_upper(self.dim, &da).packed());
        dy[p..2 * p].copy_from_slice(SymMatrix::from_upper(self.dim, &db).packed());

        let xi = self.vec3(&y[2 * p..2 * p + n]);
        let pi = self.vec3(&y[2 * p + n..2 * p + 2 * n]);
        let w = config.angular_velocity();
        let dxi = pi - w.cross(&xi);
        let dpi = -(v * xi) - w.cross(&pi);
        for i in 0..n {
            dy[2 * p + i] = dxi[i];
            dy[2 * p + n + i] = dpi[i];
        }
        let amp = y[2 * p + 2 * n];
        dy[2 * p + 2 * n] = 0.5 * b_s.trace() * amp;
        dy[2 * p + 2 * n + 1] = -0.5 * (a_s.trace() + pi.dot(&pi) - xi.dot(&(v * xi)));
    }
}

/// Per-sample diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub norm: f64,
    pub energy: f64,
    /// Smallest eigenvalue of A, the positive-definiteness margin.
    pub min_eig_a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<GaussonState>,
    pub diagnostics: Vec<Diagnostics>,
}

impl Trajectory {
    fn push(&mut self, s: GaussonState, config: &TrapConfig) -> Result<()> {
        self.diagnostics.push(Diagnostics {
            norm: gausson_norm(&s)?,
            energy: energy(&s, config),
            min_eig_a: s.a().min_eigenvalue(),
        });
        self.samples.push(s);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&GaussonState> {
        self.samples.last()
    }

    /// Exponential growth rate of the packet width, fitted by least squares to
    /// −½ ln(min eig A) over the second half of the samples.
    pub fn width_growth_rate(&self) -> Option<f64> {
        let half = self.len() / 2;
        let pts: Vec<(f64, f64)> = self.samples[half..]
            .iter()
            .zip(&self.diagnostics[half..])
            .map(|(s, d)| (s.t(), -0.5 * d.min_eig_a.ln()))
            .collect();
        if pts.len() < 3 {
            return None;
        }
        let m = pts.len() as f64;
        let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
        let (mt, my) = (st / m, sy / m);
        let (num, den) = pts
            .iter()
            .fold((0.0, 0.0), |(n, d), (t, y)| (n + (t - mt) * (y - my), d + (t - mt) * (t - mt)));
        (den > 0.0).then(|| num / den)
    }
}

/// Energy per particle in the rotating frame,
/// ⟨½p² + ½r·V̂·r − b log|ψ|² − Ω·M⟩, from the Gaussian moment formulas.
pub fn energy(state: &GaussonState, config: &TrapConfig) -> f64 {
    let d = state.dim().n() as f64;
    let a = state.a();
    let a_inv = match a.inverse() {
        Some(m) => m.to_matrix3(),
        None => return f64::NAN,
    };
    let am = a.to_matrix3();
    let bm = state.b().to_matrix3();
    let v = potential3(config);
    let (xi, pi) = (state.xi(), state.pi());

    let kinetic = 0.25 * am.trace() + 0.25 * (bm * a_inv * bm).trace() + 0.5 * pi.dot(pi);
    let potential = 0.5 * xi.dot(&(v * xi)) + 0.25 * (v * a_inv).trace();
    let log_density = (state.amplitude() * state.amplitude()).ln() - 0.5 * d;
    // ⟨r × p⟩_z = (ξ × π)_z + (BΣ)₁₂ − (BΣ)₂₁ with Σ = A⁻¹/2
    let b_sigma = bm * a_inv * 0.5;
    let lz = xi.cross(pi).z + b_sigma[(0, 1)] - b_sigma[(1, 0)];
    kinetic + potential - config.b() * log_density - config.rotation() * lz
}

fn check_state(layout: &Layout, y: &[f64], t: f64, floor: f64) -> Result<GaussonState> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    let a = SymMatrix::from_packed(layout.dim, &y[..layout.dim.packed_len()]);
    let min_eig = a.min_eigenvalue();
    if !(min_eig >= floor) || min_eig <= 0.0 {
        return Err(Error::PositiveDefinitenessLost { t, min_eig });
    }
    layout.unpack(y, t)
}

/// Integrates the flow and returns the sampled trajectory.
pub fn integrate(initial: &GaussonState, config: &TrapConfig, settings: &OdeSettings) -> Result<Trajectory> {
    match integrate_partial(initial, config, settings)? {
        (traj, None) => Ok(traj),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`integrate`], but a breakdown during the run returns the samples
/// recorded so far together with the error. The outer `Result` only fails for
/// invalid inputs.
pub fn integrate_partial(
    initial: &GaussonState,
    config: &TrapConfig,
    settings: &OdeSettings,
) -> Result<(Trajectory, Option<Error>)> {
    settings.validate()?;
    if initial.dim() != config.dim() {
        return Err(Error::invalid("dim", "state and trap dimensions differ"));
    }
    let layout = Layout { dim: initial.dim() };
    let mut traj = Trajectory {
        samples: Vec::new(),
        diagnostics: Vec::new(),
    };
    traj.push(*initial, config)?;
    let gen = rotation_generator(config);
    let v = potential3(config);
    let f = |y: &[f64], dy: &mut [f64]| layout.eval(config, &gen, &v, y, dy);
    let outcome = match settings.method {
        Method::Rk4Fixed => run_rk4(&layout, initial, config, settings, &f, &mut traj),
        Method::Rk45Adaptive => run_dopri(&layout, initial, config, settings, &f, &mut traj),
    };
    Ok((traj, outcome.err()))
}

fn run_rk4(
    layout: &Layout,
    initial: &GaussonState,
    config: &TrapConfig,
    settings: &OdeSettings,
    f: &dyn Fn(&[f64], &mut [f64]),
    traj: &mut Trajectory,
) -> Result<()> {
    let t0 = initial.t();
    let dt = settings.dt;
    let n_steps = ((settings.t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let stride = ((settings.sample_every / dt).round() as usize).max(1);
    let len = layout.len();
    let mut y = layout.pack(initial);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for step in 1..=n_steps {
        let t_prev = t0 + (step - 1) as f64 * dt;
        let t = if step == n_steps { t0 + settings.t_end } else { t0 + step as f64 * dt };
        let h = t - t_prev;
        f(&y, &mut k1);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(&tmp, &mut k2);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(&tmp, &mut k3);
        for i in 0..len {
            tmp[i] = y[i] + h * k3[i];
        }
        f(&tmp, &mut k4);
        for i in 0..len {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let state = check_state(layout, &y, t, settings.pd_floor)?;
        if step % stride == 0 || step == n_steps {
            traj.push(state, config)?;
        }
    }
    Ok(())
}

// Dormand–Prince 5(4) tableau; the flow is autonomous so the nodes cᵢ are unused
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(y: &[f64], h: f64, k: &[Vec<f64>], coeffs: &[(usize, f64)], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = y[i];
        for &(j, c) in coeffs {
            acc += h * c * k[j][i];
        }
        *o = acc;
    }
}

fn run_dopri(
    layout: &Layout,
    initial: &GaussonState,
    config: &TrapConfig,
    settings: &OdeSettings,
    f: &dyn Fn(&[f64], &mut [f64]),
    traj: &mut Trajectory,
) -> Result<()> {
    const SAFETY: f64 = 0.9;
    const FAC_MIN: f64 = 0.2;
    const FAC_MAX: f64 = 5.0;
    const ALPHA: f64 = 0.7 / 5.0;
    const BETA: f64 = 0.4 / 5.0;

    let len = layout.len();
    let t0 = initial.t();
    let t_end = t0 + settings.t_end;
    let n_samples = (settings.t_end / settings.sample_every - 1e-9).ceil().max(1.0) as usize;
    let sample_time = |j: usize| if j >= n_samples { t_end } else { t0 + j as f64 * settings.sample_every };

    let mut y = layout.pack(initial);
    let mut t = t0;
    let mut h = settings.dt.min(settings.t_end);
    let mut err_prev: f64 = 1e-4;
    let mut next_sample = 1;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; len]; 7];
    let mut tmp = vec![0.0; len];
    let mut y_new = vec![0.0; len];
    f(&y, &mut k[0]);

    while next_sample <= n_samples {
        let target = sample_time(next_sample);
        let remaining = target - t;
        let clipped = h >= remaining;
        let step = if clipped { remaining } else { h };
        if step < settings.dt_min && !clipped {
            return Err(Error::StepUnderflow { t, dt: step });
        }

        combine(&y, step, &k, &[(0, A21)], &mut tmp);
        f(&tmp, &mut k[1]);
        combine(&y, step, &k, &[(0, A31), (1, A32)], &mut tmp);
        f(&tmp, &mut k[2]);
        combine(&y, step, &k, &[(0, A41), (1, A42), (2, A43)], &mut tmp);
        f(&tmp, &mut k[3]);
        combine(&y, step, &k, &[(0, A51), (1, A52), (2, A53), (3, A54)], &mut tmp);
        f(&tmp, &mut k[4]);
        combine(&y, step, &k, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], &mut tmp);
        f(&tmp, &mut k[5]);
        combine(&y, step, &k, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)], &mut y_new);
        f(&y_new, &mut k[6]);
        let mut err_sq = 0.0;
        for i in 0..len {
            let e = step
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = settings.abs_tol + settings.rel_tol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / len as f64).sqrt();

        if !err.is_finite() {
            h = step * FAC_MIN;
            if h < settings.dt_min {
                return Err(Error::NonFinite { t });
            }
            continue;
        }
        if err <= 1.0 {
            t = if clipped { target } else { t + step };
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
            let state = check_state(layout, &y, t, settings.pd_floor)?;
            let fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-ALPHA) * err_prev.powf(BETA)).clamp(FAC_MIN, FAC_MAX)
            };
            err_prev = err.max(1e-4);
            // a clipped step says nothing about the natural step length
            h = if clipped { h.max(step * fac) } else { step * fac };
            if clipped {
                traj.push(state, config)?;
                next_sample += 1;
            }
        } else {
            h = step * (SAFETY * err.powf(-0.2)).max(FAC_MIN);
            if h < settings.dt_min {
                return Err(Error::StepUnderflow { t, dt: h });
            }
        }
    }
    Ok(())
}
