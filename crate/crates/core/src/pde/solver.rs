//! Strang splitting: half linear step (kinetic, plus the exact rotation in
//! the co-rotating frame), full potential + nonlinear phase, half linear step.

use num_complex::Complex64;
use rayon::prelude::*;

use super::fft::Fft2;
use super::fit::gradient;
use super::{Field2D, Frame, Grid2D, LogNls, PdeSettings};
use crate::error::{Error, Result};
use crate::model::{rotate_frame, GaussonState, TrapConfig};
use crate::ode::{integrate, OdeSettings};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeDiagnostics {
    pub t: f64,
    pub norm: f64,
    /// Co-rotating energy per particle, ⟨½p² + ½r·V̂(t)·r − b log|ψ|² − Ω L_z⟩.
    pub energy: f64,
    pub center: [f64; 2],
    /// (Σxx, Σyy, Σxy) of |ψ|².
    pub covariance: [f64; 3],
    pub fidelity_vs_gausson: Option<f64>,
    /// Grid cells where |ψ|² is below the logarithm floor.
    pub floor_cells: usize,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub diagnostics: Vec<PdeDiagnostics>,
    pub last: Field2D,
}

pub struct SplitStepSolver {
    grid: Grid2D,
    model: LogNls,
    settings: PdeSettings,
    fft: Fft2,
    xs: Vec<f64>,
    ks: Vec<f64>,
    kinetic_half: Vec<Complex64>,
    kinetic_full: Vec<Complex64>,
}

fn kinetic_table(ks: &[f64], tau: f64) -> Vec<Complex64> {
    let n = ks.len();
    (0..n * n)
        .map(|idx| {
            let (j, i) = (idx / n, idx % n);
            Complex64::from_polar(1.0, -0.5 * (ks[i] * ks[i] + ks[j] * ks[j]) * tau)
        })
        .collect()
}

fn check_finite(values: &[Complex64], t: f64) -> Result<()> {
    if values.par_iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite { t });
    }
    Ok(())
}

impl SplitStepSolver {
    pub fn new(grid: Grid2D, model: LogNls, settings: PdeSettings) -> Result<Self> {
        settings.validate()?;
        let ks = grid.wavenumbers();
        Ok(Self {
            grid,
            model,
            settings,
            fft: Fft2::new(grid.n()),
            xs: grid.coordinates(),
            kinetic_half: kinetic_table(&ks, 0.5 * settings.dt),
            kinetic_full: kinetic_table(&ks, settings.dt),
            ks,
        })
    }

    pub fn from_config(grid: Grid2D, config: &TrapConfig, settings: PdeSettings) -> Result<Self> {
        Self::new(grid, LogNls::from_config(config)?, settings)
    }

    pub fn settings(&self) -> &PdeSettings {
        &self.settings
    }

    fn check_grid(&self, field: &Field2D) -> Result<()> {
        if field.grid != self.grid {
            return Err(Error::invalid("grid", "field and solver grids differ"));
        }
        Ok(())
    }

    /// ψ(x, y) → ψ(x, y + c·x).
    fn shear_y(&self, values: &mut [Complex64], c: f64) {
        let (xs, ks) = (&self.xs, &self.ks);
        self.fft.row_multiplier(values, |i, k| Complex64::from_polar(1.0, ks[k] * c * xs[i]));
    }

    /// ψ(x, y) → ψ(x + c·y, y).
    fn shear_x(&mut self, values: &mut Vec<Complex64>, c: f64) {
        self.fft.transpose(values);
        self.shear_y(values, c);
        self.fft.transpose(values);
    }

    /// Rotates the field counterclockwise by `theta`: ψ(r) → ψ(R(θ)ᵀ r).
    pub(crate) fn rotate(&mut self, values: &mut Vec<Complex64>, theta: f64) {
        if theta == 0.0 {
            return;
        }
        let a = (0.5 * theta).tan();
        self.shear_x(values, a);
        self.shear_y(values, -theta.sin());
        self.shear_x(values, a);
    }

    /// exp(−iτ(K − Ω L_z)) with τ = dt/2 or dt.
    fn linear(&mut self, field: &mut Field2D, full: bool) -> Result<()> {
        let tau = if full { self.settings.dt } else { 0.5 * self.settings.dt };
        if self.settings.frame == Frame::Rotating {
            // exp(iΩτL_z) turns the field by −Ωτ
            let theta = -self.model.rotation * tau;
            self.rotate(&mut field.values, theta);
        }
        self.fft.forward_t(&mut field.values);
        let table = if full { &self.kinetic_full } else { &self.kinetic_half };
        field.values.par_iter_mut().zip(table.par_iter()).for_each(|(v, p)| *v *= p);
        self.fft.inverse_t(&mut field.values);
        check_finite(&field.values, field.t)
    }

    /// Potential and nonlinear phase over a full step, with V̂ at `t_mid`.
    fn nonlinear(&mut self, field: &mut Field2D, t_mid: f64) -> Result<()> {
        let n = self.grid.n();
        let [vxx, vyy, vxy] = self.model.potential_at(t_mid, self.settings.frame);
        let (b, eps, dt) = (self.model.b, self.settings.log_epsilon, self.settings.dt);
        let xs = &self.xs;
        field.values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let x = xs[i];
            for (j, v) in row.iter_mut().enumerate() {
                let y = xs[j];
                let rho = v.norm_sqr();
                let mut u = 0.5 * (vxx * x * x + 2.0 * vxy * x * y + vyy * y * y);
                if b != 0.0 {
                    if rho == 0.0 && eps == 0.0 {
                        continue;
                    }
                    u -= b * rho.max(eps).ln();
                }
                *v *= Complex64::from_polar(1.0, -dt * u);
            }
        });
        check_finite(&field.values, t_mid)
    }

    /// One Strang step of length dt.
    pub fn step(&mut self, field: &mut Field2D) -> Result<()> {
        self.check_grid(field)?;
        let t = field.t;
        self.linear(field, false)?;
        self.nonlinear(field, t + 0.5 * self.settings.dt)?;
        self.linear(field, false)?;
        field.t = t + self.settings.dt;
        Ok(())
    }

    /// `m` consecutive steps with adjacent half linear steps fused.
    fn advance(&mut self, field: &mut Field2D, m: usize) -> Result<()> {
        let dt = self.settings.dt;
        let t0 = field.t;
        self.linear(field, false)?;
        for s in 0..m {
            self.nonlinear(field, t0 + (s as f64 + 0.5) * dt)?;
            field.t = t0 + (s + 1) as f64 * dt;
            self.linear(field, s + 1 < m)?;
        }
        Ok(())
    }

    pub fn diagnostics(&mut self, field: &Field2D, reference: Option<&Field2D>) -> PdeDiagnostics {
        let n = self.grid.n();
        let (dx_psi, dy_psi) = gradient(&mut self.fft, field);
        let [vxx, vyy, vxy] = self.model.potential_at(field.t, self.settings.frame);
        let (b, eps) = (self.model.b, self.settings.log_epsilon);
        let xs = &self.xs;

        let mut m0 = 0.0;
        let mut m1 = [0.0; 2];
        let mut m2 = [0.0; 3];
        let (mut kin, mut pot, mut nl, mut lz) = (0.0, 0.0, 0.0, 0.0);
        let mut floor_cells = 0;
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in xs.iter().enumerate() {
                let k = i * n + j;
                let psi = field.values[k];
                let rho = psi.norm_sqr();
                m0 += rho;
                m1[0] += rho * x;
                m1[1] += rho * y;
                m2[0] += rho * x * x;
                m2[1] += rho * y * y;
                m2[2] += rho * x * y;
                kin += 0.5 * (dx_psi[k].norm_sqr() + dy_psi[k].norm_sqr());
                pot += 0.5 * (vxx * x * x + 2.0 * vxy * x * y + vyy * y * y) * rho;
                if rho < eps {
                    floor_cells += 1;
                }
                if rho > 0.0 || eps > 0.0 {
                    nl -= b * rho * rho.max(eps).ln();
                }
                lz += (psi.conj() * (dy_psi[k] * x - dx_psi[k] * y)).im;
            }
        }
        let dx = self.grid.dx();
        let center = [m1[0] / m0, m1[1] / m0];
        let covariance = [
            m2[0] / m0 - center[0] * center[0],
            m2[1] / m0 - center[1] * center[1],
            m2[2] / m0 - center[0] * center[1],
        ];
        PdeDiagnostics {
            t: field.t,
            norm: m0 * dx * dx,
            energy: (kin + pot + nl - self.model.rotation * lz) / m0,
            center,
            covariance,
            fidelity_vs_gausson: reference.map(|r| r.fidelity(field)),
            floor_cells,
        }
    }

    /// Runs to `t_end`, recording diagnostics at t = 0, every sample
    /// interval and the final time. `reference(t)` supplies the Gausson
    /// prediction in the solver's frame; `on_sample` sees every sampled field.
    pub fn evolve_with(
        &mut self,
        initial: &Field2D,
        mut reference: Option<&mut dyn FnMut(f64) -> Result<GaussonState>>,
        mut on_sample: impl FnMut(&Field2D, &PdeDiagnostics) -> Result<()>,
    ) -> Result<Evolution> {
        self.check_grid(initial)?;
        let mut field = initial.clone();
        let total = self.settings.n_steps();
        let stride = self.settings.sample_stride();
        let mut diagnostics = Vec::new();
        let mut done = 0;
        loop {
            let reference_field = match reference.as_mut() {
                Some(f) => Some(Field2D::from_state(self.grid, &f(field.t)?)?),
                None => None,
            };
            let d = self.diagnostics(&field, reference_field.as_ref());
            on_sample(&field, &d)?;
            diagnostics.push(d);
            if done == total {
                break;
            }
            let m = stride.min(total - done);
            self.advance(&mut field, m)?;
            done += m;
        }
        Ok(Evolution { diagnostics, last: field })
    }

    pub fn evolve(&mut self, initial: &Field2D) -> Result<Evolution> {
        self.evolve_with(initial, None, |_, _| Ok(()))
    }
}

/// Gausson prediction for a run that starts from `initial` (a co-rotating
/// ansatz state at t = 0): the ansatz flow is integrated to t and, for the
/// lab frame, rotated by Ωt.
pub fn gausson_reference(
    config: TrapConfig,
    initial: GaussonState,
    frame: Frame,
) -> impl FnMut(f64) -> Result<GaussonState> {
    let mut current = initial;
    move |t: f64| {
        let dt = t - current.t();
        if dt < 0.0 {
            return Err(Error::invalid("t", "reference times must be non-decreasing"));
        }
        if dt > 0.0 {
            let settings = OdeSettings {
                t_end: dt,
                sample_every: dt,
                ..OdeSettings::default()
            };
            let traj = integrate(&current, &config, &settings)?;
            current = *traj.last().expect("trajectory has samples");
        }
        Ok(match frame {
            Frame::Rotating => current,
            Frame::Lab => rotate_frame(&current, config.rotation() * t),
        })
    }
}

/// Evolves and returns the sampled fields.
pub fn evolve(initial: &Field2D, config: &TrapConfig, settings: &PdeSettings) -> Result<Vec<Field2D>> {
    let mut solver = SplitStepSolver::from_config(initial.grid, config, *settings)?;
    let mut out = Vec::new();
    solver.evolve_with(initial, None, |f, _| {
        out.push(f.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Terminal-state errors for several step sizes against a run at a quarter
/// of the smallest step.
#[derive(Debug, Clone, PartialEq)]
pub struct DtStudy {
    pub dts: Vec<f64>,
    /// ‖ψ_dt − ψ_ref‖ / ‖ψ_ref‖ at t_end.
    pub errors: Vec<f64>,
    /// log(e_k / e_{k+1}) / log(dt_k / dt_{k+1}).
    pub pairwise_orders: Vec<f64>,
    /// Least-squares slope of log e against log dt.
    pub observed_order: f64,
}

pub fn dt_study(initial: &Field2D, model: LogNls, base: PdeSettings, dts: &[f64]) -> Result<DtStudy> {
    if dts.len() < 2 {
        return Err(Error::invalid("dts", "need at least two step sizes"));
    }
    let run = |dt: f64| -> Result<Field2D> {
        let settings = PdeSettings { dt, sample_every: base.t_end.max(dt), ..base };
        let mut solver = SplitStepSolver::new(initial.grid, model, settings)?;
        Ok(solver.evolve(initial)?.last)
    };
    let dt_ref = dts.iter().copied().fold(f64::INFINITY, f64::min) / 4.0;
    let reference = run(dt_ref)?;
    let ref_norm = reference.norm().sqrt();
    let errors = dts
        .par_iter()
        .map(|&dt| {
            let f = run(dt)?;
            let dx = f.grid.dx();
            let diff: f64 = f.values.iter().zip(&reference.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * dx * dx;
            Ok(diff.sqrt() / ref_norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    let pairwise_orders = dts
        .windows(2)
        .zip(errors.windows(2))
        .map(|(d, e)| (e[0] / e[1]).ln() / (d[0] / d[1]).ln())
        .collect();
    let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(DtStudy {
        dts: dts.to_vec(),
        errors,
        pairwise_orders,
        observed_order: num / den,
    })
}
