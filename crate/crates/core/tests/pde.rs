use gausson::model::{rotate_frame, rotation_matrix, SymMatrix};
use gausson::nalgebra::{Matrix2, Vector3};
use gausson::num_complex::Complex64;
use gausson::pde::{
    dt_study, evolve, fit_gaussian, gausson_reference, read_snapshot, write_snapshot, Field2D, Frame, Grid2D, LogNls,
    PdeSettings, SplitStepSolver,
};
use gausson::stationary::{find_all_roots, ContinuationSettings};
use gausson::{GaussonState, TrapConfig};

fn wobbling() -> GaussonState {
    GaussonState::new(
        SymMatrix::planar(1.6, 1.1, 0.2),
        SymMatrix::planar(0.1, -0.2, 0.15),
        Vector3::new(0.4, -0.3, 0.0),
        Vector3::new(0.2, 0.1, 0.0),
        1.0,
        0.0,
        0.0,
    )
    .unwrap()
}

fn localized_root(omega: f64, b: f64) -> GaussonState {
    let roots = find_all_roots(&TrapConfig::reference(omega, b), &ContinuationSettings::default()).unwrap();
    let p = roots.iter().max_by(|x, y| (x.alpha1 * x.alpha2).total_cmp(&(y.alpha1 * y.alpha2))).unwrap();
    p.to_state().unwrap()
}

fn sym2(m: &SymMatrix) -> Matrix2<f64> {
    Matrix2::new(m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1))
}

#[test]
fn norm_is_conserved_to_roundoff() {
    let grid = Grid2D::new(64, 8.0).unwrap();
    let config = TrapConfig::reference(0.9, 1.0);
    let init = Field2D::from_state(grid, &wobbling()).unwrap();
    let settings = PdeSettings { dt: 1e-3, t_end: 10.0, sample_every: 1.0, ..Default::default() };
    let mut solver = SplitStepSolver::from_config(grid, &config, settings).unwrap();
    let run = solver.evolve(&init).unwrap();
    let n0 = run.diagnostics[0].norm;
    for d in &run.diagnostics {
        assert!((d.norm / n0 - 1.0).abs() < 1e-10, "t = {}: {:e}", d.t, d.norm / n0 - 1.0);
    }
}

#[test]
fn energy_drift_is_small_for_stationary_gausson() {
    let grid = Grid2D::new(64, 8.0).unwrap();
    for frame in [Frame::Lab, Frame::Rotating] {
        let config = TrapConfig::reference(0.9, 1.0);
        let init = Field2D::from_state(grid, &localized_root(0.9, 1.0)).unwrap();
        let settings = PdeSettings { dt: 1e-3, t_end: 10.0, sample_every: 1.0, frame, ..Default::default() };
        let mut solver = SplitStepSolver::from_config(grid, &config, settings).unwrap();
        let run = solver.evolve(&init).unwrap();
        let e0 = run.diagnostics[0].energy;
        let ode = gausson::ode::energy(&localized_root(0.9, 1.0), &config);
        assert!((e0 - ode).abs() < 1e-10 * ode.abs(), "{e0} vs {ode}");
        for d in &run.diagnostics {
            assert!(((d.energy - e0) / e0).abs() < 1e-6, "{frame:?}, t = {}: {} vs {e0}", d.t, d.energy);
        }
    }
}

#[test]
fn gausson_does_not_spread() {
    let grid = Grid2D::new(128, 10.0).unwrap();
    let config = TrapConfig::reference(0.0, 1.0);
    let state = localized_root(0.0, 1.0);
    let init = Field2D::from_state(grid, &state).unwrap();
    let settings = PdeSettings { dt: 1e-3, t_end: 1.0, sample_every: 0.25, ..Default::default() };
    let mut solver = SplitStepSolver::from_config(grid, &config, settings).unwrap();
    let mut reference = gausson_reference(config, state, Frame::Lab);
    let run = solver.evolve_with(&init, Some(&mut reference), |_, _| Ok(())).unwrap();
    for d in &run.diagnostics {
        assert!(d.fidelity_vs_gausson.unwrap() > 1.0 - 1e-10, "t = {}", d.t);
    }
    let fit = fit_gaussian(&run.last).unwrap();
    assert!((fit.a.get(0, 0) / state.a().get(0, 0) - 1.0).abs() < 1e-6);
    assert!((fit.a.get(1, 1) / state.a().get(1, 1) - 1.0).abs() < 1e-6);
    assert!(fit.a.get(0, 1).abs() < 1e-8 && fit.b.packed().iter().all(|v| v.abs() < 1e-6));
}

#[test]
fn moving_packet_tracks_the_ansatz_flow() {
    let grid = Grid2D::new(128, 10.0).unwrap();
    for frame in [Frame::Lab, Frame::Rotating] {
        let config = TrapConfig::reference(0.6, -1.0);
        let init = Field2D::from_state(grid, &wobbling()).unwrap();
        let settings = PdeSettings { dt: 1e-3, t_end: 1.0, sample_every: 0.25, frame, ..Default::default() };
        let mut solver = SplitStepSolver::from_config(grid, &config, settings).unwrap();
        let mut reference = gausson_reference(config, wobbling(), frame);
        let run = solver.evolve_with(&init, Some(&mut reference), |_, _| Ok(())).unwrap();
        for d in &run.diagnostics {
            assert!(d.fidelity_vs_gausson.unwrap() > 1.0 - 1e-8, "{frame:?}, t = {}", d.t);
        }
    }
}

#[test]
fn lab_and_rotating_frames_agree() {
    let grid = Grid2D::new(128, 10.0).unwrap();
    let config = TrapConfig::reference(0.9, 1.0);
    let t_end = 1.0;
    let last = |frame| {
        let init = Field2D::from_state(grid, &wobbling()).unwrap();
        let settings = PdeSettings { dt: 1e-3, t_end, sample_every: t_end, frame, ..Default::default() };
        SplitStepSolver::from_config(grid, &config, settings).unwrap().evolve(&init).unwrap().last
    };
    let lab = fit_gaussian(&last(Frame::Lab)).unwrap();
    let rot = fit_gaussian(&last(Frame::Rotating)).unwrap();
    let r = rotation_matrix(config.rotation() * t_end);
    let r2 = Matrix2::new(r[(0, 0)], r[(0, 1)], r[(1, 0)], r[(1, 1)]);
    let expect = r2 * sym2(&rot.covariance) * r2.transpose();
    assert!((sym2(&lab.covariance) - expect).amax() < 1e-8, "{:?} vs {expect:?}", lab.covariance);
    let c = r2 * gausson::nalgebra::Vector2::new(rot.center[0], rot.center[1]);
    assert!((lab.center[0] - c.x).abs() < 1e-8 && (lab.center[1] - c.y).abs() < 1e-8);
    assert!(lab.fidelity > 0.999 && rot.fidelity > 0.999);
}

#[test]
fn free_packet_spreads_by_the_textbook_law() {
    // |ψ|² ∝ exp(−x²/(2σ²)) with σ² = σ₀² + t²/(4σ₀²)
    let grid = Grid2D::new(128, 16.0).unwrap();
    let a = 1.0;
    let sigma0_sq = 0.5 / a;
    let init = Field2D::from_state(grid, &GaussonState::centered(SymMatrix::diagonal2(a, a), SymMatrix::zeros(gausson::model::Dim::Two)).unwrap()).unwrap();
    let settings = PdeSettings { dt: 1e-2, t_end: 2.0, sample_every: 0.5, ..Default::default() };
    let mut solver = SplitStepSolver::new(grid, LogNls::free(0.0), settings).unwrap();
    let run = solver.evolve(&init).unwrap();
    for d in &run.diagnostics {
        let expect = sigma0_sq + d.t * d.t / (4.0 * sigma0_sq);
        assert!((d.covariance[0] - expect).abs() < 1e-9, "t = {}: {} vs {expect}", d.t, d.covariance[0]);
        assert!((d.covariance[1] - expect).abs() < 1e-9);
        assert!(d.covariance[2].abs() < 1e-12);
    }
}

#[test]
fn splitting_is_second_order() {
    let grid = Grid2D::new(64, 8.0).unwrap();
    let init = Field2D::from_state(grid, &wobbling()).unwrap();
    let model = LogNls::from_config(&TrapConfig::reference(0.5, 1.0)).unwrap();
    let base = PdeSettings { t_end: 0.2, ..Default::default() };
    let study = dt_study(&init, model, base, &[2e-3, 1e-3, 5e-4]).unwrap();
    assert!((study.observed_order - 2.0).abs() < 0.2, "{study:?}");
    for o in &study.pairwise_orders {
        assert!((o - 2.0).abs() < 0.2, "{study:?}");
    }
}

#[test]
fn fit_recovers_sampled_gausson() {
    let grid = Grid2D::new(128, 10.0).unwrap();
    let s = wobbling();
    let fit = fit_gaussian(&Field2D::from_state(grid, &s).unwrap()).unwrap();
    assert!(fit.fidelity > 1.0 - 1e-10);
    let sigma = s.a().inverse().unwrap().scale(0.5);
    for (x, y) in fit.covariance.packed().iter().zip(sigma.packed()) {
        assert!((x - y).abs() < 1e-8);
    }
    for (x, y) in fit.a.packed().iter().zip(s.a().packed()).chain(fit.b.packed().iter().zip(s.b().packed())) {
        assert!((x - y).abs() < 1e-8);
    }
    assert!((fit.center[0] - 0.4).abs() < 1e-10 && (fit.center[1] + 0.3).abs() < 1e-10);
    assert!((fit.momentum[0] - 0.2).abs() < 1e-8 && (fit.momentum[1] - 0.1).abs() < 1e-8);
}

#[test]
fn fit_ignores_global_phase() {
    let grid = Grid2D::new(64, 8.0).unwrap();
    let f = Field2D::from_state(grid, &wobbling()).unwrap();
    let mut g = f.clone();
    let phase = Complex64::from_polar(1.0, 2.1);
    g.values.iter_mut().for_each(|v| *v *= phase);
    let (p, q) = (fit_gaussian(&f).unwrap(), fit_gaussian(&g).unwrap());
    for (x, y) in p.a.packed().iter().zip(q.a.packed()).chain(p.b.packed().iter().zip(q.b.packed())) {
        assert!((x - y).abs() < 1e-12);
    }
    assert!((p.fidelity - q.fidelity).abs() < 1e-12);
}

#[test]
fn two_humps_are_not_a_gaussian() {
    let grid = Grid2D::new(128, 12.0).unwrap();
    // |ψ|² of each hump has σ = 1/√2, so a separation of 4σ is 2√2
    let sep = 4.0 * 0.5f64.sqrt();
    let field = Field2D::from_fn(grid, 0.0, |x, y| {
        let hump = |c: f64| (-0.5 * ((x - c) * (x - c) + y * y)).exp();
        Complex64::new(hump(-0.5 * sep) + hump(0.5 * sep), 0.0)
    })
    .unwrap();
    let fit = fit_gaussian(&field).unwrap();
    assert!(fit.fidelity < 0.95, "fidelity {}", fit.fidelity);
}

#[test]
fn snapshot_round_trip() {
    let grid = Grid2D::new(32, 6.0).unwrap();
    let f = Field2D::from_state(grid, &rotate_frame(&wobbling(), 0.3)).unwrap();
    let f = Field2D { t: 1.25, ..f };
    let path = std::env::temp_dir().join(format!("gausson-snapshot-{}.bin", std::process::id()));
    write_snapshot(&path, &f).unwrap();
    let g = read_snapshot(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(g.grid, f.grid);
    assert_eq!(g.t, f.t);
    for (x, y) in f.values.iter().zip(&g.values) {
        assert!((x - y).norm() < 1e-7 * (1.0 + x.norm()));
    }
}

#[test]
fn evolve_returns_every_sample() {
    let grid = Grid2D::new(32, 6.0).unwrap();
    let init = Field2D::from_state(grid, &wobbling()).unwrap();
    let out = evolve(&init, &TrapConfig::reference(0.3, 0.0), &PdeSettings { dt: 1e-2, t_end: 0.5, sample_every: 0.1, ..Default::default() }).unwrap();
    assert_eq!(out.len(), 6);
    for (k, f) in out.iter().enumerate() {
        assert!((f.t - 0.1 * k as f64).abs() < 1e-12);
    }
}
