//! Multi-start Newton search for every stationary point at a fixed rotation rate.

use super::{ContinuationSettings, Reduced, StationaritySystem};
use crate::error::Result;
use crate::model::{StationaryPoint, TrapConfig};

/// Newton iteration on the reduced 2×2 system at fixed |Ω|, with backtracking
/// that keeps both widths positive. Returns (α₁, α₂) once the full residual
/// drops below `tol`.
pub fn newton_at_fixed_rotation(
    config: &TrapConfig,
    start: (f64, f64),
    tol: f64,
    max_iter: usize,
) -> Option<(f64, f64)> {
    newton(&Reduced::new(config), config.rotation_magnitude(), start, tol, max_iter)
}

pub(crate) fn newton(red: &Reduced, w: f64, start: (f64, f64), tol: f64, max_iter: usize) -> Option<(f64, f64)> {
    let (mut a1, mut a2) = start;
    if !(a1 > 0.0 && a2 > 0.0) {
        return None;
    }
    let norm = |f: [f64; 2]| f[0].abs().max(f[1].abs());
    let mut f = red.eval(w, a1, a2);
    for _ in 0..max_iter {
        if red.residual(w, a1, a2) < tol {
            // one polishing step, kept only if it does not hurt
            if let Some((p1, p2)) = newton_step(red, w, a1, a2, f) {
                if p1 > 0.0 && p2 > 0.0 && red.residual(w, p1, p2) <= red.residual(w, a1, a2) {
                    return Some((p1, p2));
                }
            }
            return Some((a1, a2));
        }
        let (n1, n2) = newton_step(red, w, a1, a2, f)?;
        let (d1, d2) = (n1 - a1, n2 - a2);
        let f0 = norm(f);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let (t1, t2) = (a1 + lambda * d1, a2 + lambda * d2);
            if t1 > 0.0 && t2 > 0.0 {
                let ft = red.eval(w, t1, t2);
                if norm(ft) < f0 || lambda < 1e-3 {
                    a1 = t1;
                    a2 = t2;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted || !(a1.is_finite() && a2.is_finite()) {
            return None;
        }
    }
    (red.residual(w, a1, a2) < tol).then_some((a1, a2))
}

fn newton_step(red: &Reduced, w: f64, a1: f64, a2: f64, f: [f64; 2]) -> Option<(f64, f64)> {
    let j = red.jacobian(w, a1, a2);
    let (m11, m12, m21, m22) = (j[0][1], j[0][2], j[1][1], j[1][2]);
    let det = m11 * m22 - m12 * m21;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let d1 = (m22 * f[0] - m12 * f[1]) / det;
    let d2 = (-m21 * f[0] + m11 * f[1]) / det;
    Some((a1 - d1, a2 - d2))
}

/// Node positions of the start lattice, graded quadratically so that roots
/// close to the α = 0 edge are resolved.
fn lattice(alpha_max: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| alpha_max * ((k as f64 + 0.5) / (n as f64 + 0.5)).powi(2))
        .collect()
}

/// Every distinct stationary point with α₁, α₂ > 0 at the configuration's
/// rotation rate, sorted by (α₁, α₂). An empty result is legitimate.
pub fn find_all_roots(config: &TrapConfig, settings: &ContinuationSettings) -> Result<Vec<StationaryPoint>> {
    StationaritySystem::new(*config)?;
    settings.validate()?;
    let red = Reduced::new(config);
    let w = config.rotation_magnitude();
    let nodes = lattice(settings.alpha_max_for(config), settings.n_grid);
    let m = nodes.len();

    // sign pattern of (r₂, r₃) at each node; bit 0/1: r₂ ≤ 0 / ≥ 0, bit 2/3: r₃
    let mut signs = vec![0u8; m * m];
    for (i, &a1) in nodes.iter().enumerate() {
        for (j, &a2) in nodes.iter().enumerate() {
            let [r2, r3] = red.eval(w, a1, a2);
            signs[i * m + j] = u8::from(r2 <= 0.0) | u8::from(r2 >= 0.0) << 1 | u8::from(r3 <= 0.0) << 2 | u8::from(r3 >= 0.0) << 3;
        }
    }

    let mut found: Vec<StationaryPoint> = Vec::new();
    for i in 0..m - 1 {
        for j in 0..m - 1 {
            let corners = signs[i * m + j] | signs[(i + 1) * m + j] | signs[i * m + j + 1] | signs[(i + 1) * m + j + 1];
            if corners != 0b1111 {
                continue;
            }
            let start = (0.5 * (nodes[i] + nodes[i + 1]), 0.5 * (nodes[j] + nodes[j + 1]));
            if let Some((a1, a2)) = newton(&red, w, start, settings.newton_tol, settings.newton_max_iter) {
                let beta = Reduced::beta(config.rotation(), a1, a2);
                let res = red.residual(w, a1, a2);
                found.push(StationaryPoint::new(a1, a2, beta, config.rotation(), res));
            }
        }
    }
    Ok(dedupe(found, settings.dedupe_radius))
}

/// Sorts by (α₁, α₂) and merges points closer than `radius`, keeping the one
/// with the smaller residual.
pub(crate) fn dedupe(mut pts: Vec<StationaryPoint>, radius: f64) -> Vec<StationaryPoint> {
    pts.sort_by(|p, q| p.alpha1.total_cmp(&q.alpha1).then(p.alpha2.total_cmp(&q.alpha2)));
    let mut out: Vec<StationaryPoint> = Vec::new();
    for p in pts {
        match out.iter_mut().find(|q| q.distance(&p) < radius) {
            Some(q) if p.residual < q.residual => *q = p,
            Some(_) => {}
            None => out.push(p),
        }
    }
    out
}
