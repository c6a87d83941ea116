//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use gausson::num_complex::Complex64;
use gausson::GaussonState;

pub const W1SQ: f64 = 2.0 / 3.0;
pub const W2SQ: f64 = 4.0 / 3.0;

pub fn w1() -> f64 {
    W1SQ.sqrt()
}

pub fn w2() -> f64 {
    W2SQ.sqrt()
}

/// The three stationarity equations, written out again here so the oracle
/// shares no code with the library.
pub fn stationarity(v1: f64, v2: f64, omega: f64, b: f64, p: [f64; 3]) -> [f64; 3] {
    let [a1, a2, beta] = p;
    [
        (a1 + a2) * beta - (a1 - a2) * omega,
        beta * beta - a1 * a1 + v1 + 2.0 * b * a1 + 2.0 * beta * omega,
        beta * beta - a2 * a2 + v2 + 2.0 * b * a2 - 2.0 * beta * omega,
    ]
}

/// With s = α₁ + α₂ and d = α₁ − α₂, the first equation gives β = Ωd/s and
/// the difference of the other two gives d·(2b + 4Ω²/s − s) = ω₂² − ω₁².
/// What is left is one scalar equation in s.
fn s_equation(v1: f64, v2: f64, omega: f64, b: f64, s: f64) -> (f64, [f64; 3]) {
    let d = (v2 - v1) / (2.0 * b + 4.0 * omega * omega / s - s);
    let beta = omega * d / s;
    let g = 2.0 * beta * beta - 0.5 * (s * s + d * d) + v1 + v2 + 2.0 * b * s;
    (g, [0.5 * (s + d), 0.5 * (s - d), beta])
}

/// Brute-force root census: scan s on a uniform lattice, bisect every sign
/// change, and keep the physical ones (α₁, α₂ > 0, small full residual).
/// Poles of d(s) also change sign; they are rejected by the residual test.
pub fn lattice_roots(v1: f64, v2: f64, omega: f64, b: f64, s_max: f64, cells: usize) -> Vec<[f64; 3]> {
    let h = s_max / cells as f64;
    let g = |s: f64| s_equation(v1, v2, omega, b, s).0;
    let mut roots: Vec<[f64; 3]> = Vec::new();
    let mut lo = 0.5 * h;
    let mut g_lo = g(lo);
    for k in 1..=cells {
        let hi = (k as f64 + 0.5) * h;
        let g_hi = g(hi);
        if g_lo == 0.0 || (g_lo < 0.0) != (g_hi < 0.0) {
            let (mut a, mut c, mut ga) = (lo, hi, g_lo);
            for _ in 0..200 {
                let m = 0.5 * (a + c);
                if m <= a || m >= c {
                    break;
                }
                let gm = g(m);
                if (gm < 0.0) == (ga < 0.0) {
                    a = m;
                    ga = gm;
                } else {
                    c = m;
                }
            }
            let s = 0.5 * (a + c);
            let (_, p) = s_equation(v1, v2, omega, b, s);
            let r = stationarity(v1, v2, omega, b, p);
            let scale = 1.0 + p.iter().fold(0.0f64, |m, v| m.max(v * v));
            if p[0] > 0.0 && p[1] > 0.0 && r.iter().all(|v| v.abs() < 1e-9 * scale) {
                roots.push(p);
            }
        }
        lo = hi;
        g_lo = g_hi;
    }
    roots.sort_by(|x, y| x[0].total_cmp(&y[0]));
    roots
}

/// Trapezoid sums on the square [−half, half]² with n cells per axis; for
/// rapidly decaying integrands this converges spectrally.
pub fn grid(half: f64, n: usize) -> (Vec<f64>, f64) {
    let h = 2.0 * half / n as f64;
    ((0..=n).map(|i| -half + i as f64 * h).collect(), h)
}

pub fn quadrature_norm(s: &GaussonState, half: f64, n: usize) -> f64 {
    let (xs, h) = grid(half, n);
    let mut sum = 0.0;
    for &x in &xs {
        for &y in &xs {
            sum += s.psi(&[x, y]).norm_sqr();
        }
    }
    sum * h * h
}

/// ⟨½|∇ψ|² + ½r·V̂·r|ψ|² − b log|ψ|²·|ψ|² − Ω ψ*L_zψ⟩ / ⟨|ψ|²⟩ with the
/// gradient from central differences of the sampled wavefunction.
pub fn quadrature_energy(s: &GaussonState, v: [f64; 3], omega: f64, b: f64, half: f64, n: usize) -> f64 {
    let (xs, _) = grid(half, n);
    let e = 1e-5;
    let (mut num, mut mass) = (0.0, 0.0);
    for &x in &xs {
        for &y in &xs {
            let psi = s.psi(&[x, y]);
            let rho = psi.norm_sqr();
            if rho < 1e-300 {
                continue;
            }
            let dx = (s.psi(&[x + e, y]) - s.psi(&[x - e, y])) / (2.0 * e);
            let dy = (s.psi(&[x, y + e]) - s.psi(&[x, y - e])) / (2.0 * e);
            let kinetic = 0.5 * (dx.norm_sqr() + dy.norm_sqr());
            let trap = 0.5 * (v[0] * x * x + v[1] * y * y + 2.0 * v[2] * x * y) * rho;
            let lz = (psi.conj() * Complex64::new(0.0, -1.0) * (x * dy - y * dx)).re;
            num += kinetic + trap - b * rho.ln() * rho - omega * lz;
            mass += rho;
        }
    }
    num / mass
}
