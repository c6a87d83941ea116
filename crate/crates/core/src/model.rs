//! Trap geometry, the Gaussian ansatz state and explicit evaluation of the
//! wave function it describes.
//!
//! Units are ħ = m = 1. The trap potential is ½ r·V·r with
//! V = Diag(ω₁², ω₂², ω₃²) in the co-rotating frame, and rotation is always
//! about the third principal axis.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Spatial dimension of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn n(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Number of independent entries of a symmetric matrix.
    pub fn packed_len(self) -> usize {
        match self {
            Dim::Two => 3,
            Dim::Three => 6,
        }
    }
}

/// Squared trap frequencies of the reference trap used for the rotation scans.
pub const REFERENCE_OMEGA1_SQ: f64 = 2.0 / 3.0;
pub const REFERENCE_OMEGA2_SQ: f64 = 4.0 / 3.0;

/// Physical parameters: trap frequencies, rotation rate and nonlinearity.
///
/// A negative rotation rate is stored as its magnitude plus a reflection
/// flag. The stationarity problem is invariant under (Ω, β) → (−Ω, −β), so
/// solvers work with |Ω| and flip β on output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapConfig {
    omega1: f64,
    omega2: f64,
    omega3: Option<f64>,
    rotation: f64,
    reflected: bool,
    b: f64,
}

fn check_frequency(param: &'static str, w: f64) -> Result<()> {
    if !w.is_finite() || w <= 0.0 {
        return Err(Error::invalid(param, format!("must be a positive finite frequency, got {w}")));
    }
    Ok(())
}

impl TrapConfig {
    /// Two-dimensional trap with frequencies `omega1 <= omega2` rotating at
    /// `rotation` about the axis normal to the plane.
    pub fn planar(omega1: f64, omega2: f64, rotation: f64, b: f64) -> Result<Self> {
        Self::build(omega1, omega2, None, rotation, b)
    }

    /// Three-dimensional trap; the rotation axis is the third principal axis.
    pub fn spatial(omega1: f64, omega2: f64, omega3: f64, rotation: f64, b: f64) -> Result<Self> {
        check_frequency("omega3", omega3)?;
        Self::build(omega1, omega2, Some(omega3), rotation, b)
    }

    /// The anisotropic trap ω₁² = 2/3, ω₂² = 4/3 used for the rotation scans.
    pub fn reference(rotation: f64, b: f64) -> Self {
        Self::planar(REFERENCE_OMEGA1_SQ.sqrt(), REFERENCE_OMEGA2_SQ.sqrt(), rotation, b)
            .expect("reference trap parameters are valid")
    }

    fn build(omega1: f64, omega2: f64, omega3: Option<f64>, rotation: f64, b: f64) -> Result<Self> {
        check_frequency("omega1", omega1)?;
        check_frequency("omega2", omega2)?;
        if omega1 > omega2 {
            return Err(Error::invalid(
                "omega1",
                format!("trap frequencies must be ordered omega1 <= omega2, got {omega1} > {omega2}"),
            ));
        }
        if !rotation.is_finite() {
            return Err(Error::invalid("omega", "rotation rate must be finite"));
        }
        if !b.is_finite() {
            return Err(Error::invalid("b", "nonlinearity must be finite"));
        }
        Ok(Self {
            omega1,
            omega2,
            omega3,
            rotation: rotation.abs(),
            reflected: rotation < 0.0,
            b,
        })
    }

    /// Same trap and nonlinearity at a different rotation rate.
    pub fn with_rotation(&self, rotation: f64) -> Result<Self> {
        Self::build(self.omega1, self.omega2, self.omega3, rotation, self.b)
    }

    pub fn with_nonlinearity(&self, b: f64) -> Result<Self> {
        let mut c = Self::build(self.omega1, self.omega2, self.omega3, self.rotation(), b)?;
        c.reflected = self.reflected;
        Ok(c)
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    pub fn omega2(&self) -> f64 {
        self.omega2
    }

    pub fn omega3(&self) -> Option<f64> {
        self.omega3
    }

    /// Signed rotation rate Ω (component of the angular velocity along the third axis).
    pub fn rotation(&self) -> f64 {
        if self.reflected {
            -self.rotation
        } else {
            self.rotation
        }
    }

    /// |Ω|, the normalized rotation rate.
    pub fn rotation_magnitude(&self) -> f64 {
        self.rotation
    }

    /// True when the configuration was built with a negative rotation rate.
    pub fn is_reflected(&self) -> bool {
        self.reflected
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> Dim {
        if self.omega3.is_some() {
            Dim::Three
        } else {
            Dim::Two
        }
    }

    /// Diagonal of V̂ (squared frequencies); the third entry is zero in 2D.
    pub fn potential_diagonal(&self) -> [f64; 3] {
        [
            self.omega1 * self.omega1,
            self.omega2 * self.omega2,
            self.omega3.map_or(0.0, |w| w * w),
        ]
    }

    /// V̂ as a symmetric matrix of the trap's dimension.
    pub fn potential(&self) -> SymMatrix {
        let [v1, v2, v3] = self.potential_diagonal();
        match self.dim() {
            Dim::Two => SymMatrix::diagonal2(v1, v2),
            Dim::Three => SymMatrix::spatial(v1, v2, v3, 0.0, 0.0, 0.0),
        }
    }

    /// Angular-velocity vector (0, 0, Ω).
    pub fn angular_velocity(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.rotation())
    }
}

// packed storage order: 2D [11, 22, 12]; 3D [11, 22, 33, 12, 13, 23]
const IDX2: [[usize; 2]; 2] = [[0, 2], [2, 1]];
const IDX3: [[usize; 3]; 3] = [[0, 3, 4], [3, 1, 5], [4, 5, 2]];

/// Real symmetric 2×2 or 3×3 matrix stored by its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    dim: Dim,
    m: [f64; 6],
}

impl SymMatrix {
    pub fn zeros(dim: Dim) -> Self {
        Self { dim, m: [0.0; 6] }
    }

    pub fn identity(dim: Dim) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim.n() {
            s.m[i] = 1.0;
        }
        s
    }

    pub fn planar(m11: f64, m22: f64, m12: f64) -> Self {
        Self {
            dim: Dim::Two,
            m: [m11, m22, m12, 0.0, 0.0, 0.0],
        }
    }

    pub fn diagonal2(m11: f64, m22: f64) -> Self {
        Self::planar(m11, m22, 0.0)
    }

    /// 2×2 matrix with zero diagonal and `m12` off the diagonal.
    pub fn off_diagonal2(m12: f64) -> Self {
        Self::planar(0.0, 0.0, m12)
    }

    pub fn spatial(m11: f64, m22: f64, m33: f64, m12: f64, m13: f64, m23: f64) -> Self {
        Self {
            dim: Dim::Three,
            m: [m11, m22, m33, m12, m13, m23],
        }
    }

    /// Packed entries: `[11, 22, 12]` in 2D, `[11, 22, 33, 12, 13, 23]` in 3D.
    pub fn from_packed(dim: Dim, packed: &[f64]) -> Self {
        assert_eq!(packed.len(), dim.packed_len(), "packed length mismatch");
        let mut m = [0.0; 6];
        m[..packed.len()].copy_from_slice(packed);
        Self { dim, m }
    }

    pub fn packed(&self) -> &[f64] {
        &self.m[..self.dim.packed_len()]
    }

    /// Reads the upper triangle of a (zero-padded) 3×3 matrix.
    pub fn from_upper(dim: Dim, full: &Matrix3<f64>) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim.n() {
            for j in i..dim.n() {
                s.m[s.index(i, j)] = full[(i, j)];
            }
        }
        s
    }

    /// Embeds into a 3×3 matrix, zero-padding the third row and column in 2D.
    pub fn to_matrix3(&self) -> Matrix3<f64> {
        let mut out = Matrix3::zeros();
        for i in 0..self.dim.n() {
            for j in 0..self.dim.n() {
                out[(i, j)] = self.get(i, j);
            }
        }
        out
    }

    fn index(&self, i: usize, j: usize) -> usize {
        match self.dim {
            Dim::Two => IDX2[i][j],
            Dim::Three => IDX3[i][j],
        }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[self.index(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim.n()).map(|i| self.m[i]).sum()
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            Dim::Two => self.m[0] * self.m[1] - self.m[2] * self.m[2],
            Dim::Three => self.to_matrix3().determinant(),
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = match self.dim {
            Dim::Two => {
                let (a, c, b) = (self.m[0], self.m[1], self.m[2]);
                let mean = 0.5 * (a + c);
                let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                vec![mean - r, mean + r]
            }
            Dim::Three => SymmetricEigen::new(self.to_matrix3()).eigenvalues.iter().copied().collect(),
        };
        ev.sort_by(|x, y| x.total_cmp(y));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue() > 0.0
    }

    pub fn inverse(&self) -> Option<Self> {
        let inv = match self.dim {
            Dim::Two => {
                let det = self.det();
                if det == 0.0 || !det.is_finite() {
                    return None;
                }
                return Some(Self::planar(self.m[1] / det, self.m[0] / det, -self.m[2] / det));
            }
            Dim::Three => self.to_matrix3().try_inverse()?,
        };
        Some(Self::from_upper(self.dim, &inv))
    }

    /// r·M·r for a vector of the matrix's dimension.
    pub fn quad_form(&self, r: &[f64]) -> f64 {
        let n = self.dim.n();
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.get(i, i) * r[i] * r[i];
            for j in (i + 1)..n {
                acc += 2.0 * self.get(i, j) * r[i] * r[j];
            }
        }
        acc
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.m.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.is_finite())
    }
}

/// Complete Gaussian ansatz
/// ψ(r) = N e^{if} exp(−½ r̃·(A + iB)·r̃ + iπ·r), r̃ = r − ξ.
///
/// Vectors are stored as 3-vectors; in 2D the third component is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussonState {
    a: SymMatrix,
    b: SymMatrix,
    xi: Vector3<f64>,
    pi: Vector3<f64>,
    amplitude: f64,
    phase: f64,
    t: f64,
}

impl GaussonState {
    pub fn new(
        a: SymMatrix,
        b: SymMatrix,
        xi: Vector3<f64>,
        pi: Vector3<f64>,
        amplitude: f64,
        phase: f64,
        t: f64,
    ) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::invalid("B", "A and B must have the same dimension"));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid("A", "shape matrices must be finite"));
        }
        let min_eig = a.min_eigenvalue();
        if min_eig <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eig });
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::invalid("N", format!("normalization must be positive, got {amplitude}")));
        }
        if !(phase.is_finite() && t.is_finite()) {
            return Err(Error::invalid("f", "phase and time must be finite"));
        }
        if xi.iter().chain(pi.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("xi", "center-of-mass vectors must be finite"));
        }
        let (mut xi, mut pi) = (xi, pi);
        if a.dim() == Dim::Two {
            xi.z = 0.0;
            pi.z = 0.0;
        }
        Ok(Self {
            a,
            b,
            xi,
            pi,
            amplitude,
            phase,
            t,
        })
    }

    /// Centered packet at rest: ξ = π = 0, N = 1, f = 0, t = 0.
    pub fn centered(a: SymMatrix, b: SymMatrix) -> Result<Self> {
        Self::new(a, b, Vector3::zeros(), Vector3::zeros(), 1.0, 0.0, 0.0)
    }

    pub fn with_center(&self, xi: Vector3<f64>, pi: Vector3<f64>) -> Result<Self> {
        Self::new(self.a, self.b, xi, pi, self.amplitude, self.phase, self.t)
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self> {
        Self::new(self.a, self.b, self.xi, self.pi, amplitude, self.phase, self.t)
    }

    pub fn with_phase(&self, phase: f64) -> Result<Self> {
        Self::new(self.a, self.b, self.xi, self.pi, self.amplitude, phase, self.t)
    }

    pub fn with_time(&self, t: f64) -> Result<Self> {
        Self::new(self.a, self.b, self.xi, self.pi, self.amplitude, self.phase, t)
    }

    pub fn dim(&self) -> Dim {
        self.a.dim()
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }

    pub fn b(&self) -> &SymMatrix {
        &self.b
    }

    pub fn xi(&self) -> &Vector3<f64> {
        &self.xi
    }

    pub fn pi(&self) -> &Vector3<f64> {
        &self.pi
    }

    /// Normalization amplitude N.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Global phase f.
    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// ψ at a single point; `r` must have the state's dimension.
    pub fn psi(&self, r: &[f64]) -> Complex64 {
        let n = self.dim().n();
        debug_assert_eq!(r.len(), n);
        let mut rt = [0.0; 3];
        let mut pr = 0.0;
        for i in 0..n {
            rt[i] = r[i] - self.xi[i];
            pr += self.pi[i] * r[i];
        }
        let re = -0.5 * self.a.quad_form(&rt[..n]);
        let im = -0.5 * self.b.quad_form(&rt[..n]) + pr + self.phase;
        self.amplitude * Complex64::from_polar(re.exp(), im)
    }
}

/// ψ evaluated at each point of `points` (each of the state's dimension).
pub fn evaluate_wavefunction<P: AsRef<[f64]>>(state: &GaussonState, points: &[P]) -> Result<Vec<Complex64>> {
    let n = state.dim().n();
    points
        .iter()
        .map(|p| {
            let r = p.as_ref();
            if r.len() != n {
                return Err(Error::invalid("points", format!("expected {n} coordinates, got {}", r.len())));
            }
            Ok(state.psi(r))
        })
        .collect()
}

/// ∫|ψ|² = N² π^{d/2} det(A)^{−1/2}.
pub fn gausson_norm(state: &GaussonState) -> Result<f64> {
    let det = state.a.det();
    if !(det > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eig: state.a.min_eigenvalue() });
    }
    let d = state.dim().n() as f64;
    Ok(state.amplitude * state.amplitude * PI.powf(0.5 * d) / det.sqrt())
}

/// Rotation by `angle` about the third axis.
pub fn rotation_matrix(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotates the packet by `angle` about the third axis: A → R A Rᵀ,
/// B → R B Rᵀ, ξ → Rξ, π → Rπ. A co-rotating state at time t maps to the
/// lab frame with `angle = Ω t`.
pub fn rotate_frame(state: &GaussonState, angle: f64) -> GaussonState {
    let r = rotation_matrix(angle);
    let conj = |m: &SymMatrix| SymMatrix::from_upper(m.dim(), &(r * m.to_matrix3() * r.transpose()));
    GaussonState {
        a: conj(&state.a),
        b: conj(&state.b),
        xi: r * state.xi,
        pi: r * state.pi,
        ..*state
    }
}

/// Spectral stability verdict of a linearized flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        })
    }
}

impl std::str::FromStr for Stability {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stable" => Ok(Stability::Stable),
            "unstable" => Ok(Stability::Unstable),
            "marginal" => Ok(Stability::Marginal),
            other => Err(Error::Parse(format!("unknown stability label `{other}`"))),
        }
    }
}

/// Stationary Gausson of the planar problem: A = Diag(α₁, α₂), B with
/// off-diagonal β, at rotation rate Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPoint {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    pub omega: f64,
    /// Max absolute residual of the three stationarity equations.
    pub residual: f64,
    pub stability: Option<Stability>,
    pub branch_id: Option<usize>,
}

impl StationaryPoint {
    pub fn new(alpha1: f64, alpha2: f64, beta: f64, omega: f64, residual: f64) -> Self {
        Self {
            alpha1,
            alpha2,
            beta,
            omega,
            residual,
            stability: None,
            branch_id: None,
        }
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.alpha1, self.alpha2, self.beta]
    }

    /// Euclidean distance in (α₁, α₂, β).
    pub fn distance(&self, other: &StationaryPoint) -> f64 {
        let (p, q) = (self.coords(), other.coords());
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    }

    /// The centered ansatz state with A = Diag(α₁, α₂), B = offdiag(β), N = 1.
    pub fn to_state(&self) -> Result<GaussonState> {
        GaussonState::centered(
            SymMatrix::diagonal2(self.alpha1, self.alpha2),
            SymMatrix::off_diagonal2(self.beta),
        )
    }
}
