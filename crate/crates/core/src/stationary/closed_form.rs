//! Closed-form stationary branches: no rotation (any b) and no nonlinearity
//! (any Ω outside the gap [ω₁, ω₂]).

use super::{max_abs, residual, StationaritySystem};
use crate::error::{Error, Result};
use crate::model::{StationaryPoint, TrapConfig};

/// Stability region of the linear rotating problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Ω < ω₁.
    Below,
    /// Ω > ω₂.
    Above,
}

impl Region {
    fn name(self) -> &'static str {
        match self {
            Region::Below => "below omega1",
            Region::Above => "above omega2",
        }
    }
}

/// Positive root of α² − 2bα − ω² = 0, i.e. α = ω√(1 + b²/ω²) + b.
fn zero_rotation_width(w: f64, b: f64) -> f64 {
    let root = w * (1.0 + b * b / (w * w)).sqrt();
    if b >= 0.0 {
        root + b
    } else {
        // same value without the cancellation of root + b for b < 0
        w * w / (root - b)
    }
}

/// The unique physical stationary point at Ω = 0 (β = 0).
pub fn solve_zero_rotation(config: &TrapConfig) -> Result<StationaryPoint> {
    StationaritySystem::new(*config)?;
    if config.rotation() != 0.0 {
        return Err(Error::invalid("omega", "closed form applies only without rotation"));
    }
    let a1 = zero_rotation_width(config.omega1(), config.b());
    let a2 = zero_rotation_width(config.omega2(), config.b());
    let r = max_abs(&residual([a1, a2, 0.0], config));
    Ok(StationaryPoint::new(a1, a2, 0.0, 0.0, r))
}

/// Closed-form stationary point of the linear (b = 0) rotating problem.
pub fn solve_linear_rotating(config: &TrapConfig, region: Region) -> Result<StationaryPoint> {
    StationaritySystem::new(*config)?;
    if config.b() != 0.0 {
        return Err(Error::invalid("b", "closed form applies only without nonlinearity"));
    }
    let w = config.rotation_magnitude();
    let (w1, w2) = (config.omega1(), config.omega2());
    if w >= w1 && w <= w2 {
        return Err(Error::OutsideStabilityRegion { omega: config.rotation(), omega1: w1, omega2: w2 });
    }
    let below = w < w1;
    if below != (region == Region::Below) {
        return Err(Error::RegionMismatch { omega: config.rotation(), region: region.name() });
    }
    let p1 = w1 * w1 - w * w;
    let p2 = w2 * w2 - w * w;
    let q = (p1 * p2).sqrt();
    let sign = if below { 1.0 } else { -1.0 };
    let numer = (w1 * w1 + w2 * w2 + 2.0 * w * w + sign * 2.0 * q).sqrt();
    let r21 = (p2 / p1).sqrt();
    let r12 = (p1 / p2).sqrt();
    let a1 = numer / (1.0 + r21);
    let a2 = numer / (1.0 + r12);
    let mut beta = w * (1.0 - r21) / (1.0 + r21);
    if config.is_reflected() {
        beta = -beta;
    }
    let r = max_abs(&residual([a1, a2, beta], config));
    Ok(StationaryPoint::new(a1, a2, beta, config.rotation(), r))
}
