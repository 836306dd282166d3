//! Oblate and prolate spheroidal coordinates in the `(x₁, x₂)` half-plane.

use serde::{Deserialize, Serialize};

use super::{Spheroid, SpheroidKind};
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordKind {
    Oblate,
    Prolate,
}

/// Oblate: `x₁ = c z ρ`, `x₂ = c √((1+z²)(1-ρ²))`.
/// Prolate: `x₁ = c z ρ`, `x₂ = c √((z²-1)(1-ρ²))` with `z ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpheroidalPoint {
    pub z: f64,
    pub rho: f64,
    pub c: f64,
    pub kind: CoordKind,
}

impl SpheroidalPoint {
    /// Coordinates of `(x₁, x₂)` with `x₂ ≥ 0` for focal parameter `c > 0`.
    pub fn from_cartesian(x1: f64, x2: f64, c: f64, kind: CoordKind) -> Result<Self> {
        if !(c > 0.0) {
            return domain(format!("focal parameter must be positive, got {c}"));
        }
        let r = x2.abs();
        match kind {
            CoordKind::Oblate => {
                // z² solves c²u² + βu - x₁² = 0 with β = c² - x₁² - r²; the
                // discriminant root is the product of the focal-ring distances.
                let s = x1.hypot(r + c) * x1.hypot(r - c);
                let beta = (c - r) * (c + r) - x1 * x1;
                let (z, rho) = if beta >= 0.0 {
                    // near the focal disc: both roots in cancellation-free form
                    let z = x1.abs() * (2.0 / (beta + s)).sqrt();
                    let rho = ((beta + s) / 2.0).sqrt() / c;
                    (z, rho.min(1.0).copysign(x1))
                } else {
                    let z = ((s - beta) / 2.0).sqrt() / c;
                    (z, (x1 / (c * z)).clamp(-1.0, 1.0))
                };
                Ok(Self { z, rho, c, kind })
            }
            CoordKind::Prolate => {
                let d_plus = (x1 + c).hypot(r);
                let d_minus = (x1 - c).hypot(r);
                let z = (0.5 * (d_plus + d_minus) / c).max(1.0);
                let rho = (x1 / (c * z)).clamp(-1.0, 1.0);
                Ok(Self { z, rho, c, kind })
            }
        }
    }

    /// Coordinates relative to the confocal family of `s`.
    pub fn from_spheroid(x1: f64, r: f64, s: &Spheroid) -> Result<Self> {
        let kind = match s.kind() {
            SpheroidKind::Oblate => CoordKind::Oblate,
            SpheroidKind::Prolate => CoordKind::Prolate,
            SpheroidKind::Ball => {
                return Err(Error::Degenerate(
                    "spheroidal coordinates are undefined for a ball".into(),
                ))
            }
        };
        Self::from_cartesian(x1, r, s.focal_sq().sqrt(), kind)
    }

    /// `√((1+z²)(1-ρ²))` or `√((z²-1)(1-ρ²))`.
    pub fn transverse_factor(&self) -> f64 {
        let radial = match self.kind {
            CoordKind::Oblate => 1.0 + self.z * self.z,
            CoordKind::Prolate => (self.z - 1.0) * (self.z + 1.0),
        };
        (radial * (1.0 - self.rho) * (1.0 + self.rho))
            .max(0.0)
            .sqrt()
    }

    pub fn to_cartesian(&self) -> (f64, f64) {
        (
            self.c * self.z * self.rho,
            self.c * self.transverse_factor(),
        )
    }
}
