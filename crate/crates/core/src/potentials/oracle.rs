//! Brute-force convolution `(W * μ)(x)` for the uniform measure on a spheroid.
//!
//! Both backends integrate along rays from `x`. With `y = x + ρω` and a
//! kernel of the form `|z|^{2-n} (c₀ + c₁ ω₁²)`, the radial integral is
//! elementary:
//!
//! ```text
//! ∫ W(x - y) dy over Ω = ∫_{S^{n-1}} (c₀ + c₁ ω₁²) (ρ₊² - ρ₋²)/2 dω
//! ```
//!
//! where `[ρ₋, ρ₊]` is the chord of the ray inside `Ω` (`ρ₋ = 0` for an
//! interior `x`). The singularity of the kernel at `y = x` disappears, so
//! what remains is a bounded integrand on the sphere.

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Spheroid;
use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, Estimate, QuadConfig};
use crate::roots::{brent, BrentOptions};
use crate::special_functions::gamma_half;

/// `W(z) = |z|^{2-n} (coulomb + axial · z₁²/|z|²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelWeights {
    pub coulomb: f64,
    pub axial: f64,
}

impl KernelWeights {
    pub fn anisotropic(alpha: f64) -> Self {
        Self {
            coulomb: 1.0,
            axial: alpha,
        }
    }

    /// The kernel of `Ψ`.
    pub fn axial_only() -> Self {
        Self {
            coulomb: 0.0,
            axial: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleBackend {
    MonteCarlo,
    /// Iterated adaptive quadrature over the sphere; `n = 3` only.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleBudget {
    pub backend: OracleBackend,
    /// Number of ray evaluations for Monte Carlo.
    pub samples: usize,
    pub seed: u64,
    /// Absolute target for the quadrature backend.
    pub tol: f64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            backend: OracleBackend::MonteCarlo,
            samples: 1_000_000,
            seed: 42,
            tol: 1e-10,
        }
    }
}

impl OracleBudget {
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            backend: OracleBackend::MonteCarlo,
            samples,
            seed,
            ..Self::default()
        }
    }

    pub fn quadrature(tol: f64) -> Self {
        Self {
            backend: OracleBackend::Quadrature,
            tol,
            ..Self::default()
        }
    }
}

/// Estimate with a standard error (Monte Carlo) or an error bound (quadrature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub value: f64,
    pub error: f64,
    pub backend: OracleBackend,
    /// Set when the quadrature error estimate exceeds the requested tolerance.
    pub warning: Option<String>,
}

/// `(W_α * μ)(x)`.
pub fn convolution_oracle(
    x: &[f64],
    s: &Spheroid,
    alpha: f64,
    budget: &OracleBudget,
) -> Result<OracleEstimate> {
    convolution_oracle_weighted(x, s, KernelWeights::anisotropic(alpha), budget)
}

pub fn convolution_oracle_weighted(
    x: &[f64],
    s: &Spheroid,
    weights: KernelWeights,
    budget: &OracleBudget,
) -> Result<OracleEstimate> {
    let (x1, r) = s.axial(x);
    let ray = Ray::new(s, x1, r);
    let scale = s.n as f64 / (s.a * s.b.powi(s.n as i32 - 1));
    let (mean, err, warning) = match budget.backend {
        OracleBackend::MonteCarlo => {
            if budget.samples < 8 {
                return domain("Monte Carlo oracle needs at least 8 samples");
            }
            let cap = Cap::for_point(s, x1, r, ray.c <= 0.0);
            let (m, e) = monte_carlo(&ray, &cap, s.n, weights, budget.samples, budget.seed);
            (m, e, None)
        }
        OracleBackend::Quadrature => {
            if s.n != 3 {
                return domain(format!(
                    "quadrature oracle supports n = 3 only, got n = {}",
                    s.n
                ));
            }
            let (m, e) = sphere_quadrature(&ray, weights, budget.tol / scale)?;
            let warning = (e * scale > budget.tol).then(|| {
                format!(
                    "error estimate {:.3e} exceeds requested {:.3e}",
                    e * scale,
                    budget.tol
                )
            });
            (m, e, warning)
        }
    };
    Ok(OracleEstimate {
        value: scale * mean,
        error: scale * err,
        backend: budget.backend,
        warning,
    })
}

/// Chord geometry for rays from `(x₁, r, 0, …)`.
pub(crate) struct Ray {
    inv_a2: f64,
    inv_b2: f64,
    x1: f64,
    r: f64,
    /// `Q(x) - 1`.
    c: f64,
}

impl Ray {
    pub(crate) fn new(s: &Spheroid, x1: f64, r: f64) -> Self {
        Self {
            inv_a2: 1.0 / (s.a * s.a),
            inv_b2: 1.0 / (s.b * s.b),
            x1,
            r,
            c: s.quadratic_form(x1, r) - 1.0,
        }
    }

    fn quad_a(&self, w1: f64) -> f64 {
        w1 * w1 * self.inv_a2 + (1.0 - w1 * w1) * self.inv_b2
    }

    /// `(ρ₊² - ρ₋²)/2` for the direction with components `w1` along `x₁`
    /// and `w2` along the transverse direction of `x`.
    pub(crate) fn half_chord_sq(&self, w1: f64, w2: f64) -> f64 {
        let a = self.quad_a(w1);
        let b = self.x1 * w1 * self.inv_a2 + self.r * w2 * self.inv_b2;
        let d = b * b - a * self.c;
        if self.c <= 0.0 {
            let sd = d.max(0.0).sqrt();
            let rp = if b <= 0.0 {
                (sd - b) / a
            } else {
                -self.c / (b + sd)
            };
            0.5 * rp * rp
        } else if d > 0.0 && b < 0.0 {
            -2.0 * b * d.sqrt() / (a * a)
        } else {
            0.0
        }
    }
}

/// Marginal density of `ω₁` for `ω` uniform on `S^{n-1}`.
fn first_coordinate_density(n: usize) -> impl Fn(f64) -> f64 {
    let beta = gamma_half(1) * gamma_half(n as u32 - 1) / gamma_half(n as u32);
    let e = (n as f64 - 3.0) / 2.0;
    move |u: f64| (1.0 - u * u).max(0.0).powf(e) / beta
}

const BLOCK: usize = 1024;

/// Directions are drawn as `ω = u p + √(1-u²) η` around a pole `p` in the
/// `(x₁, r)` plane, with `u ∈ [u_min, 1]`. For exterior points `p` points
/// at the origin and the cap covers the circumscribed ball, so directions
/// that cannot hit the support are never sampled.
struct Cap {
    p1: f64,
    p2: f64,
    u_min: f64,
}

impl Cap {
    fn for_point(s: &Spheroid, x1: f64, r: f64, interior: bool) -> Self {
        let d = x1.hypot(r);
        let radius = s.a.max(s.b);
        if interior || d <= radius {
            return Self {
                p1: 1.0,
                p2: 0.0,
                u_min: -1.0,
            };
        }
        let sin2 = (radius / d).powi(2);
        Self {
            p1: -x1 / d,
            p2: -r / d,
            u_min: (1.0 - sin2).sqrt(),
        }
    }
}

/// Stratified in `u = ω·p`, two draws per stratum, each antithetic in the
/// in-plane component of `η`.
fn monte_carlo(
    ray: &Ray,
    cap: &Cap,
    n: usize,
    w: KernelWeights,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let strata = (samples / 4).max(1);
    let density = first_coordinate_density(n);
    let width = 1.0 - cap.u_min;
    let blocks = strata.div_ceil(BLOCK);
    let eval = |u: f64, eta: f64| {
        let st = (1.0 - u * u).max(0.0).sqrt();
        let w1 = u * cap.p1 - st * eta * cap.p2;
        let w2 = u * cap.p2 + st * eta * cap.p1;
        (w.coulomb + w.axial * w1 * w1) * ray.half_chord_sq(w1, w2)
    };
    let partial: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(blk as u64);
            let mut normals = vec![0.0; n - 1];
            let mut sum = 0.0;
            let mut var = 0.0;
            let lo = blk * BLOCK;
            let hi = (lo + BLOCK).min(strata);
            for k in lo..hi {
                let mut draw = || {
                    let u = cap.u_min + width * (k as f64 + rng.gen::<f64>()) / strata as f64;
                    // in-plane coordinate of a uniform point on S^{n-2}
                    for v in normals.iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    let norm = normals.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let eta = normals[0] / norm;
                    width * density(u) * 0.5 * (eval(u, eta) + eval(u, -eta))
                };
                let y1 = draw();
                let y2 = draw();
                sum += 0.5 * (y1 + y2);
                // variance of the stratum mean from two draws
                var += 0.25 * (y1 - y2) * (y1 - y2);
            }
            (sum, var)
        })
        .collect();
    let (sum, var) = partial
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let s = strata as f64;
    (sum / s, var.sqrt() / s)
}

/// Keeps a finite partial result when the subdivision budget runs out; the
/// caller reports the enlarged error estimate instead of failing.
fn integrate_lenient<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> Result<Estimate> {
    match integrate(f, a, b, cfg) {
        Err(Error::Quadrature { value, error, .. }) if value.is_finite() => {
            Ok(Estimate { value, error })
        }
        other => other,
    }
}

/// Smooth map of `[0, 1]` onto `[lo, hi]` with vanishing derivative at both ends.
fn smoothstep(lo: f64, hi: f64, v: f64) -> (f64, f64) {
    let len = hi - lo;
    (
        lo + len * v * v * (3.0 - 2.0 * v),
        len * 6.0 * v * (1.0 - v),
    )
}

/// `(1/4π) ∫_{S²} (c₀ + c₁ ω₁²) · half_chord_sq dω` in `(θ, φ)` with
/// `ω = (cos θ, sin θ cos φ, sin θ sin φ)`.
fn sphere_quadrature(ray: &Ray, w: KernelWeights, tol: f64) -> Result<(f64, f64)> {
    let inner_cfg = QuadConfig {
        abs_tol: 0.05 * tol,
        rel_tol: 1e-13,
        max_intervals: 2000,
    };
    let outer_cfg = QuadConfig {
        abs_tol: 0.5 * tol,
        rel_tol: 1e-13,
        max_intervals: 2000,
    };
    let pi = std::f64::consts::PI;
    let interior = ray.c <= 0.0;

    // The set of φ with a non-empty chord is {cos φ < κ(θ)} for exterior x.
    let kappa_edges = |theta: f64| -> (f64, f64) {
        let (ct, st) = (theta.cos(), theta.sin());
        let k = -(ray.quad_a(ct) * ray.c).sqrt() - ray.x1 * ct * ray.inv_a2;
        let slope = ray.r * st * ray.inv_b2;
        (k + slope, k - slope)
    };
    let inner = |theta: f64| -> Result<f64> {
        let (ct, st) = (theta.cos(), theta.sin());
        let g = |phi: f64| ray.half_chord_sq(ct, st * phi.cos());
        let weight = (w.coulomb + w.axial * ct * ct) * st;
        if interior {
            return Ok(weight * integrate_lenient(g, 0.0, pi, &inner_cfg)?.value);
        }
        let k = -(ray.quad_a(ct) * ray.c).sqrt() - ray.x1 * ct * ray.inv_a2;
        let slope = ray.r * st * ray.inv_b2;
        if slope <= 1e-300 {
            return Ok(if k > 0.0 { weight * pi * g(0.0) } else { 0.0 });
        }
        let kappa = k / slope;
        if kappa <= -1.0 {
            Ok(0.0)
        } else if kappa >= 1.0 {
            Ok(weight * integrate_lenient(g, 0.0, pi, &inner_cfg)?.value)
        } else {
            let phi0 = kappa.acos();
            let mapped = |v: f64| {
                let (phi, jac) = smoothstep(phi0, pi, v);
                g(phi) * jac
            };
            Ok(weight * integrate_lenient(mapped, 0.0, 1.0, &inner_cfg)?.value)
        }
    };

    let mut breaks = vec![0.0, pi];
    if !interior {
        breaks.extend(theta_breakpoints(&kappa_edges)?);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    }

    let mut total = 0.0;
    let mut err = 0.0;
    for pair in breaks.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if hi - lo < 1e-15 {
            continue;
        }
        let failure = RefCell::new(None);
        let f = |v: f64| {
            let (theta, jac) = smoothstep(lo, hi, v);
            match inner(theta) {
                Ok(val) => val * jac,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        let est = integrate_lenient(f, 0.0, 1.0, &outer_cfg)?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        total += est.value;
        err += est.error;
    }
    let norm = 1.0 / (2.0 * pi);
    Ok((norm * total, norm * err))
}

/// Zeros of the two `κ = ±1` edge functions on `(0, π)`.
fn theta_breakpoints<F: Fn(f64) -> (f64, f64)>(edges: &F) -> Result<Vec<f64>> {
    const SCAN: usize = 4096;
    let pi = std::f64::consts::PI;
    let mut out = Vec::new();
    let mut prev_theta = 0.0;
    let mut prev = edges(prev_theta);
    let opts = BrentOptions {
        x_tol: 1e-15,
        ..BrentOptions::default()
    };
    for k in 1..=SCAN {
        let theta = pi * k as f64 / SCAN as f64;
        let cur = edges(theta);
        if prev.0.signum() != cur.0.signum() {
            out.push(brent(|t| Ok(edges(t).0), prev_theta, theta, &opts)?);
        }
        if prev.1.signum() != cur.1.signum() {
            out.push(brent(|t| Ok(edges(t).1), prev_theta, theta, &opts)?);
        }
        prev_theta = theta;
        prev = cur;
    }
    Ok(out)
}
