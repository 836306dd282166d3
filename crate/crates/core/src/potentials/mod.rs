//! Potentials of the normalised uniform measure on a spheroid.
//!
//! `Φ₀ = |x|^{2-n} * μ`, `Ψ = (x₁²/|x|ⁿ) * μ` and `Φ_α = Φ₀ + αΨ`.
//! Inside the support all three are quadratic in `(x₁², r²)` with
//! `r² = x₂² + … + xₙ²`. Outside, `Φ₀` is an integral over the confocal
//! parameter `λ(x)` and `Ψ` follows from `Φ₀` and its gradient.
//!
//! Everything depends on `x` only through `(x₁, r)`.

mod coords;
pub mod oracle;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumSolution;
use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate_tail, QuadConfig};
use crate::special_functions::{aux_integrals, center_integral, check_dim, gamma_half, h};

pub use coords::{CoordKind, SpheroidalPoint};

/// Below this `|t - 1|` the exterior formulas are treated as degenerate.
pub const NEAR_BALL: f64 = 1e-6;

/// Tolerance for the agreement of the two constant routes in [`el_constant`].
pub const EL_CONSTANT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpheroidKind {
    Oblate,
    Prolate,
    Ball,
}

/// `Ω(a, b) = {x₁²/a² + r²/b² ≤ 1}` in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spheroid {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl Spheroid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        check_dim(n)?;
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return domain(format!("semi-axes must be positive, got a={a}, b={b}"));
        }
        Ok(Self { a, b, n })
    }

    pub fn ball(radius: f64, n: usize) -> Result<Self> {
        Self::new(radius, radius, n)
    }

    pub fn kind(&self) -> SpheroidKind {
        if self.a < self.b {
            SpheroidKind::Oblate
        } else if self.a > self.b {
            SpheroidKind::Prolate
        } else {
            SpheroidKind::Ball
        }
    }

    pub fn aspect_ratio(&self) -> f64 {
        (self.a / self.b).powi(2)
    }

    /// `c² = |a² - b²|`.
    pub fn focal_sq(&self) -> f64 {
        (self.a * self.a - self.b * self.b).abs()
    }

    pub fn is_near_ball(&self) -> bool {
        (self.aspect_ratio() - 1.0).abs() < NEAR_BALL
    }

    pub fn quadratic_form(&self, x1: f64, r: f64) -> f64 {
        (x1 / self.a).powi(2) + (r / self.b).powi(2)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let (x1, r) = self.axial(x);
        self.quadratic_form(x1, r) <= 1.0
    }

    pub fn volume(&self) -> f64 {
        let nf = self.n as f64;
        let unit_ball = std::f64::consts::PI.powf(nf / 2.0) / gamma_half(self.n as u32 + 2);
        unit_ball * self.a * self.b.powi(self.n as i32 - 1)
    }

    /// `(x₁, r)` after checking the dimension.
    pub fn axial(&self, x: &[f64]) -> (f64, f64) {
        assert_eq!(
            x.len(),
            self.n,
            "point dimension does not match the spheroid"
        );
        let r2: f64 = x[1..].iter().map(|v| v * v).sum();
        (x[0], r2.sqrt())
    }
}

/// `axial·x₁² + transverse·r² + center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub axial: f64,
    pub transverse: f64,
    pub center: f64,
}

impl Quadratic {
    pub fn eval(&self, x1: f64, r: f64) -> f64 {
        self.axial * x1 * x1 + self.transverse * r * r + self.center
    }
}

/// Interior representation of `Φ₀`, `Ψ` and `Φ_α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorCoefficients {
    pub phi0: Quadratic,
    pub psi: Quadratic,
    pub alpha: f64,
    /// `Φ_α`'s `x₁²` coefficient.
    pub axial: f64,
    /// `Φ_α`'s `r²` coefficient.
    pub transverse: f64,
    /// `Φ_α(0)`.
    pub center: f64,
}

impl InteriorCoefficients {
    pub fn new(s: &Spheroid, alpha: f64) -> Result<Self> {
        let n = s.n;
        let nf = n as f64;
        let t = s.aspect_ratio();
        let hv = h(t, n)?;
        let aux = aux_integrals(t, n)?;
        let j0 = center_integral(t, n)?;
        let bn = s.b.powi(n as i32);
        let b2n = s.b.powi(2 - n as i32);

        let k = nf * (nf - 2.0) / 4.0;
        let phi0 = Quadratic {
            axial: -k * hv / bn,
            transverse: -k * aux.jb / bn,
            center: k * b2n * j0,
        };
        let psi = Quadratic {
            axial: nf / (4.0 * bn) * (2.0 * hv - 3.0 * t * aux.j5),
            transverse: -nf / (4.0 * bn) * t * aux.jc,
            center: nf * t / 4.0 * b2n * hv,
        };
        Ok(Self {
            phi0,
            psi,
            alpha,
            axial: phi0.axial + alpha * psi.axial,
            transverse: phi0.transverse + alpha * psi.transverse,
            center: phi0.center + alpha * psi.center,
        })
    }

    pub fn phi_alpha(&self, x1: f64, r: f64) -> f64 {
        self.axial * x1 * x1 + self.transverse * r * r + self.center
    }
}

/// Which closed form produced a potential value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    Exterior,
}

/// Values of the three potentials at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialValues {
    pub phi0: f64,
    /// `None` outside a near-ball spheroid, where the exterior formula is degenerate.
    pub psi: Option<f64>,
    pub phi_alpha: f64,
    pub region: Region,
}

fn tail_cfg() -> QuadConfig {
    QuadConfig {
        abs_tol: 0.0,
        rel_tol: 1e-12,
        max_intervals: 4000,
    }
}

/// The integrals `∫_λ^∞ (a²+s)^{-p} (b²+s)^{-q} ds` for the exterior formulas.
fn confocal_integral(s: &Spheroid, lambda: f64, p: f64, q: f64) -> Result<f64> {
    let (a2, b2) = (s.a * s.a, s.b * s.b);
    let f = |u: f64| (a2 + u).powf(-p) * (b2 + u).powf(-q);
    Ok(integrate_tail(f, lambda, a2.max(b2) + lambda, &tail_cfg())?.value)
}

/// Exterior integrals at `λ`: the combined `Φ₀` integrand and the two
/// gradient integrals.
struct ExteriorIntegrals {
    phi0: f64,
    i1: f64,
    i2: f64,
}

fn exterior_integrals(s: &Spheroid, x1: f64, r: f64, lambda: f64) -> Result<ExteriorIntegrals> {
    let nf = s.n as f64;
    let (a2, b2) = (s.a * s.a, s.b * s.b);
    let q = (nf - 1.0) / 2.0;
    // The combined integrand vanishes at s = λ and is non-negative beyond it.
    let f = |u: f64| {
        let (pa, pb) = (a2 + u, b2 + u);
        let w = (1.0 - x1 * x1 / pa - r * r / pb).max(0.0);
        w / (pa.sqrt() * pb.powf(q))
    };
    let k = nf * (nf - 2.0) / 4.0;
    let phi0 = k * integrate_tail(f, lambda, a2.max(b2) + lambda, &tail_cfg())?.value;
    Ok(ExteriorIntegrals {
        phi0,
        i1: confocal_integral(s, lambda, 1.5, q)?,
        i2: confocal_integral(s, lambda, 0.5, q + 1.0)?,
    })
}

/// Largest root `λ ≥ 0` of `x₁²/(a²+λ) + r²/(b²+λ) = 1`.
pub fn lambda_root(x: &[f64], s: &Spheroid) -> Result<f64> {
    let (x1, r) = s.axial(x);
    lambda_axial(x1, r, s)
}

fn lambda_axial(x1: f64, r: f64, s: &Spheroid) -> Result<f64> {
    if s.quadratic_form(x1, r) < 1.0 {
        return domain(format!("point (x1={x1}, r={r}) lies inside the spheroid"));
    }
    let (a2, b2) = (s.a * s.a, s.b * s.b);
    let c = s.focal_sq().sqrt();
    let lambda = match s.kind() {
        SpheroidKind::Ball => x1 * x1 + r * r - a2,
        SpheroidKind::Oblate => {
            let half =
                0.5 * ((x1 * x1 + (r + c).powi(2)).sqrt() + (x1 * x1 + (r - c).powi(2)).sqrt());
            half * half - b2
        }
        SpheroidKind::Prolate => {
            let half =
                0.5 * (((x1 + c).powi(2) + r * r).sqrt() + ((x1 - c).powi(2) + r * r).sqrt());
            half * half - a2
        }
    };
    Ok(lambda.max(0.0))
}

fn require_inside(s: &Spheroid, x1: f64, r: f64) -> Result<()> {
    if s.quadratic_form(x1, r) > 1.0 {
        return domain(format!("point (x1={x1}, r={r}) lies outside the spheroid"));
    }
    Ok(())
}

pub fn phi0_inside(x: &[f64], s: &Spheroid) -> Result<f64> {
    let (x1, r) = s.axial(x);
    require_inside(s, x1, r)?;
    Ok(InteriorCoefficients::new(s, 0.0)?.phi0.eval(x1, r))
}

pub fn psi_inside(x: &[f64], s: &Spheroid) -> Result<f64> {
    let (x1, r) = s.axial(x);
    require_inside(s, x1, r)?;
    Ok(InteriorCoefficients::new(s, 0.0)?.psi.eval(x1, r))
}

pub fn phi_alpha_inside(x: &[f64], s: &Spheroid, alpha: f64) -> Result<f64> {
    let (x1, r) = s.axial(x);
    require_inside(s, x1, r)?;
    Ok(InteriorCoefficients::new(s, alpha)?.phi_alpha(x1, r))
}

pub fn phi0_outside(x: &[f64], s: &Spheroid) -> Result<f64> {
    let (x1, r) = s.axial(x);
    let lambda = lambda_axial(x1, r, s)?;
    Ok(exterior_integrals(s, x1, r, lambda)?.phi0)
}

/// `∇Φ₀` outside, by differentiating under the integral in `λ`.
pub fn grad_phi0_outside(x: &[f64], s: &Spheroid) -> Result<Vec<f64>> {
    let (x1, r) = s.axial(x);
    let lambda = lambda_axial(x1, r, s)?;
    let e = exterior_integrals(s, x1, r, lambda)?;
    let k = -(s.n as f64) * (s.n as f64 - 2.0) / 2.0;
    let mut g: Vec<f64> = x.iter().map(|v| k * e.i2 * v).collect();
    g[0] = k * e.i1 * x1;
    Ok(g)
}

/// `∇Φ₀` outside in the `(x₁, r)` plane via spheroidal coordinates.
///
/// Returns `(∂Φ₀/∂x₁, ∂Φ₀/∂r)`.
pub fn grad_phi0_spheroidal(x: &[f64], s: &Spheroid) -> Result<(f64, f64)> {
    let (x1, r) = s.axial(x);
    lambda_axial(x1, r, s)?;
    spheroidal_gradient(s, x1, r)
}

fn spheroidal_gradient(s: &Spheroid, x1: f64, r: f64) -> Result<(f64, f64)> {
    let p = SpheroidalPoint::from_spheroid(x1, r, s)?;
    let nf = s.n as f64;
    let c2 = p.c * p.c;
    let lower = c2 * p.z * p.z;
    let shift = match p.kind {
        CoordKind::Oblate => c2,
        CoordKind::Prolate => -c2,
    };
    let q = (nf - 1.0) / 2.0;
    let g1 = integrate_tail(
        |v: f64| v.powf(-1.5) * (v + shift).powf(-q),
        lower,
        lower + c2,
        &tail_cfg(),
    )?
    .value;
    let g2 = integrate_tail(
        |v: f64| v.powf(-0.5) * (v + shift).powf(-q - 1.0),
        lower,
        lower + c2,
        &tail_cfg(),
    )?
    .value;
    let k = -p.c * nf * (nf - 2.0) / 2.0;
    let (zr, transverse) = (p.z * p.rho, p.transverse_factor());
    Ok((k * zr * g1, k * transverse * g2))
}

fn require_non_degenerate(s: &Spheroid) -> Result<()> {
    if s.is_near_ball() {
        return Err(Error::Degenerate(format!(
            "exterior anisotropic potential needs |t-1| >= {NEAR_BALL}, got t = {}",
            s.aspect_ratio()
        )));
    }
    Ok(())
}

/// `Ψ` outside from `Φ₀` and its gradient along `(b² x₁, a² x')`.
pub fn psi_outside(x: &[f64], s: &Spheroid) -> Result<f64> {
    let (x1, r) = s.axial(x);
    let lambda = lambda_axial(x1, r, s)?;
    require_non_degenerate(s)?;
    let phi0 = exterior_integrals(s, x1, r, lambda)?.phi0;
    let (g1, gr) = spheroidal_gradient(s, x1, r)?;
    Ok(psi_from_gradient(s, x1, r, phi0, g1, gr))
}

fn psi_from_gradient(s: &Spheroid, x1: f64, r: f64, phi0: f64, g1: f64, gr: f64) -> f64 {
    let (a2, b2) = (s.a * s.a, s.b * s.b);
    let d = a2 - b2;
    a2 / d * phi0 + (b2 * x1 * g1 + a2 * r * gr) / ((s.n as f64 - 2.0) * d)
}

/// Evaluates all potentials of one spheroid, caching the interior coefficients.
#[derive(Debug, Clone, Copy)]
pub struct PotentialEvaluator {
    pub spheroid: Spheroid,
    pub interior: InteriorCoefficients,
}

impl PotentialEvaluator {
    pub fn new(s: &Spheroid, alpha: f64) -> Result<Self> {
        Ok(Self {
            spheroid: *s,
            interior: InteriorCoefficients::new(s, alpha)?,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.interior.alpha
    }

    pub fn eval(&self, x: &[f64]) -> Result<PotentialValues> {
        let (x1, r) = self.spheroid.axial(x);
        self.eval_axial(x1, r)
    }

    /// Same as [`eval`](Self::eval) at the point `(x₁, r, 0, …, 0)`.
    pub fn eval_axial(&self, x1: f64, r: f64) -> Result<PotentialValues> {
        let s = &self.spheroid;
        let alpha = self.alpha();
        if s.quadratic_form(x1, r) <= 1.0 {
            let c = &self.interior;
            return Ok(PotentialValues {
                phi0: c.phi0.eval(x1, r),
                psi: Some(c.psi.eval(x1, r)),
                phi_alpha: c.phi_alpha(x1, r),
                region: Region::Interior,
            });
        }
        let lambda = lambda_axial(x1, r, s)?;
        let e = exterior_integrals(s, x1, r, lambda)?;
        let psi = if s.is_near_ball() {
            None
        } else {
            let (g1, gr) = spheroidal_gradient(s, x1, r)?;
            Some(psi_from_gradient(s, x1, r, e.phi0, g1, gr))
        };
        let phi_alpha = match psi {
            Some(p) => e.phi0 + alpha * p,
            None if alpha == 0.0 => e.phi0,
            None => {
                return Err(Error::Degenerate(format!(
                    "exterior Phi_alpha with alpha = {alpha} needs a non-spherical support"
                )))
            }
        };
        Ok(PotentialValues {
            phi0: e.phi0,
            psi,
            phi_alpha,
            region: Region::Exterior,
        })
    }

    pub fn phi_alpha(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)?.phi_alpha)
    }
}

/// `Φ_α` anywhere.
pub fn phi_alpha(x: &[f64], s: &Spheroid, alpha: f64) -> Result<f64> {
    PotentialEvaluator::new(s, alpha)?.phi_alpha(x)
}

/// `(A_α(z), B_α(z))` with `Φ_α + |x|²/2 = A_α(z) + B_α(z) ρ²` outside.
pub fn exterior_profile(z: f64, s: &Spheroid, alpha: f64) -> Result<(f64, f64)> {
    require_non_degenerate(s)?;
    let c2 = s.focal_sq();
    let c = c2.sqrt();
    let z_min = s.a / c;
    if !(z >= z_min * (1.0 - 1e-12)) {
        return domain(format!("z = {z} below the boundary value a/c = {z_min}"));
    }
    let nf = s.n as f64;
    let a2 = s.a * s.a;
    let lower = c2 * z * z;
    let e = (nf + 1.0) / 2.0;
    let cfg = QuadConfig {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let scale = lower + c2;
    let (a_int, b_int, a_const, b_const) = match s.kind() {
        SpheroidKind::Oblate => {
            let p = (nf - 2.0) * c2 - nf * alpha * a2;
            let fa = |v: f64| {
                (p * (v - lower) + 2.0 * alpha * a2 * (v + c2)) / (c2 * v.sqrt() * (v + c2).powf(e))
            };
            let fb = |v: f64| {
                (p * (v - lower) + 2.0 * alpha * lower * (v + c2))
                    / (v.powf(1.5) * (v + c2).powf(e))
            };
            (
                integrate_tail(fa, lower, scale, &cfg)?.value,
                integrate_tail(fb, lower, scale, &cfg)?.value,
                0.5 * c2 * (1.0 + z * z),
                -0.5 * c2,
            )
        }
        SpheroidKind::Prolate => {
            let p = (nf - 2.0) * c2 + nf * alpha * a2;
            let fa = |v: f64| {
                (p * (v - lower) - 2.0 * alpha * a2 * (v - c2)) / (c2 * v.sqrt() * (v - c2).powf(e))
            };
            let fb = |v: f64| {
                (-p * (v - lower) + 2.0 * alpha * lower * (v - c2))
                    / (v.powf(1.5) * (v - c2).powf(e))
            };
            (
                integrate_tail(fa, lower, scale, &cfg)?.value,
                integrate_tail(fb, lower, scale, &cfg)?.value,
                0.5 * c2 * (z * z - 1.0),
                0.5 * c2,
            )
        }
        SpheroidKind::Ball => unreachable!("rejected above"),
    };
    Ok((nf / 4.0 * a_int + a_const, nf / 4.0 * b_int + b_const))
}

/// Closed forms of `((1/z) A')'` and `((1/z)(A' + B'))'`.
pub fn profile_second_derivatives(z: f64, s: &Spheroid, alpha: f64) -> Result<(f64, f64)> {
    require_non_degenerate(s)?;
    let nf = s.n as f64;
    let c2 = s.focal_sq();
    let ratio = s.a * s.a / c2;
    let (base, tail) = match s.kind() {
        SpheroidKind::Oblate => (1.0 + z * z, nf - 2.0 - alpha),
        _ => (z * z - 1.0, -(nf - 2.0) + alpha),
    };
    let pre = nf / (c2.sqrt().powi(s.n as i32 - 2) * z * z * base.powf((nf + 1.0) / 2.0));
    let da = pre * ((nf - 2.0) * z * z + alpha * ratio);
    let dab = pre * ((nf - 2.0) * (1.0 + alpha) * z * z + tail - alpha * ratio * (nf - 1.0));
    Ok((da, dab))
}

/// The two routes to the Euler–Lagrange constant of a spheroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElConstantRoutes {
    /// `Φ_α(0)`.
    pub center: f64,
    /// `A_α(a/c)`; absent for near-ball spheroids.
    pub boundary: Option<f64>,
}

pub fn el_constant_routes(s: &Spheroid, alpha: f64) -> Result<ElConstantRoutes> {
    let center = InteriorCoefficients::new(s, alpha)?.center;
    let boundary = if s.is_near_ball() {
        None
    } else {
        let z = s.a / s.focal_sq().sqrt();
        Some(exterior_profile(z, s, alpha)?.0)
    };
    Ok(ElConstantRoutes { center, boundary })
}

/// `C_α` of an equilibrium spheroid, checked across both routes.
pub(crate) fn el_constant_for(s: &Spheroid, alpha: f64) -> Result<f64> {
    let routes = el_constant_routes(s, alpha)?;
    match routes.boundary {
        None => Ok(routes.center),
        Some(b) => {
            if (b - routes.center).abs() > EL_CONSTANT_TOL * routes.center.abs().max(1.0) {
                return Err(Error::Inconsistent {
                    what: "EL constant (boundary vs centre)",
                    first: b,
                    second: routes.center,
                });
            }
            Ok(b)
        }
    }
}

pub fn el_constant(sol: &EquilibriumSolution) -> Result<f64> {
    el_constant_for(&sol.spheroid(), sol.params.alpha)
}

/// One row of a potential map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialMapRow {
    pub x1: f64,
    pub r: f64,
    pub phi0: f64,
    pub psi: Option<f64>,
    pub phi_alpha: f64,
    pub total: f64,
    pub region: Region,
}

/// Evaluates the potentials on a rectangular `(x₁, r)` grid.
pub fn potential_map(
    s: &Spheroid,
    alpha: f64,
    x1_range: (f64, f64),
    r_range: (f64, f64),
    steps: (usize, usize),
) -> Result<Vec<PotentialMapRow>> {
    use rayon::prelude::*;
    let ev = PotentialEvaluator::new(s, alpha)?;
    let lin = |(lo, hi): (f64, f64), k: usize, m: usize| {
        if m <= 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (m - 1) as f64
        }
    };
    let points: Vec<(f64, f64)> = (0..steps.0)
        .flat_map(|i| (0..steps.1).map(move |j| (i, j)))
        .map(|(i, j)| (lin(x1_range, i, steps.0), lin(r_range, j, steps.1)))
        .collect();
    points
        .par_iter()
        .map(|&(x1, r)| {
            let v = ev.eval_axial(x1, r)?;
            Ok(PotentialMapRow {
                x1,
                r,
                phi0: v.phi0,
                psi: v.psi,
                phi_alpha: v.phi_alpha,
                total: v.phi_alpha + 0.5 * (x1 * x1 + r * r),
                region: v.region,
            })
        })
        .collect()
}

pub const POTENTIAL_MAP_HEADER: &str = "x1,r,phi0,psi,phi_alpha,phi_alpha_plus_half_sq,region";

pub fn write_potential_map<W: Write>(rows: &[PotentialMapRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{POTENTIAL_MAP_HEADER}")?;
    for row in rows {
        let psi = row.psi.map(|p| format!("{p:.16e}")).unwrap_or_default();
        let region = match row.region {
            Region::Interior => "interior",
            Region::Exterior => "exterior",
        };
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{}",
            row.x1, row.r, row.phi0, psi, row.phi_alpha, row.total, region
        )?;
    }
    Ok(())
}
