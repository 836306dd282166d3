//! Euler–Lagrange verification, energies of spheroidal measures and the
//! discrete Fourier-side energy check.
//!
//! The equilibrium conditions are
//!
//! ```text
//! Φ_α(x) + |x|²/2 = C_α   on the support,
//! Φ_α(x) + |x|²/2 ≥ C_α   everywhere.
//! ```
//!
//! The first is checked on a quasi-random grid of the support. Outside, the
//! left-hand side is `A_α(z) + B_α(z) ρ²` in spheroidal coordinates with
//! `ρ ∈ [0, 1]`, so the inequality reduces to the two profiles `A_α` and
//! `A_α + B_α` on a `z`-grid. A coarse Cartesian grid is kept as a smoke test.

mod parseval;

pub use parseval::{
    parseval_check, parseval_check_with, DensityGrid, ParsevalConfig, ParsevalResult,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumSolution;
use crate::error::{domain, Result};
use crate::kernel::EnergyParams;
use crate::potentials::oracle::Ray;
use crate::potentials::{
    exterior_profile, profile_second_derivatives, InteriorCoefficients, PotentialEvaluator, Region,
    Spheroid,
};

/// Default acceptance tolerance of [`verify`].
pub const EL_TOL: f64 = 1e-6;

/// Grid sizes for the Euler–Lagrange checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Halton points in the meridian half-section of the support.
    pub interior_points: usize,
    /// Points of the `z`-grid on `[a/c, z_max_factor · a/c]`.
    pub z_points: usize,
    pub z_max_factor: f64,
    /// Steps per axis of the Cartesian smoke grid on `[-3R, 3R] × [0, 3R]`, `R = max(a, b)`.
    pub smoke_steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            interior_points: 2000,
            z_points: 400,
            z_max_factor: 10.0,
            smoke_steps: 41,
        }
    }
}

/// Interior check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct El1Fragment {
    /// `max |Φ_α + |x|²/2 - C|`.
    pub max_abs_dev: f64,
    /// `max_abs_dev / |C|`.
    pub max_rel_dev: f64,
    /// Mean of `Φ_α + |x|²/2` over the grid.
    pub recovered_constant: f64,
    pub points: usize,
}

/// Exterior check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct El2Fragment {
    /// Minimum of `Φ_α + |x|²/2 - C` over the profile grid.
    pub min_slack: f64,
    /// Slack at the boundary `z = a/c` (radius for a ball).
    pub boundary_slack: f64,
    /// `B_α(a/c)`; absent for a ball.
    pub boundary_b: Option<f64>,
    /// Minimum of `((1/z) A')'` on the `z`-grid; absent for a ball.
    pub derivative_min_axis: Option<f64>,
    /// Minimum of `((1/z)(A' + B'))'` on the `z`-grid; absent for a ball.
    pub derivative_min_combined: Option<f64>,
    /// Minimum slack over exterior points of the Cartesian smoke grid.
    pub smoke_min_slack: f64,
    pub profile_points: usize,
    pub smoke_points: usize,
}

impl El2Fragment {
    pub fn derivative_min(&self) -> Option<f64> {
        match (self.derivative_min_axis, self.derivative_min_combined) {
            (Some(a), Some(b)) => Some(a.min(b)),
            _ => None,
        }
    }
}

/// Two candidate relations between `C_α` and the energy `I_α(μ_α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantIdentities {
    pub energy: f64,
    pub second_moment: f64,
    /// `C - (I - M₂/2)`, the relation obtained by integrating the interior condition.
    pub integrated_residual: f64,
    /// `C - (2I - M₂/2)`.
    pub alternative_residual: f64,
}

/// Outcome of [`verify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElReport {
    pub params: EnergyParams,
    pub c_alpha: f64,
    pub tol: f64,
    /// Interior deviation relative to `|C_α|`.
    pub interior_max_abs_dev: f64,
    pub interior: El1Fragment,
    pub exterior_min_slack: f64,
    pub derivative_min: Option<f64>,
    pub exterior: El2Fragment,
    pub identities: ConstantIdentities,
    pub grids: GridConfig,
    pub passed: bool,
}

/// Radical inverse of `i` in base `b`.
fn radical_inverse(mut i: usize, b: usize) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut v = 0.0;
    while i > 0 {
        v += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    v
}

/// Halton points `(x₁, r)` filling the half-section `r ≥ 0` of the support.
fn interior_grid(s: &Spheroid, count: usize) -> Vec<(f64, f64)> {
    (1..=count)
        .map(|i| {
            let u = 2.0 * radical_inverse(i, 2) - 1.0;
            let v = radical_inverse(i, 3);
            let x1 = s.a * u;
            let r = s.b * (1.0 - u * u).sqrt() * v;
            (x1, r)
        })
        .collect()
}

/// Interior check of an arbitrary spheroid against a given constant.
pub fn check_interior(s: &Spheroid, alpha: f64, c: f64, grid: &GridConfig) -> Result<El1Fragment> {
    if grid.interior_points == 0 {
        return domain("interior grid must have at least one point");
    }
    let coeffs = InteriorCoefficients::new(s, alpha)?;
    let pts = interior_grid(s, grid.interior_points);
    let mut max_dev = 0.0_f64;
    let mut sum = 0.0;
    for &(x1, r) in &pts {
        let v = coeffs.phi_alpha(x1, r) + 0.5 * (x1 * x1 + r * r);
        max_dev = max_dev.max((v - c).abs());
        sum += v;
    }
    Ok(El1Fragment {
        max_abs_dev: max_dev,
        max_rel_dev: max_dev / c.abs().max(f64::MIN_POSITIVE),
        recovered_constant: sum / pts.len() as f64,
        points: pts.len(),
    })
}

pub fn verify_el1(sol: &EquilibriumSolution, grid: &GridConfig) -> Result<El1Fragment> {
    check_interior(&sol.spheroid(), sol.params.alpha, sol.c_alpha, grid)
}

/// Negative control: the interior check of a spheroid whose aspect ratio is
/// `factor · t` (same `b`), measured against its own `Φ_α(0)`.
pub fn perturbed_el1(
    sol: &EquilibriumSolution,
    factor: f64,
    grid: &GridConfig,
) -> Result<El1Fragment> {
    let b = sol.b;
    let s = Spheroid::new(b * (factor * sol.t).sqrt(), b, sol.params.n)?;
    let c = InteriorCoefficients::new(&s, sol.params.alpha)?.center;
    check_interior(&s, sol.params.alpha, c, grid)
}

fn smoke_grid(s: &Spheroid, alpha: f64, c: f64, steps: usize) -> Result<(f64, usize)> {
    let eval = PotentialEvaluator::new(s, alpha)?;
    let steps = steps.max(2);
    let extent = 3.0 * s.a.max(s.b);
    let pts: Vec<(f64, f64)> = (0..steps)
        .flat_map(|i| {
            (0..steps).map(move |j| {
                let x1 = extent * (2.0 * i as f64 / (steps - 1) as f64 - 1.0);
                let r = extent * j as f64 / (steps - 1) as f64;
                (x1, r)
            })
        })
        .filter(|&(x1, r)| s.quadratic_form(x1, r) > 1.0)
        .collect();
    let slacks: Vec<f64> = pts
        .par_iter()
        .map(|&(x1, r)| {
            let v = eval.eval_axial(x1, r)?;
            debug_assert_eq!(v.region, Region::Exterior);
            Ok(v.phi_alpha + 0.5 * (x1 * x1 + r * r) - c)
        })
        .collect::<Result<_>>()?;
    Ok((
        slacks.iter().cloned().fold(f64::INFINITY, f64::min),
        pts.len(),
    ))
}

/// Exterior check of an arbitrary spheroid against a given constant.
pub fn check_exterior(s: &Spheroid, alpha: f64, c: f64, grid: &GridConfig) -> Result<El2Fragment> {
    let (smoke_min_slack, smoke_points) = smoke_grid(s, alpha, c, grid.smoke_steps)?;
    let m = grid.z_points.max(2);
    if s.is_near_ball() {
        // Radial profiles along the axis and the equator.
        let eval = PotentialEvaluator::new(s, alpha)?;
        let radius = s.a.max(s.b);
        let mut min_slack = f64::INFINITY;
        let mut boundary_slack = f64::NEG_INFINITY;
        for k in 0..m {
            let rho = radius * (1.0 + (grid.z_max_factor - 1.0) * k as f64 / (m - 1) as f64);
            for (x1, r) in [(rho, 0.0), (0.0, rho)] {
                let v = eval.eval_axial(x1, r)?;
                let slack = v.phi_alpha + 0.5 * rho * rho - c;
                min_slack = min_slack.min(slack);
                if k == 0 {
                    boundary_slack = boundary_slack.max(slack.abs());
                }
            }
        }
        return Ok(El2Fragment {
            min_slack,
            boundary_slack,
            boundary_b: None,
            derivative_min_axis: None,
            derivative_min_combined: None,
            smoke_min_slack,
            profile_points: 2 * m,
            smoke_points,
        });
    }
    let z0 = s.a / s.focal_sq().sqrt();
    let zs: Vec<f64> = (0..m)
        .map(|k| z0 * (1.0 + (grid.z_max_factor - 1.0) * k as f64 / (m - 1) as f64))
        .collect();
    let rows: Vec<(f64, f64, f64, f64, f64)> = zs
        .par_iter()
        .map(|&z| {
            let (a, b) = exterior_profile(z, s, alpha)?;
            let (da, dab) = profile_second_derivatives(z, s, alpha)?;
            Ok((z, a - c, a + b - c, da, dab))
        })
        .collect::<Result<_>>()?;
    let fold =
        |f: fn(&(f64, f64, f64, f64, f64)) -> f64| rows.iter().map(f).fold(f64::INFINITY, f64::min);
    let (_, b0) = exterior_profile(z0, s, alpha)?;
    Ok(El2Fragment {
        min_slack: fold(|r| r.1.min(r.2)),
        boundary_slack: rows[0].1,
        boundary_b: Some(b0),
        derivative_min_axis: Some(fold(|r| r.3)),
        derivative_min_combined: Some(fold(|r| r.4)),
        smoke_min_slack,
        profile_points: 2 * m,
        smoke_points,
    })
}

pub fn verify_el2(sol: &EquilibriumSolution, grid: &GridConfig) -> Result<El2Fragment> {
    check_exterior(&sol.spheroid(), sol.params.alpha, sol.c_alpha, grid)
}

/// `∫|x|² dμ` for the normalised uniform measure on the spheroid.
pub fn second_moment(s: &Spheroid) -> f64 {
    let nf = s.n as f64;
    (s.a * s.a + (nf - 1.0) * s.b * s.b) / (nf + 2.0)
}

/// `∬ W_α(x-y) dμ dμ` from the interior quadratic representation of `Φ_α`.
pub fn interaction_energy(s: &Spheroid, alpha: f64) -> Result<f64> {
    let c = InteriorCoefficients::new(s, alpha)?;
    let nf = s.n as f64;
    Ok(c.center + (c.axial * s.a * s.a + c.transverse * (nf - 1.0) * s.b * s.b) / (nf + 2.0))
}

/// `I_α(μ)` in closed form.
pub fn exact_energy(s: &Spheroid, alpha: f64) -> Result<f64> {
    Ok(interaction_energy(s, alpha)? + second_moment(s))
}

pub fn constant_identities(s: &Spheroid, alpha: f64, c: f64) -> Result<ConstantIdentities> {
    let energy = exact_energy(s, alpha)?;
    let m2 = second_moment(s);
    Ok(ConstantIdentities {
        energy,
        second_moment: m2,
        integrated_residual: c - (energy - 0.5 * m2),
        alternative_residual: c - (2.0 * energy - 0.5 * m2),
    })
}

/// Runs both checks and the constant identities.
pub fn verify(sol: &EquilibriumSolution, grid: &GridConfig, tol: f64) -> Result<ElReport> {
    sol.validate()?;
    let interior = verify_el1(sol, grid)?;
    let exterior = verify_el2(sol, grid)?;
    let identities = constant_identities(&sol.spheroid(), sol.params.alpha, sol.c_alpha)?;
    let exterior_min_slack = exterior.min_slack.min(exterior.smoke_min_slack);
    let derivative_min = exterior.derivative_min();
    let passed = interior.max_rel_dev <= tol
        && exterior_min_slack >= -tol
        && derivative_min.is_none_or(|d| d >= -tol)
        && (interior.recovered_constant - sol.c_alpha).abs() <= tol * sol.c_alpha.abs().max(1.0);
    Ok(ElReport {
        params: sol.params,
        c_alpha: sol.c_alpha,
        tol,
        interior_max_abs_dev: interior.max_rel_dev,
        interior,
        exterior_min_slack,
        derivative_min,
        exterior,
        identities,
        grids: *grid,
        passed,
    })
}

/// Sample budget of the Monte Carlo energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget {
    pub samples: usize,
    pub seed: u64,
}

impl Default for EnergyBudget {
    fn default() -> Self {
        Self {
            samples: 1 << 20,
            seed: 42,
        }
    }
}

/// Monte Carlo estimate of `I_α(μ)` with one-sigma errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub interaction: f64,
    pub interaction_error: f64,
    pub confinement: f64,
    pub confinement_error: f64,
    pub total: f64,
    pub error: f64,
    /// Closed-form value for comparison.
    pub exact_total: f64,
}

/// Energies of two spheroids from common random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyComparison {
    pub first: EnergyEstimate,
    pub second: EnergyEstimate,
    /// `I(second) - I(first)`.
    pub difference: f64,
    pub difference_error: f64,
}

const BLOCK: usize = 4096;

/// Per spheroid: sums of interaction, its square, confinement, its square,
/// and the difference of totals to the first spheroid with its square.
const ACC: usize = 6;

/// Each sample is a uniform point `v` of the unit ball and a uniform
/// direction `ω`; `x = (a v₁, b v')` is uniform in the spheroid and the
/// integral of `W_α(x - ·)` along the line through `x` in direction `±ω` is
/// elementary. The same `(v, ω)` is used for every spheroid.
fn sample_energies(
    shapes: &[Spheroid],
    alpha: f64,
    budget: &EnergyBudget,
) -> Result<Vec<[f64; ACC]>> {
    if budget.samples < 2 {
        return domain("energy budget needs at least two samples");
    }
    if !(alpha > -1.0) {
        return domain(format!("alpha = {alpha} must exceed -1"));
    }
    let n = shapes[0].n;
    let nf = n as f64;
    let blocks = budget.samples.div_ceil(BLOCK);
    let partial: Vec<Vec<[f64; ACC]>> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
            rng.set_stream(blk as u64);
            let mut acc = vec![[0.0; ACC]; shapes.len()];
            let mut v = vec![0.0; n];
            let mut w = vec![0.0; n];
            let hi = ((blk + 1) * BLOCK).min(budget.samples);
            for _ in blk * BLOCK..hi {
                gaussian_unit(&mut rng, &mut v);
                let radius = rng.gen::<f64>().powf(1.0 / nf);
                v.iter_mut().for_each(|c| *c *= radius);
                gaussian_unit(&mut rng, &mut w);
                let vt: f64 = v[1..].iter().map(|c| c * c).sum::<f64>().sqrt();
                // component of ω along the transverse direction of v
                let w2 = if vt > 0.0 {
                    v[1..].iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>() / vt
                } else {
                    w[1]
                };
                let mut first_total = 0.0;
                for (k, s) in shapes.iter().enumerate() {
                    let (x1, r) = (s.a * v[0], s.b * vt);
                    let ray = Ray::new(s, x1, r);
                    let chord = 0.5 * (ray.half_chord_sq(w[0], w2) + ray.half_chord_sq(-w[0], -w2));
                    let scale = nf / (s.a * s.b.powi(n as i32 - 1));
                    let inter = scale * (1.0 + alpha * w[0] * w[0]) * chord;
                    let conf = x1 * x1 + r * r;
                    let total = inter + conf;
                    if k == 0 {
                        first_total = total;
                    }
                    let d = total - first_total;
                    let a = &mut acc[k];
                    a[0] += inter;
                    a[1] += inter * inter;
                    a[2] += conf;
                    a[3] += conf * conf;
                    a[4] += d;
                    a[5] += d * d;
                }
            }
            acc
        })
        .collect();
    let mut acc = vec![[0.0; ACC]; shapes.len()];
    for blk in partial {
        for (t, b) in acc.iter_mut().zip(blk) {
            for i in 0..ACC {
                t[i] += b[i];
            }
        }
    }
    Ok(acc)
}

fn gaussian_unit(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        for c in out.iter_mut() {
            *c = rng.sample(StandardNormal);
        }
        let norm: f64 = out.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-300 {
            out.iter_mut().for_each(|c| *c /= norm);
            return;
        }
    }
}

fn mean_and_error(sum: f64, sum_sq: f64, count: f64) -> (f64, f64) {
    let mean = sum / count;
    let var = ((sum_sq - sum * mean) / (count - 1.0)).max(0.0);
    (mean, (var / count).sqrt())
}

fn estimate_from(acc: &[f64; ACC], s: &Spheroid, alpha: f64, count: f64) -> Result<EnergyEstimate> {
    let (interaction, interaction_error) = mean_and_error(acc[0], acc[1], count);
    let (confinement, confinement_error) = mean_and_error(acc[2], acc[3], count);
    // Interaction and confinement come from the same samples, so the total
    // error is bounded by the sum of the parts.
    Ok(EnergyEstimate {
        interaction,
        interaction_error,
        confinement,
        confinement_error,
        total: interaction + confinement,
        error: interaction_error + confinement_error,
        exact_total: exact_energy(s, alpha)?,
    })
}

/// Monte Carlo estimate of `I_α` for the uniform measure on `s`.
pub fn total_energy(s: &Spheroid, alpha: f64, budget: &EnergyBudget) -> Result<EnergyEstimate> {
    let acc = sample_energies(std::slice::from_ref(s), alpha, budget)?;
    estimate_from(&acc[0], s, alpha, budget.samples as f64)
}

/// `I_α(second) - I_α(first)` with common random numbers.
pub fn compare_energies(
    first: &Spheroid,
    second: &Spheroid,
    alpha: f64,
    budget: &EnergyBudget,
) -> Result<EnergyComparison> {
    if first.n != second.n {
        return domain("spheroids of different dimension");
    }
    let acc = sample_energies(&[*first, *second], alpha, budget)?;
    let count = budget.samples as f64;
    let (difference, difference_error) = mean_and_error(acc[1][4], acc[1][5], count);
    Ok(EnergyComparison {
        first: estimate_from(&acc[0], first, alpha, count)?,
        second: estimate_from(&acc[1], second, alpha, count)?,
        difference,
        difference_error,
    })
}

#[cfg(test)]
mod tests;
