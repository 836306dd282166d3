//! Gradient flow of the `N`-particle energy
//!
//! ```text
//! E(x) = (1/N²) Σ_{i≠j} W_α(xᵢ - xⱼ) + (1/N) Σ |xᵢ|²
//! ```
//!
//! Steady states approximate the equilibrium measure; their shape is read
//! off from second moments, using `E[xᵢ²] = aᵢ²/(n+2)` for the uniform
//! spheroid.
//!
//! Pair sums are accumulated in a fixed number of row blocks and reduced in
//! block order, so trajectories are bitwise reproducible regardless of the
//! number of threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{w_and_grad, EnergyParams};

/// Particle positions and flow state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfig {
    /// Row-major `N × n` coordinates.
    pub points: Vec<f64>,
    pub params: EnergyParams,
    /// Current step size of the descent.
    pub step: f64,
    pub seed: u64,
    pub iteration: usize,
}

impl ParticleConfig {
    /// `count` points drawn uniformly from the unit ball.
    pub fn uniform_ball(count: usize, params: EnergyParams, seed: u64) -> Result<Self> {
        if count == 0 {
            return domain("need at least one particle");
        }
        let n = params.n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(count * n);
        let mut dir = vec![0.0; n];
        for _ in 0..count {
            let norm = loop {
                for d in dir.iter_mut() {
                    *d = rng.sample(StandardNormal);
                }
                let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    break norm;
                }
            };
            let radius = rng.gen::<f64>().powf(1.0 / n as f64);
            points.extend(dir.iter().map(|v| v / norm * radius));
        }
        Ok(Self {
            points,
            params,
            step: DEFAULT_STEP,
            seed,
            iteration: 0,
        })
    }

    pub fn from_points(points: Vec<Vec<f64>>, params: EnergyParams) -> Result<Self> {
        if points.iter().any(|p| p.len() != params.n) {
            return domain("every point must have n coordinates");
        }
        Ok(Self {
            points: points.concat(),
            params,
            step: DEFAULT_STEP,
            seed: 0,
            iteration: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.params.n
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let n = self.params.n;
        &self.points[i * n..(i + 1) * n]
    }
}

pub const DEFAULT_STEP: f64 = 0.1;

/// Stopping rules of [`run`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub max_iterations: usize,
    /// Stop once the relative energy decrease over `window` steps is below this.
    pub rel_decrease: f64,
    pub window: usize,
    /// Factor applied to the step after an accepted move.
    pub growth: f64,
    pub max_step: f64,
    /// Below this the flow is declared stagnant.
    pub min_step: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            rel_decrease: 1e-9,
            window: 100,
            growth: 1.1,
            max_step: 1.0,
            min_step: 1e-14,
        }
    }
}

/// Fixed number of row blocks: pair sums are reduced block by block in
/// index order, independent of the thread count.
const BLOCKS: usize = 16;

/// Energy and, if requested, its gradient. Each unordered pair is visited
/// once; `+∞` on coincident points.
fn energy_and_gradient(points: &[f64], params: &EnergyParams, grad: Option<&mut [f64]>) -> f64 {
    let n = params.n;
    let count = points.len() / n;
    let nf = count as f64;
    let alpha = params.alpha;
    let want_grad = grad.is_some();
    let rows = count.div_ceil(BLOCKS).max(1);
    let partial: Vec<(f64, Vec<f64>)> = (0..BLOCKS)
        .into_par_iter()
        .map(|blk| {
            let mut acc = if want_grad {
                vec![0.0; points.len()]
            } else {
                Vec::new()
            };
            let mut inter = 0.0;
            let mut diff = vec![0.0; n];
            let mut gw = vec![0.0; n];
            for i in (blk * rows..((blk + 1) * rows).min(count)).rev() {
                let xi = &points[i * n..(i + 1) * n];
                for j in i + 1..count {
                    let xj = &points[j * n..(j + 1) * n];
                    let mut r2 = 0.0;
                    for d in 0..n {
                        diff[d] = xi[d] - xj[d];
                        r2 += diff[d] * diff[d];
                    }
                    if r2 == 0.0 {
                        return (f64::INFINITY, acc);
                    }
                    let g = if want_grad {
                        Some(gw.as_mut_slice())
                    } else {
                        None
                    };
                    inter += w_and_grad(&diff, n, alpha, g);
                    if want_grad {
                        for d in 0..n {
                            acc[i * n + d] += gw[d];
                            acc[j * n + d] -= gw[d];
                        }
                    }
                }
            }
            (inter, acc)
        })
        .collect();
    let mut inter = 0.0;
    for (e, _) in &partial {
        inter += e;
    }
    let conf: f64 = points.iter().map(|v| v * v).sum();
    if let Some(g) = grad {
        g.iter_mut().for_each(|v| *v = 0.0);
        for (_, acc) in &partial {
            if !acc.is_empty() {
                for (gi, a) in g.iter_mut().zip(acc) {
                    *gi += a;
                }
            }
        }
        // W is even, so each pair enters ∂E/∂xᵢ twice.
        for (gi, x) in g.iter_mut().zip(points) {
            *gi = 2.0 * *gi / (nf * nf) + 2.0 * x / nf;
        }
    }
    2.0 * inter / (nf * nf) + conf / nf
}

/// `(1/N²) Σ_{i≠j} W_α(xᵢ - xⱼ) + (1/N) Σ |xᵢ|²`; `+∞` on coincident points.
pub fn discrete_energy(cfg: &ParticleConfig) -> f64 {
    energy_and_gradient(&cfg.points, &cfg.params, None)
}

/// Outcome of a single descent step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    Accepted,
    /// The step size fell below the minimum without decreasing the energy.
    Stagnated,
}

/// One backtracking step. The displacement of particle `i` is
/// `-step · N · ∂E/∂xᵢ`, the mean-field force on it.
pub fn flow_step(cfg: &mut ParticleConfig, opts: &FlowOptions) -> Result<StepOutcome> {
    let mut grad = vec![0.0; cfg.points.len()];
    let e0 = energy_and_gradient(&cfg.points, &cfg.params, Some(&mut grad));
    step_with(cfg, opts, e0, &mut grad).map(|(outcome, _)| outcome)
}

/// Backtracks from the current step size. On acceptance `grad` holds the
/// gradient at the new positions.
fn step_with(
    cfg: &mut ParticleConfig,
    opts: &FlowOptions,
    e0: f64,
    grad: &mut [f64],
) -> Result<(StepOutcome, f64)> {
    if !e0.is_finite() {
        return domain("flow started from a configuration with infinite energy");
    }
    let nf = cfg.len() as f64;
    let mut trial = vec![0.0; cfg.points.len()];
    let mut trial_grad = vec![0.0; cfg.points.len()];
    loop {
        for ((t, x), g) in trial.iter_mut().zip(&cfg.points).zip(grad.iter()) {
            *t = x - cfg.step * nf * g;
        }
        let e1 = energy_and_gradient(&trial, &cfg.params, Some(&mut trial_grad));
        if e1 <= e0 {
            cfg.points.copy_from_slice(&trial);
            grad.copy_from_slice(&trial_grad);
            cfg.iteration += 1;
            cfg.step = (cfg.step * opts.growth).min(opts.max_step);
            return Ok((StepOutcome::Accepted, e1));
        }
        cfg.step *= 0.5;
        if cfg.step < opts.min_step {
            return Ok((StepOutcome::Stagnated, e0));
        }
    }
}

/// Result of [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub config: ParticleConfig,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Energy after every accepted step.
    pub energies: Vec<f64>,
    pub converged: bool,
    pub stagnated: bool,
}

/// Runs the flow until the energy stalls or the iteration budget is spent.
pub fn run(mut cfg: ParticleConfig, opts: &FlowOptions) -> Result<FlowResult> {
    if opts.window == 0 || !(opts.growth >= 1.0) || !(opts.min_step > 0.0) || !(opts.max_step > 0.0)
    {
        return domain("flow options need window >= 1, growth >= 1 and positive step bounds");
    }
    let mut grad = vec![0.0; cfg.points.len()];
    let initial_energy = energy_and_gradient(&cfg.points, &cfg.params, Some(&mut grad));
    let mut energy = initial_energy;
    let mut energies = Vec::new();
    let mut converged = false;
    let mut stagnated = false;
    while cfg.iteration < opts.max_iterations {
        let (outcome, e1) = step_with(&mut cfg, opts, energy, &mut grad)?;
        if outcome == StepOutcome::Stagnated {
            stagnated = true;
            break;
        }
        debug_assert!(e1 <= energy);
        energy = e1;
        energies.push(energy);
        let k = energies.len();
        if k > opts.window {
            let past = energies[k - 1 - opts.window];
            if (past - energy) <= opts.rel_decrease * past.abs() {
                converged = true;
                break;
            }
        }
    }
    Ok(FlowResult {
        config: cfg,
        initial_energy,
        final_energy: energy,
        energies,
        converged,
        stagnated,
    })
}

/// Spheroid fitted to a point cloud by second moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFit {
    /// `cov₁₁ / mean transverse covariance`.
    pub t_hat: f64,
    /// `√((n+2) · mean transverse covariance)`.
    pub b_hat: f64,
    pub center: Vec<f64>,
    /// Largest relative deviation of a transverse covariance from their mean.
    pub residual: f64,
}

impl ShapeFit {
    pub fn a_hat(&self) -> f64 {
        self.b_hat * self.t_hat.sqrt()
    }
}

/// Second-moment fit of a uniform spheroid to `points` (row-major, `n` columns).
pub fn fit_shape(points: &[f64], n: usize) -> Result<ShapeFit> {
    if n < 2 || !points.len().is_multiple_of(n) {
        return domain("points must be a row-major array with n >= 2 columns");
    }
    let count = points.len() / n;
    if count < n + 1 {
        return Err(Error::DegenerateCovariance(format!(
            "{count} points cannot determine a covariance in dimension {n}"
        )));
    }
    let cf = count as f64;
    let mut center = vec![0.0; n];
    for p in points.chunks(n) {
        for (c, v) in center.iter_mut().zip(p) {
            *c += v;
        }
    }
    center.iter_mut().for_each(|c| *c /= cf);
    let mut var = vec![0.0; n];
    for p in points.chunks(n) {
        for d in 0..n {
            var[d] += (p[d] - center[d]).powi(2);
        }
    }
    var.iter_mut().for_each(|v| *v /= cf - 1.0);
    let transverse = var[1..].iter().sum::<f64>() / (n - 1) as f64;
    if !(var[0] > 0.0) || !(transverse > 0.0) {
        return Err(Error::DegenerateCovariance(
            "point cloud has zero variance along an axis".into(),
        ));
    }
    let residual = var[1..]
        .iter()
        .map(|v| (v - transverse).abs() / transverse)
        .fold(0.0, f64::max);
    Ok(ShapeFit {
        t_hat: var[0] / transverse,
        b_hat: ((n as f64 + 2.0) * transverse).sqrt(),
        center,
        residual,
    })
}

/// Writes one CSV row per particle with header `x1,…,xn`.
pub fn write_snapshot<W: Write>(cfg: &ParticleConfig, mut out: W) -> std::io::Result<()> {
    let n = cfg.params.n;
    let header: Vec<String> = (1..=n).map(|d| format!("x{d}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for p in cfg.points.chunks(n) {
        let row: Vec<String> = p.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
