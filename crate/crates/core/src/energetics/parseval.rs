//! Real-space versus Fourier-space interaction energy of a gridded density
//! in three dimensions.
//!
//! The density is piecewise constant on the cells of a cubic grid, so both
//! sides describe the same continuous object:
//!
//! * real side: `Σ m_i m_j K(i - j)`, with `K` the kernel averaged over a
//!   pair of cells (a tent-weighted average of the offset), evaluated by a
//!   zero-padded FFT convolution;
//! * Fourier side: `∫ Ŵ_α(ξ) |ν̂(ξ)|² dξ`, approximated by a sum over the
//!   frequency lattice `k / L` of the box, with `|ν̂|²` from the DFT times
//!   the cell form factor. The lattice sum is accurate for the smooth part
//!   of the integrand; the singularity of `Ŵ_α` at the origin is corrected
//!   analytically (see [`fourier_parts`]).
//!
//! What remains are higher-order terms of the expansion of `|ν̂|²` at the
//! origin and the truncation of the frequency sum. Both shrink as the box
//! grows relative to the support and as the grid is refined.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::kernel::fourier_prefactor;
use crate::quadrature::{gauss_legendre, integrate_tail, QuadConfig};

const N: usize = 3;

/// Cell masses on an `m × m × m` grid of spacing `h`, centred at the origin.
/// Index `(i, j, k)` maps to `(i m + j) m + k`; cell centres sit at
/// `(index - (m-1)/2) h`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub m: usize,
    pub h: f64,
    pub values: Vec<f64>,
}

impl DensityGrid {
    /// Samples `f` at the cell centres; masses are `f · h³`.
    pub fn from_fn<F: Fn([f64; 3]) -> f64 + Sync>(m: usize, h: f64, f: F) -> Self {
        let half = (m as f64 - 1.0) / 2.0;
        let values = (0..m * m * m)
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx / (m * m), (idx / m) % m, idx % m);
                let c = [
                    (i as f64 - half) * h,
                    (j as f64 - half) * h,
                    (k as f64 - half) * h,
                ];
                f(c) * h * h * h
            })
            .collect();
        Self { m, h, values }
    }

    /// `(1 - |x - x₀|²/R²)²` on the ball of radius `R`, normalised to unit
    /// mass, on a box of side `box_factor · 2R`.
    pub fn smooth_bump(m: usize, radius: f64, box_factor: f64) -> Result<Self> {
        if m < 4 || !(radius > 0.0) || !(box_factor >= 1.0) {
            return domain("bump needs m >= 4, radius > 0 and box_factor >= 1");
        }
        let h = box_factor * 2.0 * radius / m as f64;
        Self::from_fn(m, h, |x| {
            let q = 1.0 - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (radius * radius);
            if q > 0.0 {
                q * q
            } else {
                0.0
            }
        })
        .normalized()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let mass = self.mass();
        if !(mass.abs() > 0.0) {
            return domain("density has zero mass");
        }
        self.values.iter_mut().for_each(|v| *v /= mass);
        Ok(self)
    }

    /// `self - other` on the same grid.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.m != other.m || self.h != other.h {
            return domain("densities live on different grids");
        }
        Ok(Self {
            m: self.m,
            h: self.h,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    fn check(&self) -> Result<()> {
        if self.m < 2 || !(self.h > 0.0) || self.values.len() != self.m.pow(3) {
            return domain("density grid must be m^3 values with m >= 2 and h > 0");
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return domain("density grid contains non-finite values");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsevalConfig {
    /// Relative gap above which the result carries a warning.
    pub bound: f64,
    /// The frequency sum covers `periods` periods of the DFT per axis.
    pub periods: usize,
}

impl Default for ParsevalConfig {
    fn default() -> Self {
        Self {
            bound: 1e-2,
            periods: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsevalResult {
    pub alpha: f64,
    pub m: usize,
    pub h: f64,
    pub real_side: f64,
    pub fourier_side: f64,
    /// `|real - fourier| / max(|real|, |fourier|)`.
    pub relative_gap: f64,
    pub warning: Option<String>,
}

pub fn parseval_check(density: &DensityGrid, alpha: f64) -> Result<ParsevalResult> {
    parseval_check_with(density, alpha, &ParsevalConfig::default())
}

/// Both sides of the energy identity for `W_α` in three dimensions.
///
/// Signed densities are accepted. `α` only needs to exceed `-1`, so that the
/// real-space kernel is positive; above `1` the transform changes sign.
pub fn parseval_check_with(
    density: &DensityGrid,
    alpha: f64,
    cfg: &ParsevalConfig,
) -> Result<ParsevalResult> {
    density.check()?;
    if !(alpha > -1.0) || !alpha.is_finite() {
        return domain(format!("alpha = {alpha} must exceed -1"));
    }
    if cfg.periods == 0 || !(cfg.bound > 0.0) {
        return domain("parseval config needs periods >= 1 and bound > 0");
    }
    let real_side = real_side(density, alpha);
    let fourier_side = fourier_side(density, alpha, cfg.periods);
    let scale = real_side.abs().max(fourier_side.abs());
    let relative_gap = if scale > 0.0 {
        (real_side - fourier_side).abs() / scale
    } else {
        0.0
    };
    let warning = (relative_gap > cfg.bound).then(|| {
        format!(
            "real and Fourier sides differ by {relative_gap:.3e} (bound {:.1e}); grid or box too coarse",
            cfg.bound
        )
    });
    Ok(ParsevalResult {
        alpha,
        m: density.m,
        h: density.h,
        real_side,
        fourier_side,
        relative_gap,
        warning,
    })
}

/// `∫_{[-1/2,1/2]³} |y|^{-1}` over a pair of unit cells: the mean inverse
/// distance of two uniform points of the unit cube.
fn cube_self_inverse_distance() -> f64 {
    // Spherical coordinates about the corner of the tent weight; the radial
    // integral is polynomial, leaving a smooth face integral.
    let (x, w) = gauss_legendre(24);
    let mut sum = 0.0;
    for (u, wu) in x.iter().zip(&w) {
        let u = 0.5 * (u + 1.0);
        for (v, wv) in x.iter().zip(&w) {
            let v = 0.5 * (v + 1.0);
            let poly = 0.5 - (1.0 + u + v) / 3.0 + (u + v + u * v) / 4.0 - u * v / 5.0;
            sum += 0.25 * wu * wv * poly / (u * u + v * v + 1.0).sqrt();
        }
    }
    24.0 * sum
}

fn w3(x: [f64; 3], alpha: f64) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    (r2 + alpha * x[0] * x[0]) / (r2 * r2.sqrt())
}

fn laplacian_w3(x: [f64; 3], alpha: f64) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let r3 = r2 * r2.sqrt();
    alpha * (2.0 / r3 - 6.0 * x[0] * x[0] / (r3 * r2))
}

/// Offsets with `max |d_i|` up to this are averaged by quadrature.
const NEAR: usize = 4;

/// Tent-weighted average of `W_α(h(d + u))` over `u ∈ [-1, 1]³`.
fn cell_pair_kernel(
    d: [usize; 3],
    h: f64,
    alpha: f64,
    rule: &(Vec<f64>, Vec<f64>),
    k0: f64,
) -> f64 {
    if d == [0, 0, 0] {
        return (1.0 + alpha / 3.0) * k0 / h;
    }
    let dist = d.iter().copied().max().unwrap_or(0);
    let x = [d[0] as f64 * h, d[1] as f64 * h, d[2] as f64 * h];
    if dist > NEAR {
        return w3(x, alpha) + h * h / 12.0 * laplacian_w3(x, alpha);
    }
    // Split each axis at 0 where the tent weight has its kink.
    let (nodes, weights) = rule;
    let mut pts = Vec::with_capacity(2 * nodes.len());
    for (t, w) in nodes.iter().zip(weights) {
        for side in [-1.0, 1.0] {
            let u = side * 0.5 * (t + 1.0);
            pts.push((u, 0.5 * w * (1.0 - u.abs())));
        }
    }
    let mut sum = 0.0;
    for &(u0, w0) in &pts {
        for &(u1, w1) in &pts {
            for &(u2, w2) in &pts {
                let y = [x[0] + h * u0, x[1] + h * u1, x[2] + h * u2];
                sum += w0 * w1 * w2 * w3(y, alpha);
            }
        }
    }
    sum
}

fn real_side(density: &DensityGrid, alpha: f64) -> f64 {
    let m = density.m;
    let p = 2 * m;
    let h = density.h;
    let rule = gauss_legendre(10);
    let k0 = cube_self_inverse_distance();
    // The averaged kernel is even in every coordinate: tabulate one octant.
    let octant: Vec<f64> = (0..m * m * m)
        .into_par_iter()
        .map(|idx| cell_pair_kernel([idx / (m * m), (idx / m) % m, idx % m], h, alpha, &rule, k0))
        .collect();
    let mut kernel = vec![Complex64::new(0.0, 0.0); p * p * p];
    let wrap = |d: isize| d.rem_euclid(p as isize) as usize;
    for i in -(m as isize - 1)..m as isize {
        for j in -(m as isize - 1)..m as isize {
            for k in -(m as isize - 1)..m as isize {
                let v = octant[(i.unsigned_abs() * m + j.unsigned_abs()) * m + k.unsigned_abs()];
                kernel[(wrap(i) * p + wrap(j)) * p + wrap(k)] = Complex64::new(v, 0.0);
            }
        }
    }
    let mut field = vec![Complex64::new(0.0, 0.0); p * p * p];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                field[(i * p + j) * p + k] =
                    Complex64::new(density.values[(i * m + j) * m + k], 0.0);
            }
        }
    }
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(p);
    let inverse = planner.plan_fft_inverse(p);
    fft3(&mut kernel, p, &forward);
    fft3(&mut field, p, &forward);
    field.par_iter_mut().zip(&kernel).for_each(|(f, k)| *f *= k);
    fft3(&mut field, p, &inverse);
    let norm = (p * p * p) as f64;
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                total += density.values[(i * m + j) * m + k] * field[(i * p + j) * p + k].re / norm;
            }
        }
    }
    total
}

/// In-place 3-D transform of a `p³` array, one axis at a time.
fn fft3(data: &mut [Complex64], p: usize, fft: &Arc<dyn Fft<f64>>) {
    data.par_chunks_mut(p).for_each(|line| fft.process(line));
    for stride in [p, p * p] {
        // Lines along the axis with the given stride, processed in parallel
        // per outer slab.
        let slab = stride * p;
        data.par_chunks_mut(slab).for_each(|block| {
            let mut line = vec![Complex64::new(0.0, 0.0); p];
            for offset in 0..stride {
                for (q, v) in line.iter_mut().enumerate() {
                    *v = block[offset + q * stride];
                }
                fft.process(&mut line);
                for (q, v) in line.iter().enumerate() {
                    block[offset + q * stride] = *v;
                }
            }
        });
    }
}

fn w_hat3(xi: [f64; 3], alpha: f64, pre: f64) -> f64 {
    let axial = xi[0] * xi[0];
    let r2 = axial + xi[1] * xi[1] + xi[2] * xi[2];
    pre * ((1.0 - alpha) * axial + (1.0 + alpha) * (r2 - axial)) / (r2 * r2)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `Σ' |k|^{-2}` over `ℤ³ \ {0}`, continued analytically (Epstein zeta).
///
/// Uses the theta-function splitting at `t = 1`:
/// `π (∫₁^∞ (θ(t) - 1)(1 + t^{-1/2}) dt - 3)` with `θ(t) = (Σ_j e^{-π t j²})³`.
fn lattice_zeta() -> f64 {
    let theta_minus_one = |t: f64| {
        let mut s = 1.0;
        for j in 1..20 {
            let term = 2.0 * (-std::f64::consts::PI * t * (j * j) as f64).exp();
            s += term;
            if term < 1e-18 {
                break;
            }
        }
        s * s * s - 1.0
    };
    let cfg = QuadConfig {
        abs_tol: 0.0,
        rel_tol: 1e-13,
        max_intervals: 200,
    };
    let f = |t: f64| theta_minus_one(t) * (1.0 + 1.0 / t.sqrt());
    let tail = integrate_tail(f, 1.0, 1.0, &cfg)
        .map(|e| e.value)
        .unwrap_or(f64::NAN);
    std::f64::consts::PI * (tail - 3.0)
}

/// `∫ ξ₁⁴/|ξ|⁴` and `∫ ξ₁²ξ₂²/|ξ|⁴` over the centred unit cube.
fn cube_quartic_moments() -> (f64, f64) {
    // Radial integration from the centre leaves `(1/6) h(p/|p|)` on each face.
    let (x, w) = gauss_legendre(24);
    let (mut p, mut q) = (0.0, 0.0);
    for (u, wu) in x.iter().zip(&w) {
        for (v, wv) in x.iter().zip(&w) {
            let (u, v) = (0.5 * u, 0.5 * v);
            let r4 = (u * u + v * v + 0.25).powi(2);
            let weight = 0.25 * wu * wv / 6.0 / r4;
            // faces normal to ξ₁ (two), and to ξ₂ or ξ₃ (four)
            p += weight * (2.0 * 0.0625 + 4.0 * u.powi(4));
            q += weight * (4.0 * 0.25 * u * u + 2.0 * u * u * v * v);
        }
    }
    (p, q)
}

/// Moments of the density: mass, first moments and the diagonal second moments.
fn moments(density: &DensityGrid) -> (f64, [f64; 3], [f64; 3]) {
    let m = density.m;
    let half = (m as f64 - 1.0) / 2.0;
    let h = density.h;
    let (mut mass, mut first, mut second) = (0.0, [0.0; 3], [0.0; 3]);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let v = density.values[(i * m + j) * m + k];
                let x = [
                    (i as f64 - half) * h,
                    (j as f64 - half) * h,
                    (k as f64 - half) * h,
                ];
                mass += v;
                for d in 0..3 {
                    first[d] += v * x[d];
                    // a uniform cell adds h²/12 per axis
                    second[d] += v * (x[d] * x[d] + h * h / 12.0);
                }
            }
        }
    }
    (mass, first, second)
}

/// The lattice sum `Σ_{k≠0} L^{-3} Ŵ_α(k/L) |ν̂(k/L)|²` plus the correction
/// for the singularity at `ξ = 0`.
///
/// Away from the origin the integrand is smooth and the lattice sum is
/// spectrally accurate. Near it, `|ν̂|² = M² - 4π² ξᵀ T ξ + O(|ξ|⁴)`; the
/// `M² Ŵ_α` part has lattice-sum error `M² κ (A + 2B)/3 · ζ / L` with `ζ`
/// the lattice zeta value, and the quadratic part misses the integral over
/// the central cell.
fn fourier_parts(density: &DensityGrid, alpha: f64, periods: usize) -> (f64, f64, f64) {
    let m = density.m;
    let len = m as f64 * density.h;
    let delta = 1.0 / len;
    let mut dft: Vec<Complex64> = density
        .values
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(m);
    fft3(&mut dft, m, &fft);
    let power: Vec<f64> = dft.iter().map(|c| c.norm_sqr()).collect();

    let pre = fourier_prefactor(N);
    let half = (periods * m / 2) as isize;
    let lo = -half;
    let hi = (periods * m) as isize - half;
    let form: Vec<f64> = (lo..hi)
        .map(|k| sinc(std::f64::consts::PI * k as f64 / m as f64).powi(2))
        .collect();
    let idx = |k: isize| k.rem_euclid(m as isize) as usize;
    let vol = delta * delta * delta;
    let lattice: f64 = (lo..hi)
        .into_par_iter()
        .map(|k0| {
            let mut slab = 0.0;
            for k1 in lo..hi {
                for k2 in lo..hi {
                    if k0 == 0 && k1 == 0 && k2 == 0 {
                        continue;
                    }
                    let xi = [k0 as f64 * delta, k1 as f64 * delta, k2 as f64 * delta];
                    let p = power[(idx(k0) * m + idx(k1)) * m + idx(k2)];
                    let f = form[(k0 - lo) as usize]
                        * form[(k1 - lo) as usize]
                        * form[(k2 - lo) as usize];
                    slab += w_hat3(xi, alpha, pre) * p * f;
                }
            }
            slab
        })
        .collect::<Vec<_>>()
        .iter()
        .sum::<f64>()
        * vol;

    let (a, b) = (1.0 - alpha, 1.0 + alpha);
    let (mass, first, second) = moments(density);
    let monopole = -mass * mass * pre * (a + 2.0 * b) / 3.0 * lattice_zeta() * delta;
    let (p4, q4) = cube_quartic_moments();
    let t: Vec<f64> = (0..3)
        .map(|d| mass * second[d] - first[d] * first[d])
        .collect();
    let w_axis = pre * vol * (a * p4 + 2.0 * b * q4);
    let w_trans = pre * vol * (a * q4 + b * (p4 + q4));
    let quadratic = -4.0 * std::f64::consts::PI.powi(2) * (t[0] * w_axis + (t[1] + t[2]) * w_trans);
    (lattice, monopole, quadratic)
}

fn fourier_side(density: &DensityGrid, alpha: f64, periods: usize) -> f64 {
    let (lattice, monopole, quadratic) = fourier_parts(density, alpha, periods);
    lattice + monopole + quadratic
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_constants() {
        // Mean inverse distance in the unit cube and ∫|y|^{-2} over it.
        assert!((cube_self_inverse_distance() - 1.882_312_644_389_660_2).abs() < 1e-12);
        let (p, q) = cube_quartic_moments();
        assert!((3.0 * p + 6.0 * q - 1.0).abs() < 1e-12);
        assert!((lattice_zeta() + 8.913_632_917_585_15).abs() < 1e-11);
    }

    #[test]
    fn fft3_matches_direct_dft() {
        let p = 4;
        let data: Vec<Complex64> = (0..p * p * p)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut out = data.clone();
        fft3(&mut out, p, &FftPlanner::new().plan_fft_forward(p));
        let tau = 2.0 * std::f64::consts::PI / p as f64;
        for a in 0..p {
            for b in 0..p {
                for c in 0..p {
                    let mut s = Complex64::new(0.0, 0.0);
                    for i in 0..p {
                        for j in 0..p {
                            for k in 0..p {
                                let ph = -tau * (a * i + b * j + c * k) as f64;
                                s += data[(i * p + j) * p + k] * Complex64::from_polar(1.0, ph);
                            }
                        }
                    }
                    assert!((s - out[(a * p + b) * p + c]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn far_cell_kernel_matches_quadrature() {
        // The Laplacian-corrected point value against the tent quadrature.
        let rule = gauss_legendre(10);
        let k0 = cube_self_inverse_distance();
        for alpha in [0.0, 1.0] {
            let d = [NEAR + 1, 2, 1];
            let h = 0.1;
            let x = [d[0] as f64 * h, d[1] as f64 * h, d[2] as f64 * h];
            let approx = w3(x, alpha) + h * h / 12.0 * laplacian_w3(x, alpha);
            let mut pts = Vec::new();
            for (t, w) in rule.0.iter().zip(&rule.1) {
                for side in [-1.0, 1.0] {
                    let u = side * 0.5 * (t + 1.0);
                    pts.push((u, 0.5 * w * (1.0 - u.abs())));
                }
            }
            let mut exact = 0.0;
            for &(u0, w0) in &pts {
                for &(u1, w1) in &pts {
                    for &(u2, w2) in &pts {
                        exact +=
                            w0 * w1 * w2 * w3([x[0] + h * u0, x[1] + h * u1, x[2] + h * u2], alpha);
                    }
                }
            }
            assert!((approx - exact).abs() < 2e-5 * exact, "{approx} vs {exact}");
            let _ = cell_pair_kernel([1, 0, 0], h, alpha, &rule, k0);
        }
    }
}
