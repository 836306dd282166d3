//! The auxiliary function `H(t)` and its companion integrals.
//!
//! For an aspect ratio `t = a^2/b^2` and dimension `n`,
//!
//! ```text
//! H(t) = ∫_0^∞ dσ / ((t+σ)^{3/2} (1+σ)^{(n-1)/2})
//! ```
//!
//! Three evaluation routes are provided and cross-checked in tests:
//!
//! * direct adaptive quadrature of the defining integral,
//! * the closed form obtained by integrating the first-order ODE
//!   `-n H + 2(1-t) H' + 2 t^{-3/2} = 0`, which reduces `H` and `H'` to one
//!   smooth integral `K(t)` on each side of `t = 1`,
//! * the Taylor series about `t = 1`, whose coefficients are exact.
//!
//! The closed form has a removable `0/0` at `t = 1`; the default evaluators
//! switch to quadrature inside `|t - 1| < 1e-3`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quadrature::{integrate, integrate_tail, QuadConfig};

pub const MIN_DIM: usize = 3;
pub const MAX_DIM: usize = 16;

/// Half-width of the window around `t = 1` where the closed form is avoided.
pub const NEAR_ONE: f64 = 1e-3;

const SERIES_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HMethod {
    Quadrature,
    ClosedForm,
    SeriesNear1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HEval {
    pub t: f64,
    pub n: usize,
    pub value: f64,
    pub method: HMethod,
}

/// The three companion integrals of `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxIntegrals {
    /// `∫ (t+σ)^{-5/2} (1+σ)^{-(n-1)/2}`, equal to `-2/3 H'(t)`.
    pub j5: f64,
    /// `∫ (t+σ)^{-1/2} (1+σ)^{-(n+1)/2}`.
    pub jb: f64,
    /// `∫ (t+σ)^{-3/2} (1+σ)^{-(n+1)/2}`.
    pub jc: f64,
}

pub fn check_dim(n: usize) -> Result<()> {
    if !(MIN_DIM..=MAX_DIM).contains(&n) {
        return domain(format!("dimension n = {n} outside {MIN_DIM}..={MAX_DIM}"));
    }
    Ok(())
}

fn check_args(t: f64, n: usize) -> Result<()> {
    check_dim(n)?;
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("aspect ratio t = {t} must be positive and finite"));
    }
    Ok(())
}

/// `Γ(k/2)` for a positive integer `k`, by the half-integer recursion.
pub fn gamma_half(k: u32) -> f64 {
    assert!(k > 0, "gamma_half requires k > 0");
    let (mut value, mut x) = if k.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    let target = k as f64 / 2.0;
    while x < target {
        value *= x;
        x += 1.0;
    }
    value
}

/// `∫_0^∞ (t+σ)^{-p} (1+σ)^{-q} dσ` by adaptive quadrature.
pub fn sigma_integral(t: f64, p: f64, q: f64, cfg: &QuadConfig) -> Result<f64> {
    let f = |s: f64| (t + s).powf(-p) * (1.0 + s).powf(-q);
    // The integrand is positive, so only the relative tolerance matters.
    let cfg = QuadConfig {
        abs_tol: 0.0,
        ..*cfg
    };
    Ok(integrate_tail(f, 0.0, t.max(1.0), &cfg)?.value)
}

fn half_exp(n: usize) -> f64 {
    (n as f64 - 1.0) / 2.0
}

fn h_quadrature(t: f64, n: usize) -> Result<f64> {
    sigma_integral(t, 1.5, half_exp(n), &QuadConfig::tight())
}

fn h_prime_quadrature(t: f64, n: usize) -> Result<f64> {
    Ok(-1.5 * sigma_integral(t, 2.5, half_exp(n), &QuadConfig::tight())?)
}

/// `K(t) = ∫_0^1 2 v^{n-3} (1 + (t-1) v^2)^{-1/2} dv`.
///
/// Below `t = 1` the substitution `v = sin φ / √(1-t)` and above it
/// `v = sinh ψ / √(t-1)` make the integrand smooth for every `t > 0`.
fn k_integral(t: f64, n: usize) -> Result<f64> {
    let m = (n - MIN_DIM) as i32;
    let cfg = QuadConfig::tight();
    if t < 1.0 {
        let q = 1.0 - t;
        let sq = q.sqrt();
        let upper = sq.asin();
        if m == 0 {
            return Ok(2.0 * upper / sq);
        }
        let f = |phi: f64| 2.0 * (phi.sin() / sq).powi(m) / sq;
        Ok(integrate(f, 0.0, upper, &cfg)?.value)
    } else if t > 1.0 {
        let p = t - 1.0;
        let sp = p.sqrt();
        let upper = sp.asinh();
        if m == 0 {
            return Ok(2.0 * upper / sp);
        }
        let f = |psi: f64| 2.0 * (psi.sinh() / sp).powi(m) / sp;
        Ok(integrate(f, 0.0, upper, &cfg)?.value)
    } else {
        Ok(2.0 / (n as f64 - 2.0))
    }
}

fn h_closed(t: f64, n: usize) -> Result<f64> {
    if t == 1.0 {
        return domain("closed form of H is singular at t = 1");
    }
    let k = k_integral(t, n)?;
    Ok((2.0 / t.sqrt() - (n as f64 - 2.0) * k) / (1.0 - t))
}

fn h_prime_closed(t: f64, n: usize) -> Result<f64> {
    if t == 1.0 {
        return domain("closed form of H' is singular at t = 1");
    }
    let nf = n as f64;
    let k = k_integral(t, n)?;
    let num = ((nf + 1.0) * t - 1.0) / (t * t.sqrt()) - 0.5 * nf * (nf - 2.0) * k;
    Ok(num / ((1.0 - t) * (1.0 - t)))
}

/// Taylor coefficients `H^{(k)}(1) / k!`.
fn series_coefficients(n: usize) -> impl Iterator<Item = f64> {
    let nf = n as f64;
    let mut ratio = 1.0;
    (0..).map(move |k: i32| {
        if k > 0 {
            let kf = k as f64;
            ratio *= -(2.0 * kf + 1.0) / (2.0 * kf);
        }
        ratio * 2.0 / (nf + 2.0 * k as f64)
    })
}

fn h_series(t: f64, n: usize) -> Result<f64> {
    let d = t - 1.0;
    if d.abs() > SERIES_RADIUS {
        return domain(format!(
            "series for H used at |t-1| = {} > {SERIES_RADIUS}",
            d.abs()
        ));
    }
    let mut sum = 0.0;
    let mut pow = 1.0;
    for c in series_coefficients(n).take(200) {
        let term = c * pow;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        pow *= d;
    }
    Ok(sum)
}

fn h_prime_series(t: f64, n: usize) -> Result<f64> {
    let d = t - 1.0;
    if d.abs() > SERIES_RADIUS {
        return domain(format!(
            "series for H' used at |t-1| = {} > {SERIES_RADIUS}",
            d.abs()
        ));
    }
    let mut sum = 0.0;
    let mut pow = 1.0;
    for (k, c) in series_coefficients(n).enumerate().skip(1).take(200) {
        let term = k as f64 * c * pow;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        pow *= d;
    }
    Ok(sum)
}

fn default_method(t: f64) -> HMethod {
    if (t - 1.0).abs() < NEAR_ONE {
        HMethod::Quadrature
    } else {
        HMethod::ClosedForm
    }
}

/// `H(t)` by the requested route.
pub fn h_eval(t: f64, n: usize, method: HMethod) -> Result<HEval> {
    check_args(t, n)?;
    let value = match method {
        HMethod::Quadrature => h_quadrature(t, n)?,
        HMethod::ClosedForm => h_closed(t, n)?,
        HMethod::SeriesNear1 => h_series(t, n)?,
    };
    Ok(HEval {
        t,
        n,
        value,
        method,
    })
}

/// `H'(t)` by the requested route.
pub fn h_prime_eval(t: f64, n: usize, method: HMethod) -> Result<HEval> {
    check_args(t, n)?;
    let value = match method {
        HMethod::Quadrature => h_prime_quadrature(t, n)?,
        HMethod::ClosedForm => h_prime_closed(t, n)?,
        HMethod::SeriesNear1 => h_prime_series(t, n)?,
    };
    Ok(HEval {
        t,
        n,
        value,
        method,
    })
}

/// `H(t)`: closed form away from `t = 1`, quadrature near it.
pub fn h(t: f64, n: usize) -> Result<f64> {
    Ok(h_eval(t, n, default_method(t))?.value)
}

/// `H'(t)`: closed form away from `t = 1`, quadrature near it.
pub fn h_prime(t: f64, n: usize) -> Result<f64> {
    Ok(h_prime_eval(t, n, default_method(t))?.value)
}

/// Companion integrals by direct quadrature.
pub fn aux_integrals(t: f64, n: usize) -> Result<AuxIntegrals> {
    check_args(t, n)?;
    let cfg = QuadConfig::tight();
    let q = half_exp(n);
    Ok(AuxIntegrals {
        j5: sigma_integral(t, 2.5, q, &cfg)?,
        jb: sigma_integral(t, 0.5, q + 1.0, &cfg)?,
        jc: sigma_integral(t, 1.5, q + 1.0, &cfg)?,
    })
}

/// `∫ (t+σ)^{-1/2} (1+σ)^{-(n-1)/2} dσ`, the value of the Coulomb
/// potential at the centre of a spheroid up to the factor `n(n-2)/(4 b^{n-2})`.
pub fn center_integral(t: f64, n: usize) -> Result<f64> {
    check_args(t, n)?;
    sigma_integral(t, 0.5, half_exp(n), &QuadConfig::tight())
}
