//! The anisotropic interaction kernel and its Fourier transform.
//!
//! `W_α(x) = |x|^{2-n} + α x_1^2 / |x|^n` for `x ≠ 0` and `W_α(0) = +∞`.
//! Coincident points are reported as `f64::INFINITY` rather than as an
//! error so that energy sums stay total.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::special_functions::{check_dim, gamma_half};

/// Dimension and anisotropy strength of one member of the energy family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub n: usize,
    pub alpha: f64,
}

impl EnergyParams {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        check_dim(n)?;
        if !alpha.is_finite() {
            return domain(format!("alpha = {alpha} must be finite"));
        }
        Ok(Self { n, alpha })
    }

    /// Rejects `α` outside `(-1, n-2]`, where the minimiser is not a spheroid.
    pub fn for_solving(n: usize, alpha: f64) -> Result<Self> {
        let p = Self::new(n, alpha)?;
        p.check_solvable()?;
        Ok(p)
    }

    pub fn check_solvable(&self) -> Result<()> {
        let upper = self.n as f64 - 2.0;
        if !(self.alpha > -1.0 && self.alpha <= upper) {
            return domain(format!(
                "alpha = {} outside (-1, {}] for n = {}",
                self.alpha, upper, self.n
            ));
        }
        Ok(())
    }
}

#[inline]
fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `π^{n/2-2} / (2 Γ(n/2))`, the common prefactor of the transforms.
pub fn fourier_prefactor(n: usize) -> f64 {
    std::f64::consts::PI.powf(n as f64 / 2.0 - 2.0) / (2.0 * gamma_half(n as u32))
}

/// Kernel value; `+∞` at the origin.
pub fn w_alpha(x: &[f64], p: &EnergyParams) -> f64 {
    assert_eq!(x.len(), p.n, "point dimension does not match n");
    w_alpha_unchecked(x, p.n, p.alpha)
}

#[inline]
pub(crate) fn w_alpha_unchecked(x: &[f64], n: usize, alpha: f64) -> f64 {
    let r2 = norm_sq(x);
    if r2 == 0.0 {
        return f64::INFINITY;
    }
    let inv = r2.powf(-(n as f64) / 2.0);
    inv * (r2 + alpha * x[0] * x[0])
}

/// Exact gradient of `W_α` at a nonzero point.
pub fn grad_w_alpha(x: &[f64], p: &EnergyParams) -> Result<Vec<f64>> {
    assert_eq!(x.len(), p.n, "point dimension does not match n");
    let mut out = vec![0.0; p.n];
    if !grad_w_alpha_into(x, p.n, p.alpha, &mut out) {
        return domain("gradient of W_alpha is undefined at the origin");
    }
    Ok(out)
}

/// Writes `∇W_α(x)` into `out`; returns `false` at the origin.
#[inline]
pub(crate) fn grad_w_alpha_into(x: &[f64], n: usize, alpha: f64, out: &mut [f64]) -> bool {
    let r2 = norm_sq(x);
    if r2 == 0.0 {
        return false;
    }
    let nf = n as f64;
    let inv_n = r2.powf(-nf / 2.0);
    let x1 = x[0];
    // ∇|x|^{2-n} = -(n-2) x |x|^{-n};  ∇(x1^2 |x|^{-n}) = 2 x1 |x|^{-n} e1 - n x1^2 |x|^{-n-2} x
    let radial = -(nf - 2.0) * inv_n - alpha * nf * x1 * x1 * inv_n / r2;
    for (o, xi) in out.iter_mut().zip(x) {
        *o = radial * xi;
    }
    out[0] += 2.0 * alpha * x1 * inv_n;
    true
}

/// `W_α(x)` and, if requested, `∇W_α(x)` for `x ≠ 0`, using integer powers
/// only. Hot loop of the particle flow.
#[inline]
pub(crate) fn w_and_grad(x: &[f64], n: usize, alpha: f64, grad: Option<&mut [f64]>) -> f64 {
    let r2 = norm_sq(x);
    let inv_r2 = 1.0 / r2;
    let half = inv_r2.powi(n as i32 / 2);
    // |x|^{-n}
    let inv_n = if n.is_multiple_of(2) {
        half
    } else {
        half * inv_r2.sqrt()
    };
    let x1 = x[0];
    let w = inv_n * (r2 + alpha * x1 * x1);
    if let Some(g) = grad {
        let nf = n as f64;
        let radial = -(nf - 2.0) * inv_n - alpha * nf * x1 * x1 * inv_n * inv_r2;
        for (o, xi) in g.iter_mut().zip(x) {
            *o = radial * xi;
        }
        g[0] += 2.0 * alpha * x1 * inv_n;
    }
    w
}

/// Pointwise density of the Fourier transform of `W_α` at `ξ ≠ 0`.
pub fn w_hat_alpha(xi: &[f64], p: &EnergyParams) -> Result<f64> {
    assert_eq!(xi.len(), p.n, "frequency dimension does not match n");
    let r2 = norm_sq(xi);
    if r2 == 0.0 {
        return domain("Fourier transform of W_alpha is evaluated only for xi != 0");
    }
    let nf = p.n as f64;
    let axial = xi[0] * xi[0];
    let transverse = r2 - axial;
    let num = (nf - 2.0 - p.alpha) * axial + (nf - 2.0 + p.alpha) * transverse;
    Ok(fourier_prefactor(p.n) * num / (r2 * r2))
}

/// `W_{-1}(x) = (x_2^2 + ... + x_n^2) / |x|^n`, `+∞` at the origin.
pub fn w_minus_one(x: &[f64], n: usize) -> f64 {
    assert_eq!(x.len(), n, "point dimension does not match n");
    let m = x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if m == 0.0 {
        return f64::INFINITY;
    }
    // Scaled so that tiny arguments do not underflow.
    let total: f64 = x.iter().map(|v| (v / m) * (v / m)).sum();
    let transverse: f64 = x[1..].iter().map(|v| (v / m) * (v / m)).sum();
    let r = m * total.sqrt();
    transverse / total * r.powi(2 - n as i32)
}

/// Fourier density of the `α → -1⁺` limit functional.
pub fn w_hat_star(xi: &[f64], n: usize) -> Result<f64> {
    assert_eq!(xi.len(), n, "frequency dimension does not match n");
    let r2 = norm_sq(xi);
    if r2 == 0.0 {
        return domain("limiting transform is evaluated only for xi != 0");
    }
    let nf = n as f64;
    let axial = xi[0] * xi[0];
    let num = (nf - 1.0) * axial + (nf - 3.0) * (r2 - axial);
    Ok(fourier_prefactor(n) * num / (r2 * r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn pointwise_values() {
        let p = EnergyParams::new(3, 0.5).unwrap();
        assert_eq!(w_alpha(&e(3, 0), &p), 1.5);
        assert_eq!(w_alpha(&e(3, 1), &p), 1.0);
        assert_eq!(w_alpha(&[0.0; 3], &p), f64::INFINITY);
    }

    #[test]
    fn gradient_examples() {
        let p = EnergyParams::new(3, 1.7).unwrap();
        assert_eq!(grad_w_alpha(&e(3, 1), &p).unwrap()[0], 0.0);
        let p0 = EnergyParams::new(3, 0.0).unwrap();
        let g = grad_w_alpha(&e(3, 0), &p0).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-15 && g[1] == 0.0 && g[2] == 0.0);
        assert!(grad_w_alpha(&[0.0; 3], &p).is_err());
    }

    #[test]
    fn transform_examples() {
        let n = 3;
        let p = EnergyParams::new(n, 1.0).unwrap();
        assert!(w_hat_alpha(&e(n, 0), &p).unwrap().abs() < 1e-16);
        let p4 = EnergyParams::new(4, 0.0).unwrap();
        assert!((w_hat_alpha(&e(4, 1), &p4).unwrap() - 1.0).abs() < 1e-14);
        let pi = std::f64::consts::PI;
        let expect = (pi.powf(-0.5) / (2.0 * pi.sqrt() / 2.0)) * 2.0 / 4.0;
        assert!((w_hat_alpha(&[1.0, 1.0, 0.0], &p).unwrap() - expect).abs() < 1e-15);
        assert!(w_hat_alpha(&[0.0; 3], &p).is_err());
    }

    #[test]
    fn limit_kernels() {
        assert_eq!(w_minus_one(&e(3, 0), 3), 0.0);
        assert_eq!(w_minus_one(&e(3, 1), 3), 1.0);
        assert_eq!(w_minus_one(&[0.0; 3], 3), f64::INFINITY);
        // Along the x1 axis the kernel vanishes arbitrarily close to the origin.
        for s in [1e-3, 1e-9, 1e-200] {
            assert_eq!(w_minus_one(&[s, 0.0, 0.0], 3), 0.0);
        }
        assert!(w_hat_star(&e(3, 1), 3).unwrap().abs() < 1e-16);
        for n in 3..8 {
            let expect = fourier_prefactor(n) * (n as f64 - 1.0);
            assert!((w_hat_star(&e(n, 0), n).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn solvable_range() {
        assert!(EnergyParams::for_solving(3, -1.0).is_err());
        assert!(EnergyParams::for_solving(3, 1.0).is_ok());
        assert!(EnergyParams::for_solving(3, 1.0 + 1e-12).is_err());
        assert!(EnergyParams::for_solving(2, 0.0).is_err());
        assert!(EnergyParams::new(3, 7.0).is_ok());
    }

    fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0..3.0f64, n).prop_filter("nonzero", |v| norm_sq(v) > 1e-4)
    }

    proptest! {
        #[test]
        fn decomposition_and_positivity(x in point(4), alpha in -0.999..5.0f64) {
            let p = EnergyParams::new(4, alpha).unwrap();
            let r2 = norm_sq(&x);
            let alt = r2.powf(-2.0) * ((1.0 + alpha) * x[0] * x[0] + (r2 - x[0] * x[0]));
            let w = w_alpha(&x, &p);
            prop_assert!(((w - alt) / alt).abs() < 1e-12);
            prop_assert!(w > 0.0);
        }

        #[test]
        fn homogeneity_and_symmetry(x in point(3), alpha in -0.9..2.0f64, lambda in 0.1..10.0f64) {
            let p = EnergyParams::new(3, alpha).unwrap();
            let w = w_alpha(&x, &p);
            let scaled: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            prop_assert!((w_alpha(&scaled, &p) - w / lambda).abs() < 1e-12 * w.max(1.0));
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert_eq!(w_alpha(&neg, &p), w);
            // rotation about the x1 axis
            let (s, c) = 0.7f64.sin_cos();
            let rot = vec![x[0], c * x[1] - s * x[2], s * x[1] + c * x[2]];
            prop_assert!((w_alpha(&rot, &p) - w).abs() < 1e-12 * w);
            let h = w_hat_alpha(&x, &p).unwrap();
            prop_assert!((w_hat_alpha(&scaled, &p).unwrap() - h / (lambda * lambda)).abs() < 1e-12 * h.abs().max(1.0));
        }

        #[test]
        fn comparability_with_coulomb(x in point(3), alpha in -0.99..4.0f64) {
            let p = EnergyParams::new(3, alpha).unwrap();
            let p0 = EnergyParams::new(3, 0.0).unwrap();
            let c = (1.0 + alpha).max(1.0) * (1.0 / (1.0 + alpha)).max(1.0);
            let w = w_alpha(&x, &p);
            let w0 = w_alpha(&x, &p0);
            prop_assert!(w0 / c <= w * (1.0 + 1e-12) && w <= c * w0 * (1.0 + 1e-12));
        }

        #[test]
        fn gradient_matches_finite_difference(x in point(4)) {
            let p = EnergyParams::new(4, 1.0).unwrap();
            prop_assume!(norm_sq(&x) > 0.05);
            let g = grad_w_alpha(&x, &p).unwrap();
            let h = 1e-6;
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            for i in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (w_alpha(&xp, &p) - w_alpha(&xm, &p)) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() <= 1e-6 * gnorm.max(1e-3), "i={} fd={} g={}", i, fd, g[i]);
            }
        }

        #[test]
        fn limit_transform_is_continuous(xi in point(5)) {
            let p = EnergyParams::new(5, -1.0 + 1e-8).unwrap();
            let a = w_hat_alpha(&xi, &p).unwrap();
            let b = w_hat_star(&xi, 5).unwrap();
            prop_assert!((a - b).abs() <= 1e-6);
            let x = xi.clone();
            let pm = EnergyParams::new(5, -1.0).unwrap();
            prop_assert!((w_alpha(&x, &pm) - w_minus_one(&x, 5)).abs() < 1e-12 * w_minus_one(&x, 5).max(1.0));
        }
    }
}
