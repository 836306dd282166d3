//! Shape of the equilibrium spheroid.
//!
//! The aspect ratio `t = a²/b²` solves the scalar equation
//! `F(t, α) = (A(t) α + B(t)) / √t = 0`; the transverse semi-axis then
//! follows from `bⁿ = (n-2+α)/√t - α H(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::EnergyParams;
use crate::potentials::{self, Spheroid};
use crate::roots::{brent, BrentOptions};
use crate::special_functions::{check_dim, h, h_prime};

/// Largest admissible `|F|` at an accepted root.
pub const RESIDUAL_TOL: f64 = 1e-10;

const LOWER_BRACKET: f64 = 1e-8;
const UPPER_CAP: f64 = 1e12;

/// A solved equilibrium: the support `Ω(a, b)` and the Euler–Lagrange constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub params: EnergyParams,
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub c_alpha: f64,
}

impl EquilibriumSolution {
    pub fn spheroid(&self) -> Spheroid {
        Spheroid {
            a: self.a,
            b: self.b,
            n: self.params.n,
        }
    }

    /// Checks the structural invariants; used when a solution is read back
    /// from disk rather than solved in-process.
    pub fn validate(&self) -> Result<()> {
        self.params.check_solvable()?;
        let ok = self.t > 0.0 && self.a > 0.0 && self.b > 0.0 && self.c_alpha.is_finite();
        if !ok {
            return Err(Error::Domain(format!(
                "invalid solution: t={}, a={}, b={}, c_alpha={}",
                self.t, self.a, self.b, self.c_alpha
            )));
        }
        let a_from_t = self.b * self.t.sqrt();
        if (a_from_t - self.a).abs() > 1e-9 * self.a {
            return Err(Error::Domain(format!(
                "a = {} is inconsistent with b*sqrt(t) = {}",
                self.a, a_from_t
            )));
        }
        Ok(())
    }
}

/// The `α → -1⁺` limit shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitingEquilibrium {
    pub n: usize,
    pub t_star: f64,
    pub b_star: f64,
}

/// `A(t)` and `B(t)` with `F(t, α) = (A α + B)/√t`.
pub fn coeff_ab(t: f64, n: usize) -> Result<(f64, f64)> {
    check_dim(n)?;
    let nf = n as f64;
    let st = t.sqrt();
    let hv = h(t, n)?;
    let hp = h_prime(t, n)?;
    let a = (nf - 1.0) * st * hv + nf * t * st * hp + 1.0;
    let b = -(nf * (nf - 2.0) / 2.0) * st * hv + (nf - 2.0);
    Ok((a, b))
}

pub fn stationarity_f(t: f64, alpha: f64, n: usize) -> Result<f64> {
    let (a, b) = coeff_ab(t, n)?;
    Ok((a * alpha + b) / t.sqrt())
}

/// Residuals of the two original coefficient equations (the `x₁²` and `r²`
/// coefficients of `Φ_α + |x|²/2` must vanish inside the support).
pub fn coefficient_residuals(t: f64, b: f64, alpha: f64, n: usize) -> Result<(f64, f64)> {
    let s = Spheroid::new(b * t.sqrt(), b, n)?;
    let c = potentials::InteriorCoefficients::new(&s, alpha)?;
    Ok((c.axial + 0.5, c.transverse + 0.5))
}

/// Root of `F(·, α)`.
pub fn solve_aspect_ratio(alpha: f64, n: usize) -> Result<f64> {
    EnergyParams::for_solving(n, alpha)?;
    if alpha == 0.0 {
        return Ok(1.0);
    }
    let f = |t: f64| stationarity_f(t, alpha, n);
    let opts = BrentOptions::default();
    let t = if alpha > 0.0 {
        brent(f, LOWER_BRACKET, 1.0, &opts)?
    } else {
        let hi = expand_upper(|t| stationarity_f(t, alpha, n))?;
        brent(f, 1.0, hi, &opts)?
    };
    check_residual(stationarity_f(t, alpha, n)?, t)?;
    Ok(t)
}

/// Doubles `T` from 2 until `g(T) > 0`.
fn expand_upper<G: Fn(f64) -> Result<f64>>(g: G) -> Result<f64> {
    let mut hi = 2.0;
    while g(hi)? <= 0.0 {
        hi *= 2.0;
        if hi > UPPER_CAP {
            return Err(Error::Bracket { lo: 1.0, hi });
        }
    }
    Ok(hi)
}

fn check_residual(residual: f64, t: f64) -> Result<()> {
    if residual.abs() > RESIDUAL_TOL {
        return Err(Error::Inconsistent {
            what: "stationarity residual at root",
            first: t,
            second: residual,
        });
    }
    Ok(())
}

/// `bⁿ` for a given aspect ratio.
pub fn b_pow_n(t: f64, alpha: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    Ok((nf - 2.0 + alpha) / t.sqrt() - alpha * h(t, n)?)
}

pub fn solve_equilibrium(alpha: f64, n: usize) -> Result<EquilibriumSolution> {
    let params = EnergyParams::for_solving(n, alpha)?;
    let t = solve_aspect_ratio(alpha, n)?;
    let bn = if alpha == 0.0 {
        n as f64 - 2.0
    } else {
        b_pow_n(t, alpha, n)?
    };
    if bn <= 0.0 {
        return Err(Error::Degenerate(format!("b^n = {bn} at t = {t}")));
    }
    let b = bn.powf(1.0 / n as f64);
    let a = b * t.sqrt();
    let spheroid = Spheroid::new(a, b, n)?;
    let c_alpha = potentials::el_constant_for(&spheroid, alpha)?;
    Ok(EquilibriumSolution {
        params,
        t,
        a,
        b,
        c_alpha,
    })
}

/// `(t*, b*)`: `t*` is the root of `B - A` on `(1, ∞)`.
pub fn limiting_equilibrium(n: usize) -> Result<LimitingEquilibrium> {
    check_dim(n)?;
    let g = |t: f64| stationarity_f(t, -1.0, n);
    let hi = expand_upper(g)?;
    let t_star = brent(g, 1.0, hi, &BrentOptions::default())?;
    check_residual(g(t_star)?, t_star)?;
    let b_star = limiting_b(t_star, n)?;
    Ok(LimitingEquilibrium { n, t_star, b_star })
}

/// `b* = t^{-1/(2n)} (n - 3 + √t H(t))^{1/n}`.
pub fn limiting_b(t: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    let inner = nf - 3.0 + t.sqrt() * h(t, n)?;
    Ok(t.powf(-1.0 / (2.0 * nf)) * inner.powf(1.0 / nf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn coefficients_at_one() {
        let (a, b) = coeff_ab(1.0, 3).unwrap();
        assert!(close(a, 8.0 / 15.0, 1e-12));
        assert!(b.abs() < 1e-12);
        for n in 3..8 {
            let nf = n as f64;
            for alpha in [-0.9, 0.3, nf - 2.0] {
                let f = stationarity_f(1.0, alpha, n).unwrap();
                assert!(close(
                    f,
                    4.0 * (nf - 1.0) * alpha / (nf * (nf + 2.0)),
                    1e-10
                ));
            }
        }
    }

    #[test]
    fn coefficient_limits() {
        for n in [3, 4, 6] {
            let nf = n as f64;
            let (a0, b0) = coeff_ab(1e-10, n).unwrap();
            assert!((a0 - (nf - 1.0)).abs() < 1e-3, "n={n} A(0)={a0}");
            assert!(
                (b0 + (nf - 1.0) * (nf - 2.0)).abs() < 1e-3,
                "n={n} B(0)={b0}"
            );
            let (ai, bi) = coeff_ab(1e10, n).unwrap();
            assert!((ai - 1.0).abs() < 1e-3, "n={n} A(inf)={ai}");
            assert!((bi - (nf - 2.0)).abs() < 1e-3, "n={n} B(inf)={bi}");
        }
    }

    #[test]
    fn small_t_limit_of_f() {
        // F(t, n-2) → -(n-2)³/2 · ∫₀¹ s^{-1/2} ds = -8 for n = 4.
        let f = stationarity_f(1e-10, 2.0, 4).unwrap();
        assert!((f + 8.0).abs() < 1e-3, "{f}");
    }

    #[test]
    fn golden_equilibria() {
        // independent bisection in 30-digit arithmetic
        let cases = [
            (3, 1.0, 0.135_182_423_087_628, 1.284_570_091_446_88),
            (3, -0.5, 2.092_403_937_640_45, 0.800_223_363_864_640),
            (3, 0.5, 0.496_995_028_776_452, 1.149_197_929_142_30),
            (3, -0.3, 1.516_447_403_648_64, 0.889_891_832_805_386),
            (3, -0.6, 2.530_185_288_384_03, 0.747_355_178_111_084),
            (4, -0.5, 1.299_524_623_791_45, 1.108_041_128_015_66),
            (4, 1.0, 0.608_479_956_218_281, 1.320_083_636_886_66),
            (4, 2.0, 0.315_341_561_573_509, 1.431_734_492_812_05),
            (5, 1.0, 0.775_036_076_453_906, 1.320_846_205_416_82),
        ];
        for (n, alpha, t, b) in cases {
            let sol = solve_equilibrium(alpha, n).unwrap();
            assert!(
                close(sol.t, t, 1e-11),
                "n={n} α={alpha}: t={} vs {t}",
                sol.t
            );
            assert!(
                close(sol.b, b, 1e-11),
                "n={n} α={alpha}: b={} vs {b}",
                sol.b
            );
            assert!(close(sol.a, sol.b * sol.t.sqrt(), 1e-15));
        }
    }

    #[test]
    fn ball_at_zero() {
        for n in 3..=6 {
            let sol = solve_equilibrium(0.0, n).unwrap();
            let r = (n as f64 - 2.0).powf(1.0 / n as f64);
            assert_eq!(sol.t, 1.0);
            assert!(close(sol.a, r, 1e-14) && close(sol.b, r, 1e-14));
        }
        let sol = solve_equilibrium(0.0, 3).unwrap();
        assert!(close(sol.c_alpha, 1.5, 1e-10));
    }

    #[test]
    fn limiting_golden() {
        let l3 = limiting_equilibrium(3).unwrap();
        assert!(close(l3.t_star, 18.028_366_365_910_656, 1e-10));
        assert!(close(l3.b_star, 0.320_167_563_162_94, 1e-10));
        let l4 = limiting_equilibrium(4).unwrap();
        assert!(close(l4.t_star, 1.770_885_145_736_552, 1e-10));
        assert!(close(l4.b_star, 1.006_956_375_885_103, 1e-10));
        // t(α) approaches t* from below as α → -1.
        let t = solve_aspect_ratio(-1.0 + 1e-6, 3).unwrap();
        assert!((t - l3.t_star).abs() < 1e-2 && t < l3.t_star);
    }

    #[test]
    fn residual_and_sign_structure() {
        for n in [3, 4, 5] {
            let top = n as f64 - 2.0;
            let mut prev = f64::INFINITY;
            for k in 0..12 {
                let alpha = -0.9 + (top + 0.9) * k as f64 / 11.0;
                let t = solve_aspect_ratio(alpha, n).unwrap();
                assert!(stationarity_f(t, alpha, n).unwrap().abs() <= RESIDUAL_TOL);
                assert!(t < prev, "n={n}: t not decreasing at α={alpha}");
                if alpha > 0.0 {
                    assert!(t < 1.0);
                } else if alpha < 0.0 {
                    assert!(t > 1.0);
                }
                prev = t;
            }
        }
    }

    #[test]
    fn single_sign_change() {
        for (n, alpha) in [(3, 1.0), (3, -0.7), (4, 2.0), (5, -0.4)] {
            let mut changes = 0;
            let mut prev = None;
            for k in 0..1000 {
                let t = 10f64.powf(-6.0 + 12.0 * k as f64 / 999.0);
                let s = stationarity_f(t, alpha, n).unwrap().signum();
                if let Some(p) = prev {
                    if p != s {
                        changes += 1;
                    }
                }
                prev = Some(s);
            }
            assert_eq!(changes, 1, "n={n} α={alpha}");
        }
    }

    #[test]
    fn original_coefficient_equations() {
        for (n, alpha) in [(3, 1.0), (3, -0.5), (4, 2.0), (5, -0.8)] {
            let sol = solve_equilibrium(alpha, n).unwrap();
            let (r1, r2) = coefficient_residuals(sol.t, sol.b, alpha, n).unwrap();
            assert!(
                r1.abs() < 1e-8 && r2.abs() < 1e-8,
                "n={n} α={alpha}: {r1} {r2}"
            );
        }
    }

    #[test]
    fn lower_bounds_on_b() {
        for (n, alpha) in [(3, 1.0), (3, 0.4), (3, -0.5), (4, -0.9), (6, 4.0)] {
            let sol = solve_equilibrium(alpha, n).unwrap();
            let nf = n as f64;
            let bn = sol.b.powi(n as i32);
            let bound = (nf - 2.0 - alpha.abs()) / sol.t.sqrt();
            assert!(bn > bound);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(solve_aspect_ratio(-1.0, 3), Err(Error::Domain(_))));
        assert!(matches!(solve_aspect_ratio(1.01, 3), Err(Error::Domain(_))));
        assert!(solve_aspect_ratio(1.0, 3).is_ok());
    }

    #[test]
    fn solution_round_trip() {
        let sol = solve_equilibrium(1.0, 3).unwrap();
        let json = serde_json::to_string(&sol).unwrap();
        let back: EquilibriumSolution = serde_json::from_str(&json).unwrap();
        assert_eq!(sol, back);
        back.validate().unwrap();
    }
}
