use super::*;
use crate::equilibrium::solve_equilibrium;

fn grid() -> GridConfig {
    GridConfig {
        interior_points: 1000,
        z_points: 120,
        z_max_factor: 10.0,
        smoke_steps: 21,
    }
}

#[test]
fn halton_points_fill_the_section() {
    let s = Spheroid::new(0.7, 1.3, 3).unwrap();
    let pts = interior_grid(&s, 1000);
    assert!(pts
        .iter()
        .all(|&(x1, r)| r >= 0.0 && s.quadratic_form(x1, r) <= 1.0));
    // quasi-random points reach all four quadrants of the section
    assert!(pts.iter().any(|&(x1, r)| x1 > 0.6 && r < 0.1));
    assert!(pts.iter().any(|&(x1, r)| x1.abs() < 0.1 && r > 1.2));
}

#[test]
fn ball_interior_is_exact() {
    let sol = solve_equilibrium(0.0, 3).unwrap();
    let el1 = verify_el1(&sol, &grid()).unwrap();
    assert!(el1.max_abs_dev <= 1e-8, "{el1:?}");
    let el2 = verify_el2(&sol, &grid()).unwrap();
    assert!(
        el2.min_slack >= -1e-8 && el2.boundary_slack.abs() < 1e-8,
        "{el2:?}"
    );
    assert!(el2.derivative_min().is_none());
}

#[test]
fn oblate_equilibrium_passes() {
    let sol = solve_equilibrium(1.0, 3).unwrap();
    let report = verify(&sol, &grid(), EL_TOL).unwrap();
    assert!(report.passed, "{report:?}");
    assert!(report.interior_max_abs_dev <= 1e-6);
    assert!(report.exterior.boundary_slack.abs() < 1e-8);
    assert!(report.exterior.boundary_b.unwrap().abs() < 1e-8);
    assert!(report.derivative_min.unwrap() >= -1e-10);
    assert!((report.interior.recovered_constant - sol.c_alpha).abs() < 1e-6);
}

#[test]
fn prolate_equilibrium_passes() {
    for n in [3, 4] {
        let sol = solve_equilibrium(-0.5, n).unwrap();
        let report = verify(&sol, &grid(), EL_TOL).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.derivative_min.unwrap() >= -1e-10);
    }
}

#[test]
fn perturbed_shapes_fail_the_interior_check() {
    let sol = solve_equilibrium(1.0, 3).unwrap();
    for factor in [0.9, 1.1] {
        let el1 = perturbed_el1(&sol, factor, &grid()).unwrap();
        assert!(el1.max_abs_dev >= 1e-3, "factor {factor}: {el1:?}");
    }
}

#[test]
fn wrong_constant_shows_in_exterior_slack() {
    let sol = solve_equilibrium(1.0, 3).unwrap();
    let frag = check_exterior(&sol.spheroid(), 1.0, sol.c_alpha + 1e-3, &grid()).unwrap();
    assert!(frag.min_slack < -5e-4);
}

#[test]
fn integrated_identity_holds_at_equilibrium() {
    // Integrating the interior condition against μ gives C = I - M₂/2.
    for (alpha, n) in [(0.0, 3), (1.0, 3), (-0.5, 4), (2.0, 4)] {
        let sol = solve_equilibrium(alpha, n).unwrap();
        let ids = constant_identities(&sol.spheroid(), alpha, sol.c_alpha).unwrap();
        assert!(ids.integrated_residual.abs() < 1e-9, "{ids:?}");
    }
}

#[test]
fn second_moment_values() {
    let ball = Spheroid::ball(1.7, 4).unwrap();
    assert!((second_moment(&ball) - 1.7 * 1.7 * 4.0 / 6.0).abs() < 1e-14);
    assert!((second_moment(&Spheroid::ball(1.0, 3).unwrap()) - 0.6).abs() < 1e-15);
    assert!((second_moment(&Spheroid::new(2.0, 1.0, 3).unwrap()) - 1.2).abs() < 1e-15);
}

#[test]
fn second_moment_by_sampling() {
    let s = Spheroid::new(2.0, 1.0, 3).unwrap();
    let est = total_energy(
        &s,
        0.0,
        &EnergyBudget {
            samples: 10_000_000,
            seed: 9,
        },
    )
    .unwrap();
    assert!(
        (est.confinement - 1.2).abs() < 3.0 * est.confinement_error,
        "{est:?}"
    );
}

#[test]
fn unit_ball_energy() {
    let s = Spheroid::ball(1.0, 3).unwrap();
    assert!((interaction_energy(&s, 0.0).unwrap() - 1.2).abs() < 1e-12);
    let est = total_energy(
        &s,
        0.0,
        &EnergyBudget {
            samples: 1 << 20,
            seed: 3,
        },
    )
    .unwrap();
    assert!(
        (est.interaction - 1.2).abs() < 3.0 * est.interaction_error,
        "{est:?}"
    );
    assert!(
        (est.confinement - 0.6).abs() < 3.0 * est.confinement_error,
        "{est:?}"
    );
    assert!(est.interaction_error < 2e-3);
}

#[test]
fn monte_carlo_matches_closed_form() {
    for (a, b, n, alpha) in [(0.6, 1.1, 3, 1.0), (1.5, 0.8, 4, -0.5), (0.9, 1.2, 4, 2.0)] {
        let s = Spheroid::new(a, b, n).unwrap();
        let est = total_energy(
            &s,
            alpha,
            &EnergyBudget {
                samples: 1 << 20,
                seed: 1,
            },
        )
        .unwrap();
        let exact = interaction_energy(&s, alpha).unwrap();
        assert!(
            (est.interaction - exact).abs() < 4.0 * est.interaction_error,
            "{est:?} vs {exact}"
        );
    }
}

#[test]
fn interaction_scales_with_dilation() {
    for n in [3, 4] {
        let s = Spheroid::new(0.8, 1.1, n).unwrap();
        let big = Spheroid::new(1.6, 2.2, n).unwrap();
        let ratio = interaction_energy(&big, 0.0).unwrap() / interaction_energy(&s, 0.0).unwrap();
        assert!((ratio - 2f64.powi(2 - n as i32)).abs() < 1e-10);
        // and sample by sample, since the dilation maps samples to samples
        let budget = EnergyBudget {
            samples: 10_000,
            seed: 5,
        };
        let a = total_energy(&s, 0.0, &budget).unwrap();
        let b = total_energy(&big, 0.0, &budget).unwrap();
        assert!((b.interaction / a.interaction - 2f64.powi(2 - n as i32)).abs() < 1e-12);
    }
}

#[test]
fn equilibrium_beats_unit_ball() {
    let sol = solve_equilibrium(1.0, 3).unwrap();
    let ball = Spheroid::ball(1.0, 3).unwrap();
    let cmp = compare_energies(&sol.spheroid(), &ball, 1.0, &EnergyBudget::default()).unwrap();
    assert!(cmp.difference > 3.0 * cmp.difference_error, "{cmp:?}");
    assert!(cmp.second.exact_total > cmp.first.exact_total);
}

#[test]
fn energy_estimates_are_reproducible() {
    let s = Spheroid::new(0.7, 1.2, 3).unwrap();
    let budget = EnergyBudget {
        samples: 50_000,
        seed: 11,
    };
    let a = total_energy(&s, 0.5, &budget).unwrap();
    let b = total_energy(&s, 0.5, &budget).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejects_bad_inputs() {
    let s = Spheroid::ball(1.0, 3).unwrap();
    assert!(total_energy(&s, -1.0, &EnergyBudget::default()).is_err());
    assert!(total_energy(
        &s,
        0.0,
        &EnergyBudget {
            samples: 1,
            seed: 0
        }
    )
    .is_err());
    let g = GridConfig {
        interior_points: 0,
        ..grid()
    };
    assert!(check_interior(&s, 0.0, 1.0, &g).is_err());
}

#[test]
fn report_round_trips_through_json() {
    let sol = solve_equilibrium(0.5, 3).unwrap();
    let report = verify(&sol, &grid(), EL_TOL).unwrap();
    let back: ElReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(back, report);
}

mod parseval_checks {
    use super::super::*;

    fn two_bumps(m: usize) -> DensityGrid {
        let h = 8.0 / m as f64;
        let bump = |c: f64, w: f64| {
            move |x: [f64; 3]| {
                let q = 1.0 - ((x[0] - c).powi(2) + x[1] * x[1] + x[2] * x[2]) / (w * w);
                if q > 0.0 {
                    q * q
                } else {
                    0.0
                }
            }
        };
        let a = DensityGrid::from_fn(m, h, bump(-0.4, 0.8))
            .normalized()
            .unwrap();
        let b = DensityGrid::from_fn(m, h, bump(0.5, 0.6))
            .normalized()
            .unwrap();
        a.difference(&b).unwrap()
    }

    #[test]
    fn bump_sides_agree() {
        let d = DensityGrid::smooth_bump(32, 1.0, 4.0).unwrap();
        for alpha in [0.0, 0.5, 1.0] {
            let r = parseval_check(&d, alpha).unwrap();
            assert!(r.relative_gap < 1e-2, "{r:?}");
            assert!(r.warning.is_none());
        }
    }

    #[test]
    fn gap_shrinks_under_refinement() {
        let coarse = parseval_check(&DensityGrid::smooth_bump(32, 1.0, 4.0).unwrap(), 0.0).unwrap();
        let fine = parseval_check(&DensityGrid::smooth_bump(64, 1.0, 4.0).unwrap(), 0.0).unwrap();
        assert!(
            fine.relative_gap < coarse.relative_gap,
            "{coarse:?} {fine:?}"
        );
        // a radial density sees the anisotropy only through the angular mean
        let aniso = parseval_check(&DensityGrid::smooth_bump(32, 1.0, 4.0).unwrap(), 0.6).unwrap();
        assert!((aniso.real_side / coarse.real_side - 1.2).abs() < 1e-3);
    }

    #[test]
    fn signed_density_is_positive() {
        let d = two_bumps(32);
        assert!(d.mass().abs() < 1e-12);
        for alpha in [-0.9, 0.0, 1.0] {
            let r = parseval_check(&d, alpha).unwrap();
            assert!(r.fourier_side >= 0.0, "{r:?}");
            assert!(r.real_side >= 0.0, "{r:?}");
            assert!(r.relative_gap < 1e-2, "{r:?}");
        }
    }

    #[test]
    fn sign_changes_beyond_the_threshold() {
        // Oscillation along x₁ under a wide envelope: the transform sits near
        // ±2e₁, inside the cone where Ŵ_α < 0 once α > 1.
        let m = 64;
        let h = 8.0 / m as f64;
        let d = DensityGrid::from_fn(m, h, |x| {
            let env = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp();
            env * (2.0 * std::f64::consts::PI * 2.0 * x[0]).cos()
        });
        let r = parseval_check(&d, 1.1).unwrap();
        assert!(r.fourier_side < 0.0, "{r:?}");
        assert!(r.real_side < 0.0, "{r:?}");
        let at = parseval_check(&d, 1.0).unwrap();
        assert!(at.fourier_side >= 0.0, "{at:?}");
    }

    #[test]
    fn rejects_bad_input() {
        let d = DensityGrid::smooth_bump(8, 1.0, 4.0).unwrap();
        assert!(parseval_check(&d, -1.0).is_err());
        let bad = DensityGrid {
            m: 3,
            h: 1.0,
            values: vec![0.0; 5],
        };
        assert!(parseval_check(&bad, 0.0).is_err());
    }
}
