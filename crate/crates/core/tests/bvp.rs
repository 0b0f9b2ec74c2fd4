mod common;

use common::{free_width, gaussian, grid, l1, width};
use madelung_bvp::action::{continuity_residual, guidance_residual, qhj_residual};
use madelung_bvp::bvp::{
    action_of_history, solve_bvp_primal_dual, solve_bvp_shooting, BoundaryData, SolveReport,
    SolverConfig,
};
use madelung_bvp::gridfields::{integrate_slice, Field, History, PhysParams, Potential, SpaceTimeGrid};
use madelung_bvp::trajectories::{gaussian_history, GaussianParams};

fn spreading() -> (SpaceTimeGrid, BoundaryData) {
    let g = grid(-12.0, 12.0, 401, 2.0, 201);
    let b = BoundaryData::new(&gaussian(&g, 0.0, 1.0), &gaussian(&g, 0.0, 2f64.sqrt()), &g).unwrap();
    (g, b)
}

fn harmonic() -> PhysParams {
    PhysParams::new(1.0, 1.0, Potential::Harmonic { omega: 1.0 }).unwrap()
}

fn assert_certified(r: &SolveReport, c: &SolverConfig) {
    if r.converged {
        assert!(r.continuity_rms <= c.continuity_tolerance, "{r:?}");
        assert!(r.guidance_rms <= c.stationarity_tolerance, "{r:?}");
        assert!(r.qhj_rms <= c.stationarity_tolerance, "{r:?}");
    }
}

#[test]
fn spreading_gaussian_matches_the_envelope() {
    let (g, b) = spreading();
    let params = PhysParams::natural();
    let config = SolverConfig::default();
    let (h, r) = solve_bvp_primal_dual(&b, &params, &g, &config).unwrap();
    assert!(r.converged, "{r:?}");
    assert_certified(&r, &config);
    assert!(r.continuity_rms < 1e-6);
    let mid = h.rho.slice(100);
    let expected = free_width(1.0, 1.0);
    assert!((width(mid, &g) - expected).abs() / expected < 1e-2);
    // boundary slices are never updated
    assert_eq!(h.rho.slice(0), b.rho0());
    assert_eq!(h.rho.slice(200), b.rhof());
}

#[test]
fn spreading_action_matches_closed_form_integrals() {
    let (g, b) = spreading();
    let params = PhysParams::natural();
    let (_, r) = solve_bvp_primal_dual(&b, &params, &g, &SolverConfig::default()).unwrap();
    // ∫ (m σ̇²/2 − ħ²/8mσ²) dt with σ = √(1 + t²/4), by composite Simpson
    let n = 20_000;
    let h = 2.0 / n as f64;
    let f = |t: f64| {
        let s = free_width(1.0, t);
        let sd = t / (4.0 * s);
        0.5 * sd * sd - 1.0 / (8.0 * s * s)
    };
    let mut sum = f(0.0) + f(2.0);
    for k in 1..n {
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    let exact = sum * h / 3.0;
    let got = r.action.primal_total;
    assert!((got - exact).abs() / exact.abs() < 2e-2, "{got} vs {exact}");
}

#[test]
fn harmonic_ground_state_stays_put() {
    let g = grid(-8.0, 8.0, 321, 1.0, 101);
    let rho = gaussian(&g, 0.0, 0.5f64.sqrt());
    let b = BoundaryData::new(&rho, &rho, &g).unwrap();
    let config = SolverConfig::default();
    let (h, r) = solve_bvp_primal_dual(&b, &harmonic(), &g, &config).unwrap();
    assert_certified(&r, &config);
    assert!(h.current.max_abs() < 1e-4, "{}", h.current.max_abs());
    for n in 0..g.nt() {
        assert!(l1(h.rho.slice(n), &rho, &g) < 1e-2, "slice {n}");
    }
}

#[test]
fn symmetric_bounce_follows_the_two_point_envelope() {
    // σ(0) = σ(2) = 1 forces a minimum at t = 1 with σ_min² = 1/2 and
    // σ(t)² = 1/2 + (t − 1)²/2.
    let g = grid(-12.0, 12.0, 401, 2.0, 201);
    let rho = gaussian(&g, 0.0, 1.0);
    let b = BoundaryData::new(&rho, &rho, &g).unwrap();
    let config = SolverConfig {
        max_outer_iterations: 500,
        ..SolverConfig::default()
    };
    let (h, r) = solve_bvp_primal_dual(&b, &PhysParams::natural(), &g, &config).unwrap();
    assert_certified(&r, &config);
    for n in (0..g.nt()).step_by(10) {
        let t = g.t(n);
        let expected = (0.5 + 0.5 * (t - 1.0).powi(2)).sqrt();
        let got = width(h.rho.slice(n), &g);
        assert!((got - expected).abs() / expected < 2e-2, "t={t}: {got} vs {expected}");
    }
    let w: Vec<f64> = (0..g.nt()).map(|n| width(h.rho.slice(n), &g)).collect();
    for n in 0..g.nt() {
        assert!((w[n] - w[g.nt() - 1 - n]).abs() < 2e-3, "asymmetric at {n}");
    }
}

#[test]
fn shooting_recovers_the_spreading_phase() {
    let (g, b) = spreading();
    let params = PhysParams::natural();
    let (h, r) = solve_bvp_shooting(&b, &params, &g, &SolverConfig::default()).unwrap();
    assert!(r.terminal_mismatch < 1e-3, "{r:?}");
    // σ̇(0) = 0 so the quadratic coefficient of S0 vanishes; compare against
    // the final coefficient m σ̇(T) / 2σ(T) as the scale.
    let s0 = h.phase.as_ref().unwrap().slice(0);
    let (mut sxx, mut sxs, mut odd) = (0.0, 0.0, 0.0_f64);
    let centre = g.nx() / 2;
    for k in 1..=75 {
        let (xp, sp, sm) = (g.x(centre + k), s0[centre + k], s0[centre - k]);
        odd = odd.max((sp - sm).abs());
        let (u, v) = (xp * xp, 0.5 * (sp + sm) - s0[centre]);
        sxx += u * u;
        sxs += u * v;
    }
    let c2 = sxs / sxx;
    let sigma_t = free_width(1.0, 2.0);
    let scale = (2.0 / (4.0 * sigma_t)) / (2.0 * sigma_t);
    assert!(c2.abs() < 0.05 * scale, "c2 = {c2}, scale {scale}");
    assert!(odd < 1e-3, "odd part {odd}");
}

#[test]
fn shooting_and_primal_dual_agree() {
    let (g, b) = spreading();
    let params = PhysParams::natural();
    let config = SolverConfig::default();
    let (ha, ra) = solve_bvp_primal_dual(&b, &params, &g, &config).unwrap();
    let (hb, rb) = solve_bvp_shooting(&b, &params, &g, &config).unwrap();
    for n in 0..g.nt() {
        assert!(l1(ha.rho.slice(n), hb.rho.slice(n), &g) < 2e-2, "slice {n}");
    }
    let (a, s) = (ra.action.primal_total, rb.action.primal_total);
    assert!((a - s).abs() / a.abs() < 2e-2, "{a} vs {s}");
}

#[test]
fn shooting_keeps_a_stationary_state() {
    let g = grid(-8.0, 8.0, 321, 1.0, 101);
    let rho = gaussian(&g, 0.0, 0.5f64.sqrt());
    let b = BoundaryData::new(&rho, &rho, &g).unwrap();
    let (h, r) = solve_bvp_shooting(&b, &harmonic(), &g, &SolverConfig::default()).unwrap();
    assert!(r.terminal_mismatch < 1e-6, "{r:?}");
    let s0 = h.phase.as_ref().unwrap().slice(0);
    let inside: Vec<f64> = g
        .xs()
        .zip(s0)
        .filter(|(x, _)| x.abs() < 2.0)
        .map(|(_, s)| *s)
        .collect();
    let spread = inside.iter().cloned().fold(f64::MIN, f64::max)
        - inside.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1e-2, "phase spread {spread}");
}

#[test]
fn gauge_constant_changes_only_the_phase() {
    let (g, b) = spreading();
    let params = PhysParams::natural();
    let base = SolverConfig {
        max_evaluations: 400,
        ..SolverConfig::default()
    };
    let shifted = SolverConfig {
        phase_offset: 3.0,
        ..base.clone()
    };
    let (ha, _) = solve_bvp_shooting(&b, &params, &g, &base).unwrap();
    let (hb, _) = solve_bvp_shooting(&b, &params, &g, &shifted).unwrap();
    // a global phase only perturbs rounding
    for (x, y) in ha.rho.values().iter().zip(hb.rho.values()) {
        assert!((x - y).abs() <= 1e-12, "{x} {y}");
    }
    for (x, y) in ha.current.values().iter().zip(hb.current.values()) {
        assert!((x - y).abs() <= 1e-9, "{x} {y}");
    }
}

#[test]
fn unreachable_target_is_reported_not_thrown() {
    let g = grid(-12.0, 12.0, 401, 0.05, 11);
    let b = BoundaryData::new(&gaussian(&g, -6.0, 0.5), &gaussian(&g, 6.0, 0.5), &g).unwrap();
    let config = SolverConfig {
        max_outer_iterations: 200,
        ..SolverConfig::default()
    };
    let (_, r) = solve_bvp_primal_dual(&b, &PhysParams::natural(), &g, &config).unwrap();
    assert!(!r.converged);
    assert!(r.terminal_mismatch > 0.5, "{}", r.terminal_mismatch);
}

fn static_history(g: &SpaceTimeGrid, rho: &[f64]) -> History {
    let slices = vec![rho.to_vec(); g.nt()];
    History::new(
        g.clone(),
        Field::from_slices(g, &slices).unwrap(),
        Field::zeros(g),
        None,
    )
    .unwrap()
}

#[test]
fn static_ground_state_action_by_direct_quadrature() {
    let params = harmonic();
    let make = |tf: f64| grid(-8.0, 8.0, 801, tf, 11);
    let g1 = make(1.0);
    let rho = gaussian(&g1, 0.0, 0.5f64.sqrt());
    let a1 = action_of_history(&static_history(&g1, &rho), &params).unwrap().action;

    // ⟨V⟩ and ∫ρ'²/ρ by independent sums: one-sided differences on the
    // staggered midpoints.
    let dx = g1.dx();
    let v: Vec<f64> = g1.xs().zip(&rho).map(|(x, r)| 0.5 * x * x * r).collect();
    let mean_v = integrate_slice(&v, &g1).unwrap();
    let fisher: f64 = rho
        .windows(2)
        .map(|w| {
            let d = (w[1] - w[0]) / dx;
            let m = 0.5 * (w[0] + w[1]);
            d * d / m * dx
        })
        .sum();
    let expected = -(mean_v + fisher / 8.0);
    assert!((a1.primal_total - expected).abs() < 1e-3, "{} vs {expected}", a1.primal_total);
    assert!((a1.primal_total + 0.5).abs() < 1e-3);
    assert_eq!(a1.kinetic, 0.0);

    let g2 = make(2.0);
    let a2 = action_of_history(&static_history(&g2, &rho), &params).unwrap().action;
    assert!((a2.primal_total - 2.0 * a1.primal_total).abs() < 1e-9);
}

#[test]
fn residuals_of_a_solved_history_match_the_report() {
    let (g, b) = spreading();
    let params = PhysParams::natural();
    let (h, r) = solve_bvp_primal_dual(&b, &params, &g, &SolverConfig::default()).unwrap();
    assert_eq!(continuity_residual(&h).unwrap().rms, r.continuity_rms);
    assert_eq!(guidance_residual(&h, &params).unwrap().rms, r.guidance_rms);
    assert_eq!(qhj_residual(&h, &params).unwrap().rms, r.qhj_rms);
}

#[test]
fn solved_and_closed_form_histories_agree() {
    let (g, b) = spreading();
    let params = PhysParams::natural();
    let (h, _) = solve_bvp_primal_dual(&b, &params, &g, &SolverConfig::default()).unwrap();
    let exact = gaussian_history(&GaussianParams::new(1.0, 0.0).unwrap(), &params, &g).unwrap();
    for n in 0..g.nt() {
        assert!(l1(h.rho.slice(n), exact.rho.slice(n), &g) < 1e-2, "slice {n}");
    }
}
