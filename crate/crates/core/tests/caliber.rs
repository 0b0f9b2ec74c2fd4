mod common;

use common::{gaussian, grid};
use madelung_bvp::bvp::SolverConfig;
use madelung_bvp::caliber::{
    min_action_to_outcome, node_suppression_demo, outcome_weights, CostKind, NodeDemoConfig,
    OutcomeConstraint,
};
use madelung_bvp::gridfields::{normalize_slice, PhysParams, Potential, SpaceTimeGrid};
use madelung_bvp::schrodinger::{madelung_compose, propagate};
use madelung_bvp::trajectories::{gaussian_history, GaussianParams};
use madelung_bvp::Error;
use proptest::prelude::*;

fn setup() -> (PhysParams, SpaceTimeGrid, Vec<f64>, Vec<f64>) {
    let p = PhysParams::natural();
    let g = grid(-12.0, 12.0, 401, 2.0, 201);
    let rho0 = gaussian(&g, 0.0, 1.0);
    let psi0 = madelung_compose(&rho0, &vec![0.0; g.nx()], &p).unwrap();
    let end = propagate(&psi0, &p, &g).unwrap().pop().unwrap();
    let pattern = normalize_slice(&end.density(), &g).unwrap();
    (p, g, rho0, pattern)
}

#[test]
fn mirror_outcomes_cost_the_same() {
    let (p, g, rho0, pattern) = setup();
    let config = SolverConfig::default();
    let left = OutcomeConstraint::window("left", &pattern, -2.0, 1.0, &g).unwrap();
    let right = OutcomeConstraint::window("right", &pattern, 2.0, 1.0, &g).unwrap();
    let a = min_action_to_outcome(&rho0, &left, &p, &g, &config, CostKind::Positive).unwrap();
    let b = min_action_to_outcome(&rho0, &right, &p, &g, &config, CostKind::Positive).unwrap();
    assert!((a.cost - b.cost).abs() / a.cost.abs() < 5e-3, "{} {}", a.cost, b.cost);
    let d = outcome_weights(&[("left".into(), a.cost), ("right".into(), b.cost)], &p).unwrap();
    assert!((d.probability("left").unwrap() - 0.5).abs() < 5e-3);
}

#[test]
fn narrower_target_costs_more() {
    // The narrow bridge has steep phase tails near tf; the default grid
    // leaves its certificate just above tolerance.
    let p = PhysParams::natural();
    let g = grid(-12.0, 12.0, 801, 2.0, 401);
    let rho0 = gaussian(&g, 0.0, 1.0);
    let whole = (g.x_min(), g.x_max());
    let free = OutcomeConstraint::new("free", gaussian(&g, 0.0, 2f64.sqrt()), whole, &g).unwrap();
    let narrow =
        OutcomeConstraint::new("narrow", gaussian(&g, 0.0, 0.5 * 2f64.sqrt()), whole, &g).unwrap();
    let config = SolverConfig::default();
    // Real-time evolution cannot reach this target (σ(T)² ≥ ħ²T²/4m²σ0² = 1),
    // so only the positive cost is compared.
    let a = min_action_to_outcome(&rho0, &free, &p, &g, &config, CostKind::Positive).unwrap();
    let b = min_action_to_outcome(&rho0, &narrow, &p, &g, &config, CostKind::Positive).unwrap();
    assert!(!a.upper_bound && !b.upper_bound, "{:?}\n{:?}", a.report, b.report);
    assert!(b.cost > a.cost, "{} !> {}", b.cost, a.cost);
}

#[test]
fn free_endpoint_recovers_the_unconstrained_action() {
    let (p, g, rho0, pattern) = setup();
    let free = OutcomeConstraint::new("free", pattern, (g.x_min(), g.x_max()), &g).unwrap();
    let config = SolverConfig {
        max_outer_iterations: 500,
        ..SolverConfig::default()
    };
    let cost = min_action_to_outcome(&rho0, &free, &p, &g, &config, CostKind::Signed).unwrap();
    let exact = gaussian_history(&GaussianParams::new(1.0, 0.0).unwrap(), &p, &g).unwrap();
    let reference = madelung_bvp::action::primal_action(&exact, &p).unwrap().primal_total;
    assert!(
        (cost.cost - reference).abs() / reference.abs() < 1e-2,
        "{} vs {reference}",
        cost.cost
    );
}

#[test]
fn zero_separation_has_nothing_to_suppress() {
    let p = PhysParams::natural();
    let preset = NodeDemoConfig {
        separation: 0.0,
        ..NodeDemoConfig::default()
    };
    let r = node_suppression_demo(&p, &NodeDemoConfig::default_grid(), &SolverConfig::default(), &preset)
        .unwrap();
    assert!(!r.fringes);
    assert!((r.node.cost - r.antinode.cost).abs() <= 5e-2 * r.antinode.cost.abs());
}

#[test]
fn interference_orders_the_costs() {
    let p = PhysParams::natural();
    let r = node_suppression_demo(
        &p,
        &NodeDemoConfig::default_grid(),
        &SolverConfig::default(),
        &NodeDemoConfig::default(),
    )
    .unwrap();
    assert!(r.fringes);
    assert!(r.node.cost > r.antinode.cost);
    assert!(r.node_to_antinode < 1.0);
    let total: f64 = r.distribution.outcomes.iter().map(|o| o.probability).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn leaking_target_is_rejected() {
    let g = grid(-12.0, 12.0, 401, 2.0, 11);
    let target = gaussian(&g, 0.0, 1.0);
    match OutcomeConstraint::new("leaky", target, (-1.0, 1.0), &g) {
        Err(Error::ContractViolation(m)) => assert!(m.contains("leaks")),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #[test]
    fn shifting_costs_changes_nothing(
        costs in prop::collection::vec(-5.0f64..5.0, 1..8), shift in -50.0f64..50.0, hbar in 0.2f64..3.0,
    ) {
        let p = PhysParams::new(1.0, hbar, Potential::Free).unwrap();
        let a: Vec<(String, f64)> = costs.iter().enumerate().map(|(i, c)| (format!("o{i}"), *c)).collect();
        let b: Vec<(String, f64)> = a.iter().map(|(l, c)| (l.clone(), c + shift)).collect();
        let da = outcome_weights(&a, &p).unwrap();
        let db = outcome_weights(&b, &p).unwrap();
        for (x, y) in da.outcomes.iter().zip(&db.outcomes) {
            prop_assert!((x.probability - y.probability).abs() < 1e-12);
        }
        prop_assert_eq!(da.beta, 1.0 / hbar);
        let total: f64 = da.outcomes.iter().map(|o| o.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cheaper_outcomes_are_likelier(costs in prop::collection::vec(0.0f64..10.0, 2..8)) {
        let p = PhysParams::natural();
        let a: Vec<(String, f64)> = costs.iter().enumerate().map(|(i, c)| (format!("o{i}"), *c)).collect();
        let d = outcome_weights(&a, &p).unwrap();
        for x in &d.outcomes {
            for y in &d.outcomes {
                if x.cost < y.cost {
                    prop_assert!(x.probability > y.probability);
                }
            }
        }
    }
}
