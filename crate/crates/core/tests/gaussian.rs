mod common;

use common::{free_width, grid};
use madelung_bvp::action::{continuity_residual, guidance_residual, qhj_residual};
use madelung_bvp::gridfields::{Field, History, PhysParams, SpaceTimeGrid};
use madelung_bvp::trajectories::{
    envelope_energy, gaussian_envelope, gaussian_history, integrate_trajectory, tube_mass,
    velocity_field, GaussianParams,
};
use proptest::prelude::*;

fn worked() -> (SpaceTimeGrid, History) {
    let g = grid(-12.0, 12.0, 401, 2.0, 201);
    let h = gaussian_history(&GaussianParams::new(1.0, 0.0).unwrap(), &PhysParams::natural(), &g)
        .unwrap();
    (g, h)
}

#[test]
fn worked_example_residuals() {
    let (_, h) = worked();
    let p = PhysParams::natural();
    assert!(continuity_residual(&h).unwrap().rms < 1e-4);
    assert!(guidance_residual(&h, &p).unwrap().rms < 1e-6);
    let q = qhj_residual(&h, &p).unwrap();
    assert!(q.rms < 1e-3, "{}", q.rms);
    assert!(q.masked_fraction < 1.0);
}

#[test]
fn velocity_is_linear_in_x() {
    let (g, h) = worked();
    let p = PhysParams::natural();
    let v = velocity_field(&h, &p).unwrap();
    let times: Vec<f64> = g.ts().collect();
    let env = gaussian_envelope(&GaussianParams::new(1.0, 0.0).unwrap(), &p, &times).unwrap();
    for n in [0, 50, 100, 200] {
        let rate = env.sigma_dot[n] / env.sigma[n];
        for (i, x) in g.xs().enumerate().skip(1).take(g.nx() - 2) {
            assert!((v.get(n, i) - rate * x).abs() < 1e-9, "n={n} x={x}");
        }
    }
}

#[test]
fn uniform_phase_gradient_gives_uniform_velocity() {
    let g = grid(-5.0, 5.0, 101, 1.0, 11);
    let rho = Field::from_fn(&g, |_, _| 0.1);
    let h = History::new(
        g.clone(),
        rho,
        Field::from_fn(&g, |_, _| 0.3),
        Some(Field::from_fn(&g, |x, _| 3.0 * x)),
    )
    .unwrap();
    let v = velocity_field(&h, &PhysParams::natural()).unwrap();
    assert!(v.values().iter().all(|u| (u - 3.0).abs() < 1e-12));
    let constant = History::new(g.clone(), h.rho.clone(), Field::zeros(&g), Some(Field::from_fn(&g, |_, _| 2.0))).unwrap();
    let v0 = velocity_field(&constant, &PhysParams::natural()).unwrap();
    assert!(v0.values().iter().all(|u| *u == 0.0));
}

#[test]
fn trajectory_doubles_with_the_width() {
    // σ(t) = √(1 + t²/4) reaches 2 at t = 2√3
    let tf = 2.0 * 3f64.sqrt();
    let g = grid(-16.0, 16.0, 641, tf, 401);
    let p = PhysParams::natural();
    let h = gaussian_history(&GaussianParams::new(1.0, 0.0).unwrap(), &p, &g).unwrap();
    let tr = integrate_trajectory(&h, &p, 1.0).unwrap();
    let (t, x) = tr.last().unwrap();
    assert!((t - tf).abs() < 1e-12);
    assert!((free_width(1.0, tf) - 2.0).abs() < 1e-12);
    assert!((x - 2.0).abs() < 1e-3, "{x}");

    let centre = integrate_trajectory(&h, &p, 0.0).unwrap();
    assert!(centre.positions.iter().all(|x| x.abs() < 1e-10));
}

#[test]
fn envelope_energy_is_conserved() {
    let p = PhysParams::natural();
    for (s0, sd0) in [(1.0, 0.0), (1.0, -0.4), (0.6, 0.8)] {
        let g = GaussianParams::new(s0, sd0).unwrap();
        let times: Vec<f64> = (0..=300).map(|k| 0.01 * k as f64).collect();
        let env = gaussian_envelope(&g, &p, &times).unwrap();
        let e0 = envelope_energy(env.sigma[0], env.sigma_dot[0], &p);
        for (s, sd) in env.sigma.iter().zip(&env.sigma_dot) {
            assert!((envelope_energy(*s, *sd, &p) - e0).abs() < 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn flow_tubes_keep_their_mass(a in -2.5f64..2.4, gap in 0.1f64..2.5) {
        let (_, h) = worked();
        let p = PhysParams::natural();
        let b = (a + gap).min(2.5);
        let lo = integrate_trajectory(&h, &p, a).unwrap();
        let hi = integrate_trajectory(&h, &p, b).unwrap();
        let tube = tube_mass(&h, &lo, &hi);
        for m in &tube {
            prop_assert!((m - tube[0]).abs() <= 5e-3 * tube[0]);
        }
        // flow lines never cross
        for (x, y) in lo.positions.iter().zip(&hi.positions) {
            prop_assert!(x < y);
        }
    }

    #[test]
    fn trajectories_scale_with_sigma(x0 in prop::sample::select(vec![-2.0, -1.0, -0.3, 0.4, 1.5, 2.2])) {
        let (g, h) = worked();
        let p = PhysParams::natural();
        let tr = integrate_trajectory(&h, &p, x0).unwrap();
        for (n, x) in tr.positions.iter().enumerate() {
            let ratio = free_width(1.0, g.t(n));
            prop_assert!((x / x0 - ratio).abs() < 1e-3);
        }
    }
}
