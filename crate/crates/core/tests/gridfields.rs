mod common;

use common::grid;
use madelung_bvp::gridfields::{integrate_slice, normalize_slice, spatial_gradient, spatial_laplacian};
use proptest::prelude::*;

proptest! {
    #[test]
    fn quadrature_is_exact_for_linear_fields(
        a in -5.0f64..5.0, b in -5.0f64..5.0, lo in -10.0f64..0.0, len in 0.5f64..20.0, nx in 8usize..300,
    ) {
        let g = grid(lo, lo + len, nx, 1.0, 2);
        let f: Vec<f64> = g.xs().map(|x| a + b * x).collect();
        let hi = lo + len;
        let exact = a * len + 0.5 * b * (hi * hi - lo * lo);
        prop_assert!((integrate_slice(&f, &g).unwrap() - exact).abs() <= 1e-10 * (1.0 + exact.abs()));
    }

    #[test]
    fn normalize_is_idempotent(raw in prop::collection::vec(0.0f64..10.0, 50), bump in 0.1f64..5.0) {
        let g = grid(-5.0, 5.0, 50, 1.0, 2);
        let mut raw = raw;
        raw[25] += bump;
        let once = normalize_slice(&raw, &g).unwrap();
        let twice = normalize_slice(&once, &g).unwrap();
        for (x, y) in once.iter().zip(&twice) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
        prop_assert!((integrate_slice(&once, &g).unwrap() - 1.0).abs() < 1e-12);
    }
}

/// Error of the Laplacian against the twice-applied gradient, on `sin(kx)`,
/// for dyadic refinements; the observed order must be at least 1.9.
#[test]
fn laplacian_and_gradient_twice_converge_at_second_order() {
    for k in [0.7, 1.3, 2.1] {
        let errs: Vec<f64> = [101, 201, 401, 801]
            .iter()
            .map(|&nx| {
                let g = grid(-3.0, 3.0, nx, 1.0, 2);
                let f: Vec<f64> = g.xs().map(|x| (k * x).sin()).collect();
                let lap = spatial_laplacian(&f, g.dx()).unwrap();
                let twice = spatial_gradient(&spatial_gradient(&f, g.dx()).unwrap(), g.dx()).unwrap();
                // interior nodes away from the one-sided boundary stencils
                (4..nx - 4)
                    .filter(|i| g.x(*i).abs() <= 2.0)
                    .map(|i| (lap[i] - twice[i]).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "k={k}: order {order}, errors {errs:?}");
        }
    }
}
