#![allow(dead_code)]

use madelung_bvp::gridfields::{integrate_slice, normalize_slice, SpaceTimeGrid};

pub fn grid(x_min: f64, x_max: f64, nx: usize, tf: f64, nt: usize) -> SpaceTimeGrid {
    SpaceTimeGrid::new(x_min, x_max, nx, 0.0, tf, nt).unwrap()
}

/// Normalized Gaussian density on the spatial nodes.
pub fn gaussian(grid: &SpaceTimeGrid, center: f64, sigma: f64) -> Vec<f64> {
    let raw: Vec<f64> = grid
        .xs()
        .map(|x| (-(x - center).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    normalize_slice(&raw, grid).unwrap()
}

pub fn moment(rho: &[f64], grid: &SpaceTimeGrid, f: impl Fn(f64) -> f64) -> f64 {
    let w: Vec<f64> = grid.xs().zip(rho).map(|(x, r)| f(x) * r).collect();
    integrate_slice(&w, grid).unwrap()
}

/// Standard deviation of a density slice.
pub fn width(rho: &[f64], grid: &SpaceTimeGrid) -> f64 {
    let norm = moment(rho, grid, |_| 1.0);
    let mean = moment(rho, grid, |x| x) / norm;
    (moment(rho, grid, |x| (x - mean).powi(2)) / norm).sqrt()
}

pub fn l1(a: &[f64], b: &[f64], grid: &SpaceTimeGrid) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    integrate_slice(&d, grid).unwrap()
}

/// Free spreading width `σ0 √(1 + (ħt/2mσ0²)²)` in natural units.
pub fn free_width(sigma0: f64, t: f64) -> f64 {
    sigma0 * (1.0 + (t / (2.0 * sigma0 * sigma0)).powi(2)).sqrt()
}
