//! Time-symmetric hydrodynamic formulation of one-dimensional quantum
//! mechanics.
//!
//! A history is a density `ρ(x,t)` and current `j(x,t)` on a uniform
//! space-time grid, joined by a phase multiplier `S(x,t)`. The crate
//! evaluates the Fisher-regularized action of a history, certifies it with
//! the three stationarity residuals (continuity, guidance, quantum
//! Hamilton-Jacobi), solves the two-time boundary value problem between a
//! prepared and a measured density, and cross-checks the result against a
//! Crank–Nicolson Schrödinger propagator through the Madelung map.
//!
//! ```
//! use madelung_bvp::gridfields::{PhysParams, SpaceTimeGrid};
//! use madelung_bvp::trajectories::{gaussian_history, GaussianParams};
//! use madelung_bvp::action;
//!
//! let params = PhysParams::natural();
//! let grid = SpaceTimeGrid::new(-12.0, 12.0, 401, 0.0, 2.0, 201).unwrap();
//! let g = GaussianParams::new(1.0, 0.0).unwrap();
//! let history = gaussian_history(&g, &params, &grid).unwrap();
//! let r = action::continuity_residual(&history).unwrap();
//! assert!(r.rms < 1e-4);
//! ```

pub mod action;
pub mod bvp;
pub mod caliber;
pub mod error;
pub mod gridfields;
pub mod schrodinger;
pub mod trajectories;
pub mod verify;

pub use error::{Error, Result};
