//! Action functionals, the quantum potential, the Fisher functional
//! derivative and the three stationarity residuals of a history.
//!
//! The quantum potential and the Fisher derivative are evaluated in
//! log-amplitude form: with `u = ½ ln ρ`, `∇²√ρ/√ρ = ∇²u + |∇u|²`. The two
//! forms agree in the continuum; on the grid the log form is exact for
//! Gaussian densities, which is what the worked examples are built from.

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gridfields::{
    density_floor, rms, spatial_gradient, spatial_laplacian, time_derivative, trapezoid, Field,
    History, PhysParams, SpaceTimeGrid,
};

/// Allowed deviation of a slice integral from 1 before a density counts as
/// unnormalized.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Residual statistics only count nodes where `ρ > QHJ_MASK_FACTOR * ρ_floor`.
pub const QHJ_MASK_FACTOR: f64 = 1e3;

/// Contributions to the action of one history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionBreakdown {
    /// `∫∫ m j² / 2ρ`
    pub kinetic: f64,
    /// `−∫∫ V ρ`
    pub potential: f64,
    /// `−(ħ²/8m) ∫∫ |∇ρ|²/ρ`
    pub fisher: f64,
    /// `∫∫ S (∂tρ + ∇·j)`
    pub coupling: f64,
    pub primal_total: f64,
    pub augmented_total: f64,
}

impl ActionBreakdown {
    fn new(kinetic: f64, potential: f64, fisher: f64, coupling: f64) -> Self {
        let primal_total = kinetic + potential + fisher;
        Self {
            kinetic,
            potential,
            fisher,
            coupling,
            primal_total,
            augmented_total: primal_total + coupling,
        }
    }

    /// Flat JSON object: the six contributions followed by the grid.
    pub fn to_json(&self, grid: &SpaceTimeGrid) -> Value {
        json!({
            "kinetic": self.kinetic,
            "potential": self.potential,
            "fisher": self.fisher,
            "coupling": self.coupling,
            "primal_total": self.primal_total,
            "augmented_total": self.augmented_total,
            "x_min": grid.x_min(),
            "x_max": grid.x_max(),
            "nx": grid.nx(),
            "t0": grid.t0(),
            "tf": grid.tf(),
            "nt": grid.nt(),
        })
    }
}

/// A pointwise residual and its root-mean-square summary.
#[derive(Debug, Clone)]
pub struct Residual {
    pub field: Field,
    pub rms: f64,
    /// Fraction of nodes excluded from `rms` (non-zero only for the QHJ residual).
    pub masked_fraction: f64,
}

/// Quantum potential on one slice together with the near-floor flags.
#[derive(Debug, Clone)]
pub struct QuantumPotential {
    pub values: Vec<f64>,
    /// `true` where `ρ ≤ QHJ_MASK_FACTOR * ρ_floor`; values there are unreliable.
    pub near_floor: Vec<bool>,
}

fn check_len(what: &'static str, f: &[f64], grid: &SpaceTimeGrid) -> Result<()> {
    if f.len() != grid.nx() {
        return Err(Error::dimension(what, grid.nx(), f.len()));
    }
    Ok(())
}

fn check_normalized(mass: f64) -> Result<()> {
    if !mass.is_finite() || (mass - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::ContractViolation(format!(
            "density is not normalized (integral {mass})"
        )));
    }
    Ok(())
}

fn floored(rho: &[f64]) -> Vec<f64> {
    let floor = density_floor(rho);
    rho.iter().map(|&r| r.max(floor)).collect()
}

/// `∇²√ρ/√ρ` through the log amplitude.
fn amplitude_curvature(rho: &[f64], dx: f64) -> Result<Vec<f64>> {
    let u: Vec<f64> = floored(rho).iter().map(|r| 0.5 * r.ln()).collect();
    let lap = spatial_laplacian(&u, dx)?;
    let grad = spatial_gradient(&u, dx)?;
    Ok(lap.iter().zip(&grad).map(|(l, g)| l + g * g).collect())
}

/// Edge form of `∫ |∇ρ|²/ρ = 4 ∫ |∇√ρ|²` without the normalization check.
fn fisher_slice(rho: &[f64], dx: f64) -> f64 {
    let amp: Vec<f64> = floored(rho).iter().map(|r| r.sqrt()).collect();
    let sum: f64 = amp.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    4.0 * sum / dx
}

/// Fisher information `∫ |∇ρ|²/ρ dx` of a normalized density slice.
pub fn fisher_information(rho: &[f64], grid: &SpaceTimeGrid) -> Result<f64> {
    check_len("density slice", rho, grid)?;
    check_normalized(trapezoid(rho, grid.dx()))?;
    Ok(fisher_slice(rho, grid.dx()))
}

/// Fisher information of a density on the tensor product of the spatial
/// axes of `x` and `y`. `rho` is stored row-major with `y` outer.
pub fn fisher_information_2d(rho: &[f64], x: &SpaceTimeGrid, y: &SpaceTimeGrid) -> Result<f64> {
    let (nx, ny) = (x.nx(), y.nx());
    if rho.len() != nx * ny {
        return Err(Error::dimension("2d density", nx * ny, rho.len()));
    }
    let (dx, dy) = (x.dx(), y.dx());
    let trap_w = |i: usize, n: usize| if i == 0 || i + 1 == n { 0.5 } else { 1.0 };

    let mut mass = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            mass += trap_w(i, nx) * trap_w(j, ny) * rho[j * nx + i];
        }
    }
    check_normalized(mass * dx * dy)?;

    let amp: Vec<f64> = floored(rho).iter().map(|r| r.sqrt()).collect();
    let mut along_x = 0.0;
    for j in 0..ny {
        let row = &amp[j * nx..(j + 1) * nx];
        let s: f64 = row.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
        along_x += trap_w(j, ny) * s;
    }
    let mut along_y = 0.0;
    for i in 0..nx {
        let mut s = 0.0;
        for j in 0..ny - 1 {
            let d = amp[(j + 1) * nx + i] - amp[j * nx + i];
            s += d * d;
        }
        along_y += trap_w(i, nx) * s;
    }
    Ok(4.0 * (along_x * dy / dx + along_y * dx / dy))
}

/// Quantum potential `Q = −(ħ²/2m) ∇²√ρ/√ρ` on one slice.
pub fn quantum_potential(
    rho: &[f64],
    params: &PhysParams,
    grid: &SpaceTimeGrid,
) -> Result<QuantumPotential> {
    check_len("density slice", rho, grid)?;
    let c = -params.hbar * params.hbar / (2.0 * params.mass);
    let values = amplitude_curvature(rho, grid.dx())?
        .into_iter()
        .map(|k| c * k)
        .collect();
    let mask_at = QHJ_MASK_FACTOR * density_floor(rho);
    let near_floor = rho.iter().map(|&r| r <= mask_at).collect();
    Ok(QuantumPotential { values, near_floor })
}

/// Functional derivative of the Fisher information, `−4 ∇²√ρ/√ρ`.
pub fn fisher_functional_derivative(rho: &[f64], grid: &SpaceTimeGrid) -> Result<Vec<f64>> {
    check_len("density slice", rho, grid)?;
    Ok(amplitude_curvature(rho, grid.dx())?
        .into_iter()
        .map(|k| -4.0 * k)
        .collect())
}

fn check_normalized_history(history: &History) -> Result<()> {
    for (n, slice) in history.rho.slices().enumerate() {
        let mass = trapezoid(slice, history.grid.dx());
        if (mass - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::ContractViolation(format!(
                "density slice {n} integrates to {mass}"
            )));
        }
    }
    Ok(())
}

fn time_integral(per_slice: &[f64], grid: &SpaceTimeGrid) -> f64 {
    trapezoid(per_slice, grid.dt())
}

/// Primal action: kinetic, potential and Fisher contributions. The coupling
/// is reported as zero.
pub fn primal_action(history: &History, params: &PhysParams) -> Result<ActionBreakdown> {
    let (kinetic, potential, fisher) = primal_parts(history, params)?;
    Ok(ActionBreakdown::new(kinetic, potential, fisher, 0.0))
}

fn primal_parts(history: &History, params: &PhysParams) -> Result<(f64, f64, f64)> {
    check_normalized_history(history)?;
    let grid = &history.grid;
    let v = params.potential.sample(params.mass, grid)?;
    let m = params.mass;
    let mut kin = Vec::with_capacity(grid.nt());
    let mut pot = Vec::with_capacity(grid.nt());
    let mut fis = Vec::with_capacity(grid.nt());
    for n in 0..grid.nt() {
        let rho = history.rho.slice(n);
        let j = history.current.slice(n);
        let floor = density_floor(rho);
        let k: Vec<f64> = rho
            .iter()
            .zip(j)
            .map(|(&r, &j)| m * j * j / (2.0 * r.max(floor)))
            .collect();
        let p: Vec<f64> = rho.iter().zip(&v).map(|(r, v)| v * r).collect();
        kin.push(trapezoid(&k, grid.dx()));
        pot.push(trapezoid(&p, grid.dx()));
        fis.push(fisher_slice(rho, grid.dx()));
    }
    let c = params.hbar * params.hbar / (8.0 * params.mass);
    Ok((
        time_integral(&kin, grid),
        -time_integral(&pot, grid),
        -c * time_integral(&fis, grid),
    ))
}

/// Augmented action: the primal action plus `∫∫ S (∂tρ + ∇·j)`.
pub fn augmented_action(history: &History, params: &PhysParams) -> Result<ActionBreakdown> {
    let s = history.phase()?;
    let (kinetic, potential, fisher) = primal_parts(history, params)?;
    let r = continuity_field(history)?;
    let grid = &history.grid;
    let per_slice: Vec<f64> = (0..grid.nt())
        .map(|n| {
            let prod: Vec<f64> = s
                .slice(n)
                .iter()
                .zip(r.slice(n))
                .map(|(s, r)| s * r)
                .collect();
            trapezoid(&prod, grid.dx())
        })
        .collect();
    let coupling = time_integral(&per_slice, grid);
    Ok(ActionBreakdown::new(kinetic, potential, fisher, coupling))
}

fn continuity_field(history: &History) -> Result<Field> {
    let grid = &history.grid;
    let mut r = time_derivative(&history.rho, grid.dt())?;
    for n in 0..grid.nt() {
        let div = spatial_gradient(history.current.slice(n), grid.dx())?;
        for (r, d) in r.slice_mut(n).iter_mut().zip(div) {
            *r += d;
        }
    }
    Ok(r)
}

/// `∂tρ + ∇·j` at every node.
pub fn continuity_residual(history: &History) -> Result<Residual> {
    let field = continuity_field(history)?;
    let rms = field.rms();
    Ok(Residual {
        field,
        rms,
        masked_fraction: 0.0,
    })
}

/// `m j/ρ − ∇S` at every node.
pub fn guidance_residual(history: &History, params: &PhysParams) -> Result<Residual> {
    let s = history.phase()?;
    let grid = &history.grid;
    let mut field = Field::zeros(grid);
    for n in 0..grid.nt() {
        let rho = history.rho.slice(n);
        let floor = density_floor(rho);
        let ds = spatial_gradient(s.slice(n), grid.dx())?;
        let out = field.slice_mut(n);
        for i in 0..grid.nx() {
            out[i] = params.mass * history.current.slice(n)[i] / rho[i].max(floor) - ds[i];
        }
    }
    let rms = field.rms();
    Ok(Residual {
        field,
        rms,
        masked_fraction: 0.0,
    })
}

/// `∂tS + |∇S|²/2m + V + Q` at every node; the RMS only counts nodes with
/// `ρ > QHJ_MASK_FACTOR * ρ_floor`.
pub fn qhj_residual(history: &History, params: &PhysParams) -> Result<Residual> {
    hamilton_jacobi(history, params, 1.0)
}

/// `∂tS + |∇S|²/2m − V − Q`, masked as [`qhj_residual`]. This is the
/// stationarity condition in `ρ` of the positive cost
/// `kinetic + (ħ²/8m)·Fisher + ∫∫Vρ`, whose minimizers are imaginary-time
/// (Schrödinger bridge) flows.
pub fn euclidean_qhj_residual(history: &History, params: &PhysParams) -> Result<Residual> {
    hamilton_jacobi(history, params, -1.0)
}

fn hamilton_jacobi(history: &History, params: &PhysParams, sign: f64) -> Result<Residual> {
    let s = history.phase()?;
    let grid = &history.grid;
    let v = params.potential.sample(params.mass, grid)?;
    let mut field = time_derivative(s, grid.dt())?;
    let mut kept = Vec::with_capacity(grid.len());
    for n in 0..grid.nt() {
        let rho = history.rho.slice(n);
        let q = quantum_potential(rho, params, grid)?;
        let ds = spatial_gradient(s.slice(n), grid.dx())?;
        let out = field.slice_mut(n);
        for i in 0..grid.nx() {
            out[i] += ds[i] * ds[i] / (2.0 * params.mass) + sign * (v[i] + q.values[i]);
            if !q.near_floor[i] {
                kept.push(out[i]);
            }
        }
    }
    let masked_fraction = 1.0 - kept.len() as f64 / grid.len() as f64;
    Ok(Residual {
        field,
        rms: rms(&kept),
        masked_fraction,
    })
}
