//! Reference Schrödinger dynamics: the Madelung map in both directions, a
//! Crank–Nicolson propagator with Dirichlet walls, and the discrete ground
//! state of the same Hamiltonian.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::action::QHJ_MASK_FACTOR;
use crate::error::{Error, Result};
use crate::gridfields::{density_floor, ComplexState, PhysParams, SpaceTimeGrid};

/// `ψ = √ρ e^{iS/ħ}` on one slice.
pub fn madelung_compose(rho: &[f64], phase: &[f64], params: &PhysParams) -> Result<ComplexState> {
    if rho.len() != phase.len() {
        return Err(Error::dimension("phase slice", rho.len(), phase.len()));
    }
    Ok(ComplexState(
        rho.iter()
            .zip(phase)
            .map(|(&r, &s)| Complex64::from_polar(r.max(0.0).sqrt(), s / params.hbar))
            .collect(),
    ))
}

/// Result of [`madelung_decompose`].
#[derive(Debug, Clone)]
pub struct Decomposed {
    pub rho: Vec<f64>,
    /// `S = ħ · unwrapped arg ψ`, shifted so the leftmost node is zero.
    pub phase: Vec<f64>,
    /// `false` where the modulus is too small for the phase to mean
    /// anything; such nodes are still unwrapped but should be left out of
    /// residual statistics.
    pub reliable: Vec<bool>,
}

/// Splits `ψ` into density and phase, unwrapping left to right with a 2π
/// correction wherever consecutive raw phases jump by more than π.
pub fn madelung_decompose(psi: &ComplexState, params: &PhysParams) -> Result<Decomposed> {
    let rho = psi.density();
    if rho.iter().any(|r| !r.is_finite()) {
        return Err(Error::DegenerateState);
    }
    let floor = density_floor(&rho);
    if floor <= 0.0 {
        return Err(Error::DegenerateState);
    }
    let reliable: Vec<bool> = rho.iter().map(|&r| r > QHJ_MASK_FACTOR * floor).collect();
    let mut phase = Vec::with_capacity(rho.len());
    let mut prev_raw = psi.0.first().map_or(0.0, |c| c.arg());
    let mut acc = 0.0;
    for c in &psi.0 {
        let raw = c.arg();
        acc += wrap(raw - prev_raw);
        prev_raw = raw;
        phase.push(params.hbar * acc);
    }
    Ok(Decomposed {
        rho,
        phase,
        reliable,
    })
}

/// Wraps an angle difference into `(−π, π]`.
pub(crate) fn wrap(d: f64) -> f64 {
    let mut d = d % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// Thomas algorithm for a complex tridiagonal system with constant
/// off-diagonal `off` and diagonal `diag`. `rhs` is overwritten with the
/// solution.
fn solve_tridiagonal(
    diag: &[Complex64],
    off: Complex64,
    rhs: &mut [Complex64],
    scratch: &mut [Complex64],
    step: usize,
) -> Result<()> {
    let n = rhs.len();
    if n == 0 {
        return Ok(());
    }
    let tiny = 1e-300;
    let mut beta = diag[0];
    if beta.norm() < tiny {
        return Err(Error::TridiagonalFailure { step });
    }
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = off / beta;
        beta = diag[i] - off * scratch[i];
        if beta.norm() < tiny || !beta.is_finite() {
            return Err(Error::TridiagonalFailure { step });
        }
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= scratch[i + 1] * next;
    }
    Ok(())
}

/// Crank–Nicolson stepper for `iħ∂tψ = Hψ` with the three-point Laplacian
/// and `ψ = 0` on the two wall nodes.
pub struct CrankNicolson {
    off: Complex64,
    diag_lhs: Vec<Complex64>,
    diag_rhs: Vec<Complex64>,
    off_rhs: Complex64,
    scratch: Vec<Complex64>,
    rhs: Vec<Complex64>,
}

impl CrankNicolson {
    /// Stepper for time step `dt` (negative `dt` steps backwards).
    pub fn new(params: &PhysParams, grid: &SpaceTimeGrid, dt: f64) -> Result<Self> {
        params.validate()?;
        let v = params.potential.sample(params.mass, grid)?;
        let nx = grid.nx();
        let dx = grid.dx();
        let kin = params.hbar * params.hbar / (2.0 * params.mass * dx * dx);
        let a = Complex64::new(0.0, dt / (2.0 * params.hbar));
        let interior = nx - 2;
        let mut diag_lhs = Vec::with_capacity(interior);
        let mut diag_rhs = Vec::with_capacity(interior);
        for vi in &v[1..nx - 1] {
            let h_diag = 2.0 * kin + vi;
            diag_lhs.push(Complex64::new(1.0, 0.0) + a * h_diag);
            diag_rhs.push(Complex64::new(1.0, 0.0) - a * h_diag);
        }
        Ok(Self {
            off: a * (-kin),
            off_rhs: -a * (-kin),
            diag_lhs,
            diag_rhs,
            scratch: vec![Complex64::new(0.0, 0.0); interior],
            rhs: vec![Complex64::new(0.0, 0.0); interior],
        })
    }

    /// Advances `psi` in place by one step.
    pub fn step(&mut self, psi: &mut [Complex64], step: usize) -> Result<()> {
        let nx = psi.len();
        let m = nx - 2;
        if m != self.rhs.len() {
            return Err(Error::dimension("state", self.rhs.len() + 2, nx));
        }
        psi[0] = Complex64::new(0.0, 0.0);
        psi[nx - 1] = Complex64::new(0.0, 0.0);
        for k in 0..m {
            let i = k + 1;
            self.rhs[k] = self.diag_rhs[k] * psi[i] + self.off_rhs * (psi[i - 1] + psi[i + 1]);
        }
        solve_tridiagonal(
            &self.diag_lhs,
            self.off,
            &mut self.rhs,
            &mut self.scratch,
            step,
        )?;
        psi[1..nx - 1].copy_from_slice(&self.rhs);
        Ok(())
    }
}

fn check_state(psi0: &ComplexState, grid: &SpaceTimeGrid) -> Result<()> {
    if psi0.len() != grid.nx() {
        return Err(Error::dimension("state", grid.nx(), psi0.len()));
    }
    let norm = psi0.norm_sqr(grid)?;
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
        return Err(Error::ContractViolation(format!(
            "initial state is not normalized (norm² {norm})"
        )));
    }
    Ok(())
}

/// Propagates `psi0` across every slice of `grid`, one Crank–Nicolson step
/// per `dt`. The returned sequence starts with `psi0` (walls zeroed).
pub fn propagate(
    psi0: &ComplexState,
    params: &PhysParams,
    grid: &SpaceTimeGrid,
) -> Result<Vec<ComplexState>> {
    propagate_substeps(psi0, params, grid, 1)
}

/// As [`propagate`] with `substeps` Crank–Nicolson steps between slices.
pub fn propagate_substeps(
    psi0: &ComplexState,
    params: &PhysParams,
    grid: &SpaceTimeGrid,
    substeps: usize,
) -> Result<Vec<ComplexState>> {
    check_state(psi0, grid)?;
    let substeps = substeps.max(1);
    let mut cn = CrankNicolson::new(params, grid, grid.dt() / substeps as f64)?;
    let mut psi = psi0.0.clone();
    let nx = psi.len();
    psi[0] = Complex64::new(0.0, 0.0);
    psi[nx - 1] = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(grid.nt());
    out.push(ComplexState(psi.clone()));
    let mut step = 0;
    for _ in 1..grid.nt() {
        for _ in 0..substeps {
            step += 1;
            cn.step(&mut psi, step)?;
        }
        out.push(ComplexState(psi.clone()));
    }
    Ok(out)
}

/// Lowest eigenpair of the discrete Hamiltonian used by the propagator,
/// found by inverse iteration. The state is real, nonnegative and
/// normalized; the energy is the Rayleigh quotient.
pub fn ground_state(params: &PhysParams, grid: &SpaceTimeGrid) -> Result<(f64, ComplexState)> {
    params.validate()?;
    let v = params.potential.sample(params.mass, grid)?;
    let nx = grid.nx();
    let dx = grid.dx();
    let kin = params.hbar * params.hbar / (2.0 * params.mass * dx * dx);
    let shift = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let m = nx - 2;
    let diag: Vec<Complex64> = v[1..nx - 1]
        .iter()
        .map(|vi| Complex64::new(2.0 * kin + vi - shift, 0.0))
        .collect();
    let off = Complex64::new(-kin, 0.0);
    let mut scratch = vec![Complex64::new(0.0, 0.0); m];
    let centre = 0.5 * (grid.x_min() + grid.x_max());
    let width = 0.25 * (grid.x_max() - grid.x_min());
    let mut y: Vec<Complex64> = (1..nx - 1)
        .map(|i| {
            let z = (grid.x(i) - centre) / width;
            Complex64::new((-z * z).exp(), 0.0)
        })
        .collect();
    let mut energy = f64::NAN;
    for it in 0..2000 {
        let norm = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in y.iter_mut() {
            *c /= norm;
        }
        let prev = y.clone();
        solve_tridiagonal(&diag, off, &mut y, &mut scratch, it)?;
        let norm = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let change: f64 = y
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a / norm - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if change < 1e-14 {
            break;
        }
    }
    let norm = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut full = vec![Complex64::new(0.0, 0.0); nx];
    for (k, c) in y.iter().enumerate() {
        full[k + 1] = Complex64::new((c.re / norm).abs(), 0.0);
    }
    // Rayleigh quotient with the discrete norm.
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 1..nx - 1 {
        let hpsi = kin * (2.0 * full[i].re - full[i - 1].re - full[i + 1].re) + v[i] * full[i].re;
        num += full[i].re * hpsi;
        den += full[i].re * full[i].re;
    }
    if den > 0.0 {
        energy = num / den;
    }
    let scale = 1.0 / (den * dx).sqrt();
    for c in full.iter_mut() {
        *c *= scale;
    }
    Ok((energy, ComplexState(full)))
}
