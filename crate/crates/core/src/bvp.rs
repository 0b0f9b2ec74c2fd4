//! Two-time boundary value problem: given the density at `t0` and at `tf`,
//! find the history that makes the augmented action stationary.
//!
//! [`solve_bvp_primal_dual`] alternates between the two boundary
//! constraints. The primal variable it iterates is the initial phase `S(·,t0)`;
//! one outer iteration sweeps forward to `tf`, imposes the terminal
//! density while keeping the arrived phase, sweeps back to `t0` and relaxes
//! the initial phase towards the returned one. At a fixed point both
//! boundary densities are met by a single time-symmetric flow. The sweeps
//! use their own integrator (explicit RK4 with a fourth-order Laplacian), so
//! the Crank–Nicolson oracle in [`crate::schrodinger`] stays independent.
//!
//! [`solve_bvp_shooting`] searches Chebyshev coefficients of the initial
//! phase with a Nelder–Mead simplex, propagating with the oracle.
//!
//! Both solvers finish with the same history assembly: densities from the
//! sweeps, then an exact projection onto the continuity constraint that
//! rebuilds `j` and `S` so that continuity and guidance hold to round-off.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::action::{self, ActionBreakdown};
use crate::error::{Error, Result};
use crate::gridfields::{
    density_floor, normalize_slice, spatial_gradient, time_derivative, trapezoid, Field, History, PhysParams,
    SpaceTimeGrid,
};
use crate::schrodinger::{madelung_compose, wrap, CrankNicolson};

/// Preparation density at `t0` and measured density at `tf`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    rho0: Vec<f64>,
    rhof: Vec<f64>,
    // Unfloored amplitudes. The sweeps start from these: a floor plateau
    // meeting the Dirichlet walls would radiate grid-scale noise.
    amp0: Vec<f64>,
    ampf: Vec<f64>,
}

impl BoundaryData {
    /// Floors and normalizes both slices on the spatial axis of `grid`.
    pub fn new(rho0: &[f64], rhof: &[f64], grid: &SpaceTimeGrid) -> Result<Self> {
        Ok(Self {
            rho0: normalize_slice(rho0, grid)?,
            rhof: normalize_slice(rhof, grid)?,
            amp0: unit_amplitude(rho0, grid.dx()),
            ampf: unit_amplitude(rhof, grid.dx()),
        })
    }

    pub fn rho0(&self) -> &[f64] {
        &self.rho0
    }

    pub fn rhof(&self) -> &[f64] {
        &self.rhof
    }

    fn check(&self, grid: &SpaceTimeGrid) -> Result<()> {
        for s in [&self.rho0, &self.rhof] {
            if s.len() != grid.nx() {
                return Err(Error::dimension("boundary slice", grid.nx(), s.len()));
            }
        }
        Ok(())
    }

    /// Order-sensitive fingerprint of both slices, used to tag actions.
    pub fn fingerprint(&self) -> String {
        format!("{:016x}-{:016x}", fnv1a(&self.rho0), fnv1a(&self.rhof))
    }
}

/// Normalized amplitude, tapered smoothly to zero at the floor level so
/// that floored and unfloored inputs give the same sweep start.
fn unit_amplitude(rho: &[f64], dx: f64) -> Vec<f64> {
    let floor = density_floor(rho);
    let lifted: Vec<f64> = rho
        .iter()
        .map(|&r| if r > floor { r * (1.0 - floor / r).powi(4) } else { 0.0 })
        .collect();
    let mass = trapezoid(&lifted, dx);
    lifted.iter().map(|r| (r / mass).sqrt()).collect()
}

fn fnv1a(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Solver controls.
///
/// For the alternating solver `dual_step` is the relaxation factor of the
/// initial-phase update and `primal_step` the relaxation of the terminal
/// density projection (1 imposes `ρf` fully).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub max_outer_iterations: usize,
    pub primal_step: f64,
    pub dual_step: f64,
    pub continuity_tolerance: f64,
    pub stationarity_tolerance: f64,
    /// Mismatch `∫|ρ(tf) − ρf|` below which a solve may count as converged.
    pub terminal_tolerance: f64,
    /// Outer iterations between full KKT checks.
    pub check_every: usize,
    pub seed: u64,
    /// Amplitude (in units of ħ) of the seeded smooth perturbation added to
    /// the initial phase; 0 starts from `S = 0`.
    pub init_perturbation: f64,
    /// Chebyshev degree of the shooting phase.
    pub chebyshev_degree: usize,
    /// Constant added to the shooting phase parameterization.
    pub phase_offset: f64,
    /// Objective evaluations allowed to the shooting simplex.
    pub max_evaluations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iterations: 5000,
            primal_step: 1.0,
            dual_step: 1.5,
            continuity_tolerance: 1e-6,
            stationarity_tolerance: 1e-2,
            terminal_tolerance: 1e-3,
            check_every: 25,
            seed: 0,
            init_perturbation: 0.0,
            chebyshev_degree: 8,
            phase_offset: 0.0,
            max_evaluations: 6000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("primal_step", self.primal_step),
            ("dual_step", self.dual_step),
            ("continuity_tolerance", self.continuity_tolerance),
            ("stationarity_tolerance", self.stationarity_tolerance),
            ("terminal_tolerance", self.terminal_tolerance),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams {
                    field,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        if self.primal_step > 1.0 {
            return Err(Error::InvalidParams {
                field: "primal_step",
                reason: format!(
                    "terminal relaxation must lie in (0, 1], got {}",
                    self.primal_step
                ),
            });
        }
        if self.dual_step >= 2.0 {
            return Err(Error::InvalidParams {
                field: "dual_step",
                reason: format!(
                    "phase relaxation must lie in (0, 2), got {}",
                    self.dual_step
                ),
            });
        }
        if self.check_every == 0 {
            return Err(Error::InvalidParams {
                field: "check_every",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.init_perturbation.is_finite() && self.init_perturbation >= 0.0) {
            return Err(Error::InvalidParams {
                field: "init_perturbation",
                reason: format!("must be finite and >= 0, got {}", self.init_perturbation),
            });
        }
        if !self.phase_offset.is_finite() {
            return Err(Error::InvalidParams {
                field: "phase_offset",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }
}

/// Outcome of a solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub method: &'static str,
    pub converged: bool,
    pub iterations: usize,
    pub continuity_rms: f64,
    pub guidance_rms: f64,
    pub qhj_rms: f64,
    pub qhj_masked_fraction: f64,
    /// `∫|ρ_dyn(tf) − ρf| dx` for the dynamics that produced the history.
    pub terminal_mismatch: f64,
    pub action: ActionBreakdown,
    /// Shooting only: coefficients `c_0..c_d` of the initial phase.
    pub chebyshev_coefficients: Option<Vec<f64>>,
    /// Bridge only: minimal positive cost from the endpoint factors.
    pub dual_cost: Option<f64>,
    pub wall_time_s: f64,
}

/// An action tagged with the boundary pair it was computed for.
#[derive(Debug, Clone, Serialize)]
pub struct TaggedAction {
    pub boundary: String,
    pub action: ActionBreakdown,
}

/// Action of a complete history (augmented when a phase is present).
pub fn action_of_history(history: &History, params: &PhysParams) -> Result<TaggedAction> {
    let action = match history.phase {
        Some(_) => action::augmented_action(history, params)?,
        None => action::primal_action(history, params)?,
    };
    let nt = history.grid.nt();
    Ok(TaggedAction {
        boundary: format!(
            "{:016x}-{:016x}",
            fnv1a(history.rho.slice(0)),
            fnv1a(history.rho.slice(nt - 1))
        ),
        action,
    })
}

/// Explicit RK4 integrator for `iħ∂tψ = Hψ` with a fourth-order Laplacian
/// (three-point next to the walls) and `ψ = 0` on the wall nodes.
struct Sweeper {
    a: f64,
    v_over_hbar: Vec<f64>,
    substeps: usize,
    dt: f64,
    inv_dx2: f64,
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl Sweeper {
    fn new(params: &PhysParams, grid: &SpaceTimeGrid) -> Result<Self> {
        let v = params.potential.sample(params.mass, grid)?;
        let a = params.hbar / (2.0 * params.mass);
        let dx = grid.dx();
        let vmax = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let omega_max = a * (16.0 / 3.0) / (dx * dx) + vmax / params.hbar;
        let substeps = ((grid.dt() * omega_max / 2.0).ceil() as usize).max(1);
        let nx = grid.nx();
        let zero = vec![Complex64::new(0.0, 0.0); nx];
        Ok(Self {
            a,
            v_over_hbar: v.iter().map(|v| v / params.hbar).collect(),
            substeps,
            dt: grid.dt(),
            inv_dx2: 1.0 / (dx * dx),
            k: [zero.clone(), zero.clone(), zero.clone(), zero.clone()],
            tmp: zero,
        })
    }

    /// `dψ/dt = i a ∇²ψ − i (V/ħ) ψ`.
    fn rhs(a: f64, inv_dx2: f64, v: &[f64], psi: &[Complex64], out: &mut [Complex64]) {
        let n = psi.len();
        let i_unit = Complex64::new(0.0, 1.0);
        out[0] = Complex64::new(0.0, 0.0);
        out[n - 1] = Complex64::new(0.0, 0.0);
        let c12 = inv_dx2 / 12.0;
        for i in 1..n - 1 {
            let lap = if i == 1 || i == n - 2 {
                (psi[i - 1] - 2.0 * psi[i] + psi[i + 1]) * inv_dx2
            } else {
                (-psi[i - 2] + 16.0 * psi[i - 1] - 30.0 * psi[i] + 16.0 * psi[i + 1] - psi[i + 2])
                    * c12
            };
            out[i] = i_unit * (a * lap - v[i] * psi[i]);
        }
    }

    /// Advances one grid interval forward (`sign = 1`) or backward (`-1`).
    fn advance(&mut self, psi: &mut [Complex64], sign: f64) {
        let h = sign * self.dt / self.substeps as f64;
        let (a, inv, v) = (self.a, self.inv_dx2, &self.v_over_hbar);
        for _ in 0..self.substeps {
            let [k1, k2, k3, k4] = &mut self.k;
            Self::rhs(a, inv, v, psi, k1);
            for i in 0..psi.len() {
                self.tmp[i] = psi[i] + 0.5 * h * k1[i];
            }
            Self::rhs(a, inv, v, &self.tmp, k2);
            for i in 0..psi.len() {
                self.tmp[i] = psi[i] + 0.5 * h * k2[i];
            }
            Self::rhs(a, inv, v, &self.tmp, k3);
            for i in 0..psi.len() {
                self.tmp[i] = psi[i] + h * k3[i];
            }
            Self::rhs(a, inv, v, &self.tmp, k4);
            for i in 0..psi.len() {
                psi[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }

    /// Sweeps across all intervals; returns every slice when `keep` is set.
    fn sweep(
        &mut self,
        psi: &mut [Complex64],
        nt: usize,
        sign: f64,
        keep: bool,
    ) -> Vec<Vec<Complex64>> {
        let mut out = Vec::new();
        if keep {
            out.reserve(nt);
            out.push(psi.to_vec());
        }
        for _ in 1..nt {
            self.advance(psi, sign);
            if keep {
                out.push(psi.to_vec());
            }
        }
        out
    }
}

fn density_mismatch(psi: &[Complex64], target: &[f64], grid: &SpaceTimeGrid) -> f64 {
    let rho: Vec<f64> = psi.iter().map(|c| c.norm_sqr()).collect();
    let mass = trapezoid(&rho, grid.dx());
    let diff: Vec<f64> = rho
        .iter()
        .zip(target)
        .map(|(r, t)| (r / mass - t).abs())
        .collect();
    trapezoid(&diff, grid.dx())
}

fn all_finite(psi: &[Complex64]) -> bool {
    psi.iter().all(|c| c.is_finite())
}

/// Seeded smooth phase: low Chebyshev modes with uniform coefficients.
fn perturbed_phase(grid: &SpaceTimeGrid, amplitude: f64, hbar: f64, seed: u64) -> Vec<f64> {
    if amplitude == 0.0 {
        return vec![0.0; grid.nx()];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![0.0];
    for _ in 0..4 {
        coeffs.push(amplitude * hbar * rng.random_range(-1.0..1.0));
    }
    chebyshev_phase(&coeffs, grid)
}

/// Relative modulus below which a swept phase is treated as noise.
const PHASE_TRUST: f64 = 1e-13;

/// Alternating-projection solve of the two-time boundary value problem.
pub fn solve_bvp_primal_dual(
    boundary: &BoundaryData,
    params: &PhysParams,
    grid: &SpaceTimeGrid,
    config: &SolverConfig,
) -> Result<(History, SolveReport)> {
    let start = Instant::now();
    params.validate()?;
    config.validate()?;
    boundary.check(grid)?;
    let hbar = params.hbar;
    let nt = grid.nt();
    let a0 = &boundary.amp0;
    let af = &boundary.ampf;
    let mut s0 = perturbed_phase(grid, config.init_perturbation, hbar, config.seed);
    let mut sweeper = Sweeper::new(params, grid)?;
    let alpha = config.primal_step;
    let beta = config.dual_step;

    let mut iteration = 0;
    loop {
        iteration += 1;
        let check = iteration % config.check_every == 0 || iteration >= config.max_outer_iterations;
        let mut psi: Vec<Complex64> = a0
            .iter()
            .zip(&s0)
            .map(|(&a, &s)| Complex64::from_polar(a, s / hbar))
            .collect();
        let nx = psi.len();
        psi[0] = Complex64::new(0.0, 0.0);
        psi[nx - 1] = Complex64::new(0.0, 0.0);
        let forward = sweeper.sweep(&mut psi, nt, 1.0, check);
        if !all_finite(&psi) {
            return Err(Error::NumericalDivergence { iteration });
        }
        let mismatch = density_mismatch(&psi, &boundary.rhof, grid);
        let norm = trapezoid(
            &psi.iter().map(|c| c.norm_sqr()).collect::<Vec<_>>(),
            grid.dx(),
        )
        .sqrt();
        for (c, target) in psi.iter_mut().zip(af) {
            let amp = alpha * target + (1.0 - alpha) * c.norm() / norm;
            *c = Complex64::from_polar(amp, c.arg());
        }
        let backward = sweeper.sweep(&mut psi, nt, -1.0, check);
        if !all_finite(&psi) {
            return Err(Error::NumericalDivergence { iteration });
        }

        if check {
            let mut backward = backward;
            backward.reverse();
            let history = assemble_blended(&forward, &backward, boundary, params, grid)?;
            let report = certify(
                &history,
                params,
                config,
                mismatch,
                iteration,
                start,
                "primal_dual",
                None,
            )?;
            if report.converged || iteration >= config.max_outer_iterations {
                return Ok((history, report));
            }
        }

        // The returned phase is only meaningful well above round-off.
        let trust = PHASE_TRUST * psi.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        for i in 0..nx {
            if psi[i].norm() > trust {
                s0[i] += beta * hbar * wrap(psi[i].arg() - s0[i] / hbar);
            }
        }
        if s0.iter().any(|s| !s.is_finite()) {
            return Err(Error::NumericalDivergence { iteration });
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn certify(
    history: &History,
    params: &PhysParams,
    config: &SolverConfig,
    mismatch: f64,
    iterations: usize,
    start: Instant,
    method: &'static str,
    coefficients: Option<Vec<f64>>,
) -> Result<SolveReport> {
    let c = action::continuity_residual(history)?;
    let g = action::guidance_residual(history, params)?;
    let q = if method == "bridge" {
        action::euclidean_qhj_residual(history, params)?
    } else {
        action::qhj_residual(history, params)?
    };
    let act = action::augmented_action(history, params)?;
    let converged = c.rms <= config.continuity_tolerance
        && g.rms <= config.stationarity_tolerance
        && q.rms <= config.stationarity_tolerance
        && mismatch <= config.terminal_tolerance;
    Ok(SolveReport {
        method,
        converged,
        iterations,
        continuity_rms: c.rms,
        guidance_rms: g.rms,
        qhj_rms: q.rms,
        qhj_masked_fraction: q.masked_fraction,
        terminal_mismatch: mismatch,
        action: act,
        chebyshev_coefficients: coefficients,
        dual_cost: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// History from forward and backward sweeps, blended linearly in time so
/// each boundary is taken from the sweep that starts there.
fn assemble_blended(
    forward: &[Vec<Complex64>],
    backward: &[Vec<Complex64>],
    boundary: &BoundaryData,
    params: &PhysParams,
    grid: &SpaceTimeGrid,
) -> Result<History> {
    let nt = grid.nt();
    let slices: Vec<Vec<Complex64>> = (0..nt)
        .map(|n| {
            let w = (grid.t(n) - grid.t0()) / grid.duration();
            forward[n]
                .iter()
                .zip(&backward[n])
                .map(|(f, b)| (1.0 - w) * f + w * b)
                .collect()
        })
        .collect();
    assemble_history(&slices, boundary, params, grid)
}

/// Builds a history from a sequence of complex slices: densities from the
/// slices (boundaries replaced by the exact boundary data), phase levels
/// from the unwrapped slice phases, then the continuity projection.
pub(crate) fn assemble_history(
    slices: &[Vec<Complex64>],
    boundary: &BoundaryData,
    params: &PhysParams,
    grid: &SpaceTimeGrid,
) -> Result<History> {
    let nt = grid.nt();
    let mut rho = Vec::with_capacity(nt);
    for (n, psi) in slices.iter().enumerate() {
        let slice = if n == 0 {
            boundary.rho0.clone()
        } else if n == nt - 1 {
            boundary.rhof.clone()
        } else {
            let raw: Vec<f64> = psi.iter().map(|c| c.norm_sqr()).collect();
            normalize_slice(&raw, grid)?
        };
        rho.push(slice);
    }
    let rho = Field::from_slices(grid, &rho)?;
    let levels = unwrap_history(slices, params.hbar);
    let levels = Field::from_slices(grid, &levels)?;
    let (current, phase) = continuity_projection(&rho, &levels, params, grid)?;
    History::new(grid.clone(), rho, current, Some(phase))
}

/// Phase of every slice, unwrapped outward from the largest-modulus node
/// and kept continuous in time at that node.
fn unwrap_history(slices: &[Vec<Complex64>], hbar: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(slices.len());
    for psi in slices {
        let n = psi.len();
        let anchor = (0..n)
            .max_by(|&a, &b| psi[a].norm_sqr().total_cmp(&psi[b].norm_sqr()))
            .unwrap_or(0);
        let raw = psi[anchor].arg();
        let base = match out.last() {
            Some(prev) => {
                let p = prev[anchor] / hbar;
                p + wrap(raw - p)
            }
            None => raw,
        };
        let mut phi = vec![0.0; n];
        phi[anchor] = base;
        for i in anchor + 1..n {
            phi[i] = phi[i - 1] + wrap(psi[i].arg() - psi[i - 1].arg());
        }
        for i in (0..anchor).rev() {
            phi[i] = phi[i + 1] + wrap(psi[i].arg() - psi[i + 1].arg());
        }
        out.push(phi.into_iter().map(|p| hbar * p).collect());
    }
    out
}

/// Rebuilds `j` from `∂tρ` so that the discrete continuity equation holds at
/// every interior node and at the left wall, integrates `∇S = m j/ρ` on the
/// two sublattices of the central stencil, fixes each sublattice constant by
/// a density-weighted match to `levels`, and finally sets `j = ρ∇S/m`.
/// In the far tails, where the second-order recurrence loses relative
/// accuracy, the phase fades back to `levels`.
/// The result is gauge-fixed so that `S = 0` at the leftmost node of `t0`.
fn continuity_projection(
    rho: &Field,
    levels: &Field,
    params: &PhysParams,
    grid: &SpaceTimeGrid,
) -> Result<(Field, Field)> {
    let nx = grid.nx();
    let dx = grid.dx();
    let m = params.mass;
    let drho = time_derivative(rho, grid.dt())?;
    let mut current = Field::zeros(grid);
    let mut phase = Field::zeros(grid);
    for n in 0..grid.nt() {
        let f = drho.slice(n);
        let r = rho.slice(n);
        let mut j = vec![0.0; nx];
        for i in (1..nx - 1).step_by(2) {
            j[i + 1] = j[i - 1] - 2.0 * dx * f[i];
        }
        j[1] = (j[2] - 2.0 * dx * f[0]) / 4.0;
        for i in (2..nx - 1).step_by(2) {
            j[i + 1] = j[i - 1] - 2.0 * dx * f[i];
        }
        let g: Vec<f64> = j.iter().zip(r).map(|(j, r)| m * j / r).collect();
        let mut s = vec![0.0; nx];
        for i in 1..nx - 1 {
            s[i + 1] = s[i - 1] + 2.0 * dx * g[i];
        }
        let u = levels.slice(n);
        for parity in 0..2 {
            let (mut num, mut den) = (0.0, 0.0);
            for i in (parity..nx).step_by(2) {
                num += r[i] * (u[i] - s[i]);
                den += r[i];
            }
            let c = if den > 0.0 { num / den } else { 0.0 };
            for i in (parity..nx).step_by(2) {
                s[i] += c;
            }
        }
        let peak = r.iter().cloned().fold(0.0, f64::max);
        for i in 0..nx {
            let w = tail_weight(r[i] / peak);
            s[i] = w * s[i] + (1.0 - w) * u[i];
        }
        let ds = spatial_gradient(&s, dx)?;
        for (out, (d, r)) in current.slice_mut(n).iter_mut().zip(ds.iter().zip(r)) {
            *out = r * d / m;
        }
        phase.slice_mut(n).copy_from_slice(&s);
    }
    let origin = phase.get(0, 0);
    for v in phase.values_mut() {
        *v -= origin;
    }
    Ok((current, phase))
}

/// Smooth step in `log10(ρ/ρmax)`: 1 above `1e-3`, 0 below `1e-6`.
fn tail_weight(rel: f64) -> f64 {
    if !(rel > 0.0) {
        return 0.0;
    }
    let z = ((rel.log10() + 6.0) / 3.0).clamp(0.0, 1.0);
    z * z * (3.0 - 2.0 * z)
}

/// Symmetric imaginary-time Crank–Nicolson propagator `e^{−τH/ħ}` with
/// reflecting walls. The substep keeps both factors entrywise nonnegative,
/// so positive vectors stay positive.
struct HeatKernel {
    /// Diagonal of `I + A` and `I − A`, and the off-diagonal of `A`.
    plus: Vec<f64>,
    minus: Vec<f64>,
    off: f64,
    substeps: usize,
    scratch: Vec<f64>,
    rhs: Vec<f64>,
}

impl HeatKernel {
    fn new(params: &PhysParams, grid: &SpaceTimeGrid) -> Result<Self> {
        let nx = grid.nx();
        let (hbar, m, dx) = (params.hbar, params.mass, grid.dx());
        let v = params.potential.sample(m, grid)?;
        let v_min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let kin = hbar * hbar / (2.0 * m * dx * dx);
        let diag_max = 2.0 * kin + v.iter().map(|x| x - v_min).fold(0.0, f64::max);
        let substeps = ((grid.dt() * diag_max / (2.0 * hbar)).ceil() as usize).max(1);
        let h = grid.dt() / substeps as f64 / (2.0 * hbar);
        let diag: Vec<f64> = (0..nx)
            .map(|i| {
                let lap = if i == 0 || i == nx - 1 { kin } else { 2.0 * kin };
                h * (lap + v[i] - v_min)
            })
            .collect();
        Ok(Self {
            plus: diag.iter().map(|d| 1.0 + d).collect(),
            minus: diag.iter().map(|d| 1.0 - d).collect(),
            off: -h * kin,
            substeps,
            scratch: vec![0.0; nx],
            rhs: vec![0.0; nx],
        })
    }

    /// Advances `f` by one time slice.
    fn slice(&mut self, f: &mut [f64]) {
        let n = f.len();
        for _ in 0..self.substeps {
            for i in 0..n {
                let mut r = self.minus[i] * f[i];
                if i > 0 {
                    r -= self.off * f[i - 1];
                }
                if i + 1 < n {
                    r -= self.off * f[i + 1];
                }
                self.rhs[i] = r;
            }
            // Diagonally dominant, so the Thomas sweep needs no pivoting.
            let mut beta = self.plus[0];
            f[0] = self.rhs[0] / beta;
            for i in 1..n {
                self.scratch[i] = self.off / beta;
                beta = self.plus[i] - self.off * self.scratch[i];
                f[i] = (self.rhs[i] - self.off * f[i - 1]) / beta;
            }
            for i in (0..n - 1).rev() {
                f[i] -= self.scratch[i + 1] * f[i + 1];
            }
        }
    }

    fn across(&mut self, f: &mut [f64], slices: usize) {
        for _ in 0..slices {
            self.slice(f);
        }
    }
}

/// Minimizer of the positive cost `kinetic + (ħ²/8m)·Fisher + ∫∫Vρ` between
/// the boundary densities. The minimizer is a Schrödinger bridge:
/// `ρ = φ φ̂` with `φ̂` carried forward and `φ` backward by `e^{−τH/ħ}`,
/// and `S = (ħ/2) ln(φ/φ̂)`. The endpoint factors are found by Fortet
/// (Sinkhorn) iteration; `primal_step` and `dual_step` are unused.
pub fn solve_bridge(
    boundary: &BoundaryData,
    params: &PhysParams,
    grid: &SpaceTimeGrid,
    config: &SolverConfig,
) -> Result<(History, SolveReport)> {
    let start = Instant::now();
    params.validate()?;
    config.validate()?;
    boundary.check(grid)?;
    let (nx, nt, dx) = (grid.nx(), grid.nt(), grid.dx());
    let (rho0, rhof) = (&boundary.rho0, &boundary.rhof);
    let mut kernel = HeatKernel::new(params, grid)?;
    let mut phi_f = vec![1.0; nx];
    let mut phi_0 = vec![0.0; nx];
    let mut hat_0 = vec![0.0; nx];
    let mut hat_f = vec![0.0; nx];
    let mut iteration = 0;
    let mut mismatch;
    loop {
        iteration += 1;
        phi_0.copy_from_slice(&phi_f);
        kernel.across(&mut phi_0, nt - 1);
        for i in 0..nx {
            hat_0[i] = rho0[i] / phi_0[i];
        }
        hat_f.copy_from_slice(&hat_0);
        kernel.across(&mut hat_f, nt - 1);
        let marginal: Vec<f64> = (0..nx).map(|i| (phi_f[i] * hat_f[i] - rhof[i]).abs()).collect();
        mismatch = trapezoid(&marginal, dx);
        if !mismatch.is_finite() {
            return Err(Error::NumericalDivergence { iteration });
        }
        for i in 0..nx {
            phi_f[i] = rhof[i] / hat_f[i];
        }
        // Keep the two factors on a common scale.
        let scale = phi_f.iter().cloned().fold(0.0, f64::max);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::NumericalDivergence { iteration });
        }
        phi_f.iter_mut().for_each(|v| *v /= scale);
        if mismatch <= 1e-3 * config.terminal_tolerance || iteration >= config.max_outer_iterations {
            break;
        }
    }

    let mut hats = Vec::with_capacity(nt);
    let mut f = hat_0;
    hats.push(f.clone());
    for _ in 1..nt {
        kernel.slice(&mut f);
        hats.push(f.clone());
    }
    let mut phis = vec![Vec::new(); nt];
    let mut b = phi_f;
    phis[nt - 1] = b.clone();
    for n in (0..nt - 1).rev() {
        kernel.slice(&mut b);
        phis[n] = b.clone();
    }
    let hbar = params.hbar;
    let mut rho = Vec::with_capacity(nt);
    let mut levels = Vec::with_capacity(nt);
    for n in 0..nt {
        let raw: Vec<f64> = phis[n].iter().zip(&hats[n]).map(|(a, b)| a * b).collect();
        rho.push(match n {
            0 => rho0.clone(),
            _ if n == nt - 1 => rhof.clone(),
            _ => normalize_slice(&raw, grid)?,
        });
        levels.push(
            phis[n]
                .iter()
                .zip(&hats[n])
                .map(|(a, b)| 0.5 * hbar * (a.max(1e-300).ln() - b.max(1e-300).ln()))
                .collect::<Vec<f64>>(),
        );
    }
    let dual = bridge_dual_cost(&phis[0], &hats[0], &phis[nt - 1], boundary, params, grid)?;
    let rho = Field::from_slices(grid, &rho)?;
    let levels = Field::from_slices(grid, &levels)?;
    let (current, phase) = continuity_projection(&rho, &levels, params, grid)?;
    let history = History::new(grid.clone(), rho, current, Some(phase))?;
    let mut report = certify(&history, params, config, mismatch, iteration, start, "bridge", None)?;
    report.dual_cost = Some(dual);
    Ok((history, report))
}

/// Minimal positive cost from the endpoint factors:
/// `ħ [∫ρf ln φf + ∫ρ0 ln φ̂0 − ½(∫ρ0 ln ρ0 + ∫ρf ln ρf)] + T·min V`.
/// This is the entropic value of the bridge, exact up to the spatial
/// discretization and free of the time quadrature of the history.
fn bridge_dual_cost(
    phi_0: &[f64],
    hat_0: &[f64],
    phi_f: &[f64],
    boundary: &BoundaryData,
    params: &PhysParams,
    grid: &SpaceTimeGrid,
) -> Result<f64> {
    let dx = grid.dx();
    let integral = |f: &dyn Fn(usize) -> f64| -> f64 {
        trapezoid(&(0..grid.nx()).map(f).collect::<Vec<_>>(), dx)
    };
    let (rho0, rhof) = (&boundary.rho0, &boundary.rhof);
    // φ0·φ̂0 carries the scale of the last Fortet update.
    let z = integral(&|i| phi_0[i] * hat_0[i]);
    let cross = integral(&|i| rhof[i] * phi_f[i].ln()) + integral(&|i| rho0[i] * hat_0[i].ln()) - z.ln();
    let entropy = integral(&|i| rho0[i] * rho0[i].ln()) + integral(&|i| rhof[i] * rhof[i].ln());
    let v = params.potential.sample(params.mass, grid)?;
    let v_min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(params.hbar * (cross - 0.5 * entropy) + v_min * grid.duration())
}

/// `Σ c_k T_k(ξ)` with `ξ` mapping the spatial axis onto `[−1, 1]`.
pub fn chebyshev_phase(coeffs: &[f64], grid: &SpaceTimeGrid) -> Vec<f64> {
    let (lo, hi) = (grid.x_min(), grid.x_max());
    grid.xs()
        .map(|x| {
            let xi = ((2.0 * x - (lo + hi)) / (hi - lo)).clamp(-1.0, 1.0);
            let (mut t_prev, mut t_cur) = (1.0, xi);
            let mut sum = coeffs.first().copied().unwrap_or(0.0);
            for (k, c) in coeffs.iter().enumerate().skip(1) {
                if k > 1 {
                    let next = 2.0 * xi * t_cur - t_prev;
                    t_prev = t_cur;
                    t_cur = next;
                }
                sum += c * t_cur;
            }
            sum
        })
        .collect()
}

/// Terminal density mismatch of the oracle dynamics from a Chebyshev
/// initial phase.
struct ShootingObjective<'a> {
    boundary: &'a BoundaryData,
    params: &'a PhysParams,
    grid: &'a SpaceTimeGrid,
    offset: f64,
    cn: CrankNicolson,
    evaluations: usize,
}

impl ShootingObjective<'_> {
    fn coefficients(&self, free: &[f64]) -> Vec<f64> {
        let mut c = Vec::with_capacity(free.len() + 1);
        c.push(self.offset);
        c.extend_from_slice(free);
        c
    }

    fn initial_state(&self, free: &[f64]) -> Result<Vec<Complex64>> {
        let s0 = chebyshev_phase(&self.coefficients(free), self.grid);
        Ok(madelung_compose(&self.boundary.amp0.iter().map(|a| a * a).collect::<Vec<_>>(), &s0, self.params)?.0)
    }

    fn run(&mut self, free: &[f64], keep: bool) -> Result<(f64, Vec<Vec<Complex64>>)> {
        self.evaluations += 1;
        let mut psi = self.initial_state(free)?;
        let nx = psi.len();
        psi[0] = Complex64::new(0.0, 0.0);
        psi[nx - 1] = Complex64::new(0.0, 0.0);
        let mut out = Vec::new();
        if keep {
            out.push(psi.clone());
        }
        for step in 1..self.grid.nt() {
            self.cn.step(&mut psi, step)?;
            if keep {
                out.push(psi.clone());
            }
        }
        Ok((density_mismatch(&psi, &self.boundary.rhof, self.grid), out))
    }
}

/// Shooting cross-check: Chebyshev initial phase, oracle propagation,
/// Nelder–Mead on the terminal L1 mismatch.
pub fn solve_bvp_shooting(
    boundary: &BoundaryData,
    params: &PhysParams,
    grid: &SpaceTimeGrid,
    config: &SolverConfig,
) -> Result<(History, SolveReport)> {
    let start = Instant::now();
    params.validate()?;
    config.validate()?;
    boundary.check(grid)?;
    let mut objective = ShootingObjective {
        boundary,
        params,
        grid,
        offset: config.phase_offset,
        cn: CrankNicolson::new(params, grid, grid.dt())?,
        evaluations: 0,
    };
    let dim = config.chebyshev_degree;
    let x0 = vec![0.0; dim];
    let result = nelder_mead(
        |c| objective.run(c, false).map(|(f, _)| f),
        &x0,
        params.hbar,
        config.max_evaluations,
        1e-12,
    )?;
    let (mismatch, slices) = objective.run(&result.x, true)?;
    let history = assemble_history(&slices, boundary, params, grid)?;
    let coefficients = objective.coefficients(&result.x);
    let report = certify(
        &history,
        params,
        config,
        mismatch,
        objective.evaluations,
        start,
        "shooting",
        Some(coefficients),
    )?;
    Ok((history, report))
}

struct SimplexResult {
    x: Vec<f64>,
}

/// Nelder–Mead with the standard coefficients (1, 2, ½, ½). Stops when the
/// spread of simplex values drops below `ftol` or after `max_evals`.
fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> Result<SimplexResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    if n == 0 {
        return Ok(SimplexResult { x: vec![] });
    }
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut values = Vec::with_capacity(n + 1);
    for p in &simplex {
        values.push(f(p)?);
    }
    let mut evals = n + 1;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if (values[n] - values[0]).abs() <= ftol {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|p| p[d]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr)?;
        evals += 1;
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe)?;
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(-0.5);
                let fc = f(&xc)?;
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc)?;
                (xc, fc)
            };
            evals += 1;
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    for d in 0..n {
                        simplex[i][d] = best[d] + 0.5 * (simplex[i][d] - best[d]);
                    }
                    values[i] = f(&simplex[i])?;
                    evals += 1;
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    Ok(SimplexResult {
        x: simplex[best].clone(),
    })
}
