//! Discretization substrate: the space-time grid, grid-sampled fields,
//! trapezoidal quadrature and the second-order finite-difference operators
//! shared by every other module.
//!
//! Fields are stored row-major with time as the outer index, so a time slice
//! is a contiguous `&[f64]` of length `nx`.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative density floor: every slice is clamped to `DENSITY_FLOOR * max(slice)`
/// before anything divides by it.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// External potential acting on the particle.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    Free,
    /// `V(x) = m ω² x² / 2`.
    Harmonic {
        omega: f64,
    },
    /// One value per spatial node.
    Tabulated {
        values: Vec<f64>,
    },
}

impl Potential {
    /// Samples the potential on the spatial nodes of `grid`.
    pub fn sample(&self, mass: f64, grid: &SpaceTimeGrid) -> Result<Vec<f64>> {
        match self {
            Potential::Free => Ok(vec![0.0; grid.nx()]),
            Potential::Harmonic { omega } => Ok(grid
                .xs()
                .map(|x| 0.5 * mass * omega * omega * x * x)
                .collect()),
            Potential::Tabulated { values } => {
                if values.len() != grid.nx() {
                    return Err(Error::dimension(
                        "tabulated potential",
                        grid.nx(),
                        values.len(),
                    ));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Mass, reduced Planck constant and external potential.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysParams {
    pub mass: f64,
    pub hbar: f64,
    pub potential: Potential,
}

impl PhysParams {
    pub fn new(mass: f64, hbar: f64, potential: Potential) -> Result<Self> {
        let params = Self {
            mass,
            hbar,
            potential,
        };
        params.validate()?;
        Ok(params)
    }

    /// Natural units (`ħ = m = 1`) with no external potential.
    pub fn natural() -> Self {
        Self {
            mass: 1.0,
            hbar: 1.0,
            potential: Potential::Free,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::InvalidParams {
                field: "mass",
                reason: format!("must be finite and > 0, got {}", self.mass),
            });
        }
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::InvalidParams {
                field: "hbar",
                reason: format!("must be finite and > 0, got {}", self.hbar),
            });
        }
        if let Potential::Harmonic { omega } = self.potential {
            if !(omega.is_finite() && omega > 0.0) {
                return Err(Error::InvalidParams {
                    field: "omega",
                    reason: format!("must be finite and > 0, got {omega}"),
                });
            }
        }
        if let Potential::Tabulated { values } = &self.potential {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams {
                    field: "potential",
                    reason: "tabulated potential contains non-finite values".into(),
                });
            }
        }
        Ok(())
    }
}

/// Uniform 1D space × time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceTimeGrid {
    x_min: f64,
    x_max: f64,
    nx: usize,
    t0: f64,
    tf: f64,
    nt: usize,
}

impl SpaceTimeGrid {
    pub const MIN_NX: usize = 8;
    pub const MIN_NT: usize = 2;

    pub fn new(x_min: f64, x_max: f64, nx: usize, t0: f64, tf: f64, nt: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid {
                field: "x_max",
                reason: format!("need finite x_min < x_max, got [{x_min}, {x_max}]"),
            });
        }
        if nx < Self::MIN_NX {
            return Err(Error::InvalidGrid {
                field: "nx",
                reason: format!("need at least {} nodes, got {nx}", Self::MIN_NX),
            });
        }
        if !(t0.is_finite() && tf.is_finite()) || tf <= t0 {
            return Err(Error::InvalidGrid {
                field: "tf",
                reason: format!("need finite t0 < tf, got [{t0}, {tf}]"),
            });
        }
        if nt < Self::MIN_NT {
            return Err(Error::InvalidGrid {
                field: "nt",
                reason: format!("need at least {} time slices, got {nt}", Self::MIN_NT),
            });
        }
        Ok(Self {
            x_min,
            x_max,
            nx,
            t0,
            tf,
            nt,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn tf(&self) -> f64 {
        self.tf
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }
    pub fn dt(&self) -> f64 {
        (self.tf - self.t0) / (self.nt - 1) as f64
    }
    pub fn duration(&self) -> f64 {
        self.tf - self.t0
    }
    pub fn len(&self) -> usize {
        self.nx * self.nt
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spatial node `i`. Nodes are placed symmetrically about the domain
    /// centre so that a symmetric domain gives exactly mirrored coordinates.
    pub fn x(&self, i: usize) -> f64 {
        linspace_node(self.x_min, self.x_max, self.nx, i)
    }

    pub fn t(&self, n: usize) -> f64 {
        linspace_node(self.t0, self.tf, self.nt, n)
    }

    pub fn xs(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.nx).map(|i| self.x(i))
    }

    pub fn ts(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.nt).map(|n| self.t(n))
    }

    /// Same spatial axis, different time axis.
    pub fn with_time(&self, t0: f64, tf: f64, nt: usize) -> Result<Self> {
        Self::new(self.x_min, self.x_max, self.nx, t0, tf, nt)
    }
}

fn linspace_node(lo: f64, hi: f64, count: usize, i: usize) -> f64 {
    if i == 0 {
        return lo;
    }
    if i + 1 == count {
        return hi;
    }
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let k = 2.0 * i as f64 - (count - 1) as f64;
    centre + k * (half / (count - 1) as f64)
}

/// Scalar field sampled on every node of a [`SpaceTimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    nx: usize,
    nt: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Self {
            nx: grid.nx(),
            nt: grid.nt(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: &SpaceTimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::dimension("field", grid.len(), values.len()));
        }
        Ok(Self {
            nx: grid.nx(),
            nt: grid.nt(),
            values,
        })
    }

    /// Samples `f(x, t)` on every node.
    pub fn from_fn(grid: &SpaceTimeGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for n in 0..grid.nt() {
            let t = grid.t(n);
            values.extend(grid.xs().map(|x| f(x, t)));
        }
        Self {
            nx: grid.nx(),
            nt: grid.nt(),
            values,
        }
    }

    /// Stacks per-slice vectors into a field.
    pub fn from_slices(grid: &SpaceTimeGrid, slices: &[Vec<f64>]) -> Result<Self> {
        if slices.len() != grid.nt() {
            return Err(Error::dimension("time slices", grid.nt(), slices.len()));
        }
        let mut values = Vec::with_capacity(grid.len());
        for s in slices {
            if s.len() != grid.nx() {
                return Err(Error::dimension("slice", grid.nx(), s.len()));
            }
            values.extend_from_slice(s);
        }
        Ok(Self {
            nx: grid.nx(),
            nt: grid.nt(),
            values,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        &self.values[n * self.nx..(n + 1) * self.nx]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.values[n * self.nx..(n + 1) * self.nx]
    }

    pub fn slices(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.values.chunks_exact(self.nx)
    }

    pub fn get(&self, n: usize, i: usize) -> f64 {
        self.values[n * self.nx + i]
    }

    pub fn matches(&self, grid: &SpaceTimeGrid) -> bool {
        self.nx == grid.nx() && self.nt == grid.nt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Root mean square over every node.
    pub fn rms(&self) -> f64 {
        rms(&self.values)
    }
}

pub(crate) fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let sum: f64 = values.iter().map(|v| v * v).sum();
    (sum / values.len() as f64).sqrt()
}

/// A candidate solution: density, current and (once solved) the phase
/// multiplier, all on one grid.
#[derive(Debug, Clone)]
pub struct History {
    pub grid: SpaceTimeGrid,
    pub rho: Field,
    pub current: Field,
    pub phase: Option<Field>,
}

impl History {
    pub fn new(
        grid: SpaceTimeGrid,
        rho: Field,
        current: Field,
        phase: Option<Field>,
    ) -> Result<Self> {
        for (what, f) in [("density", &rho), ("current", &current)] {
            if !f.matches(&grid) {
                return Err(Error::dimension(what, grid.len(), f.nx() * f.nt()));
            }
        }
        if let Some(s) = &phase {
            if !s.matches(&grid) {
                return Err(Error::dimension("phase", grid.len(), s.nx() * s.nt()));
            }
        }
        if !rho.is_finite()
            || !current.is_finite()
            || phase.as_ref().is_some_and(|s| !s.is_finite())
        {
            return Err(Error::ContractViolation(
                "history contains non-finite values".into(),
            ));
        }
        if rho.values().iter().any(|&r| r <= 0.0) {
            return Err(Error::ContractViolation(
                "density must be strictly positive".into(),
            ));
        }
        Ok(Self {
            grid,
            rho,
            current,
            phase,
        })
    }

    pub fn phase(&self) -> Result<&Field> {
        self.phase.as_ref().ok_or(Error::IncompleteHistory("phase"))
    }
}

/// Complex amplitude on one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexState(pub Vec<Complex64>);

impl ComplexState {
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn density(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.norm_sqr()).collect()
    }
    /// `∫ |ψ|² dx` by the trapezoidal rule.
    pub fn norm_sqr(&self, grid: &SpaceTimeGrid) -> Result<f64> {
        integrate_slice(&self.density(), grid)
    }
}

/// Trapezoidal rule over `[x_min, x_max]`, summed left to right.
pub fn integrate_slice(f: &[f64], grid: &SpaceTimeGrid) -> Result<f64> {
    if f.len() != grid.nx() {
        return Err(Error::dimension("slice", grid.nx(), f.len()));
    }
    Ok(trapezoid(f, grid.dx()))
}

pub(crate) fn trapezoid(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.5 * f[0];
    for v in &f[1..n - 1] {
        sum += v;
    }
    sum += 0.5 * f[n - 1];
    sum * h
}

/// First derivative: central differences inside, second-order one-sided
/// differences at the two end nodes.
pub fn spatial_gradient(f: &[f64], dx: f64) -> Result<Vec<f64>> {
    let n = f.len();
    if n < 3 {
        return Err(Error::dimension("gradient stencil", 3, n));
    }
    let mut out = vec![0.0; n];
    let inv = 0.5 / dx;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) * inv;
    }
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv;
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv;
    Ok(out)
}

/// Three-point Laplacian inside; the end nodes use the second-order
/// one-sided four-point stencil (or copy the neighbour when `n == 3`).
pub fn spatial_laplacian(f: &[f64], dx: f64) -> Result<Vec<f64>> {
    let n = f.len();
    if n < 3 {
        return Err(Error::dimension("laplacian stencil", 3, n));
    }
    let mut out = vec![0.0; n];
    let inv = 1.0 / (dx * dx);
    for i in 1..n - 1 {
        out[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) * inv;
    }
    if n >= 4 {
        out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * inv;
        out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) * inv;
    } else {
        out[0] = out[1];
        out[n - 1] = out[n - 2];
    }
    Ok(out)
}

/// Time derivative of a whole field: central differences for interior
/// slices, second-order one-sided at `t0` and `tf` (first-order when there
/// are only two slices).
pub fn time_derivative(field: &Field, dt: f64) -> Result<Field> {
    let nt = field.nt();
    let nx = field.nx();
    if nt < 2 {
        return Err(Error::dimension("time stencil", 2, nt));
    }
    let mut out = vec![0.0; nx * nt];
    let f = |n: usize, i: usize| field.get(n, i);
    for n in 0..nt {
        let row = &mut out[n * nx..(n + 1) * nx];
        for (i, r) in row.iter_mut().enumerate() {
            *r = if nt == 2 {
                (f(1, i) - f(0, i)) / dt
            } else if n == 0 {
                (-3.0 * f(0, i) + 4.0 * f(1, i) - f(2, i)) / (2.0 * dt)
            } else if n == nt - 1 {
                (3.0 * f(n, i) - 4.0 * f(n - 1, i) + f(n - 2, i)) / (2.0 * dt)
            } else {
                (f(n + 1, i) - f(n - 1, i)) / (2.0 * dt)
            };
        }
    }
    Ok(Field {
        nx,
        nt,
        values: out,
    })
}

/// Absolute floor value for a slice.
pub fn density_floor(slice: &[f64]) -> f64 {
    DENSITY_FLOOR * slice.iter().fold(0.0_f64, |m, &v| m.max(v))
}

/// Clamps the slice at the density floor, then rescales it to unit mass.
pub fn normalize_slice(slice: &[f64], grid: &SpaceTimeGrid) -> Result<Vec<f64>> {
    if slice.len() != grid.nx() {
        return Err(Error::dimension("slice", grid.nx(), slice.len()));
    }
    if slice.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateDensity(
            "slice contains non-finite values".into(),
        ));
    }
    if slice.iter().any(|&v| v < 0.0) {
        return Err(Error::DegenerateDensity(
            "slice contains negative values".into(),
        ));
    }
    let floor = density_floor(slice);
    if floor <= 0.0 {
        return Err(Error::DegenerateDensity(
            "slice has no positive values".into(),
        ));
    }
    let floored: Vec<f64> = slice.iter().map(|&v| v.max(floor)).collect();
    let mass = trapezoid(&floored, grid.dx());
    if !(mass > 0.0) {
        return Err(Error::DegenerateDensity(format!(
            "slice integrates to {mass}"
        )));
    }
    Ok(floored.into_iter().map(|v| v / mass).collect())
}

/// Writes a field as CSV with header `t,x,value`, time-outer.
pub fn write_field_csv<W: Write>(mut out: W, field: &Field, grid: &SpaceTimeGrid) -> Result<()> {
    writeln!(out, "t,x,value")?;
    for n in 0..grid.nt() {
        let t = grid.t(n);
        for (i, v) in field.slice(n).iter().enumerate() {
            writeln!(out, "{:?},{:?},{:?}", t, grid.x(i), v)?;
        }
    }
    Ok(())
}

/// Writes one complex slice as CSV with header `x,re,im`.
pub fn write_state_csv<W: Write>(
    mut out: W,
    state: &ComplexState,
    grid: &SpaceTimeGrid,
) -> Result<()> {
    writeln!(out, "x,re,im")?;
    for (i, c) in state.0.iter().enumerate() {
        writeln!(out, "{:?},{:?},{:?}", grid.x(i), c.re, c.im)?;
    }
    Ok(())
}

/// Long-format complex sequence: header `t,x,re,im`.
pub fn write_states_long_csv<W: Write>(
    mut out: W,
    states: &[ComplexState],
    grid: &SpaceTimeGrid,
) -> Result<()> {
    writeln!(out, "t,x,re,im")?;
    for (n, s) in states.iter().enumerate() {
        let t = grid.t(n);
        for (i, c) in s.0.iter().enumerate() {
            writeln!(out, "{:?},{:?},{:?},{:?}", t, grid.x(i), c.re, c.im)?;
        }
    }
    Ok(())
}
