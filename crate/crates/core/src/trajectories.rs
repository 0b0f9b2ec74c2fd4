//! Flow lines of a history and the Gaussian wave-packet machinery: the
//! envelope equation `σ̈ = ħ²/4m²σ³` and the closed-form spreading history
//! built from it.

use std::io::Write;

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gridfields::{
    normalize_slice, spatial_gradient, Field, History, PhysParams, Potential, SpaceTimeGrid,
};

/// Width, width rate and centre of a Gaussian packet at `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianParams {
    pub sigma0: f64,
    pub sigma_dot0: f64,
    pub center: f64,
}

impl GaussianParams {
    pub fn new(sigma0: f64, sigma_dot0: f64) -> Result<Self> {
        Self::centered(sigma0, sigma_dot0, 0.0)
    }

    pub fn centered(sigma0: f64, sigma_dot0: f64, center: f64) -> Result<Self> {
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::InvalidParams {
                field: "sigma0",
                reason: format!("must be finite and > 0, got {sigma0}"),
            });
        }
        if !sigma_dot0.is_finite() || !center.is_finite() {
            return Err(Error::InvalidParams {
                field: "sigma_dot0",
                reason: "sigma_dot0 and center must be finite".into(),
            });
        }
        Ok(Self {
            sigma0,
            sigma_dot0,
            center,
        })
    }
}

/// Sampled positions of one flow line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.times.last()?, *self.positions.last()?))
    }
}

/// Envelope width and rate at each requested time.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub sigma: Vec<f64>,
    pub sigma_dot: Vec<f64>,
    /// Homogeneous phase `γ(t)` with `γ̇ = −ħ²/4mσ²` and `γ(t0) = 0`.
    pub gamma: Vec<f64>,
}

/// Largest RK4 step used by [`gaussian_envelope`].
const ENVELOPE_MAX_STEP: f64 = 1e-3;

/// Integrates the envelope equation from `(σ0, σ̇0)` at `times[0]` and samples
/// it at each entry of `times` (which must be non-decreasing).
pub fn gaussian_envelope(
    g: &GaussianParams,
    params: &PhysParams,
    times: &[f64],
) -> Result<Envelope> {
    params.validate()?;
    let Some(&t_start) = times.first() else {
        return Ok(Envelope {
            sigma: vec![],
            sigma_dot: vec![],
            gamma: vec![],
        });
    };
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams {
            field: "times",
            reason: "sample times must be non-decreasing".into(),
        });
    }
    let (hbar, m) = (params.hbar, params.mass);
    let k = hbar * hbar / (4.0 * m * m);
    let c_gamma = -hbar * hbar / (4.0 * m);
    // State: (σ, σ̇, γ).
    let rhs = |y: [f64; 3]| [y[1], k / (y[0] * y[0] * y[0]), c_gamma / (y[0] * y[0])];
    let mut y = [g.sigma0, g.sigma_dot0, 0.0];
    let mut t = t_start;
    let mut out = Envelope {
        sigma: Vec::with_capacity(times.len()),
        sigma_dot: Vec::with_capacity(times.len()),
        gamma: Vec::with_capacity(times.len()),
    };
    for &target in times {
        let span = target - t;
        let steps = (span / ENVELOPE_MAX_STEP).ceil().max(0.0) as usize;
        if steps > 0 {
            let h = span / steps as f64;
            for _ in 0..steps {
                let k1 = rhs(y);
                let k2 = rhs(axpy(y, 0.5 * h, k1));
                let k3 = rhs(axpy(y, 0.5 * h, k2));
                let k4 = rhs(axpy(y, h, k3));
                for d in 0..3 {
                    y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
                }
                t += h;
                if !(y[0] > 0.0) || !y.iter().all(|v| v.is_finite()) {
                    return Err(Error::StepSize { t, sigma: y[0] });
                }
            }
        }
        t = target;
        out.sigma.push(y[0]);
        out.sigma_dot.push(y[1]);
        out.gamma.push(y[2]);
    }
    Ok(out)
}

fn axpy(y: [f64; 3], h: f64, k: [f64; 3]) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

/// `σ̇²/2 + ħ²/8m²σ²`, conserved along the envelope equation.
pub fn envelope_energy(sigma: f64, sigma_dot: f64, params: &PhysParams) -> f64 {
    let m = params.mass;
    0.5 * sigma_dot * sigma_dot + params.hbar * params.hbar / (8.0 * m * m * sigma * sigma)
}

/// Closed-form free spreading Gaussian history: `ρ` from the envelope,
/// `j = ρ(σ̇/σ)(x−c)`, `S = (mσ̇/2σ)(x−c)² + γ(t)` gauge-fixed at the
/// leftmost node of `t0`.
pub fn gaussian_history(
    g: &GaussianParams,
    params: &PhysParams,
    grid: &SpaceTimeGrid,
) -> Result<History> {
    if params.potential != Potential::Free {
        return Err(Error::InvalidParams {
            field: "potential",
            reason: "the Gaussian history is defined for the free particle only".into(),
        });
    }
    let times: Vec<f64> = grid.ts().collect();
    let env = gaussian_envelope(g, params, &times)?;
    let sigma_max = env.sigma.iter().cloned().fold(0.0, f64::max);
    let reach = (g.center - grid.x_min()).min(grid.x_max() - g.center);
    let leak = if reach <= 0.0 {
        1.0
    } else {
        erfc(reach / (std::f64::consts::SQRT_2 * sigma_max))
    };
    if leak >= 1e-8 {
        return Err(Error::Domain(format!(
            "mass outside [{}, {}] reaches {leak:e} at sigma = {sigma_max}",
            grid.x_min(),
            grid.x_max()
        )));
    }

    let m = params.mass;
    let mut rho = Vec::with_capacity(grid.nt());
    let mut current = Vec::with_capacity(grid.len());
    let mut phase = Vec::with_capacity(grid.len());
    for n in 0..grid.nt() {
        let (s, sd, gm) = (env.sigma[n], env.sigma_dot[n], env.gamma[n]);
        let raw: Vec<f64> = grid
            .xs()
            .map(|x| {
                let z = (x - g.center) / s;
                (-0.5 * z * z).exp()
            })
            .collect();
        let slice = normalize_slice(&raw, grid)?;
        for (i, x) in grid.xs().enumerate() {
            let d = x - g.center;
            current.push(slice[i] * sd / s * d);
            phase.push(m * sd / (2.0 * s) * d * d + gm);
        }
        rho.push(slice);
    }
    let d0 = grid.x_min() - g.center;
    let origin = m * env.sigma_dot[0] / (2.0 * env.sigma[0]) * d0 * d0 + env.gamma[0];
    for s in phase.iter_mut() {
        *s -= origin;
    }
    History::new(
        grid.clone(),
        Field::from_slices(grid, &rho)?,
        Field::from_values(grid, current)?,
        Some(Field::from_values(grid, phase)?),
    )
}

/// `v = ∇S/m` on every node.
pub fn velocity_field(history: &History, params: &PhysParams) -> Result<Field> {
    let s = history.phase()?;
    let grid = &history.grid;
    let mut v = Field::zeros(grid);
    for n in 0..grid.nt() {
        let ds = spatial_gradient(s.slice(n), grid.dx())?;
        for (o, d) in v.slice_mut(n).iter_mut().zip(ds) {
            *o = d / params.mass;
        }
    }
    Ok(v)
}

/// Bilinear interpolation of a field at `(x, t)`; `None` outside the grid.
fn bilinear(field: &Field, grid: &SpaceTimeGrid, x: f64, t: f64) -> Option<f64> {
    if !(x >= grid.x_min() && x <= grid.x_max() && t >= grid.t0() && t <= grid.tf()) {
        return None;
    }
    let (fx, ix) = cell(x, grid.x_min(), grid.dx(), grid.nx());
    let (ft, it) = cell(t, grid.t0(), grid.dt(), grid.nt());
    let f00 = field.get(it, ix);
    let f01 = field.get(it, ix + 1);
    let f10 = field.get(it + 1, ix);
    let f11 = field.get(it + 1, ix + 1);
    let lo = f00 + fx * (f01 - f00);
    let hi = f10 + fx * (f11 - f10);
    Some(lo + ft * (hi - lo))
}

fn cell(v: f64, lo: f64, h: f64, n: usize) -> (f64, usize) {
    let s = (v - lo) / h;
    let i = (s.floor() as usize).min(n - 2);
    (s - i as f64, i)
}

/// Integrates `dx/dt = v(x,t)` from `x0` at `t0` with classical RK4, one
/// step per grid interval, sampling at every grid time.
pub fn integrate_trajectory(history: &History, params: &PhysParams, x0: f64) -> Result<Trajectory> {
    let v = velocity_field(history, params)?;
    integrate_in_field(&v, &history.grid, x0)
}

fn integrate_in_field(v: &Field, grid: &SpaceTimeGrid, x0: f64) -> Result<Trajectory> {
    let mut times = vec![grid.t0()];
    let mut positions = vec![x0];
    if bilinear(v, grid, x0, grid.t0()).is_none() {
        return Err(Error::OutOfDomain {
            t: grid.t0(),
            partial: Box::new(Trajectory { times, positions }),
        });
    }
    let mut x = x0;
    for n in 0..grid.nt() - 1 {
        let t = grid.t(n);
        let t1 = grid.t(n + 1);
        let h = t1 - t;
        let th = t + 0.5 * h;
        let step = || -> Option<f64> {
            let k1 = bilinear(v, grid, x, t)?;
            let k2 = bilinear(v, grid, x + 0.5 * h * k1, th)?;
            let k3 = bilinear(v, grid, x + 0.5 * h * k2, th)?;
            let k4 = bilinear(v, grid, x + h * k3, t1)?;
            let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            bilinear(v, grid, next, t1).map(|_| next)
        };
        match step() {
            Some(next) => {
                x = next;
                times.push(t1);
                positions.push(x);
            }
            None => {
                return Err(Error::OutOfDomain {
                    t,
                    partial: Box::new(Trajectory { times, positions }),
                })
            }
        }
    }
    Ok(Trajectory { times, positions })
}

/// Integrates one trajectory per starting point, in parallel. Results keep
/// the order of `starts`.
pub fn integrate_bundle(
    history: &History,
    params: &PhysParams,
    starts: &[f64],
) -> Result<Vec<Trajectory>> {
    let v = velocity_field(history, params)?;
    let grid = &history.grid;
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(starts.len().max(1));
    let chunk = starts.len().div_ceil(workers).max(1);
    let results: Vec<Vec<Result<Trajectory>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = starts
            .chunks(chunk)
            .map(|part| {
                let v = &v;
                scope.spawn(move || {
                    part.iter()
                        .map(|&x0| integrate_in_field(v, grid, x0))
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trajectory worker panicked"))
            .collect()
    });
    results.into_iter().flatten().collect()
}

/// Mass of a slice on `[x_min, x]`, exact for the piecewise-linear
/// interpolant of the samples.
pub fn cumulative_mass(slice: &[f64], grid: &SpaceTimeGrid, x: f64) -> f64 {
    let x = x.clamp(grid.x_min(), grid.x_max());
    let dx = grid.dx();
    let (frac, i) = cell(x, grid.x_min(), dx, grid.nx());
    let mut total = 0.0;
    for k in 0..i {
        total += 0.5 * (slice[k] + slice[k + 1]) * dx;
    }
    let s = frac * dx;
    total + slice[i] * s + (slice[i + 1] - slice[i]) * s * s / (2.0 * dx)
}

/// Positions splitting the mass of `slice` into `n + 1` equal parts:
/// `x_k` with `∫_{x_min}^{x_k} ρ = k/(n+1)` of the total, by bisection.
pub fn mass_quantiles(slice: &[f64], grid: &SpaceTimeGrid, n: usize) -> Result<Vec<f64>> {
    if slice.len() != grid.nx() {
        return Err(Error::dimension("density slice", grid.nx(), slice.len()));
    }
    let total = cumulative_mass(slice, grid, grid.x_max());
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::DegenerateDensity(format!(
            "slice mass must be finite and > 0, got {total}"
        )));
    }
    Ok((1..=n)
        .map(|k| {
            let goal = total * k as f64 / (n + 1) as f64;
            let (mut lo, mut hi) = (grid.x_min(), grid.x_max());
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if cumulative_mass(slice, grid, mid) < goal {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect())
}

/// Mass between two trajectories at each of their common sample times.
pub fn tube_mass(history: &History, lower: &Trajectory, upper: &Trajectory) -> Vec<f64> {
    let n = lower.positions.len().min(upper.positions.len());
    (0..n)
        .map(|k| {
            let slice = history.rho.slice(k);
            cumulative_mass(slice, &history.grid, upper.positions[k])
                - cumulative_mass(slice, &history.grid, lower.positions[k])
        })
        .collect()
}

/// CSV with header `trajectory_id,t,x`.
pub fn write_trajectories_csv<W: Write>(mut out: W, bundle: &[Trajectory]) -> Result<()> {
    writeln!(out, "trajectory_id,t,x")?;
    for (id, tr) in bundle.iter().enumerate() {
        for (t, x) in tr.times.iter().zip(&tr.positions) {
            writeln!(out, "{id},{t:?},{x:?}")?;
        }
    }
    Ok(())
}
