//! Outcome statistics from minimal action costs.
//!
//! Each outcome is a target density at `tf`. Its cost is the action of the
//! boundary-value solution that carries the preparation onto that target,
//! and outcome probabilities follow `exp(−cost/ħ)`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::action::{ActionBreakdown, NORMALIZATION_TOLERANCE};
use crate::bvp::{solve_bridge, solve_bvp_primal_dual, BoundaryData, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::gridfields::{integrate_slice, normalize_slice, PhysParams, SpaceTimeGrid};
use crate::schrodinger::{madelung_compose, propagate_substeps};

/// How an action breakdown is turned into a cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// `kinetic + (ħ²/8m)·Fisher + ∫∫Vρ`, every term counted as a cost.
    #[default]
    Positive,
    /// The primal action with its own signs.
    Signed,
}

impl CostKind {
    pub fn name(self) -> &'static str {
        match self {
            CostKind::Positive => "positive",
            CostKind::Signed => "signed",
        }
    }

    pub fn cost(self, action: &ActionBreakdown) -> f64 {
        match self {
            CostKind::Positive => action.kinetic - action.potential - action.fisher,
            CostKind::Signed => action.primal_total,
        }
    }

    /// Line recorded in every report that uses this cost.
    pub fn note(self) -> &'static str {
        match self {
            CostKind::Positive => {
                "cost = kinetic + (hbar^2/8m) Fisher + integral V rho; the signed primal \
                 action enters the Fisher and potential terms with negative sign"
            }
            CostKind::Signed => {
                "cost = signed primal action (kinetic - integral V rho - (hbar^2/8m) Fisher); \
                 the default positive cost counts every term as a cost"
            }
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(CostKind::Positive),
            "signed" => Ok(CostKind::Signed),
            other => Err(Error::Usage(format!(
                "unknown cost kind `{other}` (expected `positive` or `signed`)"
            ))),
        }
    }
}

/// A measured outcome: a normalized density supported on `region`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeConstraint {
    pub label: String,
    #[serde(skip)]
    target: Vec<f64>,
    pub region: (f64, f64),
}

impl OutcomeConstraint {
    /// Mass allowed outside the region.
    pub const LEAK_TOLERANCE: f64 = 1e-6;

    pub fn new(
        label: impl Into<String>,
        target: Vec<f64>,
        region: (f64, f64),
        grid: &SpaceTimeGrid,
    ) -> Result<Self> {
        let (a, b) = region;
        if !(a < b) || a < grid.x_min() || b > grid.x_max() {
            return Err(Error::InvalidParams {
                field: "region",
                reason: format!(
                    "[{a}, {b}] is not an interval inside [{}, {}]",
                    grid.x_min(),
                    grid.x_max()
                ),
            });
        }
        let mass = integrate_slice(&target, grid)?;
        if target.iter().any(|v| !(*v >= 0.0)) || (mass - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::ContractViolation(format!(
                "outcome target must be a normalized density (mass {mass})"
            )));
        }
        let outside: Vec<f64> = grid
            .xs()
            .zip(&target)
            .map(|(x, r)| if x < a || x > b { *r } else { 0.0 })
            .collect();
        let leak = integrate_slice(&outside, grid)?;
        if leak > Self::LEAK_TOLERANCE {
            return Err(Error::ContractViolation(format!(
                "outcome target leaks mass {leak} outside [{a}, {b}]"
            )));
        }
        Ok(Self {
            label: label.into(),
            target,
            region,
        })
    }

    /// `profile` seen through a cos² window of half-width `half_width`
    /// centred on `center`, floored and normalized.
    pub fn window(
        label: impl Into<String>,
        profile: &[f64],
        center: f64,
        half_width: f64,
        grid: &SpaceTimeGrid,
    ) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidParams {
                field: "half_width",
                reason: format!("must be > 0, got {half_width}"),
            });
        }
        let a = (center - half_width).max(grid.x_min());
        let b = (center + half_width).min(grid.x_max());
        let windowed: Vec<f64> = grid
            .xs()
            .zip(profile)
            .map(|(x, p)| p * cos2_window(x, center, half_width))
            .collect();
        Self::new(label, normalize_slice(&windowed, grid)?, (a, b), grid)
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }
}

fn cos2_window(x: f64, center: f64, half_width: f64) -> f64 {
    let z = (x - center) / half_width;
    if z.abs() >= 1.0 {
        0.0
    } else {
        (0.5 * std::f64::consts::PI * z).cos().powi(2)
    }
}

/// One entry of an [`OutcomeDistribution`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub label: String,
    pub cost: f64,
    /// `exp(−β (cost − cost_min))`
    pub weight: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    pub outcomes: Vec<Outcome>,
    /// `Σ exp(−β cost)`; may under- or overflow, `log_partition` does not.
    pub partition: f64,
    pub log_partition: f64,
    pub beta: f64,
    pub warnings: Vec<String>,
}

impl OutcomeDistribution {
    pub fn probability(&self, label: &str) -> Option<f64> {
        self.outcomes
            .iter()
            .find(|o| o.label == label)
            .map(|o| o.probability)
    }
}

/// Boltzmann weights `exp(−cost/ħ)` normalized over the outcomes.
pub fn outcome_weights(costs: &[(String, f64)], params: &PhysParams) -> Result<OutcomeDistribution> {
    params.validate()?;
    if costs.is_empty() {
        return Err(Error::Usage("outcome_weights needs at least one outcome".into()));
    }
    let beta = 1.0 / params.hbar;
    let mut warnings = Vec::new();
    for (label, c) in costs {
        if !c.is_finite() {
            warnings.push(format!("outcome `{label}` has non-finite cost {c}; probability set to 0"));
        }
    }
    let c_min = costs
        .iter()
        .map(|(_, c)| *c)
        .filter(|c| c.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !c_min.is_finite() {
        return Err(Error::Domain("no outcome has a finite cost".into()));
    }
    let weights: Vec<f64> = costs
        .iter()
        .map(|(_, c)| {
            if c.is_finite() {
                (-beta * (c - c_min)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let sum: f64 = weights.iter().sum();
    let log_partition = -beta * c_min + sum.ln();
    Ok(OutcomeDistribution {
        outcomes: costs
            .iter()
            .zip(&weights)
            .map(|((label, cost), w)| Outcome {
                label: label.clone(),
                cost: *cost,
                weight: *w,
                probability: w / sum,
            })
            .collect(),
        partition: log_partition.exp(),
        log_partition,
        beta,
        warnings,
    })
}

/// Minimal cost of reaching one outcome.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomeCost {
    pub label: String,
    pub cost: f64,
    /// The cost evaluated on the returned history by grid quadrature. For
    /// the positive cost `cost` is the bridge dual value instead, which does
    /// not depend on resolving the approach to a compact target in time.
    pub history_cost: f64,
    pub cost_kind: CostKind,
    /// Set when the solve did not converge: the cost is then only the value
    /// the solver reached.
    pub upper_bound: bool,
    pub report: SolveReport,
}

/// Solves the boundary value problem from `rho0` to the outcome target and
/// prices the result. The positive cost is minimized directly by the bridge
/// solver; the signed action is evaluated on the real-time solution.
pub fn min_action_to_outcome(
    rho0: &[f64],
    outcome: &OutcomeConstraint,
    params: &PhysParams,
    grid: &SpaceTimeGrid,
    config: &SolverConfig,
    kind: CostKind,
) -> Result<OutcomeCost> {
    let boundary = BoundaryData::new(rho0, &outcome.target, grid)?;
    let (_, report) = match kind {
        CostKind::Positive => solve_bridge(&boundary, params, grid, config)?,
        CostKind::Signed => solve_bvp_primal_dual(&boundary, params, grid, config)?,
    };
    let history_cost = kind.cost(&report.action);
    Ok(OutcomeCost {
        label: outcome.label.clone(),
        cost: report.dual_cost.unwrap_or(history_cost),
        history_cost,
        cost_kind: kind,
        upper_bound: !report.converged,
        report,
    })
}

/// Preset of the node-suppression demonstration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeDemoConfig {
    /// Distance between the two source Gaussians.
    pub separation: f64,
    /// Density width of each source.
    pub sigma: f64,
    /// Half-width of the antinode and node windows.
    pub half_width: f64,
    /// Crank–Nicolson steps per time slice for the interference pattern.
    pub substeps: usize,
    pub cost: CostKind,
}

impl Default for NodeDemoConfig {
    fn default() -> Self {
        Self {
            separation: 4.0,
            sigma: 0.5,
            half_width: 0.75,
            substeps: 4,
            cost: CostKind::Positive,
        }
    }
}

impl NodeDemoConfig {
    /// `[−20, 20]` with 401 nodes, `T = 2` with 201 slices.
    pub fn default_grid() -> SpaceTimeGrid {
        SpaceTimeGrid::new(-20.0, 20.0, 401, 0.0, 2.0, 201).expect("preset grid is valid")
    }

    fn validate(&self) -> Result<()> {
        let bad = |field, reason: String| Err(Error::InvalidParams { field, reason });
        if !(self.separation >= 0.0) || !self.separation.is_finite() {
            return bad("separation", format!("must be finite and >= 0, got {}", self.separation));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad("sigma", format!("must be finite and > 0, got {}", self.sigma));
        }
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return bad("half_width", format!("must be finite and > 0, got {}", self.half_width));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeDemoReport {
    pub preset: NodeDemoConfig,
    pub cost_note: &'static str,
    /// Whether the final pattern has a local minimum right of the antinode.
    /// Without one the node window coincides with the antinode window.
    pub fringes: bool,
    pub antinode_x: f64,
    pub node_x: f64,
    pub antinode: OutcomeCost,
    pub node: OutcomeCost,
    /// Node window widened to the whole screen.
    pub wide: OutcomeCost,
    /// Over the antinode and node outcomes.
    pub distribution: OutcomeDistribution,
    pub cost_gap: f64,
    pub node_to_antinode: f64,
    /// `P(wide)/P(antinode)` from the costs.
    pub wide_to_antinode: f64,
    /// Mass of `|ψ(tf)|²` in the wide window over the antinode window.
    pub born_ratio: f64,
    pub born_relative_error: f64,
    #[serde(skip)]
    pub rho0: Vec<f64>,
    /// `|ψ(tf)|²` of the freely propagated source.
    #[serde(skip)]
    pub pattern: Vec<f64>,
    #[serde(skip)]
    pub targets: [Vec<f64>; 3],
}

/// Two Gaussian sources, an interference pattern at `tf`, and the costs of
/// forcing the final density into a window on its central antinode, on the
/// adjacent node, or anywhere on the screen.
pub fn node_suppression_demo(
    params: &PhysParams,
    grid: &SpaceTimeGrid,
    config: &SolverConfig,
    preset: &NodeDemoConfig,
) -> Result<NodeDemoReport> {
    preset.validate()?;
    config.validate()?;
    let a = 0.5 * preset.separation;
    let s2 = 4.0 * preset.sigma * preset.sigma;
    let amp: Vec<f64> = grid
        .xs()
        .map(|x| (-(x - a).powi(2) / s2).exp() + (-(x + a).powi(2) / s2).exp())
        .collect();
    let rho0 = normalize_slice(&amp.iter().map(|v| v * v).collect::<Vec<_>>(), grid)?;
    let psi0 = madelung_compose(&rho0, &vec![0.0; grid.nx()], params)?;
    let states = propagate_substeps(&psi0, params, grid, preset.substeps)?;
    let pattern = states.last().expect("grid has nt >= 2").density();

    let (i_anti, i_node) = antinode_and_node(&pattern);
    let (antinode_x, node_x) = (grid.x(i_anti), grid.x(i_node));
    let windows = [
        OutcomeConstraint::window("antinode", &pattern, antinode_x, preset.half_width, grid)?,
        OutcomeConstraint::window("node", &pattern, node_x, preset.half_width, grid)?,
        OutcomeConstraint::new(
            "wide",
            normalize_slice(&pattern, grid)?,
            (grid.x_min(), grid.x_max()),
            grid,
        )?,
    ];
    let mut solved: Vec<Result<OutcomeCost>> = std::thread::scope(|scope| {
        let handles: Vec<_> = windows
            .iter()
            .map(|w| {
                let rho0 = &rho0;
                scope.spawn(move || {
                    min_action_to_outcome(rho0, w, params, grid, config, preset.cost)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("outcome solve panicked"))
            .collect()
    });
    let wide = solved.pop().expect("three solves")?;
    let node = solved.pop().expect("three solves")?;
    let antinode = solved.pop().expect("three solves")?;

    let distribution = outcome_weights(
        &[
            (antinode.label.clone(), antinode.cost),
            (node.label.clone(), node.cost),
        ],
        params,
    )?;
    let beta = 1.0 / params.hbar;
    let window_mass = |c: f64| -> Result<f64> {
        let w: Vec<f64> = grid
            .xs()
            .zip(&pattern)
            .map(|(x, p)| p * cos2_window(x, c, preset.half_width))
            .collect();
        integrate_slice(&w, grid)
    };
    let born_ratio = integrate_slice(&pattern, grid)? / window_mass(antinode_x)?;
    let wide_to_antinode = (-beta * (wide.cost - antinode.cost)).exp();
    let [t0, t1, t2] = windows.map(|w| w.target);
    Ok(NodeDemoReport {
        preset: *preset,
        cost_note: preset.cost.note(),
        fringes: i_node != i_anti,
        antinode_x,
        node_x,
        cost_gap: node.cost - antinode.cost,
        node_to_antinode: (-beta * (node.cost - antinode.cost)).exp(),
        wide_to_antinode,
        born_ratio,
        born_relative_error: (wide_to_antinode - born_ratio).abs() / born_ratio,
        antinode,
        node,
        wide,
        distribution,
        rho0,
        pattern,
        targets: [t0, t1, t2],
    })
}

/// Global maximum of the pattern, and the first local minimum to its right
/// that is followed by another fringe of at least 1% of the maximum. Without
/// such a minimum the node coincides with the antinode.
fn antinode_and_node(pattern: &[f64]) -> (usize, usize) {
    let (anti, peak) = pattern
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        });
    let n = pattern.len();
    let mut i = anti + 1;
    while i + 1 < n {
        if pattern[i] < pattern[i - 1] && pattern[i] <= pattern[i + 1] {
            let next_max = pattern[i..].iter().cloned().fold(0.0, f64::max);
            if next_max > pattern[i] && next_max >= 1e-2 * peak {
                return (anti, i);
            }
            break;
        }
        i += 1;
    }
    (anti, anti)
}
