//! Subcommand bodies. Each validates its inputs, runs, and writes its
//! files into the output directory.

use std::thread;

use madelung_bvp::action::{self, continuity_residual, guidance_residual, qhj_residual};
use madelung_bvp::bvp::{
    action_of_history, solve_bridge, solve_bvp_primal_dual, solve_bvp_shooting, BoundaryData,
    SolveReport, SolverConfig,
};
use madelung_bvp::caliber::{
    min_action_to_outcome, node_suppression_demo, outcome_weights, CostKind, NodeDemoConfig,
    OutcomeConstraint, OutcomeCost,
};
use madelung_bvp::gridfields::{
    integrate_slice, normalize_slice, write_field_csv, write_states_long_csv, Field, History,
    PhysParams, Potential, SpaceTimeGrid,
};
use madelung_bvp::schrodinger::{madelung_compose, propagate_substeps};
use madelung_bvp::trajectories::{
    envelope_energy, gaussian_envelope, gaussian_history, integrate_bundle, mass_quantiles,
    tube_mass, velocity_field, write_trajectories_csv, GaussianParams, Trajectory,
};
use madelung_bvp::verify;
use serde_json::{json, Value};

use crate::config::{Params, Source};
use crate::output::OutputDir;
use crate::CliError;

/// What a finished subcommand hands back for the manifest and exit status.
pub struct Finished {
    pub grid: Option<SpaceTimeGrid>,
    pub seeds: Value,
    pub summary: Vec<String>,
    /// Set when outputs were written but the run did not certify.
    pub failure: Option<CliError>,
}

impl Finished {
    fn ok(grid: SpaceTimeGrid, seeds: Value, summary: Vec<String>) -> Self {
        Self {
            grid: Some(grid),
            seeds,
            summary,
            failure: None,
        }
    }
}

fn phys(p: &Params) -> Result<PhysParams, CliError> {
    let potential = match p.word("potential") {
        "harmonic" => Potential::Harmonic {
            omega: p.f64("omega"),
        },
        _ => Potential::Free,
    };
    Ok(PhysParams::new(p.f64("mass"), p.f64("hbar"), potential)?)
}

/// The grid from the grid keys; keys left at their defaults take the
/// values of `preset` when one is given.
fn grid(p: &Params, preset: Option<&SpaceTimeGrid>) -> Result<SpaceTimeGrid, CliError> {
    let pick = |key: &str, preset_value: f64| match preset {
        Some(_) if p.source(key) == Source::Default => preset_value,
        _ => p.f64(key),
    };
    let picku = |key: &str, preset_value: usize| match preset {
        Some(_) if p.source(key) == Source::Default => preset_value,
        _ => p.usize(key),
    };
    let d = preset.cloned();
    let g = d.as_ref();
    Ok(SpaceTimeGrid::new(
        pick("x_min", g.map_or(0.0, |g| g.x_min())),
        pick("x_max", g.map_or(0.0, |g| g.x_max())),
        picku("nx", g.map_or(0, |g| g.nx())),
        pick("t0", g.map_or(0.0, |g| g.t0())),
        pick("tf", g.map_or(0.0, |g| g.tf())),
        picku("nt", g.map_or(0, |g| g.nt())),
    )?)
}

fn solver_config(p: &Params) -> Result<SolverConfig, CliError> {
    let c = SolverConfig {
        max_outer_iterations: p.usize("max_outer_iterations"),
        primal_step: p.f64("primal_step"),
        dual_step: p.f64("dual_step"),
        continuity_tolerance: p.f64("continuity_tolerance"),
        stationarity_tolerance: p.f64("stationarity_tolerance"),
        terminal_tolerance: p.f64("terminal_tolerance"),
        check_every: p.usize("check_every"),
        seed: p.u64("seed"),
        init_perturbation: p.f64("init_perturbation"),
        chebyshev_degree: p.usize("chebyshev_degree"),
        phase_offset: p.f64("phase_offset"),
        max_evaluations: p.usize("max_evaluations"),
    };
    c.validate()?;
    Ok(c)
}

fn gaussian(p: &Params) -> Result<GaussianParams, CliError> {
    Ok(GaussianParams::centered(
        p.f64("sigma0"),
        p.f64("sigma_dot0"),
        p.f64("center"),
    )?)
}

fn positive(p: &Params, key: &'static str) -> Result<f64, CliError> {
    let v = p.f64(key);
    if !(v.is_finite() && v > 0.0) {
        return Err(CliError::usage(format!("`{key}` must be finite and > 0, got {v}")));
    }
    Ok(v)
}

fn substeps(p: &Params) -> Result<usize, CliError> {
    match p.usize("substeps") {
        0 => Err(CliError::usage("`substeps` must be at least 1")),
        n => Ok(n),
    }
}

fn gaussian_slice(grid: &SpaceTimeGrid, center: f64, sigma: f64) -> Result<Vec<f64>, CliError> {
    let raw: Vec<f64> = grid
        .xs()
        .map(|x| (-(x - center).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    Ok(normalize_slice(&raw, grid)?)
}

/// `S = (m σ̇ / 2σ)(x − c)²`, the phase of a Gaussian with width rate `σ̇`.
fn gaussian_phase(grid: &SpaceTimeGrid, g: &GaussianParams, mass: f64) -> Vec<f64> {
    let k = mass * g.sigma_dot0 / (2.0 * g.sigma0);
    grid.xs().map(|x| k * (x - g.center).powi(2)).collect()
}

fn solve(
    method: &str,
    boundary: &BoundaryData,
    params: &PhysParams,
    grid: &SpaceTimeGrid,
    config: &SolverConfig,
) -> madelung_bvp::Result<(History, SolveReport)> {
    match method {
        "shooting" => solve_bvp_shooting(boundary, params, grid, config),
        "bridge" => solve_bridge(boundary, params, grid, config),
        _ => solve_bvp_primal_dual(boundary, params, grid, config),
    }
}

fn not_converged(report: &SolveReport) -> Option<CliError> {
    (!report.converged).then(|| {
        CliError::numerical(format!(
            "{} solve did not converge after {} iterations (continuity {:.3e}, guidance {:.3e}, qhj {:.3e}, mismatch {:.3e})",
            report.method,
            report.iterations,
            report.continuity_rms,
            report.guidance_rms,
            report.qhj_rms,
            report.terminal_mismatch
        ))
    })
}

fn solver_seeds(config: &SolverConfig) -> Value {
    json!({ "seed": config.seed, "init_perturbation": config.init_perturbation })
}

fn write_history(out: &mut OutputDir, h: &History) -> Result<(), CliError> {
    out.write_csv("density.csv", |w| write_field_csv(w, &h.rho, &h.grid))?;
    out.write_csv("current.csv", |w| write_field_csv(w, &h.current, &h.grid))?;
    if let Some(s) = &h.phase {
        out.write_csv("phase.csv", |w| write_field_csv(w, s, &h.grid))?;
    }
    Ok(())
}

/// Slice-wise `∫|ρ_CN − ρ|` between a history and the oracle propagation
/// of its own Madelung-composed initial state.
fn oracle_l1(h: &History, params: &PhysParams, substeps: usize) -> Result<Vec<f64>, CliError> {
    let psi0 = madelung_compose(h.rho.slice(0), h.phase()?.slice(0), params)?;
    let states = propagate_substeps(&psi0, params, &h.grid, substeps)?;
    states
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let diff: Vec<f64> = s
                .density()
                .iter()
                .zip(h.rho.slice(n))
                .map(|(a, b)| (a - b).abs())
                .collect();
            Ok(integrate_slice(&diff, &h.grid)?)
        })
        .collect()
}

fn max(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

pub fn propagate(p: &Params, out: &mut OutputDir) -> Result<Finished, CliError> {
    let params = phys(p)?;
    let grid = grid(p, None)?;
    let g = gaussian(p)?;
    let substeps = substeps(p)?;
    let rho0 = gaussian_slice(&grid, g.center, g.sigma0)?;
    let psi0 = madelung_compose(&rho0, &gaussian_phase(&grid, &g, params.mass), &params)?;
    let states = propagate_substeps(&psi0, &params, &grid, substeps)?;
    let densities: Vec<Vec<f64>> = states.iter().map(|s| s.density()).collect();
    let rho = Field::from_slices(&grid, &densities)?;
    let norms = states
        .iter()
        .map(|s| s.norm_sqr(&grid))
        .collect::<madelung_bvp::Result<Vec<f64>>>()?;
    let drift = max(norms.iter().map(|n| (n - norms[0]).abs()));
    let last = densities.last().expect("nt >= 2");
    let mean = integrate_slice(
        &grid.xs().zip(last).map(|(x, r)| x * r).collect::<Vec<_>>(),
        &grid,
    )? / norms[norms.len() - 1];
    let var = integrate_slice(
        &grid
            .xs()
            .zip(last)
            .map(|(x, r)| (x - mean).powi(2) * r)
            .collect::<Vec<_>>(),
        &grid,
    )? / norms[norms.len() - 1];
    out.write_csv("states.csv", |w| write_states_long_csv(w, &states, &grid))?;
    out.write_csv("density.csv", |w| write_field_csv(w, &rho, &grid))?;
    out.write_json(
        "report.json",
        &json!({
            "substeps": substeps,
            "initial_norm": norms[0],
            "norm_drift_max": drift,
            "final_mean_x": mean,
            "final_width": var.sqrt(),
        }),
    )?;
    Ok(Finished::ok(
        grid,
        json!({}),
        vec![
            format!("norm drift {drift:.3e}"),
            format!("final width {:.6}", var.sqrt()),
        ],
    ))
}

pub fn solve_bvp(p: &Params, out: &mut OutputDir) -> Result<Finished, CliError> {
    let params = phys(p)?;
    let grid = grid(p, None)?;
    let config = solver_config(p)?;
    let g = gaussian(p)?;
    let sigma_f = positive(p, "sigma_f")?;
    let substeps = substeps(p)?;
    let restart_amp = p.f64("restart_perturbation");
    if !(restart_amp.is_finite() && restart_amp >= 0.0) {
        return Err(CliError::usage(format!(
            "`restart_perturbation` must be finite and >= 0, got {restart_amp}"
        )));
    }
    let method = p.word("method");
    let rho0 = gaussian_slice(&grid, g.center, g.sigma0)?;
    let rhof = gaussian_slice(&grid, g.center, sigma_f)?;
    let boundary = BoundaryData::new(&rho0, &rhof, &grid)?;
    let restart_config = SolverConfig {
        init_perturbation: restart_amp,
        seed: config.seed.wrapping_add(1),
        ..config.clone()
    };
    let (first, second) = thread::scope(|s| {
        let a = s.spawn(|| solve(method, &boundary, &params, &grid, &config));
        let b = s.spawn(|| solve(method, &boundary, &params, &grid, &restart_config));
        (a.join(), b.join())
    });
    let (history, report) = first.expect("solver thread panicked")?;
    let (_, restart) = second.expect("solver thread panicked")?;
    let l1 = oracle_l1(&history, &params, substeps)?;
    let a1 = report.action.primal_total;
    let a2 = restart.action.primal_total;
    let restart_diff = (a1 - a2).abs() / a1.abs().max(a2.abs()).max(f64::MIN_POSITIVE);
    let tagged = action_of_history(&history, &params)?;

    write_history(out, &history)?;
    out.write_json(
        "report.json",
        &json!({
            "boundary": boundary.fingerprint(),
            "solve": report,
            "restart": {
                "seed": restart_config.seed,
                "init_perturbation": restart_amp,
                "converged": restart.converged,
                "iterations": restart.iterations,
                "primal_total": a2,
                "relative_action_difference": restart_diff,
            },
            "oracle": {
                "substeps": substeps,
                "max_l1": max(l1.iter().copied()),
                "l1_per_slice": l1,
            },
        }),
    )?;
    let mut act = tagged.action.to_json(&grid);
    act["boundary"] = json!(tagged.boundary);
    out.write_json("action.json", &act)?;

    let summary = vec![
        format!(
            "{} converged={} iterations={} mismatch={:.3e}",
            report.method, report.converged, report.iterations, report.terminal_mismatch
        ),
        format!(
            "residuals: continuity {:.3e}, guidance {:.3e}, qhj {:.3e}",
            report.continuity_rms, report.guidance_rms, report.qhj_rms
        ),
        format!("primal action {a1:.9} (restart {a2:.9}, relative difference {restart_diff:.2e})"),
        format!("oracle max L1 {:.3e}", max(l1.iter().copied())),
    ];
    Ok(Finished {
        grid: Some(grid),
        seeds: json!({ "solve": solver_seeds(&config), "restart": solver_seeds(&restart_config) }),
        summary,
        failure: not_converged(&report),
    })
}

fn tube_drift(h: &History, bundle: &[Trajectory]) -> Vec<f64> {
    match (bundle.first(), bundle.last()) {
        (Some(lo), Some(hi)) if bundle.len() >= 2 => tube_mass(h, lo, hi),
        _ => Vec::new(),
    }
}

fn write_tube(out: &mut OutputDir, h: &History, tube: &[f64]) -> Result<(), CliError> {
    let mut csv = String::from("t,mass\n");
    for (n, m) in tube.iter().enumerate() {
        csv.push_str(&format!("{:?},{:?}\n", h.grid.t(n), m));
    }
    out.write("tube_mass.csv", csv.as_bytes())
}

fn n_trajectories(p: &Params) -> Result<usize, CliError> {
    match p.usize("n_trajectories") {
        0 => Err(CliError::usage("`n_trajectories` must be at least 1")),
        n => Ok(n),
    }
}

pub fn gaussian_demo(p: &Params, out: &mut OutputDir) -> Result<Finished, CliError> {
    let params = phys(p)?;
    let grid = grid(p, None)?;
    let g = gaussian(p)?;
    let n = n_trajectories(p)?;
    let history = gaussian_history(&g, &params, &grid)?;
    let times: Vec<f64> = grid.ts().collect();
    let env = gaussian_envelope(&g, &params, &times)?;
    let continuity = continuity_residual(&history)?;
    let guidance = guidance_residual(&history, &params)?;
    let qhj = qhj_residual(&history, &params)?;
    let velocity = velocity_field(&history, &params)?;
    let q_slices = (0..grid.nt())
        .map(|k| Ok(action::quantum_potential(history.rho.slice(k), &params, &grid)?.values))
        .collect::<Result<Vec<_>, CliError>>()?;
    let q = Field::from_slices(&grid, &q_slices)?;
    let starts = mass_quantiles(history.rho.slice(0), &grid, n)?;
    let bundle = integrate_bundle(&history, &params, &starts)?;
    let mut scaling = 0.0_f64;
    for tr in &bundle {
        let x0 = tr.positions[0] - g.center;
        if x0.abs() <= 1e-9 * g.sigma0 {
            continue;
        }
        for (k, x) in tr.positions.iter().enumerate() {
            let expected = env.sigma[k] / env.sigma[0];
            scaling = scaling.max(((x - g.center) / x0 - expected).abs());
        }
    }
    let tube = tube_drift(&history, &bundle);
    let drift = max(tube.iter().map(|m| (m - tube[0]).abs()));
    let act = action_of_history(&history, &params)?;
    let e0 = envelope_energy(env.sigma[0], env.sigma_dot[0], &params);
    let energy_drift = max(
        env.sigma
            .iter()
            .zip(&env.sigma_dot)
            .map(|(s, sd)| (envelope_energy(*s, *sd, &params) - e0).abs()),
    );

    let mut csv = String::from("t,sigma,sigma_dot,gamma,energy\n");
    for (k, t) in times.iter().enumerate() {
        csv.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?}\n",
            t,
            env.sigma[k],
            env.sigma_dot[k],
            env.gamma[k],
            envelope_energy(env.sigma[k], env.sigma_dot[k], &params)
        ));
    }
    out.write("envelope.csv", csv.as_bytes())?;
    write_history(out, &history)?;
    out.write_csv("velocity.csv", |w| write_field_csv(w, &velocity, &grid))?;
    out.write_csv("quantum_potential.csv", |w| write_field_csv(w, &q, &grid))?;
    out.write_csv("trajectories.csv", |w| write_trajectories_csv(w, &bundle))?;
    write_tube(out, &history, &tube)?;
    out.write_json(
        "residuals.json",
        &json!({
            "continuity_rms": continuity.rms,
            "guidance_rms": guidance.rms,
            "qhj_rms": qhj.rms,
            "qhj_masked_fraction": qhj.masked_fraction,
        }),
    )?;
    let mut a = act.action.to_json(&grid);
    a["boundary"] = json!(act.boundary);
    out.write_json("action.json", &a)?;
    out.write_json(
        "report.json",
        &json!({
            "sigma_final": env.sigma[grid.nt() - 1],
            "envelope_energy_drift": energy_drift,
            "trajectory_starts": starts,
            "trajectory_scaling_max_error": scaling,
            "tube_mass_drift": drift,
        }),
    )?;
    Ok(Finished::ok(
        grid,
        json!({}),
        vec![
            format!(
                "residuals: continuity {:.3e}, guidance {:.3e}, qhj {:.3e}",
                continuity.rms, guidance.rms, qhj.rms
            ),
            format!("sigma(tf) {:.9}", env.sigma[env.sigma.len() - 1]),
            format!("trajectory scaling error {scaling:.3e}, tube mass drift {drift:.3e}"),
        ],
    ))
}

pub fn trajectories(p: &Params, out: &mut OutputDir) -> Result<Finished, CliError> {
    let params = phys(p)?;
    let grid = grid(p, None)?;
    let config = solver_config(p)?;
    let g = gaussian(p)?;
    let sigma_f = positive(p, "sigma_f")?;
    let n = n_trajectories(p)?;
    let rho0 = gaussian_slice(&grid, g.center, g.sigma0)?;
    let rhof = gaussian_slice(&grid, g.center, sigma_f)?;
    let boundary = BoundaryData::new(&rho0, &rhof, &grid)?;
    let (history, report) = solve(p.word("method"), &boundary, &params, &grid, &config)?;
    let starts = mass_quantiles(history.rho.slice(0), &grid, n)?;
    let bundle = integrate_bundle(&history, &params, &starts)?;
    let tube = tube_drift(&history, &bundle);
    let drift = max(tube.iter().map(|m| (m - tube[0]).abs()));
    let finals: Vec<f64> = bundle.iter().filter_map(|t| t.last()).map(|l| l.1).collect();

    out.write_csv("trajectories.csv", |w| write_trajectories_csv(w, &bundle))?;
    write_tube(out, &history, &tube)?;
    out.write_json(
        "report.json",
        &json!({
            "boundary": boundary.fingerprint(),
            "solve": report,
            "trajectory_starts": starts,
            "trajectory_ends": finals,
            "tube_mass_drift": drift,
        }),
    )?;
    Ok(Finished {
        grid: Some(grid),
        seeds: json!({ "solve": solver_seeds(&config) }),
        summary: vec![
            format!(
                "{} converged={} iterations={}",
                report.method, report.converged, report.iterations
            ),
            format!("{} trajectories, tube mass drift {drift:.3e}", bundle.len()),
        ],
        failure: not_converged(&report),
    })
}

/// Final density of the freely propagated initial Gaussian.
fn propagated_pattern(
    p: &Params,
    params: &PhysParams,
    grid: &SpaceTimeGrid,
    g: &GaussianParams,
    rho0: &[f64],
) -> Result<Vec<f64>, CliError> {
    let psi0 = madelung_compose(rho0, &gaussian_phase(grid, g, params.mass), params)?;
    let states = propagate_substeps(&psi0, params, grid, substeps(p)?)?;
    Ok(normalize_slice(
        &states.last().expect("nt >= 2").density(),
        grid,
    )?)
}

pub fn caliber(p: &Params, out: &mut OutputDir) -> Result<Finished, CliError> {
    let params = phys(p)?;
    let grid = grid(p, None)?;
    let config = solver_config(p)?;
    let g = gaussian(p)?;
    let kind: CostKind = p.word("cost").parse()?;
    let half_width = positive(p, "half_width")?;
    let centers = p.list("outcome_centers");
    let rho0 = gaussian_slice(&grid, g.center, g.sigma0)?;
    let pattern = propagated_pattern(p, &params, &grid, &g, &rho0)?;
    let outcomes = centers
        .iter()
        .map(|&c| OutcomeConstraint::window(format!("x={c:?}"), &pattern, c, half_width, &grid))
        .collect::<madelung_bvp::Result<Vec<_>>>()?;
    let costs: Vec<OutcomeCost> = thread::scope(|s| {
        let handles: Vec<_> = outcomes
            .iter()
            .map(|o| {
                let (rho0, params, grid, config) = (&rho0, &params, &grid, &config);
                s.spawn(move || min_action_to_outcome(rho0, o, params, grid, config, kind))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect::<madelung_bvp::Result<Vec<_>>>()
    })?;
    let pairs: Vec<(String, f64)> = costs.iter().map(|c| (c.label.clone(), c.cost)).collect();
    let distribution = outcome_weights(&pairs, &params)?;
    let born_mass = outcomes
        .iter()
        .map(|o| {
            let w: Vec<f64> = grid
                .xs()
                .zip(&pattern)
                .map(|(x, r)| if x >= o.region.0 && x <= o.region.1 { *r } else { 0.0 })
                .collect();
            Ok(integrate_slice(&w, &grid)?)
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let born_total: f64 = born_mass.iter().sum();

    let mut csv = String::from("x,pattern");
    for o in &outcomes {
        csv.push(',');
        csv.push_str(&o.label);
    }
    csv.push('\n');
    for (i, x) in grid.xs().enumerate() {
        csv.push_str(&format!("{x:?},{:?}", pattern[i]));
        for o in &outcomes {
            csv.push_str(&format!(",{:?}", o.target()[i]));
        }
        csv.push('\n');
    }
    out.write("windows.csv", csv.as_bytes())?;
    out.write_json(
        "distribution.json",
        &json!({
            "cost_kind": kind,
            "cost_note": kind.note(),
            "distribution": distribution,
            "costs": costs,
            "born_window_mass": born_mass,
            "born_probability": born_mass.iter().map(|m| m / born_total).collect::<Vec<_>>(),
        }),
    )?;
    let mut summary: Vec<String> = distribution
        .outcomes
        .iter()
        .map(|o| format!("{}: cost {:.6}, P = {:.6e}", o.label, o.cost, o.probability))
        .collect();
    summary.extend(distribution.warnings.iter().cloned());
    Ok(Finished::ok(grid, json!({ "solve": solver_seeds(&config) }), summary))
}

pub fn node_demo(p: &Params, out: &mut OutputDir) -> Result<Finished, CliError> {
    let params = phys(p)?;
    let defaults = NodeDemoConfig::default();
    let grid = grid(p, Some(&NodeDemoConfig::default_grid()))?;
    let config = solver_config(p)?;
    let pick = |key: &str, d: f64| {
        if p.source(key) == Source::Default {
            d
        } else {
            p.f64(key)
        }
    };
    let preset = NodeDemoConfig {
        separation: p.f64("separation"),
        sigma: p.f64("slit_sigma"),
        half_width: pick("half_width", defaults.half_width),
        substeps: if p.source("substeps") == Source::Default {
            defaults.substeps
        } else {
            p.usize("substeps")
        },
        cost: p.word("cost").parse()?,
    };
    let report = node_suppression_demo(&params, &grid, &config, &preset)?;

    let mut csv = String::from("x,rho0,pattern,antinode,node,wide\n");
    for (i, x) in grid.xs().enumerate() {
        csv.push_str(&format!(
            "{x:?},{:?},{:?},{:?},{:?},{:?}\n",
            report.rho0[i],
            report.pattern[i],
            report.targets[0][i],
            report.targets[1][i],
            report.targets[2][i]
        ));
    }
    out.write("pattern.csv", csv.as_bytes())?;
    out.write_json("report.json", &report)?;
    Ok(Finished::ok(
        grid,
        json!({ "solve": solver_seeds(&config) }),
        vec![
            format!(
                "costs: antinode {:.6}, node {:.6}, wide {:.6} ({})",
                report.antinode.cost, report.node.cost, report.wide.cost, preset.cost
            ),
            format!(
                "P(node)/P(antinode) {:.6e}; wide/antinode {:.6} vs Born {:.6} (relative error {:.3})",
                report.node_to_antinode,
                report.wide_to_antinode,
                report.born_ratio,
                report.born_relative_error
            ),
        ],
    ))
}

pub fn verify(_p: &Params, out: &mut OutputDir) -> Result<Finished, CliError> {
    let report = verify::run_suite()?;
    let mut bytes = report.to_json().into_bytes();
    bytes.push(b'\n');
    out.write("verify.json", &bytes)?;
    let failed: Vec<String> = report.failures().map(|c| c.name.to_string()).collect();
    let summary = report
        .checks
        .iter()
        .map(|c| {
            format!(
                "{} {} {:.3e} (tolerance {:.0e})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance
            )
        })
        .collect();
    Ok(Finished {
        grid: Some(verify::worked_grid()),
        seeds: json!({ "verify": report.seed }),
        summary,
        failure: (!failed.is_empty())
            .then(|| CliError::verification(format!("failed checks: {}", failed.join(", ")))),
    })
}
