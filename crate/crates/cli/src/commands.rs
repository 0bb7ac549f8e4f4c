//! Subcommand pipelines. Each returns a JSON summary for stdout and writes
//! its data files into the output directory.

use std::path::PathBuf;
use std::time::Instant;

use mutsel::{
    error_curves, expansion_prediction, gamma1, gamma2, rate_study, regime_sweep, solve_lambda, steady_state,
    Regime, SpectralOptions, StepperConfig,
};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::{fig1_script, fig2_script, fmt_f64, regimes_script, OutputDir};
use crate::CliError;

pub struct Context {
    pub out: PathBuf,
    pub emit_gnuplot: bool,
}

/// Snapshot times of the profile figure.
pub const FIG1_TIMES: [f64; 8] = [0.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1.5e5, 1.75e5];

fn config_value(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg).expect("config is serializable")
}

pub fn simulate(cfg: &RunConfig, ctx: &Context) -> Result<Value, CliError> {
    let start = Instant::now();
    let (model, _, traj) = cfg.scenario()?.run()?;
    let grid = model.grid();
    let mut out = OutputDir::create(&ctx.out)?;
    let rows = traj.snapshots.iter().flat_map(|s| {
        grid.nodes().iter().zip(&s.values).map(move |(x, f)| vec![fmt_f64(s.t), fmt_f64(*x), fmt_f64(*f)])
    });
    out.csv("trajectory.csv", &["t", "x", "f"], rows)?;
    out.csv("mass.csv", &["t", "mass"], traj.mass_series.iter().map(|(t, m)| vec![fmt_f64(*t), fmt_f64(*m)]))?;
    let last = traj.last();
    let summary = json!({
        "t_end": last.t,
        "final_mass": last.mass,
        "snapshots": traj.snapshots.len(),
        "grid_n": grid.len(),
        "resolution_ok": model.check_resolution(),
    });
    out.metadata("simulate", Some(&config_value(cfg)), json!({"summary": summary, "wall_seconds": start.elapsed().as_secs_f64()}))?;
    Ok(summary)
}

pub fn spectrum(cfg: &RunConfig, ctx: &Context) -> Result<Value, CliError> {
    let scenario = cfg.scenario()?;
    let model = scenario.model()?;
    let params = model.params();
    let spec = solve_lambda(params, model.grid(), &SpectralOptions::default())?;
    let discrete = model.discrete_spectrum()?;
    let summary = json!({
        "epsilon": spec.epsilon,
        "lambda": spec.lambda,
        "alpha": spec.alpha,
        "nu": spec.nu,
        "residual": spec.residual,
        "prediction": expansion_prediction(params),
        "gamma0": params.gamma0(),
        "cauchy_scale": params.cauchy_scale(),
        "grid_n": model.grid().len(),
        "grid_lambda": discrete.lambda,
    });
    let mut out = OutputDir::create(&ctx.out)?;
    let g2 = gamma2(params, model.grid())?.values;
    let steady = steady_state(&spec).values;
    let rows = (0..model.grid().len()).map(|i| {
        vec![
            fmt_f64(model.grid().nodes()[i]),
            fmt_f64(spec.psi[i]),
            fmt_f64(spec.psi_adjoint[i]),
            fmt_f64(steady[i]),
            fmt_f64(g2[i]),
        ]
    });
    out.csv("spectrum.csv", &["x", "psi", "psi_adjoint", "steady", "gamma2"], rows)?;
    out.json("spectrum.json", &summary)?;
    out.metadata("spectrum", Some(&config_value(cfg)), json!({}))?;
    Ok(summary)
}

pub fn fig1(cfg: &RunConfig, ctx: &Context) -> Result<Value, CliError> {
    let start = Instant::now();
    let mut scenario = cfg.scenario()?;
    let t_end = FIG1_TIMES[FIG1_TIMES.len() - 1];
    scenario.stepper = StepperConfig { t_end, ..scenario.stepper }.with_snapshots(FIG1_TIMES.to_vec());
    let (model, f0, traj) = scenario.run()?;
    let grid = model.grid();
    let g2 = gamma2(model.params(), grid)?.values;
    let mut out = OutputDir::create(&ctx.out)?;
    let mut files = Vec::new();
    for &t in &FIG1_TIMES {
        let snap = traj.snapshot_at(t).expect("figure time is a snapshot");
        let g1 = if t > 0.0 { Some(gamma1(&f0, t, grid)?.values) } else { None };
        let name = format!("fig1_t{t}.csv");
        let rows = (0..grid.len()).map(|i| {
            vec![
                fmt_f64(grid.nodes()[i]),
                fmt_f64(snap.values[i]),
                g1.as_ref().map(|g| fmt_f64(g[i])).unwrap_or_default(),
                fmt_f64(g2[i]),
            ]
        });
        out.csv(&name, &["x", "f", "gamma1", "gamma2"], rows)?;
        files.push((t, name));
    }
    if ctx.emit_gnuplot {
        out.text("fig1.gp", &fig1_script(&files))?;
    }
    let summary = json!({"files": files.iter().map(|f| &f.1).collect::<Vec<_>>(), "grid_n": grid.len()});
    out.metadata("fig1", Some(&config_value(cfg)), json!({"wall_seconds": start.elapsed().as_secs_f64()}))?;
    Ok(summary)
}

pub fn fig2(cfg: &RunConfig, ctx: &Context) -> Result<Value, CliError> {
    let start = Instant::now();
    let (model, f0, traj) = cfg.scenario()?.run()?;
    let spec = model.discrete_spectrum()?;
    let curve = error_curves(&traj, &spec, &f0)?;
    let mut out = OutputDir::create(&ctx.out)?;
    let rows = (0..curve.times.len()).map(|k| {
        vec![
            fmt_f64(curve.times[k]),
            fmt_f64(curve.err_gamma1[k]),
            fmt_f64(curve.err_gamma2[k]),
            fmt_f64(curve.err_steady[k]),
            fmt_f64(curve.mass[k]),
        ]
    });
    out.csv("fig2.csv", &["t", "err_gamma1", "err_gamma2", "err_steady", "mass"], rows)?;
    if ctx.emit_gnuplot {
        out.text("fig2.gp", &fig2_script("fig2.csv"))?;
    }
    let best = (0..curve.times.len())
        .min_by(|&a, &b| curve.err_gamma1[a].partial_cmp(&curve.err_gamma1[b]).unwrap())
        .map(|k| curve.times[k]);
    let summary = json!({
        "snapshots": curve.times.len(),
        "gamma1_best_at": best,
        "final_err_steady": curve.err_steady.last(),
        "lambda": spec.lambda,
    });
    out.metadata("fig2", Some(&config_value(cfg)), json!({"summary": summary, "wall_seconds": start.elapsed().as_secs_f64()}))?;
    Ok(summary)
}

fn regime_name(r: Option<Regime>) -> &'static str {
    match r {
        Some(Regime::Gaussian) => "gaussian",
        Some(Regime::Cauchy) => "cauchy",
        Some(Regime::Neither) => "neither",
        None => "failed",
    }
}

pub fn regimes(cfg: &RunConfig, ctx: &Context) -> Result<Value, CliError> {
    let start = Instant::now();
    let scenario = cfg.scenario()?;
    let map = regime_sweep(&cfg.sweep.eps, &cfg.sweep.times, &scenario)?;
    let mut out = OutputDir::create(&ctx.out)?;
    let mut rows = Vec::new();
    for (i, &eps) in map.eps_values.iter().enumerate() {
        for (j, &t) in map.t_values.iter().enumerate() {
            rows.push(vec![fmt_f64(eps), fmt_f64(t), regime_name(map.winner[i][j]).to_string(), fmt_f64(map.margins[i][j])]);
        }
    }
    out.csv("regimes.csv", &["eps", "t", "winner", "margin"], rows)?;
    if ctx.emit_gnuplot {
        out.text("regimes.gp", &regimes_script("regimes.csv"))?;
    }
    let failures: Vec<Value> = map
        .failures
        .iter()
        .zip(&map.eps_values)
        .filter_map(|(f, e)| f.as_ref().map(|m| json!({"eps": e, "message": m})))
        .collect();
    let summary = json!({"cells": map.eps_values.len() * map.t_values.len(), "failed_rows": failures});
    out.metadata("regimes", Some(&config_value(cfg)), json!({"summary": summary, "wall_seconds": start.elapsed().as_secs_f64()}))?;
    Ok(summary)
}

/// Without a config the rate study uses the uniform kernel on (-1, 1).
pub fn rates(cfg: Option<&RunConfig>, ctx: &Context) -> Result<Value, CliError> {
    let (params, eps) = match cfg {
        Some(c) => (c.params()?, c.rates.eps.clone()),
        None => {
            let mut c = RunConfig::reference_setup();
            c.domain = [-1.0, 1.0];
            c.kernel = crate::config::KernelConfig::uniform();
            (c.params()?, c.rates.eps.clone())
        }
    };
    let study = rate_study(&params, &eps)?;
    let summary = serde_json::to_value(&study).expect("study is serializable");
    let mut out = OutputDir::create(&ctx.out)?;
    out.json("rates.json", &summary)?;
    out.metadata("rates", cfg.map(config_value).as_ref(), json!({}))?;
    Ok(summary)
}
