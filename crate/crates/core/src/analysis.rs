//! L¹ comparisons against the reference profiles, the (ε, t) regime map, and
//! least-squares rate fits.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{build_grid, Grid, ModelParams, PopulationState};
use crate::profiles::{gamma1, gamma2, steady_state};
use crate::simulator::{run, InitialCondition, Model, StepperConfig, Trajectory};
use crate::spectral::{expansion_prediction, solve_lambda, SpectralData, SpectralOptions};

/// ∫_I |a - b| with the grid's trapezoid weights.
pub fn l1_distance(a: &[f64], b: &[f64], grid: &Grid) -> Result<f64> {
    if a.len() != b.len() || a.len() != grid.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} and {} samples on a {}-node grid",
            a.len(),
            b.len(),
            grid.len()
        )));
    }
    Ok(a.iter().zip(b).zip(grid.weights()).map(|((x, y), w)| w * (x - y).abs()).sum())
}

/// L¹ distances from a trajectory to Γ₁(t), Γ₂ and λψ at each positive
/// snapshot time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorCurve {
    pub times: Vec<f64>,
    pub err_gamma1: Vec<f64>,
    pub err_gamma2: Vec<f64>,
    pub err_steady: Vec<f64>,
    pub mass: Vec<f64>,
}

impl ErrorCurve {
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }
}

/// The snapshot at t = 0 has no Γ₁ counterpart and is skipped.
pub fn error_curves(traj: &Trajectory, spec: &SpectralData, f0: &PopulationState) -> Result<ErrorCurve> {
    let grid = &traj.grid;
    if spec.psi.len() != grid.len() || f0.values.len() != grid.len() {
        return Err(Error::invalid("trajectory, spectral data and initial datum use different grids"));
    }
    let g2 = gamma2(&traj.params, grid)?.values;
    let steady = steady_state(spec).values;
    let mut curve = ErrorCurve {
        times: Vec::new(),
        err_gamma1: Vec::new(),
        err_gamma2: Vec::new(),
        err_steady: Vec::new(),
        mass: Vec::new(),
    };
    for snap in traj.snapshots.iter().filter(|s| s.t > 0.0) {
        if snap.values.len() != grid.len() {
            return Err(Error::invalid(format!("snapshot at t = {} is not on the trajectory grid", snap.t)));
        }
        let g1 = gamma1(f0, snap.t, grid)?.values;
        curve.times.push(snap.t);
        curve.err_gamma1.push(l1_distance(&snap.values, &g1, grid)?);
        curve.err_gamma2.push(l1_distance(&snap.values, &g2, grid)?);
        curve.err_steady.push(l1_distance(&snap.values, &steady, grid)?);
        curve.mass.push(snap.mass);
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Gaussian,
    Cauchy,
    Neither,
}

/// Relative error above which a profile is not considered a match.
pub const NEITHER_THRESHOLD: f64 = 0.5;

/// Winner and margin `|e1 - e2| / min(e1, e2)` for one cell; errors are
/// made relative to `norm = ‖f‖₁`.
pub fn classify(err_gamma1: f64, err_gamma2: f64, norm: f64) -> (Regime, f64) {
    let margin = (err_gamma1 - err_gamma2).abs() / err_gamma1.min(err_gamma2);
    if err_gamma1 > NEITHER_THRESHOLD * norm && err_gamma2 > NEITHER_THRESHOLD * norm {
        (Regime::Neither, margin)
    } else if err_gamma1 < err_gamma2 {
        (Regime::Gaussian, margin)
    } else {
        (Regime::Cauchy, margin)
    }
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: ModelParams,
    /// Grid size; chosen from the Cauchy scale when absent.
    pub n: Option<usize>,
    pub stepper: StepperConfig,
    pub init: InitialCondition,
}

/// Smallest odd node count (at least 1501) whose spacing resolves the Cauchy
/// scale γ(0)πε five times over.
pub fn auto_grid_size(params: &ModelParams) -> usize {
    const MIN: usize = 1501;
    const MAX: usize = 400_001;
    let scale = params.cauchy_scale();
    if !(scale > 0.0) {
        return 2001;
    }
    let n = (params.interval().len() / (0.2 * scale)).ceil() as usize + 1;
    let n = n.clamp(MIN, MAX);
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

impl Scenario {
    pub fn grid(&self) -> Result<Grid> {
        build_grid(self.params.interval(), self.n.unwrap_or_else(|| auto_grid_size(&self.params)))
    }

    pub fn model(&self) -> Result<Model> {
        Model::new(self.params.clone(), self.grid()?)
    }

    pub fn run(&self) -> Result<(Model, PopulationState, Trajectory)> {
        let model = self.model()?;
        let f0 = self.init.state(model.params(), model.grid())?;
        let traj = run(&model, &f0, &self.stepper)?;
        Ok((model, f0, traj))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeMap {
    pub eps_values: Vec<f64>,
    pub t_values: Vec<f64>,
    /// `winner[i][j]` for `eps_values[i]`, `t_values[j]`; `None` when the run failed.
    pub winner: Vec<Vec<Option<Regime>>>,
    pub margins: Vec<Vec<f64>>,
    /// Failure message per ε row.
    pub failures: Vec<Option<String>>,
}

/// One run per ε up to `max(t_list)`, each t classified by the smaller of
/// the Γ₁ and Γ₂ errors. Rows run in parallel.
pub fn regime_sweep(eps_list: &[f64], t_list: &[f64], base: &Scenario) -> Result<RegimeMap> {
    if eps_list.is_empty() || t_list.is_empty() {
        return Err(Error::invalid("regime sweep needs nonempty epsilon and time lists"));
    }
    if let Some(&bad) = t_list.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::invalid(format!("sweep times must be positive, got {bad}")));
    }
    let t_end = t_list.iter().copied().fold(0.0, f64::max);
    let mut snaps = t_list.to_vec();
    snaps.push(0.0);
    let stepper = StepperConfig { t_end, ..base.stepper.clone() }.with_snapshots(snaps);

    let rows: Vec<std::result::Result<(Vec<Regime>, Vec<f64>), String>> = eps_list
        .par_iter()
        .map(|&eps| {
            let row = || -> Result<(Vec<Regime>, Vec<f64>)> {
                let sc = Scenario {
                    params: base.params.with_epsilon(eps)?,
                    n: base.n,
                    stepper: stepper.clone(),
                    init: base.init.clone(),
                };
                let (model, f0, traj) = sc.run()?;
                let spec = model.discrete_spectrum()?;
                let curve = error_curves(&traj, &spec, &f0)?;
                let mut win = Vec::with_capacity(t_list.len());
                let mut margin = Vec::with_capacity(t_list.len());
                for &t in t_list {
                    let k = curve.index_of(t).expect("sweep time is a snapshot");
                    let norm = traj.snapshot_at(t).expect("sweep time is a snapshot").mass;
                    let (w, m) = classify(curve.err_gamma1[k], curve.err_gamma2[k], norm);
                    win.push(w);
                    margin.push(m);
                }
                log::info!("regime row eps = {eps} done");
                Ok((win, margin))
            };
            row().map_err(|e| e.to_string())
        })
        .collect();

    let mut map = RegimeMap {
        eps_values: eps_list.to_vec(),
        t_values: t_list.to_vec(),
        winner: Vec::new(),
        margins: Vec::new(),
        failures: Vec::new(),
    };
    for (row, &eps) in rows.into_iter().zip(eps_list) {
        match row {
            Ok((w, m)) => {
                map.winner.push(w.into_iter().map(Some).collect());
                map.margins.push(m);
                map.failures.push(None);
            }
            Err(msg) => {
                log::warn!("regime row eps = {eps} failed: {msg}");
                map.winner.push(vec![None; t_list.len()]);
                map.margins.push(vec![f64::NAN; t_list.len()]);
                map.failures.push(Some(msg));
            }
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    LinearFit { slope, intercept, r2 }
}

/// Slope and r² of log ys against log xs.
pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::invalid("rate fit needs at least 3 (x, y) pairs"));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("rate fit needs positive finite data"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    if lx.iter().all(|&x| x == lx[0]) {
        return Err(Error::invalid("rate fit needs at least two distinct x values"));
    }
    Ok(least_squares(&lx, &ly))
}

/// Fit `y ≈ A e^{-r t}` to the samples with `t` in `[t0, t1]`; returns the
/// fit of ln y against t, so the decay rate is `-slope`.
pub fn fit_exponential(series: &[(f64, f64)], t0: f64, t1: f64) -> Result<LinearFit> {
    let (ts, ly): (Vec<f64>, Vec<f64>) = series
        .iter()
        .filter(|(t, _)| *t >= t0 && *t <= t1)
        .map(|&(t, y)| (t, y))
        .unzip();
    if ts.len() < 3 {
        return Err(Error::invalid(format!("fewer than 3 samples in [{t0}, {t1}]")));
    }
    if ly.iter().any(|&y| !(y > 0.0 && y.is_finite())) {
        return Err(Error::invalid("exponential fit needs positive finite data"));
    }
    let ly: Vec<f64> = ly.iter().map(|y| y.ln()).collect();
    Ok(least_squares(&ts, &ly))
}

#[derive(Debug, Clone, Serialize)]
pub struct RatePoint {
    pub epsilon: f64,
    pub lambda: f64,
    pub prediction: f64,
    /// |λ_ε - prediction|
    pub residual: f64,
    /// Dropped from the fit as indistinguishable from roundoff.
    pub excluded: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateStudy {
    pub slope: f64,
    pub r2: f64,
    pub points: Vec<RatePoint>,
}

/// Convergence of λ_ε to its second-order expansion across `eps_list`.
/// The two smallest ε are left out of the fit when their residual is below
/// 10⁻¹² λ_ε.
pub fn rate_study(base: &ModelParams, eps_list: &[f64]) -> Result<RateStudy> {
    let grid = build_grid(base.interval(), 3)?;
    let opts = SpectralOptions::default();
    let mut points = eps_list
        .par_iter()
        .map(|&eps| {
            let p = base.with_epsilon(eps)?;
            // only λ is needed here; a coarse grid keeps ψ cheap
            let spec = solve_lambda(&p, &grid, &opts)?;
            let prediction = expansion_prediction(&p);
            Ok(RatePoint {
                epsilon: eps,
                lambda: spec.lambda,
                prediction,
                residual: (spec.lambda - prediction).abs(),
                excluded: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i].epsilon.partial_cmp(&points[j].epsilon).unwrap());
    for &i in order.iter().take(2) {
        if points[i].residual < 1e-12 * points[i].lambda {
            points[i].excluded = true;
        }
    }
    let kept: Vec<&RatePoint> = points.iter().filter(|p| !p.excluded).collect();
    let fit = fit_rate(
        &kept.iter().map(|p| p.epsilon).collect::<Vec<_>>(),
        &kept.iter().map(|p| p.residual).collect::<Vec<_>>(),
    )?;
    Ok(RateStudy { slope: fit.slope, r2: fit.r2, points })
}
