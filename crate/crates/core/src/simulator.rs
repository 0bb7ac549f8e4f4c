//! Time integration of the nonlinear model, of the shifted linear semigroup
//! `T̃(t) = e^{t (A - λ)}`, and of the factorization `f = h(t) T̃(t) f0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{clamp_nonnegative, eval_kernel, Grid, ModelParams, PopulationState};
use crate::profiles::gamma2_shifted;
use crate::spectral::{solve_lambda_on_grid, SpectralData, SpectralOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Classical four-stage Runge-Kutta.
    Rk4,
    /// Diagonal reaction integrated exactly, nonlocal terms frozen over the step.
    ExponentialEuler,
}

/// Change of scheme and step size once `t` reaches `at`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseSwitch {
    pub at: f64,
    pub scheme: Scheme,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepperConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    /// Times at which the state is stored; steps are shortened to land on them.
    pub snapshot_times: Vec<f64>,
    pub switch: Option<PhaseSwitch>,
    /// Record the mass every `mass_stride` steps.
    pub mass_stride: usize,
}

/// Snapshot times used when none are given: t = 0 plus 60 log-spaced points
/// from 0.1 to `t_end`.
pub fn default_snapshot_times(t_end: f64) -> Vec<f64> {
    let mut times = vec![0.0];
    if t_end > 0.1 {
        let (lo, hi) = (0.1f64.log10(), t_end.log10());
        times.extend((0..60).map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / 59.0)));
        *times.last_mut().unwrap() = t_end;
    } else {
        times.push(t_end);
    }
    times
}

impl StepperConfig {
    pub fn new(scheme: Scheme, dt: f64, t_end: f64) -> Self {
        StepperConfig {
            scheme,
            dt,
            t_end,
            snapshot_times: default_snapshot_times(t_end),
            switch: None,
            mass_stride: 1,
        }
    }

    /// RK4 with dt = 0.05 up to t = 10³, exponential Euler with dt = 0.5 after.
    pub fn long_horizon(t_end: f64) -> Self {
        let mut c = StepperConfig::new(Scheme::Rk4, 0.05, t_end);
        if t_end > 1e3 {
            c.switch = Some(PhaseSwitch { at: 1e3, scheme: Scheme::ExponentialEuler, dt: 0.5 });
        }
        c
    }

    pub fn with_snapshots(mut self, mut times: Vec<f64>) -> Self {
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        self.snapshot_times = times;
        self
    }

    fn validate(&self, model: &Model) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::invalid(format!("t_end = {} must be at least dt = {}", self.t_end, self.dt)));
        }
        if self.mass_stride == 0 {
            return Err(Error::invalid("mass_stride must be at least 1"));
        }
        if let Some(&bad) = self.snapshot_times.iter().find(|&&t| !(0.0..=self.t_end).contains(&t)) {
            return Err(Error::invalid(format!("snapshot time {bad} is outside [0, {}]", self.t_end)));
        }
        let limit = model.stable_dt();
        let check = |scheme: Scheme, dt: f64| {
            if scheme == Scheme::Rk4 && dt > limit {
                Err(Error::invalid(format!("rk4 step {dt} exceeds the stability limit {limit}")))
            } else {
                Ok(())
            }
        };
        check(self.scheme, self.dt)?;
        if let Some(sw) = &self.switch {
            if !(sw.dt > 0.0) {
                return Err(Error::invalid("switch dt must be positive"));
            }
            check(sw.scheme, sw.dt)?;
        }
        Ok(())
    }

    fn phase_at(&self, t: f64) -> (Scheme, f64) {
        match &self.switch {
            Some(sw) if t >= sw.at => (sw.scheme, sw.dt),
            _ => (self.scheme, self.dt),
        }
    }
}

/// Initial data recipes.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialCondition {
    /// Γ₂(ε, x - shift): a mutation-selection equilibrium whose optimum sat at `shift`.
    CauchyShifted { shift: f64 },
    Constant { level: f64 },
    /// Piecewise-linear interpolation of `(x, value)` samples.
    Table { points: Vec<(f64, f64)> },
}

impl InitialCondition {
    pub fn state(&self, params: &ModelParams, grid: &Grid) -> Result<PopulationState> {
        let values = match self {
            InitialCondition::CauchyShifted { shift } => gamma2_shifted(params, grid, *shift)?.values,
            InitialCondition::Constant { level } => {
                if !(*level >= 0.0) {
                    return Err(Error::invalid(format!("constant level must be nonnegative, got {level}")));
                }
                vec![*level; grid.len()]
            }
            InitialCondition::Table { points } => {
                if points.len() < 2 || points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(Error::invalid("initial table needs >= 2 points with increasing x"));
                }
                grid.sample(|x| {
                    let k = points.partition_point(|p| p.0 <= x);
                    if k == 0 {
                        points[0].1
                    } else if k == points.len() {
                        points[k - 1].1
                    } else {
                        let (x0, y0) = points[k - 1];
                        let (x1, y1) = points[k];
                        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
                    }
                })
            }
        };
        PopulationState::new(0.0, values, grid)
    }
}

/// Grid-bound view of the model: sampled kernel and reaction diagonal.
#[derive(Debug, Clone)]
pub struct Model {
    params: ModelParams,
    grid: Grid,
    gamma: Vec<f64>,
    /// 1 - ε - x² at each node.
    diag: Vec<f64>,
}

impl Model {
    pub fn new(params: ModelParams, grid: Grid) -> Result<Self> {
        if params.interval() != grid.interval() {
            return Err(Error::invalid("grid and model use different intervals"));
        }
        let gamma = eval_kernel(params.kernel(), &grid)?;
        let eps = params.epsilon();
        let diag = grid.nodes().iter().map(|x| 1.0 - eps - x * x).collect();
        let model = Model { params, grid, gamma, diag };
        model.check_resolution();
        Ok(model)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Kernel samples as used by the steppers (normalized on the grid).
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Largest RK4 step admitted by the stability guard, 2.5 / max|1 - ε - x²|.
    pub fn stable_dt(&self) -> f64 {
        let stiff = self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        2.5 / stiff
    }

    /// Warn when the grid does not resolve the Cauchy scale γ(0)πε.
    pub fn check_resolution(&self) -> bool {
        let scale = self.params.cauchy_scale();
        let ok = scale == 0.0 || self.grid.spacing() <= 0.25 * scale;
        if !ok {
            log::warn!(
                "grid spacing {} does not resolve the Cauchy scale {} (need spacing <= scale/4)",
                self.grid.spacing(),
                scale
            );
        }
        ok
    }

    /// Eigenpair of the discretized linear operator on this grid.
    pub fn discrete_spectrum(&self) -> Result<SpectralData> {
        solve_lambda_on_grid(&self.params, &self.grid, &SpectralOptions::default())
    }

    /// Writes `(1 - ε - x² - shift) f + ε γ source` into `out`, where
    /// `source = ∫f` and `shift = ∫f` for the nonlinear model, `shift = λ`
    /// for the shifted linear operator. Returns `∫f`.
    #[inline]
    fn apply(&self, f: &[f64], out: &mut [f64], shift: Shift) -> f64 {
        let mass = self.grid.integrate_unchecked(f);
        let lin = match shift {
            Shift::Mass => mass,
            Shift::Constant(l) => l,
        };
        let src = self.params.epsilon() * mass;
        for i in 0..f.len() {
            out[i] = (self.diag[i] - lin) * f[i] + src * self.gamma[i];
        }
        mass
    }
}

#[derive(Debug, Clone, Copy)]
enum Shift {
    Mass,
    Constant(f64),
}

/// Right-hand side of the nonlinear equation at `state`.
pub fn rhs(model: &Model, state: &PopulationState) -> Result<Vec<f64>> {
    if state.values.len() != model.grid.len() {
        return Err(Error::invalid("state does not live on the model grid"));
    }
    let mut out = vec![0.0; state.values.len()];
    model.apply(&state.values, &mut out, Shift::Mass);
    Ok(out)
}

struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }

    /// Advance `f` in place by `dt`.
    fn advance(&mut self, model: &Model, f: &mut [f64], scheme: Scheme, dt: f64, shift: Shift) {
        let n = f.len();
        match scheme {
            Scheme::Rk4 => {
                model.apply(f, &mut self.k1, shift);
                for i in 0..n {
                    self.tmp[i] = f[i] + 0.5 * dt * self.k1[i];
                }
                model.apply(&self.tmp, &mut self.k2, shift);
                for i in 0..n {
                    self.tmp[i] = f[i] + 0.5 * dt * self.k2[i];
                }
                model.apply(&self.tmp, &mut self.k3, shift);
                for i in 0..n {
                    self.tmp[i] = f[i] + dt * self.k3[i];
                }
                model.apply(&self.tmp, &mut self.k4, shift);
                for i in 0..n {
                    f[i] += dt / 6.0 * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
                }
            }
            Scheme::ExponentialEuler => {
                let mass = model.grid.integrate_unchecked(f);
                let lin = match shift {
                    Shift::Mass => mass,
                    Shift::Constant(l) => l,
                };
                let src = model.params.epsilon() * mass;
                for i in 0..n {
                    let a = model.diag[i] - lin;
                    let em1 = (a * dt).exp_m1();
                    let phi = if a.abs() < 1e-12 { dt } else { em1 / a };
                    f[i] = f[i] * (1.0 + em1) + src * model.gamma[i] * phi;
                }
            }
        }
    }
}

/// One step of the nonlinear model.
pub fn step(model: &Model, state: &PopulationState, scheme: Scheme, dt: f64) -> Result<PopulationState> {
    if state.values.len() != model.grid.len() {
        return Err(Error::invalid("state does not live on the model grid"));
    }
    let mut ws = Workspace::new(state.values.len());
    let mut values = state.values.clone();
    ws.advance(model, &mut values, scheme, dt, Shift::Mass);
    let t = state.t + dt;
    clamp_nonnegative(&mut values, t)?;
    let mass = model.grid.integrate_unchecked(&values);
    Ok(PopulationState { t, values, mass })
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub grid: Grid,
    pub config: StepperConfig,
    pub snapshots: Vec<PopulationState>,
    /// `(t, ∫f)` pairs.
    pub mass_series: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn snapshot_at(&self, t: f64) -> Option<&PopulationState> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    pub fn last(&self) -> &PopulationState {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }
}

/// Drives a stepping loop that lands exactly on snapshot and switch times.
struct Clock<'a> {
    config: &'a StepperConfig,
    stops: Vec<f64>,
    next_stop: usize,
    pub t: f64,
}

impl<'a> Clock<'a> {
    fn new(config: &'a StepperConfig) -> Self {
        let mut stops: Vec<f64> = config.snapshot_times.iter().copied().filter(|&t| t > 0.0).collect();
        if let Some(sw) = &config.switch {
            if sw.at > 0.0 && sw.at < config.t_end {
                stops.push(sw.at);
            }
        }
        stops.push(config.t_end);
        stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
        stops.dedup();
        Clock { config, stops, next_stop: 0, t: 0.0 }
    }

    /// Scheme and step for the next step, or `None` once `t_end` is reached.
    fn next(&mut self) -> Option<(Scheme, f64)> {
        if self.next_stop >= self.stops.len() {
            return None;
        }
        let (scheme, dt) = self.config.phase_at(self.t);
        let target = self.stops[self.next_stop];
        let remaining = target - self.t;
        if remaining <= dt * (1.0 + 1e-9) {
            Some((scheme, remaining))
        } else {
            Some((scheme, dt))
        }
    }

    /// Commit a step of length `h`; returns true when a stop was reached.
    fn advance(&mut self, h: f64) -> bool {
        let target = self.stops[self.next_stop];
        if (target - self.t - h).abs() <= 1e-12 * target.max(1.0) || self.t + h >= target {
            self.t = target;
            self.next_stop += 1;
            true
        } else {
            self.t += h;
            false
        }
    }

    fn is_snapshot(&self, t: f64) -> bool {
        self.config.snapshot_times.iter().any(|&s| s == t) || t == self.config.t_end
    }
}

/// Integrate the nonlinear model from `f0` (taken at t = 0).
pub fn run(model: &Model, f0: &PopulationState, config: &StepperConfig) -> Result<Trajectory> {
    config.validate(model)?;
    if f0.values.len() != model.grid.len() {
        return Err(Error::invalid("initial state does not live on the model grid"));
    }
    let mut values = f0.values.clone();
    clamp_nonnegative(&mut values, 0.0)?;
    let mut mass = model.grid.integrate_unchecked(&values);
    let mut ws = Workspace::new(values.len());
    let mut clock = Clock::new(config);
    let mut snapshots = Vec::new();
    if config.snapshot_times.first() == Some(&0.0) {
        snapshots.push(PopulationState { t: 0.0, values: values.clone(), mass });
    }
    let mut mass_series = vec![(0.0, mass)];
    let mut steps = 0usize;
    while let Some((scheme, h)) = clock.next() {
        ws.advance(model, &mut values, scheme, h, Shift::Mass);
        let stopped = clock.advance(h);
        let t = clock.t;
        clamp_nonnegative(&mut values, t)?;
        mass = model.grid.integrate_unchecked(&values);
        steps += 1;
        if steps % config.mass_stride == 0 || stopped {
            mass_series.push((t, mass));
        }
        if stopped && clock.is_snapshot(t) {
            log::debug!("snapshot t = {t}, mass = {mass}");
            snapshots.push(PopulationState { t, values: values.clone(), mass });
        }
    }
    Ok(Trajectory {
        params: model.params.clone(),
        grid: model.grid.clone(),
        config: config.clone(),
        snapshots,
        mass_series,
    })
}

/// Output of [`linear_run`].
#[derive(Debug, Clone)]
pub struct LinearRun {
    /// Eigenpair of the discretized operator; λ shifts the generator.
    pub spec: SpectralData,
    /// Projection coefficient ⟨ψ*, f0⟩.
    pub c_f0: f64,
    /// `(t, ‖T̃(t) f0 - c ψ‖₁)`.
    pub v_norm_series: Vec<(f64, f64)>,
    /// `(t, φ(t))` with `φ = ∫ v`, so that `∫ T̃(t) f0 = c + φ(t)`.
    pub phi_series: Vec<(f64, f64)>,
    /// `dφ/dt` at the same times, used for Hermite interpolation of φ.
    pub dphi_series: Vec<f64>,
    /// `(t, T̃(t) f0)` at the snapshot times.
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

/// Integrate `∂u/∂t = (A - λ) u` from `f0`.
///
/// The flow is split as `u = c ψ + v` with `(c, ψ)` from the grid operator's
/// eigenpair; `v` is evolved on its own and re-projected onto the
/// complement of ψ after every step, so its exponential decay stays
/// measurable far below round-off of `c ψ`.
pub fn linear_run(model: &Model, f0: &PopulationState, config: &StepperConfig) -> Result<LinearRun> {
    config.validate(model)?;
    if f0.values.len() != model.grid.len() {
        return Err(Error::invalid("initial state does not live on the model grid"));
    }
    let spec = model.discrete_spectrum()?;
    let grid = &model.grid;
    let pairing = |v: &[f64]| -> f64 { (0..v.len()).map(|i| grid.weights()[i] * spec.psi_adjoint[i] * v[i]).sum() };
    let c_f0 = pairing(&f0.values);
    let mut v: Vec<f64> = f0.values.iter().zip(&spec.psi).map(|(f, p)| f - c_f0 * p).collect();
    let shift = Shift::Constant(spec.lambda);
    let gamma_mass: f64 = grid.integrate_unchecked(&model.gamma);
    let eps = model.params.epsilon();
    let dphi = |v: &[f64], phi: f64| -> f64 {
        let diag: f64 = (0..v.len()).map(|i| grid.weights()[i] * (model.diag[i] - spec.lambda) * v[i]).sum();
        diag + eps * gamma_mass * phi
    };
    let l1 = |v: &[f64]| -> f64 { (0..v.len()).map(|i| grid.weights()[i] * v[i].abs()).sum() };

    let mut ws = Workspace::new(v.len());
    let mut clock = Clock::new(config);
    let phi0 = grid.integrate_unchecked(&v);
    let mut v_norm_series = vec![(0.0, l1(&v))];
    let mut phi_series = vec![(0.0, phi0)];
    let mut dphi_series = vec![dphi(&v, phi0)];
    let mut snapshots = Vec::new();
    let compose = |v: &[f64]| -> Vec<f64> { v.iter().zip(&spec.psi).map(|(v, p)| c_f0 * p + v).collect() };
    if config.snapshot_times.first() == Some(&0.0) {
        snapshots.push((0.0, compose(&v)));
    }
    let mut steps = 0usize;
    while let Some((scheme, h)) = clock.next() {
        ws.advance(model, &mut v, scheme, h, shift);
        let drift = pairing(&v);
        for (vi, p) in v.iter_mut().zip(&spec.psi) {
            *vi -= drift * p;
        }
        let stopped = clock.advance(h);
        let t = clock.t;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::numerical(t, "linear flow produced a non-finite value"));
        }
        steps += 1;
        if steps % config.mass_stride == 0 || stopped {
            let phi = grid.integrate_unchecked(&v);
            v_norm_series.push((t, l1(&v)));
            phi_series.push((t, phi));
            dphi_series.push(dphi(&v, phi));
        }
        if stopped && clock.is_snapshot(t) {
            snapshots.push((t, compose(&v)));
        }
    }
    Ok(LinearRun { spec, c_f0, v_norm_series, phi_series, dphi_series, snapshots })
}

/// Output of [`h_compose`].
#[derive(Debug, Clone)]
pub struct HComposition {
    /// `f(t) = h(t) T̃(t) f0` at the snapshot times.
    pub trajectory: Trajectory,
    /// `(t, h(t))`.
    pub h_series: Vec<(f64, f64)>,
    pub lambda: f64,
    pub c_f0: f64,
}

impl HComposition {
    /// The limit λ / c_{f0} of h(t).
    pub fn h_limit(&self) -> f64 {
        self.lambda / self.c_f0
    }
}

/// Solve `h' = (λ - (c + φ(t)) h) h`, `h(0) = 1`, alongside the linear flow
/// and rebuild the nonlinear solution as `h(t) T̃(t) f0`.
///
/// The scalar equation is advanced with RK4 on the linear run's time grid;
/// the half-step values of `c + φ` come from cubic Hermite interpolation of
/// the stored `(φ, φ')` samples.
pub fn h_compose(model: &Model, f0: &PopulationState, config: &StepperConfig) -> Result<HComposition> {
    let mut every_step = config.clone();
    every_step.mass_stride = 1;
    let lin = linear_run(model, f0, &every_step)?;
    let lambda = lin.spec.lambda;
    let c = lin.c_f0;
    let rate = |h: f64, m: f64| (lambda - m * h) * h;

    let mut h = 1.0;
    let mut h_series = vec![(0.0, h)];
    for k in 1..lin.phi_series.len() {
        let (t0, p0) = lin.phi_series[k - 1];
        let (t1, p1) = lin.phi_series[k];
        let (d0, d1) = (lin.dphi_series[k - 1], lin.dphi_series[k]);
        let dt = t1 - t0;
        let m0 = c + p0;
        let m1 = c + p1;
        let mid = c + 0.5 * (p0 + p1) + dt / 8.0 * (d0 - d1);
        let k1 = rate(h, m0);
        let k2 = rate(h + 0.5 * dt * k1, mid);
        let k3 = rate(h + 0.5 * dt * k2, mid);
        let k4 = rate(h + dt * k3, m1);
        h += dt / 6.0 * (k1 + 2.0 * (k2 + k3) + k4);
        if !h.is_finite() {
            return Err(Error::numerical(t1, "h(t) blew up"));
        }
        h_series.push((t1, h));
    }

    let grid = &model.grid;
    let mut snapshots = Vec::with_capacity(lin.snapshots.len());
    let mut mass_series = Vec::with_capacity(h_series.len());
    for ((t, hv), (_, p)) in h_series.iter().zip(&lin.phi_series) {
        mass_series.push((*t, hv * (c + p)));
    }
    for (t, u) in &lin.snapshots {
        let hv = h_at(&h_series, *t);
        let values: Vec<f64> = u.iter().map(|x| hv * x).collect();
        snapshots.push(PopulationState::new(*t, values, grid)?);
    }
    Ok(HComposition {
        trajectory: Trajectory {
            params: model.params.clone(),
            grid: grid.clone(),
            config: config.clone(),
            snapshots,
            mass_series,
        },
        h_series,
        lambda,
        c_f0: c,
    })
}

fn h_at(series: &[(f64, f64)], t: f64) -> f64 {
    let k = series.partition_point(|p| p.0 < t - 1e-12 * t.max(1.0));
    series[k.min(series.len() - 1)].1
}

/// Relative L¹ defect of the variation-of-constants identity
///
/// ```text
/// f(t,x) = f(0,x) e^{(1-ε-x²)t - ∫_0^t I} + ε γ(x) ∫_0^t I(s) e^{(1-ε-x²)(t-s) - ∫_s^t I} ds
/// ```
///
/// at the snapshot nearest `t`, rebuilt from the recorded mass series only.
/// Between mass samples `I` is linear and the exponent is interpolated
/// linearly, and each piece is integrated exactly.
pub fn duhamel_residual_at(traj: &Trajectory, t: f64) -> Result<f64> {
    let snap = traj
        .snapshot_at(t)
        .ok_or_else(|| Error::invalid(format!("no snapshot at t = {t}")))?;
    let initial = traj
        .snapshot_at(0.0)
        .ok_or_else(|| Error::invalid("trajectory has no snapshot at t = 0"))?;
    let t = snap.t;
    let end = traj.mass_series.partition_point(|p| p.0 <= t * (1.0 + 1e-12));
    let series = &traj.mass_series[..end];
    match series.last() {
        Some(&(s, _)) if (s - t).abs() <= 1e-9 * t.max(1.0) => {}
        _ => return Err(Error::invalid(format!("mass series does not reach t = {t}"))),
    }
    let max_gap = series.windows(2).map(|w| w[1].0 - w[0].0).fold(0.0f64, f64::max);
    if t > 0.0 && (series.len() < 2 || max_gap > 0.1 * (1.0 + 1e-9)) {
        return Err(Error::invalid(format!(
            "mass series too sparse on [0, {t}] (largest gap {max_gap}, need at least 10 samples per unit time)"
        )));
    }
    // cumulative ∫_0^s I
    let mut cum = vec![0.0; series.len()];
    for k in 1..series.len() {
        cum[k] = cum[k - 1] + 0.5 * (series[k].0 - series[k - 1].0) * (series[k].1 + series[k - 1].1);
    }
    let total = *cum.last().unwrap();
    let eps = traj.params.epsilon();
    let gamma = eval_kernel(traj.params.kernel(), &traj.grid)?;
    let grid = &traj.grid;

    let mut defect = vec![0.0; grid.len()];
    let mut exps = vec![0.0; series.len()];
    let mut expo = vec![0.0; series.len()];
    for i in 0..grid.len() {
        let x = grid.nodes()[i];
        let c = 1.0 - eps - x * x;
        let head = initial.values[i] * (c * t - total).exp();
        let mut tail = 0.0;
        if eps > 0.0 {
            for k in 0..series.len() {
                expo[k] = c * (t - series[k].0) - (total - cum[k]);
                exps[k] = expo[k].exp();
            }
            for k in 0..series.len() - 1 {
                let h = series[k + 1].0 - series[k].0;
                let (i0, i1) = (series[k].1, series[k + 1].1);
                let d = expo[k + 1] - expo[k];
                let (e0, e1) = (exps[k], exps[k + 1]);
                // ∫_0^1 (i0 + (i1 - i0) u) e^{expo_k + d u} du
                let (p1, p2) = if d.abs() < 1e-2 {
                    let d2 = d * d;
                    (
                        e0 * (1.0 + d / 2.0 + d2 / 6.0 + d2 * d / 24.0 + d2 * d2 / 120.0),
                        e0 * (0.5 + d / 3.0 + d2 / 8.0 + d2 * d / 30.0 + d2 * d2 / 144.0),
                    )
                } else {
                    ((e1 - e0) / d, (e1 * (d - 1.0) + e0) / (d * d))
                };
                tail += h * (i0 * p1 + (i1 - i0) * p2);
            }
            tail *= eps * gamma[i];
        }
        defect[i] = (head + tail - snap.values[i]).abs();
    }
    let norm = grid.integrate_unchecked(&snap.values);
    if !(norm > 0.0) {
        return Err(Error::invalid("snapshot has zero mass"));
    }
    Ok(grid.integrate_unchecked(&defect) / norm)
}

/// Largest Duhamel defect over all positive-time snapshots.
pub fn duhamel_residual(traj: &Trajectory) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in traj.snapshots.iter().filter(|s| s.t > 0.0) {
        worst = worst.max(duhamel_residual_at(traj, s.t)?);
    }
    Ok(worst)
}
