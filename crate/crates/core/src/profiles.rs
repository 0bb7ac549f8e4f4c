//! Reference profiles: the transient Gaussian profile Γ₁, the long-time
//! Cauchy profile Γ₂, the steady state λψ, and the exact solution without
//! mutation.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Grid, ModelParams, PopulationState};
use crate::quad;
use crate::spectral::SpectralData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Gamma1,
    Gamma2,
    Steady,
    Eps0Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSample {
    pub label: ProfileKind,
    /// Evaluation time; meaningless for `Gamma2` and `Steady`.
    pub t: f64,
    pub values: Vec<f64>,
}

/// Γ₂(ε, x) = ε γ(0) / (γ(0)² π² ε² + x²).
pub fn gamma2_value(params: &ModelParams, x: f64) -> f64 {
    let eps = params.epsilon();
    let g0 = params.gamma0();
    let s = g0 * PI * eps;
    eps * g0 / (s * s + x * x)
}

pub fn gamma2(params: &ModelParams, grid: &Grid) -> Result<ProfileSample> {
    gamma2_shifted(params, grid, 0.0)
}

/// Γ₂(ε, x - shift); with shift = 1 this is the reference initial datum.
pub fn gamma2_shifted(params: &ModelParams, grid: &Grid, shift: f64) -> Result<ProfileSample> {
    if params.epsilon() == 0.0 {
        return Err(Error::DegenerateProfile("the Cauchy profile collapses at epsilon = 0".into()));
    }
    if !(params.gamma0() > 0.0) {
        return Err(Error::DegenerateProfile("kernel vanishes at the optimal trait".into()));
    }
    Ok(ProfileSample {
        label: ProfileKind::Gamma2,
        t: f64::NAN,
        values: grid.sample(|x| gamma2_value(params, x - shift)),
    })
}

/// ∫_I e^{-y²} dy over the actual (finite) interval.
pub fn gaussian_mass(grid: &Grid) -> f64 {
    let i = grid.interval();
    quad::integrate(|y| (-y * y).exp(), i.a(), i.b(), &[0.0])
}

/// Γ₁(t, x) = f0(x) √t e^{-x² t} / (f0(0) ∫_I e^{-y²} dy).
pub fn gamma1(f0: &PopulationState, t: f64, grid: &Grid) -> Result<ProfileSample> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("the Gaussian profile needs t > 0, got {t}")));
    }
    if f0.values.len() != grid.len() {
        return Err(Error::invalid("initial state does not match the grid"));
    }
    let at_origin = f0.value_at_origin(grid);
    if !(at_origin > 0.0) {
        return Err(Error::invalid("initial datum must be positive at the optimal trait"));
    }
    let scale = t.sqrt() / (at_origin * gaussian_mass(grid));
    let values = f0
        .values
        .iter()
        .zip(grid.nodes())
        .map(|(f, x)| f * scale * (-x * x * t).exp())
        .collect();
    Ok(ProfileSample { label: ProfileKind::Gamma1, t, values })
}

/// The stationary solution λ_ε ψ_ε; its mass is λ_ε.
pub fn steady_state(spec: &SpectralData) -> ProfileSample {
    ProfileSample {
        label: ProfileKind::Steady,
        t: f64::INFINITY,
        values: spec.psi.iter().map(|p| spec.lambda * p).collect(),
    }
}

/// Exact solution of the mutation-free problem on the grid,
///
/// ```text
/// f(t, x) = f0(x) e^{(1 - x²) t} / (1 + ∫_0^t ∫_I f0(y) e^{(1 - y²) s} dy ds),
/// ```
///
/// with the time integral done analytically node by node and the quotient
/// evaluated in log space, so arbitrarily long times neither overflow nor
/// lose precision.
pub fn eps0_exact(f0: &PopulationState, t: f64, grid: &Grid) -> Result<ProfileSample> {
    if f0.values.len() != grid.len() {
        return Err(Error::invalid("initial state does not match the grid"));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
    }
    let log_denominator = log_eps0_denominator(f0, t, grid);
    let values = f0
        .values
        .iter()
        .zip(grid.nodes())
        .map(|(&f, &x)| if f == 0.0 { 0.0 } else { f * ((1.0 - x * x) * t - log_denominator).exp() })
        .collect();
    Ok(ProfileSample { label: ProfileKind::Eps0Exact, t, values })
}

/// ln(∫_0^t e^{c s} ds) for any real c, stable for large |c t|.
fn log_exp_integral(c: f64, t: f64) -> f64 {
    let ct = c * t;
    if ct.abs() < 1e-300 || c == 0.0 {
        t.ln()
    } else if c > 0.0 {
        ct + (-(-ct).exp_m1() / c).ln()
    } else {
        (ct.exp_m1() / c).ln()
    }
}

fn log_eps0_denominator(f0: &PopulationState, t: f64, grid: &Grid) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let logs: Vec<f64> = f0
        .values
        .iter()
        .zip(grid.nodes().iter().zip(grid.weights()))
        .filter(|(&f, _)| f > 0.0)
        .map(|(&f, (&x, &w))| (w * f).ln() + log_exp_integral(1.0 - x * x, t))
        .collect();
    let peak = logs.iter().copied().fold(0.0f64, f64::max);
    let sum: f64 = (-peak).exp() + logs.iter().map(|l| (l - peak).exp()).sum::<f64>();
    peak + sum.ln()
}
