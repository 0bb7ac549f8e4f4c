//! Numerical toolkit for the house-of-cards selection-mutation-competition
//! equation
//!
//! ```text
//! ∂f/∂t = (1 - ε - x² - ∫_I f) f + ε γ(x) ∫_I f,    x ∈ I = [a, b],
//! ```
//!
//! covering the dominant eigenpair of its linear part, closed-form reference
//! profiles, explicit time integration and the error analysis that compares
//! computed solutions with the transient Gaussian and long-time Cauchy
//! profiles.

pub mod analysis;
pub mod error;
pub mod model;
pub mod profiles;
pub mod quad;
pub mod simulator;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{build_grid, eval_kernel, integrate, Grid, Interval, KernelKind, ModelParams, MutationKernel, PopulationState};
pub use spectral::{
    characteristic_f, expansion_prediction, solve_lambda, solve_lambda_on_grid, spectral_projection, Discretization,
    SpectralData, SpectralOptions,
};
pub use analysis::{
    auto_grid_size, error_curves, fit_exponential, fit_rate, l1_distance, rate_study, regime_sweep, ErrorCurve, LinearFit,
    Regime, RegimeMap, Scenario,
};
pub use profiles::{eps0_exact, gamma1, gamma2, gamma2_shifted, steady_state, ProfileKind, ProfileSample};
pub use simulator::{
    duhamel_residual, duhamel_residual_at, h_compose, linear_run, rhs, run, step, HComposition, InitialCondition,
    LinearRun, Model, PhaseSwitch, Scheme, StepperConfig, Trajectory,
};
