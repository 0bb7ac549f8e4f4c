//! Fixtures shared by the benchmarks.

use mutsel::{build_grid, Interval, Model, ModelParams, MutationKernel, PopulationState};
use mutsel::{InitialCondition, Result};

/// Normalized gaussian kernel (σ² = 10) on [-1.5, 1.5].
pub fn reference_params(eps: f64) -> Result<ModelParams> {
    ModelParams::new(eps, Interval::new(-1.5, 1.5)?, MutationKernel::gaussian(10.0, true))
}

pub fn reference_model(eps: f64, n: usize) -> Result<(Model, PopulationState)> {
    let params = reference_params(eps)?;
    let grid = build_grid(params.interval(), n)?;
    let model = Model::new(params, grid)?;
    let f0 = InitialCondition::CauchyShifted { shift: 1.0 }.state(model.params(), model.grid())?;
    Ok((model, f0))
}
