//! Domain types shared by every stage: the trait interval, the mutation
//! kernel, model parameters, the uniform spatial grid and population states.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad;

/// Finite trait interval `[a, b]` with `a < 0 < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::invalid(format!("interval [{a}, {b}] must be finite")));
        }
        if !(a < 0.0 && 0.0 < b) {
            return Err(Error::invalid(format!(
                "interval [{a}, {b}] must contain the optimal trait 0 strictly inside"
            )));
        }
        Ok(Interval { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }
}

/// Shape of the law of a mutant's trait.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelKind {
    /// Constant density `1 / |I|`.
    Uniform,
    /// `exp(-x^2 / (2 sigma2)) / (4 pi sigma2)`; with `sigma2 = 10` this is
    /// the kernel `exp(-x^2/20) / (40 pi)` of the reference experiment.
    Gaussian { sigma2: f64 },
    /// Piecewise-linear interpolation of `(x, value)` pairs sorted by `x`.
    Tabulated { nodes: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MutationKernel {
    pub kind: KernelKind,
    pub normalize: bool,
}

impl MutationKernel {
    pub fn uniform() -> Self {
        MutationKernel { kind: KernelKind::Uniform, normalize: true }
    }

    pub fn gaussian(sigma2: f64, normalize: bool) -> Self {
        MutationKernel { kind: KernelKind::Gaussian { sigma2 }, normalize }
    }

    pub fn tabulated(nodes: Vec<(f64, f64)>, normalize: bool) -> Self {
        MutationKernel { kind: KernelKind::Tabulated { nodes }, normalize }
    }

    fn validate(&self, interval: &Interval) -> Result<()> {
        match &self.kind {
            KernelKind::Uniform => Ok(()),
            KernelKind::Gaussian { sigma2 } => {
                if *sigma2 > 0.0 && sigma2.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("gaussian kernel needs sigma2 > 0, got {sigma2}")))
                }
            }
            KernelKind::Tabulated { nodes } => {
                if nodes.len() < 2 {
                    return Err(Error::invalid("tabulated kernel needs at least two nodes"));
                }
                if nodes.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(Error::invalid("tabulated kernel nodes must be strictly increasing in x"));
                }
                if let Some(&(x, v)) = nodes.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::invalid(format!(
                        "tabulated kernel must be positive, got value {v} at x = {x}"
                    )));
                }
                let (first, last) = (nodes[0].0, nodes[nodes.len() - 1].0);
                if first > interval.a() || last < interval.b() {
                    return Err(Error::invalid(format!(
                        "tabulated kernel covers [{first}, {last}], which does not contain [{}, {}]",
                        interval.a(),
                        interval.b()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Kernel value before any normalization.
    pub fn raw_value(&self, x: f64, interval: &Interval) -> f64 {
        match &self.kind {
            KernelKind::Uniform => 1.0 / interval.len(),
            KernelKind::Gaussian { sigma2 } => {
                (-x * x / (2.0 * sigma2)).exp() / (4.0 * std::f64::consts::PI * sigma2)
            }
            KernelKind::Tabulated { nodes } => interpolate(nodes, x),
        }
    }

    /// `∫_I γ_raw`, evaluated to near machine precision.
    pub fn raw_mass(&self, interval: &Interval) -> f64 {
        match &self.kind {
            KernelKind::Uniform => 1.0,
            KernelKind::Gaussian { .. } => {
                quad::integrate(|x| self.raw_value(x, interval), interval.a(), interval.b(), &[0.0])
            }
            KernelKind::Tabulated { nodes } => {
                let breaks: Vec<f64> = nodes.iter().map(|p| p.0).collect();
                quad::integrate(|x| self.raw_value(x, interval), interval.a(), interval.b(), &breaks)
            }
        }
    }

    /// Interior breakpoints that an adaptive rule should respect.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            KernelKind::Tabulated { nodes } => nodes.iter().map(|p| p.0).collect(),
            _ => Vec::new(),
        }
    }
}

fn interpolate(nodes: &[(f64, f64)], x: f64) -> f64 {
    let idx = nodes.partition_point(|p| p.0 <= x);
    if idx == 0 {
        return nodes[0].1;
    }
    if idx == nodes.len() {
        return nodes[nodes.len() - 1].1;
    }
    let (x0, y0) = nodes[idx - 1];
    let (x1, y1) = nodes[idx];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Model parameters: mutation probability, trait interval and kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    epsilon: f64,
    interval: Interval,
    kernel: MutationKernel,
    /// Multiplier applied to raw kernel values on the continuum.
    #[serde(skip)]
    scale: f64,
}

impl ModelParams {
    pub fn new(epsilon: f64, interval: Interval, kernel: MutationKernel) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::invalid(format!("epsilon must lie in [0, 1), got {epsilon}")));
        }
        kernel.validate(&interval)?;
        let scale = if kernel.normalize { 1.0 / kernel.raw_mass(&interval) } else { 1.0 };
        Ok(ModelParams { epsilon, interval, kernel, scale })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn interval(&self) -> &Interval {
        &self.interval
    }

    pub fn kernel(&self) -> &MutationKernel {
        &self.kernel
    }

    /// Same model with another mutation probability.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::invalid(format!("epsilon must lie in [0, 1), got {epsilon}")));
        }
        Ok(ModelParams { epsilon, ..self.clone() })
    }

    /// Kernel γ on the continuum, normalized with the exact integral when requested.
    pub fn gamma(&self, x: f64) -> f64 {
        self.scale * self.kernel.raw_value(x, &self.interval)
    }

    /// γ(0), the kernel value at the optimal trait.
    pub fn gamma0(&self) -> f64 {
        self.gamma(0.0)
    }

    /// Half-width of the long-time Cauchy profile, γ(0)πε.
    pub fn cauchy_scale(&self) -> f64 {
        self.gamma0() * std::f64::consts::PI * self.epsilon
    }
}

/// Uniform grid on `[a, b]` with composite trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    interval: Interval,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spacing: f64,
}

pub fn build_grid(interval: &Interval, n: usize) -> Result<Grid> {
    if n < 3 {
        return Err(Error::invalid(format!("grid needs at least 3 nodes, got {n}")));
    }
    let (a, b) = (interval.a(), interval.b());
    if a >= b {
        return Err(Error::invalid(format!("degenerate interval [{a}, {b}]")));
    }
    let h = (b - a) / (n - 1) as f64;
    let mut nodes: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
    nodes[n - 1] = b;
    // snap the node closest to the optimum onto it when it is within roundoff
    if let Some(k) = nodes.iter().position(|&x| x.abs() < 1e-9 * h) {
        nodes[k] = 0.0;
    }
    let mut weights = vec![h; n];
    weights[0] = 0.5 * h;
    weights[n - 1] = 0.5 * h;
    Ok(Grid { interval: *interval, nodes, weights, spacing: h })
}

impl Grid {
    pub fn interval(&self) -> &Interval {
        &self.interval
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Index of the node nearest to `x`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let raw = ((x - self.interval.a()) / self.spacing).round();
        raw.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// Trapezoid quadrature of sampled values.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.len() {
            return Err(Error::invalid(format!(
                "sample length {} does not match grid size {}",
                samples.len(),
                self.len()
            )));
        }
        Ok(self.integrate_unchecked(samples))
    }

    #[inline]
    pub(crate) fn integrate_unchecked(&self, samples: &[f64]) -> f64 {
        self.weights.iter().zip(samples).map(|(w, f)| w * f).sum()
    }
}

/// Free-function form of [`Grid::integrate`].
pub fn integrate(grid: &Grid, samples: &[f64]) -> Result<f64> {
    grid.integrate(samples)
}

/// Sample the kernel on the grid. With `normalize` set, the samples are
/// rescaled so that their trapezoid quadrature is exactly one.
pub fn eval_kernel(kernel: &MutationKernel, grid: &Grid) -> Result<Vec<f64>> {
    kernel.validate(grid.interval())?;
    let raw = grid.sample(|x| kernel.raw_value(x, grid.interval()));
    if let Some(i) = raw.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::invalid(format!(
            "kernel is not positive at x = {}",
            grid.nodes()[i]
        )));
    }
    if !kernel.normalize {
        return Ok(raw);
    }
    let mass = grid.integrate_unchecked(&raw);
    Ok(raw.into_iter().map(|v| v / mass).collect())
}

/// Density samples at one instant together with their cached mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    pub t: f64,
    pub values: Vec<f64>,
    pub mass: f64,
}

/// Negative excursions below this fraction of `max(f)` are rounded to zero.
pub const CLAMP_FRACTION: f64 = 1e-13;

impl PopulationState {
    /// Build a state, enforcing nonnegativity under the clamp policy.
    pub fn new(t: f64, mut values: Vec<f64>, grid: &Grid) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "state has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        clamp_nonnegative(&mut values, t)?;
        let mass = grid.integrate_unchecked(&values);
        Ok(PopulationState { t, values, mass })
    }

    /// Value at the node nearest the optimal trait.
    pub fn value_at_origin(&self, grid: &Grid) -> f64 {
        self.values[grid.nearest_index(0.0)]
    }
}

pub(crate) fn clamp_nonnegative(values: &mut [f64], t: f64) -> Result<()> {
    let mut max = 0.0f64;
    for &v in values.iter() {
        if !v.is_finite() {
            return Err(Error::numerical(t, "non-finite density value"));
        }
        max = max.max(v);
    }
    let floor = -CLAMP_FRACTION * max;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < floor {
                return Err(Error::numerical(t, format!("density went negative ({v:e})")));
            }
            *v = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn three_node_grid() {
        let g = build_grid(&Interval::new(-1.0, 1.0).unwrap(), 3).unwrap();
        assert_eq!(g.nodes(), &[-1.0, 0.0, 1.0]);
        assert_eq!(g.weights(), &[0.5, 1.0, 0.5]);
    }

    #[test]
    fn reference_grid_spacing() {
        let g = build_grid(&Interval::new(-1.5, 1.5).unwrap(), 1501).unwrap();
        assert!(close(g.spacing(), 0.002, 1e-15));
        assert!(close(g.weights().iter().sum::<f64>(), 3.0, 1e-12));
        assert_eq!(g.nodes()[750], 0.0);
        assert_eq!(*g.nodes().last().unwrap(), 1.5);
    }

    #[test]
    fn asymmetric_grid() {
        let g = build_grid(&Interval::new(-1.0, 2.0).unwrap(), 4).unwrap();
        assert_eq!(g.nodes(), &[-1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        let i = Interval::new(-1.0, 1.0).unwrap();
        assert!(matches!(build_grid(&i, 2), Err(Error::InvalidArgument(_))));
        assert!(Interval::new(1.0, -1.0).is_err());
        assert!(Interval::new(0.5, 1.0).is_err());
        assert!(Interval::new(-f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn quadrature_examples() {
        let g = build_grid(&Interval::new(-1.0, 1.0).unwrap(), 2001).unwrap();
        assert!(close(g.integrate(&vec![1.0; 2001]).unwrap(), 2.0, 1e-12));
        assert!(close(g.integrate(&g.sample(|x| x)).unwrap(), 0.0, 1e-14));
        assert!(close(g.integrate(&g.sample(|x| x * x)).unwrap(), 2.0 / 3.0, 1e-6));
        assert!(matches!(g.integrate(&[1.0, 2.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn uniform_kernel_samples() {
        let g = build_grid(&Interval::new(-1.0, 1.0).unwrap(), 101).unwrap();
        let s = eval_kernel(&MutationKernel::uniform(), &g).unwrap();
        assert!(s.iter().all(|&v| close(v, 0.5, 1e-14)));
    }

    #[test]
    fn reference_gaussian_kernel() {
        let i = Interval::new(-1.5, 1.5).unwrap();
        let g = build_grid(&i, 1501).unwrap();
        let k = MutationKernel::gaussian(10.0, false);
        let raw = eval_kernel(&k, &g).unwrap();
        let at0 = raw[g.nearest_index(0.0)];
        assert!(close(at0, 1.0 / (40.0 * std::f64::consts::PI), 1e-15));
        assert!(close(at0, 7.9577e-3, 1e-7));

        // oracle: raw mass by a very fine trapezoid rule
        let fine = build_grid(&i, 300_001).unwrap();
        let raw_mass = fine.integrate(&fine.sample(|x| k.raw_value(x, &i))).unwrap();
        assert!(close(raw_mass, 0.023_007_417_544_286, 1e-13));
        assert!(close(k.raw_mass(&i), raw_mass, 1e-12));

        let normalized = eval_kernel(&MutationKernel::gaussian(10.0, true), &g).unwrap();
        let grid_mass = g.integrate(&raw).unwrap();
        for (n, r) in normalized.iter().zip(&raw) {
            assert!(close(*n, r / grid_mass, 1e-15));
        }
        assert!(close(g.integrate(&normalized).unwrap(), 1.0, 1e-10));
    }

    #[test]
    fn tabulated_kernel_rejects_nonpositive_values() {
        let i = Interval::new(-1.0, 1.0).unwrap();
        let k = MutationKernel::tabulated(vec![(-1.0, 1.0), (0.0, 0.0), (1.0, 1.0)], true);
        assert!(matches!(ModelParams::new(0.1, i, k), Err(Error::InvalidArgument(_))));
        let short = MutationKernel::tabulated(vec![(-0.5, 1.0), (1.0, 1.0)], true);
        assert!(ModelParams::new(0.1, i, short).is_err());
    }

    #[test]
    fn tabulated_kernel_interpolates() {
        let i = Interval::new(-1.0, 1.0).unwrap();
        let k = MutationKernel::tabulated(vec![(-1.0, 1.0), (0.0, 3.0), (1.0, 1.0)], true);
        let p = ModelParams::new(0.1, i, k).unwrap();
        // raw mass is 4, so gamma(0) = 3/4
        assert!(close(p.gamma0(), 0.75, 1e-13));
        assert!(close(p.gamma(0.5), 0.5, 1e-13));
    }

    #[test]
    fn epsilon_range_is_checked() {
        let i = Interval::new(-1.0, 1.0).unwrap();
        assert!(ModelParams::new(-0.1, i, MutationKernel::uniform()).is_err());
        assert!(ModelParams::new(1.0, i, MutationKernel::uniform()).is_err());
        assert!(ModelParams::new(0.0, i, MutationKernel::uniform()).is_ok());
    }

    #[test]
    fn clamp_policy() {
        let g = build_grid(&Interval::new(-1.0, 1.0).unwrap(), 3).unwrap();
        let s = PopulationState::new(0.0, vec![1.0, -1e-15, 2.0], &g).unwrap();
        assert_eq!(s.values[1], 0.0);
        assert!(close(s.mass, 0.5 + 1.0, 1e-15));
        assert!(PopulationState::new(0.0, vec![1.0, -1e-3, 2.0], &g).is_err());
        assert!(PopulationState::new(0.0, vec![1.0, f64::NAN, 2.0], &g).is_err());
    }
}
