//! Dominant eigenpair of the linear operator
//! `(A f)(x) = (1 - ε - x²) f(x) + ε γ(x) ∫_I f`.
//!
//! The eigenvalue λ is the unique root above `1 - ε` of the characteristic
//! function `F(λ) = ε ∫_I γ(x) / (λ - (1 - ε) + x²) dx`. Everything here is
//! parametrized by the gap `α = λ - (1 - ε) = ν²`, which keeps full relative
//! precision when α is many orders of magnitude below one.
//!
//! Two flavours share [`SpectralData`]: the continuum eigenpair (integrals by
//! tan substitution, [`solve_lambda`]) and the eigenpair of the trapezoid
//! discretization used by the time steppers ([`solve_lambda_on_grid`]).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{eval_kernel, Grid, ModelParams, PopulationState};
use crate::quad;

/// Which operator the eigenpair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// Integrals over I evaluated to near machine precision.
    Continuum,
    /// Integrals replaced by the grid's trapezoid rule, kernel sampled by
    /// [`eval_kernel`]; this is the exact eigenpair of the semi-discrete model.
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub epsilon: f64,
    /// Dominant eigenvalue λ_ε.
    pub lambda: f64,
    /// α_ε = λ_ε - (1 - ε), stored directly.
    pub alpha: f64,
    /// ν_ε = √α_ε.
    pub nu: f64,
    /// Eigenvector ψ_ε at the grid nodes, normalized to unit mass.
    pub psi: Vec<f64>,
    /// Adjoint eigenvector ψ*_ε at the grid nodes, with ⟨ψ*, ψ⟩ = 1.
    pub psi_adjoint: Vec<f64>,
    /// |F(λ_ε) - 1|.
    pub residual: f64,
    pub discretization: Discretization,
}

impl SpectralData {
    /// Decay-rate parameter α_ε / 2.
    pub fn half_gap(&self) -> f64 {
        0.5 * self.alpha
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    /// Accept a root only if |F(λ) - 1| is below this.
    pub tol: f64,
    /// Relative tolerance of the adaptive θ-quadrature.
    pub quad_rel_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { tol: 1e-10, quad_rel_tol: 1e-14 }
    }
}

/// `∫_I γ(x) / (α + x²)^power dx` for power 1 or 2, by the substitution
/// `x = ν tan θ` which turns the Cauchy factor into a bounded integrand.
fn cauchy_moment(params: &ModelParams, alpha: f64, power: i32, rel_tol: f64) -> f64 {
    let nu = alpha.sqrt();
    let (a, b) = (params.interval().a(), params.interval().b());
    let (ta, tb) = ((a / nu).atan(), (b / nu).atan());
    let mut breaks = vec![0.0];
    breaks.extend(params.kernel().breakpoints().into_iter().map(|x| (x / nu).atan()));
    let integral = match power {
        1 => quad::integrate_adaptive(|th| params.gamma(nu * th.tan()), ta, tb, &breaks, 1e-300, rel_tol).value / nu,
        2 => {
            quad::integrate_adaptive(
                |th| {
                    let c = th.cos();
                    params.gamma(nu * th.tan()) * c * c
                },
                ta,
                tb,
                &breaks,
                1e-300,
                rel_tol,
            )
            .value
                / (nu * alpha)
        }
        _ => unreachable!("only first and second moments are used"),
    };
    integral
}

fn check_lambda(params: &ModelParams, lambda: f64) -> Result<f64> {
    let floor = 1.0 - params.epsilon();
    let alpha = lambda - floor;
    if !(alpha > 0.0) || !lambda.is_finite() {
        return Err(Error::OutOfDomain { lambda, floor });
    }
    Ok(alpha)
}

/// Characteristic function `F_ε(λ)`.
pub fn characteristic_f(params: &ModelParams, lambda: f64) -> Result<f64> {
    let alpha = check_lambda(params, lambda)?;
    Ok(characteristic_f_gap(params, alpha))
}

/// `F_ε` as a function of the gap α = λ - (1 - ε).
pub fn characteristic_f_gap(params: &ModelParams, alpha: f64) -> f64 {
    params.epsilon() * cauchy_moment(params, alpha, 1, SpectralOptions::default().quad_rel_tol)
}

/// `dF_ε/dλ = -ε ∫ γ / (λ - (1 - ε) + x²)²`.
pub fn characteristic_derivative(params: &ModelParams, lambda: f64) -> Result<f64> {
    let alpha = check_lambda(params, lambda)?;
    Ok(-params.epsilon() * cauchy_moment(params, alpha, 2, SpectralOptions::default().quad_rel_tol))
}

/// Root of a strictly decreasing `g` with `g(0+) > 1 > g(∞)`: geometric
/// bracketing from `start`, bisection, then one Newton polish with `dg`.
fn solve_decreasing<G, D>(g: G, dg: D, start: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let fail = |msg: String| Error::NoEigenvalue(msg);
    let mut hi = start;
    let mut lo;
    if g(hi) >= 1.0 {
        lo = hi;
        let mut k = 0;
        while g(hi) >= 1.0 {
            lo = hi;
            hi *= 2.0;
            k += 1;
            if k > 2000 || !hi.is_finite() {
                return Err(fail("could not bracket the root from above".into()));
            }
        }
    } else {
        lo = hi * 0.5;
        while g(lo) < 1.0 {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(fail(
                    "characteristic function stays below 1 as lambda approaches 1 - epsilon".into(),
                ));
            }
        }
    }
    for _ in 0..400 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut alpha = 0.5 * (lo + hi);
    let r = g(alpha) - 1.0;
    let slope = dg(alpha);
    if slope < 0.0 {
        let polished = alpha - r / slope;
        if polished > lo && polished < hi && (g(polished) - 1.0).abs() <= r.abs() {
            alpha = polished;
        }
    }
    Ok(alpha)
}

/// Dominant eigenpair of the continuum operator, with ψ and ψ* sampled on `grid`.
pub fn solve_lambda(params: &ModelParams, grid: &Grid, opts: &SpectralOptions) -> Result<SpectralData> {
    let eps = params.epsilon();
    if eps == 0.0 {
        return Err(Error::NoEigenvalue("epsilon = 0 leaves only the multiplication operator".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let rt = opts.quad_rel_tol;
    let g = |alpha: f64| eps * cauchy_moment(params, alpha, 1, rt);
    let dg = |alpha: f64| -eps * cauchy_moment(params, alpha, 2, rt);
    let alpha = solve_decreasing(g, dg, eps * eps)?;
    let residual = (g(alpha) - 1.0).abs();
    if residual > opts.tol {
        return Err(Error::numerical(0.0, format!("characteristic residual {residual:e} exceeds {:e}", opts.tol)));
    }
    let adjoint_norm = eps * cauchy_moment(params, alpha, 2, rt);
    let psi = grid.sample(|x| eps * params.gamma(x) / (alpha + x * x));
    let psi_adjoint = grid.sample(|x| 1.0 / (adjoint_norm * (alpha + x * x)));
    Ok(SpectralData {
        epsilon: eps,
        lambda: 1.0 - eps + alpha,
        alpha,
        nu: alpha.sqrt(),
        psi,
        psi_adjoint,
        residual,
        discretization: Discretization::Continuum,
    })
}

/// Dominant eigenpair of the trapezoid-discretized operator on `grid`.
pub fn solve_lambda_on_grid(params: &ModelParams, grid: &Grid, opts: &SpectralOptions) -> Result<SpectralData> {
    let eps = params.epsilon();
    if eps == 0.0 {
        return Err(Error::NoEigenvalue("epsilon = 0 leaves only the multiplication operator".into()));
    }
    let gamma = eval_kernel(params.kernel(), grid)?;
    let x2: Vec<f64> = grid.nodes().iter().map(|x| x * x).collect();
    let w = grid.weights();
    let moment = |alpha: f64, power: i32| -> f64 {
        (0..grid.len())
            .map(|i| w[i] * gamma[i] / (alpha + x2[i]).powi(power))
            .sum::<f64>()
    };
    let alpha = solve_decreasing(|a| eps * moment(a, 1), |a| -eps * moment(a, 2), eps * eps)?;
    let residual = (eps * moment(alpha, 1) - 1.0).abs();
    if residual > opts.tol {
        return Err(Error::numerical(0.0, format!("discrete characteristic residual {residual:e}")));
    }
    let adjoint_norm = eps * moment(alpha, 2);
    let psi = (0..grid.len()).map(|i| eps * gamma[i] / (alpha + x2[i])).collect();
    let psi_adjoint = x2.iter().map(|x2| 1.0 / (adjoint_norm * (alpha + x2))).collect();
    Ok(SpectralData {
        epsilon: eps,
        lambda: 1.0 - eps + alpha,
        alpha,
        nu: alpha.sqrt(),
        psi,
        psi_adjoint,
        residual,
        discretization: Discretization::Trapezoid,
    })
}

/// Second-order prediction `(1 - ε) + γ(0)² π² ε²` of λ_ε.
pub fn expansion_prediction(params: &ModelParams) -> f64 {
    let eps = params.epsilon();
    let g0 = params.gamma0();
    (1.0 - eps) + g0 * g0 * PI * PI * eps * eps
}

/// Coefficient `c_{f0} = ⟨ψ*, f0⟩` of the spectral projection of `f0` onto ψ.
pub fn spectral_projection(spec: &SpectralData, f0: &PopulationState, grid: &Grid) -> Result<f64> {
    if f0.values.len() != spec.psi_adjoint.len() || grid.len() != f0.values.len() {
        return Err(Error::invalid("state and spectral data live on different grids"));
    }
    if f0.values.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("initial datum is identically zero"));
    }
    let weighted: Vec<f64> = f0.values.iter().zip(&spec.psi_adjoint).map(|(f, p)| f * p).collect();
    grid.integrate(&weighted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid, Interval, MutationKernel};

    fn uniform(eps: f64) -> ModelParams {
        ModelParams::new(eps, Interval::new(-1.0, 1.0).unwrap(), MutationKernel::uniform()).unwrap()
    }

    fn reference(eps: f64) -> ModelParams {
        ModelParams::new(eps, Interval::new(-1.5, 1.5).unwrap(), MutationKernel::gaussian(10.0, true)).unwrap()
    }

    /// Independent oracle: bisection on `(ε/ν) atan(1/ν) = 1` for uniform γ on (-1, 1).
    fn arctan_oracle(eps: f64) -> f64 {
        let (mut lo, mut hi) = (1e-300f64, 10.0f64);
        for _ in 0..2000 {
            let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            if mid <= lo || mid >= hi {
                break;
            }
            if eps / mid * (1.0 / mid).atan() > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn uniform_closed_form() {
        let p = uniform(0.1);
        let f = characteristic_f(&p, 0.9 + 1.0).unwrap();
        assert!((f - 0.1 * PI / 4.0).abs() < 1e-15);
        for nu in [0.01, 0.3, 2.0] {
            let f = characteristic_f_gap(&p, nu * nu);
            let exact = 0.1 / nu * (1.0 / nu).atan();
            assert!(((f - exact) / exact).abs() < 1e-13);
        }
    }

    #[test]
    fn f_decays_and_decreases() {
        for p in [uniform(0.05), reference(0.01)] {
            let base = 1.0 - p.epsilon();
            let near = characteristic_f(&p, base + 1.0).unwrap();
            let far = characteristic_f(&p, base + 1e6).unwrap();
            assert!(far < 1e-5 * near);
            let ladder: Vec<f64> = (0..30).map(|k| base + 1e-8 * 2f64.powi(k)).collect();
            let values: Vec<f64> = ladder.iter().map(|&l| characteristic_f(&p, l).unwrap()).collect();
            assert!(values.windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn out_of_domain() {
        let p = uniform(0.1);
        assert!(matches!(characteristic_f(&p, 0.9), Err(Error::OutOfDomain { .. })));
        assert!(matches!(characteristic_f(&p, 0.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = reference(0.02);
        let lam = 0.99;
        let h = 1e-7;
        let fd = (characteristic_f(&p, lam + h).unwrap() - characteristic_f(&p, lam - h).unwrap()) / (2.0 * h);
        let d = characteristic_derivative(&p, lam).unwrap();
        assert!(((fd - d) / d).abs() < 1e-6, "{fd} vs {d}");
    }

    #[test]
    fn uniform_eigenvalue_matches_oracle() {
        let p = uniform(0.1);
        let g = build_grid(p.interval(), 2001).unwrap();
        let s = solve_lambda(&p, &g, &SpectralOptions::default()).unwrap();
        let nu = arctan_oracle(0.1);
        // frozen from the same oracle in extended precision
        assert!((nu - 0.142_887_001_121_407_7).abs() < 1e-14);
        assert!((s.nu - nu).abs() < 1e-12);
        assert!((s.lambda - 0.920_416_695_089_469_2).abs() < 1e-12);
        assert!(s.residual <= 1e-10);
        assert!((s.nu * s.nu - (s.lambda - 0.9)).abs() < 1e-12);
    }

    #[test]
    fn eigenvector_normalization_and_pairing() {
        for eps in [0.1, 0.01] {
            let p = reference(eps);
            // resolve the Cauchy peak and keep the O(h²) endpoint error below 1e-8
            let h = (p.cauchy_scale() / 8.0).min(1e-3);
            let n = (p.interval().len() / h).ceil() as usize + 1;
            let g = build_grid(p.interval(), n | 1).unwrap();
            let s = solve_lambda(&p, &g, &SpectralOptions::default()).unwrap();
            assert!(s.lambda > 1.0 - eps && s.lambda < 1.0);
            assert!(s.psi.iter().all(|&v| v > 0.0));
            assert!((g.integrate(&s.psi).unwrap() - 1.0).abs() < 1e-8);
            let pair: Vec<f64> = s.psi.iter().zip(&s.psi_adjoint).map(|(a, b)| a * b).collect();
            assert!((g.integrate(&pair).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn eigen_relation_on_resolving_grid() {
        let p = reference(0.01);
        let g = build_grid(p.interval(), 3001).unwrap();
        let s = solve_lambda(&p, &g, &SpectralOptions::default()).unwrap();
        let gamma = eval_kernel(p.kernel(), &g).unwrap();
        let mass = g.integrate(&s.psi).unwrap();
        let eps = p.epsilon();
        let diff: Vec<f64> = (0..g.len())
            .map(|i| {
                let x = g.nodes()[i];
                let a_psi = (1.0 - eps - x * x) * s.psi[i] + eps * gamma[i] * mass;
                (a_psi - s.lambda * s.psi[i]).abs()
            })
            .collect();
        let scale: f64 = g.integrate(&s.psi.iter().map(|v| s.lambda * v).collect::<Vec<_>>()).unwrap();
        assert!(g.integrate(&diff).unwrap() / scale <= 1e-6);
    }

    #[test]
    fn zero_epsilon_has_no_eigenvalue() {
        let p = uniform(0.0);
        let g = build_grid(p.interval(), 11).unwrap();
        assert!(matches!(solve_lambda(&p, &g, &SpectralOptions::default()), Err(Error::NoEigenvalue(_))));
    }

    #[test]
    fn small_epsilon_sandwich() {
        for eps in [1e-2, 3e-3, 1e-3] {
            let p = reference(eps);
            let g = build_grid(p.interval(), 11).unwrap();
            let s = solve_lambda(&p, &g, &SpectralOptions::default()).unwrap();
            let scale = p.cauchy_scale();
            assert!(s.lambda < 1.0);
            assert!(0.5 * scale <= s.nu && s.nu <= 2.0 * scale);
        }
    }

    #[test]
    fn prediction_examples() {
        let i = Interval::new(-PI / 2.0, PI / 2.0).unwrap();
        // uniform on an interval of length π has γ(0) = 1/π
        let p = ModelParams::new(0.01, i, MutationKernel::uniform()).unwrap();
        assert!((expansion_prediction(&p) - 0.9901).abs() < 1e-15);
        let u = uniform(0.1);
        assert!((expansion_prediction(&u) - 0.924_674_011_003).abs() < 1e-11);
        assert!((expansion_prediction(&uniform(1e-9)) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn projection_examples() {
        let p = reference(0.05);
        let g = build_grid(p.interval(), 1501).unwrap();
        let s = solve_lambda(&p, &g, &SpectralOptions::default()).unwrap();
        let f = PopulationState::new(0.0, s.psi.clone(), &g).unwrap();
        assert!((spectral_projection(&s, &f, &g).unwrap() - 1.0).abs() < 1e-8);
        let f2 = PopulationState::new(0.0, s.psi.iter().map(|v| 2.0 * v).collect(), &g).unwrap();
        assert!((spectral_projection(&s, &f2, &g).unwrap() - 2.0).abs() < 2e-8);
        let bump = PopulationState::new(0.0, g.sample(|x| (-(x - 1.0) * (x - 1.0) * 50.0).exp()), &g).unwrap();
        assert!(spectral_projection(&s, &bump, &g).unwrap() > 0.0);
        let zero = PopulationState::new(0.0, vec![0.0; g.len()], &g).unwrap();
        assert!(spectral_projection(&s, &zero, &g).is_err());
    }

    #[test]
    fn discrete_and_continuum_agree_on_resolving_grid() {
        let p = reference(0.01);
        let g = build_grid(p.interval(), 1501).unwrap();
        let c = solve_lambda(&p, &g, &SpectralOptions::default()).unwrap();
        let d = solve_lambda_on_grid(&p, &g, &SpectralOptions::default()).unwrap();
        assert_eq!(d.discretization, Discretization::Trapezoid);
        assert!(((c.alpha - d.alpha) / c.alpha).abs() < 1e-5, "{} vs {}", c.alpha, d.alpha);
        assert!((g.integrate(&d.psi).unwrap() - 1.0).abs() < 1e-12);
    }
}
