//! Fast self-check of the model invariants, run by `mutsel verify`.

use mutsel::*;

use crate::config::{parse_config, RunConfig};

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

type CheckFn = fn() -> Result<(bool, String)>;

fn reference(eps: f64) -> Result<ModelParams> {
    ModelParams::new(eps, Interval::new(-1.5, 1.5)?, MutationKernel::gaussian(10.0, true))
}

fn uniform(eps: f64) -> Result<ModelParams> {
    ModelParams::new(eps, Interval::new(-1.0, 1.0)?, MutationKernel::uniform())
}

fn model(p: ModelParams, n: usize) -> Result<Model> {
    let g = build_grid(p.interval(), n)?;
    Model::new(p, g)
}

fn characteristic_residual() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for eps in [1e-1, 1e-2, 1e-3] {
        for p in [uniform(eps)?, reference(eps)?] {
            let g = build_grid(p.interval(), 3)?;
            let s = solve_lambda(&p, &g, &SpectralOptions::default())?;
            worst = worst.max((characteristic_f(&p, s.lambda)? - 1.0).abs());
        }
    }
    Ok((worst <= 1e-10, format!("max |F(λ)-1| = {worst:.2e}")))
}

fn arctan_oracle() -> Result<(bool, String)> {
    // root of (ε/ν) atan(1/ν) = 1 at ε = 0.1, λ = 0.9 + ν²
    const LAMBDA: f64 = 0.920_416_695_089_469_2;
    let p = uniform(0.1)?;
    let s = solve_lambda(&p, &build_grid(p.interval(), 3)?, &SpectralOptions::default())?;
    let err = (s.lambda - LAMBDA).abs();
    Ok((err <= 1e-12, format!("|λ - oracle| = {err:.2e}")))
}

fn expansion_rate() -> Result<(bool, String)> {
    let eps = [1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3];
    let study = rate_study(&uniform(0.1)?, &eps)?;
    Ok((
        (2.5..=3.5).contains(&study.slope) && study.r2 >= 0.98,
        format!("slope = {:.3}, r² = {:.4}", study.slope, study.r2),
    ))
}

fn mutation_free_oracle() -> Result<(bool, String)> {
    let m = model(uniform(0.0)?, 401)?;
    let f0 = PopulationState::new(0.0, vec![0.1; 401], m.grid())?;
    let traj = run(&m, &f0, &StepperConfig::new(Scheme::Rk4, 0.01, 20.0))?;
    let mut worst: f64 = 0.0;
    for s in &traj.snapshots {
        let exact = eps0_exact(&f0, s.t, m.grid())?;
        worst = worst.max(l1_distance(&s.values, &exact.values, m.grid())?);
    }
    Ok((worst <= 1e-4, format!("max L¹ error = {worst:.2e}")))
}

fn mass_trap() -> Result<(bool, String)> {
    let mut hi: f64 = 0.0;
    for (k, &(eps, a, b, level)) in
        [(0.05, -1.5, 1.5, 0.3), (0.2, -0.7, 1.8, 0.9), (0.08, -2.0, 0.6, 0.5), (0.4, -1.0, 1.0, 0.99)].iter().enumerate()
    {
        let kernel = if k % 2 == 0 { MutationKernel::gaussian(2.0, true) } else { MutationKernel::uniform() };
        let p = ModelParams::new(eps, Interval::new(a, b)?, kernel)?;
        let m = model(p, 201)?;
        // `level` is the initial mass
        let f0 = InitialCondition::Constant { level: level / (b - a) }.state(m.params(), m.grid())?;
        let traj = run(&m, &f0, &StepperConfig::new(Scheme::Rk4, 0.05, 40.0))?;
        for &(_, mass) in &traj.mass_series {
            if !(mass >= 0.0) {
                return Ok((false, format!("negative mass {mass}")));
            }
            hi = hi.max(mass);
        }
    }
    Ok((hi <= 1.0 + 1e-10, format!("max recorded mass = {hi:.12}")))
}

fn steady_fixed_point() -> Result<(bool, String)> {
    let m = model(reference(0.05)?, 1501)?;
    let spec = m.discrete_spectrum()?;
    let st = PopulationState::new(0.0, steady_state(&spec).values, m.grid())?;
    let mut worst: f64 = 0.0;
    for scheme in [Scheme::Rk4, Scheme::ExponentialEuler] {
        let next = step(&m, &st, scheme, 0.05)?;
        worst = worst.max(l1_distance(&next.values, &st.values, m.grid())? / st.mass);
    }
    Ok((worst <= 1e-10, format!("relative drift after one step = {worst:.2e}")))
}

fn cross_solver() -> Result<(bool, String)> {
    let p = reference(0.05)?;
    let m = model(p.clone(), auto_grid_size(&p))?;
    let f0 = InitialCondition::CauchyShifted { shift: 1.0 }.state(m.params(), m.grid())?;
    let cfg = StepperConfig::new(Scheme::Rk4, 0.05, 50.0);
    let direct = run(&m, &f0, &cfg)?;
    let composed = h_compose(&m, &f0, &cfg)?;
    let mut worst: f64 = 0.0;
    for (a, b) in direct.snapshots.iter().zip(&composed.trajectory.snapshots) {
        worst = worst.max(l1_distance(&a.values, &b.values, m.grid())? / a.mass);
    }
    Ok((worst <= 1e-5, format!("max relative L¹ gap = {worst:.2e}")))
}

fn reference_short() -> Result<(Model, PopulationState, Trajectory)> {
    let p = reference(1e-2)?;
    let m = model(p.clone(), auto_grid_size(&p))?;
    let f0 = InitialCondition::CauchyShifted { shift: 1.0 }.state(m.params(), m.grid())?;
    let traj = run(&m, &f0, &StepperConfig::new(Scheme::Rk4, 0.05, 100.0))?;
    Ok((m, f0, traj))
}

fn duhamel() -> Result<(bool, String)> {
    let (_, _, traj) = reference_short()?;
    let r = duhamel_residual(&traj)?;
    Ok((r <= 1e-3, format!("max relative defect = {r:.2e}")))
}

fn triangle_sanity() -> Result<(bool, String)> {
    let (m, f0, traj) = reference_short()?;
    let spec = m.discrete_spectrum()?;
    let curve = error_curves(&traj, &spec, &f0)?;
    let gap = l1_distance(&gamma2(m.params(), m.grid())?.values, &steady_state(&spec).values, m.grid())?;
    let worst = (0..curve.times.len())
        .map(|k| (curve.err_gamma2[k] - curve.err_steady[k]).abs() - gap)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((worst <= 1e-12 * gap, format!("max(|e₂ - e_λψ| - ‖Γ₂ - λψ‖) = {worst:.2e}")))
}

fn cauchy_approximation() -> Result<(bool, String)> {
    let dist = |eps: f64| -> Result<f64> {
        let p = reference(eps)?;
        let n = (3.0 / (p.cauchy_scale() / 8.0)).ceil() as usize + 1;
        let g = build_grid(p.interval(), n)?;
        let s = solve_lambda(&p, &g, &SpectralOptions::default())?;
        l1_distance(&steady_state(&s).values, &gamma2(&p, &g)?.values, &g)
    };
    let ratio = dist(1e-2)? / dist(1e-3)?;
    Ok((ratio >= 2.0, format!("‖λψ-Γ₂‖ ratio ε=1e-2 / ε=1e-3 = {ratio:.2}")))
}

fn linear_decay() -> Result<(bool, String)> {
    let p = uniform(0.1)?;
    let m = model(p.clone(), auto_grid_size(&p))?;
    let alpha = m.discrete_spectrum()?.alpha;
    let f0 = InitialCondition::CauchyShifted { shift: 0.5 }.state(m.params(), m.grid())?;
    let mut cfg = StepperConfig::new(Scheme::Rk4, 0.1, 150.0 / alpha).with_snapshots(vec![]);
    cfg.mass_stride = 50;
    let lin = linear_run(&m, &f0, &cfg)?;
    let rate = -fit_exponential(&lin.v_norm_series, 50.0 / alpha, 150.0 / alpha)?.slope;
    let ratio = rate / alpha;
    Ok(((0.5..=3.0).contains(&ratio), format!("decay rate / α = {ratio:.3}")))
}

fn config_round_trip() -> Result<(bool, String)> {
    let cfg = RunConfig::reference_setup();
    let text = cfg.canonical_json();
    let ok = match parse_config(&text, std::path::Path::new(".")) {
        Ok(again) => again == cfg && again.canonical_json() == text,
        Err(_) => false,
    };
    Ok((ok, "parse ∘ serialize is the identity".to_string()))
}

const CHECKS: [(&str, CheckFn); 12] = [
    ("characteristic-residual", characteristic_residual),
    ("arctan-oracle", arctan_oracle),
    ("expansion-rate", expansion_rate),
    ("mutation-free-oracle", mutation_free_oracle),
    ("mass-trap", mass_trap),
    ("steady-fixed-point", steady_fixed_point),
    ("cross-solver", cross_solver),
    ("duhamel-residual", duhamel),
    ("triangle-sanity", triangle_sanity),
    ("cauchy-approximation", cauchy_approximation),
    ("linear-decay", linear_decay),
    ("config-round-trip", config_round_trip),
];

pub fn run_suite() -> Vec<Check> {
    CHECKS
        .iter()
        .map(|&(name, f)| match f() {
            Ok((pass, detail)) => Check { name, pass, detail },
            Err(e) => Check { name, pass: false, detail: format!("error: {e}") },
        })
        .collect()
}
