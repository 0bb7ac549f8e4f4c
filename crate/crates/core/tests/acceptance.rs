//! Acceptance suite: one PASS/FAIL line per criterion, each with its runtime
//! budget. Run with `cargo test -p mutsel-core --test acceptance`.

use std::time::{Duration, Instant};

use mutsel::analysis::{classify, Regime};
use mutsel::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn reference_params(eps: f64) -> ModelParams {
    ModelParams::new(eps, Interval::new(-1.5, 1.5).unwrap(), MutationKernel::gaussian(10.0, true)).unwrap()
}

fn uniform_params(eps: f64) -> ModelParams {
    ModelParams::new(eps, Interval::new(-1.0, 1.0).unwrap(), MutationKernel::uniform()).unwrap()
}

fn grid_for(p: &ModelParams, n: usize) -> Grid {
    build_grid(p.interval(), n).unwrap()
}

/// λ for uniform γ on (-1, 1): λ = 1 - ε + ν², (ε/ν) atan(1/ν) = 1.
/// Frozen from a 40-digit bisection of that scalar equation.
const ARCTAN_ORACLE: [(f64, f64); 5] = [
    (1e-1, 0.920_416_695_089_469_164_74),
    (0.031_622_776_601_683_793_32, 0.970_695_784_037_922_532_53),
    (1e-2, 0.990_241_878_741_207_503_03),
    (0.003_162_277_660_168_379_332, 0.996_862_241_037_061_716_78),
    (1e-3, 0.999_002_462_473_694_456_29),
];

fn criterion_1() -> Outcome {
    let mut worst_f: f64 = 0.0;
    let mut worst_psi: f64 = 0.0;
    for params in [uniform_params as fn(f64) -> ModelParams, reference_params] {
        for eps in [1e-1, 1e-2, 1e-3] {
            let p = params(eps);
            // trapezoid endpoint error is O(h²); the uniform kernel at ε = 0.1 needs h ≤ 5e-4
            let h = (p.cauchy_scale() / 8.0).min(5e-4);
            let n = (p.interval().len() / h).ceil() as usize + 1;
            let grid = grid_for(&p, n);
            let spec = solve_lambda(&p, &grid, &SpectralOptions::default()).unwrap();
            worst_f = worst_f.max((characteristic_f(&p, spec.lambda).unwrap() - 1.0).abs());
            worst_psi = worst_psi.max((grid.integrate(&spec.psi).unwrap() - 1.0).abs());
        }
    }
    outcome(
        worst_f <= 1e-10 && worst_psi <= 1e-8,
        format!("max |F(λ)-1| = {worst_f:.2e} (≤1e-10), max |∫ψ-1| = {worst_psi:.2e} (≤1e-8)"),
    )
}

fn criterion_2() -> Outcome {
    let base = uniform_params(0.1);
    let eps: Vec<f64> = ARCTAN_ORACLE.iter().map(|o| o.0).collect();
    let study = rate_study(&base, &eps).unwrap();
    let oracle_err = study
        .points
        .iter()
        .zip(&ARCTAN_ORACLE)
        .map(|(p, o)| (p.lambda - o.1).abs())
        .fold(0.0, f64::max);
    let pass = (2.5..=3.5).contains(&study.slope) && study.r2 >= 0.98 && oracle_err <= 1e-12;
    outcome(
        pass,
        format!(
            "slope = {:.4} (in [2.5,3.5]), r² = {:.5} (≥0.98), max |λ-oracle| = {oracle_err:.2e} (≤1e-12)",
            study.slope, study.r2
        ),
    )
}

fn eps0_error(model: &Model, f0: &PopulationState, dt: f64) -> f64 {
    let cfg = StepperConfig::new(Scheme::Rk4, dt, 20.0);
    let traj = run(model, f0, &cfg).unwrap();
    traj.snapshots
        .iter()
        .map(|s| {
            let exact = eps0_exact(f0, s.t, model.grid()).unwrap();
            l1_distance(&s.values, &exact.values, model.grid()).unwrap()
        })
        .fold(0.0, f64::max)
}

fn criterion_3() -> Outcome {
    let p = uniform_params(0.0);
    let model = Model::new(p.clone(), grid_for(&p, 2001)).unwrap();
    let f0 = PopulationState::new(0.0, vec![0.1; 2001], model.grid()).unwrap();
    let err = eps0_error(&model, &f0, 1e-3);
    // at dt = 1e-3 the error is already at roundoff, so the order is read
    // off a ladder of coarser steps
    let ladder = [0.025, 0.0125, 0.00625];
    let errs: Vec<f64> = ladder.iter().map(|&dt| eps0_error(&model, &f0, dt)).collect();
    let order = fit_rate(&ladder, &errs).unwrap().slope;
    outcome(
        err <= 1e-4 && order >= 3.7,
        format!("max L¹ error at dt=1e-3 = {err:.2e} (≤1e-4), fitted order on dt∈{ladder:?} = {order:.3} (≥3.7)"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let mut worst_hi = f64::NEG_INFINITY;
    let mut worst_lo = f64::INFINITY;
    for _ in 0..10 {
        let eps = rng.gen_range(1e-3..0.3);
        let a = -rng.gen_range(0.5..2.0);
        let b = rng.gen_range(0.5..2.0);
        let interval = Interval::new(a, b).unwrap();
        let kernel = if rng.gen_bool(0.5) {
            MutationKernel::uniform()
        } else {
            MutationKernel::gaussian(rng.gen_range(0.2..20.0), true)
        };
        let params = ModelParams::new(eps, interval, kernel).unwrap();
        let grid = build_grid(&interval, 401).unwrap();
        let model = Model::new(params, grid).unwrap();
        let raw: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..1.0)).collect();
        let points: Vec<(f64, f64)> = raw.iter().enumerate().map(|(k, &v)| (a + (b - a) * k as f64 / 7.0, v)).collect();
        let shape = InitialCondition::Table { points }.state(model.params(), model.grid()).unwrap();
        let target = rng.gen_range(0.01..1.0);
        let values = shape.values.iter().map(|v| v * target / shape.mass).collect();
        let f0 = PopulationState::new(0.0, values, model.grid()).unwrap();
        let dt = 0.05f64.min(model.stable_dt());
        let traj = run(&model, &f0, &StepperConfig::new(Scheme::Rk4, dt, 60.0)).unwrap();
        for &(_, m) in &traj.mass_series {
            worst_hi = worst_hi.max(m);
            worst_lo = worst_lo.min(m);
        }
    }
    outcome(
        worst_lo >= 0.0 && worst_hi <= 1.0 + 1e-10,
        format!("recorded mass range over 10 configs = [{worst_lo:.6}, {worst_hi:.12}] (⊂ [0, 1+1e-10])"),
    )
}

fn criterion_5() -> Outcome {
    let p = reference_params(0.05);
    let model = Model::new(p.clone(), grid_for(&p, auto_grid_size(&p))).unwrap();
    let f0 = InitialCondition::CauchyShifted { shift: 1.0 }.state(model.params(), model.grid()).unwrap();
    let cfg = StepperConfig::new(Scheme::Rk4, 0.05, 200.0);
    let direct = run(&model, &f0, &cfg).unwrap();
    let composed = h_compose(&model, &f0, &cfg).unwrap();
    let mut cross: f64 = 0.0;
    for (a, b) in direct.snapshots.iter().zip(&composed.trajectory.snapshots) {
        assert_eq!(a.t, b.t);
        cross = cross.max(l1_distance(&a.values, &b.values, model.grid()).unwrap() / a.mass);
    }
    let h_end = composed.h_series.last().unwrap().1;
    let h_rel = (h_end / composed.h_limit() - 1.0).abs();
    outcome(
        cross <= 1e-5 && h_rel <= 1e-4,
        format!(
            "max relative L¹ gap = {cross:.2e} (≤1e-5), |h(200)/(λ/c) - 1| = {h_rel:.2e} (≤1e-4; α·200 = {:.3})",
            (composed.lambda - 0.95) * 200.0
        ),
    )
}

fn criterion_6() -> Outcome {
    let p = reference_params(0.05);
    let model = Model::new(p.clone(), grid_for(&p, auto_grid_size(&p))).unwrap();
    let f0 = InitialCondition::CauchyShifted { shift: 0.5 }.state(model.params(), model.grid()).unwrap();
    let alpha = model.discrete_spectrum().unwrap().alpha;
    let mut cfg = StepperConfig::new(Scheme::Rk4, 0.1, 150.0 / alpha).with_snapshots(vec![]);
    cfg.mass_stride = 100;
    let lin = linear_run(&model, &f0, &cfg).unwrap();
    let fit = fit_exponential(&lin.v_norm_series, 50.0 / alpha, 150.0 / alpha).unwrap();
    let rate = -fit.slope;
    outcome(
        rate >= 0.5 * alpha && rate <= 3.0 * alpha,
        format!("decay rate = {rate:.6e}, α = {alpha:.6e}, ratio = {:.4} (in [0.5, 3])", rate / alpha),
    )
}

struct ReferenceRun {
    model: Model,
    traj: Trajectory,
    curve: ErrorCurve,
    steady: Vec<f64>,
}

fn reference_run() -> ReferenceRun {
    let p = reference_params(1e-2);
    let model = Model::new(p.clone(), grid_for(&p, auto_grid_size(&p))).unwrap();
    let f0 = InitialCondition::CauchyShifted { shift: 1.0 }.state(model.params(), model.grid()).unwrap();
    let mut cfg = StepperConfig::long_horizon(1.75e5);
    let mut snaps = cfg.snapshot_times.clone();
    snaps.extend([10.0, 1e2, 1e3, 1e4, 1e5, 1.5e5]);
    cfg = cfg.with_snapshots(snaps);
    let traj = run(&model, &f0, &cfg).unwrap();
    let spec = model.discrete_spectrum().unwrap();
    let curve = error_curves(&traj, &spec, &f0).unwrap();
    let steady = steady_state(&spec).values;
    ReferenceRun { model, traj, curve, steady }
}

fn criterion_7(run: &ReferenceRun) -> Outcome {
    let c = &run.curve;
    let k3 = c.index_of(1e3).unwrap();
    let k15 = c.index_of(1.5e5).unwrap();
    let last = run.traj.last();
    let steady_norm = run.model.grid().integrate(&run.steady).unwrap();
    let final_gap = l1_distance(&last.values, &run.steady, run.model.grid()).unwrap() / steady_norm;
    let i = c.err_gamma1[k3] < c.err_gamma2[k3];
    let ii = c.err_gamma2[k15] < c.err_gamma1[k15];
    let iii = final_gap <= 0.05;
    let (w3, _) = classify(c.err_gamma1[k3], c.err_gamma2[k3], run.traj.snapshot_at(1e3).unwrap().mass);
    outcome(
        i && ii && iii && w3 == Regime::Gaussian,
        format!(
            "t=1e3: e1={:.3e} < e2={:.3e} [{i}]; t=1.5e5: e2={:.3e} < e1={:.3e} [{ii}]; final ‖f-λψ‖/‖λψ‖ = {final_gap:.2e} (≤0.05) [{iii}]",
            c.err_gamma1[k3], c.err_gamma2[k3], c.err_gamma2[k15], c.err_gamma1[k15]
        ),
    )
}

fn criterion_8() -> Outcome {
    let dist = |eps: f64| {
        let p = reference_params(eps);
        let h = p.cauchy_scale() / 8.0;
        let grid = grid_for(&p, (p.interval().len() / h).ceil() as usize + 1);
        let spec = solve_lambda(&p, &grid, &SpectralOptions::default()).unwrap();
        let steady = steady_state(&spec).values;
        let g2 = gamma2(&p, &grid).unwrap().values;
        l1_distance(&steady, &g2, &grid).unwrap()
    };
    let (d2, d3) = (dist(1e-2), dist(1e-3));
    outcome(
        d2 / d3 >= 2.0,
        format!("‖λψ-Γ₂‖₁: ε=1e-2 → {d2:.4e}, ε=1e-3 → {d3:.4e}, ratio = {:.3} (≥2)", d2 / d3),
    )
}

fn criterion_9() -> Outcome {
    let eps = 1e-3;
    let p = reference_params(eps);
    let model = Model::new(p.clone(), grid_for(&p, auto_grid_size(&p))).unwrap();
    let f0 = InitialCondition::CauchyShifted { shift: 1.0 }.state(model.params(), model.grid()).unwrap();
    let cfg = StepperConfig::new(Scheme::Rk4, 0.05, 1e3).with_snapshots(vec![1e2, 1e3]);
    let traj = run(&model, &f0, &cfg).unwrap();
    let err = |t: f64| {
        let s = traj.snapshot_at(t).unwrap();
        let g1 = gamma1(&f0, t, model.grid()).unwrap();
        l1_distance(&s.values, &g1.values, model.grid()).unwrap()
    };
    let shape = |c: f64, t: f64| c * (1.0 / t.sqrt() + eps * t.powf(1.5) * (c * eps * t).exp());
    let (e2, e3) = (err(1e2), err(1e3));
    // shape(C, 100) is increasing in C; bisect for the calibration
    let (mut lo, mut hi) = (0.0, 1.0);
    while shape(hi, 1e2) < e2 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shape(mid, 1e2) < e2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = hi;
    let bound = shape(c, 1e3);
    outcome(
        e3 <= 3.0 * bound,
        format!("err(1e2) = {e2:.4e}, C = {c:.4e}, err(1e3) = {e3:.4e} ≤ 3·bound = {:.4e}", 3.0 * bound),
    )
}

fn criterion_10(run: &ReferenceRun) -> Outcome {
    let r10 = duhamel_residual_at(&run.traj, 10.0).unwrap();
    let r3 = duhamel_residual_at(&run.traj, 1e3).unwrap();
    outcome(
        r10 <= 1e-3 && r3 <= 1e-3,
        format!("relative Duhamel defect: t=10 → {r10:.2e}, t=1e3 → {r3:.2e} (≤1e-3)"),
    )
}

fn timed<F: FnOnce() -> Outcome>(f: F) -> (Outcome, Duration) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed())
}

fn main() {
    let mut failures = Vec::new();
    let mut report = |id: u32, budget: Duration, (o, took): (Outcome, Duration)| {
        let in_time = took <= budget;
        let pass = o.pass && in_time;
        println!(
            "criterion {id:>2}: {} | {} | runtime {:.2?} (budget {:?}){}",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took,
            budget,
            if in_time { "" } else { " OVER BUDGET" }
        );
        if !pass {
            failures.push(id);
        }
    };
    report(1, Duration::from_secs(1), timed(criterion_1));
    report(2, Duration::from_secs(1), timed(criterion_2));
    report(3, Duration::from_secs(30), timed(criterion_3));
    report(4, Duration::from_secs(60), timed(criterion_4));
    report(5, Duration::from_secs(60), timed(criterion_5));
    report(6, Duration::from_secs(60), timed(criterion_6));

    let start = Instant::now();
    let reference = reference_run();
    let run_time = start.elapsed();
    let (o7, t7) = timed(|| criterion_7(&reference));
    report(7, Duration::from_secs(15 * 60), (o7, run_time + t7));
    report(8, Duration::from_secs(5), timed(criterion_8));
    report(9, Duration::from_secs(10 * 60), timed(criterion_9));
    report(10, Duration::from_secs(5 * 60), timed(|| criterion_10(&reference)));

    if failures.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failures:?}");
        std::process::exit(1);
    }
}
