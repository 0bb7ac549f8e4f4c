use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use mutsel::{run, solve_lambda, step, Scheme, SpectralOptions, StepperConfig};
use mutsel_bench::{reference_model, reference_params};

fn eigenvalue(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_lambda");
    for eps in [1e-1, 1e-2, 1e-3] {
        let params = reference_params(eps).unwrap();
        let grid = mutsel::build_grid(params.interval(), 1501).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(eps), &eps, |b, _| {
            b.iter(|| solve_lambda(black_box(&params), &grid, &SpectralOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn steppers(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for n in [1501, 12001] {
        let (model, f0) = reference_model(1e-2, n).unwrap();
        for (name, scheme, dt) in [("rk4", Scheme::Rk4, 0.05), ("exp-euler", Scheme::ExponentialEuler, 0.5)] {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| step(&model, black_box(&f0), scheme, dt).unwrap())
            });
        }
    }
    group.finish();
}

fn short_run(c: &mut Criterion) {
    let (model, f0) = reference_model(1e-2, 1501).unwrap();
    let cfg = StepperConfig::new(Scheme::Rk4, 0.05, 50.0);
    c.bench_function("run rk4 t=50 n=1501", |b| b.iter(|| run(&model, black_box(&f0), &cfg).unwrap()));
}

criterion_group!(benches, eigenvalue, steppers, short_run);
criterion_main!(benches);
