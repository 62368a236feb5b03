use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use crossreg::control_loop::Controller;
use crossreg::optim::{Algorithm, Execution, PsoConfig};
use crossreg::tuning::{reduced_case, tune_weights};

fn executions() -> [(&'static str, Execution); 2] {
    [("parallel", Execution::Parallel), ("serial", Execution::Serial)]
}

fn tuning_iteration(c: &mut Criterion) {
    let (params, scenario, loop_cfg) = reduced_case();
    let controller = Controller::default_fuzzy();
    let algo = Algorithm::Pso(PsoConfig { max_iter: 1, ..PsoConfig::default() });
    let mut group = c.benchmark_group("pso_iteration_reduced_plant");
    group.sample_size(10);
    for (name, exec) in executions() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| tune_weights(&algo, std::slice::from_ref(&scenario), &params, &loop_cfg, &controller, exec).unwrap())
        });
    }
    group.finish();
}

fn sphere_run(c: &mut Criterion) {
    let space = crossreg::optim::SearchSpace::cube(3, -5.0, 5.0).unwrap();
    let mut group = c.benchmark_group("sphere_full_run");
    for algo in ["pso", "ica", "aco"] {
        let algo = Algorithm::from_name(algo).unwrap();
        for (name, exec) in executions() {
            group.bench_function(BenchmarkId::new(algo.name(), name), |b| {
                b.iter(|| algo.run(&space, &crossreg::optim::testfn::sphere, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, tuning_iteration, sphere_run);
criterion_main!(benches);
