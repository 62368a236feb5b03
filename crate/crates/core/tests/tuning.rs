use crossreg::control_loop::{Controller, LoopConfig, WeightVector};
use crossreg::optim::{Algorithm, Execution, IcaConfig, Objective, PsoConfig};
use crossreg::plant::derive_default_params;
use crossreg::scenario::builtin_scenarios;
use crossreg::tuning::{regulation_fitness, reduced_case, simplex_grid, tune_weights, WeightObjective};
use proptest::prelude::*;

fn small_pso(seed: u64) -> Algorithm {
    Algorithm::Pso(PsoConfig { pop_size: 8, max_iter: 4, seed, ..PsoConfig::default() })
}

#[test]
fn pso_matches_brute_force_grid_on_reduced_case() {
    let (p, sc, cfg) = reduced_case();
    let c = Controller::default_fuzzy();
    let scs = std::slice::from_ref(&sc);
    let grid_min = simplex_grid(50)
        .iter()
        .map(|k| regulation_fitness(k, scs, &p, &cfg, &c))
        .fold(f64::INFINITY, f64::min);
    let (_, run) = tune_weights(&Algorithm::from_name("pso").unwrap(), scs, &p, &cfg, &c, Execution::Parallel).unwrap();
    assert!(run.best_fitness <= 1.05 * grid_min, "{} vs {}", run.best_fitness, grid_min);
}

#[test]
fn tuned_is_never_worse_than_uniform() {
    let (p, sc, cfg) = reduced_case();
    let c = Controller::default_fuzzy();
    let scs = std::slice::from_ref(&sc);
    let uniform = regulation_fitness(&WeightVector::uniform(), scs, &p, &cfg, &c);
    for seed in 0..3 {
        let (k, run) = tune_weights(&small_pso(seed), scs, &p, &cfg, &c, Execution::Parallel).unwrap();
        assert!(run.best_fitness <= uniform);
        assert_eq!(regulation_fitness(&k, scs, &p, &cfg, &c), run.best_fitness);
    }
}

#[test]
fn same_seed_same_result_in_parallel_and_serial() {
    let (p, sc, cfg) = reduced_case();
    let c = Controller::default_fuzzy();
    let scs = std::slice::from_ref(&sc);
    let ica = Algorithm::Ica(IcaConfig { n_colonies: 10, n_imperialists: 3, max_iter: 3, seed: 4, ..IcaConfig::default() });
    for algo in [small_pso(9), ica] {
        let a = tune_weights(&algo, scs, &p, &cfg, &c, Execution::Serial).unwrap();
        let b = tune_weights(&algo, scs, &p, &cfg, &c, Execution::Parallel).unwrap();
        let again = tune_weights(&algo, scs, &p, &cfg, &c, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(b, again);
    }
}

#[test]
fn tuning_on_several_scenarios_averages_them() {
    let p = derive_default_params();
    let cfg = LoopConfig::default();
    let c = Controller::default_fuzzy();
    let all = builtin_scenarios();
    let k = WeightVector::new([0.5, 0.3, 0.2]).unwrap();
    let mean: f64 = all.iter().map(|s| regulation_fitness(&k, std::slice::from_ref(s), &p, &cfg, &c)).sum::<f64>() / 3.0;
    assert!((regulation_fitness(&k, &all, &p, &cfg, &c) - mean).abs() < 1e-12);
}

struct Recorder<'a>(WeightObjective<'a>, std::sync::Mutex<Vec<[f64; 3]>>);

impl Objective for Recorder<'_> {
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.1.lock().unwrap().push(WeightVector::from_position(x).as_array());
        self.0.evaluate(x)
    }
}

#[test]
fn optimizer_positions_reach_fitness_on_the_simplex() {
    let (p, sc, cfg) = reduced_case();
    let c = Controller::default_fuzzy();
    let rec = Recorder(
        WeightObjective { scenarios: std::slice::from_ref(&sc), params: &p, loop_cfg: &cfg, controller: &c },
        Default::default(),
    );
    small_pso(1).run(&crossreg::tuning::weight_space(), &rec, Execution::Serial).unwrap();
    let seen = rec.1.into_inner().unwrap();
    assert_eq!(seen.len(), 8 * 5);
    assert!(seen.contains(&[1.0 / 3.0; 3]));
    for k in seen {
        assert!(k.iter().all(|v| *v >= 0.0));
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn positions_map_onto_the_simplex(x in prop::array::uniform3(0.0f64..=1.0)) {
        let k = WeightVector::from_position(&x).as_array();
        prop_assert!(k.iter().all(|v| *v >= 0.0));
        prop_assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fitness_ignores_weight_scale(k in prop::array::uniform3(0.05f64..1.0), s in 0.1f64..10.0) {
        let (p, sc, cfg) = reduced_case();
        let c = Controller::default_fuzzy();
        let scs = std::slice::from_ref(&sc);
        let f1 = regulation_fitness(&WeightVector::new(k).unwrap(), scs, &p, &cfg, &c);
        let f2 = regulation_fitness(&WeightVector::new(k.map(|v| v * s)).unwrap(), scs, &p, &cfg, &c);
        prop_assert!((f1 - f2).abs() <= 1e-9 * f1);
    }
}
