//! Weight tuning: the regulation fitness and its minimization over the
//! weight simplex.

use crate::control_loop::{Controller, LoopConfig, WeightVector};
use crate::error::{invalid, Result};
use crate::optim::{Algorithm, Execution, Objective, OptResult, SearchSpace};
use crate::plant::{derive_default_params, ConverterParams, DisturbanceEvent, NUM_OUTPUTS};
use crate::scenario::{regulation_percent, Scenario};

/// Sum over rails of the relative deviation of the windowed mean output from
/// its reference, at each scenario's last snapshot, averaged over scenarios.
///
/// This is the total regulation at that snapshot divided by 100. Any
/// simulation failure yields `+inf` so a candidate is rejected rather than
/// aborting the search.
pub fn regulation_fitness(
    weights: &WeightVector,
    scenarios: &[Scenario],
    params: &ConverterParams,
    loop_cfg: &LoopConfig,
    controller: &Controller,
) -> f64 {
    if scenarios.is_empty() {
        return f64::INFINITY;
    }
    let refs = params.references();
    let mut total = 0.0;
    for sc in scenarios {
        let t_snap = sc.last_snapshot();
        let Ok(trace) = sc.simulate(params, weights, controller, loop_cfg, Some(t_snap)) else {
            return f64::INFINITY;
        };
        for (k, v_ref) in refs.iter().enumerate() {
            match regulation_percent(&trace, k + 1, *v_ref, t_snap, sc.window) {
                Ok(pct) => total += pct / 100.0,
                Err(_) => return f64::INFINITY,
            }
        }
    }
    total / scenarios.len() as f64
}

/// The fitness seen by an optimizer: positions in `[0, 1]^3` are mapped onto
/// the simplex before simulation.
pub struct WeightObjective<'a> {
    pub scenarios: &'a [Scenario],
    pub params: &'a ConverterParams,
    pub loop_cfg: &'a LoopConfig,
    pub controller: &'a Controller,
}

impl Objective for WeightObjective<'_> {
    fn evaluate(&self, x: &[f64]) -> f64 {
        regulation_fitness(&WeightVector::from_position(x), self.scenarios, self.params, self.loop_cfg, self.controller)
    }
}

/// Search space for the weights with the uniform vector injected.
pub fn weight_space() -> SearchSpace {
    SearchSpace::cube(NUM_OUTPUTS, 0.0, 1.0)
        .expect("unit cube is a valid space")
        .with_initial_point(vec![1.0 / 3.0; NUM_OUTPUTS])
}

/// Tunes the weights with `algo` (its own seed) and returns the normalized
/// best weights with the run record.
pub fn tune_weights(
    algo: &Algorithm,
    scenarios: &[Scenario],
    params: &ConverterParams,
    loop_cfg: &LoopConfig,
    controller: &Controller,
    exec: Execution,
) -> Result<(WeightVector, OptResult)> {
    if scenarios.is_empty() {
        return Err(invalid("scenarios", "no tuning scenarios"));
    }
    for sc in scenarios {
        sc.validate()?;
    }
    params.validate()?;
    loop_cfg.validate()?;
    let objective = WeightObjective { scenarios, params, loop_cfg, controller };
    let run = algo.run(&weight_space(), &objective, exec)?;
    Ok((WeightVector::from_position(&run.best_position), run))
}

/// Every point `(i, j, n - i - j) / n` of the weight simplex.
pub fn simplex_grid(n: usize) -> Vec<WeightVector> {
    let mut out = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for i in 0..=n {
        for j in 0..=(n - i) {
            let raw = [i as f64, j as f64, (n - i - j) as f64].map(|v| v / n as f64);
            out.push(WeightVector::new(raw).expect("grid point lies on the simplex"));
        }
    }
    out
}

/// A cheap tuning problem for brute-force cross-checks: the default plant
/// with every L and C quartered, a coarser integrator step and an 8 ms run
/// with the +5 V load halved at 5 ms.
pub fn reduced_case() -> (ConverterParams, Scenario, LoopConfig) {
    let mut params = derive_default_params();
    for o in &mut params.outputs {
        o.inductance *= 0.25;
        o.capacitance *= 0.25;
    }
    let mut sc = Scenario::new("fast_load5", 28.0, vec![DisturbanceEvent::load_scale(5e-3, 1, 0.5)]);
    sc.snapshot_times = vec![4.5e-3, 8e-3];
    sc.window = 1e-3;
    sc.duration = 8e-3;
    (params, sc, LoopConfig { dt: 5e-6, ..LoopConfig::default() })
}
