//! Particle swarm with inertia weight, velocity clamping and bound clamping.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate_batch, stream_rng, Execution, Objective, OptResult, SearchSpace, Tracker};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoConfig {
    pub pop_size: usize,
    pub max_iter: usize,
    /// Cognitive coefficient.
    pub c1: f64,
    /// Social coefficient.
    pub c2: f64,
    /// Inertia weight; 1.0 gives the plain velocity update.
    pub inertia: f64,
    /// Maximum speed per dimension as a fraction of that dimension's range.
    pub v_max: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self { pop_size: 50, max_iter: 100, c1: 2.0, c2: 2.0, inertia: 0.72, v_max: 0.2, seed: 0 }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 {
            return Err(invalid("pop_size", "must be >= 2"));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return Err(invalid("c1", "c1 and c2 must be >= 0"));
        }
        if !(self.v_max > 0.0 && self.v_max <= 1.0) {
            return Err(invalid("v_max", format!("must be in (0, 1], got {}", self.v_max)));
        }
        if !self.inertia.is_finite() {
            return Err(invalid("inertia", "must be finite"));
        }
        Ok(())
    }
}

/// Velocity update for one particle:
/// `v <- w v + c1 r1 (p_best - x) + c2 r2 (g_best - x)`, clamped to `+-v_lim`.
pub(crate) fn update_velocity<R: Rng>(
    v: &mut [f64],
    x: &[f64],
    p_best: &[f64],
    g_best: &[f64],
    cfg: &PsoConfig,
    v_lim: &[f64],
    rng: &mut R,
) {
    for d in 0..v.len() {
        let r1: f64 = rng.gen();
        let r2: f64 = rng.gen();
        let next = cfg.inertia * v[d] + cfg.c1 * r1 * (p_best[d] - x[d]) + cfg.c2 * r2 * (g_best[d] - x[d]);
        v[d] = next.clamp(-v_lim[d], v_lim[d]);
    }
}

pub fn pso_run(space: &SearchSpace, cfg: &PsoConfig, objective: &dyn Objective, exec: Execution) -> Result<OptResult> {
    cfg.validate()?;
    let dim = space.dim();
    let v_lim: Vec<f64> = (0..dim).map(|d| cfg.v_max * space.range(d)).collect();

    let mut xs = Vec::with_capacity(cfg.pop_size);
    let mut vs = Vec::with_capacity(cfg.pop_size);
    for i in 0..cfg.pop_size {
        let mut rng = stream_rng(cfg.seed, 0, i);
        xs.push(space.initial(i, &mut rng));
        vs.push((0..dim).map(|d| rng.gen_range(-v_lim[d]..=v_lim[d])).collect::<Vec<f64>>());
    }

    let mut tracker = Tracker::new(dim);
    let fs = evaluate_batch(objective, &xs, exec);
    tracker.observe(&xs, &fs);
    let mut p_best = xs.clone();
    let mut p_best_f = fs;
    let mut g = argmin(&p_best_f);
    let mut g_best = p_best[g].clone();
    let mut g_best_f = p_best_f[g];

    for iter in 1..=cfg.max_iter {
        for i in 0..cfg.pop_size {
            let mut rng = stream_rng(cfg.seed, iter, i);
            update_velocity(&mut vs[i], &xs[i], &p_best[i], &g_best, cfg, &v_lim, &mut rng);
            for d in 0..dim {
                xs[i][d] = (xs[i][d] + vs[i][d]).clamp(space.lower[d], space.upper[d]);
            }
        }
        let fs = evaluate_batch(objective, &xs, exec);
        tracker.observe(&xs, &fs);
        for i in 0..cfg.pop_size {
            if fs[i] < p_best_f[i] {
                p_best_f[i] = fs[i];
                p_best[i].clone_from(&xs[i]);
            }
        }
        g = argmin(&p_best_f);
        if p_best_f[g] < g_best_f {
            g_best_f = p_best_f[g];
            g_best.clone_from(&p_best[g]);
        }
        tracker.end_iteration(iter);
    }
    Ok(tracker.finish())
}

fn argmin(fs: &[f64]) -> usize {
    let mut best = 0;
    for (i, f) in fs.iter().enumerate() {
        if *f < fs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::testfn::sphere;

    #[test]
    fn converged_particle_keeps_velocity_without_inertia_damping() {
        let cfg = PsoConfig { inertia: 1.0, ..PsoConfig::default() };
        let x = [0.3, -0.2, 0.1];
        let mut v = [0.05, -0.01, 0.02];
        let mut rng = stream_rng(3, 1, 1);
        update_velocity(&mut v, &x, &x, &x, &cfg, &[1.0; 3], &mut rng);
        assert_eq!(v, [0.05, -0.01, 0.02]);
    }

    #[test]
    fn velocity_is_clamped() {
        let cfg = PsoConfig::default();
        let mut v = [0.0; 2];
        let mut rng = stream_rng(3, 1, 1);
        update_velocity(&mut v, &[0.0, 0.0], &[10.0, 10.0], &[-10.0, 10.0], &cfg, &[0.5, 0.5], &mut rng);
        assert!(v.iter().all(|x| x.abs() <= 0.5));
    }

    #[test]
    fn history_is_elitist_and_positions_bounded() {
        let space = SearchSpace::cube(3, -5.0, 5.0).unwrap();
        let obj = |x: &[f64]| {
            assert!(x.iter().all(|v| (-5.0..=5.0).contains(v)));
            sphere(x)
        };
        let cfg = PsoConfig { max_iter: 40, seed: 11, ..PsoConfig::default() };
        let r = pso_run(&space, &cfg, &obj, Execution::Serial).unwrap();
        assert_eq!(r.history.len(), 40);
        assert!(r.history.windows(2).all(|w| w[1].best_fitness <= w[0].best_fitness));
        assert_eq!(r.evaluations, 50 * 41);
    }

    #[test]
    fn injected_point_is_evaluated_first() {
        let space = SearchSpace::cube(3, -5.0, 5.0).unwrap().with_initial_point(vec![0.0; 3]);
        let cfg = PsoConfig { max_iter: 1, ..PsoConfig::default() };
        let r = pso_run(&space, &cfg, &sphere, Execution::Serial).unwrap();
        assert_eq!(r.best_fitness, 0.0);
    }

    #[test]
    fn rejects_bad_config() {
        let space = SearchSpace::cube(1, 0.0, 1.0).unwrap();
        let cfg = PsoConfig { pop_size: 1, ..PsoConfig::default() };
        assert!(pso_run(&space, &cfg, &sphere, Execution::Serial).is_err());
    }
}
