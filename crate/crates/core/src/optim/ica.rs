//! Imperialist competitive algorithm.
//!
//! Countries are split into empires (one imperialist plus colonies). Each
//! iteration colonies assimilate toward their imperialist, some revolt to a
//! random position, a colony that beats its imperialist takes its place, and
//! the weakest empire loses its weakest colony to an empire drawn by power.
//! Empires left without colonies collapse; their imperialist joins another
//! empire. The run stops at `max_iter` or when a single empire remains.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate_batch, power_weights, roulette, stream_rng, Execution, Objective, OptResult, SearchSpace, Tracker};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcaConfig {
    pub n_colonies: usize,
    pub n_imperialists: usize,
    pub max_iter: usize,
    /// Assimilation step scale; steps are `U(0, beta) * distance`.
    pub beta: f64,
    pub revolution_prob: f64,
    /// Weight of the mean colony cost in an empire's total cost.
    pub zeta: f64,
    pub seed: u64,
}

impl Default for IcaConfig {
    fn default() -> Self {
        Self {
            n_colonies: 50,
            n_imperialists: 20,
            max_iter: 100,
            beta: 2.0,
            revolution_prob: 0.1,
            zeta: 0.02,
            seed: 0,
        }
    }
}

impl IcaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_imperialists < 1 {
            return Err(invalid("n_imperialists", "must be >= 1"));
        }
        if self.n_colonies < self.n_imperialists {
            return Err(invalid("n_colonies", "must be >= n_imperialists"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.revolution_prob) {
            return Err(invalid("revolution_prob", "must be in [0, 1]"));
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return Err(invalid("zeta", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Country {
    x: Vec<f64>,
    cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Empire {
    imperialist: Country,
    colonies: Vec<Country>,
}

impl Empire {
    fn total_cost(&self, zeta: f64) -> f64 {
        if self.colonies.is_empty() {
            self.imperialist.cost
        } else {
            let mean = self.colonies.iter().map(|c| c.cost).sum::<f64>() / self.colonies.len() as f64;
            self.imperialist.cost + zeta * mean
        }
    }

    /// Swaps roles if the best colony is cheaper than the imperialist.
    fn promote_best_colony(&mut self) {
        let best = self
            .colonies
            .iter()
            .enumerate()
            .filter(|(_, c)| c.cost < self.imperialist.cost)
            .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
            .map(|(i, _)| i);
        if let Some(i) = best {
            std::mem::swap(&mut self.imperialist, &mut self.colonies[i]);
        }
    }

    fn weakest_colony(&self) -> Option<usize> {
        self.colonies
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
            .map(|(i, _)| i)
    }
}

pub(crate) struct IcaState<'a> {
    space: &'a SearchSpace,
    cfg: &'a IcaConfig,
    objective: &'a dyn Objective,
    exec: Execution,
    empires: Vec<Empire>,
    tracker: Tracker,
}

/// Candidate index reserved for the empire-level random draws.
const EMPIRE_STREAM: usize = u32::MAX as usize;

impl<'a> IcaState<'a> {
    pub fn new(space: &'a SearchSpace, cfg: &'a IcaConfig, objective: &'a dyn Objective, exec: Execution) -> Self {
        let n_total = cfg.n_imperialists + cfg.n_colonies;
        let xs: Vec<Vec<f64>> = (0..n_total)
            .map(|i| space.initial(i, &mut stream_rng(cfg.seed, 0, i)))
            .collect();
        let fs = evaluate_batch(objective, &xs, exec);
        let mut tracker = Tracker::new(space.dim());
        tracker.observe(&xs, &fs);

        let mut countries: Vec<Country> = xs.into_iter().zip(fs).map(|(x, cost)| Country { x, cost }).collect();
        countries.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        let colonies = countries.split_off(cfg.n_imperialists);
        let mut empires: Vec<Empire> = countries
            .into_iter()
            .map(|imperialist| Empire { imperialist, colonies: Vec::new() })
            .collect();

        let costs: Vec<f64> = empires.iter().map(|e| e.imperialist.cost).collect();
        let weights = power_weights(&costs);
        let mut rng = stream_rng(cfg.seed, 0, EMPIRE_STREAM);
        for colony in colonies {
            let k = roulette(&weights, &mut rng);
            empires[k].colonies.push(colony);
        }
        Self { space, cfg, objective, exec, empires, tracker }
    }

    #[cfg(test)]
    fn empire_count(&self) -> usize {
        self.empires.len()
    }

    pub fn country_count(&self) -> usize {
        self.empires.iter().map(|e| 1 + e.colonies.len()).sum()
    }

    /// One iteration; returns false once a single empire remains.
    pub fn step(&mut self, iter: usize) -> bool {
        let cfg = self.cfg;
        let space = self.space;

        let mut moved: Vec<Vec<f64>> = Vec::with_capacity(self.country_count());
        let mut idx = 0;
        for empire in &self.empires {
            for colony in &empire.colonies {
                let mut rng = stream_rng(cfg.seed, iter, idx);
                idx += 1;
                let x = if rng.gen_bool(cfg.revolution_prob) {
                    space.sample_uniform(&mut rng)
                } else {
                    let imp = &empire.imperialist.x;
                    colony
                        .x
                        .iter()
                        .zip(imp)
                        .enumerate()
                        .map(|(d, (c, p))| {
                            let step = rng.gen_range(0.0..cfg.beta) * (p - c);
                            (c + step).clamp(space.lower[d], space.upper[d])
                        })
                        .collect()
                };
                moved.push(x);
            }
        }

        let fs = evaluate_batch(self.objective, &moved, self.exec);
        self.tracker.observe(&moved, &fs);
        let mut it = moved.into_iter().zip(fs);
        for empire in &mut self.empires {
            for colony in &mut empire.colonies {
                let (x, cost) = it.next().expect("one evaluation per colony");
                *colony = Country { x, cost };
            }
            empire.promote_best_colony();
        }

        let mut rng = stream_rng(cfg.seed, iter, EMPIRE_STREAM);
        self.compete(&mut rng);
        self.collapse_empty(&mut rng);
        self.tracker.end_iteration(iter);
        self.empires.len() > 1
    }

    fn total_costs(&self) -> Vec<f64> {
        self.empires.iter().map(|e| e.total_cost(self.cfg.zeta)).collect()
    }

    /// Gives `country` to an empire (other than `exclude`) drawn by power.
    fn annex<R: Rng>(&mut self, country: Country, exclude: Option<usize>, rng: &mut R) {
        let mut weights = power_weights(&self.total_costs());
        if let Some(k) = exclude {
            weights[k] = 0.0;
        }
        if weights.iter().all(|w| *w <= 0.0) {
            for (i, w) in weights.iter_mut().enumerate() {
                *w = if Some(i) == exclude { 0.0 } else { 1.0 };
            }
        }
        let winner = roulette(&weights, rng);
        let empire = &mut self.empires[winner];
        empire.colonies.push(country);
        empire.promote_best_colony();
    }

    fn compete<R: Rng>(&mut self, rng: &mut R) {
        if self.empires.len() < 2 {
            return;
        }
        let weakest = self
            .total_costs()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("at least two empires");
        if let Some(c) = self.empires[weakest].weakest_colony() {
            let colony = self.empires[weakest].colonies.swap_remove(c);
            self.annex(colony, Some(weakest), rng);
        }
    }

    fn collapse_empty<R: Rng>(&mut self, rng: &mut R) {
        while self.empires.len() > 1 {
            let Some(k) = self.empires.iter().rposition(|e| e.colonies.is_empty()) else {
                break;
            };
            let empire = self.empires.remove(k);
            self.annex(empire.imperialist, None, rng);
        }
    }

    pub fn finish(self) -> OptResult {
        self.tracker.finish()
    }
}

pub fn ica_run(space: &SearchSpace, cfg: &IcaConfig, objective: &dyn Objective, exec: Execution) -> Result<OptResult> {
    cfg.validate()?;
    let mut state = IcaState::new(space, cfg, objective, exec);
    for iter in 1..=cfg.max_iter {
        if !state.step(iter) {
            break;
        }
    }
    Ok(state.finish())
}
