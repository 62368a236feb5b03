//! Population-based minimizers sharing one contract: a box-bounded search
//! space, an objective that may be evaluated concurrently, and a per-iteration
//! best-so-far history.
//!
//! Every random draw comes from a generator stream keyed by
//! `(seed, iteration, candidate)`, and candidate fitnesses are reduced in
//! index order, so serial and parallel evaluation give identical results.

pub mod acor;
pub mod ica;
pub mod pso;
pub mod testfn;

use std::io::{self, Write};

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use acor::{acor_run, AcorConfig};
pub use ica::{ica_run, IcaConfig};
pub use pso::{pso_run, PsoConfig};

/// Box constraints plus points that must be part of the initial population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub initial_points: Vec<Vec<f64>>,
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(invalid("bounds", "lower and upper must be non-empty and of equal length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(invalid("bounds", "need finite lower < upper in every dimension"));
        }
        Ok(Self { lower, upper, initial_points: Vec::new() })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// Adds a point to seed every initial population with (clamped to the box).
    pub fn with_initial_point(mut self, x: Vec<f64>) -> Self {
        let x = self.clamp(x);
        self.initial_points.push(x);
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn range(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn clamp(&self, mut x: Vec<f64>) -> Vec<f64> {
        for (d, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[d], self.upper[d]);
        }
        x
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(d, v)| self.lower[d] <= *v && *v <= self.upper[d])
    }

    pub(crate) fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim()).map(|d| rng.gen_range(self.lower[d]..=self.upper[d])).collect()
    }

    /// Initial point `i`: an injected point when available, else uniform.
    pub(crate) fn initial<R: Rng>(&self, i: usize, rng: &mut R) -> Vec<f64> {
        match self.initial_points.get(i) {
            Some(x) => x.clone(),
            None => self.sample_uniform(rng),
        }
    }
}

/// Function to minimize. Non-finite values are treated as `+inf`.
pub trait Objective: Sync {
    fn evaluate(&self, x: &[f64]) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// How a batch of candidates is evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// Rayon data-parallel when the `parallel` feature is enabled, serial
    /// otherwise.
    #[default]
    Parallel,
    Serial,
}

pub(crate) fn evaluate_batch(objective: &dyn Objective, xs: &[Vec<f64>], exec: Execution) -> Vec<f64> {
    let sanitize = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            xs.par_iter().map(|x| sanitize(objective.evaluate(x))).collect()
        }
        _ => xs.iter().map(|x| sanitize(objective.evaluate(x))).collect(),
    }
}

/// Generator for one candidate in one iteration.
pub(crate) fn stream_rng(seed: u64, iteration: usize, candidate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | (candidate as u64 & 0xffff_ffff));
    rng
}

/// Index drawn with probability proportional to `weights`; uniform when all
/// weights are zero.
pub(crate) fn roulette<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return rng.gen_range(0..weights.len());
    }
    let mut r = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

/// Selection weights for minimization: `max(cost) - cost`, with non-finite
/// costs ranked below the worst finite one.
pub(crate) fn power_weights(costs: &[f64]) -> Vec<f64> {
    let finite_max = costs.iter().copied().filter(|c| c.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let worst = if finite_max.is_finite() { finite_max + 1.0 + finite_max.abs() } else { 1.0 };
    let capped: Vec<f64> = costs.iter().map(|&c| if c.is_finite() { c } else { worst }).collect();
    let max = capped.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    capped.iter().map(|c| max - c).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub best_fitness: f64,
    /// Cumulative objective evaluations.
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub history: Vec<IterationRecord>,
    /// First iteration whose best fitness is within 1% of the final value.
    pub convergence_iter: usize,
    pub evaluations: usize,
}

pub const HISTORY_CSV_HEADER: &str = "iter,best_fitness,evals";

impl OptResult {
    pub fn best_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.best_fitness).collect()
    }

    pub fn write_history_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{HISTORY_CSV_HEADER}")?;
        for r in &self.history {
            writeln!(w, "{},{:.12e},{}", r.iter, r.best_fitness, r.evals)?;
        }
        Ok(())
    }
}

/// Best-so-far bookkeeping shared by the three algorithms.
#[derive(Debug, Clone)]
pub(crate) struct Tracker {
    best_position: Vec<f64>,
    best_fitness: f64,
    evaluations: usize,
    history: Vec<IterationRecord>,
    seen: bool,
}

impl Tracker {
    pub fn new(dim: usize) -> Self {
        Self {
            best_position: vec![0.0; dim],
            best_fitness: f64::INFINITY,
            evaluations: 0,
            history: Vec::new(),
            seen: false,
        }
    }

    pub fn observe(&mut self, xs: &[Vec<f64>], fs: &[f64]) {
        self.evaluations += xs.len();
        for (x, &f) in xs.iter().zip(fs) {
            if f < self.best_fitness || !self.seen {
                self.seen = true;
                self.best_fitness = f;
                self.best_position.clone_from(x);
            }
        }
    }

    pub fn end_iteration(&mut self, iter: usize) {
        self.history.push(IterationRecord { iter, best_fitness: self.best_fitness, evals: self.evaluations });
    }

    pub fn finish(self) -> OptResult {
        let final_best = self.best_fitness;
        let tol = 0.01 * final_best.abs();
        let convergence_iter = self
            .history
            .iter()
            .find(|r| r.best_fitness - final_best <= tol)
            .map_or(0, |r| r.iter);
        OptResult {
            best_position: self.best_position,
            best_fitness: self.best_fitness,
            history: self.history,
            convergence_iter,
            evaluations: self.evaluations,
        }
    }
}

/// One of the three optimizers with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "lowercase")]
pub enum Algorithm {
    Ica(IcaConfig),
    Pso(PsoConfig),
    Aco(AcorConfig),
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ica(_) => "ica",
            Algorithm::Pso(_) => "pso",
            Algorithm::Aco(_) => "aco",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "ica" => Some(Algorithm::Ica(IcaConfig::default())),
            "pso" => Some(Algorithm::Pso(PsoConfig::default())),
            "aco" | "acor" => Some(Algorithm::Aco(AcorConfig::default())),
            _ => None,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Algorithm::Ica(c) => c.seed,
            Algorithm::Pso(c) => c.seed,
            Algorithm::Aco(c) => c.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            Algorithm::Ica(c) => c.seed = seed,
            Algorithm::Pso(c) => c.seed = seed,
            Algorithm::Aco(c) => c.seed = seed,
        }
        self
    }

    pub fn run(&self, space: &SearchSpace, objective: &dyn Objective, exec: Execution) -> Result<OptResult> {
        match self {
            Algorithm::Ica(c) => ica_run(space, c, objective, exec),
            Algorithm::Pso(c) => pso_run(space, c, objective, exec),
            Algorithm::Aco(c) => acor_run(space, c, objective, exec),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roulette_respects_zero_weights() {
        let mut rng = stream_rng(1, 0, 0);
        for _ in 0..1000 {
            let i = roulette(&[0.0, 2.0, 0.0, 1.0], &mut rng);
            assert!(i == 1 || i == 3);
        }
        let i = roulette(&[0.0, 0.0], &mut rng);
        assert!(i < 2);
    }

    #[test]
    fn power_weights_rank_infinite_last() {
        let w = power_weights(&[1.0, f64::INFINITY, 3.0]);
        assert!(w[0] > w[2] && w[2] > w[1]);
        assert_eq!(w[1], 0.0);
    }

    #[test]
    fn streams_are_independent_and_repeatable() {
        let a: u64 = stream_rng(7, 3, 4).gen();
        let b: u64 = stream_rng(7, 3, 4).gen();
        let c: u64 = stream_rng(7, 3, 5).gen();
        let d: u64 = stream_rng(7, 4, 4).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn convergence_iter_is_first_within_one_percent() {
        let mut t = Tracker::new(1);
        for (i, f) in [10.0, 5.0, 1.005, 1.0].into_iter().enumerate() {
            t.observe(&[vec![f]], &[f]);
            t.end_iteration(i + 1);
        }
        let r = t.finish();
        assert_eq!(r.convergence_iter, 3);
        assert_eq!(r.evaluations, 4);
    }

    #[test]
    fn space_validation() {
        assert!(SearchSpace::new(vec![0.0], vec![0.0]).is_err());
        assert!(SearchSpace::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let s = SearchSpace::cube(2, -1.0, 1.0).unwrap().with_initial_point(vec![3.0, 0.5]);
        assert_eq!(s.initial_points[0], vec![1.0, 0.5]);
    }
}
