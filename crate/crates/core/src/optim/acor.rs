//! Ant colony optimization for continuous domains (solution archive).
//!
//! The archive holds the `k` best solutions found so far, ranked by fitness.
//! Each ant picks one archive member with rank-based Gaussian weights and
//! samples every coordinate from a normal kernel centred on it; the kernel
//! width is `xi` times the mean distance from that member to the rest of the
//! archive. Good solutions therefore concentrate the sampling density the way
//! reinforced trails attract ants.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{evaluate_batch, roulette, stream_rng, Execution, Objective, OptResult, SearchSpace, Tracker};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcorConfig {
    pub archive_size: usize,
    pub ants: usize,
    /// Locality of the rank weighting; small values favour the best member.
    pub q: f64,
    /// Deviation-distance ratio.
    pub xi: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for AcorConfig {
    fn default() -> Self {
        Self { archive_size: 10, ants: 50, q: 0.1, xi: 0.85, max_iter: 100, seed: 0 }
    }
}

impl AcorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.archive_size < 2 {
            return Err(invalid("archive_size", "must be >= 2"));
        }
        if self.ants < 1 {
            return Err(invalid("ants", "must be >= 1"));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(invalid("q", "must be > 0"));
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(invalid("xi", "must be > 0"));
        }
        Ok(())
    }

    /// Unnormalized selection weight of each archive rank (0 = best).
    pub fn rank_weights(&self) -> Vec<f64> {
        let qk = self.q * self.archive_size as f64;
        (0..self.archive_size)
            .map(|r| (-(r as f64).powi(2) / (2.0 * qk * qk)).exp() / (qk * (2.0 * std::f64::consts::PI).sqrt()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Archive {
    pub xs: Vec<Vec<f64>>,
    pub fs: Vec<f64>,
}

impl Archive {
    fn sorted(xs: Vec<Vec<f64>>, fs: Vec<f64>, keep: usize) -> Self {
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        idx.truncate(keep);
        Self { xs: idx.iter().map(|&i| xs[i].clone()).collect(), fs: idx.iter().map(|&i| fs[i]).collect() }
    }

    /// Kernel width of member `l` in dimension `d`.
    pub fn deviation(&self, l: usize, d: usize, xi: f64) -> f64 {
        let k = self.xs.len();
        let centre = self.xs[l][d];
        let spread: f64 = self.xs.iter().map(|s| (s[d] - centre).abs()).sum();
        xi * spread / (k - 1) as f64
    }

    pub fn sample<R: Rng>(&self, weights: &[f64], xi: f64, space: &SearchSpace, rng: &mut R) -> Vec<f64> {
        let l = roulette(weights, rng);
        (0..space.dim())
            .map(|d| {
                let sigma = self.deviation(l, d, xi);
                let z: f64 = rng.sample(StandardNormal);
                (self.xs[l][d] + sigma * z).clamp(space.lower[d], space.upper[d])
            })
            .collect()
    }
}

pub fn acor_run(space: &SearchSpace, cfg: &AcorConfig, objective: &dyn Objective, exec: Execution) -> Result<OptResult> {
    cfg.validate()?;
    let xs: Vec<Vec<f64>> = (0..cfg.archive_size)
        .map(|i| space.initial(i, &mut stream_rng(cfg.seed, 0, i)))
        .collect();
    let fs = evaluate_batch(objective, &xs, exec);
    let mut tracker = Tracker::new(space.dim());
    tracker.observe(&xs, &fs);
    let mut archive = Archive::sorted(xs, fs, cfg.archive_size);
    let weights = cfg.rank_weights();

    for iter in 1..=cfg.max_iter {
        let ants: Vec<Vec<f64>> = (0..cfg.ants)
            .map(|a| archive.sample(&weights, cfg.xi, space, &mut stream_rng(cfg.seed, iter, a)))
            .collect();
        let fs = evaluate_batch(objective, &ants, exec);
        tracker.observe(&ants, &fs);

        let mut all_x = archive.xs;
        let mut all_f = archive.fs;
        all_x.extend(ants);
        all_f.extend(fs);
        archive = Archive::sorted(all_x, all_f, cfg.archive_size);
        tracker.end_iteration(iter);
    }
    Ok(tracker.finish())
}
