//! Disturbance experiments and the metrics reported for them: windowed
//! regulation percentages, step-response figures and method comparisons.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::control_loop::{run_closed_loop, Controller, LoopConfig, SimTrace, WeightVector};
use crate::error::{invalid, Error, Result};
use crate::optim::{Algorithm, Execution};
use crate::plant::{ConverterParams, DisturbanceEvent, NUM_OUTPUTS};
use crate::tuning::tune_weights;

/// Settling band half-width, as a fraction of the final value.
pub const SETTLING_BAND: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub v_in: f64,
    #[serde(default)]
    pub events: Vec<DisturbanceEvent>,
    #[serde(default = "default_snapshots")]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
}

fn default_snapshots() -> Vec<f64> {
    vec![6e-3, 16e-3]
}

fn default_window() -> f64 {
    2e-3
}

fn default_duration() -> f64 {
    20e-3
}

impl Scenario {
    pub fn new(name: impl Into<String>, v_in: f64, events: Vec<DisturbanceEvent>) -> Self {
        Self {
            name: name.into(),
            v_in,
            events,
            snapshot_times: default_snapshots(),
            window: default_window(),
            duration: default_duration(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(invalid("name", "scenario name is empty"));
        }
        if self.snapshot_times.is_empty() {
            return Err(invalid("snapshot_times", "at least one snapshot is required"));
        }
        if !(self.window > 0.0) {
            return Err(invalid("window", "must be > 0"));
        }
        for &t in &self.snapshot_times {
            if !(t <= self.duration) {
                return Err(invalid("snapshot_times", format!("snapshot {t} s is after the {} s run", self.duration)));
            }
            if t < self.window {
                return Err(invalid("window", format!("window {} s is longer than snapshot {t} s", self.window)));
            }
        }
        if self.events.iter().any(|e| e.t > self.duration) {
            return Err(invalid("events", "event after the end of the run"));
        }
        Ok(())
    }

    pub fn last_snapshot(&self) -> f64 {
        self.snapshot_times.iter().copied().fold(0.0, f64::max)
    }

    /// Runs the scenario for `duration` seconds (its own duration when `None`).
    pub fn simulate(
        &self,
        params: &ConverterParams,
        weights: &WeightVector,
        controller: &Controller,
        loop_cfg: &LoopConfig,
        duration: Option<f64>,
    ) -> Result<SimTrace> {
        self.validate()?;
        let end = duration.unwrap_or(self.duration);
        let cfg = LoopConfig { sim_duration: end, ..*loop_cfg };
        let events: Vec<DisturbanceEvent> = self.events.iter().copied().filter(|e| e.t <= end).collect();
        run_closed_loop(params, weights, controller, &events, &cfg, self.v_in)
    }

    /// Per-rail regulation at every snapshot.
    pub fn regulation(&self, trace: &SimTrace, refs: &[f64; NUM_OUTPUTS]) -> Result<Vec<SnapshotRegulation>> {
        self.snapshot_times
            .iter()
            .map(|&t| {
                let mut rails = [0.0; NUM_OUTPUTS];
                for (k, r) in rails.iter_mut().enumerate() {
                    *r = regulation_percent(trace, k + 1, refs[k], t, self.window)?;
                }
                Ok(SnapshotRegulation { t, rails, total: rails.iter().sum() })
            })
            .collect()
    }
}

/// Step-down of the +5 V load, step-up of the +15 V load and an input step.
pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![
        Scenario::new("load5_half", 28.0, vec![DisturbanceEvent::load_scale(10e-3, 1, 0.5)]),
        Scenario::new("load15_up20", 28.0, vec![DisturbanceEvent::load_scale(10e-3, 2, 1.2)]),
        Scenario::new("vin_30to35", 30.0, vec![DisturbanceEvent::input_step(10e-3, 35.0)]),
    ]
}

pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

fn check_rail(rail: usize) -> Result<usize> {
    if (1..=NUM_OUTPUTS).contains(&rail) {
        Ok(rail - 1)
    } else {
        Err(Error::OutputIndex(rail))
    }
}

fn covered(trace: &SimTrace, start: f64, end: f64) -> Result<&[crate::control_loop::TraceSample]> {
    let tol = 1e-9 + 1e-6 * trace.sample_period;
    let first = trace.samples.first().map_or(f64::INFINITY, |s| s.t);
    if start < first - tol || end > trace.duration() + tol || !(start <= end) {
        return Err(Error::WindowOutsideTrace { start, end });
    }
    let w = trace.window(start, end);
    if w.is_empty() {
        return Err(Error::WindowOutsideTrace { start, end });
    }
    Ok(w)
}

/// Mean of rail `rail` (1-based) over `[start, end]`.
pub fn window_mean(trace: &SimTrace, rail: usize, start: f64, end: f64) -> Result<f64> {
    let k = check_rail(rail)?;
    let w = covered(trace, start, end)?;
    Ok(w.iter().map(|s| s.v_out[k]).sum::<f64>() / w.len() as f64)
}

/// `100 |mean(v) - v_ref| / |v_ref|` over the window ending at `t_snap`.
pub fn regulation_percent(trace: &SimTrace, rail: usize, v_ref: f64, t_snap: f64, window: f64) -> Result<f64> {
    let mean = window_mean(trace, rail, t_snap - window, t_snap)?;
    Ok(100.0 * (mean - v_ref).abs() / v_ref.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeResponseMetrics {
    /// Percent of the final value.
    pub overshoot: f64,
    /// Seconds after `t_start`.
    pub settling_time: f64,
    /// Percent of the reference.
    pub ss_error: f64,
    pub settled: bool,
}

/// Step-response figures of one rail from `t_start` to the end of the trace.
///
/// The final value is the mean over the last `window` seconds. Overshoot is
/// the largest excursion past the final value on the side away from the
/// starting point. Settling time is when the rail last re-enters the ±2% band
/// for good; a rail still outside at the end is reported unsettled with the
/// full analysed span.
pub fn time_response(trace: &SimTrace, rail: usize, v_ref: f64, t_start: f64, window: f64) -> Result<TimeResponseMetrics> {
    let k = check_rail(rail)?;
    let end = trace.duration();
    let fin = window_mean(trace, rail, end - window, end)?;
    let span = covered(trace, t_start, end)?;
    // Magnitudes, so the negative rail reads like the positive ones.
    let sign = if fin < 0.0 { -1.0 } else { 1.0 };
    let v: Vec<f64> = span.iter().map(|s| sign * s.v_out[k]).collect();
    let fin_mag = fin.abs();

    let excursion = if v[0] <= fin_mag {
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - fin_mag
    } else {
        fin_mag - v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let overshoot = 100.0 * excursion.max(0.0) / fin_mag;

    let band = SETTLING_BAND * fin_mag;
    let outside = v.iter().rposition(|x| (x - fin_mag).abs() > band);
    let (settling_time, settled) = match outside {
        None => (0.0, true),
        Some(i) if i + 1 < span.len() => (span[i + 1].t - t_start, true),
        Some(_) => (end - t_start, false),
    };
    Ok(TimeResponseMetrics { overshoot, settling_time, ss_error: 100.0 * (fin - v_ref).abs() / v_ref.abs(), settled })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRegulation {
    pub t: f64,
    pub rails: [f64; NUM_OUTPUTS],
    pub total: f64,
}

/// Where a method gets its weights.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Fixed(WeightVector),
    /// Tuned separately on each scenario under test.
    Tuned(Algorithm),
}

#[derive(Debug, Clone)]
pub struct Method {
    pub label: String,
    pub weights: WeightSource,
    pub controller: Controller,
}

pub const BASELINE_LABEL: &str = "constant";

impl Method {
    /// Fuzzy control with uniform weights.
    pub fn baseline() -> Self {
        Self {
            label: BASELINE_LABEL.to_string(),
            weights: WeightSource::Fixed(WeightVector::uniform()),
            controller: Controller::default_fuzzy(),
        }
    }
}

/// One method on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub method: String,
    pub scenario: String,
    pub weights: [f64; NUM_OUTPUTS],
    pub convergence_iter: Option<usize>,
    pub fitness: Option<f64>,
    pub snapshots: Vec<SnapshotRegulation>,
}

impl ScenarioResult {
    /// Total regulation at the last snapshot.
    pub fn final_total(&self) -> f64 {
        self.snapshots.last().map_or(f64::NAN, |s| s.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulationRow {
    pub method: String,
    pub scenario: String,
    pub snapshot_ms: f64,
    pub rail: usize,
    pub regulation_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub method: String,
    pub scenario: String,
    pub convergence_iter: Option<usize>,
    pub total_regulation_pct: f64,
}

pub const REGULATION_CSV_HEADER: &str = "method,scenario,snapshot_ms,rail,regulation_pct";
pub const CONVERGENCE_CSV_HEADER: &str = "method,scenario,convergence_iter,total_regulation_pct";

/// Results of every method on every scenario, sorted by method then scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegulationReport {
    pub results: Vec<ScenarioResult>,
}

impl RegulationReport {
    pub fn get(&self, method: &str, scenario: &str) -> Option<&ScenarioResult> {
        self.results.iter().find(|r| r.method == method && r.scenario == scenario)
    }

    pub fn regulation_rows(&self) -> Vec<RegulationRow> {
        let mut rows = Vec::new();
        for r in &self.results {
            for snap in &r.snapshots {
                for (k, pct) in snap.rails.iter().enumerate() {
                    rows.push(RegulationRow {
                        method: r.method.clone(),
                        scenario: r.scenario.clone(),
                        snapshot_ms: snap.t * 1e3,
                        rail: k + 1,
                        regulation_pct: *pct,
                    });
                }
            }
        }
        rows
    }

    pub fn convergence_rows(&self) -> Vec<ConvergenceRow> {
        self.results
            .iter()
            .map(|r| ConvergenceRow {
                method: r.method.clone(),
                scenario: r.scenario.clone(),
                convergence_iter: r.convergence_iter,
                total_regulation_pct: r.final_total(),
            })
            .collect()
    }

    /// Scenarios where a tuned method does no better than the baseline.
    pub fn not_improved(&self) -> Vec<(String, String)> {
        self.results
            .iter()
            .filter(|r| r.convergence_iter.is_some())
            .filter(|r| self.get(BASELINE_LABEL, &r.scenario).is_some_and(|b| r.final_total() >= b.final_total()))
            .map(|r| (r.method.clone(), r.scenario.clone()))
            .collect()
    }

    pub fn write_regulation_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{REGULATION_CSV_HEADER}")?;
        for r in self.regulation_rows() {
            writeln!(w, "{},{},{},{},{:.6}", r.method, r.scenario, r.snapshot_ms, r.rail, r.regulation_pct)?;
        }
        Ok(())
    }

    pub fn write_convergence_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CONVERGENCE_CSV_HEADER}")?;
        for r in self.convergence_rows() {
            let iter = r.convergence_iter.map_or(String::new(), |i| i.to_string());
            writeln!(w, "{},{},{},{:.6}", r.method, r.scenario, iter, r.total_regulation_pct)?;
        }
        Ok(())
    }
}

/// Runs every method on every scenario. Tuned methods are tuned on each
/// scenario separately. The uniform-weight baseline is added when absent.
pub fn compare_methods(
    methods: &[Method],
    scenarios: &[Scenario],
    params: &ConverterParams,
    loop_cfg: &LoopConfig,
    exec: Execution,
) -> Result<RegulationReport> {
    if scenarios.is_empty() {
        return Err(invalid("scenarios", "no scenarios selected"));
    }
    let mut methods = methods.to_vec();
    if !methods.iter().any(|m| m.label == BASELINE_LABEL) {
        methods.push(Method::baseline());
    }
    let refs = params.references();
    let mut results = Vec::with_capacity(methods.len() * scenarios.len());
    for m in &methods {
        for sc in scenarios {
            let (weights, convergence_iter, fitness) = match &m.weights {
                WeightSource::Fixed(k) => (*k, None, None),
                WeightSource::Tuned(algo) => {
                    let (k, run) =
                        tune_weights(algo, std::slice::from_ref(sc), params, loop_cfg, &m.controller, exec)?;
                    (k, Some(run.convergence_iter), Some(run.best_fitness))
                }
            };
            let trace = sc.simulate(params, &weights, &m.controller, loop_cfg, None)?;
            results.push(ScenarioResult {
                method: m.label.clone(),
                scenario: sc.name.clone(),
                weights: weights.as_array(),
                convergence_iter,
                fitness,
                snapshots: sc.regulation(&trace, &refs)?,
            });
        }
    }
    results.sort_by(|a, b| (&a.method, &a.scenario).cmp(&(&b.method, &b.scenario)));
    Ok(RegulationReport { results })
}
