//! Weighted voltage-mode loop: one duty cycle driven by the weighted sum of
//! the per-rail relative errors, updated once per switching period and held
//! while the plant integrator substeps.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fuzzy::{pid_step, FuzzyController, PidGains, PidState};
use crate::plant::{
    apply_event, integrate_step, output_voltages, ConverterParams, ConverterState, DisturbanceEvent,
    DEFAULT_DT, NUM_OUTPUTS,
};

/// Non-negative weighting factors normalized to sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct WeightVector([f64; NUM_OUTPUTS]);

impl WeightVector {
    pub fn new(raw: [f64; NUM_OUTPUTS]) -> Result<Self> {
        if raw.iter().any(|k| !k.is_finite() || *k < 0.0) {
            return Err(invalid("weights", format!("must be finite and >= 0, got {raw:?}")));
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(invalid("weights", "at least one weight must be positive"));
        }
        Ok(Self(raw.map(|k| k / sum)))
    }

    /// Projects an arbitrary point of the search box onto the simplex; a
    /// point with no positive coordinate maps to the uniform vector.
    pub fn from_position(x: &[f64]) -> Self {
        let mut raw = [0.0; NUM_OUTPUTS];
        for (r, v) in raw.iter_mut().zip(x) {
            *r = if v.is_finite() { v.max(0.0) } else { 0.0 };
        }
        Self::new(raw).unwrap_or_else(|_| Self::uniform())
    }

    pub fn uniform() -> Self {
        Self([1.0 / 3.0; NUM_OUTPUTS])
    }

    pub fn as_array(&self) -> [f64; NUM_OUTPUTS] {
        self.0
    }
}

impl TryFrom<[f64; 3]> for WeightVector {
    type Error = Error;

    fn try_from(raw: [f64; 3]) -> Result<Self> {
        Self::new(raw)
    }
}

impl From<WeightVector> for [f64; 3] {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopConfig {
    pub control_period: f64,
    /// Integrator step; `control_period` must be an integer multiple.
    pub dt: f64,
    pub duty_min: f64,
    pub duty_max: f64,
    pub initial_duty: f64,
    pub sim_duration: f64,
    pub sample_stride: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            control_period: 20e-6,
            dt: DEFAULT_DT,
            duty_min: 0.02,
            duty_max: 0.45,
            initial_duty: 0.1,
            sim_duration: 20e-3,
            sample_stride: 1,
        }
    }
}

impl LoopConfig {
    pub fn substeps(&self) -> usize {
        (self.control_period / self.dt).round() as usize
    }

    pub fn periods(&self) -> usize {
        (self.sim_duration / self.control_period + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.duty_min && self.duty_min < self.duty_max && self.duty_max <= 0.5) {
            return Err(invalid(
                "duty_max",
                format!("need 0 <= duty_min < duty_max <= 0.5, got [{}, {}]", self.duty_min, self.duty_max),
            ));
        }
        if !(self.duty_min..=self.duty_max).contains(&self.initial_duty) {
            return Err(invalid("initial_duty", format!("{} outside duty limits", self.initial_duty)));
        }
        if !(self.dt > 0.0 && self.control_period > 0.0) {
            return Err(invalid("control_period", "control_period and dt must be > 0"));
        }
        let ratio = self.control_period / self.dt;
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-6 {
            return Err(invalid("dt", format!("control_period / dt = {ratio} is not an integer")));
        }
        if !(self.sim_duration >= self.control_period) {
            return Err(invalid("sim_duration", "shorter than one control period"));
        }
        if self.sample_stride == 0 {
            return Err(invalid("sample_stride", "must be >= 1"));
        }
        Ok(())
    }
}

/// Per-rail relative error, positive when the rail magnitude is below its
/// reference.
pub fn relative_errors(v_out: &[f64; NUM_OUTPUTS], v_ref: &[f64; NUM_OUTPUTS]) -> [f64; NUM_OUTPUTS] {
    let mut e = [0.0; NUM_OUTPUTS];
    for k in 0..NUM_OUTPUTS {
        e[k] = (v_ref[k] - v_out[k]) * v_ref[k].signum() / v_ref[k].abs();
    }
    e
}

pub fn weighted_error(v_out: &[f64; NUM_OUTPUTS], v_ref: &[f64; NUM_OUTPUTS], k: &WeightVector) -> f64 {
    relative_errors(v_out, v_ref)
        .iter()
        .zip(k.0.iter())
        .map(|(e, w)| e * w)
        .sum()
}

/// Duty-cycle law closing the loop.
#[derive(Debug, Clone)]
pub enum Controller {
    /// Incremental fuzzy controller.
    Fuzzy(Box<FuzzyController>),
    Pid(PidGains),
    /// Holds the initial duty.
    Fixed,
}

impl Controller {
    pub fn default_fuzzy() -> Self {
        Controller::Fuzzy(Box::default())
    }

    pub fn label(&self) -> &'static str {
        match self {
            Controller::Fuzzy(_) => "fuzzy",
            Controller::Pid(_) => "pid",
            Controller::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub v_out: [f64; NUM_OUTPUTS],
    pub i_l: [f64; NUM_OUTPUTS],
    pub duty: f64,
    /// Weighted per-unit error.
    pub error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub samples: Vec<TraceSample>,
    /// Time between consecutive samples.
    pub sample_period: f64,
}

pub const TRACE_CSV_HEADER: &str = "t,v1,v2,v3,iL1,iL2,iL3,duty,E";

impl SimTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Samples with `start <= t <= end` (with a small tolerance on the
    /// period grid).
    pub fn window(&self, start: f64, end: f64) -> &[TraceSample] {
        let eps = 1e-9 * self.sample_period.max(1e-12);
        let lo = self.samples.partition_point(|s| s.t < start - eps);
        let hi = self.samples.partition_point(|s| s.t <= end + eps);
        &self.samples[lo..hi.max(lo)]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for s in &self.samples {
            let row = [s.t, s.v_out[0], s.v_out[1], s.v_out[2], s.i_l[0], s.i_l[1], s.i_l[2], s.duty, s.error];
            // `+ 0.0` turns a negative zero into zero
            let fields: Vec<String> = row.iter().map(|v| format!("{:.8e}", v + 0.0)).collect();
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Simulates the loop from the zero state. Events are snapped to the next
/// control-period boundary and applied before that period's sample.
pub fn run_closed_loop(
    params: &ConverterParams,
    weights: &WeightVector,
    controller: &Controller,
    events: &[DisturbanceEvent],
    cfg: &LoopConfig,
    v_in: f64,
) -> Result<SimTrace> {
    cfg.validate()?;
    params.validate()?;
    for (i, pair) in events.windows(2).enumerate() {
        if pair[1].t < pair[0].t {
            return Err(Error::UnsortedEvents { index: i + 1, t: pair[1].t });
        }
    }
    if let Some(last) = events.last() {
        if last.t > cfg.sim_duration {
            return Err(invalid("events", format!("event at {} s after the end of the run", last.t)));
        }
    }

    let period = cfg.control_period;
    let substeps = cfg.substeps();
    let dt = period / substeps as f64;
    let n_periods = cfg.periods();
    let refs = params.references();

    let mut params = *params;
    let mut v_in = v_in;
    let mut state = ConverterState::zero();
    let mut duty = cfg.initial_duty;
    let mut pid = PidState::default();
    let mut prev_error: Option<f64> = None;
    let mut next_event = 0;

    let mut trace = SimTrace {
        samples: Vec::with_capacity(n_periods / cfg.sample_stride + 1),
        sample_period: period * cfg.sample_stride as f64,
    };

    for n in 0..=n_periods {
        let t = n as f64 * period;
        while next_event < events.len() && event_period(events[next_event].t, period) <= n {
            (params, v_in) = apply_event(&params, v_in, &events[next_event])?;
            next_event += 1;
        }
        state.t = t;

        let v_out = output_voltages(&state, &params);
        let error = weighted_error(&v_out, &refs, weights);
        let d_error = prev_error.map_or(0.0, |p| error - p);
        prev_error = Some(error);

        duty = match controller {
            Controller::Fuzzy(flc) => duty + flc.step(error, d_error),
            Controller::Pid(gains) => pid_step(error, period, gains, &mut pid),
            Controller::Fixed => duty,
        }
        .clamp(cfg.duty_min, cfg.duty_max);

        if n % cfg.sample_stride == 0 {
            trace.samples.push(TraceSample { t, v_out, i_l: state.i_l, duty, error });
        }
        if n == n_periods {
            break;
        }
        for _ in 0..substeps {
            state = integrate_step(&state, &params, duty, v_in, dt)?;
        }
    }
    Ok(trace)
}

fn event_period(t_event: f64, period: f64) -> usize {
    (t_event / period - 1e-9).ceil().max(0.0) as usize
}
