//! State-space averaged model of the three-output forward converter.
//!
//! Every rail is a buck-derived LC filter fed by `duty * n_i * v_in_eff`,
//! where `v_in_eff` is the input voltage minus the drop across the source and
//! primary-side resistances caused by the reflected on-time current. The
//! negative rail is simulated in magnitude coordinates; the sign is restored
//! by [`output_voltages`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const NUM_OUTPUTS: usize = 3;

/// Integrator step used by the closed loop (10 substeps per switching period).
pub const DEFAULT_DT: f64 = 2e-6;

/// One secondary output: rating, transformer ratio and filter components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    /// Signed reference voltage.
    pub v_ref: f64,
    pub p_rated: f64,
    pub r_load: f64,
    /// Secondary-to-primary turns ratio.
    pub turns_ratio: f64,
    pub inductance: f64,
    pub capacitance: f64,
    /// Output capacitor ESR.
    pub esr: f64,
    /// Winding, rectifier and lumped leakage drop of the secondary path.
    pub r_series: f64,
}

impl OutputSpec {
    /// Builds an output whose load resistance draws rated power at `v_ref`.
    pub fn from_rating(
        v_ref: f64,
        p_rated: f64,
        turns_ratio: f64,
        inductance: f64,
        capacitance: f64,
        esr: f64,
        r_series: f64,
    ) -> Self {
        Self {
            v_ref,
            p_rated,
            r_load: v_ref * v_ref / p_rated,
            turns_ratio,
            inductance,
            capacitance,
            esr,
            r_series,
        }
    }

    pub fn v_ref_abs(&self) -> f64 {
        self.v_ref.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverterParams {
    pub v_in_nominal: f64,
    pub v_in_min: f64,
    pub v_in_max: f64,
    pub f_sw: f64,
    /// Source resistance.
    pub r_source: f64,
    /// Primary winding plus both switch on-resistances.
    pub r_primary: f64,
    pub outputs: [OutputSpec; NUM_OUTPUTS],
}

impl Default for ConverterParams {
    fn default() -> Self {
        derive_default_params()
    }
}

/// Rated 5 V / 50 W, 15 V / 45 W and -15 V / 15 W outputs from an 18-40 V
/// input at 50 kHz, with the declared filter and parasitic values.
pub fn derive_default_params() -> ConverterParams {
    ConverterParams {
        v_in_nominal: 28.0,
        v_in_min: 18.0,
        v_in_max: 40.0,
        f_sw: 50e3,
        r_source: 0.020,
        r_primary: 0.060,
        outputs: [
            OutputSpec::from_rating(5.0, 50.0, 0.52, 100e-6, 1000e-6, 0.030, 0.010),
            OutputSpec::from_rating(15.0, 45.0, 1.56, 100e-6, 470e-6, 0.030, 0.050),
            OutputSpec::from_rating(-15.0, 15.0, 1.56, 100e-6, 470e-6, 0.030, 0.050),
        ],
    }
}

impl ConverterParams {
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |name: &'static str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and > 0, got {x}")))
            }
        };
        let finite_nonneg = |name: &'static str, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and >= 0, got {x}")))
            }
        };
        finite_pos("f_sw", self.f_sw)?;
        finite_pos("v_in_min", self.v_in_min)?;
        finite_nonneg("r_source", self.r_source)?;
        finite_nonneg("r_primary", self.r_primary)?;
        if !(self.v_in_min <= self.v_in_nominal && self.v_in_nominal <= self.v_in_max) {
            return Err(invalid(
                "v_in_nominal",
                format!(
                    "{} outside [{}, {}]",
                    self.v_in_nominal, self.v_in_min, self.v_in_max
                ),
            ));
        }
        for (i, out) in self.outputs.iter().enumerate() {
            let expected_sign = if i == 2 { -1.0 } else { 1.0 };
            if !(out.v_ref.is_finite() && out.v_ref * expected_sign > 0.0) {
                return Err(invalid(
                    "v_ref",
                    format!("output {} has reference {} with the wrong sign", i + 1, out.v_ref),
                ));
            }
            finite_pos("p_rated", out.p_rated)?;
            finite_pos("r_load", out.r_load)?;
            finite_pos("turns_ratio", out.turns_ratio)?;
            finite_pos("inductance", out.inductance)?;
            finite_pos("capacitance", out.capacitance)?;
            finite_nonneg("esr", out.esr)?;
            finite_nonneg("r_series", out.r_series)?;
        }
        Ok(())
    }

    /// Total resistance seen by the reflected primary current.
    pub fn r_input_path(&self) -> f64 {
        self.r_source + self.r_primary
    }

    pub fn references(&self) -> [f64; NUM_OUTPUTS] {
        [self.outputs[0].v_ref, self.outputs[1].v_ref, self.outputs[2].v_ref]
    }
}

/// Inductor currents and capacitor voltage magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConverterState {
    pub i_l: [f64; NUM_OUTPUTS],
    pub v_c: [f64; NUM_OUTPUTS],
    pub t: f64,
}

impl ConverterState {
    pub fn zero() -> Self {
        Self::default()
    }

    fn check_finite(&self) -> Result<()> {
        const I_NAMES: [&str; 3] = ["i_L1", "i_L2", "i_L3"];
        const V_NAMES: [&str; 3] = ["v_C1", "v_C2", "v_C3"];
        for k in 0..NUM_OUTPUTS {
            if !self.i_l[k].is_finite() {
                return Err(Error::Divergence { t: self.t, component: I_NAMES[k] });
            }
            if !self.v_c[k].is_finite() {
                return Err(Error::Divergence { t: self.t, component: V_NAMES[k] });
            }
        }
        if !self.t.is_finite() {
            return Err(Error::Divergence { t: self.t, component: "t" });
        }
        Ok(())
    }

    /// Energy stored in the filter inductors and capacitors.
    pub fn stored_energy(&self, params: &ConverterParams) -> f64 {
        params
            .outputs
            .iter()
            .zip(self.i_l.iter().zip(&self.v_c))
            .map(|(o, (i, v))| 0.5 * o.inductance * i * i + 0.5 * o.capacitance * v * v)
            .sum()
    }
}

#[inline]
fn output_magnitude(out: &OutputSpec, i_l: f64, v_c: f64) -> f64 {
    // v_out = v_c + esr * (i_l - v_out / r_load), solved for v_out
    out.r_load * (v_c + out.esr * i_l) / (out.r_load + out.esr)
}

/// Signed output voltages of the three rails.
pub fn output_voltages(state: &ConverterState, params: &ConverterParams) -> [f64; NUM_OUTPUTS] {
    let mut v = [0.0; NUM_OUTPUTS];
    for (k, out) in params.outputs.iter().enumerate() {
        v[k] = output_magnitude(out, state.i_l[k], state.v_c[k]).copysign(out.v_ref);
    }
    v
}

/// Time derivatives `[di_L1, di_L2, di_L3, dv_C1, dv_C2, dv_C3]`.
pub fn state_derivative(
    state: &ConverterState,
    params: &ConverterParams,
    duty: f64,
    v_in: f64,
) -> Result<[f64; 2 * NUM_OUTPUTS]> {
    state.check_finite()?;
    Ok(derivative_unchecked(&state.i_l, &state.v_c, params, duty, v_in))
}

#[inline]
fn derivative_unchecked(
    i_l: &[f64; NUM_OUTPUTS],
    v_c: &[f64; NUM_OUTPUTS],
    params: &ConverterParams,
    duty: f64,
    v_in: f64,
) -> [f64; 2 * NUM_OUTPUTS] {
    let reflected: f64 = params
        .outputs
        .iter()
        .zip(i_l)
        .map(|(o, i)| o.turns_ratio * i)
        .sum();
    let v_in_eff = v_in - params.r_input_path() * reflected;

    let mut d = [0.0; 2 * NUM_OUTPUTS];
    for (k, out) in params.outputs.iter().enumerate() {
        let v_out = output_magnitude(out, i_l[k], v_c[k]);
        let i_load = v_out / out.r_load;
        d[k] = (duty * out.turns_ratio * v_in_eff - v_out - i_l[k] * out.r_series) / out.inductance;
        d[NUM_OUTPUTS + k] = (i_l[k] - i_load) / out.capacitance;
    }
    d
}

/// Advances the state by one classical RK4 step with the duty held constant.
/// Inductor currents are clamped at zero afterwards (the rectifiers block
/// reverse current).
pub fn integrate_step(
    state: &ConverterState,
    params: &ConverterParams,
    duty: f64,
    v_in: f64,
    dt: f64,
) -> Result<ConverterState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be finite and > 0, got {dt}")));
    }
    state.check_finite()?;

    let f = |i: &[f64; 3], v: &[f64; 3]| derivative_unchecked(i, v, params, duty, v_in);
    let shift = |x: &[f64; 3], k: &[f64; 6], off: usize, h: f64| {
        [x[0] + h * k[off], x[1] + h * k[off + 1], x[2] + h * k[off + 2]]
    };

    let (i0, v0) = (&state.i_l, &state.v_c);
    let k1 = f(i0, v0);
    let k2 = f(&shift(i0, &k1, 0, 0.5 * dt), &shift(v0, &k1, 3, 0.5 * dt));
    let k3 = f(&shift(i0, &k2, 0, 0.5 * dt), &shift(v0, &k2, 3, 0.5 * dt));
    let k4 = f(&shift(i0, &k3, 0, dt), &shift(v0, &k3, 3, dt));

    let mut next = ConverterState { t: state.t + dt, ..*state };
    for k in 0..NUM_OUTPUTS {
        let di = (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]) / 6.0;
        let dv = (k1[3 + k] + 2.0 * k2[3 + k] + 2.0 * k3[3 + k] + k4[3 + k]) / 6.0;
        next.i_l[k] = (state.i_l[k] + dt * di).max(0.0);
        next.v_c[k] = state.v_c[k] + dt * dv;
    }
    next.check_finite()?;
    Ok(next)
}

/// Closed-form DC operating point for a fixed duty and input voltage.
pub fn steady_state(params: &ConverterParams, duty: f64, v_in: f64) -> ConverterState {
    // v_k = a_k * v_in_eff and v_in_eff = v_in - R_in * sum(n_k * v_k / R_k)
    let gains: Vec<f64> = params
        .outputs
        .iter()
        .map(|o| duty * o.turns_ratio * o.r_load / (o.r_load + o.r_series))
        .collect();
    let loading: f64 = params
        .outputs
        .iter()
        .zip(&gains)
        .map(|(o, a)| o.turns_ratio * a / o.r_load)
        .sum();
    let v_in_eff = v_in / (1.0 + params.r_input_path() * loading);

    let mut state = ConverterState::zero();
    for (k, o) in params.outputs.iter().enumerate() {
        let v = gains[k] * v_in_eff;
        state.v_c[k] = v;
        state.i_l[k] = v / o.r_load;
    }
    state
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    /// Scales the power drawn by output `output` (1-based) by `factor`.
    LoadScale { output: usize, factor: f64 },
    InputStep { v_in: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl DisturbanceEvent {
    pub fn load_scale(t: f64, output: usize, factor: f64) -> Self {
        Self { t, kind: EventKind::LoadScale { output, factor } }
    }

    pub fn input_step(t: f64, v_in: f64) -> Self {
        Self { t, kind: EventKind::InputStep { v_in } }
    }
}

/// Applies a disturbance, returning the updated parameters and input voltage.
///
/// A load scale of `factor` multiplies the drawn power, so at fixed voltage
/// the load resistance is divided by `factor`.
pub fn apply_event(
    params: &ConverterParams,
    v_in: f64,
    event: &DisturbanceEvent,
) -> Result<(ConverterParams, f64)> {
    match event.kind {
        EventKind::LoadScale { output, factor } => {
            if !(1..=NUM_OUTPUTS).contains(&output) {
                return Err(Error::OutputIndex(output));
            }
            if !(factor.is_finite() && factor > 0.0) {
                return Err(invalid("factor", format!("must be > 0, got {factor}")));
            }
            let mut next = *params;
            next.outputs[output - 1].r_load /= factor;
            Ok((next, v_in))
        }
        EventKind::InputStep { v_in: new_v_in } => {
            if !(params.v_in_min <= new_v_in && new_v_in <= params.v_in_max) {
                return Err(invalid(
                    "v_in",
                    format!(
                        "{new_v_in} outside [{}, {}]",
                        params.v_in_min, params.v_in_max
                    ),
                ));
            }
            Ok((*params, new_v_in))
        }
    }
}
