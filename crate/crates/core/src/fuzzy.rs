//! Mamdani fuzzy duty-cycle controller (max-min inference, centroid
//! defuzzification) and the positional PID baseline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Linguistic terms, ordered from negative big to positive big.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    NB,
    NM,
    NS,
    ZE,
    PS,
    PM,
    PB,
}

impl Term {
    pub const ALL: [Term; 7] = [Term::NB, Term::NM, Term::NS, Term::ZE, Term::PS, Term::PM, Term::PB];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Term> {
        Self::ALL.get(i).copied()
    }

    /// The term with the opposite sign; `ZE` maps to itself.
    pub fn mirror(self) -> Term {
        Self::ALL[6 - self.index()]
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Term::NB => "NB",
            Term::NM => "NM",
            Term::NS => "NS",
            Term::ZE => "ZE",
            Term::PS => "PS",
            Term::PM => "PM",
            Term::PB => "PB",
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

impl FromStr for Term {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Term::ALL
            .into_iter()
            .find(|t| t.mnemonic().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown linguistic term `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangularMf {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl TriangularMf {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a <= b && b <= c) {
            return Err(invalid("triangle", format!("need a <= b <= c, got ({a}, {b}, {c})")));
        }
        Ok(Self { a, b, c })
    }

    /// Degree of membership; a shoulder (`a == b` or `b == c`) is vertical on
    /// that side.
    pub fn membership(&self, x: f64) -> f64 {
        if x < self.a || x > self.c {
            0.0
        } else if x == self.b {
            1.0
        } else if x < self.b {
            (x - self.a) / (self.b - self.a)
        } else {
            (self.c - x) / (self.c - self.b)
        }
    }
}

/// Seven triangles on the normalized universe `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipSet {
    pub mfs: [TriangularMf; 7],
}

impl Default for MembershipSet {
    fn default() -> Self {
        Self::uniform()
    }
}

impl MembershipSet {
    /// Centers at `k/3`, half-width `1/3`, with the outer terms cut at `+-1`.
    pub fn uniform() -> Self {
        let mut mfs = [TriangularMf { a: 0.0, b: 0.0, c: 0.0 }; 7];
        for (k, mf) in mfs.iter_mut().enumerate() {
            let center = (k as f64 - 3.0) / 3.0;
            let left = if k == 0 { center } else { (k as f64 - 4.0) / 3.0 };
            let right = if k == 6 { center } else { (k as f64 - 2.0) / 3.0 };
            *mf = TriangularMf { a: left, b: center, c: right };
        }
        Self { mfs }
    }

    pub fn mf(&self, term: Term) -> &TriangularMf {
        &self.mfs[term.index()]
    }

    /// Membership grades of `x` after clamping to the universe.
    pub fn fuzzify(&self, x: f64) -> [f64; 7] {
        let x = x.clamp(-1.0, 1.0);
        let mut mu = [0.0; 7];
        for (g, mf) in mu.iter_mut().zip(&self.mfs) {
            *g = mf.membership(x);
        }
        mu
    }
}

/// A 7x7 table mapping (E term, dE term) to an output term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleBase {
    pub table: [[Term; 7]; 7],
}

impl Default for RuleBase {
    fn default() -> Self {
        Self::standard()
    }
}

impl RuleBase {
    /// Rows are E from NB to PB, columns are dE from NB to PB.
    pub fn standard() -> Self {
        use Term::*;
        Self {
            table: [
                [NB, NB, NB, NB, NM, NS, ZE],
                [NB, NB, NB, NM, NS, ZE, PS],
                [NB, NB, NM, NS, ZE, PS, PM],
                [NB, NM, NS, ZE, PS, PM, PB],
                [NM, NS, ZE, PS, PM, PB, PB],
                [NS, ZE, PS, PM, PB, PB, PB],
                [ZE, PS, PM, PB, PB, PB, PB],
            ],
        }
    }

    pub fn rule(&self, e: Term, de: Term) -> Term {
        self.table[e.index()][de.index()]
    }

    /// Parses a whitespace-separated grid of term mnemonics.
    ///
    /// Blank lines and `#` comments are skipped. An optional header line
    /// (a corner label followed by the seven dE terms) and optional leading
    /// row labels are accepted and checked for order.
    pub fn parse_grid(text: &str) -> Result<Self> {
        let mut rows: Vec<[Term; 7]> = Vec::with_capacity(7);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::RuleParse { line: lineno + 1, reason };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let first_is_term = tokens[0].parse::<Term>().is_ok();

            if rows.is_empty() && tokens.len() == 8 && !first_is_term {
                for (k, tok) in tokens[1..].iter().enumerate() {
                    let t: Term = tok.parse().map_err(err)?;
                    if t != Term::ALL[k] {
                        return Err(err(format!("header column {} is {t}, expected {}", k + 1, Term::ALL[k])));
                    }
                }
                continue;
            }

            let cells = match tokens.len() {
                7 => &tokens[..],
                8 => {
                    let label: Term = tokens[0].parse().map_err(err)?;
                    let expected = Term::from_index(rows.len())
                        .ok_or_else(|| err("more than 7 rows".to_string()))?;
                    if label != expected {
                        return Err(err(format!("row label {label}, expected {expected}")));
                    }
                    &tokens[1..]
                }
                n => return Err(err(format!("expected 7 terms, found {n}"))),
            };
            if rows.len() == 7 {
                return Err(err("more than 7 rows".to_string()));
            }
            let mut row = [Term::ZE; 7];
            for (slot, tok) in row.iter_mut().zip(cells) {
                *slot = tok.parse().map_err(err)?;
            }
            rows.push(row);
        }
        if rows.len() != 7 {
            return Err(Error::RuleParse {
                line: text.lines().count(),
                reason: format!("expected 7 rows, found {}", rows.len()),
            });
        }
        let mut table = [[Term::ZE; 7]; 7];
        table.copy_from_slice(&rows);
        Ok(Self { table })
    }

    /// Renders the table in the format accepted by [`RuleBase::parse_grid`].
    pub fn to_grid(&self) -> String {
        let mut out = String::from("E\\dE");
        for t in Term::ALL {
            out.push(' ');
            out.push_str(t.mnemonic());
        }
        out.push('\n');
        for e in Term::ALL {
            out.push_str(e.mnemonic());
            for cell in &self.table[e.index()] {
                out.push(' ');
                out.push_str(cell.mnemonic());
            }
            out.push('\n');
        }
        out
    }
}

/// Aggregated output fuzzy set: every output term clipped at its firing
/// strength, combined by pointwise max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub strengths: [f64; 7],
    pub ms: MembershipSet,
}

impl Aggregate {
    pub fn value_at(&self, x: f64) -> f64 {
        self.strengths
            .iter()
            .zip(&self.ms.mfs)
            .filter(|(s, _)| **s > 0.0)
            .map(|(s, mf)| s.min(mf.membership(x)))
            .fold(0.0, f64::max)
    }

    pub fn is_empty(&self) -> bool {
        self.strengths.iter().all(|&s| s <= 0.0)
    }
}

/// Max-min inference over the rule base.
pub fn infer(mu_e: &[f64; 7], mu_de: &[f64; 7], rb: &RuleBase, ms: &MembershipSet) -> Aggregate {
    let mut strengths = [0.0f64; 7];
    for (i, &ge) in mu_e.iter().enumerate() {
        if ge <= 0.0 {
            continue;
        }
        for (j, &gd) in mu_de.iter().enumerate() {
            if gd <= 0.0 {
                continue;
            }
            let out = rb.table[i][j].index();
            strengths[out] = strengths[out].max(ge.min(gd));
        }
    }
    Aggregate { strengths, ms: *ms }
}

pub const DEFUZZ_POINTS: usize = 201;

/// Midpoints of `DEFUZZ_POINTS` equal cells on `[-1, 1]`, exactly mirrored
/// about zero.
fn defuzz_grid() -> [f64; DEFUZZ_POINTS] {
    let h = 2.0 / DEFUZZ_POINTS as f64;
    let mut g = [0.0; DEFUZZ_POINTS];
    let half = DEFUZZ_POINTS / 2;
    for i in 0..half {
        g[i] = -1.0 + (i as f64 + 0.5) * h;
        g[DEFUZZ_POINTS - 1 - i] = -g[i];
    }
    g
}

/// First and zeroth moments, summed over mirrored pairs so that a mirrored
/// aggregate yields an exactly negated first moment.
fn mirrored_moments(grid: &[f64; DEFUZZ_POINTS], mu: &[f64; DEFUZZ_POINTS]) -> (f64, f64) {
    let half = DEFUZZ_POINTS / 2;
    let (mut num, mut den) = (0.0, mu[half]);
    for i in 0..half {
        let j = DEFUZZ_POINTS - 1 - i;
        num += grid[i] * (mu[i] - mu[j]);
        den += mu[i] + mu[j];
    }
    (num, den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Defuzzified {
    pub value: f64,
    /// False when no rule fired; `value` is then 0.
    pub fired: bool,
}

/// Centre of gravity by midpoint quadrature.
pub fn defuzzify_centroid(agg: &Aggregate) -> Defuzzified {
    let grid = defuzz_grid();
    let mut mu = [0.0; DEFUZZ_POINTS];
    for (m, &x) in mu.iter_mut().zip(&grid) {
        *m = agg.value_at(x);
    }
    let (num, den) = mirrored_moments(&grid, &mu);
    if den <= 0.0 {
        Defuzzified { value: 0.0, fired: false }
    } else {
        Defuzzified { value: num / den, fired: true }
    }
}

/// Input and output scaling of the fuzzy controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FuzzyConfig {
    /// Per-unit error to universe.
    pub g_e: f64,
    /// Per-unit error difference to universe.
    pub g_de: f64,
    /// Universe to duty increment.
    pub g_dd: f64,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self { g_e: 5.0, g_de: 200.0, g_dd: 0.01 }
    }
}

impl FuzzyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("g_e", self.g_e), ("g_de", self.g_de), ("g_dd", self.g_dd)] {
            if !(g.is_finite() && g > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {g}")));
            }
        }
        Ok(())
    }
}

/// Incremental fuzzy controller: returns the duty increment for one control
/// period. The membership values of every quadrature point are tabulated once.
#[derive(Debug, Clone)]
pub struct FuzzyController {
    pub cfg: FuzzyConfig,
    pub rules: RuleBase,
    pub ms: MembershipSet,
    grid: [f64; DEFUZZ_POINTS],
    table: Box<[[f64; 7]; DEFUZZ_POINTS]>,
}

impl FuzzyController {
    pub fn new(cfg: FuzzyConfig, rules: RuleBase, ms: MembershipSet) -> Self {
        let grid = defuzz_grid();
        let mut table = Box::new([[0.0; 7]; DEFUZZ_POINTS]);
        for (row, &x) in table.iter_mut().zip(&grid) {
            for (v, mf) in row.iter_mut().zip(&ms.mfs) {
                *v = mf.membership(x);
            }
        }
        Self { cfg, rules, ms, grid, table }
    }

    pub fn with_config(cfg: FuzzyConfig) -> Self {
        Self::new(cfg, RuleBase::standard(), MembershipSet::uniform())
    }

    /// Crisp universe output for already-scaled inputs, in `[-1, 1]`.
    pub fn evaluate(&self, e: f64, de: f64) -> f64 {
        let agg = infer(&self.ms.fuzzify(e), &self.ms.fuzzify(de), &self.rules, &self.ms);
        let mut active = [(0usize, 0.0f64); 7];
        let mut n_active = 0;
        for (k, &s) in agg.strengths.iter().enumerate() {
            if s > 0.0 {
                active[n_active] = (k, s);
                n_active += 1;
            }
        }
        let active = &active[..n_active];
        let mut mu = [0.0f64; DEFUZZ_POINTS];
        for (m, row) in mu.iter_mut().zip(self.table.iter()) {
            for &(k, s) in active {
                *m = m.max(s.min(row[k]));
            }
        }
        let (num, den) = mirrored_moments(&self.grid, &mu);
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// Duty increment for per-unit error `e` and error difference `de`.
    pub fn step(&self, e: f64, de: f64) -> f64 {
        self.cfg.g_dd * self.evaluate(self.cfg.g_e * e, self.cfg.g_de * de)
    }
}

impl Default for FuzzyController {
    fn default() -> Self {
        Self::with_config(FuzzyConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PidGains {
    pub kp: f64,
    /// Integral gain, 1/s.
    pub ki: f64,
    /// Derivative gain, s.
    pub kd: f64,
    /// Duty offset added to the PID terms.
    pub bias: f64,
    pub integral_min: f64,
    pub integral_max: f64,
    pub duty_min: f64,
    pub duty_max: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 0.02,
            ki: 40.0,
            kd: 1e-5,
            bias: 0.345,
            integral_min: -0.3,
            integral_max: 0.3,
            duty_min: 0.02,
            duty_max: 0.45,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.duty_min && self.duty_min < self.duty_max && self.duty_max <= 0.5) {
            return Err(invalid("duty_max", "need 0 <= duty_min < duty_max <= 0.5"));
        }
        if !(self.integral_min <= self.integral_max) {
            return Err(invalid("integral_max", "integral_min exceeds integral_max"));
        }
        Ok(())
    }
}

/// Per-run PID memory.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub last_error: Option<f64>,
}

/// Positional PID with clamped integral and clamped output.
pub fn pid_step(error: f64, dt: f64, gains: &PidGains, state: &mut PidState) -> f64 {
    state.integral = (state.integral + gains.ki * error * dt).clamp(gains.integral_min, gains.integral_max);
    let derivative = match state.last_error {
        Some(prev) => gains.kd * (error - prev) / dt,
        None => 0.0,
    };
    state.last_error = Some(error);
    (gains.bias + gains.kp * error + state.integral + derivative).clamp(gains.duty_min, gains.duty_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_hot(t: Term) -> [f64; 7] {
        let mut g = [0.0; 7];
        g[t.index()] = 1.0;
        g
    }

    #[test]
    fn fuzzify_examples() {
        let ms = MembershipSet::uniform();
        assert_eq!(ms.fuzzify(0.0), one_hot(Term::ZE));
        assert_eq!(ms.fuzzify(-1.0), one_hot(Term::NB));
        assert_eq!(ms.fuzzify(-3.5), one_hot(Term::NB));
        let g = ms.fuzzify(1.0 / 6.0);
        assert_abs_diff_eq!(g[Term::ZE.index()], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g[Term::PS.index()], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn one_hot_at_centers() {
        let ms = MembershipSet::uniform();
        for t in Term::ALL {
            let g = ms.fuzzify(ms.mf(t).b);
            assert_eq!(g, one_hot(t), "{t}");
        }
    }

    #[test]
    fn partition_of_unity_and_symmetry() {
        let ms = MembershipSet::uniform();
        for i in 0..=400 {
            let x = -1.0 + i as f64 * 0.005;
            let g = ms.fuzzify(x);
            assert_abs_diff_eq!(g.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(g.iter().filter(|&&v| v > 0.0).count() <= 2);
            for t in Term::ALL {
                assert_abs_diff_eq!(ms.mf(t).membership(x), ms.mf(t.mirror()).membership(-x), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rule_base_structure() {
        let rb = RuleBase::standard();
        for e in Term::ALL {
            for de in Term::ALL {
                assert_eq!(rb.rule(e.mirror(), de.mirror()), rb.rule(e, de).mirror());
                if let Some(next) = Term::from_index(e.index() + 1) {
                    assert!(rb.rule(next, de) >= rb.rule(e, de));
                }
                if let Some(next) = Term::from_index(de.index() + 1) {
                    assert!(rb.rule(e, next) >= rb.rule(e, de));
                }
            }
        }
    }

    #[test]
    fn grid_roundtrip_and_errors() {
        let rb = RuleBase::standard();
        assert_eq!(RuleBase::parse_grid(&rb.to_grid()).unwrap(), rb);

        let bare: String = rb
            .table
            .iter()
            .map(|r| r.iter().map(|t| t.mnemonic()).collect::<Vec<_>>().join(" ") + "\n")
            .collect();
        assert_eq!(RuleBase::parse_grid(&bare).unwrap(), rb);

        let bad = bare.replacen("NB", "XX", 1);
        assert!(matches!(RuleBase::parse_grid(&bad), Err(Error::RuleParse { line: 1, .. })));
        let short: String = bare.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(RuleBase::parse_grid(&short).is_err());
    }

    #[test]
    fn inference_examples() {
        let rb = RuleBase::standard();
        let ms = MembershipSet::uniform();
        let agg = infer(&one_hot(Term::ZE), &one_hot(Term::ZE), &rb, &ms);
        assert_eq!(agg.strengths, one_hot(Term::ZE));
        let agg = infer(&one_hot(Term::NB), &one_hot(Term::PB), &rb, &ms);
        assert_eq!(agg.strengths, one_hot(Term::ZE));
        let agg = infer(&[0.0; 7], &[0.0; 7], &rb, &ms);
        assert!(agg.is_empty());
        let d = defuzzify_centroid(&agg);
        assert!(!d.fired);
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn centroid_examples() {
        let ms = MembershipSet::uniform();
        let ze = Aggregate { strengths: one_hot(Term::ZE), ms };
        assert_abs_diff_eq!(defuzzify_centroid(&ze).value, 0.0, epsilon = 1e-12);
        let sym = Aggregate { strengths: [0.2, 0.0, 0.7, 0.4, 0.7, 0.0, 0.2], ms };
        assert_abs_diff_eq!(defuzzify_centroid(&sym).value, 0.0, epsilon = 1e-12);
        // right triangle with vertices 2/3 (0), 1 (1), 1 (0): centroid 8/9
        let pb = Aggregate { strengths: one_hot(Term::PB), ms };
        assert_abs_diff_eq!(defuzzify_centroid(&pb).value, 8.0 / 9.0, epsilon = 1e-3);
    }

    #[test]
    fn tabulated_evaluation_matches_reference_path() {
        let c = FuzzyController::default();
        for i in -10..=10 {
            for j in -10..=10 {
                let (e, de) = (i as f64 * 0.13, j as f64 * 0.07);
                let agg = infer(&c.ms.fuzzify(e), &c.ms.fuzzify(de), &c.rules, &c.ms);
                assert_abs_diff_eq!(c.evaluate(e, de), defuzzify_centroid(&agg).value, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn flc_step_signs() {
        let c = FuzzyController::default();
        assert_eq!(c.step(0.0, 0.0), 0.0);
        assert!(c.step(0.5, 0.0) > 0.0);
        assert!(c.step(-0.5, 0.0) < 0.0);
    }

    #[test]
    fn flc_antisymmetric_bounded_monotone() {
        let c = FuzzyController::default();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=200 {
            let e = -0.3 + i as f64 * 0.003;
            let u = c.evaluate(c.cfg.g_e * e, 0.0);
            assert!(u >= prev - 1e-12);
            prev = u;
        }
        for i in -10..=10 {
            for j in -10..=10 {
                let (e, de) = (i as f64 / 10.0, j as f64 / 10.0);
                assert!((c.step(e, de) + c.step(-e, -de)).abs() < 1e-9);
                assert!(c.evaluate(e * 3.0, de * 3.0).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn pid_examples() {
        let mut g = PidGains { duty_min: 0.0, duty_max: 0.5, ..PidGains::default() };
        let mut s = PidState::default();
        assert_eq!(pid_step(0.0, 2e-5, &g, &mut s), g.bias);

        g.ki = 0.0;
        g.kd = 0.0;
        g.kp = 1.0;
        let mut s = PidState::default();
        assert_abs_diff_eq!(pid_step(0.1, 2e-5, &g, &mut s), g.bias + 0.1, epsilon = 1e-15);
    }

    #[test]
    fn pid_integral_ramps_then_clamps() {
        let g = PidGains { kp: 0.0, kd: 0.0, ki: 40.0, integral_max: 0.05, ..PidGains::default() };
        let mut s = PidState::default();
        let (e, dt) = (0.1, 2e-5);
        for n in 1..=200 {
            pid_step(e, dt, &g, &mut s);
            let t = n as f64 * dt;
            assert_abs_diff_eq!(s.integral, (g.ki * e * t).min(0.05), epsilon = 1e-12);
        }
        for _ in 0..20_000 {
            pid_step(e, dt, &g, &mut s);
        }
        assert_eq!(s.integral, 0.05);
    }
}
