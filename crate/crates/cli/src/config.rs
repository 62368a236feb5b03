//! Run configuration: strict TOML parsing, plant overrides and the fully
//! resolved settings echoed into every report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crossreg::control_loop::{Controller, LoopConfig, WeightVector};
use crossreg::fuzzy::{FuzzyConfig, FuzzyController, PidGains};
use crossreg::optim::{AcorConfig, Algorithm, Execution, IcaConfig, PsoConfig};
use crossreg::plant::{derive_default_params, ConverterParams, EventKind, NUM_OUTPUTS};
use crossreg::scenario::{builtin_scenarios, Method, Scenario, WeightSource, BASELINE_LABEL};

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CROSSREG_OUT";
pub const DEFAULT_OUT_DIR: &str = "crossreg-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(format!("unknown format `{other}` (expected csv, json or svg)")),
        }
    }
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    #[default]
    Fuzzy,
    Pid,
    Fixed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub fuzzy: FuzzyConfig,
    pub pid: PidGains,
}

impl ControllerConfig {
    pub fn fuzzy(&self) -> Controller {
        Controller::Fuzzy(Box::new(FuzzyController::with_config(self.fuzzy)))
    }

    pub fn build(&self) -> Controller {
        match self.kind {
            ControllerKind::Fuzzy => self.fuzzy(),
            ControllerKind::Pid => Controller::Pid(self.pid),
            ControllerKind::Fixed => Controller::Fixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub algo: String,
    pub execution: Execution,
    pub ica: IcaConfig,
    pub pso: PsoConfig,
    pub aco: AcorConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algo: "ica".to_string(),
            execution: Execution::Parallel,
            ica: IcaConfig::default(),
            pso: PsoConfig::default(),
            aco: AcorConfig::default(),
        }
    }
}

impl OptimizerConfig {
    /// The named optimizer with its configured settings and `seed`.
    pub fn algorithm(&self, name: &str, seed: u64) -> Option<Algorithm> {
        let algo = match name {
            "ica" => Algorithm::Ica(self.ica),
            "pso" => Algorithm::Pso(self.pso),
            "aco" => Algorithm::Aco(self.aco),
            _ => return None,
        };
        Some(algo.with_seed(seed))
    }
}

pub const ALGORITHMS: [&str; 3] = ["ica", "pso", "aco"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Scenarios to run, by name.
    pub names: Vec<String>,
    /// Extra scenarios defined inline.
    pub custom: Vec<Scenario>,
    /// `constant`, `pid` or an optimizer name.
    pub methods: Vec<String>,
    /// Load multiplier of the +15 V step scenario.
    pub load15_factor: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            names: builtin_scenarios().into_iter().map(|s| s.name).collect(),
            custom: Vec::new(),
            methods: ["constant", "pid", "ica", "pso", "aco"].map(String::from).to_vec(),
            load15_factor: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Raw weights; normalized before use.
    pub weights: [f64; NUM_OUTPUTS],
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { weights: [1.0; NUM_OUTPUTS] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub functions: Vec<String>,
    pub dim: usize,
    pub seeds: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { functions: vec!["sphere".into(), "rosenbrock".into()], dim: 3, seeds: 10 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    out_dir: Option<PathBuf>,
    #[serde(default = "all_formats")]
    formats: Vec<Format>,
    #[serde(default)]
    plant: BTreeMap<String, f64>,
    #[serde(default, rename = "loop")]
    loop_cfg: LoopConfig,
    #[serde(default)]
    controller: ControllerConfig,
    #[serde(default)]
    optimizer: OptimizerConfig,
    #[serde(default)]
    scenario: ScenarioConfig,
    #[serde(default)]
    simulate: SimulateConfig,
    #[serde(default)]
    bench: BenchConfig,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub plant: ConverterParams,
    #[serde(rename = "loop")]
    pub loop_cfg: LoopConfig,
    pub controller: ControllerConfig,
    pub optimizer: OptimizerConfig,
    pub scenario: ScenarioConfig,
    pub simulate: SimulateConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config_str("").expect("defaults are valid")
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub algo: Option<String>,
    pub scenario: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        CliError::Config { message: e.message().to_string(), line }
    })?;
    let mut plant = derive_default_params();
    let mut loop_cfg = raw.loop_cfg;
    for (key, value) in &raw.plant {
        apply_plant_override(&mut plant, key, *value)?;
        if key == "f_sw" {
            loop_cfg.control_period = 1.0 / value;
        }
    }
    let cfg = RunConfig {
        seed: raw.seed,
        out_dir: raw.out_dir,
        formats: raw.formats,
        plant,
        loop_cfg,
        controller: raw.controller,
        optimizer: raw.optimizer,
        scenario: raw.scenario,
        simulate: raw.simulate,
        bench: raw.bench,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn rail_key(key: &str) -> Option<(&str, usize)> {
    let (name, idx) = key.rsplit_once('_')?;
    let idx: usize = idx.parse().ok()?;
    (1..=NUM_OUTPUTS).contains(&idx).then_some((name, idx - 1))
}

/// Sets one `[plant]` value. Rail parameters carry a `_1`..`_3` suffix.
pub fn apply_plant_override(p: &mut ConverterParams, key: &str, value: f64) -> Result<(), CliError> {
    let bad = || CliError::config(format!("plant.{key}: unknown plant parameter"));
    match key {
        "v_in_nominal" => p.v_in_nominal = value,
        "v_in_min" => p.v_in_min = value,
        "v_in_max" => p.v_in_max = value,
        "f_sw" => p.f_sw = value,
        "r_d" => p.r_source = value,
        "r_primary" => p.r_primary = value,
        _ => {
            let (name, k) = rail_key(key).ok_or_else(bad)?;
            let o = &mut p.outputs[k];
            match name {
                "L" => o.inductance = value,
                "C" => o.capacitance = value,
                "r_c" => o.esr = value,
                "r_series" => o.r_series = value,
                "n" => o.turns_ratio = value,
                "r_load" => o.r_load = value,
                "p_rated" => {
                    o.p_rated = value;
                    o.r_load = o.v_ref * o.v_ref / value;
                }
                _ => return Err(bad()),
            }
        }
    }
    Ok(())
}

fn section_error(section: &str, e: crossreg::Error) -> CliError {
    match e {
        crossreg::Error::InvalidParameter { name, reason } => CliError::config(format!("{section}.{name}: {reason}")),
        other => CliError::config(format!("{section}: {other}")),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.plant.validate().map_err(|e| section_error("plant", e))?;
        self.loop_cfg.validate().map_err(|e| section_error("loop", e))?;
        self.controller.fuzzy.validate().map_err(|e| section_error("controller.fuzzy", e))?;
        self.controller.pid.validate().map_err(|e| section_error("controller.pid", e))?;
        self.optimizer.ica.validate().map_err(|e| section_error("optimizer.ica", e))?;
        self.optimizer.pso.validate().map_err(|e| section_error("optimizer.pso", e))?;
        self.optimizer.aco.validate().map_err(|e| section_error("optimizer.aco", e))?;
        if !ALGORITHMS.contains(&self.optimizer.algo.as_str()) {
            return Err(CliError::config(format!("optimizer.algo: unknown optimizer `{}`", self.optimizer.algo)));
        }
        if self.formats.is_empty() {
            return Err(CliError::config("formats: at least one output format is required"));
        }
        if !(self.scenario.load15_factor > 0.0) {
            return Err(CliError::config("scenario.load15_factor: must be > 0"));
        }
        WeightVector::new(self.simulate.weights).map_err(|e| section_error("simulate", e))?;
        let available = self.available_scenarios();
        for s in &available {
            s.validate().map_err(|e| section_error("scenario", e))?;
        }
        for name in &self.scenario.names {
            if !available.iter().any(|s| &s.name == name) {
                return Err(CliError::config(format!("scenario.names: unknown scenario `{name}`")));
            }
        }
        if self.scenario.names.is_empty() {
            return Err(CliError::config("scenario.names: no scenario selected"));
        }
        for m in &self.scenario.methods {
            if !(m == BASELINE_LABEL || m == "pid" || ALGORITHMS.contains(&m.as_str())) {
                return Err(CliError::config(format!("scenario.methods: unknown method `{m}`")));
            }
        }
        for f in &self.bench.functions {
            if !["sphere", "rosenbrock"].contains(&f.as_str()) {
                return Err(CliError::config(format!("bench.functions: unknown function `{f}`")));
            }
        }
        if self.bench.dim == 0 || self.bench.seeds == 0 {
            return Err(CliError::config("bench: dim and seeds must be >= 1"));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(algo) = &o.algo {
            self.optimizer.algo = algo.to_ascii_lowercase();
        }
        if let Some(name) = &o.scenario {
            self.scenario.names = vec![name.clone()];
        }
        if let Some(dir) = &o.out_dir {
            self.out_dir = Some(dir.clone());
        }
        if let Some(f) = &o.formats {
            self.formats = f.clone();
        }
        self.validate()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    /// Built-in scenarios (with the configured load factor) plus inline ones.
    pub fn available_scenarios(&self) -> Vec<Scenario> {
        let mut all = builtin_scenarios();
        for s in &mut all {
            for e in &mut s.events {
                if let EventKind::LoadScale { output: 2, factor } = &mut e.kind {
                    *factor = self.scenario.load15_factor;
                }
            }
        }
        all.extend(self.scenario.custom.iter().cloned());
        all
    }

    pub fn selected_scenarios(&self) -> Vec<Scenario> {
        let all = self.available_scenarios();
        self.scenario
            .names
            .iter()
            .filter_map(|n| all.iter().find(|s| &s.name == n).cloned())
            .collect()
    }

    pub fn algorithm(&self) -> Algorithm {
        self.optimizer.algorithm(&self.optimizer.algo, self.seed).expect("validated optimizer name")
    }

    pub fn methods(&self) -> Vec<Method> {
        self.scenario
            .methods
            .iter()
            .map(|m| match m.as_str() {
                "pid" => Method {
                    label: m.clone(),
                    weights: WeightSource::Fixed(WeightVector::uniform()),
                    controller: Controller::Pid(self.controller.pid),
                },
                BASELINE_LABEL => Method {
                    label: m.clone(),
                    weights: WeightSource::Fixed(WeightVector::uniform()),
                    controller: self.controller.fuzzy(),
                },
                algo => Method {
                    label: m.clone(),
                    weights: WeightSource::Tuned(self.optimizer.algorithm(algo, self.seed).expect("validated method")),
                    controller: self.controller.fuzzy(),
                },
            })
            .collect()
    }
}
