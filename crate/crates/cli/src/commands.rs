//! The four subcommands. Each writes its files into the configured output
//! directory and returns the paths it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crossreg::control_loop::{Controller, SimTrace, WeightVector};
use crossreg::optim::testfn::TestFunction;
use crossreg::optim::{OptResult, SearchSpace};
use crossreg::scenario::{compare_methods, time_response, Scenario, TimeResponseMetrics};
use crossreg::tuning::tune_weights;

use crate::config::{Format, RunConfig, ALGORITHMS};
use crate::error::CliError;
use crate::svg::{LinePlot, Series};

struct Out<'a> {
    dir: PathBuf,
    cfg: &'a RunConfig,
    written: Vec<PathBuf>,
}

impl<'a> Out<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self, CliError> {
        let dir = cfg.out_dir();
        fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
        Ok(Self { dir, cfg, written: Vec::new() })
    }

    fn write(&mut self, format: Format, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        if !self.cfg.wants(format) {
            return Ok(());
        }
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("report values serialize");
        text.push('\n');
        self.write(Format::Json, name, text)
    }

    fn csv(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        fill(&mut buf).expect("writing to memory");
        self.write(Format::Csv, name, buf)
    }
}

fn trace_plot(trace: &SimTrace, title: &str, markers: Vec<f64>) -> LinePlot {
    let labels = ["+5 V", "+15 V", "-15 V"];
    LinePlot {
        title: title.to_string(),
        x_label: "time (ms)".into(),
        y_label: "output voltage (V)".into(),
        series: (0..3)
            .map(|k| Series {
                name: labels[k].to_string(),
                points: trace.samples.iter().map(|s| (s.t * 1e3, s.v_out[k])).collect(),
            })
            .collect(),
        markers: markers.into_iter().map(|t| t * 1e3).collect(),
    }
}

/// Step-response metrics of each rail up to the first disturbance.
fn startup_metrics(
    cfg: &RunConfig,
    sc: &Scenario,
    weights: &WeightVector,
    controller: &Controller,
) -> Result<Vec<TimeResponseMetrics>, CliError> {
    let end = sc.events.first().map_or(sc.duration, |e| e.t - cfg.loop_cfg.control_period);
    let trace = sc.simulate(&cfg.plant, weights, controller, &cfg.loop_cfg, Some(end))?;
    let refs = cfg.plant.references();
    (1..=3)
        .map(|rail| Ok(time_response(&trace, rail, refs[rail - 1], 0.0, sc.window.min(end / 2.0))?))
        .collect()
}

/// One closed-loop run of the first selected scenario over `loop.sim_duration`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let sc = cfg.selected_scenarios().remove(0);
    let end = cfg.loop_cfg.sim_duration;
    let weights = WeightVector::new(cfg.simulate.weights)?;
    let controller = cfg.controller.build();
    let trace = sc.simulate(&cfg.plant, &weights, &controller, &cfg.loop_cfg, Some(end))?;
    // Snapshots past a shortened run are left out of the report.
    let mut covered = sc.clone();
    covered.snapshot_times.retain(|&t| t <= end + 1e-12);
    let regulation = covered.regulation(&trace, &cfg.plant.references())?;
    let startup = startup_metrics(cfg, &sc, &weights, &controller)?;

    let mut out = Out::new(cfg)?;
    out.csv("trace.csv", |w| trace.write_csv(w))?;
    let title = format!("{} ({}, K = {:.3?})", sc.name, controller.label(), weights.as_array());
    let plot = trace_plot(&trace, &title, sc.events.iter().map(|e| e.t).filter(|&t| t <= end).collect());
    out.write(Format::Svg, "outputs.svg", plot.render())?;
    out.json(
        "simulate.json",
        &json!({
            "scenario": sc.name,
            "weights": weights.as_array(),
            "controller": controller.label(),
            "samples": trace.len(),
            "regulation": regulation,
            "startup": startup,
            "config": cfg,
        }),
    )?;
    Ok(out.written)
}

#[derive(Serialize)]
struct TuneRecord<'a> {
    algo: &'static str,
    seed: u64,
    scenarios: Vec<String>,
    weights: [f64; 3],
    fitness: f64,
    convergence_iter: usize,
    evaluations: usize,
    config: &'a RunConfig,
}

/// Tunes the weights on all selected scenarios together.
pub fn cmd_tune(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let scenarios = cfg.selected_scenarios();
    let algo = cfg.algorithm();
    let controller = cfg.controller.fuzzy();
    let (weights, run) = tune_weights(&algo, &scenarios, &cfg.plant, &cfg.loop_cfg, &controller, cfg.optimizer.execution)?;

    let mut out = Out::new(cfg)?;
    out.json(
        "weights.json",
        &TuneRecord {
            algo: algo.name(),
            seed: algo.seed(),
            scenarios: scenarios.iter().map(|s| s.name.clone()).collect(),
            weights: weights.as_array(),
            fitness: run.best_fitness,
            convergence_iter: run.convergence_iter,
            evaluations: run.evaluations,
            config: cfg,
        },
    )?;
    out.csv("history.csv", |w| run.write_history_csv(w))?;
    out.write(Format::Svg, "convergence.svg", convergence_plot(&[(algo.name(), &run)]).render())?;
    Ok(out.written)
}

fn convergence_plot(runs: &[(&str, &OptResult)]) -> LinePlot {
    LinePlot {
        title: "best fitness per iteration".into(),
        x_label: "iteration".into(),
        y_label: "fitness".into(),
        series: runs
            .iter()
            .map(|(name, r)| Series {
                name: name.to_string(),
                points: r.history.iter().map(|h| (h.iter as f64, h.best_fitness)).collect(),
            })
            .collect(),
        markers: Vec::new(),
    }
}

#[derive(Serialize)]
struct TimeResponseRow {
    method: String,
    scenario: String,
    rail: usize,
    overshoot_pct: f64,
    settling_ms: f64,
    ss_error_pct: f64,
    settled: bool,
}

/// Every configured method on every selected scenario.
pub fn cmd_scenario(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let scenarios = cfg.selected_scenarios();
    let methods = cfg.methods();
    let report = compare_methods(&methods, &scenarios, &cfg.plant, &cfg.loop_cfg, cfg.optimizer.execution)?;

    let mut responses = Vec::new();
    for r in &report.results {
        let sc = scenarios.iter().find(|s| s.name == r.scenario).expect("report scenario was selected");
        let controller = methods
            .iter()
            .find(|m| m.label == r.method)
            .map_or_else(|| cfg.controller.fuzzy(), |m| m.controller.clone());
        let weights = WeightVector::new(r.weights)?;
        for (k, m) in startup_metrics(cfg, sc, &weights, &controller)?.into_iter().enumerate() {
            responses.push(TimeResponseRow {
                method: r.method.clone(),
                scenario: r.scenario.clone(),
                rail: k + 1,
                overshoot_pct: m.overshoot,
                settling_ms: m.settling_time * 1e3,
                ss_error_pct: m.ss_error,
                settled: m.settled,
            });
        }
    }

    let mut out = Out::new(cfg)?;
    out.csv("regulation.csv", |w| report.write_regulation_csv(w))?;
    out.csv("convergence.csv", |w| report.write_convergence_csv(w))?;
    out.csv("time_response.csv", |w| {
        use std::io::Write;
        writeln!(w, "method,scenario,rail,overshoot_pct,settling_ms,ss_error_pct,settled")?;
        for r in &responses {
            writeln!(
                w,
                "{},{},{},{:.4},{:.4},{:.4},{}",
                r.method, r.scenario, r.rail, r.overshoot_pct, r.settling_ms, r.ss_error_pct, r.settled
            )?;
        }
        Ok(())
    })?;
    out.json(
        "report.json",
        &json!({
            "regulation": report.regulation_rows(),
            "convergence": report.convergence_rows(),
            "time_response": responses,
            "weights": report.results.iter().map(|r| json!({
                "method": r.method, "scenario": r.scenario, "weights": r.weights, "fitness": r.fitness,
            })).collect::<Vec<_>>(),
            "not_improved": report.not_improved(),
            "config": cfg,
        }),
    )?;
    Ok(out.written)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub function: String,
    pub algo: String,
    pub seed: u64,
    pub best_fitness: f64,
    pub distance_to_optimum: f64,
    pub best_position: Vec<f64>,
    pub convergence_iter: usize,
    pub evaluations: usize,
}

pub fn bench_rows(cfg: &RunConfig) -> Result<Vec<BenchRow>, CliError> {
    let mut rows = Vec::new();
    for fname in &cfg.bench.functions {
        let f = TestFunction::ALL.into_iter().find(|f| f.name() == fname).expect("validated function name");
        let (lo, hi) = f.bounds();
        let space = SearchSpace::cube(cfg.bench.dim, lo, hi)?;
        let optimum = f.optimum(cfg.bench.dim);
        let objective = move |x: &[f64]| f.eval(x);
        for name in ALGORITHMS {
            for seed in 0..cfg.bench.seeds {
                let algo = cfg.optimizer.algorithm(name, cfg.seed.wrapping_add(seed)).expect("known optimizer");
                let r = algo.run(&space, &objective, cfg.optimizer.execution)?;
                let distance = r.best_position.iter().zip(&optimum).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                rows.push(BenchRow {
                    function: fname.clone(),
                    algo: name.to_string(),
                    seed: algo.seed(),
                    best_fitness: r.best_fitness,
                    distance_to_optimum: distance,
                    best_position: r.best_position,
                    convergence_iter: r.convergence_iter,
                    evaluations: r.evaluations,
                });
            }
        }
    }
    Ok(rows)
}

/// Optimizer validation on the analytic test functions.
pub fn cmd_bench(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let rows = bench_rows(cfg)?;
    let mut out = Out::new(cfg)?;
    out.csv("bench.csv", |w| {
        use std::io::Write;
        writeln!(w, "function,algo,seed,best_fitness,distance_to_optimum,convergence_iter,evaluations")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{:.6e},{:.6e},{},{}",
                r.function, r.algo, r.seed, r.best_fitness, r.distance_to_optimum, r.convergence_iter, r.evaluations
            )?;
        }
        Ok(())
    })?;
    out.json("bench.json", &json!({ "results": rows, "config": cfg }))?;
    Ok(out.written)
}

/// Relative path for display when possible.
pub fn display_path(p: &Path) -> String {
    std::env::current_dir()
        .ok()
        .and_then(|cwd| p.strip_prefix(cwd).ok().map(|r| r.display().to_string()))
        .unwrap_or_else(|| p.display().to_string())
}
