//! Benchmark orchestration: runs (method, mode, seed) combinations and
//! reduces them to metric rows comparable with the reference tables.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use dse_core::governor::{GovernorConfig, Mode, SolverTrace};
use dse_core::network::{build_measurement_model, simulate_measurements, MeasurementConfig};
use dse_core::runner::{error_metrics, run_method, Method, SolverParams};
use dse_core::wls::{build_gain, objective, solve_wls};
use dse_core::Clock;

use crate::formats::{load_case, load_partition, CliError, Result};

/// Default iteration caps per method; the first-order methods need far more
/// rounds than the per-area solvers. Gossip activates a single area pair per
/// round, so its cap is much higher than the sweep-based methods.
pub fn default_max_iter(method: Method) -> usize {
    match method {
        Method::Centralized => 1,
        Method::Splitting => 100_000,
        Method::Gossip => 2_000_000,
        Method::Decomposition => 1_000,
        Method::Admm => 5_000,
    }
}

pub fn parse_method(name: &str) -> Result<Method> {
    Method::ALL
        .into_iter()
        .find(|m| m.name() == name)
        .ok_or_else(|| CliError::Invalid(format!("unknown method '{name}'")))
}

pub fn parse_mode(name: &str) -> Result<Mode> {
    match name {
        "wocc" => Ok(Mode::Wocc),
        "wcc" => Ok(Mode::Wcc),
        other => Err(CliError::Invalid(format!("unknown mode '{other}'"))),
    }
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Wocc => "wocc",
        Mode::Wcc => "wcc",
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub case: PathBuf,
    pub partition: PathBuf,
    pub methods: Vec<String>,
    pub modes: Vec<String>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_tdelay")]
    pub tdelay: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_tdelay() -> f64 {
    0.5
}

fn default_sigma2() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: String,
    pub mode: String,
    pub seed: u64,
    pub iter: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub cb_seconds: f64,
    pub ot_seconds: f64,
    pub ov: f64,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub row: MetricsRow,
    pub trace: Option<SolverTrace>,
}

fn validate(config: &ExperimentConfig) -> Result<()> {
    if config.methods.is_empty() {
        return Err(CliError::Invalid("at least one method required".into()));
    }
    if config.modes.is_empty() {
        return Err(CliError::Invalid("at least one mode required".into()));
    }
    if config.seeds.is_empty() {
        return Err(CliError::Invalid("at least one seed required".into()));
    }
    if !(config.epsilon > 0.0) {
        return Err(CliError::Invalid(format!(
            "epsilon must be > 0, got {}",
            config.epsilon
        )));
    }
    Ok(())
}

/// Runs the full (method, mode, seed) grid. Individual failures become error
/// rows; only configuration problems abort the experiment.
pub fn run_experiment(config: &ExperimentConfig, clock: &dyn Clock) -> Result<Vec<RunOutcome>> {
    validate(config)?;
    let network = load_case(&config.case)?;
    let partition = load_partition(&config.partition)?;
    partition.validate_for(&network)?;
    let methods: Vec<Method> = config
        .methods
        .iter()
        .map(|m| parse_method(m))
        .collect::<Result<_>>()?;
    let modes: Vec<Mode> = config
        .modes
        .iter()
        .map(|m| parse_mode(m))
        .collect::<Result<_>>()?;

    let model = build_measurement_model(
        &network,
        &MeasurementConfig {
            sigma2: config.sigma2,
            ..Default::default()
        },
    )?;

    let mut outcomes = Vec::new();
    for &seed in &config.seeds {
        let z = simulate_measurements(&model, seed);
        let gain = build_gain(&model, &z)?;
        let reference = solve_wls(&gain)?;
        for &method in &methods {
            for &mode in &modes {
                let mut governor = GovernorConfig::new(
                    config.epsilon,
                    mode,
                    config.max_iter.unwrap_or(default_max_iter(method)),
                );
                governor.tdelay = config.tdelay;
                let params = SolverParams {
                    seed,
                    ..Default::default()
                };
                let run = run_method(
                    method,
                    &network,
                    &model,
                    &z,
                    Some(&partition),
                    &params,
                    &governor,
                    clock,
                );
                let outcome = match run {
                    Ok(trace) => {
                        let (eps1, eps2) = error_metrics(&trace.final_state, &reference);
                        let ov = objective(&model, &z, &trace.final_state);
                        let row = MetricsRow {
                            method: method.name().into(),
                            mode: mode_name(mode).into(),
                            seed,
                            iter: trace.iterations,
                            eps1,
                            eps2,
                            cb_seconds: trace.cb_seconds,
                            ot_seconds: trace.overall_time(config.tdelay),
                            ov,
                            error: None,
                        };
                        RunOutcome {
                            row,
                            trace: Some(trace),
                        }
                    }
                    Err(e) => RunOutcome {
                        row: MetricsRow {
                            method: method.name().into(),
                            mode: mode_name(mode).into(),
                            seed,
                            iter: 0,
                            eps1: f64::NAN,
                            eps2: f64::NAN,
                            cb_seconds: 0.0,
                            ot_seconds: 0.0,
                            ov: f64::NAN,
                            error: Some(format!("{e}")),
                        },
                        trace: None,
                    },
                };
                outcomes.push(outcome);
            }
        }
    }
    Ok(outcomes)
}

fn median_f64(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN here"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median across seeds per (method, mode), skipping error rows. The median
/// row keeps seed 0 as a placeholder since it aggregates several runs.
pub fn aggregate_rows(rows: &[MetricsRow]) -> Vec<MetricsRow> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let key = (r.method.clone(), r.mode.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out = Vec::new();
    for (method, mode) in keys {
        let group: Vec<&MetricsRow> = rows
            .iter()
            .filter(|r| r.method == method && r.mode == mode && r.error.is_none())
            .collect();
        if group.is_empty() {
            continue;
        }
        let mut iters: Vec<f64> = group.iter().map(|r| r.iter as f64).collect();
        let mut eps1: Vec<f64> = group.iter().map(|r| r.eps1).collect();
        let mut eps2: Vec<f64> = group.iter().map(|r| r.eps2).collect();
        let mut cb: Vec<f64> = group.iter().map(|r| r.cb_seconds).collect();
        let mut ot: Vec<f64> = group.iter().map(|r| r.ot_seconds).collect();
        let mut ov: Vec<f64> = group.iter().map(|r| r.ov).collect();
        out.push(MetricsRow {
            method,
            mode,
            seed: 0,
            iter: median_f64(&mut iters).round() as usize,
            eps1: median_f64(&mut eps1),
            eps2: median_f64(&mut eps2),
            cb_seconds: median_f64(&mut cb),
            ot_seconds: median_f64(&mut ot),
            ov: median_f64(&mut ov),
            error: None,
        });
    }
    out
}
