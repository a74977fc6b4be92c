use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dse_cli::experiment::{
    default_max_iter, mode_name, parse_method, parse_mode, run_experiment, ExperimentConfig,
};
use dse_cli::formats::{load_case, load_partition, save_partition, CliError};
use dse_cli::plot::{bar_chart, line_chart};
use dse_cli::report::{emit_report, trace_csv};
use dse_cli::StdClock;
use dse_core::baddata::{count_detections, sensitivity_sweep, SweepOptions};
use dse_core::governor::GovernorConfig;
use dse_core::network::{
    build_measurement_model, simulate_measurements, MeasurementConfig, MeasurementKind,
};
use dse_core::partitioner::{
    area_cut_cost, cut_cost, exhaustive_optimum, optimize_partition, PartitionerOptions,
};
use dse_core::runner::{run_method, SolverParams};
use dse_core::wls::objective;

#[derive(Parser)]
#[command(name = "dse", version, about = "Multi-area DC state estimation bench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one estimator and print the state and objective value
    Estimate(EstimateArgs),
    /// Run a method/mode/seed grid and emit metric reports
    Bench(BenchArgs),
    /// Search for a low-cut-cost area partition
    Partition(PartitionArgs),
    /// Perturb each measurement and report chi-square detections
    Sweep(SweepArgs),
    /// Check case and partition files against the schema
    Validate(ValidateArgs),
}

#[derive(Args)]
struct CommonRun {
    #[arg(long)]
    case: PathBuf,
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long, default_value = "1e-6")]
    epsilon: f64,
    #[arg(long, default_value = "42")]
    seed: u64,
    #[arg(long, default_value = "1e-4")]
    sigma2: f64,
    #[arg(long, default_value = "0.5")]
    tdelay: f64,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonRun,
    #[arg(long, default_value = "centralized")]
    method: String,
    #[arg(long, default_value = "wocc")]
    mode: String,
    /// Directory for the iteration trace and convergence plot
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON file mirroring the experiment configuration; other flags override
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<PathBuf>,
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Method name, comma list, or "all"
    #[arg(long, default_value = "all")]
    method: String,
    /// "wocc", "wcc" or "both"
    #[arg(long, default_value = "both")]
    mode: String,
    #[arg(long, default_value = "1e-6")]
    epsilon: f64,
    /// May be given several times for multi-seed medians
    #[arg(long)]
    seed: Vec<u64>,
    #[arg(long, default_value = "0.5")]
    tdelay: f64,
    #[arg(long, default_value = "1e-4")]
    sigma2: f64,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    case: PathBuf,
    #[arg(long, default_value = "4")]
    k: usize,
    #[arg(long, default_value = "3")]
    blim: usize,
    #[arg(long, default_value = "0.01")]
    w: f64,
    #[arg(long, default_value = "42")]
    seed: u64,
    #[arg(long, default_value = "16")]
    restarts: usize,
    /// Enumerate every assignment instead of local search (10 buses max)
    #[arg(long)]
    exhaustive: bool,
    /// Output partition JSON path
    #[arg(long, default_value = "partition.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonRun,
    #[arg(long, default_value = "decomposition")]
    method: String,
    #[arg(long, default_value = "1.1")]
    factor: f64,
    #[arg(long, default_value = "0.95")]
    confidence: f64,
    #[arg(long, default_value = "sweep")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    case: PathBuf,
    #[arg(long)]
    partition: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => estimate(args),
        Command::Bench(args) => bench(args),
        Command::Partition(args) => partition(args),
        Command::Sweep(args) => sweep(args),
        Command::Validate(args) => validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn estimate(args: EstimateArgs) -> Result<(), CliError> {
    let method = parse_method(&args.method)?;
    let mode = parse_mode(&args.mode)?;
    let network = load_case(&args.common.case)?;
    let partition = match &args.common.partition {
        Some(p) => {
            let part = load_partition(p)?;
            part.validate_for(&network)?;
            Some(part)
        }
        None => None,
    };
    let model = build_measurement_model(
        &network,
        &MeasurementConfig {
            sigma2: args.common.sigma2,
            ..Default::default()
        },
    )?;
    let z = simulate_measurements(&model, args.common.seed);
    let mut config = GovernorConfig::new(
        args.common.epsilon,
        mode,
        args.common.max_iter.unwrap_or(default_max_iter(method)),
    );
    config.tdelay = args.common.tdelay;
    let params = SolverParams {
        seed: args.common.seed,
        ..Default::default()
    };
    let clock = StdClock::new();
    let trace = run_method(
        method,
        &network,
        &model,
        &z,
        partition.as_ref(),
        &params,
        &config,
        &clock,
    )?;

    println!(
        "method={} mode={} iterations={} converged={}",
        method.name(),
        mode_name(mode),
        trace.iterations,
        trace.converged
    );
    for bus in network.buses() {
        let angle = trace
            .final_state
            .angle(&network, bus.id)
            .expect("bus exists");
        println!("theta[{}] = {angle:.9}", bus.id);
    }
    println!("ov = {:.9}", objective(&model, &z, &trace.final_state));

    if let Some(out) = args.out {
        std::fs::create_dir_all(&out).map_err(|source| CliError::Io {
            path: out.display().to_string(),
            source,
        })?;
        std::fs::write(out.join("trace.csv"), trace_csv(&trace)).map_err(|source| {
            CliError::Io {
                path: out.display().to_string(),
                source,
            }
        })?;
        let series = vec![(
            method.name().to_string(),
            trace
                .records
                .iter()
                .filter(|r| r.max_delta.is_finite())
                .map(|r| (r.iteration as f64, r.max_delta))
                .collect(),
        )];
        line_chart(&out.join("convergence.svg"), "max state delta", &series)?;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            serde_json::from_str::<ExperimentConfig>(&text).map_err(|source| CliError::Json {
                path: path.display().to_string(),
                source,
            })?
        }
        None => {
            let case = args
                .case
                .clone()
                .ok_or_else(|| CliError::Invalid("--case is required without --config".into()))?;
            let partition = args.partition.clone().ok_or_else(|| {
                CliError::Invalid("--partition is required without --config".into())
            })?;
            ExperimentConfig {
                case,
                partition,
                methods: Vec::new(),
                modes: Vec::new(),
                epsilon: args.epsilon,
                seeds: Vec::new(),
                tdelay: args.tdelay,
                sigma2: args.sigma2,
                max_iter: args.max_iter,
            }
        }
    };
    if config.methods.is_empty() {
        config.methods = expand_methods(&args.method)?;
    }
    if config.modes.is_empty() {
        config.modes = expand_modes(&args.mode)?;
    }
    if config.seeds.is_empty() {
        config.seeds = if args.seed.is_empty() {
            vec![42]
        } else {
            args.seed.clone()
        };
    }

    let clock = StdClock::new();
    let outcomes = run_experiment(&config, &clock)?;
    emit_report(&outcomes, &args.out)?;

    let failures = outcomes.iter().filter(|o| o.row.error.is_some()).count();
    for o in &outcomes {
        if let Some(err) = &o.row.error {
            eprintln!(
                "run {}/{} seed {} failed: {err}",
                o.row.method, o.row.mode, o.row.seed
            );
        }
    }
    println!(
        "{} runs, {} failed, reports in {}",
        outcomes.len(),
        failures,
        args.out.display()
    );
    if failures == outcomes.len() {
        return Err(CliError::Invalid("all runs failed".into()));
    }

    let series: Vec<(String, Vec<(f64, f64)>)> = outcomes
        .iter()
        .filter_map(|o| {
            o.trace.as_ref().map(|t| {
                (
                    format!("{} {} s{}", o.row.method, o.row.mode, o.row.seed),
                    t.records
                        .iter()
                        .filter(|r| r.max_delta.is_finite() && r.max_delta > 0.0)
                        .map(|r| (r.iteration as f64, r.max_delta))
                        .collect::<Vec<_>>(),
                )
            })
        })
        .filter(|(_, pts)| !pts.is_empty())
        .collect();
    if !series.is_empty() {
        line_chart(
            &args.out.join("convergence.svg"),
            "max state delta per iteration",
            &series,
        )?;
    }
    Ok(())
}

fn expand_methods(spec: &str) -> Result<Vec<String>, CliError> {
    if spec == "all" {
        return Ok(vec![
            "splitting".into(),
            "gossip".into(),
            "decomposition".into(),
            "admm".into(),
        ]);
    }
    let mut out = Vec::new();
    for name in spec.split(',') {
        parse_method(name.trim())?;
        out.push(name.trim().to_string());
    }
    Ok(out)
}

fn expand_modes(spec: &str) -> Result<Vec<String>, CliError> {
    if spec == "both" {
        return Ok(vec!["wocc".into(), "wcc".into()]);
    }
    parse_mode(spec)?;
    Ok(vec![spec.to_string()])
}

fn partition(args: PartitionArgs) -> Result<(), CliError> {
    let network = load_case(&args.case)?;
    let options = PartitionerOptions {
        k: args.k,
        b_lim: args.blim,
        weight: args.w,
        restarts: args.restarts,
        seed: args.seed,
        ..Default::default()
    };
    let (part, cost) = if args.exhaustive {
        exhaustive_optimum(&network, &options)?
    } else {
        optimize_partition(&network, &options)?
    };
    save_partition(&args.out, &part)?;
    for (k, area) in part.areas().iter().enumerate() {
        let j_k = area_cut_cost(&network, &part, k, args.w);
        println!("area {k}: {} buses, J = {j_k:.4}", area.len());
    }
    let check = cut_cost(&network, &part, args.w)?;
    debug_assert!((check - cost).abs() < 1e-12);
    println!("total cost = {cost:.4}, written to {}", args.out.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let method = parse_method(&args.method)?;
    let network = load_case(&args.common.case)?;
    let partition_path = args
        .common
        .partition
        .as_ref()
        .ok_or_else(|| CliError::Invalid("--partition is required for sweep".into()))?;
    let partition = load_partition(partition_path)?;
    partition.validate_for(&network)?;
    let model = build_measurement_model(
        &network,
        &MeasurementConfig {
            sigma2: args.common.sigma2,
            ..Default::default()
        },
    )?;
    let z = if args.common.sigma2 > 0.0 {
        simulate_measurements(&model, args.common.seed)
    } else {
        model.true_values()
    };
    let config = GovernorConfig::new(
        args.common.epsilon,
        dse_core::governor::Mode::Wocc,
        args.common.max_iter.unwrap_or(default_max_iter(method)),
    );
    let options = SweepOptions {
        factor: args.factor,
        confidence: args.confidence,
        method,
    };
    let params = SolverParams {
        seed: args.common.seed,
        ..Default::default()
    };
    let clock = StdClock::new();
    let result = sensitivity_sweep(
        &network, &model, &z, &partition, &options, &params, &config, &clock,
    )?;

    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Io {
        path: args.out.display().to_string(),
        source,
    })?;
    let mut csv = String::from("measurement_index,kind,location,area,objective,threshold,exceeds\n");
    for (index, row) in result.grid.iter().enumerate() {
        let (kind, location) = match model.measurements()[index].kind {
            MeasurementKind::Flow(b) => {
                let branch = &network.branches()[b];
                ("flow", format!("{}-{}", branch.from, branch.to))
            }
            MeasurementKind::Injection(bus) => ("injection", format!("{bus}")),
        };
        for (area, cell) in row.iter().enumerate() {
            let threshold = result.thresholds[area];
            let (objective, exceeds) = match cell {
                Some(v) => (format!("{v}"), *v > threshold),
                None => ("error".to_string(), false),
            };
            csv.push_str(&format!(
                "{index},{kind},{location},{area},{objective},{threshold},{exceeds}\n"
            ));
        }
    }
    std::fs::write(args.out.join("sweep.csv"), csv).map_err(|source| CliError::Io {
        path: args.out.display().to_string(),
        source,
    })?;

    for area in 0..result.thresholds.len() {
        let values: Vec<f64> = result
            .grid
            .iter()
            .map(|row| row[area].unwrap_or(0.0))
            .collect();
        bar_chart(
            &args.out.join(format!("sweep_area{area}.svg")),
            &format!("area {area} objective per perturbed measurement"),
            &values,
            Some(result.thresholds[area]),
        )?;
    }

    println!("detections = {}", count_detections(&result));
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), CliError> {
    let network = load_case(&args.case)?;
    println!(
        "case ok: {} buses, {} branches, slack {}",
        network.bus_count(),
        network.branches().len(),
        network.slack()
    );
    if let Some(p) = args.partition {
        let part = load_partition(&p)?;
        part.validate_for(&network)?;
        println!("partition ok: {} areas", part.area_count());
    }
    Ok(())
}
