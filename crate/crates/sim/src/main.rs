//! Command-line front end: run one scenario or a parameter sweep and write
//! CSV (and optionally JSON) reports.

use clap::{Args, Parser, Subcommand};
use idnc_sim::config::{ConfigError, SchedulerKind, SimConfig};
use idnc_sim::report::{run_scenario, write_csv, write_json, ScenarioReport, SimError, SummaryRow};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "idnc-sim",
    version,
    about = "Monte Carlo simulator for deadline-constrained layered broadcast"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its summary row.
    Simulate(SimulateArgs),
    /// Run the cross product of parameter lists, one summary row each.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// TOML scenario file; omitted fields use defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write the CSV summary to this file instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write a JSON report with per-run detail.
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    output: OutputArgs,
    /// ew-idnc, now-idnc, max-clique, or ew-rlnc.
    #[arg(long, value_parser = parse_scheduler)]
    scheduler: Option<SchedulerKind>,
    /// Completion-confidence floor in [0, 1].
    #[arg(long)]
    lambda: Option<f64>,
    /// Transmission slots per block (overrides any configured bitrate).
    #[arg(long)]
    theta: Option<usize>,
    /// Source rate in bytes per second (overrides any configured theta).
    #[arg(long)]
    bitrate: Option<u64>,
    #[arg(long)]
    receivers: Option<usize>,
    #[arg(long)]
    erasure_mean: Option<f64>,
    #[arg(long)]
    erasure_spread: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    output: OutputArgs,
    /// Comma-separated scheduler list.
    #[arg(long, value_delimiter = ',', value_parser = parse_scheduler)]
    scheduler: Vec<SchedulerKind>,
    /// Comma-separated confidence floors.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Comma-separated slot budgets.
    #[arg(long, value_delimiter = ',')]
    theta: Vec<usize>,
    /// Comma-separated audience sizes.
    #[arg(long, value_delimiter = ',')]
    receivers: Vec<usize>,
    /// Comma-separated average erasure probabilities.
    #[arg(long, value_delimiter = ',')]
    erasure_mean: Vec<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_scheduler(s: &str) -> Result<SchedulerKind, String> {
    s.parse().map_err(|e: ConfigError| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Simulate(args) => {
            let mut config = base_config(&args.output)?;
            if let Some(s) = args.scheduler {
                config.scheduler = s;
            }
            if let Some(l) = args.lambda {
                config.lambda = l;
            }
            if let Some(t) = args.theta {
                config.theta = Some(t);
                config.bitrate = None;
            }
            if let Some(b) = args.bitrate {
                config.bitrate = Some(b);
                config.theta = None;
            }
            if let Some(m) = args.receivers {
                config.receivers = m;
            }
            if let Some(e) = args.erasure_mean {
                config.erasure_mean = e;
            }
            if let Some(e) = args.erasure_spread {
                config.erasure_spread = e;
            }
            if let Some(r) = args.runs {
                config.runs = r;
            }
            if let Some(s) = args.seed {
                config.seed = s;
            }
            let report = run_scenario(&config)?;
            emit(&args.output, vec![report])
        }
        Command::Sweep(args) => {
            let mut base = base_config(&args.output)?;
            if let Some(r) = args.runs {
                base.runs = r;
            }
            if let Some(s) = args.seed {
                base.seed = s;
            }
            let schedulers = or_base(&args.scheduler, base.scheduler);
            let lambdas = or_base(&args.lambda, base.lambda);
            let thetas: Vec<Option<usize>> = if args.theta.is_empty() {
                vec![None]
            } else {
                args.theta.iter().map(|&t| Some(t)).collect()
            };
            let receivers = or_base(&args.receivers, base.receivers);
            let erasure_means = or_base(&args.erasure_mean, base.erasure_mean);

            let mut reports = Vec::new();
            for &scheduler in &schedulers {
                for &lambda in &lambdas {
                    for &theta in &thetas {
                        for &m in &receivers {
                            for &erasure_mean in &erasure_means {
                                let mut config = base.clone();
                                config.scheduler = scheduler;
                                config.lambda = lambda;
                                if let Some(t) = theta {
                                    config.theta = Some(t);
                                    config.bitrate = None;
                                }
                                config.receivers = m;
                                config.erasure_mean = erasure_mean;
                                reports.push(run_scenario(&config)?);
                            }
                        }
                    }
                }
            }
            emit(&args.output, reports)
        }
    }
}

fn base_config(output: &OutputArgs) -> Result<SimConfig, SimError> {
    match &output.config {
        Some(path) => Ok(SimConfig::load(path)?),
        None => Ok(SimConfig::default()),
    }
}

fn or_base<T: Copy>(list: &[T], base: T) -> Vec<T> {
    if list.is_empty() {
        vec![base]
    } else {
        list.to_vec()
    }
}

fn emit(output: &OutputArgs, reports: Vec<ScenarioReport>) -> Result<(), SimError> {
    let rows: Vec<SummaryRow> = reports.iter().map(|r| r.summary.clone()).collect();
    match &output.out {
        Some(path) => write_csv(&rows, std::fs::File::create(path)?)?,
        None => write_csv(&rows, std::io::stdout().lock())?,
    }
    if let Some(path) = &output.json {
        write_json(&reports, std::fs::File::create(path)?)?;
    }
    Ok(())
}
