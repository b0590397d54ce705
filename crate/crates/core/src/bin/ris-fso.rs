use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ris_fso::cli::{self, RunOptions, DEFAULT_SCENARIO};
use ris_fso::scenario::{ConfigError, Scenario};
use ris_fso::table::ResultTable;

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ris-fso",
    version,
    about = "Performance sweeps for multi-mirror optical wireless links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form and asymptotic BER / outage over the sweep
    Analyze(CommonArgs),
    /// Monte Carlo BER / outage with standard errors
    Simulate(CommonArgs),
    /// Gain from adding one more identical branch
    Gain(CommonArgs),
    /// Optimal power allocation and its checks
    Optimize(CommonArgs),
    /// Run the oracle suite; exits 3 if any check fails
    Validate(CommonArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON file (validate falls back to the built-in single-channel scenario)
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Monte Carlo worker threads (results do not depend on it)
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, hide = true)]
    mutate_m: Option<f64>,
}

enum Failure {
    Config(ConfigError),
    Io(String),
    Validation(Vec<String>),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

fn load(args: &CommonArgs, fallback: bool) -> Result<Scenario, ConfigError> {
    let mut s = match (&args.scenario, fallback) {
        (Some(p), _) => Scenario::from_file(p)?,
        (None, true) => Scenario::from_json(DEFAULT_SCENARIO)?,
        (None, false) => return Err(ConfigError::new("scenario", "--scenario is required")),
    };
    if let Some(seed) = args.seed {
        s.mc.seed = seed;
    }
    if let Some(trials) = args.trials {
        s.mc.trials = trials;
    }
    s.validate()?;
    Ok(s)
}

fn emit(table: &ResultTable, args: &CommonArgs) -> Result<(), Failure> {
    let text = match args.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    match &args.out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    let (args, validate) = match &cmd {
        Command::Validate(a) => (a, true),
        Command::Analyze(a) | Command::Simulate(a) | Command::Gain(a) | Command::Optimize(a) => {
            (a, false)
        }
    };
    let scenario = load(args, validate)?;
    let opts = RunOptions {
        workers: args.workers,
        mutate_m: args.mutate_m,
    };
    if opts.mutate_m.is_some() && !validate {
        return Err(ConfigError::new("mutate_m", "only valid for validate").into());
    }
    log::info!("scenario {} ({})", scenario.name, scenario.hash());
    let table = match cmd {
        Command::Analyze(_) => cli::cmd_analyze(&scenario)?,
        Command::Simulate(_) => cli::cmd_simulate(&scenario, &opts)?,
        Command::Gain(_) => cli::cmd_gain(&scenario)?,
        Command::Optimize(_) => cli::cmd_optimize(&scenario)?,
        Command::Validate(_) => {
            let report = cli::cmd_validate(&scenario, &opts)?;
            emit(&report.table, args)?;
            return if report.passed {
                Ok(())
            } else {
                Err(Failure::Validation(report.failed_checks()))
            };
        }
    };
    emit(&table, args)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("io error: {msg}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Validation(failed)) => {
            eprintln!("validation failed: {}", failed.join(", "));
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
