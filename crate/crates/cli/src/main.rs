//! `odit` command-line tool: train a nonparametric baseline on nominal data,
//! score and detect on streams, simulate change scenarios, calibrate
//! thresholds, and run delay-vs-false-alarm evaluation sweeps.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 data error,
//! 3 numeric/infeasibility error. Data goes to the output stream, every
//! diagnostic to stderr.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use odit::simlab::CalibrationTarget;
use odit_cli::commands;
use odit_cli::config::{resolve, FileConfig, Overrides, ResolvedConfig};
use odit_cli::csvio::open_input;
use odit_cli::{archive, CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "odit",
    version,
    about = "Streaming nonparametric anomaly detection (kNN outlier evidence + CUSUM-style accumulation)"
)]
struct Cli {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct OverrideArgs {
    /// Root seed for every random draw in the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials for calibrate/evaluate.
    #[arg(long)]
    trials: Option<u64>,
    /// Nominal training points generated for calibrate/evaluate.
    #[arg(long)]
    train_size: Option<usize>,
    /// Neighbors per query.
    #[arg(long)]
    k: Option<usize>,
    /// Trailing neighbors entering the total edge length.
    #[arg(long)]
    s: Option<usize>,
    /// Edge-length weighting exponent (default: 1 for d >= 2, 0.5 for d = 1).
    #[arg(long)]
    gamma: Option<f64>,
    /// Baseline significance level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Training points left outside the baseline (default: round(alpha*n1)).
    #[arg(long)]
    tail_count: Option<usize>,
    /// Fraction of training data in the scored partition.
    #[arg(long)]
    partition_fraction: Option<f64>,
    /// Stream dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Nominal per-axis standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Post-change uniform mixture weight.
    #[arg(long)]
    epsilon: Option<f64>,
    /// 1-based index of the first post-change sample.
    #[arg(long)]
    change_time: Option<u64>,
    /// Total stream length.
    #[arg(long)]
    horizon: Option<u64>,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trials: self.trials,
            train_size: self.train_size,
            k: self.k,
            s: self.s,
            gamma: self.gamma,
            alpha: self.alpha,
            tail_count: self.tail_count,
            partition_fraction: self.partition_fraction,
            dim: self.dim,
            sigma: self.sigma,
            epsilon: self.epsilon,
            change_time: self.change_time,
            horizon: self.horizon,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a baseline from a nominal CSV file and save the model archive.
    Train {
        /// Nominal training CSV.
        #[arg(long)]
        data: PathBuf,
        /// Output model archive path.
        #[arg(long)]
        out: PathBuf,
        /// Skip the first row of the data file.
        #[arg(long)]
        has_header: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Emit one outlier-evidence value per data row.
    Score {
        /// Model archive produced by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Input CSV; `-` reads standard input.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        has_header: bool,
        /// Output file; defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the sequential detector over a stream, stopping at the first alarm.
    Detect {
        #[arg(long)]
        model: PathBuf,
        /// Input CSV; `-` reads standard input row by row.
        #[arg(long)]
        data: PathBuf,
        /// Alarm threshold (h > 0).
        #[arg(long)]
        threshold: f64,
        #[arg(long)]
        has_header: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a change-scenario stream as CSV.
    Simulate {
        /// Output file; defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Pick the smallest threshold meeting a false-alarm target.
    Calibrate {
        /// Which detector: odit, cusum, or gcusum.
        #[arg(long)]
        detector: String,
        /// Pre-trained model archive for `odit`; trained from the scenario
        /// when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Target false-alarm probability within the window.
        #[arg(long, conflicts_with = "target_mtfa")]
        target_far: Option<f64>,
        /// Target mean time to false alarm (samples).
        #[arg(long)]
        target_mtfa: Option<f64>,
        /// Nominal window length; defaults to the scenario horizon.
        #[arg(long)]
        window: Option<u64>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Sweep detectors over threshold grids and write the delay-vs-false-alarm
    /// curve CSV.
    Evaluate {
        /// Output curve CSV path.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

fn load_file_config(path: &Option<PathBuf>) -> CliResult<FileConfig> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn resolve_with(path: &Option<PathBuf>, over: &OverrideArgs) -> CliResult<ResolvedConfig> {
    let file = load_file_config(path)?;
    resolve(&file, &over.to_overrides())
}

fn out_writer(out: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    match out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| {
                CliError::Data(format!("cannot create {}: {e}", path.display()))
            })?;
            Ok(Box::new(std::io::BufWriter::new(file)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train {
            data,
            out,
            has_header,
            overrides,
        } => {
            let cfg = resolve_with(&cli.config, &overrides)?;
            let summary = commands::train(&cfg, &data, &out, has_header)?;
            println!("{summary}");
            Ok(())
        }
        Command::Score {
            model,
            data,
            has_header,
            out,
        } => {
            let model = archive::load_model(&model)?;
            let input = open_input(&data)?;
            let mut w = out_writer(&out)?;
            let rows = commands::score(&model, input, has_header, &mut w)?;
            w.flush()
                .map_err(|e| CliError::Data(format!("write failed: {e}")))?;
            eprintln!("scored {rows} rows");
            Ok(())
        }
        Command::Detect {
            model,
            data,
            threshold,
            has_header,
            out,
        } => {
            let model = archive::load_model(&model)?;
            let input = open_input(&data)?;
            let mut w = out_writer(&out)?;
            let outcome = commands::detect(&model, input, has_header, threshold, &mut w)?;
            w.flush()
                .map_err(|e| CliError::Data(format!("write failed: {e}")))?;
            match outcome.alarm_at {
                Some(t) => eprintln!("alarm at t={t} (statistic {})", outcome.final_statistic),
                None => eprintln!("no alarm after {} samples", outcome.rows),
            }
            Ok(())
        }
        Command::Simulate { out, overrides } => {
            let cfg = resolve_with(&cli.config, &overrides)?;
            let mut w = out_writer(&out)?;
            let rows = commands::simulate(&cfg, &mut w)?;
            w.flush()
                .map_err(|e| CliError::Data(format!("write failed: {e}")))?;
            eprintln!("wrote {rows} samples");
            Ok(())
        }
        Command::Calibrate {
            detector,
            model,
            target_far,
            target_mtfa,
            window,
            overrides,
        } => {
            let cfg = resolve_with(&cli.config, &overrides)?;
            let window = window.unwrap_or(cfg.scenario.horizon);
            let target = match (target_far, target_mtfa) {
                (Some(alpha), None) => CalibrationTarget::FalseAlarmProb { alpha, window },
                (None, Some(beta)) => CalibrationTarget::MeanTimeToFalseAlarm { beta, window },
                _ => {
                    return Err(CliError::Usage(
                        "calibrate needs exactly one of --target-far or --target-mtfa".into(),
                    ))
                }
            };
            let loaded = model.as_deref().map(archive::load_model).transpose()?;
            let summary = commands::calibrate(&cfg, &detector, loaded.as_ref(), &target)?;
            println!("{summary}");
            Ok(())
        }
        Command::Evaluate { out, overrides } => {
            let cfg = resolve_with(&cli.config, &overrides)?;
            let summary = commands::evaluate(&cfg, &out)?;
            println!("{summary}");
            Ok(())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; those exit 0.
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
