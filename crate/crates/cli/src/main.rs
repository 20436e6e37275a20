//! `ginn`: command-line harness for volatility forecasting experiments.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "ginn", version, about = "GARCH and GARCH-informed LSTM volatility forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    options: Options,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Read a price CSV and write returns and ground-truth variances.
    Ingest,
    /// Simulate a GARCH(1,1) series with known conditional variance.
    Simulate,
    /// Produce out-of-sample variance forecasts for the chosen models.
    Forecast,
    /// Train neural models and save one checkpoint per seed.
    Train,
    /// Score predictions against ground truth and write residual spectra.
    Evaluate,
    /// Train GINNs across a grid of loss weights.
    Sweep,
    /// Compare GARCH and GINN across simulated persistence levels.
    Persistence,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Simulate => "simulate",
            Command::Forecast => "forecast",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Sweep => "sweep",
            Command::Persistence => "persistence",
        }
    }
}

/// Every option may also be set as `key = value` in the `--config` file;
/// flags take precedence.
#[derive(Args)]
struct Options {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Price CSV for `ingest`; input directory for the other commands.
    #[arg(long, global = true)]
    data: Option<String>,
    /// Ground-truth variance CSV (defaults to sigma2_true.csv in the input directory).
    #[arg(long, global = true)]
    truth: Option<String>,
    /// Prediction CSV to evaluate instead of pred_<model>.csv.
    #[arg(long, global = true)]
    pred: Option<String>,
    /// chrono format of the dates in the price CSV.
    #[arg(long, global = true)]
    date_format: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    /// First test date (YYYY-MM-DD); otherwise taken from --split-fraction.
    #[arg(long, global = true)]
    split_date: Option<String>,
    #[arg(long, global = true)]
    split_fraction: Option<String>,
    /// Rolling window length in days.
    #[arg(long, global = true)]
    window: Option<String>,
    /// Comma-separated models: garch, gjr, tgarch, lstm, ginn, ginn0.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Loss weight on the ground truth for `ginn`.
    #[arg(long, global = true)]
    lambda: Option<String>,
    /// Comma-separated loss weights for `sweep`.
    #[arg(long, global = true)]
    lambdas: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<String>,
    /// Comma-separated seeds; `simulate` uses the first.
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    layers: Option<String>,
    #[arg(long, global = true)]
    width: Option<String>,
    #[arg(long, global = true)]
    dropout: Option<String>,
    #[arg(long, global = true)]
    batch_size: Option<String>,
    #[arg(long, global = true)]
    learning_rate: Option<String>,
    #[arg(long, global = true)]
    weight_decay: Option<String>,
    /// Refit GARCH every N windows.
    #[arg(long, global = true)]
    refit_every: Option<String>,
    /// GARCH residuals: `window` (demeaned) or `ar`.
    #[arg(long, global = true)]
    residuals: Option<String>,
    #[arg(long, global = true)]
    alpha0: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<String>,
    #[arg(long, global = true)]
    beta: Option<String>,
    /// Simulated series length.
    #[arg(long, global = true)]
    length: Option<String>,
    #[arg(long, global = true)]
    burn_in: Option<String>,
    /// Comma-separated α values for `persistence`.
    #[arg(long, global = true)]
    alphas: Option<String>,
    /// Comma-separated β values for `persistence`.
    #[arg(long, global = true)]
    betas: Option<String>,
    /// First seed of the `persistence` grid.
    #[arg(long, global = true)]
    grid_seed: Option<String>,
}

impl Options {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let all = [
            ("data", &self.data),
            ("truth", &self.truth),
            ("pred", &self.pred),
            ("date-format", &self.date_format),
            ("out", &self.out),
            ("split-date", &self.split_date),
            ("split-fraction", &self.split_fraction),
            ("window", &self.window),
            ("model", &self.model),
            ("lambda", &self.lambda),
            ("lambdas", &self.lambdas),
            ("epochs", &self.epochs),
            ("seed", &self.seed),
            ("layers", &self.layers),
            ("width", &self.width),
            ("dropout", &self.dropout),
            ("batch-size", &self.batch_size),
            ("learning-rate", &self.learning_rate),
            ("weight-decay", &self.weight_decay),
            ("refit-every", &self.refit_every),
            ("residuals", &self.residuals),
            ("alpha0", &self.alpha0),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("length", &self.length),
            ("burn-in", &self.burn_in),
            ("alphas", &self.alphas),
            ("betas", &self.betas),
            ("grid-seed", &self.grid_seed),
        ];
        all.into_iter().filter_map(|(k, v)| v.as_deref().map(|v| (k, v))).collect()
    }

    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (key, value) in self.pairs() {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.options.resolve()?;
    log::info!("running {}", cli.command.name());
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Forecast => commands::forecast(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Evaluate => commands::evaluate_cmd(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Persistence => commands::persistence(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
