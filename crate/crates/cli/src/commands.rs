//! Subcommand implementations. Each reads its inputs, writes its outputs into
//! the output directory and finishes with a manifest listing what it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use ginn_core::evaluation::{
    evaluate, lambda_sweep, persistence_experiment, residual_spectrum, select_lambda,
    summarize_sweep, sweep_lambda_grid, write_persistence_csv, write_spectrum_csv, write_sweep_csv,
    ExperimentSettings, LambdaSummary,
};
use ginn_core::garch::{rolling_forecast_with, GarchVariant, RollingForecast, RollingOptions};
use ginn_core::market_data::{load_csv_with_format, log_returns, read_returns_csv, write_returns_csv};
use ginn_core::mean_model::{ground_truth_series, read_variance_csv, write_variance_csv};
use ginn_core::neural::{GinnModel, LossSpec, ModelKind, NetworkConfig, TrainConfig};
use ginn_core::pipeline::{boundary_at_fraction, mean_series, GinnDataset};
use ginn_core::simulator::{persistence_grid, simulate_garch, SimulationSpec};
use ginn_core::{ReturnSeries, VarianceSeries};
use log::info;
use serde::Serialize;

use crate::config::{ModelChoice, RunConfig};
use crate::error::CliError;

pub type CmdResult = Result<(), CliError>;

pub const RETURNS_FILE: &str = "returns.csv";
pub const TRUTH_FILE: &str = "sigma2_true.csv";
pub const SIM_VARIANCE_FILE: &str = "sigma2_sim.csv";
const TRUTH_COLUMN: &str = "sigma2";
const PRED_COLUMN: &str = "sigma2_pred";

#[derive(Serialize)]
struct Manifest<'a, E: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    resolved: E,
    outputs: Vec<String>,
}

/// Collects output file names and writes the manifest at the end.
struct Outputs<'a> {
    cfg: &'a RunConfig,
    files: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&cfg.out)
            .map_err(|e| CliError::data(format!("cannot create {}: {e}", cfg.out.display())))?;
        Ok(Self { cfg, files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.cfg.out.join(name)
    }

    fn finish<E: Serialize>(self, command: &str, resolved: E) -> CmdResult {
        let name = format!("manifest_{command}.json");
        let manifest = Manifest {
            tool: "ginn",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: self.cfg,
            resolved,
            outputs: self.files,
        };
        write_json(&self.cfg.out.join(&name), &manifest)?;
        info!("wrote {name}");
        Ok(())
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn input_dir(cfg: &RunConfig) -> &Path {
    cfg.data.as_deref().unwrap_or(&cfg.out)
}

fn require(path: PathBuf, hint: &str) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::data(format!("{} not found; {hint}", path.display())))
    }
}

fn load_returns(cfg: &RunConfig) -> Result<ReturnSeries, CliError> {
    let path = require(
        input_dir(cfg).join(RETURNS_FILE),
        "run `ginn ingest` or `ginn simulate` first, or point --data at their output directory",
    )?;
    Ok(read_returns_csv(path)?)
}

fn load_truth(cfg: &RunConfig) -> Result<VarianceSeries, CliError> {
    let path = match &cfg.truth {
        Some(p) => require(p.clone(), "check --truth")?,
        None => require(
            input_dir(cfg).join(TRUTH_FILE),
            "run `ginn ingest` or `ginn simulate` first, or pass --truth",
        )?,
    };
    Ok(read_variance_csv(path, TRUTH_COLUMN)?)
}

/// Reads any `date,<value>` file, whatever its value column is called.
fn read_any_variance(path: &Path) -> Result<VarianceSeries, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let header = text.lines().next().unwrap_or_default();
    let column = header
        .split(',')
        .nth(1)
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .ok_or_else(|| CliError::data(format!("{}: expected a 'date,<value>' header", path.display())))?;
    Ok(read_variance_csv(path, column)?)
}

fn boundary(cfg: &RunConfig, truth: &VarianceSeries) -> Result<NaiveDate, CliError> {
    match cfg.split_date {
        Some(d) => Ok(d),
        None => Ok(boundary_at_fraction(truth.dates(), cfg.split_fraction)?),
    }
}

fn on_or_after(series: &VarianceSeries, date: NaiveDate) -> VarianceSeries {
    series.slice(series.position_on_or_after(date)..series.len())
}

fn rolling_options(cfg: &RunConfig) -> RollingOptions {
    RollingOptions {
        window_len: cfg.window,
        refit_every: cfg.refit_every,
        residuals: cfg.residuals,
        ..RollingOptions::default()
    }
}

fn garch_forecast(cfg: &RunConfig, returns: &ReturnSeries, variant: GarchVariant) -> Result<RollingForecast, CliError> {
    let forecast = rolling_forecast_with(returns, variant, &rolling_options(cfg))?;
    if forecast.forecasts.is_empty() {
        return Err(CliError::numerical(format!("every {} window fit failed", variant.label())));
    }
    if !forecast.failures.is_empty() {
        log::warn!("{} of the {} windows produced no forecast", forecast.failures.len(), variant.label());
    }
    Ok(forecast)
}

fn train_template(cfg: &RunConfig) -> Result<TrainConfig, CliError> {
    let network = NetworkConfig {
        num_lstm_layers: cfg.layers,
        hidden_width: cfg.width,
        dropout_rate: cfg.dropout,
        input_window: cfg.window,
        ..NetworkConfig::default()
    };
    let mut template = TrainConfig::new(network, LossSpec::new(cfg.lambda)?, cfg.epochs, 0);
    template.batch_size = cfg.batch_size;
    template.optimizer.learning_rate = cfg.learning_rate;
    template.optimizer.weight_decay = cfg.weight_decay;
    template.validate()?;
    Ok(template)
}

/// Ground truth and rolling GARCH(1,1) forecasts assembled into a dataset.
fn build_dataset(cfg: &RunConfig) -> Result<GinnDataset, CliError> {
    let returns = load_returns(cfg)?;
    let truth = load_truth(cfg)?;
    let garch = garch_forecast(cfg, &returns, GarchVariant::Garch)?;
    let split = boundary(cfg, &truth)?;
    Ok(GinnDataset::build(&truth, &garch.forecasts, cfg.window, split)?)
}

fn neural_kinds(cfg: &RunConfig) -> Result<Vec<ModelKind>, CliError> {
    cfg.models
        .iter()
        .map(|m| match m {
            ModelChoice::Neural(k) => Ok(*k),
            other => Err(CliError::usage(format!("`train` needs a neural model (lstm, ginn, ginn0), got {other}"))),
        })
        .collect()
}

fn checkpoint_name(kind: ModelKind, seed: u64) -> String {
    format!("model_{kind}_seed{seed}.json")
}

#[derive(Serialize)]
struct SplitInfo {
    boundary: NaiveDate,
}

pub fn ingest(cfg: &RunConfig) -> CmdResult {
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| CliError::usage("`ingest` needs --data <prices.csv>"))?;
    let prices = load_csv_with_format(data, &cfg.date_format)?;
    let returns = log_returns(&prices)?;
    let truth = ground_truth_series(&returns, cfg.window)?;

    let mut out = Outputs::new(cfg)?;
    write_returns_csv(&returns, out.path(RETURNS_FILE))?;
    write_variance_csv(&truth, TRUTH_COLUMN, out.path(TRUTH_FILE))?;
    info!("{} prices, {} returns, {} ground-truth days", prices.len(), returns.len(), truth.len());

    #[derive(Serialize)]
    struct Resolved {
        prices: usize,
        returns: usize,
        truth_days: usize,
    }
    out.finish(
        "ingest",
        Resolved {
            prices: prices.len(),
            returns: returns.len(),
            truth_days: truth.len(),
        },
    )
}

pub fn simulate(cfg: &RunConfig) -> CmdResult {
    let seed = cfg.seeds[0];
    let spec = SimulationSpec::new(cfg.alpha0, cfg.alpha, cfg.beta, cfg.length, seed)?.with_burn_in(cfg.burn_in);
    spec.validate()?;
    let sim = simulate_garch(&spec)?;
    let realized = ground_truth_series(&sim.returns, cfg.window)?;

    let mut out = Outputs::new(cfg)?;
    write_returns_csv(&sim.returns, out.path(RETURNS_FILE))?;
    write_variance_csv(&realized, TRUTH_COLUMN, out.path(TRUTH_FILE))?;
    write_variance_csv(&sim.true_variance, TRUTH_COLUMN, out.path(SIM_VARIANCE_FILE))?;

    #[derive(Serialize)]
    struct Resolved {
        spec: SimulationSpec,
        persistence: f64,
        unconditional_variance: f64,
    }
    out.finish(
        "simulate",
        Resolved {
            persistence: spec.persistence(),
            unconditional_variance: spec.unconditional_variance(),
            spec,
        },
    )
}

pub fn forecast(cfg: &RunConfig) -> CmdResult {
    let truth = load_truth(cfg)?;
    let split = boundary(cfg, &truth)?;
    let mut out = Outputs::new(cfg)?;

    #[derive(Serialize)]
    struct ModelInfo {
        model: ModelChoice,
        lambda: Option<f64>,
        seeds: Vec<u64>,
        non_converged: usize,
        failed_windows: usize,
    }
    let mut resolved = Vec::new();

    for &model in &cfg.models {
        let name = model.name();
        match model {
            ModelChoice::Garch(variant) => {
                let returns = load_returns(cfg)?;
                let forecast = garch_forecast(cfg, &returns, variant)?;
                write_variance_csv(&forecast.forecasts, PRED_COLUMN, out.path(&format!("pred_{name}_full.csv")))?;
                let test = on_or_after(&forecast.forecasts, split);
                write_variance_csv(&test, PRED_COLUMN, out.path(&format!("pred_{name}.csv")))?;

                #[derive(Serialize)]
                struct Fits<'a> {
                    variant: GarchVariant,
                    non_converged: usize,
                    fits: &'a [ginn_core::garch::WindowFit],
                    failures: &'a [ginn_core::garch::WindowFailure],
                }
                write_json(
                    &out.path(&format!("fits_{name}.json")),
                    &Fits {
                        variant,
                        non_converged: forecast.non_converged(),
                        fits: &forecast.fits,
                        failures: &forecast.failures,
                    },
                )?;
                resolved.push(ModelInfo {
                    model,
                    lambda: None,
                    seeds: Vec::new(),
                    non_converged: forecast.non_converged(),
                    failed_windows: forecast.failures.len(),
                });
            }
            ModelChoice::Neural(kind) => {
                let mut preds = Vec::new();
                let mut lambda = None;
                for &seed in &cfg.seeds {
                    let path = require(
                        cfg.out.join(checkpoint_name(kind, seed)),
                        &format!("run `ginn train --model {name} --seed {seed}` first"),
                    )?;
                    let m = GinnModel::load(&path, cfg.window)?;
                    lambda = Some(m.lambda);
                    let pred = on_or_after(&m.rolling_predict(&truth)?, split);
                    write_variance_csv(&pred, PRED_COLUMN, out.path(&format!("pred_{name}_seed{seed}.csv")))?;
                    preds.push(pred);
                }
                write_variance_csv(&mean_series(&preds)?, PRED_COLUMN, out.path(&format!("pred_{name}.csv")))?;
                resolved.push(ModelInfo {
                    model,
                    lambda,
                    seeds: cfg.seeds.clone(),
                    non_converged: 0,
                    failed_windows: 0,
                });
            }
        }
    }

    #[derive(Serialize)]
    struct Resolved {
        boundary: NaiveDate,
        models: Vec<ModelInfo>,
    }
    out.finish(
        "forecast",
        Resolved {
            boundary: split,
            models: resolved,
        },
    )
}

pub fn train(cfg: &RunConfig) -> CmdResult {
    let kinds = neural_kinds(cfg)?;
    let template = train_template(cfg)?;
    let dataset = build_dataset(cfg)?;
    info!(
        "{} training samples, {} test days",
        dataset.samples().len(),
        dataset.test_dates().len()
    );
    let mut out = Outputs::new(cfg)?;

    #[derive(Serialize)]
    struct Run {
        model: ModelKind,
        lambda: f64,
        seed: u64,
        final_loss: f64,
    }
    let mut runs = Vec::new();
    for kind in kinds {
        for trained in dataset.train_seeds(kind, &template, &cfg.seeds)? {
            let m = &trained.model;
            m.save(out.path(&checkpoint_name(kind, m.seed)))?;
            let rows = trained.loss_curve.iter().enumerate().map(|(i, l)| format!("{},{l}", i + 1));
            let text = std::iter::once("epoch,loss".to_string()).chain(rows).collect::<Vec<_>>().join("\n") + "\n";
            let loss_path = out.path(&format!("loss_{kind}_seed{}.csv", m.seed));
            fs::write(&loss_path, text)
                .map_err(|e| CliError::data(format!("cannot write {}: {e}", loss_path.display())))?;
            runs.push(Run {
                model: kind,
                lambda: m.lambda,
                seed: m.seed,
                final_loss: *trained.loss_curve.last().unwrap_or(&f64::NAN),
            });
        }
    }

    #[derive(Serialize)]
    struct Resolved {
        boundary: NaiveDate,
        training_samples: usize,
        runs: Vec<Run>,
    }
    out.finish(
        "train",
        Resolved {
            boundary: dataset.boundary(),
            training_samples: dataset.samples().len(),
            runs,
        },
    )
}

pub fn evaluate_cmd(cfg: &RunConfig) -> CmdResult {
    let truth = load_truth(cfg)?;
    let preds: Vec<(String, VarianceSeries)> = match &cfg.pred {
        Some(path) => {
            let name = if cfg.models.len() == 1 { cfg.models[0].name().to_string() } else { "pred".into() };
            vec![(name, read_any_variance(&require(path.clone(), "check --pred")?)?)]
        }
        None => cfg
            .models
            .iter()
            .map(|m| {
                let path = require(
                    cfg.out.join(format!("pred_{}.csv", m.name())),
                    &format!("run `ginn forecast --model {}` first", m.name()),
                )?;
                Ok((m.name().to_string(), read_any_variance(&path)?))
            })
            .collect::<Result<_, CliError>>()?,
    };

    // Score every model on the same days.
    let mut dates: Vec<NaiveDate> = truth.dates().to_vec();
    if let Some(split) = cfg.split_date {
        dates.retain(|d| *d >= split);
    }
    for (_, p) in &preds {
        dates.retain(|d| p.get(*d).is_some());
    }
    if dates.len() < 2 {
        return Err(CliError::data("fewer than two days shared by the ground truth and the predictions"));
    }
    let truth = truth.restrict_to(&dates);

    let mut out = Outputs::new(cfg)?;
    let mut reports = Vec::new();
    for (name, pred) in &preds {
        let pred = pred.restrict_to(&dates);
        let report = evaluate(name, &truth, &pred)?;
        write_json(&out.path(&format!("metrics_{name}.json")), &report)?;
        write_spectrum_csv(&residual_spectrum(&truth, &pred)?, out.path(&format!("spectrum_{name}.csv")))?;
        println!("{name}: r2={:.6} mse={:.6e} mae={:.6e} n={}", report.r2, report.mse, report.mae, report.n);
        reports.push(report);
    }

    #[derive(Serialize)]
    struct Resolved {
        first_date: NaiveDate,
        last_date: NaiveDate,
        days: usize,
        reports: Vec<ginn_core::evaluation::EvaluationReport>,
    }
    out.finish(
        "evaluate",
        Resolved {
            first_date: dates[0],
            last_date: dates[dates.len() - 1],
            days: dates.len(),
            reports,
        },
    )
}

pub fn sweep(cfg: &RunConfig) -> CmdResult {
    let template = train_template(cfg)?;
    let dataset = build_dataset(cfg)?;
    let lambdas = cfg.lambdas.clone().unwrap_or_else(sweep_lambda_grid);
    let rows = lambda_sweep(&dataset, &lambdas, &cfg.seeds, &template)?;
    let summaries = summarize_sweep(&rows);
    let selected = select_lambda(&summaries);

    let mut out = Outputs::new(cfg)?;
    write_sweep_csv(&rows, out.path("sweep.csv"))?;

    #[derive(Serialize)]
    struct Summary<'a> {
        selected_lambda: Option<f64>,
        summaries: &'a [LambdaSummary],
    }
    write_json(
        &out.path("sweep_summary.json"),
        &Summary {
            selected_lambda: selected,
            summaries: &summaries,
        },
    )?;
    if let Some(l) = selected {
        println!("selected lambda: {l}");
    }
    out.finish(
        "sweep",
        SplitInfo {
            boundary: dataset.boundary(),
        },
    )
}

pub fn persistence(cfg: &RunConfig) -> CmdResult {
    let grid = persistence_grid(&cfg.alphas, &cfg.betas, cfg.length, cfg.grid_seed)?;
    let grid: Vec<SimulationSpec> = grid
        .into_iter()
        .map(|s| s.with_burn_in(cfg.burn_in))
        .collect();
    for s in &grid {
        s.validate()?;
    }
    let settings = ExperimentSettings {
        window_len: cfg.window,
        train: train_template(cfg)?,
        train_fraction: cfg.split_fraction,
        refit_every: cfg.refit_every,
    };
    let rows = persistence_experiment(&grid, &cfg.seeds, &settings)?;

    let mut out = Outputs::new(cfg)?;
    write_persistence_csv(&rows, out.path("persistence.csv"))?;
    out.finish("persistence", grid)
}
