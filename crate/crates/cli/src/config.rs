//! Run configuration: defaults, then a flat `key = value` file, then flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use ginn_core::garch::{GarchVariant, ResidualSource};
use ginn_core::neural::ModelKind;
use serde::Serialize;

use crate::error::CliError;

/// Every key accepted in a config file or as a `--flag`.
pub const KEYS: &[&str] = &[
    "data",
    "truth",
    "pred",
    "date-format",
    "out",
    "split-date",
    "split-fraction",
    "window",
    "model",
    "lambda",
    "epochs",
    "seed",
    "layers",
    "width",
    "dropout",
    "batch-size",
    "learning-rate",
    "weight-decay",
    "refit-every",
    "residuals",
    "alpha0",
    "alpha",
    "beta",
    "length",
    "burn-in",
    "alphas",
    "betas",
    "grid-seed",
    "lambdas",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub enum ModelChoice {
    Garch(GarchVariant),
    Neural(ModelKind),
}

impl ModelChoice {
    pub fn name(self) -> &'static str {
        match self {
            ModelChoice::Garch(GarchVariant::Garch) => "garch",
            ModelChoice::Garch(GarchVariant::GjrGarch) => "gjr",
            ModelChoice::Garch(GarchVariant::Tgarch) => "tgarch",
            ModelChoice::Neural(kind) => kind.label(),
        }
    }
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<ModelChoice> for String {
    fn from(m: ModelChoice) -> Self {
        m.name().to_string()
    }
}

impl FromStr for ModelChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "garch" => Ok(ModelChoice::Garch(GarchVariant::Garch)),
            "gjr" | "gjr-garch" | "gjr_garch" => Ok(ModelChoice::Garch(GarchVariant::GjrGarch)),
            "tgarch" => Ok(ModelChoice::Garch(GarchVariant::Tgarch)),
            "lstm" => Ok(ModelChoice::Neural(ModelKind::Lstm)),
            "ginn" => Ok(ModelChoice::Neural(ModelKind::Ginn)),
            "ginn0" | "ginn-0" => Ok(ModelChoice::Neural(ModelKind::Ginn0)),
            other => Err(format!(
                "unknown model '{other}' (expected garch, gjr, tgarch, lstm, ginn or ginn0)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    pub date_format: String,
    pub out: PathBuf,
    pub split_date: Option<NaiveDate>,
    pub split_fraction: f64,
    pub window: usize,
    pub models: Vec<ModelChoice>,
    pub lambda: f64,
    pub epochs: usize,
    pub seeds: Vec<u64>,
    pub layers: usize,
    pub width: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub refit_every: usize,
    pub residuals: ResidualSource,
    pub alpha0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub length: usize,
    pub burn_in: usize,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub grid_seed: u64,
    pub lambdas: Option<Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            truth: None,
            pred: None,
            date_format: ginn_core::ISO_DATE.to_string(),
            out: PathBuf::from("."),
            split_date: None,
            split_fraction: 0.7,
            window: ginn_core::market_data::DEFAULT_WINDOW,
            models: vec![ModelChoice::Garch(GarchVariant::Garch)],
            lambda: ModelKind::DEFAULT_GINN_LAMBDA,
            epochs: ginn_core::neural::DEFAULT_EPOCHS,
            seeds: vec![1],
            layers: 3,
            width: 256,
            dropout: 0.2,
            batch_size: 64,
            learning_rate: 1e-3,
            weight_decay: 1e-2,
            refit_every: 1,
            residuals: ResidualSource::WindowDemeaned,
            alpha0: 0.05,
            alpha: 0.1,
            beta: 0.85,
            length: 2000,
            burn_in: ginn_core::simulator::DEFAULT_BURN_IN,
            alphas: vec![0.05, 0.1, 0.15],
            betas: vec![0.5, 0.7, 0.8],
            grid_seed: 100,
            lambdas: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| CliError::usage(format!("invalid value '{value}' for {key}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::usage(format!("{key} needs at least one value")));
    }
    Ok(items)
}

impl RunConfig {
    /// Applies one `key = value` setting. Keys may use `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().replace('_', "-");
        let v = value.trim();
        match key.as_str() {
            "data" => self.data = Some(PathBuf::from(v)),
            "truth" => self.truth = Some(PathBuf::from(v)),
            "pred" => self.pred = Some(PathBuf::from(v)),
            "date-format" => self.date_format = v.to_string(),
            "out" => self.out = PathBuf::from(v),
            "split-date" => {
                let d = NaiveDate::parse_from_str(v, ginn_core::ISO_DATE)
                    .map_err(|e| CliError::usage(format!("invalid split-date '{v}': {e}")))?;
                self.split_date = Some(d);
            }
            "split-fraction" => self.split_fraction = parse(&key, v)?,
            "window" => self.window = parse(&key, v)?,
            "model" => self.models = parse_list(&key, v)?,
            "lambda" => self.lambda = parse(&key, v)?,
            "epochs" => self.epochs = parse(&key, v)?,
            "seed" => self.seeds = parse_list(&key, v)?,
            "layers" => self.layers = parse(&key, v)?,
            "width" => self.width = parse(&key, v)?,
            "dropout" => self.dropout = parse(&key, v)?,
            "batch-size" => self.batch_size = parse(&key, v)?,
            "learning-rate" => self.learning_rate = parse(&key, v)?,
            "weight-decay" => self.weight_decay = parse(&key, v)?,
            "refit-every" => self.refit_every = parse(&key, v)?,
            "residuals" => {
                self.residuals = match v.to_ascii_lowercase().as_str() {
                    "window" | "demeaned" => ResidualSource::WindowDemeaned,
                    "ar" => ResidualSource::ArResiduals,
                    other => return Err(CliError::usage(format!("residuals must be 'window' or 'ar', got '{other}'"))),
                }
            }
            "alpha0" => self.alpha0 = parse(&key, v)?,
            "alpha" => self.alpha = parse(&key, v)?,
            "beta" => self.beta = parse(&key, v)?,
            "length" => self.length = parse(&key, v)?,
            "burn-in" => self.burn_in = parse(&key, v)?,
            "alphas" => self.alphas = parse_list(&key, v)?,
            "betas" => self.betas = parse_list(&key, v)?,
            "grid-seed" => self.grid_seed = parse(&key, v)?,
            "lambdas" => self.lambdas = Some(parse_list(&key, v)?),
            other => {
                return Err(CliError::usage(format!(
                    "unknown setting '{other}' (known: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Reads a flat `key = value` file; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!("{}:{}: expected 'key = value'", path.display(), i + 1))
            })?;
            self.set(key, value)
                .map_err(|e| CliError::usage(format!("{}:{}: {}", path.display(), i + 1, e.message)))?;
        }
        Ok(())
    }

    /// Range checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::usage(msg));
        if self.window < 3 {
            return fail(format!("window must be at least 3, got {}", self.window));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return fail(format!("split-fraction must be in (0, 1), got {}", self.split_fraction));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail(format!("lambda must be in [0, 1], got {}", self.lambda));
        }
        if let Some(bad) = self.lambdas.iter().flatten().find(|l| !(0.0..=1.0).contains(*l)) {
            return fail(format!("lambdas must be in [0, 1], got {bad}"));
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.layers == 0 || self.width == 0 {
            return fail("layers and width must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.batch_size < 2 {
            return fail("batch-size must be at least 2".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning-rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail(format!("weight-decay must be >= 0, got {}", self.weight_decay));
        }
        if self.refit_every == 0 {
            return fail("refit-every must be at least 1".into());
        }
        let mut seen = Vec::new();
        for s in &self.seeds {
            if seen.contains(s) {
                return fail(format!("seed {s} is listed twice"));
            }
            seen.push(*s);
        }
        Ok(())
    }
}
