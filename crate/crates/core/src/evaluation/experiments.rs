//! λ sweep and simulated-persistence experiments.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{constant_forecast, evaluate, EvaluationReport};
use crate::error::{Error, Result};
use crate::garch::{rolling_forecast_with, GarchVariant, RollingOptions, HIGH_PERSISTENCE};
use crate::io::write_table;
use crate::market_data::DEFAULT_WINDOW;
use crate::mean_model::ground_truth_series;
use crate::neural::{LossSpec, ModelKind, NetworkConfig, TrainConfig, DEFAULT_EPOCHS};
use crate::pipeline::{boundary_at_fraction, mean_series, GinnDataset};
use crate::simulator::{simulate_garch, SimulationSpec};

/// λ values `0.00, 0.01, ..., 0.20` followed by `0.25, 0.30, ..., 1.00`.
pub fn sweep_lambda_grid() -> Vec<f64> {
    let fine = (0..=20).map(|i| i as f64 / 100.0);
    let coarse = (5..=20).map(|i| i as f64 / 20.0);
    fine.chain(coarse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub seed: u64,
    pub report: EvaluationReport,
}

/// Trains one GINN per `(λ, seed)` and scores it on the dataset's test days.
/// Rows come back λ-major in input order.
/// `template` supplies everything but λ and the seed.
pub fn lambda_sweep(dataset: &GinnDataset, lambdas: &[f64], seeds: &[u64], template: &TrainConfig) -> Result<Vec<SweepRow>> {
    if let Some(bad) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::invalid(format!("lambda {bad} is outside [0, 1]")));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    let truth = dataset.test_truth();
    let cells: Vec<(f64, u64)> = lambdas.iter().flat_map(|&l| seeds.iter().map(move |&s| (l, s))).collect();
    cells
        .par_iter()
        .map(|&(lambda, seed)| {
            let config = TrainConfig {
                loss: LossSpec::new(lambda)?,
                ..template.clone()
            };
            let trained = dataset.train_model(ModelKind::Ginn, &config, seed)?;
            let pred = dataset.predict_test(&trained.model)?;
            let report = evaluate(&format!("ginn(lambda={lambda})"), &truth, &pred)?;
            Ok(SweepRow { lambda, seed, report })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSummary {
    pub lambda: f64,
    pub runs: usize,
    pub mean_r2: f64,
    pub mean_mse: f64,
    pub mean_mae: f64,
    pub best_r2: f64,
    pub best_mse: f64,
    pub best_mae: f64,
}

/// Mean and best metrics per λ, in order of first appearance.
pub fn summarize_sweep(rows: &[SweepRow]) -> Vec<LambdaSummary> {
    let mut lambdas: Vec<f64> = Vec::new();
    for r in rows {
        if !lambdas.contains(&r.lambda) {
            lambdas.push(r.lambda);
        }
    }
    lambdas
        .into_iter()
        .map(|lambda| {
            let group: Vec<&EvaluationReport> = rows.iter().filter(|r| r.lambda == lambda).map(|r| &r.report).collect();
            let n = group.len() as f64;
            let mean = |f: fn(&EvaluationReport) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            LambdaSummary {
                lambda,
                runs: group.len(),
                mean_r2: mean(|r| r.r2),
                mean_mse: mean(|r| r.mse),
                mean_mae: mean(|r| r.mae),
                best_r2: group.iter().map(|r| r.r2).fold(f64::NEG_INFINITY, f64::max),
                best_mse: group.iter().map(|r| r.mse).fold(f64::INFINITY, f64::min),
                best_mae: group.iter().map(|r| r.mae).fold(f64::INFINITY, f64::min),
            }
        })
        .collect()
}

/// Picks the λ with the highest mean test R²; ties go to the lower mean MSE,
/// then to the higher best R².
pub fn select_lambda(summaries: &[LambdaSummary]) -> Option<f64> {
    summaries
        .iter()
        .max_by(|a, b| {
            a.mean_r2
                .total_cmp(&b.mean_r2)
                .then(b.mean_mse.total_cmp(&a.mean_mse))
                .then(a.best_r2.total_cmp(&b.best_r2))
        })
        .map(|s| s.lambda)
}

/// Writes `lambda,seed,r2,mse,mae`.
pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let body = rows.iter().map(|r| {
        vec![
            r.lambda.to_string(),
            r.seed.to_string(),
            r.report.r2.to_string(),
            r.report.mse.to_string(),
            r.report.mae.to_string(),
        ]
    });
    write_table(path.as_ref(), &["lambda", "seed", "r2", "mse", "mae"], body)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersistenceRegime {
    /// `0.9 <= π < 1`
    High,
    Low,
}

impl PersistenceRegime {
    pub fn of(pi: f64) -> Self {
        // tolerate the rounding in sums such as 0.1 + 0.8
        if pi >= HIGH_PERSISTENCE - 1e-12 {
            PersistenceRegime::High
        } else {
            PersistenceRegime::Low
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PersistenceRegime::High => "high",
            PersistenceRegime::Low => "low",
        }
    }
}

impl fmt::Display for PersistenceRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub window_len: usize,
    /// Network, optimizer, epochs and λ for the GINN; the seed is replaced per run.
    pub train: TrainConfig,
    /// Fraction of each simulated series used for training.
    pub train_fraction: f64,
    /// GARCH refit stride for the rolling benchmark.
    pub refit_every: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            window_len: DEFAULT_WINDOW,
            train: TrainConfig::new(
                NetworkConfig::desk(),
                LossSpec::new(ModelKind::DEFAULT_GINN_LAMBDA).expect("valid default"),
                DEFAULT_EPOCHS,
                0,
            ),
            train_fraction: 0.7,
            refit_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceRow {
    pub alpha: f64,
    pub beta: f64,
    pub pi: f64,
    pub regime: PersistenceRegime,
    /// `garch`, `ginn` (one row per seed), `ginn_mean` or `baseline`.
    pub model: String,
    pub seed: Option<u64>,
    pub report: EvaluationReport,
}

/// Everything produced for one simulated series.
#[derive(Debug, Clone)]
pub struct SimulationCell {
    pub rows: Vec<PersistenceRow>,
    /// Training loss per epoch for each seed, in seed order.
    pub loss_curves: Vec<Vec<f64>>,
}

/// Simulates `spec` and treats the returns exactly like market data: the
/// network sees and trains on realized ground-truth variances, GARCH(1,1) is
/// fitted on rolling windows, and one GINN is trained per seed. Every
/// forecast, plus the constant long-run variance as a baseline, is scored
/// against the simulator's conditional variance on the test days.
pub fn simulation_cell(spec: &SimulationSpec, seeds: &[u64], settings: &ExperimentSettings) -> Result<SimulationCell> {
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    let sim = simulate_garch(spec)?;
    let opts = RollingOptions {
        window_len: settings.window_len,
        refit_every: settings.refit_every,
        ..RollingOptions::default()
    };
    let garch = rolling_forecast_with(&sim.returns, GarchVariant::Garch, &opts)?;
    let boundary = boundary_at_fraction(sim.true_variance.dates(), settings.train_fraction)?;
    let realized = ground_truth_series(&sim.returns, settings.window_len)?;
    let dataset = GinnDataset::build(&realized, &garch.forecasts, settings.window_len, boundary)?;
    let truth = sim.true_variance.restrict_to(dataset.test_dates());

    let trained = dataset.train_seeds(ModelKind::Ginn, &settings.train, seeds)?;
    let preds = trained
        .iter()
        .map(|t| dataset.predict_test(&t.model))
        .collect::<Result<Vec<_>>>()?;

    let pi = spec.persistence();
    let row = |model: &str, seed: Option<u64>, report: EvaluationReport| PersistenceRow {
        alpha: spec.alpha,
        beta: spec.beta,
        pi,
        regime: PersistenceRegime::of(pi),
        model: model.to_string(),
        seed,
        report,
    };
    let mut rows = vec![row("garch", None, evaluate("garch", &truth, &dataset.test_garch())?)];
    for (seed, pred) in seeds.iter().zip(&preds) {
        rows.push(row("ginn", Some(*seed), evaluate("ginn", &truth, pred)?));
    }
    rows.push(row("ginn_mean", None, evaluate("ginn_mean", &truth, &mean_series(&preds)?)?));
    let baseline = constant_forecast(truth.dates(), spec.unconditional_variance())?;
    rows.push(row("baseline", None, evaluate("baseline", &truth, &baseline)?));

    Ok(SimulationCell {
        rows,
        loss_curves: trained.into_iter().map(|t| t.loss_curve).collect(),
    })
}

/// Runs [`simulation_cell`] for every grid spec and concatenates the rows.
pub fn persistence_experiment(grid: &[SimulationSpec], seeds: &[u64], settings: &ExperimentSettings) -> Result<Vec<PersistenceRow>> {
    let mut rows = Vec::new();
    for spec in grid {
        rows.extend(simulation_cell(spec, seeds, settings)?.rows);
    }
    Ok(rows)
}

/// Writes `alpha,beta,pi,persistence,model,seed,r2,mse,mae,n`.
pub fn write_persistence_csv(rows: &[PersistenceRow], path: impl AsRef<Path>) -> Result<()> {
    let body = rows.iter().map(|r| {
        vec![
            r.alpha.to_string(),
            r.beta.to_string(),
            r.pi.to_string(),
            r.regime.to_string(),
            r.model.clone(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.report.r2.to_string(),
            r.report.mse.to_string(),
            r.report.mae.to_string(),
            r.report.n.to_string(),
        ]
    });
    write_table(
        path.as_ref(),
        &["alpha", "beta", "pi", "persistence", "model", "seed", "r2", "mse", "mae", "n"],
        body,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_increments() {
        let g = sweep_lambda_grid();
        assert_eq!(g.len(), 37);
        assert_eq!(&g[..3], &[0.0, 0.01, 0.02]);
        assert_eq!(g[20], 0.2);
        assert_eq!(g[21], 0.25);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.contains(&0.01));
        for w in g.windows(2) {
            let step = w[1] - w[0];
            if w[1] <= 0.2 + 1e-12 {
                assert!((step - 0.01).abs() < 1e-12);
            } else {
                assert!((step - 0.05).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn regimes() {
        assert_eq!(PersistenceRegime::of(0.1 + 0.8), PersistenceRegime::High);
        assert_eq!(PersistenceRegime::of(0.2 + 0.5), PersistenceRegime::Low);
        assert_eq!(PersistenceRegime::of(0.95), PersistenceRegime::High);
        assert_eq!(PersistenceRegime::of(0.89), PersistenceRegime::Low);
    }

    fn report(r2: f64, mse: f64) -> EvaluationReport {
        EvaluationReport {
            model: "m".into(),
            r2,
            mse,
            mae: mse.sqrt(),
            n: 10,
        }
    }

    #[test]
    fn summary_and_selection() {
        let rows = vec![
            SweepRow { lambda: 0.0, seed: 1, report: report(0.1, 2.0) },
            SweepRow { lambda: 0.0, seed: 2, report: report(0.3, 1.0) },
            SweepRow { lambda: 0.01, seed: 1, report: report(0.3, 1.0) },
            SweepRow { lambda: 0.01, seed: 2, report: report(0.2, 1.5) },
            SweepRow { lambda: 1.0, seed: 1, report: report(0.25, 1.1) },
            SweepRow { lambda: 1.0, seed: 2, report: report(0.25, 1.2) },
        ];
        let s = summarize_sweep(&rows);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].runs, 2);
        assert!((s[0].mean_r2 - 0.2).abs() < 1e-15);
        assert_eq!(s[0].best_r2, 0.3);
        assert_eq!(s[0].best_mse, 1.0);
        // mean r2: 0.2, 0.25, 0.25; tie broken by lower mean mse
        assert_eq!(select_lambda(&s), Some(1.0));
        assert_eq!(select_lambda(&[]), None);
    }

    #[test]
    fn csv_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sweep.csv");
        write_sweep_csv(&[SweepRow { lambda: 0.5, seed: 3, report: report(0.1, 1.0) }], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next(), Some("lambda,seed,r2,mse,mae"));
        assert_eq!(text.lines().count(), 2);
    }
}
