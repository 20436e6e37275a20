//! Scoring forecasts and running the λ and persistence experiments.

mod experiments;
mod metrics;
mod spectrum;

pub use experiments::{
    lambda_sweep, persistence_experiment, select_lambda, simulation_cell, summarize_sweep, sweep_lambda_grid,
    write_persistence_csv, write_sweep_csv, ExperimentSettings, LambdaSummary, PersistenceRegime, PersistenceRow,
    SimulationCell, SweepRow,
};
pub use metrics::{align, constant_forecast, evaluate, mae, mse, r_squared, EvaluationReport};
pub use spectrum::{amplitude_spectrum, residual_spectrum, write_spectrum_csv, SpectrumReport, MIN_SPECTRUM_LEN};
