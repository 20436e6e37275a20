//! Volatility forecasting with GARCH-family models, a from-scratch LSTM, and
//! the GARCH-regularized hybrid training loss.
//!
//! Module map:
//!
//! * [`market_data`]: price ingestion, log returns, splits, rolling windows
//! * [`mean_model`]: rolling AR(1) mean and the ground-truth variance target
//! * [`garch`]: GARCH / GJR-GARCH / TGARCH recursions, MLE, rolling forecasts
//! * [`simulator`]: seeded GARCH(1,1) series with known conditional variance
//! * [`neural`]: LSTM network, BPTT, AdamW, hybrid loss, training
//! * [`evaluation`]: R², MSE, MAE, residual spectra, experiment drivers
//! * [`pipeline`]: assembling aligned training data from a return series

pub mod error;
pub mod evaluation;
pub mod garch;
mod io;
pub mod market_data;
pub mod mean_model;
pub mod neural;
pub(crate) mod optim;
pub mod pipeline;
pub mod series;
pub mod simulator;

pub use error::{Error, Result};
pub use io::ISO_DATE;
pub use optim::{BfgsOptions, BfgsResult};
pub use series::{PriceSeries, ReturnSeries, VarianceSeries};
