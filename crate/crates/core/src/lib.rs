//! Daily stock close forecasting with technical indicators and a stacked
//! LSTM trained from scratch.
//!
//! The pipeline runs in this order:
//!
//! 1. [`market_data`] parses Yahoo-style OHLCV CSV into an [`OhlcvSeries`].
//! 2. [`indicators`] derives a [`FeatureMatrix`] (Close only, or Close plus
//!    moving averages, RSI, stochastics, CCI and MACD).
//! 3. [`scaling`] fits min-max parameters on the training rows and maps
//!    every column into [-1, 1].
//! 4. [`dataset`] cuts sliding windows and splits them chronologically.
//! 5. [`lstm`] trains the network with BPTT and Adam.
//! 6. [`forecast_eval`] scores test predictions, forecasts recursively and
//!    runs walk-forward backtests.

pub mod dataset;
pub mod forecast_eval;
pub mod indicators;
pub mod lstm;
pub mod market_data;
pub mod pipeline;
pub mod scaling;

use thiserror::Error;

pub use dataset::{chronological_split, make_windows, SplitSpec, WindowedDataset};
pub use forecast_eval::{
    compute_metrics, evaluate_one_step, forecast_recursive, walk_forward, ForecastResult, Forecaster,
    MetricsReport, Trend,
};
pub use indicators::{build_features, ColumnSet, FeatureMatrix, FeatureSpec, IndicatorConfig};
pub use lstm::{LstmModel, LstmNetwork, TrainConfig, TrainHistory};
pub use market_data::{parse_csv, Bar, OhlcvSeries};
pub use pipeline::PipelineConfig;
pub use scaling::ScalerParams;

/// Any failure from the pipeline, grouped by the stage that raised it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    MarketData(#[from] market_data::MarketDataError),
    #[error(transparent)]
    Indicators(#[from] indicators::IndicatorError),
    #[error(transparent)]
    Scaling(#[from] scaling::ScalingError),
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Lstm(#[from] lstm::LstmError),
    #[error("length mismatch: {real} actual vs {predict} predicted values")]
    LengthMismatch { real: usize, predict: usize },
    #[error("actual value at index {0} is zero; MAPE undefined")]
    ZeroActual(usize),
    #[error("schema mismatch at column `{column}`: model expects {expected:?}, data has {found:?}")]
    SchemaMismatch {
        column: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("series too short: need {needed} bars, have {have}")]
    SeriesTooShort { needed: usize, have: usize },
    #[error("too few rows: need {needed}, have {have}")]
    TooFewRows { needed: usize, have: usize },
    #[error("forecast step {step} produced invalid price {value}")]
    InvalidForecast { step: usize, value: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}
