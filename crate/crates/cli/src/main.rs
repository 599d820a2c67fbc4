//! `lstmcast`: fetch quotes, compute indicators, train, evaluate, forecast,
//! backtest and plot.
//!
//! Exit codes: 0 success, 2 data or schema problem, 3 numerical failure,
//! 64 usage error.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<lstmcast::Error> for CliError {
    fn from(e: lstmcast::Error) -> Self {
        use lstmcast::lstm::LstmError;
        use lstmcast::Error as E;
        let code = match &e {
            E::Lstm(
                LstmError::NonFiniteLoss { .. } | LstmError::NonFiniteOutput | LstmError::NonFiniteInput,
            )
            | E::InvalidForecast { .. } => EXIT_NUMERIC,
            E::Config(_)
            | E::Lstm(LstmError::InvalidConfig(_))
            | E::Indicators(lstmcast::indicators::IndicatorError::InvalidConfig(_)) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lstmcast", version, about = "Stock close forecasting with technical indicators and a stacked LSTM")]
pub struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for weight initialisation (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Log progress to standard error.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    /// Override any config key, e.g. `--set lookback=30`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download daily history CSV.
    Fetch(FetchArgs),
    /// Compute the feature matrix and write it as CSV.
    Indicators(IndicatorsArgs),
    /// Train a model and write it with its loss history.
    Train(TrainArgs),
    /// Score one-step predictions on the test split.
    Evaluate(EvaluateArgs),
    /// Forecast the next days recursively.
    Forecast(ForecastArgs),
    /// Walk-forward backtest.
    Backtest(BacktestArgs),
    /// Draw series as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    #[arg(long)]
    pub symbol: String,
    /// First date, YYYY-MM-DD.
    #[arg(long)]
    pub start: String,
    /// Last date, YYYY-MM-DD (inclusive).
    #[arg(long)]
    pub end: String,
    #[arg(long)]
    pub out: PathBuf,
    /// URL template overriding the `endpoint` config key.
    #[arg(long)]
    pub endpoint: Option<String>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// OHLCV CSV input.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// univariate, paper_multivariate or table4_all.
    #[arg(long)]
    pub column_set: Option<String>,
    /// univariate or multivariate.
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct IndicatorsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lookback: Option<usize>,
    /// Comma-separated LSTM layer sizes.
    #[arg(long)]
    pub hidden_sizes: Option<String>,
    /// Model JSON output.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// History CSV output (epoch,train_mse,val_mse).
    #[arg(long)]
    pub history_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// JSON report output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional CSV of date,actual,predicted.
    #[arg(long)]
    pub predictions_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// CSV output (day_index,predicted_close).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Directory for fold_<j>.json reports.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// LABEL=PATH[:COLUMN]; the column defaults to the file's last one. Repeatable.
    #[arg(long = "series", required = true)]
    pub series: Vec<String>,
    #[arg(long)]
    pub title: Option<String>,
    /// SVG output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Merged CSV output.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let filter = if cli.verbose { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(filter)),
        )
        .with_writer(std::io::stderr)
        .init();

    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
