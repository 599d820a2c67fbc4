//! Flat `key = value` run configuration.
//!
//! Values come from three layers, later ones winning: built-in defaults, the
//! `--config` file, then command-line flags (including `--set key=value`).
//! Lines starting with `#` are comments. Unknown keys are rejected.

use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use lstmcast::indicators::ColumnSet;
use lstmcast::lstm::CellVariant;
use lstmcast::market_data::{FetchConfig, DEFAULT_URL_TEMPLATE};
use lstmcast::{FeatureSpec, IndicatorConfig, PipelineConfig, TrainConfig};

use crate::CliError;

pub const KEYS: &[&str] = &[
    "symbol",
    "mode",
    "column_set",
    "use_adj_close",
    "sma_periods",
    "wma_period",
    "ema_alpha",
    "rsi_period",
    "cci_period",
    "stoch_k_period",
    "stoch_d_period",
    "macd_fast",
    "macd_slow",
    "macd_signal",
    "lookback",
    "train_fraction",
    "clip_scaled",
    "epochs",
    "batch_size",
    "learning_rate",
    "hidden_sizes",
    "validation_fraction",
    "gradient_clip_norm",
    "cell_variant",
    "seed",
    "horizon",
    "folds",
    "endpoint",
    "fetch_timeout_secs",
    "input",
    "model",
    "out",
    "history_out",
    "predictions_out",
    "out_dir",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub symbol: Option<String>,
    pub column_set: ColumnSet,
    pub use_adj_close: bool,
    pub indicators: IndicatorConfig,
    pub lookback: usize,
    pub train_fraction: f64,
    pub clip_scaled: bool,
    /// `None` picks 20 for univariate runs and 40 for multivariate ones.
    pub epochs: Option<usize>,
    pub train: TrainConfig,
    pub horizon: usize,
    pub folds: usize,
    pub endpoint: String,
    pub fetch_timeout_secs: f64,
    pub input: Option<String>,
    pub model: Option<String>,
    pub out: Option<String>,
    pub history_out: Option<String>,
    pub predictions_out: Option<String>,
    pub out_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            symbol: None,
            column_set: ColumnSet::PaperMultivariate,
            use_adj_close: false,
            indicators: IndicatorConfig::default(),
            lookback: 60,
            train_fraction: 0.8,
            clip_scaled: false,
            epochs: None,
            train: TrainConfig::default(),
            horizon: 30,
            folds: 3,
            endpoint: DEFAULT_URL_TEMPLATE.to_string(),
            fetch_timeout_secs: 30.0,
            input: None,
            model: None,
            out: None,
            history_out: None,
            predictions_out: None,
            out_dir: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::usage(format!("invalid value `{value}` for `{key}`: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>, CliError> {
    value
        .split(',')
        .map(|v| parse(key, v.trim()))
        .collect()
}

impl RunConfig {
    /// Applies one key/value pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        let ind = &mut self.indicators;
        match key {
            "symbol" => self.symbol = Some(v.to_string()),
            "mode" => {
                self.column_set = match v {
                    "univariate" => ColumnSet::Univariate,
                    "multivariate" => ColumnSet::PaperMultivariate,
                    _ => {
                        return Err(CliError::usage(format!(
                            "invalid mode `{v}` (expected univariate or multivariate)"
                        )))
                    }
                }
            }
            "column_set" => self.column_set = v.parse().map_err(CliError::usage)?,
            "use_adj_close" => self.use_adj_close = parse(key, v)?,
            "sma_periods" => ind.sma_periods = parse_list(key, v)?,
            "wma_period" => ind.wma_period = parse(key, v)?,
            "ema_alpha" => ind.ema_alpha = parse(key, v)?,
            "rsi_period" => ind.rsi_period = parse(key, v)?,
            "cci_period" => ind.cci_period = parse(key, v)?,
            "stoch_k_period" => ind.stoch_k_period = parse(key, v)?,
            "stoch_d_period" => ind.stoch_d_period = parse(key, v)?,
            "macd_fast" => ind.macd_fast = parse(key, v)?,
            "macd_slow" => ind.macd_slow = parse(key, v)?,
            "macd_signal" => ind.macd_signal = parse(key, v)?,
            "lookback" => self.lookback = parse(key, v)?,
            "train_fraction" => self.train_fraction = parse(key, v)?,
            "clip_scaled" => self.clip_scaled = parse(key, v)?,
            "epochs" => self.epochs = Some(parse(key, v)?),
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "learning_rate" => self.train.learning_rate = parse(key, v)?,
            "hidden_sizes" => self.train.hidden_sizes = parse_list(key, v)?,
            "validation_fraction" => self.train.validation_fraction = parse(key, v)?,
            "gradient_clip_norm" => self.train.gradient_clip_norm = parse(key, v)?,
            "cell_variant" => self.train.cell_variant = v.parse::<CellVariant>().map_err(CliError::usage)?,
            "seed" => self.train.seed = parse(key, v)?,
            "horizon" => self.horizon = parse(key, v)?,
            "folds" => self.folds = parse(key, v)?,
            "endpoint" => self.endpoint = v.to_string(),
            "fetch_timeout_secs" => self.fetch_timeout_secs = parse(key, v)?,
            "input" => self.input = Some(v.to_string()),
            "model" => self.model = Some(v.to_string()),
            "out" => self.out = Some(v.to_string()),
            "history_out" => self.history_out = Some(v.to_string()),
            "predictions_out" => self.predictions_out = Some(v.to_string()),
            "out_dir" => self.out_dir = Some(v.to_string()),
            other => {
                return Err(CliError::usage(format!(
                    "unknown config key `{other}` (known keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies a `key=value` assignment.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("expected key=value, got `{assignment}`")))?;
        self.set(k.trim(), v)
    }

    /// Applies every assignment in a config file's text.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.set_assignment(line)
                .map_err(|e| CliError::usage(format!("{origin}:{}: {}", i + 1, e.message)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn epochs(&self) -> usize {
        self.epochs.unwrap_or(match self.column_set {
            ColumnSet::Univariate => 20,
            _ => 40,
        })
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            features: FeatureSpec {
                column_set: self.column_set,
                indicators: self.indicators.clone(),
                use_adj_close: self.use_adj_close,
            },
            lookback: self.lookback,
            train_fraction: self.train_fraction,
            train: TrainConfig {
                epochs: self.epochs(),
                ..self.train.clone()
            },
            clip_scaled: self.clip_scaled,
        }
    }

    pub fn fetch(&self) -> FetchConfig {
        FetchConfig {
            url_template: self.endpoint.clone(),
            timeout: Duration::from_secs_f64(self.fetch_timeout_secs),
        }
    }

    /// Checks every value before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        self.pipeline()
            .validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
        if self.horizon == 0 {
            return Err(CliError::usage("horizon must be >= 1"));
        }
        if self.folds < 2 {
            return Err(CliError::usage("folds must be >= 2"));
        }
        if !(self.fetch_timeout_secs > 0.0 && self.fetch_timeout_secs.is_finite()) {
            return Err(CliError::usage("fetch_timeout_secs must be > 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# comment\n\nlookback = 30\nhidden_sizes=8, 4\nmode=univariate\n", "t")
            .unwrap();
        cfg.set_assignment("lookback=10").unwrap();
        assert_eq!(cfg.lookback, 10);
        assert_eq!(cfg.train.hidden_sizes, [8, 4]);
        assert_eq!(cfg.column_set, ColumnSet::Univariate);
        assert_eq!(cfg.epochs(), 20);
        cfg.set("column_set", "paper_multivariate").unwrap();
        assert_eq!(cfg.epochs(), 40);
        cfg.validate().unwrap();
    }

    #[test]
    fn every_listed_key_is_accepted() {
        let samples = [
            ("sma_periods", "5,10"),
            ("hidden_sizes", "4"),
            ("mode", "multivariate"),
            ("column_set", "table4_all"),
            ("cell_variant", "as_printed"),
            ("use_adj_close", "true"),
            ("clip_scaled", "false"),
            ("ema_alpha", "0.2"),
            ("train_fraction", "0.7"),
            ("learning_rate", "0.01"),
            ("validation_fraction", "0.2"),
            ("gradient_clip_norm", "1.5"),
            ("fetch_timeout_secs", "2.5"),
        ];
        for key in KEYS {
            let mut cfg = RunConfig::default();
            let value = samples.iter().find(|(k, _)| k == key).map_or("7", |(_, v)| *v);
            cfg.set(key, value).unwrap_or_else(|e| panic!("{key}: {}", e.message));
        }
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("lokback=3", "t").unwrap_err().message.contains("t:1"));
        assert!(cfg.set("epochs", "many").is_err());
        assert!(cfg.set_assignment("novalue").is_err());
        cfg.set("macd_fast", "30").unwrap();
        assert!(cfg.validate().is_err());
    }
}
