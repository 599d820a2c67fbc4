//! Error metrics, one-step test evaluation, recursive multi-day forecasts and
//! walk-forward backtesting.

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::dataset::WindowedDataset;
use crate::indicators::{FeatureMatrix, FeatureSpec};
use crate::lstm::{LstmModel, Mode};
use crate::market_data::{Bar, OhlcvSeries};
use crate::pipeline::{fit_model, prepare_rows, PipelineConfig};
use crate::scaling::ScalerParams;
use crate::Error;

/// MAPE (percent), MAE, MSE and RMSE in price units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mape: f64,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub n: usize,
}

pub fn rmse_from_mse(mse: f64) -> f64 {
    mse.sqrt()
}

/// `MAE` is the plain mean absolute error, not scaled by the actual value.
pub fn compute_metrics(real: &[f64], predict: &[f64]) -> Result<MetricsReport, Error> {
    if real.len() != predict.len() || real.is_empty() {
        return Err(Error::LengthMismatch {
            real: real.len(),
            predict: predict.len(),
        });
    }
    if let Some(i) = real.iter().position(|&r| r == 0.0) {
        return Err(Error::ZeroActual(i));
    }
    let n = real.len() as f64;
    let (mut ape, mut ae, mut se) = (0.0, 0.0, 0.0);
    for (&r, &p) in real.iter().zip(predict) {
        let e = (r - p).abs();
        ape += e / r.abs();
        ae += e;
        se += e * e;
    }
    let mse = se / n;
    Ok(MetricsReport {
        mape: ape / n * 100.0,
        mae: ae / n,
        mse,
        rmse: rmse_from_mse(mse),
        n: real.len(),
    })
}

/// Anything that maps a scaled feature window to a scaled next-day Close and
/// knows how its features were produced.
pub trait Forecaster {
    fn lookback(&self) -> usize;
    fn feature_names(&self) -> &[String];
    fn scaler(&self) -> &ScalerParams;
    fn feature_spec(&self) -> &FeatureSpec;
    fn predict_scaled(&self, window: &[f64]) -> Result<f64, Error>;
}

impl Forecaster for LstmModel {
    fn lookback(&self) -> usize {
        self.lookback
    }

    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn scaler(&self) -> &ScalerParams {
        &self.scaler
    }

    fn feature_spec(&self) -> &FeatureSpec {
        &self.features
    }

    fn predict_scaled(&self, window: &[f64]) -> Result<f64, Error> {
        Ok(self.predict(window)?)
    }
}

fn check_schema(expected: &[String], found: &[String]) -> Result<(), Error> {
    if expected == found {
        return Ok(());
    }
    let column = expected
        .iter()
        .zip(found)
        .find(|(a, b)| a != b)
        .map(|(a, _)| a.clone())
        .or_else(|| expected.get(found.len()).cloned())
        .or_else(|| found.get(expected.len()).cloned())
        .unwrap_or_default();
    Err(Error::SchemaMismatch {
        column,
        expected: expected.to_vec(),
        found: found.to_vec(),
    })
}

/// Actual vs predicted Close for one test date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRow {
    pub date: NaiveDate,
    pub actual: f64,
    pub predicted: f64,
}

pub fn predictions_to_csv(rows: &[PredictionRow]) -> String {
    let mut out = String::from("date,actual,predicted\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.16e},{:.16e}\n",
            r.date.format("%Y-%m-%d"),
            r.actual,
            r.predicted
        ));
    }
    out
}

/// Predicts every test sample from its true history window and scores the
/// predictions in price units.
pub fn evaluate_one_step(
    model: &impl Forecaster,
    test_ds: &WindowedDataset,
) -> Result<(MetricsReport, Vec<PredictionRow>), Error> {
    check_schema(model.feature_names(), &test_ds.feature_names)?;
    if test_ds.lookback != model.lookback() {
        return Err(Error::Config(format!(
            "dataset lookback {} differs from model lookback {}",
            test_ds.lookback,
            model.lookback()
        )));
    }
    let scaler = model.scaler();
    let mut rows = Vec::with_capacity(test_ds.len());
    for s in 0..test_ds.len() {
        let p = model.predict_scaled(test_ds.window(s))?;
        rows.push(PredictionRow {
            date: test_ds.dates[s],
            actual: scaler.inverse_close(test_ds.targets[s])?,
            predicted: scaler.inverse_close(p)?,
        });
    }
    let real: Vec<f64> = rows.iter().map(|r| r.actual).collect();
    let pred: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
    Ok((compute_metrics(&real, &pred)?, rows))
}

/// JSON evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mape: f64,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub n: usize,
    pub mode: Mode,
    pub symbol: String,
    pub epochs: usize,
}

impl EvaluationReport {
    pub fn new(metrics: MetricsReport, mode: Mode, symbol: &str, epochs: usize) -> Self {
        Self {
            mape: metrics.mape,
            mae: metrics.mae,
            mse: metrics.mse,
            rmse: metrics.rmse,
            n: metrics.n,
            mode,
            symbol: symbol.to_string(),
            epochs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Up,
    Down,
    Flat,
}

impl Trend {
    /// Relative change of last over first; within ±0.1% counts as flat.
    pub fn classify(values: &[f64]) -> Self {
        let (Some(&first), Some(&last)) = (values.first(), values.last()) else {
            return Self::Flat;
        };
        let rel = (last - first) / first.abs();
        if rel.abs() <= 0.001 || !rel.is_finite() {
            Self::Flat
        } else if rel > 0.0 {
            Self::Up
        } else {
            Self::Down
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Up => "up",
            Self::Down => "down",
            Self::Flat => "flat",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub horizon: usize,
    /// Predicted Close prices, day 1 first.
    pub values: Vec<f64>,
    pub trend: Trend,
}

impl ForecastResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("day_index,predicted_close\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{v:.16e}\n", i + 1));
        }
        out
    }
}

/// Scaled last `lookback` rows of `matrix`, row-major.
fn latest_window(matrix: &FeatureMatrix, scaler: &ScalerParams, lookback: usize) -> Vec<f64> {
    let cols = matrix.cols();
    let start = matrix.rows() - lookback;
    matrix.values[start * cols..]
        .iter()
        .enumerate()
        .map(|(i, &x)| scaler.scale(i % cols, x))
        .collect()
}

/// Forecasts `horizon` closes by feeding each prediction back as a new bar.
///
/// The appended bar has open = high = low = close = the predicted price and
/// carries the last observed volume forward. All feature columns are
/// recomputed over the extended series and rescaled with the model's
/// training-time scaler before the next step.
pub fn forecast_recursive(
    model: &impl Forecaster,
    series: &OhlcvSeries,
    horizon: usize,
) -> Result<ForecastResult, Error> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be >= 1".into()));
    }
    let spec = model.feature_spec();
    let lookback = model.lookback();
    let needed = spec.warmup_rows() + lookback;
    if series.len() < needed {
        return Err(Error::SeriesTooShort {
            needed,
            have: series.len(),
        });
    }
    let scaler = model.scaler();
    let mut extended = series.clone();
    let mut values = Vec::with_capacity(horizon);
    for step in 0..horizon {
        let matrix = spec.build(&extended)?;
        check_schema(model.feature_names(), &matrix.column_names)?;
        if matrix.rows() < lookback {
            return Err(Error::SeriesTooShort {
                needed,
                have: series.len(),
            });
        }
        let window = latest_window(&matrix, scaler, lookback);
        let price = scaler.inverse_close(model.predict_scaled(&window)?)?;
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::InvalidForecast { step: step + 1, value: price });
        }
        values.push(price);
        if step + 1 < horizon {
            let last = *extended.bars().last().expect("non-empty series");
            extended.push(Bar {
                date: last.date + Days::new(1),
                open: price,
                high: price,
                low: price,
                close: price,
                adj_close: price,
                volume: last.volume,
            })?;
        }
    }
    Ok(ForecastResult {
        horizon,
        trend: Trend::classify(&values),
        values,
    })
}

/// One walk-forward fold's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub seed: u64,
    pub train_rows: usize,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    pub final_train_mse: f64,
    pub final_val_mse: f64,
    pub metrics: MetricsReport,
}

/// Row boundaries `(train_end, test_end)` for folds `1..=folds` over `rows`.
pub fn walk_forward_bounds(rows: usize, folds: usize) -> Vec<(usize, usize)> {
    (1..=folds)
        .map(|j| (rows * j / (folds + 1), rows * (j + 1) / (folds + 1)))
        .collect()
}

/// Expanding-window backtest. Fold `j` (1-based) trains from scratch on the
/// first `j / (folds + 1)` of the feature rows, with seed `base + j`, and
/// scores one-step predictions on the next `1 / (folds + 1)`.
pub fn walk_forward(
    series: &OhlcvSeries,
    cfg: &PipelineConfig,
    folds: usize,
) -> Result<Vec<FoldReport>, Error> {
    if folds < 2 {
        return Err(Error::Config("walk-forward needs at least 2 folds".into()));
    }
    cfg.validate()?;
    let matrix = cfg.features.build(series)?;
    let bounds = walk_forward_bounds(matrix.rows(), folds);
    let min_train = {
        let (train_end, _) = bounds[0];
        train_end.saturating_sub(cfg.lookback)
    };
    let needs_val = cfg.train.validation_split(min_train).is_err();
    if bounds[0].0 <= cfg.lookback || needs_val || bounds.iter().any(|(a, b)| b <= a) {
        let per_fold = (cfg.lookback + 2).max((cfg.lookback as f64 + 1.0 / cfg.train.validation_fraction).ceil() as usize);
        return Err(Error::TooFewRows {
            needed: per_fold * (folds + 1),
            have: matrix.rows(),
        });
    }

    let base_seed = cfg.train.seed;
    let mut reports = Vec::with_capacity(folds);
    for (j, &(train_end, test_end)) in (1..).zip(&bounds) {
        let fold_rows = FeatureMatrix {
            dates: matrix.dates[..test_end].to_vec(),
            column_names: matrix.column_names.clone(),
            values: matrix.values[..test_end * matrix.cols()].to_vec(),
            warmup_dropped: matrix.warmup_dropped,
        };
        let (scaler, train, test) = prepare_rows(&fold_rows, 0..train_end, cfg.lookback, cfg.clip_scaled)?;
        let mut fold_cfg = cfg.clone();
        fold_cfg.train.seed = base_seed.wrapping_add(j as u64);
        tracing::info!(fold = j, train = train.len(), test = test.len(), "walk-forward fold");
        let (model, history) = fit_model(&train, scaler, &fold_cfg)?;
        let (metrics, _) = evaluate_one_step(&model, &test)?;
        reports.push(FoldReport {
            fold: j,
            seed: fold_cfg.train.seed,
            train_rows: train_end,
            test_start: test.dates[0],
            test_end: *test.dates.last().expect("non-empty test"),
            final_train_mse: *history.train_mse.last().expect("epochs >= 1"),
            final_val_mse: *history.val_mse.last().expect("epochs >= 1"),
            metrics,
        });
    }
    Ok(reports)
}
