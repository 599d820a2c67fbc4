//! End-to-end fitting: features, train-only scaler, windows, split, training.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dataset::{chronological_split, make_windows, SplitSpec, WindowedDataset};
use crate::indicators::{ColumnSet, FeatureMatrix, FeatureSpec, IndicatorConfig};
use crate::market_data::OhlcvSeries;
use crate::lstm::{train, LstmModel, LstmNetwork, Mode, TrainConfig, TrainHistory};
use crate::scaling::ScalerParams;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub features: FeatureSpec,
    pub lookback: usize,
    pub train_fraction: f64,
    pub train: TrainConfig,
    /// Clamp scaled features to [-1, 1].
    pub clip_scaled: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            features: FeatureSpec {
                column_set: ColumnSet::PaperMultivariate,
                indicators: IndicatorConfig::default(),
                use_adj_close: false,
            },
            lookback: 60,
            train_fraction: 0.8,
            train: TrainConfig::default(),
            clip_scaled: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), Error> {
        self.features.indicators.validate()?;
        self.train.validate()?;
        if self.lookback == 0 {
            return Err(Error::Config("lookback must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction {} not in (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
        }
    }
}

/// Scaled windows ready for training and testing.
#[derive(Debug, Clone)]
pub struct PreparedData {
    /// Unscaled features, warmup trimmed.
    pub matrix: FeatureMatrix,
    pub scaler: ScalerParams,
    pub train: WindowedDataset,
    pub test: WindowedDataset,
}

/// Fits a scaler on `train_rows` of `matrix` and windows the scaled rows.
/// Samples whose target lies in `train_rows` go to train, the rest to test.
pub fn prepare_rows(
    matrix: &FeatureMatrix,
    train_rows: Range<usize>,
    lookback: usize,
    clip: bool,
) -> Result<(ScalerParams, WindowedDataset, WindowedDataset), Error> {
    let mut scaler = ScalerParams::fit(matrix, train_rows.clone())?;
    scaler.clip = clip;
    let scaled = scaler.transform(matrix)?;
    let ds = make_windows(&scaled, lookback)?;
    let k = train_rows.end.saturating_sub(lookback).min(ds.len());
    Ok((scaler, ds.subset(0..k), ds.subset(k..ds.len())))
}

/// Builds features and splits chronologically by sample.
pub fn prepare(series: &OhlcvSeries, cfg: &PipelineConfig) -> Result<PreparedData, Error> {
    cfg.validate()?;
    let matrix = cfg.features.build(series)?;
    let samples = matrix.rows().saturating_sub(cfg.lookback);
    if samples == 0 {
        return Err(crate::dataset::DatasetError::TooFewRows {
            needed: cfg.lookback + 1,
            have: matrix.rows(),
        }
        .into());
    }
    let k = cfg.split().split_index(samples)?;
    // Training samples' inputs and targets all lie in rows [0, lookback + k).
    let mut scaler = ScalerParams::fit(&matrix, 0..cfg.lookback + k)?;
    scaler.clip = cfg.clip_scaled;
    let ds = make_windows(&scaler.transform(&matrix)?, cfg.lookback)?;
    let (train, test) = chronological_split(&ds, cfg.split())?;
    Ok(PreparedData {
        matrix,
        scaler,
        train,
        test,
    })
}

/// Initialises and trains a network on `train_ds`, packaging it as a model.
pub fn fit_model(
    train_ds: &WindowedDataset,
    scaler: ScalerParams,
    cfg: &PipelineConfig,
) -> Result<(LstmModel, TrainHistory), Error> {
    let net = LstmNetwork::init(
        train_ds.num_features(),
        &cfg.train.hidden_sizes,
        cfg.train.cell_variant,
        cfg.train.seed,
    );
    let (network, history) = train(net, train_ds, &cfg.train)?;
    let model = LstmModel {
        mode: Mode::for_columns(cfg.features.column_set),
        network,
        scaler,
        feature_names: train_ds.feature_names.clone(),
        features: cfg.features.clone(),
        lookback: cfg.lookback,
        train_config: cfg.train.clone(),
        rng_seed: cfg.train.seed,
    };
    Ok((model, history))
}

/// Result of [`fit`].
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: LstmModel,
    pub history: TrainHistory,
    pub data: PreparedData,
}

/// The whole training protocol on one series.
pub fn fit(series: &OhlcvSeries, cfg: &PipelineConfig) -> Result<FitOutcome, Error> {
    let data = prepare(series, cfg)?;
    let (model, history) = fit_model(&data.train, data.scaler.clone(), cfg)?;
    Ok(FitOutcome {
        model,
        history,
        data,
    })
}
