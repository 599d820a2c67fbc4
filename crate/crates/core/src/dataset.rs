//! Sliding-window samples and the chronological train/test split.

use chrono::NaiveDate;
use thiserror::Error;

use crate::indicators::{FeatureMatrix, CLOSE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("too few rows: need {needed}, have {have}")]
    TooFewRows { needed: usize, have: usize },
    #[error("split of {samples} samples at fraction {fraction} leaves one side empty")]
    DegenerateSplit { samples: usize, fraction: f64 },
    #[error("matrix has no Close column")]
    MissingCloseColumn,
    #[error("lookback must be >= 1")]
    ZeroLookback,
}

/// Supervised samples: each input is `lookback` consecutive rows and each
/// target is the Close column of the row right after them.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub lookback: usize,
    pub feature_names: Vec<String>,
    /// `num_samples * lookback * num_features`, sample-major then time-major.
    inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub dates: Vec<NaiveDate>,
    /// Row of the source matrix each target was taken from.
    pub target_rows: Vec<usize>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Input window of sample `s`, `lookback` rows of `num_features` each.
    pub fn window(&self, s: usize) -> &[f64] {
        let w = self.lookback * self.num_features();
        &self.inputs[s * w..(s + 1) * w]
    }

    /// First source row of sample `s`'s input window.
    pub fn input_start_row(&self, s: usize) -> usize {
        self.target_rows[s] - self.lookback
    }

    /// Last source row of sample `s`'s input window.
    pub fn input_end_row(&self, s: usize) -> usize {
        self.target_rows[s] - 1
    }

    /// Samples `range`, copied.
    pub fn subset(&self, range: std::ops::Range<usize>) -> Self {
        let w = self.lookback * self.num_features();
        Self {
            lookback: self.lookback,
            feature_names: self.feature_names.clone(),
            inputs: self.inputs[range.start * w..range.end * w].to_vec(),
            targets: self.targets[range.clone()].to_vec(),
            dates: self.dates[range.clone()].to_vec(),
            target_rows: self.target_rows[range].to_vec(),
        }
    }

    /// Checks that no input window reaches its own target row.
    pub fn assert_no_look_ahead(&self) {
        for s in 0..self.len() {
            assert!(
                self.input_end_row(s) < self.target_rows[s],
                "sample {s} input window reaches its target row"
            );
            assert_eq!(self.input_end_row(s) + 1, self.target_rows[s]);
        }
    }
}

/// Builds one sample per row `t >= lookback`.
pub fn make_windows(matrix: &FeatureMatrix, lookback: usize) -> Result<WindowedDataset, DatasetError> {
    if lookback == 0 {
        return Err(DatasetError::ZeroLookback);
    }
    if matrix.rows() <= lookback {
        return Err(DatasetError::TooFewRows {
            needed: lookback + 1,
            have: matrix.rows(),
        });
    }
    let close = matrix
        .column_index(CLOSE)
        .ok_or(DatasetError::MissingCloseColumn)?;
    let cols = matrix.cols();
    let samples = matrix.rows() - lookback;
    let mut inputs = Vec::with_capacity(samples * lookback * cols);
    let mut targets = Vec::with_capacity(samples);
    let mut dates = Vec::with_capacity(samples);
    let mut target_rows = Vec::with_capacity(samples);
    for t in lookback..matrix.rows() {
        inputs.extend_from_slice(&matrix.values[(t - lookback) * cols..t * cols]);
        targets.push(matrix.get(t, close));
        dates.push(matrix.dates[t]);
        target_rows.push(t);
    }
    Ok(WindowedDataset {
        lookback,
        feature_names: matrix.column_names.clone(),
        inputs,
        targets,
        dates,
        target_rows,
    })
}

/// Fraction of samples that go to training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8 }
    }
}

impl SplitSpec {
    /// Number of training samples out of `samples`.
    pub fn split_index(&self, samples: usize) -> Result<usize, DatasetError> {
        let k = (self.train_fraction * samples as f64).floor();
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) || k < 1.0 || k as usize >= samples {
            return Err(DatasetError::DegenerateSplit {
                samples,
                fraction: self.train_fraction,
            });
        }
        Ok(k as usize)
    }
}

/// First `floor(fraction * n)` samples train, the rest test. No shuffling.
pub fn chronological_split(
    ds: &WindowedDataset,
    spec: SplitSpec,
) -> Result<(WindowedDataset, WindowedDataset), DatasetError> {
    let k = spec.split_index(ds.len())?;
    Ok((ds.subset(0..k), ds.subset(k..ds.len())))
}
