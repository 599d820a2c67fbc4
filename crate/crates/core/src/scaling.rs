//! Column-wise min-max scaling into [-1, 1], fitted on training rows only.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::{FeatureMatrix, CLOSE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalingError {
    #[error("empty or out-of-bounds fitting range {start}..{end} for {rows} rows")]
    EmptyRange { start: usize, end: usize, rows: usize },
    #[error("column mismatch: scaler has {expected:?}, matrix has {found:?}")]
    ColumnMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("scaler has no Close column")]
    MissingCloseColumn,
    #[error("invalid scaler parameters: {0}")]
    Invalid(String),
}

/// Per-column extrema of the training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub column_names: Vec<String>,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    /// Clamp transformed values to [-1, 1]. Off by default so that test rows
    /// outside the training range keep their trend.
    #[serde(default)]
    pub clip: bool,
}

impl ScalerParams {
    /// Fits extrema over exactly `rows` of `matrix`.
    pub fn fit(matrix: &FeatureMatrix, rows: Range<usize>) -> Result<Self, ScalingError> {
        if rows.is_empty() || rows.end > matrix.rows() {
            return Err(ScalingError::EmptyRange {
                start: rows.start,
                end: rows.end,
                rows: matrix.rows(),
            });
        }
        let cols = matrix.cols();
        let mut mins = vec![f64::INFINITY; cols];
        let mut maxs = vec![f64::NEG_INFINITY; cols];
        for r in rows {
            for (c, &v) in matrix.row(r).iter().enumerate() {
                mins[c] = mins[c].min(v);
                maxs[c] = maxs[c].max(v);
            }
        }
        Ok(Self {
            column_names: matrix.column_names.clone(),
            mins,
            maxs,
            clip: false,
        })
    }

    pub fn validate(&self) -> Result<(), ScalingError> {
        let n = self.column_names.len();
        if self.mins.len() != n || self.maxs.len() != n {
            return Err(ScalingError::Invalid("length mismatch".into()));
        }
        for (i, (lo, hi)) in self.mins.iter().zip(&self.maxs).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(ScalingError::Invalid(format!(
                    "column {} has min {lo} and max {hi}",
                    self.column_names[i]
                )));
            }
        }
        Ok(())
    }

    /// Scales a single value of column `c`.
    pub fn scale(&self, c: usize, x: f64) -> f64 {
        let (lo, hi) = (self.mins[c], self.maxs[c]);
        if hi == lo {
            return 0.0;
        }
        let y = 2.0 * (x - lo) / (hi - lo) - 1.0;
        if self.clip {
            y.clamp(-1.0, 1.0)
        } else {
            y
        }
    }

    /// Inverse of [`scale`](Self::scale) for column `c`.
    pub fn unscale(&self, c: usize, y: f64) -> f64 {
        let (lo, hi) = (self.mins[c], self.maxs[c]);
        (y + 1.0) / 2.0 * (hi - lo) + lo
    }

    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix, ScalingError> {
        if matrix.column_names != self.column_names {
            return Err(ScalingError::ColumnMismatch {
                expected: self.column_names.clone(),
                found: matrix.column_names.clone(),
            });
        }
        let cols = matrix.cols();
        let values = matrix
            .values
            .iter()
            .enumerate()
            .map(|(i, &x)| self.scale(i % cols, x))
            .collect();
        Ok(FeatureMatrix {
            values,
            ..matrix.clone()
        })
    }

    pub fn close_index(&self) -> Result<usize, ScalingError> {
        self.column_names
            .iter()
            .position(|n| n == CLOSE)
            .ok_or(ScalingError::MissingCloseColumn)
    }

    /// Maps a scaled Close value back to price units.
    pub fn inverse_close(&self, scaled: f64) -> Result<f64, ScalingError> {
        Ok(self.unscale(self.close_index()?, scaled))
    }
}
