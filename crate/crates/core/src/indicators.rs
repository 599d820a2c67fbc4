//! Technical indicators over daily bars and the feature matrix built from them.
//!
//! Every indicator returns one entry per input bar. `None` marks positions
//! where the indicator is not yet defined (its window is not full);
//! [`build_features`] trims those leading rows.

use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::OhlcvSeries;

pub type Series = Vec<Option<f64>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndicatorError {
    #[error("series too short: need {needed} bars, have {have}")]
    SeriesTooShort { needed: usize, have: usize },
    #[error("invalid indicator config: {0}")]
    InvalidConfig(String),
}

/// Periods and smoothing constants for every indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorConfig {
    pub sma_periods: Vec<usize>,
    pub wma_period: usize,
    pub ema_alpha: f64,
    pub rsi_period: usize,
    pub cci_period: usize,
    pub stoch_k_period: usize,
    pub stoch_d_period: usize,
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub macd_signal: usize,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        Self {
            sma_periods: vec![10, 50, 200],
            wma_period: 10,
            ema_alpha: 0.1,
            rsi_period: 14,
            cci_period: 20,
            stoch_k_period: 14,
            stoch_d_period: 10,
            macd_fast: 12,
            macd_slow: 26,
            macd_signal: 9,
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<(), IndicatorError> {
        let bad = |m: String| Err(IndicatorError::InvalidConfig(m));
        if self.sma_periods.is_empty() {
            return bad("sma_periods must not be empty".into());
        }
        let periods = self.sma_periods.iter().copied().chain([
            self.wma_period,
            self.rsi_period,
            self.cci_period,
            self.stoch_k_period,
            self.stoch_d_period,
            self.macd_fast,
            self.macd_slow,
            self.macd_signal,
        ]);
        for p in periods {
            if p == 0 {
                return bad("all periods must be >= 1".into());
            }
        }
        if self.macd_fast >= self.macd_slow {
            return bad(format!(
                "macd_fast ({}) must be < macd_slow ({})",
                self.macd_fast, self.macd_slow
            ));
        }
        if !(self.ema_alpha > 0.0 && self.ema_alpha < 1.0) {
            return bad(format!("ema_alpha {} not in (0, 1)", self.ema_alpha));
        }
        Ok(())
    }
}

/// Which columns [`build_features`] produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnSet {
    /// Close only.
    Univariate,
    /// Close, CMA, SMAs, EMA, RSI, K%, D%, CCI and the MACD triple.
    PaperMultivariate,
    /// The multivariate set plus WMA and AD.
    Table4All,
}

impl std::str::FromStr for ColumnSet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "univariate" => Ok(Self::Univariate),
            "paper_multivariate" => Ok(Self::PaperMultivariate),
            "table4_all" => Ok(Self::Table4All),
            other => Err(format!(
                "unknown column set `{other}` (expected univariate, paper_multivariate or table4_all)"
            )),
        }
    }
}

/// Per-date rows of named feature columns, warmup already removed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub dates: Vec<NaiveDate>,
    pub column_names: Vec<String>,
    /// Row-major, `dates.len() * column_names.len()` entries.
    pub values: Vec<f64>,
    pub warmup_dropped: usize,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.dates.len()
    }

    pub fn cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols() + c]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|n| n == name)
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows()).map(|r| self.get(r, c)).collect()
    }

    /// CSV with a leading Date column; floats carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("Date");
        for name in &self.column_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (r, date) in self.dates.iter().enumerate() {
            let _ = write!(out, "{}", date.format("%Y-%m-%d"));
            for v in self.row(r) {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Everything needed to rebuild a model's feature columns from raw bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub column_set: ColumnSet,
    pub indicators: IndicatorConfig,
    /// Model the adjusted close instead of the raw close.
    #[serde(default)]
    pub use_adj_close: bool,
}

impl FeatureSpec {
    pub fn build(&self, series: &OhlcvSeries) -> Result<FeatureMatrix, IndicatorError> {
        if self.use_adj_close {
            build_features(&series.with_adjusted_close(), &self.indicators, self.column_set)
        } else {
            build_features(series, &self.indicators, self.column_set)
        }
    }

    pub fn column_names(&self) -> Vec<String> {
        column_names(&self.indicators, self.column_set)
    }

    pub fn warmup_rows(&self) -> usize {
        warmup_rows(&self.indicators, self.column_set)
    }
}

pub const CLOSE: &str = "Close";

/// Column label for an EMA with smoothing `alpha`, e.g. `EMA_0.1`.
pub fn ema_column_name(alpha: f64) -> String {
    format!("EMA_{alpha}")
}

/// Simple moving average over the trailing `n` closes.
pub fn sma(closes: &[f64], n: usize) -> Series {
    assert!(n >= 1, "window must be >= 1");
    let mut out = vec![None; closes.len()];
    if closes.len() < n {
        return out;
    }
    // Kahan-compensated running sum keeps drift well below 1e-9 on long series.
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut add = |sum: &mut f64, x: f64| {
        let y = x - comp;
        let t = *sum + y;
        comp = (t - *sum) - y;
        *sum = t;
    };
    for (t, &x) in closes.iter().enumerate() {
        add(&mut sum, x);
        if t >= n {
            add(&mut sum, -closes[t - n]);
        }
        if t + 1 >= n {
            out[t] = Some(sum / n as f64);
        }
    }
    out
}

/// Cumulative mean of all closes up to and including each position.
pub fn cma(closes: &[f64]) -> Series {
    let mut sum = 0.0;
    closes
        .iter()
        .enumerate()
        .map(|(t, &x)| {
            sum += x;
            Some(sum / (t + 1) as f64)
        })
        .collect()
}

/// Linearly weighted moving average, weight `n` on the newest close down to 1
/// on the oldest in the window.
pub fn wma(closes: &[f64], n: usize) -> Series {
    assert!(n >= 1, "window must be >= 1");
    let denom = (n * (n + 1) / 2) as f64;
    let mut out = vec![None; closes.len()];
    for t in n.saturating_sub(1)..closes.len() {
        let acc: f64 = (0..n).map(|i| (n - i) as f64 * closes[t - i]).sum();
        out[t] = Some(acc / denom);
    }
    out
}

/// Exponential moving average seeded with the first close.
pub fn ema(closes: &[f64], alpha: f64) -> Series {
    ema_values(closes, alpha).into_iter().map(Some).collect()
}

fn ema_values(xs: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut prev = match xs.first() {
        Some(&x) => x,
        None => return out,
    };
    out.push(prev);
    for &x in &xs[1..] {
        prev += alpha * (x - prev);
        out.push(prev);
    }
    out
}

fn rsi_from_averages(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_loss == 0.0 {
        if avg_gain == 0.0 {
            50.0
        } else {
            100.0
        }
    } else if avg_gain == 0.0 {
        0.0
    } else {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    }
}

/// Relative strength index with Wilder smoothing. First defined at position `n`.
pub fn rsi(closes: &[f64], n: usize) -> Series {
    assert!(n >= 1, "period must be >= 1");
    let mut out = vec![None; closes.len()];
    if closes.len() < n + 1 {
        return out;
    }
    let moves = |t: usize| {
        let d = closes[t] - closes[t - 1];
        (d.max(0.0), (-d).max(0.0))
    };
    let (mut gain, mut loss) = (1..=n).map(moves).fold((0.0, 0.0), |(g, l), (mg, ml)| {
        (g + mg, l + ml)
    });
    gain /= n as f64;
    loss /= n as f64;
    out[n] = Some(rsi_from_averages(gain, loss));
    let nf = n as f64;
    for (t, slot) in out.iter_mut().enumerate().skip(n + 1) {
        let (g, l) = moves(t);
        gain = (gain * (nf - 1.0) + g) / nf;
        loss = (loss * (nf - 1.0) + l) / nf;
        *slot = Some(rsi_from_averages(gain, loss));
    }
    out
}

/// Commodity channel index over typical price `(H + L + C) / 3`.
pub fn cci(series: &OhlcvSeries, n: usize) -> Series {
    assert!(n >= 1, "period must be >= 1");
    let typical: Vec<f64> = series
        .bars()
        .iter()
        .map(|b| (b.high + b.low + b.close) / 3.0)
        .collect();
    let mut out = vec![None; typical.len()];
    for t in n.saturating_sub(1)..typical.len() {
        let window = &typical[t + 1 - n..=t];
        let mean = window.iter().sum::<f64>() / n as f64;
        let dev = window.iter().map(|m| (m - mean).abs()).sum::<f64>() / n as f64;
        out[t] = Some(if dev == 0.0 {
            0.0
        } else {
            (typical[t] - mean) / (0.015 * dev)
        });
    }
    out
}

/// Per-bar accumulation/distribution ratio `(H_t - C_{t-1}) / (H_t - L_t)`.
pub fn ad(series: &OhlcvSeries) -> Series {
    let bars = series.bars();
    let mut out = vec![None; bars.len()];
    for t in 1..bars.len() {
        let range = bars[t].high - bars[t].low;
        out[t] = Some(if range == 0.0 {
            0.0
        } else {
            (bars[t].high - bars[t - 1].close) / range
        });
    }
    out
}

/// Stochastic %K: position of the close within the trailing `n`-bar high/low range.
pub fn stochastic_k(series: &OhlcvSeries, n: usize) -> Series {
    assert!(n >= 1, "period must be >= 1");
    let bars = series.bars();
    let mut out = vec![None; bars.len()];
    for t in n.saturating_sub(1)..bars.len() {
        let window = &bars[t + 1 - n..=t];
        let ll = window.iter().map(|b| b.low).fold(f64::INFINITY, f64::min);
        let hh = window.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
        out[t] = Some(if hh == ll {
            50.0
        } else {
            ((bars[t].close - ll) / (hh - ll) * 100.0).clamp(0.0, 100.0)
        });
    }
    out
}

/// Stochastic %D: `m`-period simple mean of %K.
pub fn stochastic_d(k_values: &[Option<f64>], m: usize) -> Series {
    assert!(m >= 1, "period must be >= 1");
    let mut out = vec![None; k_values.len()];
    let Some(first) = k_values.iter().position(Option::is_some) else {
        return out;
    };
    let defined: Vec<f64> = k_values[first..].iter().map(|k| k.unwrap_or(0.0)).collect();
    for (i, v) in sma(&defined, m).into_iter().enumerate() {
        // A mean of values in [0, 100] stays there; clamp rounding spill.
        out[first + i] = v.map(|x| x.clamp(0.0, 100.0));
    }
    out
}

/// MACD line, signal line and histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Macd {
    pub diff: Vec<f64>,
    pub signal: Vec<f64>,
    pub histogram: Vec<f64>,
}

/// `diff = EMA(fast) - EMA(slow)` with `alpha = 2 / (N + 1)`; the signal is
/// an EMA of `diff` seeded at its first value.
pub fn macd(closes: &[f64], fast: usize, slow: usize, signal_n: usize) -> Macd {
    assert!(
        fast >= 1 && signal_n >= 1 && fast < slow,
        "need 1 <= fast < slow and signal >= 1"
    );
    let k = |n: usize| 2.0 / (n as f64 + 1.0);
    let fast_ema = ema_values(closes, k(fast));
    let slow_ema = ema_values(closes, k(slow));
    let diff: Vec<f64> = fast_ema.iter().zip(&slow_ema).map(|(f, s)| f - s).collect();
    let signal = ema_values(&diff, k(signal_n));
    let histogram = diff.iter().zip(&signal).map(|(d, s)| d - s).collect();
    Macd {
        diff,
        signal,
        histogram,
    }
}

fn dense(values: Vec<f64>) -> Series {
    values.into_iter().map(Some).collect()
}

/// Column names `build_features` produces for a set, in order.
pub fn column_names(cfg: &IndicatorConfig, set: ColumnSet) -> Vec<String> {
    let mut names = vec![CLOSE.to_string()];
    if set == ColumnSet::Univariate {
        return names;
    }
    names.push("CMA".into());
    names.extend(cfg.sma_periods.iter().map(|p| format!("SMA{p}")));
    names.push(ema_column_name(cfg.ema_alpha));
    names.extend(["RSI", "K%", "D%", "CCI", "macd", "macd_s", "macd_h"].map(String::from));
    if set == ColumnSet::Table4All {
        names.push(format!("WMA{}", cfg.wma_period));
        names.push("AD".into());
    }
    names
}

/// Number of leading rows that are undefined for the given set.
pub fn warmup_rows(cfg: &IndicatorConfig, set: ColumnSet) -> usize {
    match set {
        ColumnSet::Univariate => 0,
        ColumnSet::PaperMultivariate | ColumnSet::Table4All => {
            let sma = cfg.sma_periods.iter().map(|p| p - 1).max().unwrap_or(0);
            let stoch_d = cfg.stoch_k_period - 1 + cfg.stoch_d_period - 1;
            let mut w = sma
                .max(cfg.rsi_period)
                .max(cfg.cci_period - 1)
                .max(cfg.stoch_k_period - 1)
                .max(stoch_d);
            if set == ColumnSet::Table4All {
                w = w.max(cfg.wma_period - 1).max(1);
            }
            w
        }
    }
}

/// Computes the requested columns over the whole series and drops the
/// leading rows where any of them is undefined.
pub fn build_features(
    series: &OhlcvSeries,
    cfg: &IndicatorConfig,
    set: ColumnSet,
) -> Result<FeatureMatrix, IndicatorError> {
    cfg.validate()?;
    let needed = warmup_rows(cfg, set) + 1;
    if series.len() < needed {
        return Err(IndicatorError::SeriesTooShort {
            needed,
            have: series.len(),
        });
    }

    let closes = series.closes();
    let mut columns: Vec<Series> = vec![dense(closes.clone())];
    if set != ColumnSet::Univariate {
        columns.push(cma(&closes));
        for &p in &cfg.sma_periods {
            columns.push(sma(&closes, p));
        }
        columns.push(ema(&closes, cfg.ema_alpha));
        columns.push(rsi(&closes, cfg.rsi_period));
        let k = stochastic_k(series, cfg.stoch_k_period);
        let d = stochastic_d(&k, cfg.stoch_d_period);
        columns.push(k);
        columns.push(d);
        columns.push(cci(series, cfg.cci_period));
        let m = macd(&closes, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal);
        columns.push(dense(m.diff));
        columns.push(dense(m.signal));
        columns.push(dense(m.histogram));
        if set == ColumnSet::Table4All {
            columns.push(wma(&closes, cfg.wma_period));
            columns.push(ad(series));
        }
    }
    let names = column_names(cfg, set);
    debug_assert_eq!(names.len(), columns.len());

    let start = (0..series.len())
        .find(|&t| columns.iter().all(|c| c[t].is_some()))
        .ok_or(IndicatorError::SeriesTooShort {
            needed,
            have: series.len(),
        })?;

    let rows = series.len() - start;
    let mut values = Vec::with_capacity(rows * columns.len());
    for t in start..series.len() {
        for c in &columns {
            let v = c[t].expect("row past warmup is defined");
            debug_assert!(v.is_finite());
            values.push(v);
        }
    }
    Ok(FeatureMatrix {
        dates: series.bars()[start..].iter().map(|b| b.date).collect(),
        column_names: names,
        values,
        warmup_dropped: start,
    })
}
