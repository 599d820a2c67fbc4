//! Daily OHLCV bars in the Yahoo Finance history CSV layout.
//!
//! Parsing is strict: the header must match exactly, every row must have
//! seven fields, dates must be strictly ascending and every bar must satisfy
//! the OHLC ordering constraints. Rows where Yahoo writes `null` for the
//! prices (non-trading days) are dropped and counted.

use std::fmt::Write as _;
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The only accepted header line.
pub const CSV_HEADER: &str = "Date,Open,High,Low,Close,Adj Close,Volume";

const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketDataError {
    #[error("malformed header: expected `{CSV_HEADER}`, found `{0}`")]
    MalformedHeader(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("dates not strictly ascending at {0}")]
    NonAscendingDates(NaiveDate),
    #[error("bar {date} violates invariant on field {field}")]
    InvariantViolation { date: NaiveDate, field: &'static str },
    #[error("series contains no data rows")]
    EmptySeries,
    #[error("invalid date range: start {start} is after end {end}")]
    InvalidRange { start: NaiveDate, end: NaiveDate },
    #[error("network error: {0}")]
    NetworkError(String),
    #[error("endpoint returned HTTP status {0}")]
    HttpStatus(u16),
    #[error("unexpected schema: {0}")]
    UnexpectedSchema(String),
}

/// One trading day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: f64,
}

impl Bar {
    /// Checks the price and volume invariants, naming the first field that fails.
    pub fn validate(&self) -> Result<(), MarketDataError> {
        let fail = |field| {
            Err(MarketDataError::InvariantViolation {
                date: self.date,
                field,
            })
        };
        for (field, v) in [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
            ("adj_close", self.adj_close),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return fail(field);
            }
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return fail("volume");
        }
        if self.low > self.high {
            return fail("low");
        }
        if self.low > self.open.min(self.close) {
            return fail("low");
        }
        if self.high < self.open.max(self.close) {
            return fail("high");
        }
        Ok(())
    }

    /// Zero volume on a bar with a single price level, the usual shape of an
    /// exchange holiday that the data vendor filled in.
    pub fn is_probable_holiday(&self) -> bool {
        self.volume == 0.0
            && self.open == self.high
            && self.high == self.low
            && self.low == self.close
    }
}

/// Counters collected while parsing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    /// Rows whose price fields were the literal `null`.
    pub dropped_null: usize,
    /// Retained bars flagged by [`Bar::is_probable_holiday`].
    pub probable_holidays: usize,
}

/// A validated, strictly date-ascending run of daily bars for one symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OhlcvSeries {
    symbol: String,
    bars: Vec<Bar>,
}

impl OhlcvSeries {
    /// Builds a series from bars, enforcing ordering and bar invariants.
    /// An empty bar list is allowed here (slices may be empty); loaders reject it.
    pub fn new(symbol: impl Into<String>, bars: Vec<Bar>) -> Result<Self, MarketDataError> {
        for (i, bar) in bars.iter().enumerate() {
            bar.validate()?;
            if i > 0 && bar.date <= bars[i - 1].date {
                return Err(MarketDataError::NonAscendingDates(bar.date));
            }
        }
        Ok(Self {
            symbol: symbol.into(),
            bars,
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.bars.first().map(|b| b.date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.bars.last().map(|b| b.date)
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.bars.iter().map(|b| b.date).collect()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    pub fn highs(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.high).collect()
    }

    pub fn lows(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.low).collect()
    }

    /// Appends a bar after the last one. Used by recursive forecasting to
    /// extend history with synthetic bars.
    pub fn push(&mut self, bar: Bar) -> Result<(), MarketDataError> {
        bar.validate()?;
        if let Some(last) = self.bars.last() {
            if bar.date <= last.date {
                return Err(MarketDataError::NonAscendingDates(bar.date));
            }
        }
        self.bars.push(bar);
        Ok(())
    }

    /// Returns a copy whose open/high/low/close are rescaled by each bar's
    /// `adj_close / close` ratio, so that `close` carries the adjusted price.
    pub fn with_adjusted_close(&self) -> Self {
        let bars = self
            .bars
            .iter()
            .map(|b| {
                let k = b.adj_close / b.close;
                Bar {
                    open: b.open * k,
                    high: b.high * k,
                    low: b.low * k,
                    close: b.adj_close,
                    ..*b
                }
            })
            .collect();
        Self {
            symbol: self.symbol.clone(),
            bars,
        }
    }

    /// Writes the series back out in the input CSV layout. Floats use the
    /// shortest representation that parses back to the same value.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.bars.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for b in &self.bars {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?},{:?}",
                b.date.format(DATE_FORMAT),
                b.open,
                b.high,
                b.low,
                b.close,
                b.adj_close,
                b.volume
            );
        }
        out
    }
}

/// Parses Yahoo history CSV text into a validated series.
pub fn parse_csv(text: &str, symbol: &str) -> Result<OhlcvSeries, MarketDataError> {
    parse_csv_with_stats(text, symbol).map(|(s, _)| s)
}

/// Like [`parse_csv`], also returning the dropped-row and holiday counters.
pub fn parse_csv_with_stats(
    text: &str,
    symbol: &str,
) -> Result<(OhlcvSeries, LoadStats), MarketDataError> {
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    let header = lines.next().unwrap_or("");
    let header = header.strip_prefix('\u{feff}').unwrap_or(header);
    if header != CSV_HEADER {
        return Err(MarketDataError::MalformedHeader(header.to_string()));
    }

    let mut stats = LoadStats::default();
    let mut bars: Vec<Bar> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(MarketDataError::MalformedRow {
                line: line_no,
                reason: format!("expected 7 fields, found {}", fields.len()),
            });
        }
        let date = NaiveDate::parse_from_str(fields[0].trim(), DATE_FORMAT).map_err(|e| {
            MarketDataError::MalformedRow {
                line: line_no,
                reason: format!("bad date `{}`: {e}", fields[0]),
            }
        })?;
        if fields[1..].iter().any(|f| f.trim() == "null") {
            stats.dropped_null += 1;
            continue;
        }
        let mut nums = [0.0f64; 6];
        for (slot, raw) in nums.iter_mut().zip(&fields[1..]) {
            *slot = raw
                .trim()
                .parse::<f64>()
                .map_err(|e| MarketDataError::MalformedRow {
                    line: line_no,
                    reason: format!("bad number `{raw}`: {e}"),
                })?;
        }
        let bar = Bar {
            date,
            open: nums[0],
            high: nums[1],
            low: nums[2],
            close: nums[3],
            adj_close: nums[4],
            volume: nums[5],
        };
        if let Some(prev) = bars.last() {
            if bar.date <= prev.date {
                return Err(MarketDataError::NonAscendingDates(bar.date));
            }
        }
        bar.validate()?;
        if bar.is_probable_holiday() {
            stats.probable_holidays += 1;
        }
        bars.push(bar);
    }
    if bars.is_empty() {
        return Err(MarketDataError::EmptySeries);
    }
    if stats.probable_holidays > 0 {
        tracing::warn!(
            symbol,
            count = stats.probable_holidays,
            "zero-volume single-price bars retained"
        );
    }
    Ok((
        OhlcvSeries {
            symbol: symbol.to_string(),
            bars,
        },
        stats,
    ))
}

/// Bars with `start <= date <= end`, order preserved.
pub fn slice_by_date(
    series: &OhlcvSeries,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<OhlcvSeries, MarketDataError> {
    if start > end {
        return Err(MarketDataError::InvalidRange { start, end });
    }
    let lo = series.bars.partition_point(|b| b.date < start);
    let hi = series.bars.partition_point(|b| b.date <= end);
    Ok(OhlcvSeries {
        symbol: series.symbol.clone(),
        bars: series.bars[lo..hi.max(lo)].to_vec(),
    })
}

/// Where and how to download quotes.
#[derive(Debug, Clone, PartialEq)]
pub struct FetchConfig {
    /// URL template. `{symbol}`, `{start}`/`{end}` (YYYY-MM-DD) and
    /// `{period1}`/`{period2}` (unix seconds, end is exclusive) are substituted.
    pub url_template: String,
    pub timeout: Duration,
}

pub const DEFAULT_URL_TEMPLATE: &str = "https://query1.finance.yahoo.com/v7/finance/download/{symbol}?period1={period1}&period2={period2}&interval=1d&events=history";

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            url_template: DEFAULT_URL_TEMPLATE.to_string(),
            timeout: Duration::from_secs(30),
        }
    }
}

fn unix_seconds(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0)
        .expect("midnight is valid")
        .and_utc()
        .timestamp()
}

/// Expands the URL template for one request.
pub fn quote_url(template: &str, symbol: &str, start: NaiveDate, end: NaiveDate) -> String {
    let period2 = unix_seconds(end) + 86_400;
    template
        .replace("{symbol}", symbol)
        .replace("{start}", &start.format(DATE_FORMAT).to_string())
        .replace("{end}", &end.format(DATE_FORMAT).to_string())
        .replace("{period1}", &unix_seconds(start).to_string())
        .replace("{period2}", &period2.to_string())
}

/// Downloads history CSV text. Only the header is checked here; the body is
/// returned verbatim for the caller to store or parse.
pub fn fetch_quotes(
    symbol: &str,
    start: NaiveDate,
    end: NaiveDate,
    config: &FetchConfig,
) -> Result<String, MarketDataError> {
    if start > end {
        return Err(MarketDataError::InvalidRange { start, end });
    }
    let url = quote_url(&config.url_template, symbol, start, end);
    tracing::debug!(%url, "fetching quotes");
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(config.timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut response = agent
        .get(&url)
        .call()
        .map_err(|e| MarketDataError::NetworkError(e.to_string()))?;
    let status = response.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(MarketDataError::HttpStatus(status));
    }
    let body = response
        .body_mut()
        .read_to_string()
        .map_err(|e| MarketDataError::NetworkError(e.to_string()))?;
    let header = body.lines().next().unwrap_or("");
    let header = header.strip_suffix('\r').unwrap_or(header);
    if header != CSV_HEADER {
        return Err(MarketDataError::UnexpectedSchema(format!(
            "header `{header}`"
        )));
    }
    Ok(body)
}
