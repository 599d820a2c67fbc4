#![allow(dead_code)]

pub mod checks;

use chrono::{Days, NaiveDate};
use lstmcast::lstm::SplitMix64;
use lstmcast::{Bar, OhlcvSeries};

pub fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 1, 2).unwrap()
}

/// Seeded random-walk OHLCV bars with a consistent high/low envelope.
pub fn random_walk(n: usize, seed: u64) -> OhlcvSeries {
    let mut rng = SplitMix64::new(seed);
    let mut close = 100.0;
    let mut bars = Vec::with_capacity(n);
    for i in 0..n {
        let open = close;
        close = (close * (1.0 + 0.02 * (rng.next_f64() - 0.5))).max(1.0);
        let high = open.max(close) * (1.0 + 0.01 * rng.next_f64());
        let low = open.min(close) * (1.0 - 0.01 * rng.next_f64());
        bars.push(Bar {
            date: day0() + Days::new(i as u64),
            open,
            high,
            low,
            close,
            adj_close: close,
            volume: (1e6 * (1.0 + rng.next_f64())).round(),
        });
    }
    OhlcvSeries::new("RW", bars).unwrap()
}

/// Bars built from closes, with a fixed +-`spread` envelope.
pub fn from_closes(closes: &[f64], spread: f64) -> OhlcvSeries {
    let bars = closes
        .iter()
        .enumerate()
        .map(|(i, &c)| Bar {
            date: day0() + Days::new(i as u64),
            open: c,
            high: c + spread,
            low: c - spread,
            close: c,
            adj_close: c,
            volume: 1000.0,
        })
        .collect();
    OhlcvSeries::new("SYN", bars).unwrap()
}

pub fn sine_closes(n: usize, period: f64, mid: f64, amp: f64) -> Vec<f64> {
    (0..n)
        .map(|i| mid + amp * (2.0 * std::f64::consts::PI * i as f64 / period).sin())
        .collect()
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

// ---- naive oracles: direct re-evaluation of each definition, no shared code ----

pub fn naive_sma(x: &[f64], n: usize) -> Vec<Option<f64>> {
    (0..x.len())
        .map(|t| {
            if t + 1 < n {
                None
            } else {
                let mut s = 0.0;
                for v in &x[t + 1 - n..=t] {
                    s += v;
                }
                Some(s / n as f64)
            }
        })
        .collect()
}

pub fn naive_cma(x: &[f64]) -> Vec<Option<f64>> {
    (0..x.len())
        .map(|t| Some(x[..=t].iter().sum::<f64>() / (t + 1) as f64))
        .collect()
}

pub fn naive_wma(x: &[f64], n: usize) -> Vec<Option<f64>> {
    (0..x.len())
        .map(|t| {
            if t + 1 < n {
                return None;
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                let w = (n - i) as f64;
                num += w * x[t - i];
                den += w;
            }
            Some(num / den)
        })
        .collect()
}

pub fn naive_ema(x: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = vec![x[0]];
    for t in 1..x.len() {
        let prev = out[t - 1];
        out.push(prev + alpha * (x[t] - prev));
    }
    out
}

/// Wilder RSI written as explicit gain/loss arrays.
pub fn naive_rsi(x: &[f64], n: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; x.len()];
    if x.len() <= n {
        return out;
    }
    let gains: Vec<f64> = (1..x.len()).map(|t| if x[t] > x[t - 1] { x[t] - x[t - 1] } else { 0.0 }).collect();
    let losses: Vec<f64> = (1..x.len()).map(|t| if x[t] < x[t - 1] { x[t - 1] - x[t] } else { 0.0 }).collect();
    let mut ag = gains[..n].iter().sum::<f64>() / n as f64;
    let mut al = losses[..n].iter().sum::<f64>() / n as f64;
    let value = |g: f64, l: f64| {
        if g == 0.0 && l == 0.0 {
            50.0
        } else if l == 0.0 {
            100.0
        } else {
            100.0 - 100.0 / (1.0 + g / l)
        }
    };
    out[n] = Some(value(ag, al));
    for t in n + 1..x.len() {
        ag = (ag * (n as f64 - 1.0) + gains[t - 1]) / n as f64;
        al = (al * (n as f64 - 1.0) + losses[t - 1]) / n as f64;
        out[t] = Some(value(ag, al));
    }
    out
}

pub fn naive_cci(s: &OhlcvSeries, n: usize) -> Vec<Option<f64>> {
    let m: Vec<f64> = s.bars().iter().map(|b| (b.high + b.low + b.close) / 3.0).collect();
    (0..m.len())
        .map(|t| {
            if t + 1 < n {
                return None;
            }
            let w = &m[t + 1 - n..=t];
            let sm: f64 = w.iter().sum::<f64>() / n as f64;
            let d: f64 = w.iter().map(|v| (v - sm).abs()).sum::<f64>() / n as f64;
            Some(if d == 0.0 { 0.0 } else { (m[t] - sm) / (0.015 * d) })
        })
        .collect()
}

pub fn naive_ad(s: &OhlcvSeries) -> Vec<Option<f64>> {
    let b = s.bars();
    (0..b.len())
        .map(|t| {
            if t == 0 {
                None
            } else if b[t].high == b[t].low {
                Some(0.0)
            } else {
                Some((b[t].high - b[t - 1].close) / (b[t].high - b[t].low))
            }
        })
        .collect()
}

pub fn naive_stoch_k(s: &OhlcvSeries, n: usize) -> Vec<Option<f64>> {
    let b = s.bars();
    (0..b.len())
        .map(|t| {
            if t + 1 < n {
                return None;
            }
            let mut hh = f64::MIN;
            let mut ll = f64::MAX;
            for bar in &b[t + 1 - n..=t] {
                hh = hh.max(bar.high);
                ll = ll.min(bar.low);
            }
            Some(if hh == ll { 50.0 } else { 100.0 * (b[t].close - ll) / (hh - ll) })
        })
        .collect()
}

pub fn naive_stoch_d(k: &[Option<f64>], m: usize) -> Vec<Option<f64>> {
    (0..k.len())
        .map(|t| {
            if t + 1 < m {
                return None;
            }
            let w = &k[t + 1 - m..=t];
            if w.iter().any(Option::is_none) {
                return None;
            }
            Some(w.iter().map(|v| v.unwrap()).sum::<f64>() / m as f64)
        })
        .collect()
}

/// (diff, signal, histogram) from explicitly coded double EMAs.
pub fn naive_macd(x: &[f64], fast: usize, slow: usize, sig: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let f = naive_ema(x, 2.0 / (fast as f64 + 1.0));
    let s = naive_ema(x, 2.0 / (slow as f64 + 1.0));
    let diff: Vec<f64> = (0..x.len()).map(|t| f[t] - s[t]).collect();
    let k = 2.0 / (sig as f64 + 1.0);
    let mut signal = vec![diff[0]];
    for t in 1..diff.len() {
        let prev = signal[t - 1];
        signal.push(prev + k * (diff[t] - prev));
    }
    let hist = (0..x.len()).map(|t| diff[t] - signal[t]).collect();
    (diff, signal, hist)
}

/// Largest absolute deviation between two optional sequences; panics if the
/// defined positions differ.
pub fn max_abs_dev(a: &[Option<f64>], b: &[Option<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| match (x, y) {
            (Some(x), Some(y)) => (x - y).abs(),
            (None, None) => 0.0,
            _ => panic!("definedness differs at {i}: {x:?} vs {y:?}"),
        })
        .fold(0.0, f64::max)
}

pub fn max_rel_dev(a: &[Option<f64>], b: &[Option<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => rel_err(*x, *y, 1e-12),
            (None, None) => 0.0,
            _ => panic!("definedness differs"),
        })
        .fold(0.0, f64::max)
}
