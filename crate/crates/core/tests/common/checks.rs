//! One function per acceptance criterion. Each returns a short detail string
//! on success and a description of the first violation otherwise.

use std::path::PathBuf;

use chrono::NaiveDate;
use lstmcast::dataset::{chronological_split, make_windows, SplitSpec};
use lstmcast::forecast_eval::rmse_from_mse;
use lstmcast::indicators::{self as ind, ColumnSet, FeatureMatrix, IndicatorConfig};
use lstmcast::lstm::{model_from_json, model_to_json, CellVariant, LstmNetwork, SplitMix64};
use lstmcast::market_data::{parse_csv, slice_by_date};
use lstmcast::pipeline::{self, PipelineConfig};
use lstmcast::{evaluate_one_step, forecast_recursive, FeatureSpec, ScalerParams, TrainConfig};

use super::*;

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn metric_identity() -> Check {
    let cases = [(234682.24, 484.44), (18847.97, 137.28)];
    let mut got = Vec::new();
    for (mse, rmse) in cases {
        let r = rmse_from_mse(mse);
        ensure((r - rmse).abs() <= 0.01, || format!("rmse_from_mse({mse}) = {r}, expected {rmse}"))?;
        got.push(format!("{r:.4}"));
    }
    Ok(format!("rmse = {}", got.join(", ")))
}

/// Squared-error loss of one window against `target`.
fn loss(net: &LstmNetwork, window: &[f64], steps: usize, target: f64) -> f64 {
    let p = net.predict(window, steps).unwrap();
    (p - target) * (p - target)
}

/// Compares every BPTT gradient entry with a central difference. Returns
/// `(worst relative error, entries checked)`; the relative error's
/// denominator is floored at 1e-6.
pub fn gradient_check(
    features: usize,
    lookback: usize,
    hidden: &[usize],
    variant: CellVariant,
    seed: u64,
) -> Result<(f64, usize), String> {
    const H: f64 = 1e-5;
    const REL: f64 = 1e-4;
    const ABS_FLOOR: f64 = 1e-6;
    let mut net = LstmNetwork::init(features, hidden, variant, seed);
    let mut rng = SplitMix64::new(seed ^ 0x5eed);
    let window: Vec<f64> = (0..features * lookback).map(|_| rng.symmetric(1.0)).collect();
    let target = rng.symmetric(1.0);
    let (p, cache) = net.forward(&window, lookback).unwrap();
    let grads = net.backward(&cache, 2.0 * (p - target)).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let shapes: Vec<usize> = net.tensors().iter().map(|t| t.len()).collect();
    ensure(
        shapes == analytic.iter().map(Vec::len).collect::<Vec<_>>(),
        || "gradient tensors do not line up with parameters".into(),
    )?;

    let mut worst = 0.0f64;
    let mut checked = 0;
    for (k, grads) in analytic.iter().enumerate() {
        for (e, &a) in grads.iter().enumerate() {
            let orig = net.tensors()[k][e];
            net.tensors_mut()[k][e] = orig + H;
            let up = loss(&net, &window, lookback, target);
            net.tensors_mut()[k][e] = orig - H;
            let down = loss(&net, &window, lookback, target);
            net.tensors_mut()[k][e] = orig;
            let numeric = (up - down) / (2.0 * H);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(ABS_FLOOR);
            checked += 1;
            worst = worst.max(rel);
            ensure(rel <= REL, || {
                format!("{variant:?} tensor {k} entry {e}: analytic {a:.10e} numeric {numeric:.10e} rel {rel:.2e}")
            })?;
        }
    }
    Ok((worst, checked))
}

pub fn gradient_oracle() -> Check {
    let mut parts = Vec::new();
    for variant in [CellVariant::Standard, CellVariant::AsPrinted] {
        let (worst, n) = gradient_check(3, 5, &[4], variant, 2024)?;
        parts.push(format!("{variant:?}: {n} params, worst rel {worst:.1e}"));
    }
    Ok(parts.join("; "))
}

fn check_series(name: &str, got: &[Option<f64>], want: &[Option<f64>], tol: f64, relative: bool) -> Result<(), String> {
    ensure(got.len() == want.len(), || format!("{name}: length {} vs {}", got.len(), want.len()))?;
    for (t, (g, w)) in got.iter().zip(want).enumerate() {
        match (g, w) {
            (None, None) => {}
            (Some(g), Some(w)) => {
                let err = if relative { rel_err(*g, *w, 1e-12) } else { (g - w).abs() };
                ensure(err <= tol, || format!("{name}[{t}]: {g} vs oracle {w} (err {err:.2e})"))?;
            }
            _ => return Err(format!("{name}[{t}]: defined {:?} vs oracle {:?}", g.is_some(), w.is_some())),
        }
    }
    Ok(())
}

fn some(v: Vec<f64>) -> Vec<Option<f64>> {
    v.into_iter().map(Some).collect()
}

/// Every indicator against its naive recomputation on one series.
pub fn indicator_oracles(s: &OhlcvSeries, cfg: &IndicatorConfig) -> Result<(), String> {
    let c = s.closes();
    for &p in &cfg.sma_periods {
        check_series(&format!("sma{p}"), &ind::sma(&c, p), &naive_sma(&c, p), 1e-9, false)?;
    }
    check_series("cma", &ind::cma(&c), &naive_cma(&c), 1e-9, false)?;
    check_series("wma", &ind::wma(&c, cfg.wma_period), &naive_wma(&c, cfg.wma_period), 1e-9, false)?;
    check_series("ema", &ind::ema(&c, cfg.ema_alpha), &some(naive_ema(&c, cfg.ema_alpha)), 1e-9, false)?;
    check_series("rsi", &ind::rsi(&c, cfg.rsi_period), &naive_rsi(&c, cfg.rsi_period), 1e-9, false)?;
    check_series("cci", &ind::cci(s, cfg.cci_period), &naive_cci(s, cfg.cci_period), 1e-6, true)?;
    check_series("ad", &ind::ad(s), &naive_ad(s), 1e-9, false)?;
    let k = ind::stochastic_k(s, cfg.stoch_k_period);
    let nk = naive_stoch_k(s, cfg.stoch_k_period);
    check_series("stochastic_k", &k, &nk, 1e-9, false)?;
    check_series("stochastic_d", &ind::stochastic_d(&k, cfg.stoch_d_period), &naive_stoch_d(&nk, cfg.stoch_d_period), 1e-9, false)?;
    let m = ind::macd(&c, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal);
    let (d, sg, h) = naive_macd(&c, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal);
    check_series("macd diff", &some(m.diff.clone()), &some(d), 1e-9, false)?;
    check_series("macd signal", &some(m.signal.clone()), &some(sg), 1e-9, false)?;
    check_series("macd histogram", &some(m.histogram.clone()), &some(h), 1e-9, false)?;
    for t in 0..c.len() {
        ensure(m.histogram[t] == m.diff[t] - m.signal[t], || {
            format!("histogram != diff - signal at {t}")
        })?;
    }
    for set in [ColumnSet::Univariate, ColumnSet::PaperMultivariate, ColumnSet::Table4All] {
        features_oracle(s, cfg, set)?;
    }
    Ok(())
}

/// `build_features` against columns assembled from the naive oracles.
fn features_oracle(s: &OhlcvSeries, cfg: &IndicatorConfig, set: ColumnSet) -> Result<(), String> {
    let c = s.closes();
    let mut cols: Vec<(String, Vec<Option<f64>>)> = vec![("Close".into(), some(c.clone()))];
    if set != ColumnSet::Univariate {
        cols.push(("CMA".into(), naive_cma(&c)));
        for &p in &cfg.sma_periods {
            cols.push((format!("SMA{p}"), naive_sma(&c, p)));
        }
        cols.push((format!("EMA_{}", cfg.ema_alpha), some(naive_ema(&c, cfg.ema_alpha))));
        cols.push(("RSI".into(), naive_rsi(&c, cfg.rsi_period)));
        let k = naive_stoch_k(s, cfg.stoch_k_period);
        cols.push(("K%".into(), k.clone()));
        cols.push(("D%".into(), naive_stoch_d(&k, cfg.stoch_d_period)));
        cols.push(("CCI".into(), naive_cci(s, cfg.cci_period)));
        let (d, sg, h) = naive_macd(&c, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal);
        cols.push(("macd".into(), some(d)));
        cols.push(("macd_s".into(), some(sg)));
        cols.push(("macd_h".into(), some(h)));
        if set == ColumnSet::Table4All {
            cols.push((format!("WMA{}", cfg.wma_period), naive_wma(&c, cfg.wma_period)));
            cols.push(("AD".into(), naive_ad(s)));
        }
    }
    let start = (0..c.len())
        .find(|&t| cols.iter().all(|(_, v)| v[t].is_some()))
        .ok_or("oracle: no fully defined row")?;
    let m = ind::build_features(s, cfg, set).map_err(|e| format!("build_features({set:?}): {e}"))?;
    let names: Vec<String> = cols.iter().map(|(n, _)| n.clone()).collect();
    ensure(m.column_names == names, || format!("{set:?} columns {:?} vs {names:?}", m.column_names))?;
    ensure(m.warmup_dropped == start && m.rows() == c.len() - start, || {
        format!("{set:?}: warmup {} rows {} vs oracle warmup {start}", m.warmup_dropped, m.rows())
    })?;
    ensure(m.dates == s.dates()[start..], || format!("{set:?}: dates misaligned"))?;
    for (j, (name, v)) in cols.iter().enumerate() {
        for r in 0..m.rows() {
            let want = v[start + r].unwrap();
            let got = m.get(r, j);
            let err = if name == "CCI" { rel_err(got, want, 1e-12) } else { (got - want).abs() };
            let tol = if name == "CCI" { 1e-6 } else { 1e-9 };
            ensure(err <= tol, || format!("{set:?} {name} row {r}: {got} vs {want}"))?;
        }
    }
    Ok(())
}

fn in_0_100(name: &str, v: &[Option<f64>]) -> Result<(), String> {
    for (t, x) in v.iter().enumerate() {
        if let Some(x) = x {
            ensure((0.0..=100.0).contains(x), || format!("{name}[{t}] = {x} outside [0, 100]"))?;
        }
    }
    Ok(())
}

pub fn indicator_bounds(s: &OhlcvSeries, cfg: &IndicatorConfig) -> Result<(), String> {
    let k = ind::stochastic_k(s, cfg.stoch_k_period);
    in_0_100("rsi", &ind::rsi(&s.closes(), cfg.rsi_period))?;
    in_0_100("K%", &k)?;
    in_0_100("D%", &ind::stochastic_d(&k, cfg.stoch_d_period))
}

/// Integer-valued closes. Sums, power-of-two divisions and half-weight
/// EMA updates over these stay exactly representable, so the invariances
/// can be compared bit for bit.
fn integer_closes(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    let mut x = 200.0 + (rng.next_u64() % 200) as f64;
    (0..n)
        .map(|_| {
            x = (x + (rng.next_u64() % 21) as f64 - 10.0).max(1.0);
            x
        })
        .collect()
}

/// Shift equivariance of SMA and EMA and positive-scale invariance of RSI on
/// `cases` random inputs, compared bitwise.
pub fn exact_invariances(cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = SplitMix64::new(seed);
    for case in 0..cases {
        let x = integer_closes(&mut rng, 40);
        let a = (rng.next_u64() % 2001) as f64 - 1000.0;
        let shifted: Vec<f64> = x.iter().map(|v| v + a).collect();
        for n in [1usize, 2, 4, 8, 16] {
            let lhs = ind::sma(&shifted, n);
            let rhs: Vec<Option<f64>> = ind::sma(&x, n).into_iter().map(|v| v.map(|v| v + a)).collect();
            ensure(lhs == rhs, || format!("case {case}: sma(x + {a}, {n}) != sma(x, {n}) + {a}"))?;
        }
        let lhs = ind::ema(&shifted, 0.5);
        let rhs: Vec<Option<f64>> = ind::ema(&x, 0.5).into_iter().map(|v| v.map(|v| v + a)).collect();
        ensure(lhs == rhs, || format!("case {case}: ema(x + {a}) != ema(x) + {a}"))?;

        // Any finite series; power-of-two factors commute with every step.
        let y: Vec<f64> = {
            let mut p = 100.0;
            (0..60)
                .map(|_| {
                    p *= 1.0 + 0.04 * (rng.next_f64() - 0.5);
                    p
                })
                .collect()
        };
        let scale = 2f64.powi((rng.next_u64() % 41) as i32 - 20);
        let n = 1 + (rng.next_u64() % 20) as usize;
        let scaled: Vec<f64> = y.iter().map(|v| v * scale).collect();
        ensure(ind::rsi(&scaled, n) == ind::rsi(&y, n), || {
            format!("case {case}: rsi({scale} * x, {n}) != rsi(x, {n})")
        })?;
    }
    Ok(())
}

pub fn indicator_suite() -> Check {
    let s = random_walk(1000, 7);
    let cfg = IndicatorConfig::default();
    indicator_oracles(&s, &cfg)?;
    indicator_bounds(&s, &cfg)?;
    exact_invariances(100, 11)?;
    Ok("11 operations on 1000 bars; bounds; 100 invariance cases".into())
}

/// Synthetic matrix with a Close column and a second column of a different
/// magnitude, both drawn at random.
pub fn random_matrix(rows: usize, seed: u64) -> FeatureMatrix {
    let mut rng = SplitMix64::new(seed);
    let mut values = Vec::with_capacity(rows * 2);
    for _ in 0..rows {
        values.push(50.0 + 3000.0 * rng.next_f64());
        values.push(1e-3 * rng.symmetric(1.0));
    }
    FeatureMatrix {
        dates: (0..rows).map(|i| day0() + chrono::Days::new(i as u64)).collect(),
        column_names: vec!["Close".into(), "X".into()],
        values,
        warmup_dropped: 0,
    }
}

pub fn scaler_round_trip() -> Check {
    let m = random_matrix(5000, 3);
    let train = 0..4000;
    let scaler = ScalerParams::fit(&m, train.clone()).map_err(|e| e.to_string())?;
    let scaled = scaler.transform(&m).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let x = m.get(r, c);
            let back = scaler.unscale(c, scaled.get(r, c));
            let e = rel_err(back, x, 1e-300);
            worst = worst.max(e);
            ensure(e <= 1e-9, || format!("row {r} col {c}: {x} -> {back}"))?;
        }
    }
    for c in 0..m.cols() {
        let col: Vec<f64> = train.clone().map(|r| scaled.get(r, c)).collect();
        ensure(col.iter().all(|v| (-1.0..=1.0).contains(v)), || format!("column {c} leaves [-1, 1]"))?;
        ensure(col.contains(&-1.0) && col.contains(&1.0), || format!("column {c} misses an endpoint"))?;
    }
    Ok(format!("10^4 values, worst rel {worst:.1e}"))
}

pub fn dataset_hygiene() -> Check {
    let mut datasets = 0;
    for (rows, seed) in [(50usize, 1u64), (200, 2), (997, 3)] {
        let m = random_matrix(rows, seed);
        for lookback in [1, 2, 7, 30, rows - 1] {
            let ds = make_windows(&m, lookback).map_err(|e| e.to_string())?;
            ds.assert_no_look_ahead();
            for s in 0..ds.len() {
                let t = ds.target_rows[s];
                ensure(ds.window(s) == &m.values[(t - lookback) * 2..t * 2], || format!("window {s} misplaced"))?;
                ensure(ds.targets[s] == m.get(t, 0) && ds.dates[s] == m.dates[t], || format!("target {s} misplaced"))?;
            }
            datasets += 1;
            for f in [0.5, 0.8, 0.95] {
                let Ok((train, test)) = chronological_split(&ds, SplitSpec { train_fraction: f }) else {
                    continue;
                };
                train.assert_no_look_ahead();
                test.assert_no_look_ahead();
                ensure(train.dates.last() < test.dates.first(), || "split boundary not strictly ordered".into())?;
                ensure(
                    train.target_rows.last().unwrap() < test.target_rows.first().unwrap(),
                    || "split rows not strictly ordered".into(),
                )?;
                let joined: Vec<NaiveDate> = train.dates.iter().chain(&test.dates).copied().collect();
                ensure(joined == ds.dates, || "split does not reassemble".into())?;
                datasets += 2;
            }
        }
    }
    let s = random_walk(400, 5);
    let cfg = PipelineConfig {
        lookback: 20,
        ..PipelineConfig::default()
    };
    let data = pipeline::prepare(&s, &cfg).map_err(|e| e.to_string())?;
    data.train.assert_no_look_ahead();
    data.test.assert_no_look_ahead();
    ensure(data.train.dates.last() < data.test.dates.first(), || "prepared split misordered".into())?;
    Ok(format!("{} datasets checked", datasets + 2))
}

pub fn serialization() -> Check {
    let s = random_walk(420, 9);
    let cfg = PipelineConfig {
        lookback: 12,
        train: TrainConfig {
            epochs: 2,
            hidden_sizes: vec![6, 5],
            ..TrainConfig::default()
        },
        ..PipelineConfig::default()
    };
    let model = pipeline::fit(&s, &cfg).map_err(|e| e.to_string())?.model;
    let json = model_to_json(&model).map_err(|e| e.to_string())?;
    let loaded = model_from_json(&json).map_err(|e| e.to_string())?;
    let again = model_to_json(&loaded).map_err(|e| e.to_string())?;
    ensure(again == json, || {
        let at = json.bytes().zip(again.bytes()).position(|(a, b)| a != b).unwrap_or(json.len().min(again.len()));
        let lo = at.saturating_sub(60);
        format!(
            "re-save differs at byte {at}: `{}` vs `{}`",
            &json[lo..(at + 40).min(json.len())],
            &again[lo..(at + 40).min(again.len())]
        )
    })?;
    let mut rng = SplitMix64::new(77);
    let width = model.lookback * model.num_features();
    let mut worst = 0.0f64;
    for w in 0..100 {
        let window: Vec<f64> = (0..width).map(|_| rng.symmetric(1.0)).collect();
        let a = model.predict(&window).map_err(|e| e.to_string())?;
        let b = loaded.predict(&window).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs());
        ensure((a - b).abs() <= 1e-12, || format!("window {w}: {a} vs {b}"))?;
    }
    Ok(format!("100 windows, max deviation {worst:.1e}"))
}

pub fn sine_config() -> PipelineConfig {
    PipelineConfig {
        features: FeatureSpec {
            column_set: ColumnSet::Univariate,
            indicators: IndicatorConfig::default(),
            use_adj_close: false,
        },
        lookback: 30,
        train: TrainConfig {
            epochs: 150,
            hidden_sizes: vec![32],
            ..TrainConfig::default()
        },
        ..PipelineConfig::default()
    }
}

pub fn learning_sanity() -> Check {
    let s = from_closes(&sine_closes(1000, 50.0, 100.0, 10.0), 0.5);
    let out = pipeline::fit(&s, &sine_config()).map_err(|e| e.to_string())?;
    let (metrics, _) = evaluate_one_step(&out.model, &out.data.test).map_err(|e| e.to_string())?;
    let first = out.history.train_mse[0];
    let last = *out.history.train_mse.last().unwrap();
    ensure(metrics.mape < 5.0, || format!("test MAPE {:.3}% not < 5%", metrics.mape))?;
    ensure(last < 0.1 * first, || format!("final train MSE {last:.3e} not < 0.1 x {first:.3e}"))?;
    Ok(format!(
        "MAPE {:.3}%, train MSE {first:.2e} -> {last:.2e}",
        metrics.mape
    ))
}

/// One full multivariate run: train, then forecast 30 days. Returns the
/// model JSON and forecast CSV for byte comparison.
pub fn parity_run(s: &OhlcvSeries) -> Result<(String, String, Vec<f64>), String> {
    let cfg = PipelineConfig {
        train: TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        },
        ..PipelineConfig::default()
    };
    let out = pipeline::fit(s, &cfg).map_err(|e| e.to_string())?;
    ensure(out.model.feature_names.len() == 13, || "expected the 13-column set".into())?;
    let fc = forecast_recursive(&out.model, s, 30).map_err(|e| e.to_string())?;
    let json = model_to_json(&out.model).map_err(|e| e.to_string())?;
    Ok((json, fc.to_csv(), fc.values))
}

pub fn parity_series() -> OhlcvSeries {
    random_walk(1600, 2022)
}

pub fn check_forecast_range(values: &[f64], closes: &[f64]) -> Result<(), String> {
    let lo = closes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = closes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ensure(values.len() == 30, || format!("{} forecast values", values.len()))?;
    for (i, v) in values.iter().enumerate() {
        ensure(v.is_finite() && *v >= lo / 3.0 && *v <= 3.0 * hi, || {
            format!("forecast[{i}] = {v} outside [{}, {}]", lo / 3.0, 3.0 * hi)
        })?;
    }
    Ok(())
}

/// Directory holding user-supplied history files, if any.
pub fn yahoo_dir() -> PathBuf {
    std::env::var_os("LSTMCAST_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// `None` when neither file is present.
pub fn yahoo_tables() -> Option<Check> {
    let dir = yahoo_dir();
    let files = [("RELIANCE.NS", 334.875702, 2731.850098), ("INFY.NS", 265.475006, 1892.849976)];
    let present: Vec<_> = files.iter().filter(|(sym, ..)| dir.join(format!("{sym}.csv")).exists()).collect();
    if present.is_empty() {
        return None;
    }
    let run = || -> Check {
        let mut parts = Vec::new();
        for (sym, lo, hi) in present {
            let path = dir.join(format!("{sym}.csv"));
            let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let s = parse_csv(&text, sym).map_err(|e| format!("{sym}: {e}"))?;
            let s = slice_by_date(
                &s,
                NaiveDate::from_ymd_opt(2012, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2021, 12, 31).unwrap(),
            )
            .map_err(|e| format!("{sym}: {e}"))?;
            let c = s.closes();
            let min = c.iter().copied().fold(f64::INFINITY, f64::min);
            let max = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ensure((min - lo).abs() <= 0.01 && (max - hi).abs() <= 0.01, || {
                format!("{sym}: close range {min}..{max}, expected {lo}..{hi}")
            })?;
            parts.push(format!("{sym} {min:.6}..{max:.6}"));
        }
        Ok(parts.join("; "))
    };
    Some(run())
}
