use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use lstmcast::dataset::{chronological_split, make_windows};
use lstmcast::forecast_eval::{predictions_to_csv, EvaluationReport};
use lstmcast::lstm::{load_model, save_model, LstmModel};
use lstmcast::market_data::{fetch_quotes, parse_csv_with_stats};
use lstmcast::{evaluate_one_step, forecast_recursive, pipeline, walk_forward, OhlcvSeries};

use crate::config::RunConfig;
use crate::plot::{merged_csv, read_series_column, render_svg, PlotSeries};
use crate::{Cli, CliError, Command, DataArgs};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    for o in &cli.overrides {
        cfg.set_assignment(o)?;
    }
    match cli.command {
        Command::Fetch(a) => {
            if let Some(e) = a.endpoint {
                cfg.endpoint = e;
            }
            cfg.validate()?;
            cmd_fetch(&cfg, &a.symbol, &a.start, &a.end, &a.out)
        }
        Command::Indicators(a) => {
            apply_data_args(&mut cfg, &a.data)?;
            set_path(&mut cfg.out, a.out);
            cfg.validate()?;
            cmd_indicators(&cfg)
        }
        Command::Train(a) => {
            apply_data_args(&mut cfg, &a.data)?;
            if let Some(e) = a.epochs {
                cfg.epochs = Some(e);
            }
            if let Some(l) = a.lookback {
                cfg.lookback = l;
            }
            if let Some(h) = &a.hidden_sizes {
                cfg.set("hidden_sizes", h)?;
            }
            set_path(&mut cfg.model, a.model_out);
            set_path(&mut cfg.history_out, a.history_out);
            cfg.validate()?;
            cmd_train(&cfg)
        }
        Command::Evaluate(a) => {
            set_path(&mut cfg.model, a.model);
            set_path(&mut cfg.input, a.input);
            set_path(&mut cfg.out, a.out);
            set_path(&mut cfg.predictions_out, a.predictions_out);
            cfg.validate()?;
            cmd_evaluate(&cfg)
        }
        Command::Forecast(a) => {
            set_path(&mut cfg.model, a.model);
            set_path(&mut cfg.input, a.input);
            set_path(&mut cfg.out, a.out);
            if let Some(h) = a.horizon {
                cfg.horizon = h;
            }
            cfg.validate()?;
            cmd_forecast(&cfg)
        }
        Command::Backtest(a) => {
            apply_data_args(&mut cfg, &a.data)?;
            if let Some(f) = a.folds {
                cfg.folds = f;
            }
            if let Some(e) = a.epochs {
                cfg.epochs = Some(e);
            }
            set_path(&mut cfg.out_dir, a.out_dir);
            cfg.validate()?;
            cmd_backtest(&cfg)
        }
        Command::Plot(a) => cmd_plot(&a.series, a.title.as_deref(), a.out.as_deref(), a.csv_out.as_deref()),
    }
}

fn set_path(slot: &mut Option<String>, flag: Option<PathBuf>) {
    if let Some(p) = flag {
        *slot = Some(p.display().to_string());
    }
}

fn apply_data_args(cfg: &mut RunConfig, a: &DataArgs) -> Result<(), CliError> {
    set_path(&mut cfg.input, a.input.clone());
    if let Some(m) = &a.mode {
        cfg.set("mode", m)?;
    }
    if let Some(c) = &a.column_set {
        cfg.set("column_set", c)?;
    }
    Ok(())
}

fn required<'a>(value: &'a Option<String>, what: &str) -> Result<&'a str, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::usage(format!("missing {what} (flag or `{what}` config key)")))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn load_series(cfg: &RunConfig) -> Result<OhlcvSeries, CliError> {
    let path = Path::new(required(&cfg.input, "input")?);
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let symbol = cfg.symbol.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let (series, stats) = parse_csv_with_stats(&text, &symbol).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    tracing::info!(
        bars = series.len(),
        dropped_null = stats.dropped_null,
        probable_holidays = stats.probable_holidays,
        "loaded {}",
        path.display()
    );
    Ok(series)
}

fn load_model_file(cfg: &RunConfig) -> Result<LstmModel, CliError> {
    let path = Path::new(required(&cfg.model, "model")?);
    let file = fs::File::open(path).map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    load_model(std::io::BufReader::new(file))
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn parse_date(s: &str) -> Result<NaiveDate, CliError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| CliError::usage(format!("invalid date `{s}`: {e}")))
}

fn cmd_fetch(cfg: &RunConfig, symbol: &str, start: &str, end: &str, out: &Path) -> Result<(), CliError> {
    let (start, end) = (parse_date(start)?, parse_date(end)?);
    let text = fetch_quotes(symbol, start, end, &cfg.fetch()).map_err(|e| CliError::data(e.to_string()))?;
    write_file(out, &text)?;
    let rows = text.lines().skip(1).filter(|l| !l.trim().is_empty()).count();
    println!("fetched {rows} rows for {symbol} into {}", out.display());
    Ok(())
}

fn cmd_indicators(cfg: &RunConfig) -> Result<(), CliError> {
    let out = PathBuf::from(required(&cfg.out, "out")?);
    let series = load_series(cfg)?;
    let matrix = cfg.pipeline().features.build(&series).map_err(lstmcast::Error::from)?;
    write_file(&out, &matrix.to_csv())?;
    println!(
        "rows={} columns={} warmup_dropped={}",
        matrix.rows(),
        matrix.cols(),
        matrix.warmup_dropped
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let model_out = PathBuf::from(cfg.model.as_deref().unwrap_or("model.json"));
    let history_out = PathBuf::from(cfg.history_out.as_deref().unwrap_or("history.csv"));
    let series = load_series(cfg)?;
    let outcome = pipeline::fit(&series, &cfg.pipeline())?;
    let mut buf = Vec::new();
    save_model(&outcome.model, &mut buf).map_err(lstmcast::Error::from)?;
    write_file(&model_out, &String::from_utf8(buf).expect("model JSON is UTF-8"))?;
    write_file(&history_out, &outcome.history.to_csv())?;
    println!(
        "trained {} epochs on {} samples ({} test held out); final train_mse={:.6e} val_mse={:.6e}",
        outcome.history.train_mse.len(),
        outcome.data.train.len(),
        outcome.data.test.len(),
        outcome.history.train_mse.last().copied().unwrap_or(f64::NAN),
        outcome.history.val_mse.last().copied().unwrap_or(f64::NAN),
    );
    println!("model: {}  history: {}", model_out.display(), history_out.display());
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let out = PathBuf::from(required(&cfg.out, "out")?);
    let model = load_model_file(cfg)?;
    let series = load_series(cfg)?;
    let matrix = model.features.build(&series).map_err(lstmcast::Error::from)?;
    let scaled = model.scaler.transform(&matrix).map_err(lstmcast::Error::from)?;
    let ds = make_windows(&scaled, model.lookback).map_err(lstmcast::Error::from)?;
    let (_, test) = chronological_split(&ds, cfg.pipeline().split()).map_err(lstmcast::Error::from)?;
    let (metrics, rows) = evaluate_one_step(&model, &test)?;
    let report = EvaluationReport::new(metrics, model.mode, series.symbol(), model.train_config.epochs);
    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    write_file(&out, &(json + "\n"))?;
    if let Some(p) = &cfg.predictions_out {
        write_file(Path::new(p), &predictions_to_csv(&rows))?;
    }
    println!(
        "n={} MAPE={:.4}% MAE={:.4} MSE={:.4} RMSE={:.4}",
        metrics.n, metrics.mape, metrics.mae, metrics.mse, metrics.rmse
    );
    Ok(())
}

fn cmd_forecast(cfg: &RunConfig) -> Result<(), CliError> {
    let out = PathBuf::from(required(&cfg.out, "out")?);
    let model = load_model_file(cfg)?;
    let series = load_series(cfg)?;
    let result = forecast_recursive(&model, &series, cfg.horizon)?;
    write_file(&out, &result.to_csv())?;
    println!(
        "{}-day forecast from {:.4} to {:.4}; trend: {}",
        result.horizon,
        result.values[0],
        result.values[result.values.len() - 1],
        result.trend.as_str()
    );
    Ok(())
}

fn cmd_backtest(cfg: &RunConfig) -> Result<(), CliError> {
    let out_dir = PathBuf::from(required(&cfg.out_dir, "out_dir")?);
    let series = load_series(cfg)?;
    let pipeline = cfg.pipeline();
    let folds = walk_forward(&series, &pipeline, cfg.folds)?;
    let mode = lstmcast::lstm::Mode::for_columns(pipeline.features.column_set);
    for f in &folds {
        let report = EvaluationReport::new(f.metrics, mode, series.symbol(), pipeline.train.epochs);
        let mut value = serde_json::to_value(&report).expect("report serialises");
        let obj = value.as_object_mut().expect("object");
        obj.insert("fold".into(), f.fold.into());
        obj.insert("seed".into(), f.seed.into());
        obj.insert("train_rows".into(), f.train_rows.into());
        obj.insert("test_start".into(), f.test_start.format("%Y-%m-%d").to_string().into());
        obj.insert("test_end".into(), f.test_end.format("%Y-%m-%d").to_string().into());
        obj.insert("final_train_mse".into(), f.final_train_mse.into());
        obj.insert("final_val_mse".into(), f.final_val_mse.into());
        let json = serde_json::to_string_pretty(&value).expect("report serialises");
        write_file(&out_dir.join(format!("fold_{}.json", f.fold)), &(json + "\n"))?;
        println!(
            "fold {}: test {}..{} n={} MAPE={:.4}% RMSE={:.4}",
            f.fold, f.test_start, f.test_end, f.metrics.n, f.metrics.mape, f.metrics.rmse
        );
    }
    Ok(())
}

fn parse_series_arg(arg: &str) -> Result<(String, PathBuf, Option<String>), CliError> {
    let (label, rest) = arg
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("expected LABEL=PATH[:COLUMN], got `{arg}`")))?;
    let (path, column) = match rest.rsplit_once(':') {
        Some((p, c)) if !c.contains('/') && !c.contains('\\') && !p.is_empty() => (p, Some(c.to_string())),
        _ => (rest, None),
    };
    Ok((label.to_string(), PathBuf::from(path), column))
}

fn cmd_plot(series_args: &[String], title: Option<&str>, out: Option<&Path>, csv_out: Option<&Path>) -> Result<(), CliError> {
    if out.is_none() && csv_out.is_none() {
        return Err(CliError::usage("plot needs --out and/or --csv-out"));
    }
    let mut series = Vec::with_capacity(series_args.len());
    for arg in series_args {
        let (label, path, column) = parse_series_arg(arg)?;
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        let values = read_series_column(&text, column.as_deref())
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        series.push(PlotSeries { label, values });
    }
    if let Some(p) = out {
        write_file(p, &render_svg(title.unwrap_or(""), &series))?;
        println!("chart: {}", p.display());
    }
    if let Some(p) = csv_out {
        write_file(p, &merged_csv(&series))?;
        println!("csv: {}", p.display());
    }
    Ok(())
}
