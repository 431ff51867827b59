//! Per-asset pipeline stages. Each stage reads the files written by its predecessors under
//! `<out>/<asset>/` and writes its own, so any stage can be re-run on its own.

use std::path::Path;

use chrono::{Duration, NaiveDate};
use fracmem_core::fracdiff::{DiffMeta, DiffSeries, DiffSpec};
use fracmem_core::indicators::{build_features, FeatureMatrix};
use fracmem_core::longmem::{LongMemFit, LongMemModel};
use fracmem_core::lstm::{
    derive_seed, fit, predict_series, tune, Checkpoint, FitRows, LstmNetwork, TuneRows,
};
use fracmem_core::metrics::{forecast_metrics, trading_metrics, MetricsTable};
use fracmem_core::stationarity::sweep_csv;
use fracmem_core::timeseries::{read_csv, PriceSeries};
use fracmem_core::trading::{
    buy_and_hold, gen_signals, portfolio_equity, run_backtest, EquityLine, Strategy,
};
use fracmem_core::{apply_diff, log_transform, predict_price, search_min_d, whittle_fit, CsvFormat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{equity_svg, read_sweep_csv, sweep_svg, EquitySeries};
use crate::config::{AssetConfig, AssetInput, PipelineConfig};
use crate::error::{CliError, Result};
use crate::fetch::{fetch, FetchRequest};
use crate::files::{sha256_hex, OutDir};

pub const PORTFOLIO: &str = "portfolio";
pub const BUY_AND_HOLD: &str = "buy_and_hold";
pub const STRATEGIES: [Strategy; 2] = [Strategy::LongShort, Strategy::LongOnly];

/// The four differencing techniques compared by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LogReturns,
    FracDePrado,
    FracArfima,
    TemperedArtfima,
}

pub const METHODS: [Method; 4] = [
    Method::LogReturns,
    Method::FracDePrado,
    Method::FracArfima,
    Method::TemperedArtfima,
];

impl Method {
    pub fn id(self) -> &'static str {
        match self {
            Self::LogReturns => "log_returns",
            Self::FracDePrado => "frac_deprado",
            Self::FracArfima => "frac_arfima",
            Self::TemperedArtfima => "tempered_artfima",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::LogReturns => "Log returns (d = 1)",
            Self::FracDePrado => "Fractional, d from ADF search",
            Self::FracArfima => "Fractional, d from ARFIMA",
            Self::TemperedArtfima => "Tempered, (d, λ) from ARTFIMA",
        }
    }

    pub fn spec(self, est: &Estimates) -> Result<DiffSpec<f64>> {
        Ok(match self {
            Self::LogReturns => DiffSpec::fractional(1.0, est.tau)?,
            Self::FracDePrado => DiffSpec::fractional(est.d_deprado, est.tau)?,
            Self::FracArfima => DiffSpec::fractional(est.arfima.d_hat, est.tau)?,
            Self::TemperedArtfima => DiffSpec::tempered(est.artfima.d_hat, est.artfima.lambda_hat, est.tau)?,
        })
    }
}

fn method_label(id: &str) -> String {
    METHODS.iter().find(|m| m.id() == id).map_or_else(
        || {
            if id == BUY_AND_HOLD {
                "Buy & Hold".into()
            } else {
                id.into()
            }
        },
        |m| m.label().into(),
    )
}

/// Parameters estimated on the training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimates {
    pub asset_id: String,
    pub train_first: NaiveDate,
    pub train_last: NaiveDate,
    pub train_rows: usize,
    pub tau: f64,
    pub d_deprado: f64,
    pub arfima: LongMemFit<f64>,
    pub artfima: LongMemFit<f64>,
}

/// What a stage did, when it did not fail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Skipped(String),
}

pub struct Ctx<'a> {
    pub cfg: &'a PipelineConfig,
    pub out: &'a OutDir,
    pub offline: bool,
}

impl Ctx<'_> {
    fn asset(&self, id: &str) -> Result<&AssetConfig> {
        self.cfg
            .assets
            .iter()
            .find(|a| a.id == id)
            .ok_or_else(|| CliError::Config(format!("unknown asset `{id}`")))
    }

    fn read_prices(&self, id: &str) -> Result<PriceSeries<f64>> {
        let text = self.out.read_to_string(&format!("{id}/prices.csv"))?;
        Ok(read_csv(text.as_bytes(), id, CsvFormat::Generic)?.series)
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&self, rel: &str) -> Result<T> {
        let text = self.out.read_to_string(rel)?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{rel}: {e}")))
    }

    fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        self.out.write(rel, text)?;
        Ok(())
    }

    fn read_diff(&self, id: &str, m: Method) -> Result<DiffSeries<f64>> {
        let meta: DiffMeta<f64> = self.read_json(&format!("{id}/diff/{}.json", m.id()))?;
        let text = self.out.read_to_string(&format!("{id}/diff/{}.csv", m.id()))?;
        Ok(DiffSeries::read_csv(text.as_bytes(), &meta)?)
    }

    fn features(&self, id: &str, m: Method, prices: &PriceSeries<f64>) -> Result<FeatureMatrix<f64>> {
        Ok(build_features(&self.read_diff(id, m)?, prices, &self.cfg.split)?)
    }

    /// Seed of one (asset, method) model, independent of which other assets are configured.
    fn model_seed(&self, id: &str, m: Method) -> u64 {
        let h = u64::from_str_radix(&sha256_hex(id.as_bytes())[..16], 16).expect("hex digest");
        let index = METHODS.iter().position(|x| *x == m).expect("known method");
        derive_seed(self.cfg.seed ^ h, index)
    }
}

/// Loads the configured input and stores the rows inside `[train_start, test_end]`.
pub fn ingest(ctx: &Ctx, id: &str) -> Result<Outcome> {
    let asset = ctx.asset(id)?;
    let split = &ctx.cfg.split;
    let (path, format) = match asset.input()? {
        AssetInput::File(p) => (p.to_path_buf(), asset.format),
        AssetInput::Remote { source, symbol } => {
            let req = FetchRequest {
                source,
                symbol: symbol.to_string(),
                from: split.train_start,
                to: split.test_end,
            };
            let cache = ctx.out.path("cache")?;
            (
                fetch(&ctx.cfg.fetch, &cache, &req, ctx.offline)?,
                CsvFormat::Generic,
            )
        }
    };
    let text = std::fs::read(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let series: PriceSeries<f64> = read_csv(text.as_slice(), id, format)?.series;
    let window = series.between(split.train_start, split.test_end)?;
    ctx.out
        .write(&format!("{id}/prices.csv"), window.to_csv_string())?;
    Ok(Outcome::Done)
}

/// d by ADF search plus ARFIMA and ARTFIMA Whittle fits, all on training-window log prices.
pub fn estimate(ctx: &Ctx, id: &str) -> Result<Outcome> {
    let split = &ctx.cfg.split;
    let prices = ctx.read_prices(id)?;
    let train = prices.between(split.train_start, split.train_end)?;
    let logp = log_transform(&train)?;
    let search = match search_min_d(&logp, &ctx.cfg.diff.search()) {
        Ok(s) => s,
        Err(fracmem_core::Error::NoStationaryOrder { rows }) => {
            // keep the evidence: the full sweep, none of it below the critical value
            let mut text = String::from("d,adf_stat,pearson_corr\n");
            for (d, adf, corr) in &rows {
                text.push_str(&format!("{d},{adf},{corr}\n"));
            }
            ctx.out.write(&format!("{id}/sweep.csv"), text)?;
            return Err(fracmem_core::Error::NoStationaryOrder { rows }.into());
        }
        Err(e) => return Err(e.into()),
    };
    ctx.out
        .write(&format!("{id}/sweep.csv"), sweep_csv(&search.grid))?;
    let arfima = whittle_fit(logp.values(), LongMemModel::Arfima)?;
    let artfima = whittle_fit(logp.values(), LongMemModel::Artfima)?;
    log::info!(
        "{id}: d_adf={} {} | {}",
        search.d_star,
        arfima.report(),
        artfima.report()
    );
    let est = Estimates {
        asset_id: id.to_string(),
        train_first: train.first_date(),
        train_last: train.last_date(),
        train_rows: train.len(),
        tau: ctx.cfg.diff.tau,
        d_deprado: search.d_star,
        arfima,
        artfima,
    };
    ctx.write_json(&format!("{id}/estimate.json"), &est)?;
    Ok(Outcome::Done)
}

/// Applies the four transforms to the whole log series and trims them to a common start.
pub fn difference(ctx: &Ctx, id: &str) -> Result<Outcome> {
    let est: Estimates = ctx.read_json(&format!("{id}/estimate.json"))?;
    let logp = log_transform(&ctx.read_prices(id)?)?;
    let series: Vec<DiffSeries<f64>> = METHODS
        .iter()
        .map(|m| Ok(apply_diff(&logp, &m.spec(&est)?.weights()?)?))
        .collect::<Result<_>>()?;
    let start = series.iter().map(|s| s.dates[0]).max().expect("four methods");
    ctx.out.remove_dir(&format!("{id}/diff"))?;
    for (m, s) in METHODS.iter().zip(&series) {
        let s = s.starting_at(start);
        let mut buf = Vec::new();
        s.write_csv(&mut buf)?;
        ctx.out.write(&format!("{id}/diff/{}.csv", m.id()), buf)?;
        ctx.write_json(&format!("{id}/diff/{}.json", m.id()), &s.meta())?;
    }
    Ok(Outcome::Done)
}

/// Random-search tuning on train/validation rows, then a final fit on the whole training
/// window with the selected hyperparameters, per method.
pub fn train(ctx: &Ctx, id: &str) -> Result<Outcome> {
    let prices = ctx.read_prices(id)?;
    let split = &ctx.cfg.split;
    let tuning = &ctx.cfg.tuning;
    for dir in ["features", "tuning", "models"] {
        ctx.out.remove_dir(&format!("{id}/{dir}"))?;
    }
    let results: Vec<Result<()>> = METHODS
        .par_iter()
        .map(|&m| {
            let fm = ctx.features(id, m, &prices)?;
            ctx.out
                .write(&format!("{id}/features/{}.csv", m.id()), fm.to_csv())?;
            let before_val = split.val_start - Duration::days(1);
            let rows = TuneRows {
                train: fm.rows_with_target_in(split.train_start, before_val),
                val: fm.rows_with_target_in(split.val_start, split.val_end),
            };
            let result = tune(&fm, &rows, &tuning.space, tuning.budget, ctx.model_seed(id, m))?;
            let log: String = result.trials.iter().map(|t| t.log_line() + "\n").collect();
            ctx.out.write(&format!("{id}/tuning/{}.log", m.id()), log)?;
            ctx.write_json(&format!("{id}/tuning/{}.json", m.id()), &result)?;

            let best = &result.best;
            let mut config = best.config.clone();
            config.early_stop_patience = None;
            let net = LstmNetwork::init(fm.width(), &best.architecture, config.seed)?;
            let rows = FitRows {
                train: 0..fm.n_train,
                val: None,
            };
            let (net, _) = fit(&net, &fm, &rows, &config)?;
            let ckpt = Checkpoint {
                asset_id: id.to_string(),
                feature_names: fm.names.clone(),
                architecture: best.architecture.clone(),
                train_config: config,
                scaler: fm.scaler.clone(),
                network: net,
            };
            ctx.out
                .write(&format!("{id}/models/{}.json", m.id()), ckpt.to_json()? + "\n")?;
            Ok(())
        })
        .collect();
    results.into_iter().collect::<Result<Vec<()>>>()?;
    Ok(Outcome::Done)
}

/// One prediction row: the forecast for `date`, made at the close of `made_on`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub made_on: NaiveDate,
    pub date: NaiveDate,
    pub actual: f64,
    pub predicted: f64,
    pub predicted_diff: f64,
}

const PREDICTION_HEADER: &str = "Date,made_on,actual,predicted,predicted_diff";

fn predictions_csv(rows: &[Prediction]) -> String {
    let mut s = format!("{PREDICTION_HEADER}\n");
    for p in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            p.date.format("%Y-%m-%d"),
            p.made_on.format("%Y-%m-%d"),
            p.actual,
            p.predicted,
            p.predicted_diff
        ));
    }
    s
}

pub fn read_predictions(text: &str) -> Result<Vec<Prediction>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Data(e.to_string()))?;
        let bad = || CliError::Data(format!("bad prediction row {rec:?}"));
        let date = |i| {
            rec.get(i)
                .and_then(|v| NaiveDate::parse_from_str(v, "%Y-%m-%d").ok())
                .ok_or_else(bad)
        };
        let num = |i| rec.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(bad);
        out.push(Prediction {
            date: date(0)?,
            made_on: date(1)?,
            actual: num(2)?,
            predicted: num(3)?,
            predicted_diff: num(4)?,
        });
    }
    Ok(out)
}

/// One-step-ahead test-window forecasts mapped back to prices, and their accuracy table.
pub fn predict(ctx: &Ctx, id: &str) -> Result<Outcome> {
    let prices = ctx.read_prices(id)?;
    let split = &ctx.cfg.split;
    ctx.out.remove_dir(&format!("{id}/predictions"))?;
    let logp = log_transform(&prices)?;
    let mut table_rows = Vec::new();
    for m in METHODS {
        let fm = ctx.features(id, m, &prices)?;
        let test = fm.rows_with_target_in(split.test_start, split.test_end);
        if test.is_empty() {
            return Ok(Outcome::Skipped("no test-window rows".into()));
        }
        let ckpt =
            Checkpoint::<f64>::from_json(&ctx.out.read_to_string(&format!("{id}/models/{}.json", m.id()))?)?;
        if ckpt.scaler != fm.scaler || ckpt.feature_names != fm.names {
            return Err(CliError::Data(format!(
                "{id}/{}: model was trained on different features",
                m.id()
            )));
        }
        let lb = ckpt.train_config.lookback;
        let first = test.start.checked_sub(lb - 1).ok_or_else(|| {
            CliError::Data(format!(
                "{id}/{}: not enough history before the test window",
                m.id()
            ))
        })?;
        let w = fm_spec(ctx, id, m)?.weights()?;
        let k = w.window() - 1;
        let preds = predict_series(&ckpt.network, &fm, first..test.end, lb)?;
        let mut rows = Vec::with_capacity(preds.len());
        for (i, (date, pdiff)) in preds.into_iter().enumerate() {
            let j = logp
                .dates()
                .binary_search(&date)
                .map_err(|_| CliError::Data(format!("{id}: no price on {date}")))?;
            let recent = &logp.values()[j - k..j];
            rows.push(Prediction {
                made_on: fm.dates[test.start + i],
                date,
                actual: prices.close()[j],
                predicted: predict_price(pdiff, &w, recent)?,
                predicted_diff: pdiff,
            });
        }
        ctx.out.write(
            &format!("{id}/predictions/{}.csv", m.id()),
            predictions_csv(&rows),
        )?;
        let actual: Vec<f64> = rows.iter().map(|r| r.actual).collect();
        let predicted: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
        table_rows.push((m.id().to_string(), forecast_metrics(&actual, &predicted)?));
    }
    let table = MetricsTable::forecast(format!("{id}: forecast accuracy on the test window"), &table_rows);
    ctx.out.write(&format!("{id}/forecast.csv"), table.to_csv())?;
    ctx.out.write(&format!("{id}/forecast.txt"), table.to_text())?;
    Ok(Outcome::Done)
}

fn fm_spec(ctx: &Ctx, id: &str, m: Method) -> Result<DiffSpec<f64>> {
    let meta: DiffMeta<f64> = ctx.read_json(&format!("{id}/diff/{}.json", m.id()))?;
    Ok(DiffSpec {
        kind: meta.kind,
        d: meta.d,
        lambda: meta.lambda,
        tau: meta.tau,
    })
}

/// Parses `Date,equity,position,daily_return,turnover` rows.
pub fn read_equity(text: &str) -> Result<EquityLine<f64>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut e = EquityLine {
        dates: Vec::new(),
        equity: Vec::new(),
        positions: Vec::new(),
        daily_returns: Vec::new(),
        turnover: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|err| CliError::Data(err.to_string()))?;
        let bad = || CliError::Data(format!("bad equity row {rec:?}"));
        let num = |i| rec.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(bad);
        e.dates.push(
            rec.get(0)
                .and_then(|v| NaiveDate::parse_from_str(v, "%Y-%m-%d").ok())
                .ok_or_else(bad)?,
        );
        e.equity.push(num(1)?);
        e.positions.push(num(2)?);
        e.daily_returns.push(num(3)?);
        e.turnover.push(num(4)?);
    }
    if e.dates.is_empty() {
        return Err(CliError::Data("empty equity line".into()));
    }
    Ok(e)
}

fn strategy_id(s: Strategy) -> &'static str {
    match s {
        Strategy::LongShort => "long_short",
        Strategy::LongOnly => "long_only",
    }
}

fn strategy_title(s: Strategy) -> &'static str {
    match s {
        Strategy::LongShort => "Long-Short",
        Strategy::LongOnly => "Long Only",
    }
}

/// Signals from each method's forecasts, backtested net of costs against Buy & Hold.
pub fn backtest(ctx: &Ctx, id: &str) -> Result<Outcome> {
    let prices = ctx.read_prices(id)?;
    ctx.out.remove_dir(&format!("{id}/equity"))?;
    if !ctx.out.exists(&format!("{id}/predictions")) {
        return Ok(Outcome::Skipped("no predictions".into()));
    }
    let cost = ctx.cfg.cost;
    let mut dates_ref: Option<Vec<NaiveDate>> = None;
    let mut lines: Vec<Vec<(String, EquityLine<f64>)>> = vec![Vec::new(); STRATEGIES.len()];
    for m in METHODS {
        let preds = read_predictions(
            &ctx.out
                .read_to_string(&format!("{id}/predictions/{}.csv", m.id()))?,
        )?;
        if preds.is_empty() {
            return Err(CliError::Data(format!("{id}/{}: no predictions", m.id())));
        }
        if preds.windows(2).any(|w| w[1].made_on != w[0].date) {
            return Err(CliError::Data(format!(
                "{id}/{}: predictions are not consecutive",
                m.id()
            )));
        }
        let mut dates = vec![preds[0].made_on];
        dates.extend(preds.iter().map(|p| p.date));
        match &dates_ref {
            Some(d) if *d != dates => {
                return Err(CliError::Data(format!(
                    "{id}/{}: prediction dates differ across methods",
                    m.id()
                )))
            }
            _ => dates_ref = Some(dates.clone()),
        }
        let window = prices.between(dates[0], *dates.last().expect("non-empty"))?;
        if window.dates() != dates.as_slice() {
            return Err(CliError::Data(format!(
                "{id}: price dates do not match prediction dates"
            )));
        }
        let predicted_next: Vec<f64> = preds.iter().map(|p| p.predicted).collect();
        for (si, &s) in STRATEGIES.iter().enumerate() {
            let signals = gen_signals(&dates, window.close(), &predicted_next, s, cost)?;
            let line = run_backtest(&window, &signals)?;
            ctx.out.write(
                &format!("{id}/equity/{}/{}.csv", strategy_id(s), m.id()),
                line.to_csv_string(),
            )?;
            lines[si].push((m.id().to_string(), line));
        }
    }
    let dates = dates_ref.expect("four methods");
    let window = prices.between(dates[0], *dates.last().expect("non-empty"))?;
    let bh = buy_and_hold(&window, cost)?;
    ctx.out
        .write(&format!("{id}/equity/{BUY_AND_HOLD}.csv"), bh.to_csv_string())?;
    for (si, &s) in STRATEGIES.iter().enumerate() {
        lines[si].push((BUY_AND_HOLD.to_string(), bh.clone()));
        write_trading_table(
            ctx,
            &format!("{id}/trading_{}", strategy_id(s)),
            &format!("{id}: {} strategy", strategy_title(s)),
            &lines[si],
        )?;
    }
    Ok(Outcome::Done)
}

fn write_trading_table(
    ctx: &Ctx,
    stem: &str,
    title: &str,
    lines: &[(String, EquityLine<f64>)],
) -> Result<()> {
    let rows = lines
        .iter()
        .map(|(name, l)| Ok((name.clone(), trading_metrics(l)?)))
        .collect::<Result<Vec<_>>>()?;
    let table = MetricsTable::trading(title, &rows);
    ctx.out.write(&format!("{stem}.csv"), table.to_csv())?;
    ctx.out.write(&format!("{stem}.txt"), table.to_text())?;
    Ok(())
}

/// Equally weighted portfolio of the per-asset equity lines, per strategy and method.
pub fn portfolio(ctx: &Ctx, ids: &[String]) -> Result<Outcome> {
    ctx.out.remove_dir(PORTFOLIO)?;
    if ids.len() < 2 {
        return Ok(Outcome::Skipped(format!(
            "{} asset(s) with backtests, need 2",
            ids.len()
        )));
    }
    let load = |rel: String| -> Result<EquityLine<f64>> { read_equity(&ctx.out.read_to_string(&rel)?) };
    let combine = |stem: &str| -> Result<EquityLine<f64>> {
        let lines = ids
            .iter()
            .map(|id| load(format!("{id}/equity/{stem}.csv")))
            .collect::<Result<Vec<_>>>()?;
        Ok(portfolio_equity(&lines, None)?)
    };
    let bh = combine(BUY_AND_HOLD)?;
    ctx.out.write(
        &format!("{PORTFOLIO}/equity/{BUY_AND_HOLD}.csv"),
        bh.to_csv_string(),
    )?;
    for s in STRATEGIES {
        let mut lines = Vec::new();
        for m in METHODS {
            let stem = format!("{}/{}", strategy_id(s), m.id());
            let line = combine(&stem)?;
            ctx.out
                .write(&format!("{PORTFOLIO}/equity/{stem}.csv"), line.to_csv_string())?;
            lines.push((m.id().to_string(), line));
        }
        lines.push((BUY_AND_HOLD.to_string(), bh.clone()));
        let title = format!("Portfolio of {}: {} strategy", ids.join(", "), strategy_title(s));
        write_trading_table(
            ctx,
            &format!("{PORTFOLIO}/trading_{}", strategy_id(s)),
            &title,
            &lines,
        )?;
    }
    Ok(Outcome::Done)
}

/// Sweep chart and equity charts of one asset, or of the portfolio when `id` is `portfolio`.
pub fn charts(ctx: &Ctx, id: &str) -> Result<Outcome> {
    let mut drawn = 0;
    if id != PORTFOLIO && ctx.out.exists(&format!("{id}/sweep.csv")) {
        let rows = read_sweep_csv(&ctx.out.read_to_string(&format!("{id}/sweep.csv"))?)?;
        let title = format!("{id}: ADF statistic and correlation against d");
        ctx.out.write(
            &format!("{id}/sweep.svg"),
            sweep_svg(&title, &rows, ctx.cfg.diff.critical_value)?,
        )?;
        drawn += 1;
    }
    if ctx.out.exists(&format!("{id}/equity")) {
        for s in STRATEGIES {
            let mut series = Vec::new();
            let mut files: Vec<String> = METHODS
                .iter()
                .map(|m| format!("{id}/equity/{}/{}.csv", strategy_id(s), m.id()))
                .collect();
            files.push(format!("{id}/equity/{BUY_AND_HOLD}.csv"));
            for f in files {
                let line = read_equity(&ctx.out.read_to_string(&f)?)?;
                let stem = Path::new(&f)
                    .file_stem()
                    .expect("csv file")
                    .to_string_lossy()
                    .into_owned();
                series.push(EquitySeries {
                    label: method_label(&stem),
                    dates: line.dates,
                    values: line.equity,
                });
            }
            let title = format!("{id}: equity lines, {} strategy", strategy_title(s));
            ctx.out.write(
                &format!("{id}/equity_{}.svg", strategy_id(s)),
                equity_svg(&title, &series)?,
            )?;
            drawn += 1;
        }
    }
    if drawn == 0 {
        return Ok(Outcome::Skipped("nothing to draw".into()));
    }
    Ok(Outcome::Done)
}
