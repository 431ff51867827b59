//! Acceptance gate: every criterion at its stated tolerance and runtime bound, one line each.
//!
//! Criteria 5 and 6 need real index closes for 2014-2020. They are read from
//! `$FRACMEM_RAW_DIR` (default `<workspace>/data/raw`) as `spx.csv`, `wig20.csv`, `dax.csv`
//! and `nikkei.csv`, and downloaded from stooq into a temporary cache when absent.

mod common;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use ndarray::{Array3, ArrayView2};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use fracmem_cli::config::{FetchConfig, Source};
use fracmem_cli::fetch::{fetch, FetchRequest};
use fracmem_cli::{cmd_run, RunOptions, StepStatus};
use fracmem_core::indicators::FeatureMatrix;
use fracmem_core::longmem::{default_burn_in, innovations};
use fracmem_core::lstm::{
    draw_masks, fit, gradient_check, predict_series, Architecture, FitRows, LstmNetwork, TrainConfig,
};
use fracmem_core::stationarity::SearchConfig;
use fracmem_core::timeseries::{LogSeries, PriceSeries};
use fracmem_core::trading::{buy_and_hold, run_backtest, SignalSeries, Strategy};
use fracmem_core::{
    adf_stat, apply_diff, frac_weights, invert_diff, load_csv, log_transform, search_min_d, simulate_longmem,
    tempered_weights, whittle_fit, CsvFormat, LongMemModel, Real,
};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    check: fn() -> Outcome,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn days(n: usize) -> Vec<NaiveDate> {
    ymd(2000, 1, 1).iter_days().take(n).collect()
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// `(-1)^k C(d, k)` in exact rational arithmetic over the dyadic value of `d`.
fn binomial_weight(d: f64, k: usize) -> f64 {
    let exact = BigRational::from_f64(d).unwrap();
    let (m, den) = (exact.numer().clone(), exact.denom().clone());
    let mut num = BigInt::from(1);
    let mut den_acc = BigInt::from(1);
    for j in 0..k {
        num *= BigInt::from(j) * &den - &m;
        den_acc *= BigInt::from(j + 1) * &den;
    }
    BigRational::new_raw(num, den_acc).to_f64().unwrap()
}

fn random_walk(n: usize, seed: u64, step: f64) -> Vec<f64> {
    let mut level = 4.6;
    innovations::<f64>(n, seed)
        .into_iter()
        .map(|e| {
            level += step * e;
            level
        })
        .collect()
}

fn weight_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_abs = 0.0f64;
    for _ in 0..1000 {
        let d = rng.random_range(0.05..2.5);
        let k = rng.random_range(1..=200usize);
        let w = frac_weights(d, 1e-300);
        worst_abs = worst_abs.max((w.weights()[k] - binomial_weight(d, k)).abs());
    }
    let mut worst_rel = 0.0f64;
    for _ in 0..200 {
        let d = rng.random_range(0.05..2.5);
        let lambda = rng.random_range(1e-4..0.5);
        let plain = frac_weights(d, 1e-300);
        for (k, &wt) in tempered_weights(d, lambda, 1e-6).weights().iter().enumerate() {
            let expected = (-(k as f64) * lambda).exp() * plain.weights()[k];
            worst_rel = worst_rel.max(((wt - expected) / expected).abs());
        }
    }
    ensure(
        worst_abs < 1e-12 && worst_rel < 1e-14,
        format!("fractional max abs err {worst_abs:.1e}, tempered max rel err {worst_rel:.1e}"),
    )
}

fn degenerate_equivalence() -> Outcome {
    let values = random_walk(3000, 7, 0.01);
    let x = LogSeries::new("x", days(values.len()), values.clone()).map_err(|e| e.to_string())?;
    let y = apply_diff(&x, &frac_weights(1.0, 1e-5)).map_err(|e| e.to_string())?;
    let log_ret_err = y
        .values
        .iter()
        .enumerate()
        .map(|(t, v)| (v - (values[t + 1] - values[t])).abs())
        .fold(0.0, f64::max);
    let mut tempered_err = 0.0f64;
    for d in [0.1, 0.3, 0.46, 0.8, 0.99, 1.5] {
        let a = tempered_weights::<f64>(d, 0.0, 1e-5);
        let b = frac_weights(d, 1e-5);
        if a.window() != b.window() {
            return Err(format!("d={d}: windows {} and {}", a.window(), b.window()));
        }
        for (p, q) in a.weights().iter().zip(b.weights()) {
            tempered_err = tempered_err.max((p - q).abs());
        }
    }
    ensure(
        log_ret_err <= 1e-12 && tempered_err <= 1e-14,
        format!("log-return err {log_ret_err:.1e}, lambda=0 err {tempered_err:.1e}"),
    )
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let d = rng.random_range(0.05..0.95);
        let values = random_walk(6000, 1000 + seed, 0.01);
        let x = LogSeries::new("x", days(values.len()), values).map_err(|e| e.to_string())?;
        let w = frac_weights(d, 1e-5);
        if w.window() >= x.len() {
            return Err(format!("d={d}: window {} exceeds the series", w.window()));
        }
        let y = apply_diff(&x, &w).map_err(|e| e.to_string())?;
        let k = w.window() - 1;
        let back = invert_diff(&y, &w, &x.values()[..k]).map_err(|e| e.to_string())?;
        for (a, b) in back.values().iter().zip(&x.values()[k..]) {
            worst = worst.max(((a - b) / b).abs());
        }
    }
    ensure(worst <= 1e-9, format!("100 series, max rel err {worst:.1e}"))
}

fn adf_calibration() -> Outcome {
    let rejected = |seeds: std::ops::Range<u64>, walk: bool| -> Result<usize, String> {
        seeds
            .into_par_iter()
            .map(|s| {
                let x = if walk {
                    random_walk(2000, s, 1.0)
                } else {
                    innovations::<f64>(2000, s)
                };
                adf_stat(&x, 1)
                    .map(|r| r.statistic < -2.86)
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<Vec<bool>, String>>()
            .map(|v| v.into_iter().filter(|&r| r).count())
    };
    let walks = rejected(0..200, true)?;
    let noise = rejected(10_000..10_200, false)?;
    ensure(
        walks <= 20 && noise >= 198,
        format!("random walks rejected {walks}/200, white noise rejected {noise}/200"),
    )
}

struct IndexData {
    id: &'static str,
    stooq: &'static str,
    d_deprado: f64,
}

const INDICES: [IndexData; 4] = [
    IndexData {
        id: "spx",
        stooq: "^spx",
        d_deprado: 0.46,
    },
    IndexData {
        id: "wig20",
        stooq: "wig20",
        d_deprado: 0.12,
    },
    IndexData {
        id: "dax",
        stooq: "^dax",
        d_deprado: 0.22,
    },
    IndexData {
        id: "nikkei",
        stooq: "^nkx",
        d_deprado: 0.28,
    },
];

fn raw_dir() -> PathBuf {
    std::env::var_os("FRACMEM_RAW_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/raw"))
}

/// Training-window log closes of one index, from the committed CSV or a fresh download.
fn index_log_prices(ix: &IndexData) -> Result<LogSeries<f64>, String> {
    let (from, to) = (ymd(2014, 1, 1), ymd(2020, 12, 31));
    let committed = raw_dir().join(format!("{}.csv", ix.id));
    let path = if committed.is_file() {
        committed
    } else {
        let cfg = FetchConfig {
            timeout_secs: 20,
            ..FetchConfig::default()
        };
        let req = FetchRequest {
            source: Source::Stooq,
            symbol: ix.stooq.into(),
            from,
            to,
        };
        let cache = std::env::temp_dir().join("fracmem-acceptance-cache");
        fetch(&cfg, &cache, &req, false)
            .map_err(|e| format!("{} absent and download failed: {e}", committed.display()))?
    };
    let prices: PriceSeries<f64> =
        load_csv(&path, CsvFormat::Generic).map_err(|e| format!("{}: {e}", path.display()))?;
    let window = prices.between(from, to).map_err(|e| e.to_string())?;
    log_transform(&window).map_err(|e| e.to_string())
}

fn table1_reproduction() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for ix in &INDICES {
        let x = index_log_prices(ix)?;
        let r = search_min_d(&x, &SearchConfig::default()).map_err(|e| format!("{}: {e}", ix.id))?;
        let hit = (r.d_star - ix.d_deprado).abs() <= 0.06 + 1e-12;
        ok &= hit;
        notes.push(format!(
            "{} d*={:.2} (reference {:.2})",
            ix.id, r.d_star, ix.d_deprado
        ));
    }
    ensure(ok, notes.join(", "))
}

fn table2_3_qualitative() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for ix in &INDICES {
        let x = index_log_prices(ix)?;
        let arfima = whittle_fit(x.values(), LongMemModel::Arfima).map_err(|e| e.to_string())?;
        let artfima = whittle_fit(x.values(), LongMemModel::Artfima).map_err(|e| e.to_string())?;
        ok &= (0.44..=0.499).contains(&arfima.d_hat)
            && (0.8..=1.2).contains(&artfima.d_hat)
            && artfima.lambda_hat > 0.0
            && artfima.lambda_hat <= 0.05;
        notes.push(format!(
            "{} arfima d={:.4}, artfima d={:.3} lambda={:.2e}",
            ix.id, arfima.d_hat, artfima.d_hat, artfima.lambda_hat
        ));
    }
    ensure(ok, notes.join("; "))
}

fn estimator_consistency() -> Outcome {
    let arfima: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|s| {
            let x = simulate_longmem::<f64>(0.3, 0.0, 4096, s, default_burn_in(0.3, 0.0))
                .map_err(|e| e.to_string())?;
            let fit = whittle_fit(&x, LongMemModel::Arfima).map_err(|e| e.to_string())?;
            Ok((fit.d_hat - 0.3).abs())
        })
        .collect::<Result<_, String>>()?;
    let artfima: Vec<(f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|s| {
            let x = simulate_longmem::<f64>(0.8, 0.05, 8192, 500 + s, default_burn_in(0.8, 0.05))
                .map_err(|e| e.to_string())?;
            let fit = whittle_fit(&x, LongMemModel::Artfima).map_err(|e| e.to_string())?;
            Ok((fit.d_hat, fit.lambda_hat))
        })
        .collect::<Result<_, String>>()?;
    let mean_arfima = arfima.iter().sum::<f64>() / 50.0;
    let mean_artfima = artfima.iter().map(|(d, _)| (d - 0.8).abs()).sum::<f64>() / 50.0;
    let lambda_hits = artfima.iter().filter(|(_, l)| (0.025..=0.1).contains(l)).count();
    ensure(
        mean_arfima < 0.05 && mean_artfima < 0.1 && lambda_hits >= 30,
        format!(
            "ARFIMA mean |d-0.3| {mean_arfima:.4}; ARTFIMA mean |d-0.8| {mean_artfima:.4}, lambda within 2x on {lambda_hits}/50"
        ),
    )
}

fn lstm_gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst = 0.0f64;
    for case in 0..20u64 {
        let input = rng.random_range(1..=4usize);
        let layers = rng.random_range(1..=2usize);
        let hidden: Vec<usize> = (0..layers).map(|_| rng.random_range(1..=4usize)).collect();
        let (lookback, batch) = (rng.random_range(2..=5usize), rng.random_range(1..=4usize));
        let dropout = if case % 2 == 0 {
            0.0
        } else {
            rng.random_range(0.05..0.4)
        };
        let l2 = if case % 3 == 0 { 1e-2 } else { 0.0 };
        let arch = Architecture::new(hidden.clone(), dropout, dropout).map_err(|e| e.to_string())?;
        let net = LstmNetwork::<f64>::init(input, &arch, case).map_err(|e| e.to_string())?;
        let x = Array3::from_shape_simple_fn((batch, lookback, input), || f64::standard_normal(&mut rng));
        let y: Vec<f64> = (0..batch).map(|_| f64::standard_normal(&mut rng)).collect();
        let windows: Vec<ArrayView2<'_, f64>> = x.outer_iter().collect();
        let masks = (dropout > 0.0).then(|| draw_masks(&net, batch, &mut rng));
        let err = gradient_check(&net, &windows, &y, masks.as_ref(), l2, 1e-5).map_err(|e| e.to_string())?;
        worst = worst.max(err);
    }
    ensure(
        worst < 1e-4,
        format!("20 configurations, max rel err {worst:.1e}"),
    )
}

fn lstm_convergence() -> Outcome {
    let n = 220;
    let dates: Vec<NaiveDate> = days(n + 1);
    let v: Vec<f64> = (0..=n).map(|t| (0.3 * t as f64).sin()).collect();
    let fm = FeatureMatrix::from_parts(
        "sine",
        vec!["x".into()],
        dates[..n].to_vec(),
        dates[1..].to_vec(),
        v[..n].iter().map(|&x| vec![x]).collect(),
        v[1..].to_vec(),
        n,
    )
    .map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs: 500,
        early_stop_patience: None,
        ..TrainConfig::default()
    };
    let arch = Architecture::new(vec![8], 0.0, 0.0).map_err(|e| e.to_string())?;
    let net = LstmNetwork::init(1, &arch, cfg.seed).map_err(|e| e.to_string())?;
    let rows = FitRows {
        train: 0..n,
        val: None,
    };
    let (net, _) = fit(&net, &fm, &rows, &cfg).map_err(|e| e.to_string())?;
    let preds = predict_series(&net, &fm, 0..n, cfg.lookback).map_err(|e| e.to_string())?;
    let mse = preds
        .iter()
        .zip(&fm.target[cfg.lookback - 1..])
        .map(|((_, p), y)| (p - y).powi(2))
        .sum::<f64>()
        / preds.len() as f64;
    ensure(mse < 1e-3, format!("train MSE {mse:.2e} after 500 epochs"))
}

fn backtest_oracle() -> Outcome {
    let prices = |v: Vec<f64>| PriceSeries::new("p", days(v.len()), v).unwrap();
    let p = prices(vec![100.0, 101.0, 100.0]);
    let s =
        SignalSeries::new(days(3), vec![1, -1, -1], Strategy::LongShort, 0.001).map_err(|e| e.to_string())?;
    let e = run_backtest(&p, &s).map_err(|e| e.to_string())?;
    let day2 = -(100.0 / 101.0 - 1.0) - 0.002;
    let want = [1.0, 1.009, 1.009 * (1.0 + day2)];
    let ledger_err = e
        .equity
        .iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mut bh_err = 0.0f64;
    let mut violations = 0;
    for _ in 0..100 {
        let n = rng.random_range(5..80usize);
        let mut level = 100.0;
        let path: Vec<f64> = (0..n)
            .map(|_| {
                level *= (0.02 * f64::standard_normal(&mut rng)).exp();
                level
            })
            .collect();
        let p = prices(path);
        let long = SignalSeries::new(days(n), vec![1; n], Strategy::LongShort, 0.0).unwrap();
        let a = run_backtest(&p, &long).map_err(|e| e.to_string())?;
        let b = buy_and_hold(&p, 0.0).map_err(|e| e.to_string())?;
        bh_err = a
            .equity
            .iter()
            .zip(&b.equity)
            .map(|(x, y)| (x - y).abs())
            .fold(bh_err, f64::max);

        let positions: Vec<i8> = (0..n).map(|_| rng.random_range(-1..=1i8)).collect();
        let c1 = rng.random_range(0.0..0.01);
        let c2 = c1 + rng.random_range(1e-6..0.01);
        let cheap = run_backtest(
            &p,
            &SignalSeries::new(days(n), positions.clone(), Strategy::LongShort, c1).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        let dear = run_backtest(
            &p,
            &SignalSeries::new(days(n), positions, Strategy::LongShort, c2).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        if cheap.equity.iter().zip(&dear.equity).any(|(a, b)| b > a) {
            violations += 1;
        }
    }
    ensure(
        ledger_err <= 1e-12 && bh_err <= 1e-12 && violations == 0,
        format!("ledger err {ledger_err:.1e}, always-long vs buy-and-hold err {bh_err:.1e}, cost monotonicity violations {violations}/100"),
    )
}

fn metric_arithmetic() -> Outcome {
    // (ARC %, ASD %, IR) as printed in the two portfolio tables
    let rows = [
        (1.43, 9.79, "0.15"),
        (2.65, 9.20, "0.29"),
        (6.58, 11.45, "0.57"),
        (-2.45, 9.90, "-0.25"),
        (6.49, 13.59, "0.48"),
        (3.56, 9.50, "0.38"),
        (4.84, 8.34, "0.58"),
        (7.94, 4.86, "1.63"),
        (1.65, 10.10, "0.16"),
        (6.49, 13.59, "0.48"),
    ];
    let misses: Vec<String> = rows
        .iter()
        .filter(|(arc, asd, ir)| format!("{:.2}", arc / asd) != *ir)
        .map(|(arc, asd, ir)| format!("{arc}/{asd} = {:.4} printed {ir}", arc / asd))
        .collect();
    ensure(
        misses.is_empty(),
        format!(
            "{}/10 rows reproduced{}",
            10 - misses.len(),
            if misses.is_empty() {
                String::new()
            } else {
                format!("; {}", misses.join(", "))
            }
        ),
    )
}

fn end_to_end_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<PathBuf, String> {
        let out = tmp.path().join(name);
        let cfg = common::fixture_config(&out);
        let m = cmd_run(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
        if let Some(f) = m.failures().next() {
            return Err(format!("{} {:?} failed: {:?}", f.scope, f.step, f.status));
        }
        Ok(out)
    };
    let a = common::output_tree(&run("a")?);
    let b = common::output_tree(&run("b")?);
    let diffs = common::tree_differences(&a, &b);
    if !diffs.is_empty() {
        return Err(format!("runs differ in {} files, e.g. {}", diffs.len(), diffs[0]));
    }

    let mut cfg = common::fixture_config(&tmp.path().join("no_test"));
    let inputs = tmp.path().join("inputs");
    std::fs::create_dir_all(&inputs).map_err(|e| e.to_string())?;
    let cutoff = cfg.split.test_start.format("%Y-%m-%d").to_string();
    common::truncate_inputs(&mut cfg, &inputs, &cutoff);
    let m = cmd_run(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
    for a in &cfg.assets {
        match m.status(&a.id, fracmem_cli::Step::Train) {
            Some(StepStatus::Ok) => {}
            other => return Err(format!("{} training without test rows: {other:?}", a.id)),
        }
    }
    let c = common::output_tree(&tmp.path().join("no_test"));
    let compared: Vec<&String> = a.keys().filter(|k| common::is_pre_test_artifact(k)).collect();
    let leaks: Vec<&String> = compared
        .iter()
        .copied()
        .filter(|k| a.get(*k) != c.get(*k))
        .collect();
    ensure(
        leaks.is_empty() && !compared.is_empty(),
        format!(
            "{} files identical across runs; {} pre-test artifacts unchanged without test rows{}",
            a.len(),
            compared.len() - leaks.len(),
            leaks
                .first()
                .map(|k| format!(", first leak {k}"))
                .unwrap_or_default()
        ),
    )
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "weight correctness",
            limit: Duration::from_secs(1),
            check: weight_correctness,
        },
        Criterion {
            id: 2,
            name: "degenerate equivalence",
            limit: Duration::from_secs(1),
            check: degenerate_equivalence,
        },
        Criterion {
            id: 3,
            name: "round trip",
            limit: Duration::from_secs(5),
            check: round_trip,
        },
        Criterion {
            id: 4,
            name: "ADF calibration",
            limit: Duration::from_secs(30),
            check: adf_calibration,
        },
        Criterion {
            id: 5,
            name: "d* on index data",
            limit: Duration::from_secs(120),
            check: table1_reproduction,
        },
        Criterion {
            id: 6,
            name: "Whittle fits on index data",
            limit: Duration::from_secs(60),
            check: table2_3_qualitative,
        },
        Criterion {
            id: 7,
            name: "estimator consistency",
            limit: Duration::from_secs(300),
            check: estimator_consistency,
        },
        Criterion {
            id: 8,
            name: "LSTM gradient check",
            limit: Duration::from_secs(60),
            check: lstm_gradient_check,
        },
        Criterion {
            id: 9,
            name: "LSTM convergence",
            limit: Duration::from_secs(60),
            check: lstm_convergence,
        },
        Criterion {
            id: 10,
            name: "backtest oracle",
            limit: Duration::from_secs(5),
            check: backtest_oracle,
        },
        Criterion {
            id: 11,
            name: "metric arithmetic",
            limit: Duration::from_secs(1),
            check: metric_arithmetic,
        },
        Criterion {
            id: 12,
            name: "end-to-end determinism",
            limit: Duration::from_secs(900),
            check: end_to_end_determinism,
        },
    ];
    let mut failed = 0;
    for c in criteria {
        let started = Instant::now();
        let result = (c.check)();
        let elapsed = started.elapsed();
        let (pass, detail) = match result {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        println!(
            "{} {:>2} {:<28} {:>8.2}s / {:>4}s  {detail}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    println!("acceptance: {} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
