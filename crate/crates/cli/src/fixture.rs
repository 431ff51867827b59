//! Generator of the bundled synthetic dataset: four index-like price series on weekday
//! calendars from 2014 through 2023, each with its own holidays.

use chrono::{Datelike, NaiveDate};
use fracmem_core::longmem::{default_burn_in, simulate_longmem};

use crate::files::sha256_hex;

pub const FIXTURE_SEED: u64 = 20_240_101;

struct AssetSpec {
    id: &'static str,
    /// Long-memory order of the daily returns.
    d: f64,
    drift: f64,
    vol: f64,
    start_price: f64,
}

const ASSETS: [AssetSpec; 4] = [
    AssetSpec {
        id: "syn_us",
        d: 0.10,
        drift: 0.0004,
        vol: 0.011,
        start_price: 1830.0,
    },
    AssetSpec {
        id: "syn_pl",
        d: 0.00,
        drift: 0.0000,
        vol: 0.013,
        start_price: 2400.0,
    },
    AssetSpec {
        id: "syn_de",
        d: 0.05,
        drift: 0.0003,
        vol: 0.012,
        start_price: 9500.0,
    },
    AssetSpec {
        id: "syn_jp",
        d: 0.15,
        drift: 0.0003,
        vol: 0.012,
        start_price: 16000.0,
    },
];

/// Weekdays except New Year's Day, Christmas and about one in thirty dates chosen by a
/// hash of `(id, date)`.
fn calendar(id: &str) -> Vec<NaiveDate> {
    let first = NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date");
    let last = NaiveDate::from_ymd_opt(2023, 12, 31).expect("valid date");
    first
        .iter_days()
        .take_while(|d| *d <= last)
        .filter(|d| d.weekday().number_from_monday() <= 5)
        .filter(|d| !matches!((d.month(), d.day()), (1, 1) | (12, 25)))
        .filter(|d| {
            let h = sha256_hex(format!("{id}:{d}").as_bytes());
            u8::from_str_radix(&h[..2], 16).expect("hex") >= 9
        })
        .collect()
}

/// `(asset id, Date,Close csv)` for every fixture asset.
pub fn fixture_csvs(seed: u64) -> Vec<(String, String)> {
    ASSETS
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let dates = calendar(a.id);
            let noise: Vec<f64> =
                simulate_longmem(a.d, 0.0, dates.len(), seed + i as u64, default_burn_in(a.d, 0.0))
                    .expect("valid simulation parameters");
            let mut log_price = a.start_price.ln();
            let mut csv = String::from("Date,Close\n");
            for (t, date) in dates.iter().enumerate() {
                if t > 0 {
                    log_price += a.drift + a.vol * noise[t];
                }
                csv.push_str(&format!("{},{:.2}\n", date.format("%Y-%m-%d"), log_price.exp()));
            }
            (a.id.to_string(), csv)
        })
        .collect()
}
