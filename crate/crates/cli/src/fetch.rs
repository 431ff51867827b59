//! Daily-quote downloads with an on-disk cache keyed by (source, symbol, range).

use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;
use fracmem_core::timeseries::{read_csv, PriceSeries};
use fracmem_core::CsvFormat;
use serde::Deserialize;

use crate::config::{FetchConfig, Source};
use crate::error::{CliError, Result};
use crate::files::{sha256_hex, write_atomic};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchRequest {
    pub source: Source,
    pub symbol: String,
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl FetchRequest {
    /// `<source>/<symbol>-<hash>_<from>_<to>.csv`; the hash keeps symbols that differ only
    /// in punctuation apart.
    pub fn cache_key(&self) -> String {
        let clean: String = self
            .symbol
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() {
                    c.to_ascii_lowercase()
                } else {
                    '_'
                }
            })
            .collect();
        let tag = &sha256_hex(self.symbol.as_bytes())[..8];
        format!(
            "{}/{clean}-{tag}_{}_{}.csv",
            self.source.name(),
            self.from.format("%Y%m%d"),
            self.to.format("%Y%m%d")
        )
    }
}

/// Returns the cached normalized CSV for `req`, downloading it first unless `offline`.
pub fn fetch(cfg: &FetchConfig, cache_dir: &Path, req: &FetchRequest, offline: bool) -> Result<PathBuf> {
    let path = cache_dir.join(req.cache_key());
    if path.is_file() {
        log::info!(
            "{} {}: cache hit {}",
            req.source.name(),
            req.symbol,
            path.display()
        );
        return Ok(path);
    }
    if offline {
        return Err(CliError::Fetch(format!(
            "{} {} not cached and network disabled",
            req.source.name(),
            req.symbol
        )));
    }
    let body = download(cfg, req)?;
    let csv = normalize(req, &body)?;
    write_atomic(&path, csv.as_bytes())?;
    Ok(path)
}

fn download(cfg: &FetchConfig, req: &FetchRequest) -> Result<String> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
        .build()
        .into();
    let request = match req.source {
        Source::Stooq => agent
            .get(&cfg.stooq_url)
            .query("s", &req.symbol)
            .query("d1", req.from.format("%Y%m%d").to_string())
            .query("d2", req.to.format("%Y%m%d").to_string())
            .query("i", "d"),
        Source::Yahoo => {
            let start = req
                .from
                .and_hms_opt(0, 0, 0)
                .expect("midnight")
                .and_utc()
                .timestamp();
            let end = req
                .to
                .succ_opt()
                .unwrap_or(req.to)
                .and_hms_opt(0, 0, 0)
                .expect("midnight");
            agent
                .get(format!("{}{}", cfg.yahoo_url, encode_path_segment(&req.symbol)))
                .query("period1", start.to_string())
                .query("period2", end.and_utc().timestamp().to_string())
                .query("interval", "1d")
        }
    };
    let what = format!("{} {}", req.source.name(), req.symbol);
    let mut response = request
        .call()
        .map_err(|e| CliError::Fetch(format!("{what}: {e}")))?;
    response
        .body_mut()
        .read_to_string()
        .map_err(|e| CliError::Fetch(format!("{what}: {e}")))
}

fn encode_path_segment(s: &str) -> String {
    s.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'.' | b'_' | b'~' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

/// Converts a raw payload into `Date,Close` rows inside the requested range.
pub fn normalize(req: &FetchRequest, body: &str) -> Result<String> {
    let source_err = |m: String| CliError::Source(format!("{} {}: {m}", req.source.name(), req.symbol));
    let series: PriceSeries<f64> = match req.source {
        Source::Stooq => {
            read_csv(body.as_bytes(), req.symbol.clone(), CsvFormat::Stooq)
                .map_err(|e| source_err(e.to_string()))?
                .series
        }
        Source::Yahoo => parse_yahoo_chart(body, &req.symbol).map_err(source_err)?,
    };
    let trimmed = series
        .between(req.from, req.to)
        .map_err(|e| source_err(e.to_string()))?;
    Ok(trimmed.to_csv_string())
}

#[derive(Deserialize)]
struct ChartEnvelope {
    chart: Chart,
}

#[derive(Deserialize)]
struct Chart {
    result: Option<Vec<ChartResult>>,
    error: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct ChartResult {
    meta: ChartMeta,
    timestamp: Vec<i64>,
    indicators: Indicators,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ChartMeta {
    #[serde(default)]
    gmtoffset: i64,
}

#[derive(Deserialize)]
struct Indicators {
    quote: Vec<Quote>,
}

#[derive(Deserialize)]
struct Quote {
    close: Vec<Option<f64>>,
}

fn parse_yahoo_chart(body: &str, symbol: &str) -> std::result::Result<PriceSeries<f64>, String> {
    let env: ChartEnvelope =
        serde_json::from_str(body).map_err(|e| format!("malformed chart payload: {e}"))?;
    if let Some(err) = env.chart.error.filter(|e| !e.is_null()) {
        return Err(format!("source reported {err}"));
    }
    let result = env
        .chart
        .result
        .and_then(|r| r.into_iter().next())
        .ok_or("empty chart result")?;
    let quote = result.indicators.quote.first().ok_or("no quote block")?;
    if quote.close.len() != result.timestamp.len() {
        return Err("timestamp and close arrays differ in length".into());
    }
    let mut csv = String::from("Date,Close\n");
    for (ts, close) in result.timestamp.iter().zip(&quote.close) {
        let Some(close) = close else { continue };
        let date = chrono::DateTime::from_timestamp(ts + result.meta.gmtoffset, 0)
            .ok_or_else(|| format!("bad timestamp {ts}"))?
            .date_naive();
        csv.push_str(&format!("{},{close}\n", date.format("%Y-%m-%d")));
    }
    read_csv(csv.as_bytes(), symbol, CsvFormat::Generic)
        .map(|r| r.series)
        .map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(source: Source) -> FetchRequest {
        FetchRequest {
            source,
            symbol: "^spx".into(),
            from: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            to: NaiveDate::from_ymd_opt(2020, 12, 31).unwrap(),
        }
    }

    #[test]
    fn cache_keys_separate_symbols_and_ranges() {
        let a = req(Source::Stooq);
        let mut b = a.clone();
        b.symbol = "_spx".into();
        let mut c = a.clone();
        c.to = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        assert_ne!(a.cache_key(), b.cache_key());
        assert_ne!(a.cache_key(), c.cache_key());
        assert!(a.cache_key().starts_with("stooq/_spx-"));
        assert!(a.cache_key().ends_with("_20200101_20201231.csv"));
    }

    #[test]
    fn stooq_payload_is_normalized_and_trimmed() {
        let body = "Date,Open,High,Low,Close,Volume\n2019-12-31,1,1,1,3000.5,10\n2020-01-02,1,1,1,3257.85,10\n2020-01-03,1,1,1,3234.85,10\n";
        let out = normalize(&req(Source::Stooq), body).unwrap();
        assert_eq!(out, "Date,Close\n2020-01-02,3257.85\n2020-01-03,3234.85\n");
    }

    #[test]
    fn yahoo_chart_payload_is_normalized() {
        let body = r#"{"chart":{"result":[{"meta":{"gmtoffset":-18000},
            "timestamp":[1577975400,1578061800,1578321000],
            "indicators":{"quote":[{"close":[3257.85,null,3246.28]}]}}],"error":null}}"#;
        let out = normalize(&req(Source::Yahoo), body).unwrap();
        assert_eq!(out, "Date,Close\n2020-01-02,3257.85\n2020-01-06,3246.28\n");
    }

    #[test]
    fn malformed_payloads_are_source_errors() {
        for (source, body) in [
            (Source::Stooq, "No data"),
            (Source::Yahoo, "<html>"),
            (
                Source::Yahoo,
                r#"{"chart":{"result":null,"error":{"code":"Not Found"}}}"#,
            ),
        ] {
            assert!(matches!(normalize(&req(source), body), Err(CliError::Source(_))));
        }
    }

    #[test]
    fn offline_miss_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let err = fetch(&FetchConfig::default(), dir.path(), &req(Source::Stooq), true).unwrap_err();
        assert!(matches!(err, CliError::Fetch(_)));
        assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
    }

    #[test]
    fn path_segments_are_percent_encoded() {
        assert_eq!(encode_path_segment("^GSPC"), "%5EGSPC");
        assert_eq!(encode_path_segment("EURUSD=X"), "EURUSD%3DX");
    }
}
