//! Static SVG figures: the d-sweep dual-axis plot and multi-line equity charts.

use std::fmt::Write as _;

use chrono::NaiveDate;

use crate::error::{CliError, Result};

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 70.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub d: f64,
    pub adf_stat: f64,
    pub pearson_corr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquitySeries {
    pub label: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

/// Linear map from `[lo, hi]` onto `[a, b]`.
#[derive(Debug, Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, a: f64, b: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { lo, hi, a, b }
    }

    fn padded(lo: f64, hi: f64, a: f64, b: f64) -> Self {
        let pad = 0.05 * (hi - lo).max(1e-9);
        Self::new(lo - pad, hi + pad, a, b)
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }

    /// About `n` round tick values inside the domain.
    fn ticks(&self, n: usize) -> Vec<f64> {
        let raw = (self.hi - self.lo) / n as f64;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 2.5, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|i| i as f64 * step).collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn frame(s: &mut String) {
    let _ = writeln!(
        s,
        r#"<rect class="plot-area" x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
}

fn polyline(s: &mut String, class: &str, color: &str, pts: impl Iterator<Item = (f64, f64)>) {
    let coords: Vec<String> = pts.map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(
        s,
        r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
        coords.join(" ")
    );
}

fn y_axis(s: &mut String, scale: &Scale, x: f64, anchor_left: bool, label: &str, color: &str) {
    let (dx, anchor) = if anchor_left {
        (-6.0, "end")
    } else {
        (6.0, "start")
    };
    for t in scale.ticks(6) {
        let y = scale.map(t);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}" fill="{color}">{}</text>"#,
            x + dx,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let lx = if anchor_left { 18.0 } else { WIDTH - 18.0 };
    let ly = (TOP + HEIGHT - BOTTOM) / 2.0;
    let _ = writeln!(
        s,
        r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle" fill="{color}" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
        escape(label)
    );
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// ADF statistic (left axis) and correlation with the undifferenced series (right axis)
/// against `d`, with the critical value drawn as a dashed rule.
pub fn sweep_svg(title: &str, rows: &[SweepPoint], critical: f64) -> Result<String> {
    if rows.is_empty() {
        return Err(CliError::Chart("sweep table is empty".into()));
    }
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let dmin = rows.iter().map(|r| r.d).fold(f64::INFINITY, f64::min);
    let dmax = rows.iter().map(|r| r.d).fold(f64::NEG_INFINITY, f64::max);
    let amin = rows.iter().map(|r| r.adf_stat).fold(critical, f64::min);
    let amax = rows.iter().map(|r| r.adf_stat).fold(critical, f64::max);
    let cmin = rows.iter().map(|r| r.pearson_corr).fold(f64::INFINITY, f64::min);
    let cmax = rows
        .iter()
        .map(|r| r.pearson_corr)
        .fold(f64::NEG_INFINITY, f64::max);
    let xs = Scale::new(dmin, dmax, x0, x1);
    let ya = Scale::padded(amin, amax, y0, y1);
    let yc = Scale::padded(cmin, cmax, y0, y1);

    let mut s = header(title);
    frame(&mut s);
    for t in xs.ticks(10) {
        let x = xs.map(t);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">d</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 16.0
    );
    y_axis(&mut s, &ya, x0, true, "ADF statistic", PALETTE[0]);
    y_axis(&mut s, &yc, x1, false, "Correlation", PALETTE[1]);
    let yc_line = ya.map(critical);
    let _ = writeln!(
        s,
        r#"<line class="critical" data-value="{critical}" x1="{x0:.2}" y1="{yc_line:.2}" x2="{x1:.2}" y2="{yc_line:.2}" stroke="gray" stroke-dasharray="6,4"/>"#
    );
    polyline(
        &mut s,
        "adf",
        PALETTE[0],
        rows.iter().map(|r| (xs.map(r.d), ya.map(r.adf_stat))),
    );
    polyline(
        &mut s,
        "correlation",
        PALETTE[1],
        rows.iter().map(|r| (xs.map(r.d), yc.map(r.pearson_corr))),
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// One line per series over a shared date axis, with a legend entry per series.
pub fn equity_svg(title: &str, series: &[EquitySeries]) -> Result<String> {
    if series.is_empty() || series.iter().any(|e| e.dates.is_empty()) {
        return Err(CliError::Chart(
            "equity chart needs at least one non-empty series".into(),
        ));
    }
    if let Some(e) = series.iter().find(|e| e.dates.len() != e.values.len()) {
        return Err(CliError::Chart(format!(
            "series `{}` has mismatched lengths",
            e.label
        )));
    }
    let first = series.iter().map(|e| e.dates[0]).min().expect("non-empty");
    let last = series
        .iter()
        .map(|e| *e.dates.last().expect("non-empty"))
        .max()
        .expect("non-empty");
    let day = |d: NaiveDate| (d - first).num_days() as f64;
    let vmin = series
        .iter()
        .flat_map(|e| e.values.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let vmax = series
        .iter()
        .flat_map(|e| e.values.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let legend_w = 230.0;
    let (x0, x1) = (LEFT, WIDTH - RIGHT - legend_w);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let xs = Scale::new(0.0, day(last), x0, x1);
    let ys = Scale::padded(vmin, vmax, y0, y1);

    let mut s = header(title);
    let _ = writeln!(
        s,
        r#"<rect class="plot-area" x="{x0}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    y_axis(&mut s, &ys, x0, true, "Equity", "black");
    // year boundaries as x ticks
    let mut year = chrono::Datelike::year(&first) + 1;
    while let Some(jan1) = NaiveDate::from_ymd_opt(year, 1, 1).filter(|d| *d <= last) {
        let x = xs.map(day(jan1));
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{year}</text>"#,
            y0 + 18.0
        );
        year += 1;
    }
    for (i, e) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        polyline(
            &mut s,
            "equity",
            color,
            e.dates
                .iter()
                .zip(&e.values)
                .map(|(&d, &v)| (xs.map(day(d)), ys.map(v))),
        );
    }
    for (i, e) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = TOP + 10.0 + 22.0 * i as f64;
        let x = x1 + 16.0;
        let _ = writeln!(
            s,
            r#"<g class="legend-entry"><rect x="{x:.2}" y="{:.2}" width="14" height="4" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            y - 2.0,
            x + 20.0,
            y + 4.0,
            escape(&e.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Parses `d,adf_stat,pearson_corr` rows.
pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepPoint>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Chart(e.to_string()))?;
        let num = |i: usize| {
            rec.get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| CliError::Chart(format!("bad sweep row {rec:?}")))
        };
        out.push(SweepPoint {
            d: num(0)?,
            adf_stat: num(1)?,
            pearson_corr: num(2)?,
        });
    }
    Ok(out)
}
