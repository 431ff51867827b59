//! Threshold trading signals, cost-aware equity lines and equally weighted portfolios.
//!
//! Positions are set at a day's close. The position held over day `t` is the one set on
//! day `t - 1`, and the proportional cost of a trade made at the close of `t - 1` is
//! deducted from the return of day `t`.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::timeseries::PriceSeries;

/// Default proportional cost per unit of turnover (0.005%).
pub const DEFAULT_COST: f64 = 0.00005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    LongShort,
    LongOnly,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "long_short" => Ok(Self::LongShort),
            "long_only" => Ok(Self::LongOnly),
            other => Err(Error::Contract(format!("unknown strategy {other:?}"))),
        }
    }
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Self::LongShort => "long_short",
            Self::LongOnly => "long_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SignalSeries<T: Real> {
    pub dates: Vec<NaiveDate>,
    /// Position taken at each date's close, in `{-1, 0, 1}`.
    pub positions: Vec<i8>,
    pub strategy: Strategy,
    pub cost: T,
}

impl<T: Real> SignalSeries<T> {
    pub fn new(dates: Vec<NaiveDate>, positions: Vec<i8>, strategy: Strategy, cost: T) -> Result<Self> {
        let s = Self {
            dates,
            positions,
            strategy,
            cost,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_cost(self.cost)?;
        if self.dates.len() != self.positions.len() {
            return Err(Error::Contract(
                "signal dates and positions differ in length".into(),
            ));
        }
        if self.dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract("signal dates must be strictly increasing".into()));
        }
        let allowed: &[i8] = match self.strategy {
            Strategy::LongShort => &[-1, 0, 1],
            Strategy::LongOnly => &[0, 1],
        };
        if let Some(p) = self.positions.iter().find(|p| !allowed.contains(p)) {
            return Err(Error::Contract(format!(
                "position {p} not allowed for {}",
                self.strategy.name()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

fn check_cost<T: Real>(c: T) -> Result<()> {
    if c >= T::zero() && c < T::one() {
        Ok(())
    } else {
        Err(Error::Contract(format!("cost rate {c} outside [0, 1)")))
    }
}

/// Threshold rule with a dead zone: `predicted_next[i]` is the price forecast for the day
/// after `dates[i]`, made at that day's close. When `predicted_next` is one shorter than
/// `actual`, the final date holds the previous position.
pub fn gen_signals<T: Real>(
    dates: &[NaiveDate],
    actual: &[T],
    predicted_next: &[T],
    strategy: Strategy,
    cost: T,
) -> Result<SignalSeries<T>> {
    check_cost(cost)?;
    let n = actual.len();
    if dates.len() != n || !(predicted_next.len() == n || predicted_next.len() + 1 == n) {
        return Err(Error::Contract(format!(
            "misaligned signal inputs: {} dates, {n} prices, {} predictions",
            dates.len(),
            predicted_next.len()
        )));
    }
    let (up, down) = (T::one() + cost, T::one() - cost);
    let short: i8 = match strategy {
        Strategy::LongShort => -1,
        Strategy::LongOnly => 0,
    };
    let mut pos = 0i8;
    let mut positions = Vec::with_capacity(n);
    for (i, &y) in actual.iter().enumerate().take(n) {
        if let Some(&yhat) = predicted_next.get(i) {
            if yhat > y * up {
                pos = 1;
            } else if yhat < y * down {
                pos = short;
            }
        }
        positions.push(pos);
    }
    SignalSeries::new(dates.to_vec(), positions, strategy, cost)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EquityLine<T: Real> {
    pub dates: Vec<NaiveDate>,
    /// Strategy value, 1 on the first date.
    pub equity: Vec<T>,
    /// Position set at each date's close.
    pub positions: Vec<T>,
    /// Net return of each day; 0 on the first date.
    pub daily_returns: Vec<T>,
    /// Position change whose cost is charged in that day's return.
    pub turnover: Vec<T>,
}

impl<T: Real> EquityLine<T> {
    fn from_returns(
        dates: Vec<NaiveDate>,
        positions: Vec<T>,
        daily_returns: Vec<T>,
        turnover: Vec<T>,
    ) -> Self {
        let mut equity = Vec::with_capacity(daily_returns.len());
        let mut v = T::one();
        for (i, &r) in daily_returns.iter().enumerate() {
            if i > 0 {
                v *= T::one() + r;
            }
            equity.push(v);
        }
        Self {
            dates,
            equity,
            positions,
            daily_returns,
            turnover,
        }
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn final_equity(&self) -> T {
        *self.equity.last().expect("equity line is never empty")
    }

    /// `Date,equity,position,daily_return,turnover`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "Date,equity,position,daily_return,turnover")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.dates[i].format("%Y-%m-%d"),
                self.equity[i],
                self.positions[i],
                self.daily_returns[i],
                self.turnover[i]
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

fn aligned_closes<T: Real>(prices: &PriceSeries<T>, dates: &[NaiveDate]) -> Result<Vec<T>> {
    dates
        .iter()
        .map(|d| match prices.dates().binary_search(d) {
            Ok(i) => Ok(prices.close()[i]),
            Err(_) => Err(Error::Contract(format!("signal date {d} has no price"))),
        })
        .collect()
}

/// Equity line over the signal dates:
/// `r_t = pos_{t-1} (P_t / P_{t-1} - 1) - c |pos_{t-1} - pos_{t-2}|`, with `pos_{-1} = 0`.
pub fn run_backtest<T: Real>(prices: &PriceSeries<T>, signals: &SignalSeries<T>) -> Result<EquityLine<T>> {
    signals.validate()?;
    if signals.is_empty() {
        return Err(Error::Contract("empty signal series".into()));
    }
    let close = aligned_closes(prices, &signals.dates)?;
    let pos: Vec<T> = signals
        .positions
        .iter()
        .map(|&p| T::from(p).expect("small integer"))
        .collect();
    let n = pos.len();
    let mut returns = vec![T::zero(); n];
    let mut turnover = vec![T::zero(); n];
    for t in 1..n {
        let before = if t >= 2 { pos[t - 2] } else { T::zero() };
        turnover[t] = (pos[t - 1] - before).abs();
        returns[t] = pos[t - 1] * (close[t] / close[t - 1] - T::one()) - signals.cost * turnover[t];
    }
    Ok(EquityLine::from_returns(
        signals.dates.clone(),
        pos,
        returns,
        turnover,
    ))
}

/// Constant long position entered at the first close; the entry cost scales the first
/// day's gross return, so the final value is `(1 - c) P_T / P_0`.
pub fn buy_and_hold<T: Real>(prices: &PriceSeries<T>, cost: T) -> Result<EquityLine<T>> {
    check_cost(cost)?;
    let close = prices.close();
    let n = close.len();
    let mut returns = vec![T::zero(); n];
    let mut turnover = vec![T::zero(); n];
    for t in 1..n {
        returns[t] = close[t] / close[t - 1] - T::one();
    }
    if n > 1 {
        returns[1] = (T::one() - cost) * (T::one() + returns[1]) - T::one();
        turnover[1] = T::one();
    }
    Ok(EquityLine::from_returns(
        prices.dates().to_vec(),
        vec![T::one(); n],
        returns,
        turnover,
    ))
}

/// Daily-rebalanced weighted portfolio over the dates common to every line. Between two
/// common dates each component contributes its compounded return over that span.
pub fn portfolio_equity<T: Real>(lines: &[EquityLine<T>], weights: Option<&[T]>) -> Result<EquityLine<T>> {
    if lines.len() < 2 {
        return Err(Error::Contract(
            "a portfolio needs at least two equity lines".into(),
        ));
    }
    let equal = vec![T::one() / T::from_usize_lossy(lines.len()); lines.len()];
    let w = weights.unwrap_or(&equal);
    if w.len() != lines.len() {
        return Err(Error::Contract("one weight per equity line required".into()));
    }
    let total: T = w.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-9) || w.iter().any(|&x| x < T::zero()) {
        return Err(Error::Contract(format!(
            "weights must be non-negative and sum to 1, got {total}"
        )));
    }

    let mut common: Vec<NaiveDate> = lines[0].dates.clone();
    for l in &lines[1..] {
        common.retain(|d| l.dates.binary_search(d).is_ok());
    }
    if common.is_empty() {
        return Err(Error::Contract("equity lines share no dates".into()));
    }
    let idx: Vec<Vec<usize>> = lines
        .iter()
        .map(|l| {
            common
                .iter()
                .map(|d| l.dates.binary_search(d).expect("common date"))
                .collect()
        })
        .collect();

    let n = common.len();
    let mut returns = vec![T::zero(); n];
    let mut positions = vec![T::zero(); n];
    let mut turnover = vec![T::zero(); n];
    for t in 0..n {
        for ((l, ix), &wa) in lines.iter().zip(&idx).zip(w) {
            positions[t] += wa * l.positions[ix[t]];
            if t > 0 {
                let (a, b) = (ix[t - 1], ix[t]);
                returns[t] += wa * (l.equity[b] / l.equity[a] - T::one());
                turnover[t] += wa * l.turnover[a + 1..=b].iter().copied().sum::<T>();
            }
        }
    }
    Ok(EquityLine::from_returns(common, positions, returns, turnover))
}
