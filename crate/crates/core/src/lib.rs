//! Fractional and tempered-fractional differencing of financial time series, long-memory
//! parameter estimation, a from-scratch LSTM forecaster and a transaction-cost-aware
//! backtester.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the `*64` aliases below name
//! the double-precision instantiations used by the pipeline and `*32` the single-precision ones.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod error;
pub mod fracdiff;
pub mod indicators;
pub mod longmem;
pub mod lstm;
pub mod metrics;
pub mod optim;
pub mod scalar;
pub mod stationarity;
pub mod timeseries;
pub mod trading;

pub use error::{Error, Result};
pub use scalar::Real;

pub use fracdiff::{apply_diff, frac_weights, invert_diff, predict_price, tempered_weights};
pub use longmem::{simulate_longmem, whittle_fit, LongMemModel};
pub use stationarity::{adf_stat, search_min_d};
pub use timeseries::{load_csv, log_transform, split, CsvFormat, SplitSpec};

use fracdiff::{DiffSeries, DiffSpec, WeightVector};
use indicators::{FeatureMatrix, Scaler};
use longmem::LongMemFit;
use lstm::{Checkpoint, LstmNetwork, LstmParams};
use metrics::{ForecastMetrics, TradingMetrics};
use stationarity::{AdfResult, DSearchResult};
use timeseries::{LogSeries, PriceSeries};
use trading::{EquityLine, SignalSeries};

pub type PriceSeries64 = PriceSeries<f64>;
pub type LogSeries64 = LogSeries<f64>;
pub type DiffSpec64 = DiffSpec<f64>;
pub type WeightVector64 = WeightVector<f64>;
pub type DiffSeries64 = DiffSeries<f64>;
pub type AdfResult64 = AdfResult<f64>;
pub type DSearchResult64 = DSearchResult<f64>;
pub type LongMemFit64 = LongMemFit<f64>;
pub type FeatureMatrix64 = FeatureMatrix<f64>;
pub type Scaler64 = Scaler<f64>;
pub type LstmNetwork64 = LstmNetwork<f64>;
pub type LstmParams64 = LstmParams<f64>;
pub type Checkpoint64 = Checkpoint<f64>;
pub type SignalSeries64 = SignalSeries<f64>;
pub type EquityLine64 = EquityLine<f64>;
pub type ForecastMetrics64 = ForecastMetrics<f64>;
pub type TradingMetrics64 = TradingMetrics<f64>;

pub type PriceSeries32 = PriceSeries<f32>;
pub type LogSeries32 = LogSeries<f32>;
pub type WeightVector32 = WeightVector<f32>;
pub type DiffSeries32 = DiffSeries<f32>;
pub type LongMemFit32 = LongMemFit<f32>;
pub type FeatureMatrix32 = FeatureMatrix<f32>;
pub type LstmNetwork32 = LstmNetwork<f32>;
pub type EquityLine32 = EquityLine<f32>;
