use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Grid search found no stationary order; rows are `(d, adf_stat, pearson_corr)`.
    #[error("no grid value of d yields a stationary series ({} rows evaluated)", rows.len())]
    NoStationaryOrder { rows: Vec<(f64, f64, f64)> },
    #[error("numeric error: {0}")]
    Numeric(String),
    /// All optimizer restarts failed; carries the best incumbent found.
    #[error("fit failed: {message} (best objective {objective}, params {params:?})")]
    Fit {
        message: String,
        params: Vec<f64>,
        objective: f64,
    },
    /// Training loss became non-finite; `history` holds `(train, val)` losses per completed epoch.
    #[error("training diverged after {} epochs", history.len())]
    Training { history: Vec<(f64, Option<f64>)> },
    #[error("tuning failed: every trial diverged")]
    Tuning { log: Vec<String> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
