use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    /// Remote download failed; nothing was written.
    #[error("fetch error: {0}")]
    Fetch(String),
    /// The remote source answered but the payload is unusable (unknown symbol, bad CSV).
    #[error("source error: {0}")]
    Source(String),
    #[error("chart error: {0}")]
    Chart(String),
    #[error("path `{0}` escapes the output directory")]
    OutsideOutput(String),
    #[error(transparent)]
    Core(#[from] fracmem_core::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit status: 2 configuration, 3 data, 4 numeric or training.
    pub fn exit_code(&self) -> i32 {
        use fracmem_core::Error as E;
        match self {
            Self::Config(_) | Self::OutsideOutput(_) => 2,
            Self::Data(_) | Self::Fetch(_) | Self::Source(_) | Self::Chart(_) | Self::Io { .. } => 3,
            Self::Core(e) => match e {
                E::Degenerate(_)
                | E::NoStationaryOrder { .. }
                | E::Numeric(_)
                | E::Fit { .. }
                | E::Training { .. }
                | E::Tuning { .. } => 4,
                _ => 3,
            },
        }
    }
}
