//! TOML pipeline configuration with environment overrides.
//!
//! Relative paths inside the file resolve against the file's directory. Dates are quoted
//! ISO strings.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fracmem_core::fracdiff::DEFAULT_TAU;
use fracmem_core::lstm::HyperSpace;
use fracmem_core::stationarity::{SearchConfig, ADF_CRITICAL_5PCT};
use fracmem_core::trading::DEFAULT_COST;
use fracmem_core::{CsvFormat, SplitSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::files::{check_asset_id, sha256_hex};

pub const ENV_OUT: &str = "FRACMEM_OUT";
pub const ENV_SEED: &str = "FRACMEM_SEED";
pub const ENV_DATA_DIR: &str = "FRACMEM_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root of all randomness; required.
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Proportional transaction cost per unit of turnover.
    #[serde(default = "default_cost")]
    pub cost: f64,
    pub split: SplitSpec,
    #[serde(default)]
    pub diff: DiffConfig,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default)]
    pub fetch: FetchConfig,
    pub assets: Vec<AssetConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_cost() -> f64 {
    DEFAULT_COST
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffConfig {
    pub tau: f64,
    pub grid_start: f64,
    pub grid_end: f64,
    pub grid_step: f64,
    pub adf_lags: usize,
    pub critical_value: f64,
}

impl Default for DiffConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            grid_start: 0.0,
            grid_end: 1.0,
            grid_step: 0.01,
            adf_lags: 1,
            critical_value: ADF_CRITICAL_5PCT,
        }
    }
}

impl DiffConfig {
    pub fn search(&self) -> SearchConfig<f64> {
        SearchConfig {
            grid_start: self.grid_start,
            grid_end: self.grid_end,
            step: self.grid_step,
            tau: self.tau,
            lags: self.adf_lags,
            critical_value: self.critical_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningConfig {
    /// Random-search trials per (asset, method).
    pub budget: usize,
    pub space: HyperSpace,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            budget: 20,
            space: HyperSpace::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FetchConfig {
    pub stooq_url: String,
    pub yahoo_url: String,
    pub timeout_secs: u64,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            stooq_url: "https://stooq.com/q/d/l/".into(),
            yahoo_url: "https://query1.finance.yahoo.com/v8/finance/chart/".into(),
            timeout_secs: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Stooq,
    Yahoo,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Self::Stooq => "stooq",
            Self::Yahoo => "yahoo",
        }
    }
}

impl std::str::FromStr for Source {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stooq" => Ok(Self::Stooq),
            "yahoo" => Ok(Self::Yahoo),
            other => Err(CliError::Config(format!("unknown source `{other}`"))),
        }
    }
}

/// One input series: either a local file or a remote symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    #[serde(default)]
    pub format: CsvFormat,
}

pub enum AssetInput<'a> {
    File(&'a Path),
    Remote { source: Source, symbol: &'a str },
}

impl AssetConfig {
    pub fn input(&self) -> Result<AssetInput<'_>> {
        match (&self.file, self.source, &self.symbol) {
            (Some(f), None, None) => Ok(AssetInput::File(f)),
            (None, Some(source), Some(symbol)) => Ok(AssetInput::Remote { source, symbol }),
            _ => Err(CliError::Config(format!(
                "asset `{}` needs either `file` or both `source` and `symbol`",
                self.id
            ))),
        }
    }
}

/// Command-line overrides, applied after the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub assets: Vec<String>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads, overrides and validates a configuration file.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve(&base, overrides)?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path, overrides: &Overrides) -> Result<()> {
        let data_base = std::env::var_os(ENV_DATA_DIR).map_or_else(|| base.to_path_buf(), PathBuf::from);
        for a in &mut self.assets {
            if let Some(f) = &a.file {
                if f.is_relative() {
                    a.file = Some(data_base.join(f));
                }
            }
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
        if let Some(out) = std::env::var_os(ENV_OUT) {
            self.output_dir = PathBuf::from(out);
        }
        if let Ok(seed) = std::env::var(ENV_SEED) {
            self.seed = seed
                .parse()
                .map_err(|_| CliError::Config(format!("{ENV_SEED}=`{seed}` is not a u64")))?;
        }
        if let Some(out) = &overrides.output_dir {
            self.output_dir = out.clone();
        }
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if !overrides.assets.is_empty() {
            for id in &overrides.assets {
                if !self.assets.iter().any(|a| &a.id == id) {
                    return Err(CliError::Config(format!("--asset `{id}` is not configured")));
                }
            }
            self.assets.retain(|a| overrides.assets.contains(&a.id));
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.assets.is_empty() {
            return bad("at least one asset is required".into());
        }
        let mut ids = BTreeSet::new();
        for a in &self.assets {
            check_asset_id(&a.id)?;
            if a.id == "portfolio" {
                return bad("`portfolio` is reserved for the aggregate output".into());
            }
            if !ids.insert(a.id.as_str()) {
                return bad(format!("duplicate asset id `{}`", a.id));
            }
            a.input()?;
        }
        self.split
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !(0.0..1.0).contains(&self.cost) {
            return bad(format!("cost {} outside [0, 1)", self.cost));
        }
        let d = &self.diff;
        if !(d.tau > 0.0 && d.tau < 1.0) {
            return bad(format!("tau {} outside (0, 1)", d.tau));
        }
        if !(d.grid_step > 0.0 && d.grid_start >= 0.0 && d.grid_start <= d.grid_end) {
            return bad("d grid needs 0 <= start <= end and a positive step".into());
        }
        if self.tuning.budget == 0 {
            return bad("tuning budget must be at least 1".into());
        }
        self.tuning
            .space
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// Digest of everything that influences results; the output location is excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        for a in &mut c.assets {
            a.file = a.file.as_ref().and_then(|f| f.file_name()).map(PathBuf::from);
        }
        sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7

[split]
train_start = "2014-01-01"
train_end = "2020-12-31"
val_start = "2019-01-01"
val_end = "2020-12-31"
test_start = "2021-01-01"
test_end = "2023-12-31"

[[assets]]
id = "spx"
file = "data/spx.csv"

[[assets]]
id = "wig20"
source = "stooq"
symbol = "wig20"
format = "stooq"
"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let c = PipelineConfig::from_toml(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.cost, DEFAULT_COST);
        assert_eq!(c.diff, DiffConfig::default());
        assert_eq!(c.split, SplitSpec::seven_two_three(2014));
        assert!(matches!(
            c.assets[1].input().unwrap(),
            AssetInput::Remote {
                source: Source::Stooq,
                ..
            }
        ));
    }

    #[test]
    fn missing_seed_is_a_config_error() {
        let text = MINIMAL.replace("seed = 7", "");
        assert!(matches!(
            PipelineConfig::from_toml(&text),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = PipelineConfig::from_toml(MINIMAL).unwrap();
        c.assets[1].id = "spx".into();
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::from_toml(MINIMAL).unwrap();
        c.assets.clear();
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::from_toml(MINIMAL).unwrap();
        c.assets[0].symbol = Some("x".into());
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::from_toml(MINIMAL).unwrap();
        c.split.test_start = c.split.train_end;
        assert!(c.validate().is_err());
        assert!(PipelineConfig::from_toml(&format!("{MINIMAL}\nbogus = 1\n")).is_err());
    }

    #[test]
    fn overrides_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        let o = Overrides {
            output_dir: Some(dir.path().join("elsewhere")),
            seed: Some(99),
            assets: vec!["wig20".into()],
        };
        let c = PipelineConfig::load(&path, &o).unwrap();
        assert_eq!(c.seed, 99);
        assert_eq!(c.assets.len(), 1);
        assert_eq!(c.output_dir, dir.path().join("elsewhere"));

        let plain = PipelineConfig::load(&path, &Overrides::default()).unwrap();
        assert_eq!(
            plain.assets[0].file.as_deref(),
            Some(dir.path().join("data/spx.csv").as_path())
        );
        let mut moved = plain.clone();
        moved.output_dir = PathBuf::from("/somewhere/else");
        assert_eq!(moved.hash(), plain.hash());
        let mut reseeded = plain.clone();
        reseeded.seed += 1;
        assert_ne!(reseeded.hash(), plain.hash());

        let bad = Overrides {
            assets: vec!["nope".into()],
            ..Default::default()
        };
        assert!(matches!(
            PipelineConfig::load(&path, &bad),
            Err(CliError::Config(_))
        ));
    }
}
