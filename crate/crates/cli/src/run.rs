//! Orchestration of the full pipeline and the run manifest.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::files::{list_files, sha256_hex, OutDir};
use crate::stages::{self, Ctx, Outcome, PORTFOLIO};

pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Ingest,
    Estimate,
    Diff,
    Train,
    Predict,
    Backtest,
    Portfolio,
    Chart,
}

/// Per-asset steps in execution order.
pub const ASSET_STEPS: [Step; 6] = [
    Step::Ingest,
    Step::Estimate,
    Step::Diff,
    Step::Train,
    Step::Predict,
    Step::Backtest,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepStatus {
    Ok,
    Skipped { reason: String },
    Failed { error: String, exit_code: i32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Asset id, or `portfolio`.
    pub scope: String,
    pub step: Step,
    #[serde(flatten)]
    pub status: StepStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Deterministic record of a run. Wall-clock times live in `timings.json`, which is not
/// part of the inventory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub steps: Vec<StepRecord>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn failures(&self) -> impl Iterator<Item = &StepRecord> {
        self.steps
            .iter()
            .filter(|s| matches!(s.status, StepStatus::Failed { .. }))
    }

    /// Exit status of the first failed step, 0 when none failed.
    pub fn exit_code(&self) -> i32 {
        self.failures()
            .find_map(|s| match s.status {
                StepStatus::Failed { exit_code, .. } => Some(exit_code),
                _ => None,
            })
            .unwrap_or(0)
    }

    pub fn status(&self, scope: &str, step: Step) -> Option<&StepStatus> {
        self.steps
            .iter()
            .find(|s| s.scope == scope && s.step == step)
            .map(|s| &s.status)
    }
}

#[derive(Debug, Clone, Serialize)]
struct Timing {
    scope: String,
    step: Step,
    seconds: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub offline: bool,
}

fn record(
    scope: &str,
    step: Step,
    r: Result<Outcome>,
    started: Instant,
    timings: &mut Vec<Timing>,
) -> StepRecord {
    timings.push(Timing {
        scope: scope.to_string(),
        step,
        seconds: started.elapsed().as_secs_f64(),
    });
    let status = match r {
        Ok(Outcome::Done) => StepStatus::Ok,
        Ok(Outcome::Skipped(reason)) => StepStatus::Skipped { reason },
        Err(e) => {
            log::error!("{scope}/{step:?}: {e}");
            StepStatus::Failed {
                error: e.to_string(),
                exit_code: e.exit_code(),
            }
        }
    };
    StepRecord {
        scope: scope.to_string(),
        step,
        status,
    }
}

/// Runs one stage for every configured asset (or the portfolio), concurrently across assets.
pub fn run_stage(cfg: &PipelineConfig, step: Step, opts: RunOptions) -> Result<Vec<StepRecord>> {
    let out = OutDir::create(&cfg.output_dir)?;
    let ctx = Ctx {
        cfg,
        out: &out,
        offline: opts.offline,
    };
    let ids: Vec<String> = cfg.assets.iter().map(|a| a.id.clone()).collect();
    let mut timings = Vec::new();
    let records = match step {
        Step::Portfolio => {
            let with_equity: Vec<String> = ids
                .iter()
                .filter(|id| out.exists(&format!("{id}/equity")))
                .cloned()
                .collect();
            let t = Instant::now();
            vec![record(
                PORTFOLIO,
                step,
                stages::portfolio(&ctx, &with_equity),
                t,
                &mut timings,
            )]
        }
        _ => {
            let mut scopes = ids.clone();
            if step == Step::Chart {
                scopes.push(PORTFOLIO.to_string());
            }
            scopes
                .par_iter()
                .map(|id| {
                    let mut local = Vec::new();
                    let t = Instant::now();
                    record(id, step, dispatch(&ctx, id, step), t, &mut local)
                })
                .collect()
        }
    };
    Ok(records)
}

fn dispatch(ctx: &Ctx, id: &str, step: Step) -> Result<Outcome> {
    match step {
        Step::Ingest => stages::ingest(ctx, id),
        Step::Estimate => stages::estimate(ctx, id),
        Step::Diff => stages::difference(ctx, id),
        Step::Train => stages::train(ctx, id),
        Step::Predict => stages::predict(ctx, id),
        Step::Backtest => stages::backtest(ctx, id),
        Step::Chart => stages::charts(ctx, id),
        Step::Portfolio => Err(CliError::Config("portfolio is not a per-asset step".into())),
    }
}

/// The whole pipeline: per-asset steps run concurrently across assets, then the portfolio,
/// then charts; finally the manifest with a digest of every produced file.
///
/// A failing asset marks its remaining steps skipped and leaves other assets untouched.
pub fn cmd_run(cfg: &PipelineConfig, opts: RunOptions) -> Result<RunManifest> {
    let out = OutDir::create(&cfg.output_dir)?;
    let ctx = Ctx {
        cfg,
        out: &out,
        offline: opts.offline,
    };
    let ids: Vec<String> = cfg.assets.iter().map(|a| a.id.clone()).collect();
    for scope in ids.iter().map(String::as_str).chain([PORTFOLIO]) {
        out.remove_dir(scope)?;
    }
    for f in [MANIFEST, TIMINGS] {
        let p = out.path(f)?;
        if p.exists() {
            std::fs::remove_file(&p).map_err(|e| CliError::io(&p, e))?;
        }
    }

    let per_asset: Vec<(Vec<StepRecord>, Vec<Timing>)> = ids
        .par_iter()
        .map(|id| {
            let mut records = Vec::new();
            let mut timings = Vec::new();
            let mut blocked: Option<String> = None;
            for step in ASSET_STEPS {
                if let Some(reason) = &blocked {
                    records.push(StepRecord {
                        scope: id.clone(),
                        step,
                        status: StepStatus::Skipped {
                            reason: reason.clone(),
                        },
                    });
                    continue;
                }
                let t = Instant::now();
                let rec = record(id, step, dispatch(&ctx, id, step), t, &mut timings);
                match &rec.status {
                    StepStatus::Failed { .. } => blocked = Some(format!("{step:?} failed")),
                    StepStatus::Skipped { reason } => blocked = Some(format!("{step:?} skipped: {reason}")),
                    StepStatus::Ok => {}
                }
                records.push(rec);
            }
            (records, timings)
        })
        .collect();
    let mut steps = Vec::new();
    let mut timings = Vec::new();
    for (r, t) in per_asset {
        steps.extend(r);
        timings.extend(t);
    }

    let backtested: Vec<String> = ids
        .iter()
        .filter(|id| {
            steps
                .iter()
                .any(|s| &s.scope == *id && s.step == Step::Backtest && s.status == StepStatus::Ok)
        })
        .cloned()
        .collect();
    let t = Instant::now();
    steps.push(record(
        PORTFOLIO,
        Step::Portfolio,
        stages::portfolio(&ctx, &backtested),
        t,
        &mut timings,
    ));

    let scopes: Vec<String> = ids.iter().cloned().chain([PORTFOLIO.to_string()]).collect();
    let charted: Vec<(StepRecord, Timing)> = scopes
        .par_iter()
        .map(|id| {
            let mut local = Vec::new();
            let t = Instant::now();
            let rec = record(id, Step::Chart, stages::charts(&ctx, id), t, &mut local);
            (rec, local.pop().expect("one timing"))
        })
        .collect();
    for (r, t) in charted {
        steps.push(r);
        timings.push(t);
    }

    let manifest = RunManifest {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        versions: versions(),
        steps,
        files: inventory(&out, &scopes)?,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Data(e.to_string()))? + "\n";
    out.write(MANIFEST, text)?;
    let text = serde_json::to_string_pretty(&timings).map_err(|e| CliError::Data(e.to_string()))? + "\n";
    out.write(TIMINGS, text)?;
    Ok(manifest)
}

fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("fracmem-core".to_string(), fracmem_core::VERSION.to_string()),
        ("fracmem-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ])
}

/// Digest of every file under the run's asset and portfolio directories.
fn inventory(out: &OutDir, scopes: &[String]) -> Result<Vec<FileEntry>> {
    let mut files = Vec::new();
    for scope in scopes {
        let dir = out.path(scope)?;
        if !dir.is_dir() {
            continue;
        }
        for rel in list_files(&dir)? {
            let path = dir.join(&rel);
            let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            files.push(FileEntry {
                path: format!("{scope}/{rel}"),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            });
        }
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(files)
}
