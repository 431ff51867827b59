use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use fracmem_cli::chart::{equity_svg, read_sweep_csv, sweep_svg, EquitySeries};
use fracmem_cli::config::{FetchConfig, Source, ENV_OUT};
use fracmem_cli::fetch::{fetch, FetchRequest};
use fracmem_cli::files::write_atomic;
use fracmem_cli::fixture::{fixture_csvs, FIXTURE_SEED};
use fracmem_cli::run::StepRecord;
use fracmem_cli::stages::read_equity;
use fracmem_cli::{
    cmd_run, run_stage, CliError, Overrides, PipelineConfig, Result, RunOptions, Step, StepStatus,
};
use fracmem_core::stationarity::ADF_CRITICAL_5PCT;

#[derive(Parser)]
#[command(
    name = "fracmem",
    version,
    about = "Memory-preserving differencing and LSTM trading pipeline"
)]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "fracmem.toml")]
    config: PathBuf,
    /// Output directory, overriding the configuration and FRACMEM_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root seed, overriding the configuration and FRACMEM_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use cached downloads only.
    #[arg(long, global = true)]
    offline: bool,
    /// Restrict the run to these asset ids.
    #[arg(long = "asset", global = true)]
    assets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download one symbol into the cache, or load configured assets when no symbol is given.
    Fetch(FetchArgs),
    /// Choose d by ADF sweep and fit the ARFIMA and ARTFIMA models on the training window.
    Estimate,
    /// Write the four differenced series per asset.
    Diff,
    /// Tune and fit one LSTM per asset and method.
    Train,
    /// Forecast the test window.
    Predict,
    /// Trade the forecasts and tabulate metrics.
    Backtest,
    /// Equal-weight portfolio across backtested assets.
    Portfolio,
    /// Draw figures from pipeline output, or from explicit CSV files.
    Chart {
        #[command(subcommand)]
        kind: Option<ChartKind>,
    },
    /// Full pipeline with a manifest.
    Run {
        /// Run only this stage.
        #[arg(long, value_enum)]
        only: Option<Step>,
    },
    /// Regenerate the synthetic fixture prices.
    #[command(hide = true)]
    Fixture {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = FIXTURE_SEED)]
        fixture_seed: u64,
    },
}

#[derive(Args)]
struct FetchArgs {
    #[arg(long, value_enum, requires_all = ["symbol", "from", "to"])]
    source: Option<Source>,
    #[arg(long)]
    symbol: Option<String>,
    #[arg(long)]
    from: Option<NaiveDate>,
    #[arg(long)]
    to: Option<NaiveDate>,
    /// Copy the normalized CSV here as well.
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ChartKind {
    /// ADF statistic and correlation against d, from a sweep CSV.
    Sweep {
        csv: PathBuf,
        #[arg(long, default_value_t = ADF_CRITICAL_5PCT)]
        critical: f64,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Equity lines, one per CSV file, labelled by file stem.
    Equity {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let overrides = Overrides {
        output_dir: cli.out,
        seed: cli.seed,
        assets: cli.assets,
    };
    let opts = RunOptions { offline: cli.offline };
    let config = cli.config;
    let load = || PipelineConfig::load(&config, &overrides);
    match cli.command {
        Command::Fetch(args) => match args.source {
            Some(source) => fetch_one(&config, &overrides, opts, source, args).map(|()| 0),
            None => stage(&load()?, Step::Ingest, opts),
        },
        Command::Estimate => stage(&load()?, Step::Estimate, opts),
        Command::Diff => stage(&load()?, Step::Diff, opts),
        Command::Train => stage(&load()?, Step::Train, opts),
        Command::Predict => stage(&load()?, Step::Predict, opts),
        Command::Backtest => stage(&load()?, Step::Backtest, opts),
        Command::Portfolio => stage(&load()?, Step::Portfolio, opts),
        Command::Chart { kind: None } => stage(&load()?, Step::Chart, opts),
        Command::Chart { kind: Some(kind) } => draw(kind).map(|()| 0),
        Command::Run { only: Some(step) } => stage(&load()?, step, opts),
        Command::Run { only: None } => {
            let manifest = cmd_run(&load()?, opts)?;
            report(&manifest.steps);
            Ok(manifest.exit_code())
        }
        Command::Fixture { dir, fixture_seed } => {
            for (id, csv) in fixture_csvs(fixture_seed) {
                write_atomic(&dir.join(format!("{id}.csv")), csv.as_bytes())?;
            }
            Ok(0)
        }
    }
}

fn stage(cfg: &PipelineConfig, step: Step, opts: RunOptions) -> Result<i32> {
    let records = run_stage(cfg, step, opts)?;
    report(&records);
    Ok(records
        .iter()
        .find_map(|r| match r.status {
            StepStatus::Failed { exit_code, .. } => Some(exit_code),
            _ => None,
        })
        .unwrap_or(0))
}

fn report(records: &[StepRecord]) {
    for r in records {
        match &r.status {
            StepStatus::Ok => println!(
                "{:<12} {:<10} ok",
                r.scope,
                format!("{:?}", r.step).to_lowercase()
            ),
            StepStatus::Skipped { reason } => {
                println!(
                    "{:<12} {:<10} skipped: {reason}",
                    r.scope,
                    format!("{:?}", r.step).to_lowercase()
                )
            }
            StepStatus::Failed { error, .. } => {
                println!(
                    "{:<12} {:<10} FAILED: {error}",
                    r.scope,
                    format!("{:?}", r.step).to_lowercase()
                )
            }
        }
    }
}

/// Standalone download: uses the configuration's endpoints when the file exists.
fn fetch_one(
    config: &Path,
    overrides: &Overrides,
    opts: RunOptions,
    source: Source,
    args: FetchArgs,
) -> Result<()> {
    let (fetch_cfg, out_dir) = if config.is_file() {
        let overrides = Overrides {
            assets: Vec::new(),
            ..overrides.clone()
        };
        let cfg = PipelineConfig::load(config, &overrides)?;
        (cfg.fetch, cfg.output_dir)
    } else {
        let out = overrides
            .output_dir
            .clone()
            .or_else(|| std::env::var_os(ENV_OUT).map(PathBuf::from));
        (
            FetchConfig::default(),
            out.unwrap_or_else(|| PathBuf::from("out")),
        )
    };
    let req = FetchRequest {
        source,
        symbol: args.symbol.expect("required with --source"),
        from: args.from.expect("required with --source"),
        to: args.to.expect("required with --source"),
    };
    if req.from > req.to {
        return Err(CliError::Config(format!(
            "--from {} is after --to {}",
            req.from, req.to
        )));
    }
    let path = fetch(&fetch_cfg, &out_dir.join("cache"), &req, opts.offline)?;
    if let Some(dest) = args.output {
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        write_atomic(&dest, &bytes)?;
    }
    println!("{}", path.display());
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn draw(kind: ChartKind) -> Result<()> {
    match kind {
        ChartKind::Sweep {
            csv,
            critical,
            output,
        } => {
            let rows = read_sweep_csv(&read(&csv)?)?;
            let title = format!("{}: ADF statistic and correlation against d", stem(&csv));
            write_atomic(&output, sweep_svg(&title, &rows, critical)?.as_bytes())
        }
        ChartKind::Equity { csv, output } => {
            let mut series = Vec::new();
            for path in &csv {
                let line = read_equity(&read(path)?)?;
                series.push(EquitySeries {
                    label: stem(path),
                    dates: line.dates,
                    values: line.equity,
                });
            }
            write_atomic(&output, equity_svg("Equity lines", &series)?.as_bytes())
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
