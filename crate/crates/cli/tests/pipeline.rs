mod common;

use fracmem_cli::files::sha256_hex;
use fracmem_cli::fixture::{fixture_csvs, FIXTURE_SEED};
use fracmem_cli::run::MANIFEST;
use fracmem_cli::{cmd_run, RunManifest, RunOptions, Step, StepStatus};

#[test]
fn committed_fixture_matches_generator() {
    for (id, csv) in fixture_csvs(FIXTURE_SEED) {
        let committed = std::fs::read_to_string(common::fixture_dir().join(format!("{id}.csv"))).unwrap();
        assert!(
            committed == csv,
            "{id}.csv differs from the generator; rerun `fracmem fixture`"
        );
    }
}

#[test]
fn unreadable_asset_fails_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = common::fixture_config(&tmp.path().join("out"));
    cfg.assets.truncate(2);
    cfg.assets[1].file = Some(tmp.path().join("missing.csv"));
    let good = cfg.assets[0].id.clone();
    let bad = cfg.assets[1].id.clone();

    let m = cmd_run(&cfg, RunOptions::default()).unwrap();
    assert!(matches!(
        m.status(&bad, Step::Ingest),
        Some(StepStatus::Failed { exit_code: 3, .. })
    ));
    for step in [
        Step::Estimate,
        Step::Diff,
        Step::Train,
        Step::Predict,
        Step::Backtest,
    ] {
        assert!(
            matches!(m.status(&bad, step), Some(StepStatus::Skipped { .. })),
            "{step:?}"
        );
        assert_eq!(m.status(&good, step), Some(&StepStatus::Ok), "{step:?}");
    }
    assert!(matches!(
        m.status("portfolio", Step::Portfolio),
        Some(StepStatus::Skipped { .. })
    ));
    assert_eq!(m.exit_code(), 3);
    assert!(m.files.iter().all(|f| !f.path.starts_with(&format!("{bad}/"))));

    let out = tmp.path().join("out");
    let text = std::fs::read_to_string(out.join(MANIFEST)).unwrap();
    let on_disk: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(on_disk, m);
    for f in &m.files {
        let bytes = std::fs::read(out.join(&f.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), f.sha256, "{}", f.path);
        assert_eq!(bytes.len() as u64, f.bytes);
    }
    for rel in [
        "prices.csv",
        "estimate.json",
        "sweep.svg",
        "equity_long_short.svg",
        "trading_long_only.txt",
    ] {
        assert!(out.join(&good).join(rel).is_file(), "{rel}");
    }
}

#[test]
fn rerun_replaces_stale_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut cfg = common::fixture_config(&out);
    cfg.assets.truncate(1);
    cfg.tuning.budget = 1;
    let stale = out.join(&cfg.assets[0].id).join("stale.txt");
    std::fs::create_dir_all(stale.parent().unwrap()).unwrap();
    std::fs::write(&stale, "left over").unwrap();
    let m = cmd_run(&cfg, RunOptions::default()).unwrap();
    assert_eq!(m.exit_code(), 0);
    assert!(!stale.exists());
    assert!(m.files.iter().all(|f| !f.path.ends_with("stale.txt")));
}
