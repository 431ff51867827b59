use std::path::Path;
use std::process::{Command, Output};

fn fracmem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracmem"))
        .current_dir(dir)
        .env_remove("FRACMEM_OUT")
        .env_remove("FRACMEM_SEED")
        .env_remove("FRACMEM_DATA_DIR")
        .env("RUST_LOG", "error")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const CONFIG: &str = r#"
seed = 1
[split]
train_start = "2014-01-01"
train_end = "2020-12-31"
val_start = "2019-01-01"
val_end = "2020-12-31"
test_start = "2021-01-01"
test_end = "2023-12-31"
[[assets]]
id = "flat"
file = "flat.csv"
"#;

fn weekdays_csv(price: impl Fn(usize) -> f64) -> String {
    let start = chrono::NaiveDate::from_ymd_opt(2014, 1, 1).unwrap();
    let mut csv = String::from("Date,Close\n");
    for (i, d) in start
        .iter_days()
        .filter(|d| chrono::Datelike::weekday(d).number_from_monday() <= 5)
        .take(2600)
        .enumerate()
    {
        csv.push_str(&format!("{d},{:.2}\n", price(i)));
    }
    csv
}

#[test]
fn configuration_problems_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracmem(dir.path(), &["--config", "absent.toml", "run"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));

    std::fs::write(
        dir.path().join("bad.toml"),
        format!("{CONFIG}\nunknown_key = 3\n"),
    )
    .unwrap();
    assert_eq!(
        code(&fracmem(dir.path(), &["--config", "bad.toml", "estimate"])),
        2
    );

    std::fs::write(dir.path().join("ok.toml"), CONFIG).unwrap();
    assert_eq!(
        code(&fracmem(
            dir.path(),
            &["--config", "ok.toml", "--asset", "nope", "run"]
        )),
        2
    );
}

#[test]
fn offline_fetch_without_cache_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracmem(
        dir.path(),
        &[
            "--offline",
            "fetch",
            "--source",
            "stooq",
            "--symbol",
            "^spx",
            "--from",
            "2020-01-01",
            "--to",
            "2020-12-31",
        ],
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not cached"));
    assert!(!dir.path().join("out").join("cache").join("stooq").exists());
}

#[test]
fn missing_input_exits_3_and_flat_prices_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ok.toml"), CONFIG).unwrap();
    let o = fracmem(dir.path(), &["--config", "ok.toml", "fetch"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stdout));

    std::fs::write(dir.path().join("flat.csv"), weekdays_csv(|_| 100.0)).unwrap();
    assert_eq!(code(&fracmem(dir.path(), &["--config", "ok.toml", "fetch"])), 0);
    assert!(dir.path().join("out/flat/prices.csv").is_file());
    let o = fracmem(dir.path(), &["--config", "ok.toml", "run", "--only", "estimate"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn standalone_charts() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = "d,adf_stat,pearson_corr\n0,-0.5,1\n0.1,-1.5,0.99\n0.2,-2.9,0.97\n0.3,-4.1,0.9\n";
    std::fs::write(dir.path().join("sweep.csv"), sweep).unwrap();
    let o = fracmem(dir.path(), &["chart", "sweep", "sweep.csv", "-o", "sweep.svg"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(dir.path().join("sweep.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches(r#"class="critical""#).count(), 1);
    assert!(svg.contains(r#"data-value="-2.86""#));

    let header = "Date,equity,position,daily_return,turnover\n";
    let a = format!("{header}2021-01-04,1,1,0,1\n2021-01-05,1.01,1,0.01,0\n2022-01-03,1.05,1,0.01,0\n");
    let b = format!("{header}2021-01-04,1,0,0,0\n2021-01-05,0.99,-1,-0.01,1\n2022-01-03,0.97,-1,-0.01,0\n");
    std::fs::write(dir.path().join("alpha.csv"), a).unwrap();
    std::fs::write(dir.path().join("beta.csv"), b).unwrap();
    let o = fracmem(
        dir.path(),
        &["chart", "equity", "alpha.csv", "beta.csv", "-o", "eq.svg"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(dir.path().join("eq.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches(r#"class="legend-entry""#).count(), 2);
    assert!(svg.contains(">alpha<") && svg.contains(">beta<"));

    std::fs::write(dir.path().join("empty.csv"), "d,adf_stat,pearson_corr\n").unwrap();
    assert_eq!(
        code(&fracmem(
            dir.path(),
            &["chart", "sweep", "empty.csv", "-o", "x.svg"]
        )),
        3
    );
    assert!(!dir.path().join("x.svg").exists());
}

#[test]
fn help_lists_pipeline_commands_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracmem(dir.path(), &["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in [
        "fetch",
        "estimate",
        "diff",
        "train",
        "predict",
        "backtest",
        "portfolio",
        "chart",
        "run",
    ] {
        assert!(text.contains(cmd), "{cmd}");
    }
    assert!(!text.contains("fixture"));
}
