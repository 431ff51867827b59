#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fracmem_cli::files::list_files;
use fracmem_cli::run::TIMINGS;
use fracmem_cli::{Overrides, PipelineConfig};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// The bundled fixture configuration writing into `out`.
pub fn fixture_config(out: &Path) -> PipelineConfig {
    let overrides = Overrides {
        output_dir: Some(out.to_path_buf()),
        ..Overrides::default()
    };
    PipelineConfig::load(&fixture_dir().join("fixture.toml"), &overrides).expect("fixture config loads")
}

/// Every file under `root` except wall-clock timings, keyed by relative path.
pub fn output_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    list_files(root)
        .expect("listable output")
        .into_iter()
        .filter(|rel| rel != TIMINGS)
        .map(|rel| {
            let bytes = std::fs::read(root.join(&rel)).expect("readable output");
            (rel, bytes)
        })
        .collect()
}

/// Paths on which two trees disagree, including files present in only one.
pub fn tree_differences(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter(|k| a.get(*k) != b.get(*k))
        .cloned()
        .collect()
}

/// Copies of the fixture prices without any row dated on or after `cutoff`, placed in `dir`
/// and wired into `cfg`.
pub fn truncate_inputs(cfg: &mut PipelineConfig, dir: &Path, cutoff: &str) {
    for asset in &mut cfg.assets {
        let src = asset.file.as_ref().expect("fixture assets are files");
        let text = std::fs::read_to_string(src).expect("fixture csv");
        let kept: String = text
            .lines()
            .enumerate()
            .filter(|(i, line)| *i == 0 || &line[..10] < cutoff)
            .map(|(_, line)| format!("{line}\n"))
            .collect();
        let dest = dir.join(src.file_name().expect("file name"));
        std::fs::write(&dest, kept).expect("writable temp dir");
        asset.file = Some(dest);
    }
}

/// Outputs that may depend only on data before the test window.
pub fn is_pre_test_artifact(rel: &str) -> bool {
    let name = rel.rsplit('/').next().unwrap_or(rel);
    name == "estimate.json"
        || name == "sweep.csv"
        || rel.contains("/tuning/")
        || rel.contains("/models/")
        || (rel.contains("/diff/") && rel.ends_with(".json"))
}
