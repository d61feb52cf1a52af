#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn config() -> PathBuf {
    fixtures().join("retail/config.json")
}

pub fn metasql(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metasql"))
        .args(args)
        .env_remove("METASQL_REPHRASE_ENDPOINT")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

pub fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .unwrap_or_else(|| panic!("no JSON on stderr: {text}"));
    serde_json::from_str(line).unwrap()
}

pub fn run_all(out: &Path) -> Output {
    metasql(&["all", "-c", config().to_str().unwrap(), "--out", out.to_str().unwrap()])
}
