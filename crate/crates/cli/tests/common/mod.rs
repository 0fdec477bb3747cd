#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn kgx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgx"))
        .args(args)
        .env_remove("KGX_THREADS")
        .env_remove("RUST_LOG")
        .output()
        .expect("run kgx")
}

pub fn ok(args: &[&str]) -> Output {
    let out = kgx(args);
    assert!(
        out.status.success(),
        "kgx {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic dataset, bundle and a trained checkpoint in `dir`.
pub struct Fixture {
    pub dir: PathBuf,
    pub data: PathBuf,
    pub graph: PathBuf,
    pub checkpoint: PathBuf,
}

pub fn fixture(dir: &Path, extra_synth: &[&str], epochs: u32) -> Fixture {
    let data = dir.join("data");
    let graph = dir.join("graph.kgx");
    let checkpoint = dir.join("model.ckpt");
    let mut synth = vec![
        "synth",
        "--seed",
        "1",
        "--n-disease",
        "24",
        "--n-drug",
        "24",
        "--n-gene",
        "40",
        "--out-dir",
        s(&data),
    ];
    synth.extend_from_slice(extra_synth);
    ok(&synth);
    ok(&[
        "build",
        "--manifest",
        s(&data.join("manifest.json")),
        "--out",
        s(&graph),
    ]);
    let epochs = epochs.to_string();
    ok(&[
        "train",
        "--graph",
        s(&graph),
        "--seed",
        "2",
        "--epochs",
        &epochs,
        "--embed-dim",
        "16",
        "--out",
        s(&checkpoint),
    ]);
    Fixture {
        dir: dir.to_path_buf(),
        data,
        graph,
        checkpoint,
    }
}
