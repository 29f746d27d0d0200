use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_estformer"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("estformer-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = "\
montage = standard_16
sample_rate = 64
window_seconds = 1
n_windows = 10
n_classes = 2
epochs = 2
batch_size = 4
";

#[test]
fn generate_train_evaluate() {
    let dir = scratch("pipeline");
    let cfg = dir.join("run.config");
    std::fs::write(&cfg, SMALL).unwrap();
    let data = dir.join("data.eeg");
    let ckpt = dir.join("model.ckpt");
    run(&["gen-data", "--config", s(&cfg), "--out", s(&data)]);
    run(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&ckpt)]);
    assert!(dir.join("model.log.csv").exists());
    assert!(dir.join("model.config").exists());

    let out = run(&["eval", "--ckpt", s(&ckpt), "--data", s(&data)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,window,nmse,snr_db,pcc"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10 + 2);
    for r in &rows {
        assert_eq!(r.len(), 5);
        for v in &r[2..] {
            assert!(v.parse::<f64>().unwrap().is_finite(), "{r:?}");
        }
    }
    assert_eq!(rows[10][1], "mean");
    assert_eq!(rows[11][1], "std");

    let si = run(&["eval", "--baseline", "si", "--scale", "4", "--data", s(&data)]);
    assert!(String::from_utf8(si.stdout).unwrap().lines().count() == 13);

    let svg = dir.join("log.svg");
    run(&["plot", "--log", s(&dir.join("model.log.csv")), "--out", s(&svg)]);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn flops_table() {
    let out = run(&["flops", "--ds", "64", "--dt", "1600", "--conv", "128,128,33,1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for v in ["668467200", "353894400", "55364812800"] {
        assert!(text.contains(v), "{text}");
    }
}

#[test]
fn failures_use_documented_exit_codes() {
    let dir = scratch("errors");
    let missing = bin()
        .args(["eval", "--baseline", "an", "--scale", "4", "--data", s(&dir.join("nope.eeg"))])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(3));
    let stderr = String::from_utf8(missing.stderr).unwrap();
    assert!(stderr.starts_with("error kind=io code=3 message="), "{stderr}");

    let cfg = dir.join("bad.config");
    std::fs::write(&cfg, "learning_speed = 3\n").unwrap();
    let bad = bin()
        .args(["gen-data", "--config", s(&cfg), "--out", s(&dir.join("x.eeg"))])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8(bad.stderr).unwrap().contains("kind=config"));
    std::fs::remove_dir_all(&dir).unwrap();
}
