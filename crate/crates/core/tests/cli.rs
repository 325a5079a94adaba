use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn d4d(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_d4d"))
        .args(args)
        .current_dir(dir)
        .env_remove("D4D_SEED")
        .output()
        .expect("binary runs")
}

fn small_config() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/small.json").display().to_string()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files_under(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn full_workflow_writes_only_under_out() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = small_config();
    let o = d4d(dir, &["gen-corpus", "--config", &cfg, "--out", "corpus"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(dir.join("corpus/manifest.csv").is_file());
    let o = d4d(dir, &["train", "--config", &cfg, "--corpus", "corpus", "--out", "model"]);
    assert!(o.status.success(), "{}", text(&o));
    let o = d4d(dir, &["eval", "--config", &cfg, "--corpus", "corpus", "--checkpoint", "model/model.ckpt"]);
    assert!(o.status.success() && text(&o).contains("test"), "{}", text(&o));
    let o = d4d(dir, &["eval", "--config", &cfg, "--corpus", "corpus", "--runs", "1", "--out", "report"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("majority-class baseline"));
    assert!(dir.join("report/report.json").is_file());
    let o = d4d(dir, &["diagnose", "--checkpoint", "model/model.ckpt", "blobs_softmax", "--out", "diag"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("ranking:"));
    let mut top: Vec<String> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    top.sort();
    assert_eq!(top, ["corpus", "diag", "model", "report"]);

    let trace = files_under(&dir.join("corpus/traces")).remove(0);
    let o = d4d(dir, &["inspect-trace", trace.to_str().unwrap()]);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout).to_string();
    assert!(out.lines().next().unwrap().contains("epoch 8"));
    assert_eq!(out.lines().count(), 1 + 4 + 30 * 4);
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = d4d(tmp.path(), &["gen-corpus", "--out", "corpus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("--config"));
    let o = d4d(tmp.path(), &["train", "--config", "c.json", "--corpus", "c", "--out", "o", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    let o = d4d(tmp.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(std::fs::read_dir(tmp.path()).unwrap().next().is_none());
}

#[test]
fn data_errors_exit_two_and_name_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = d4d(dir, &["gen-corpus", "--config", "missing.json", "--out", "corpus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("missing.json"));

    std::fs::write(dir.join("old.ckpt"), b"D4DCKPT0\nrest").unwrap();
    let o = d4d(dir, &["diagnose", "--checkpoint", "old.ckpt", "blobs_softmax"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = text(&o);
    assert!(msg.contains("old.ckpt") && msg.contains("version"), "{msg}");

    std::fs::write(dir.join("bad.json"), r#"{"seeds":["blobs_softmax"],"splits":[0.5,0.5,0.5]}"#).unwrap();
    let o = d4d(dir, &["gen-corpus", "--config", "bad.json", "--out", "corpus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_flag_and_env_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = small_config();
    let o = d4d(dir, &["gen-corpus", "--config", &cfg, "--out", "a", "--seed", "7"]);
    assert!(o.status.success(), "{}", text(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_d4d"))
        .args(["gen-corpus", "--config", &cfg, "--out", "b"])
        .current_dir(dir)
        .env("D4D_SEED", "7")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    let o = d4d(dir, &["gen-corpus", "--config", &cfg, "--out", "c"]);
    assert!(o.status.success());
    let read = |d: &str| std::fs::read(dir.join(d).join("manifest.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    let traces = |d: &str| files_under(&dir.join(d).join("traces")).iter().map(|p| std::fs::read(p).unwrap()).collect::<Vec<_>>();
    assert_eq!(traces("a"), traces("b"));
    assert_ne!(traces("a"), traces("c"));
}
