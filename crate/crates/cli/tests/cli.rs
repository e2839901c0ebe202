use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rrid::dataio::{load_dataset, Split};
use rrid::train_eval::evaluate_inputs;

fn rrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrid")).args(args).output().expect("spawn rrid")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[track_caller]
fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}\nstdout:\n{}\nstderr:\n{}", o.status.code(), stdout(&o), stderr(&o));
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// 16×16 train/test splits, small enough for one-epoch runs.
fn tiny_dataset(root: &Path) {
    let root = s(root);
    ok(rrid(&["synth", "--out", root, "--count", "4", "--split", "train", "--seed", "1", "--size", "16"]));
    ok(rrid(&["synth", "--out", root, "--count", "2", "--split", "test", "--seed", "2", "--size", "16"]));
}

const FAST: &[&str] = &["--epochs", "1", "--batch-size", "2", "--patch-size", "16"];

fn train(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--data", s(data), "--out", s(out)];
    args.extend_from_slice(FAST);
    args.extend_from_slice(extra);
    rrid(&args)
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn synth_writes_deterministic_pairs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for root in [a.path(), b.path()] {
        ok(rrid(&["synth", "--out", s(root), "--count", "3", "--seed", "5", "--size", "16"]));
    }
    let fa = files(&a.path().join("train"));
    let pngs = fa.iter().filter(|p| p.extension().is_some_and(|e| e == "png")).count();
    assert_eq!(pngs, 12);
    assert!(a.path().join("train/synth_params.json").is_file());
    let fb = files(&b.path().join("train"));
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn synth_zero_count_warns_and_succeeds() {
    let d = tempfile::tempdir().unwrap();
    let o = ok(rrid(&["synth", "--out", s(d.path()), "--count", "0", "--split", "test"]));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
    let left: Vec<_> = files(&d.path().join("test"))
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    assert!(left.is_empty());
}

#[test]
fn usage_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let missing = d.path().join("nowhere");
    let o = train(&missing, &d.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(s(&missing)), "{}", stderr(&o));

    assert_eq!(rrid(&["synth", "--out", s(d.path()), "--count", "1", "--bogus"]).status.code(), Some(2));

    let cfg = d.path().join("bad.json");
    std::fs::write(&cfg, r#"{"train": {"lr0": "fast"}}"#).unwrap();
    let o = rrid(&["gradcheck", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("train.lr0"), "{}", stderr(&o));
}

#[test]
fn train_resume_eval_infer() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    let out = d.path().join("run");
    tiny_dataset(&data);

    ok(train(&data, &out, &["--seed", "3"]));
    assert!(out.join("last.ckpt").is_file() && out.join("best.ckpt").is_file());
    let last = s(&out.join("last.ckpt")).to_string();
    ok(rrid(&["train", "--data", s(&data), "--out", s(&out), "--resume", &last, "--epochs", "2"]));
    let log = std::fs::read_to_string(out.join("train_log.jsonl")).unwrap();
    let steps: Vec<u64> = log
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter_map(|v| v.get("step").and_then(|s| s.as_u64()))
        .collect();
    assert_eq!(steps, vec![1, 2, 3, 4]);

    let csv = |name: &str| {
        let p = d.path().join(name);
        ok(rrid(&["eval", "--checkpoint", &last, "--data", s(&data), "--out", s(&p)]));
        std::fs::read_to_string(p).unwrap()
    };
    let first = csv("a.csv");
    assert_eq!(first, csv("b.csv"));
    assert!(first.starts_with("id,psnr,ssim\n") && first.lines().last().unwrap().starts_with("mean,"));
    assert_eq!(first.lines().count(), 4);

    let test = data.join("test");
    let png = d.path().join("out.png");
    let (rgb, raw) = (test.join("00000_moire_rgb.png"), test.join("00000_moire_raw.png"));
    ok(rrid(&["infer", "--checkpoint", &last, "--rgb", s(&rgb), "--raw", s(&raw), "--out", s(&png)]));
    let img = rrid::dataio::read_rgb_png(&png).unwrap();
    assert_eq!(img.dims(), (16, 16));

    // A 16×16 sRGB next to a 32×32 mosaic.
    let big = d.path().join("big");
    ok(rrid(&["synth", "--out", s(&big), "--count", "1", "--size", "32"]));
    let big_raw = big.join("train/00000_moire_raw.png");
    let o = rrid(&["infer", "--checkpoint", &last, "--rgb", s(&rgb), "--raw", s(&big_raw), "--out", s(&png)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn near_identity_checkpoint_scores_the_inputs() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    let out = d.path().join("run");
    tiny_dataset(&data);
    ok(train(&data, &out, &["--lr", "1e-12"]));
    let o = ok(rrid(&["eval", "--checkpoint", s(&out.join("last.ckpt")), "--data", s(&data)]));
    let mean = stdout(&o).lines().last().unwrap().to_string();
    let cols: Vec<f64> = mean.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    let base = evaluate_inputs(&load_dataset(&data, Split::Test).unwrap()).unwrap();
    // Output is quantized to 8 bits on the way to PNG only in `infer`; eval is exact up to f32.
    assert!((cols[0] - base.mean_psnr).abs() < 0.05, "{mean} vs {}", base.mean_psnr);
    assert!((cols[1] - base.mean_ssim).abs() < 1e-3, "{mean} vs {}", base.mean_ssim);
}

#[test]
fn bad_checkpoints_and_numeric_aborts() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    tiny_dataset(&data);
    let junk = d.path().join("junk.ckpt");
    std::fs::write(&junk, b"RRCK not really").unwrap();
    let o = rrid(&["eval", "--checkpoint", s(&junk), "--data", s(&data)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let out = d.path().join("nan");
    let o = train(&data, &out, &["--inject-nan-step", "1"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("step 1"), "{}", stderr(&o));
}

#[test]
fn gradcheck_reports_per_block() {
    let o = ok(rrid(&["gradcheck"]));
    let out = stdout(&o);
    for block in ["conv2d", "channel_attention", "dcab", "gfm", "fsm", "rstb", "rgisp", "rrid"] {
        assert!(out.lines().any(|l| l.starts_with("PASS") && l.split_whitespace().nth(1) == Some(block)), "{out}");
    }
    let o = rrid(&["gradcheck", "--inject-fault", "window_attention"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL rstb")), "{}", stdout(&o));
    assert!(stderr(&o).contains("rstb"));

    let o = rrid(&["gradcheck", "--tolerance", "1e-12"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn ablate_rejects_unknown_variant() {
    let d = tempfile::tempdir().unwrap();
    let o = rrid(&["ablate", "--data", s(d.path()), "--variants", "B4,Q9", "--out", s(d.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("Q9") && err.contains("B4") && err.contains("S3"), "{err}");
}

#[test]
fn ablate_emits_one_row_per_variant() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    let out = d.path().join("ablate");
    tiny_dataset(&data);
    let mut args = vec!["ablate", "--data", s(&data), "--variants", "B4,S2,S3", "--out", s(&out)];
    args.extend_from_slice(FAST);
    ok(rrid(&args));
    let csv = std::fs::read_to_string(out.join("ablation.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 5, "{csv}");
    assert!(rows[0].starts_with("variant,"));
    let names: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(names, ["full", "B4", "S2", "S3"]);

    let o = ok(rrid(&["eval", "--checkpoint", s(&out.join("full/last.ckpt")), "--data", s(&data)]));
    let mean: Vec<f64> = stdout(&o).lines().last().unwrap().split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    let full: Vec<f64> = rows[1].rsplitn(3, ',').take(2).map(|v| v.parse().unwrap()).collect();
    assert!((full[1] - mean[0]).abs() <= 1e-9 && (full[0] - mean[1]).abs() <= 1e-9, "{} vs {mean:?}", rows[1]);
}
