use std::path::Path;
use std::process::{Command, Output};

fn fgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fgame"))
        .args(args)
        .output()
        .expect("spawn fgame")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fast_config(dir: &Path) -> String {
    let path = dir.join("plan.json");
    std::fs::write(
        &path,
        r#"{
  "trials_per_cell": 1,
  "master_seed": 5,
  "cells": [
    {"game": {"n_dims": 5, "n_objects": 10, "strictness": "strict", "sharing": "shared", "latent_dim": 2},
     "train": {"steps": 10}},
    {"game": {"n_dims": 5, "n_objects": 5, "strictness": "non_strict", "sharing": "non_shared", "latent_dim": 2},
     "train": {"steps": 10}}
  ],
  "settings": {"n_contexts": 10, "cp_draws": 2, "composition": {"steps": 5}}
}"#,
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn sweep_then_report_then_probes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fast_config(dir.path());
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    let o = fgame(&["sweep", "--config", &cfg, "--out", out_s, "--workers", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "trials.jsonl",
        "table1_accuracy.csv",
        "table2_f1.csv",
        "table3_perception.csv",
        "table4_composition.csv",
        "messages_pre.csv",
        "messages_post.csv",
        "cp_curve.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("strict-shared-10"), "{stdout}");
    assert!(stdout.contains("nonstrict-nonshared-5"), "{stdout}");

    let table = std::fs::read(out.join("table1_accuracy.csv")).unwrap();
    let o = fgame(&["report", "--out", out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(out.join("table1_accuracy.csv")).unwrap(), table);

    let ckpt = out.join("trials/cell00_strict-shared-10/trial00/model.ckpt");
    let probe_dir = dir.path().join("probe");
    let o = fgame(&[
        "analyze",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--config",
        &cfg,
        "--out",
        probe_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(json["accuracy"].as_f64().unwrap() <= 1.0);
    assert!(probe_dir.join("messages_post.csv").is_file());

    let o = fgame(&["cp", "--checkpoint", ckpt.to_str().unwrap(), "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = String::from_utf8_lossy(&o.stdout);
    assert_eq!(csv.lines().next(), Some("t,acc_f_minus,acc_f_plus"));
    assert_eq!(csv.lines().count(), 82);
}

#[test]
fn train_builds_one_cell_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = fgame(&[
        "train",
        "--non-strict",
        "--non-shared",
        "--objects",
        "15",
        "--steps",
        "5",
        "--trials",
        "2",
        "--master-seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let jsonl = std::fs::read_to_string(out.join("trials.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 2);
    assert!(jsonl.lines().all(|l| l.contains("\"nonstrict-nonshared-15\"")));
}

#[test]
fn config_errors_exit_1_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"trials_per_cell": 1, "colour": "red"}"#).unwrap();
    let o = fgame(&["sweep", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));

    let o = fgame(&[
        "train",
        "--strict",
        "--objects",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n_objects"), "{}", stderr(&o));

    let o = fgame(&["sweep", "--trials", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("trials_per_cell"), "{}", stderr(&o));

    let o = fgame(&["sweep", "--bogus-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let out = blocker.join("sub");
    let o = fgame(&["train", "--steps", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
