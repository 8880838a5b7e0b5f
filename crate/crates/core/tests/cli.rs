mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{small_spec, snapshot, synth_workspace};

fn revdict(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revdict"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&revdict(&[])), 1);
    assert_eq!(code(&revdict(&["frobnicate"])), 1);
    assert_eq!(code(&revdict(&["train"])), 1);
    assert_eq!(
        code(&revdict(&["--config", "/no/such/config.json", "train"])),
        1
    );
    assert_eq!(code(&revdict(&["--help"])), 0);
}

#[test]
fn missing_feature_file_is_named() {
    let (dir, cfg) = synth_workspace(small_spec(), 1e-2);
    fs::remove_file(dir.path().join("features/marbert.jsonl")).unwrap();
    let o = revdict(&["--config", p(&cfg), "train"]);
    assert_eq!(code(&o), 1);
    assert!(
        stderr(&o).contains("features/marbert.jsonl"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn malformed_predictions_report_line_number() {
    let (dir, _) = synth_workspace(small_spec(), 1e-2);
    let preds = dir.path().join("bad.jsonl");
    fs::write(
        &preds,
        "{\"id\": \"a\", \"embedding\": [1.0]}\n{\"id\": \"b\", \"embedding\": [2.0]}\n{\"id\": \"c\", \"embedding\": [\n",
    )
    .unwrap();
    let o = revdict(&[
        "eval",
        "--predictions",
        p(&preds),
        "--reference",
        p(&dir.path().join("test.json")),
        "--target",
        "electra",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.jsonl:3:"), "{}", stderr(&o));
}

#[test]
fn full_pipeline_through_the_binary() {
    let (dir, cfg) = synth_workspace(small_spec(), 1e-2);
    let cfg = p(&cfg);
    let out = dir.path().join("out");

    let o = revdict(&["--config", cfg, "train"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_dir(out.join("heads")).unwrap().count(), 16);

    let o = revdict(&["--config", cfg, "search"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("search-electra.csv")).unwrap();
    assert_eq!(csv.lines().count(), 16);

    let direct = dir.path().join("direct.jsonl");
    let translated = dir.path().join("translated.jsonl");
    let o = revdict(&["--config", cfg, "predict", "--output", p(&direct)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = revdict(&[
        "--config",
        cfg,
        "translate-test",
        "--translations",
        p(&dir.path().join("test.translated.jsonl")),
        "--output",
        p(&translated),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(&direct).unwrap(), fs::read(&translated).unwrap());

    let o = revdict(&[
        "eval",
        "--predictions",
        p(&direct),
        "--reference",
        p(&dir.path().join("test.json")),
        "--target",
        "electra",
        "--vocab",
        p(&dir.path().join("train.json")),
        "--vocab",
        p(&dir.path().join("dev.json")),
        "--vocab",
        p(&dir.path().join("test.json")),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\"P@10\"") || text.contains("P@10"), "{text}");

    let gloss = fs::read_to_string(dir.path().join("test.json")).unwrap();
    let entries: serde_json::Value = serde_json::from_str(&gloss).unwrap();
    let first = &entries[0];
    let o = revdict(&[
        "--config",
        cfg,
        "lookup",
        first["gloss"].as_str().unwrap(),
        "-k",
        "5",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let hits: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(hits["results"].as_array().unwrap().len(), 5);

    let o = revdict(&["--config", cfg, "lookup", "   "]);
    assert_eq!(code(&o), 1);
    let o = revdict(&["--config", cfg, "lookup", "x", "-k", "101"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn train_is_byte_identical_across_reruns() {
    let (dir, cfg) = synth_workspace(small_spec(), 1e-2);
    let cfg = p(&cfg);
    let a = dir.path().join("run-a");
    let b = dir.path().join("run-b");
    assert_eq!(
        code(&revdict(&["--config", cfg, "--out", p(&a), "train"])),
        0
    );
    assert_eq!(
        code(&revdict(&["--config", cfg, "--out", p(&b), "train"])),
        0
    );
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert_eq!(sa.len(), 16);
    assert_eq!(sa, sb);
    let c = dir.path().join("run-c");
    assert_eq!(
        code(&revdict(&[
            "--config",
            cfg,
            "--out",
            p(&c),
            "--seed",
            "9",
            "train"
        ])),
        0
    );
    assert_ne!(snapshot(&c), sa);
}

#[test]
fn allow_partial_skips_missing_translations() {
    let spec = small_spec();
    let n_test = spec.n_test;
    let (dir, cfg) = synth_workspace(spec, 1e-2);
    let cfg = p(&cfg);
    assert_eq!(code(&revdict(&["--config", cfg, "train"])), 0);
    assert_eq!(code(&revdict(&["--config", cfg, "search"])), 0);

    let full = fs::read_to_string(dir.path().join("test.translated.jsonl")).unwrap();
    let partial: Vec<&str> = full.lines().skip(10).collect();
    let tr = dir.path().join("partial.jsonl");
    fs::write(&tr, partial.join("\n") + "\n").unwrap();
    let out = dir.path().join("partial-preds.jsonl");
    let args = [
        "--config",
        cfg,
        "translate-test",
        "--translations",
        p(&tr),
        "--output",
        p(&out),
    ];

    let o = revdict(&args);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(!out.exists());

    let mut with_flag = vec!["--allow-partial"];
    with_flag.extend(args);
    let o = revdict(&with_flag);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["missing"], 10);
    let written = fs::read_to_string(&out).unwrap();
    assert_eq!(written.lines().count(), n_test - 10);
}
