//! End-to-end checks for the binary, driven through std::process. The
//! determinism criterion lives here because it spans all three subcommands;
//! it prints the same `ACCEPTANCE <n> <name>: PASS|FAIL` line as the core
//! crate's acceptance suite, numbered 10 to slot into that list.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ipte_core::capture::{CapturePolicy, Warmup, WindowMode};
use ipte_core::trace::{write_trace, Trace, TraceHeader, TraceRecord};

fn ipte(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipte"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary must run")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

const IRIS_CONFIG: &str = r#"{
  "dataset": {"fixture": "iris"},
  "model": {"layer_widths": [4, 8, 3]},
  "train": {"epochs": 3, "seed": 7}
}"#;

/// One full train -> analyze -> plot pass into `run` under `base`.
fn pipeline(base: &Path, run: &str) -> Vec<(String, PathBuf)> {
    let dir = base.join(run);
    let out = ipte(&["train", "--config", "run.json", "--out", run], base);
    assert_eq!(code(&out), 0, "train: {}", stderr(&out));
    let trace = dir.join("trace.jsonl");
    let results = dir.join("results.csv");
    let out = ipte(
        &["analyze", "--trace", trace.to_str().unwrap(), "--out", results.to_str().unwrap()],
        base,
    );
    assert_eq!(code(&out), 0, "analyze: {}", stderr(&out));
    let mut artifacts = vec![
        ("trace.jsonl".to_string(), trace),
        ("metrics.csv".to_string(), dir.join("metrics.csv")),
        ("results.csv".to_string(), results.clone()),
    ];
    for (mode, extra) in [
        ("averaged", vec![]),
        ("ip", vec![]),
        ("stacked", vec![]),
        ("per-epoch", vec!["--stride", "2"]),
    ] {
        let svg = dir.join(format!("{mode}.svg"));
        let mut args = vec![
            "plot",
            "--results",
            results.to_str().unwrap(),
            "--mode",
            mode,
            "--out",
            svg.to_str().unwrap(),
        ];
        args.extend(extra);
        let out = ipte(&args, base);
        assert_eq!(code(&out), 0, "plot {mode}: {}", stderr(&out));
        artifacts.push((format!("{mode}.svg"), svg));
    }
    artifacts
}

#[test]
fn criterion_10_end_to_end_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    write(&tmp.path().join("run.json"), IRIS_CONFIG);
    let first = pipeline(tmp.path(), "a");
    let second = pipeline(tmp.path(), "b");

    let mut identical = true;
    let mut detail = Vec::new();
    for ((name, pa), (_, pb)) in first.iter().zip(&second) {
        let same = read(pa) == read(pb);
        identical &= same;
        if !same {
            detail.push(name.clone());
        }
    }
    println!(
        "ACCEPTANCE 10 end-to-end-determinism: {}{}",
        if identical { "PASS" } else { "FAIL" },
        if detail.is_empty() {
            format!("  [{} artifacts byte-identical across reruns]", first.len())
        } else {
            format!("  [differing: {}]", detail.join(", "))
        }
    );
    assert!(identical, "artifacts differ between reruns: {detail:?}");
}

#[test]
fn config_problems_exit_one_and_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("no-seed", r#"{"dataset": {"fixture": "iris"}, "model": {"layer_widths": [4,8,3]}, "train": {"epochs": 2}}"#, "seed"),
        ("unknown-field", r#"{"dataset": {"fixture": "iris"}, "model": {"layer_widths": [4,8,3]}, "train": {"epochs": 2, "seed": 1, "momentum": 0.9}}"#, "momentum"),
        ("both-sources", r#"{"dataset": {"fixture": "iris", "path": "x.csv"}, "model": {"layer_widths": [4,8,3]}, "train": {"seed": 1}}"#, "not both"),
        ("missing-path", r#"{"dataset": {"path": "nowhere.csv"}, "model": {"layer_widths": [4,8,3]}, "train": {"seed": 1}}"#, "does not exist"),
        ("bad-shape", r#"{"dataset": {"fixture": "iris"}, "model": {"layer_widths": [4]}, "train": {"seed": 1}}"#, "shape"),
        ("bad-json", "{", "config"),
    ];
    for (name, config, needle) in cases {
        let path = tmp.path().join(format!("{name}.json"));
        write(&path, config);
        let out = ipte(
            &["train", "--config", path.to_str().unwrap(), "--out", name],
            tmp.path(),
        );
        assert_eq!(code(&out), 1, "{name}: {}", stderr(&out));
        assert!(
            stderr(&out).contains(needle),
            "{name}: stderr {:?} misses {needle:?}",
            stderr(&out)
        );
        assert!(!tmp.path().join(name).exists(), "{name} left an output directory");
    }

    let cfg = tmp.path().join("no-out.json");
    write(&cfg, IRIS_CONFIG);
    let out = ipte(&["train", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("output"));

    let out = ipte(&["train", "--nonsense"], tmp.path());
    assert_eq!(code(&out), 1, "usage errors share the config exit code");
}

#[test]
fn data_problems_exit_two_and_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("broken.csv");
    write(&csv, "a,b,label\n1.0,oops,x\n");
    let cfg = tmp.path().join("run.json");
    write(
        &cfg,
        r#"{"dataset": {"path": "broken.csv", "schema": {"label_column": 2}}, "model": {"layer_widths": [2,4,2]}, "train": {"epochs": 2, "seed": 1}}"#,
    );
    let out = ipte(&["train", "--config", "run.json", "--out", "out"], tmp.path());
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("not a number"));
    assert!(!tmp.path().join("out").exists(), "failed run left outputs behind");

    let out = ipte(&["analyze", "--trace", "missing.jsonl", "--out", "r.csv"], tmp.path());
    assert_eq!(code(&out), 2);
    assert!(!tmp.path().join("r.csv").exists());
}

#[test]
fn divergence_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        &tmp.path().join("run.json"),
        r#"{"dataset": {"fixture": "xor", "test_fraction": 0.5}, "model": {"layer_widths": [2,4,2], "hidden_activation": "relu"}, "train": {"learning_rate": 1e200, "epochs": 3, "seed": 1}}"#,
    );
    let out = ipte(&["train", "--config", "run.json", "--out", "out"], tmp.path());
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("divergence"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn single_epoch_trace_stays_at_epoch_zero() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        &tmp.path().join("run.json"),
        r#"{"dataset": {"fixture": "xor", "test_fraction": 0.5}, "model": {"layer_widths": [2,4,2]}, "train": {"epochs": 1, "seed": 1}}"#,
    );
    let out = ipte(&["train", "--config", "run.json", "--out", "out"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trace = std::fs::read_to_string(tmp.path().join("out/trace.jsonl")).unwrap();
    let mut records = 0usize;
    for line in trace.lines().skip(1) {
        assert!(line.contains("\"epoch\":0"), "unexpected epoch in {line}");
        records += 1;
    }
    assert_eq!(records, 6, "2 retained steps x 3 layers");
}

/// An 8-step two-layer trace whose binarization reproduces a pair with a
/// known TE of exactly 2/7 bits: activations are already 0/1 and the 10th
/// percentile threshold of each window is 0, so thresholding is the identity.
fn worked_pair_trace(run_id: &str, layer_widths: Vec<usize>, lo: usize, hi: usize) -> Trace {
    let source = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
    let target = [0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0];
    let capture = CapturePolicy {
        percentile: 10.0,
        warmup: Warmup::Count(0),
        window_mode: WindowMode::PerBatch { b: 8 },
    };
    let header = TraceHeader::new(run_id, layer_widths, capture, 0);
    let mut records = Vec::new();
    for step in 0..8 {
        records.push(TraceRecord { epoch: 0, step, layer: lo, act: vec![source[step]] });
        records.push(TraceRecord { epoch: 0, step, layer: hi, act: vec![target[step]] });
    }
    Trace { header, records }
}

#[test]
fn analyze_scores_the_worked_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let trace_path = tmp.path().join("worked.jsonl");
    write_trace(&trace_path, &worked_pair_trace("worked", vec![1, 1], 0, 1)).unwrap();
    let out = ipte(
        &["analyze", "--trace", "worked.jsonl", "--out", "r.csv"],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(tmp.path().join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "run_id,epoch,window_index,pair_id,te_mean,pair_count"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(lines.next(), None, "one batch window, one record");
    let te: f64 = row[4].parse().unwrap();
    assert!((te - 2.0 / 7.0).abs() < 1e-12, "te_mean {te}");
    assert_eq!(row[5], "1", "single neuron pair");
}

#[test]
fn external_trace_with_a_layer_subset_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    // only layers 5 and 6 of a seven-layer net were exported
    let widths = vec![3, 3, 3, 3, 3, 1, 1];
    let trace_path = tmp.path().join("subset.jsonl");
    write_trace(&trace_path, &worked_pair_trace("subset", widths, 5, 6)).unwrap();
    let out = ipte(
        &["analyze", "--trace", "subset.jsonl", "--out", "r.csv"],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(stdout.contains("layers [5, 6]"), "{stdout}");
    let csv = std::fs::read_to_string(tmp.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "header plus the single pair record");
}

#[test]
fn single_layer_trace_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut trace = worked_pair_trace("lonely", vec![1, 1], 0, 1);
    trace.records.retain(|r| r.layer == 0);
    let trace_path = tmp.path().join("lonely.jsonl");
    write_trace(&trace_path, &trace).unwrap();
    let out = ipte(
        &["analyze", "--trace", "lonely.jsonl", "--out", "r.csv"],
        tmp.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("adjacent pair"), "{}", stderr(&out));
    assert!(!tmp.path().join("r.csv").exists());
}

const SINGLE_PAIR_RESULTS: &str = "run_id,epoch,window_index,pair_id,te_mean,pair_count\n\
r,0,0,0,1.00000000000e-1,4\n\
r,0,1,0,0.00000000000e0,4\n\
r,1,0,0,5.00000000000e-2,4\n\
r,1,1,0,0.00000000000e0,4\n";

#[test]
fn ip_mode_requires_two_pairs_and_names_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    write(&tmp.path().join("r.csv"), SINGLE_PAIR_RESULTS);
    let out = ipte(
        &["plot", "--results", "r.csv", "--mode", "ip", "--out", "p.svg"],
        tmp.path(),
    );
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("--mode ip"), "{err}");
    assert!(!tmp.path().join("p.svg").exists());
}

#[test]
fn log_axis_rejects_zero_and_names_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    write(&tmp.path().join("r.csv"), SINGLE_PAIR_RESULTS);
    let out = ipte(
        &["plot", "--results", "r.csv", "--mode", "averaged", "--log-y", "--out", "p.svg"],
        tmp.path(),
    );
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("--log-y"), "{err}");
    assert!(!tmp.path().join("p.svg").exists());

    // the same data is fine on a linear axis
    let out = ipte(
        &["plot", "--results", "r.csv", "--mode", "averaged", "--out", "p.svg"],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let svg = std::fs::read_to_string(tmp.path().join("p.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
}

#[test]
fn unknown_pair_names_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    write(&tmp.path().join("r.csv"), SINGLE_PAIR_RESULTS);
    let out = ipte(
        &["plot", "--results", "r.csv", "--mode", "averaged", "--pair", "3", "--out", "p.svg"],
        tmp.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--pair"), "{}", stderr(&out));
}

#[test]
fn per_epoch_mode_honors_stride() {
    let tmp = tempfile::tempdir().unwrap();
    write(&tmp.path().join("r.csv"), SINGLE_PAIR_RESULTS);
    let out = ipte(
        &["plot", "--results", "r.csv", "--mode", "per-epoch", "--out", "all.svg"],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let svg = std::fs::read_to_string(tmp.path().join("all.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2, "both epochs drawn at stride 1");

    let out = ipte(
        &["plot", "--results", "r.csv", "--mode", "per-epoch", "--stride", "2", "--out", "half.svg"],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let svg = std::fs::read_to_string(tmp.path().join("half.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1, "only epoch 0 at stride 2");
}
