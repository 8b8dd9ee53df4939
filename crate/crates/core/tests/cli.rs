use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_tagcn");

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny.tagcn")
}

fn schema_check(name: &str, instance: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../docs/schemas/{name}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{instance}");
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("TAGCN_DATA_DIR").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json_lines(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn small_sbm(dir: &Path, seed: &str) -> PathBuf {
    let path = dir.join(format!("sbm{seed}.tagcn"));
    let p = path.to_str().unwrap();
    ok(&["gen-sbm", "--nodes", "120", "--p-in", "0.15", "--signal", "direct", "--seed", seed, "--out", p]);
    path
}

#[test]
fn gen_sbm_is_reproducible_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let a = std::fs::read(small_sbm(dir.path(), "3")).unwrap();
    let stdout = ok(&["gen-sbm", "--nodes", "120", "--p-in", "0.15", "--signal", "direct", "--seed", "3"]);
    assert_eq!(a, stdout.as_bytes());
    assert!(stdout.starts_with("TAGCN-DATASET v1 120 "));

    let report: Value = serde_json::from_str(&ok(&["validate-data", "--dataset", fixture().to_str().unwrap()])).unwrap();
    schema_check("validate-data", &report);
    assert_eq!(report["load"]["num_nodes"], 6);
    assert_eq!(report["splits"]["label_rate"], 2.0 / 6.0);
}

#[test]
fn train_eval_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_sbm(dir.path(), "1");
    let (ck, metrics) = (dir.path().join("model.json"), dir.path().join("metrics.json"));
    let stdout = ok(&[
        "train", "--dataset", data.to_str().unwrap(), "--seed", "4", "--epochs", "40", "--json",
        "--checkpoint", ck.to_str().unwrap(), "--out", metrics.to_str().unwrap(),
    ]);
    let lines = json_lines(&stdout);
    for l in &lines {
        schema_check("train-stream", l);
    }
    assert_eq!(lines[0]["type"], "header");
    assert_eq!(lines[0]["config"]["filter_size"], 2);
    let summary = lines.last().unwrap();
    assert_eq!(summary["type"], "summary");
    let epochs = lines.iter().filter(|l| l["type"] == "epoch").count();
    assert_eq!(summary["epochs_run"], epochs);

    let m: Value = serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    schema_check("run-metrics", &m);
    assert_eq!(m["test_accuracy"], summary["test_accuracy"]);
    let c: Value = serde_json::from_str(&std::fs::read_to_string(&ck).unwrap()).unwrap();
    schema_check("checkpoint", &c);

    let eval: Value = serde_json::from_str(&ok(&[
        "eval", "--dataset", data.to_str().unwrap(), "--checkpoint", ck.to_str().unwrap(),
    ]))
    .unwrap();
    schema_check("eval", &eval);
    assert_eq!(eval["accuracy"], summary["test_accuracy"]);

    // a second run with the same seed is identical apart from timing
    let again = json_lines(&ok(&["train", "--dataset", data.to_str().unwrap(), "--seed", "4", "--epochs", "40", "--json"]));
    let strip = |v: &[Value]| -> Vec<Value> {
        v.iter()
            .map(|l| {
                let mut l = l.clone();
                l.as_object_mut().unwrap().remove("wall_time_secs");
                l.as_object_mut().unwrap().remove("dataset");
                l
            })
            .collect()
    };
    assert_eq!(strip(&again), strip(&lines));
}

#[test]
fn human_train_output() {
    let out = run(&["train", "--dataset", fixture().to_str().unwrap(), "--seed", "0", "--epochs", "5"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("test accuracy "), "{stdout}");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("# extrapolated defaults: dropout_rate, weight_decay"), "{stderr}");
}

#[test]
fn spectrum_of_the_cyclic_graph() {
    let report: Value = serde_json::from_str(&ok(&["spectrum", "--cyclic", "8", "--coeffs", "1,1"])).unwrap();
    schema_check("spectrum", &report);
    assert_eq!(report["operator"], "raw");
    let eig = report["eigenvalues"].as_array().unwrap();
    let resp = report["response"].as_array().unwrap();
    assert_eq!(eig.len(), 8);
    for (l, h) in eig.iter().zip(resp) {
        let (re, im) = (l[0].as_f64().unwrap(), l[1].as_f64().unwrap());
        assert!(((re * re + im * im).sqrt() - 1.0).abs() < 1e-9);
        assert!((h[0].as_f64().unwrap() - (1.0 + re)).abs() < 1e-9);
        assert!((h[1].as_f64().unwrap() - im).abs() < 1e-9);
    }
    let on_data: Value = serde_json::from_str(&ok(&[
        "spectrum", "--dataset", fixture().to_str().unwrap(), "--operator", "laplacian", "--coeffs", "0,1",
    ]))
    .unwrap();
    schema_check("spectrum", &on_data);
    assert_eq!(on_data["num_nodes"], 6);
}

#[test]
fn deep_stack_report() {
    let conv: Value = serde_json::from_str(&ok(&["theorem1", "--nodes", "12", "--layers", "200", "--seed", "1"])).unwrap();
    schema_check("theorem1", &conv);
    assert_eq!(conv["converged"], true);
    assert_eq!(conv["positive_tail"], true);
    let zero: Value = serde_json::from_str(&ok(&["theorem1", "--layers", "50", "--zero-gain-layer", "7"])).unwrap();
    schema_check("theorem1", &zero);
    assert_eq!(zero["converged"], false);
    assert_eq!(zero["positive_tail"], false);
    assert_eq!(zero["report"]["final_cosine"], 0.0);
}

#[test]
fn reproduce_streams_and_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_sbm(dir.path(), "2");
    let d = data.to_str().unwrap();
    let base = ["reproduce", d, "--runs", "3", "--seed", "5", "--epochs", "25", "--json"];
    let one = json_lines(&ok(&[&base[..], &["--threads", "1"]].concat()));
    let two = json_lines(&ok(&[&base[..], &["--threads", "2"]].concat()));
    for l in &one {
        schema_check("reproduce-stream", l);
    }
    let runs = |v: &[Value]| v.iter().filter(|l| l["type"] == "run").cloned().collect::<Vec<_>>();
    assert_eq!(runs(&one).len(), 3);
    assert_eq!(runs(&one), runs(&two));
    assert_eq!(one.last().unwrap()["summary"]["runs"], 3);

    let human = ok(&["reproduce", d, "--runs", "2", "--seed", "0", "--epochs", "10"]);
    assert!(human.starts_with(&format!("{d}: ")) && human.trim_end().ends_with("(2 runs)"), "{human}");
    assert!(human.contains(" ± "));
}

#[test]
fn reproduce_two_hop_ablation_stream() {
    let lines = json_lines(&ok(&[
        "reproduce", "two-hop-sbm", "--runs", "2", "--seed", "0", "--sizes", "1,2", "--epochs", "30", "--json",
    ]));
    for l in &lines {
        schema_check("reproduce-stream", l);
    }
    let rows: Vec<&Value> = lines.iter().filter(|l| l["type"] == "filter_size").collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["filter_size"], 1);
    assert_eq!(rows[1]["accuracies"].as_array().unwrap().len(), 2);
}

#[test]
fn dataset_directory_lookup() {
    let out = Command::new(BIN)
        .args(["validate-data", "--dataset", "tiny"])
        .env("TAGCN_DATA_DIR", fixture().parent().unwrap())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failures_report_structured_errors() {
    let missing = run(&["train", "--dataset", "no-such-dataset", "--seed", "0"]);
    assert_eq!(missing.status.code(), Some(1));
    let err: Value = serde_json::from_str(String::from_utf8(missing.stderr).unwrap().trim()).unwrap();
    schema_check("error", &err);
    assert_eq!(err["error"], "invalid_argument");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tagcn");
    std::fs::write(&bad, "TAGCN-DATASET v1 2 1 1 1\nE 0 7 1\n").unwrap();
    let out = run(&["validate-data", "--dataset", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    schema_check("error", &err);

    let out = run(&["train", "--dataset", fixture().to_str().unwrap(), "--seed", "0", "--dropout", "1.0"]);
    let err: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(err["error"], "invalid_rate");

    // usage errors come from the argument parser
    assert_eq!(run(&["train", "--dataset", "x"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum"]).status.code(), Some(2));
}
