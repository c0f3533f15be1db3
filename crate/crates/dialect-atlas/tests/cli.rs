//! End-to-end checks of the command-line binary: exit codes, the
//! synth -> train -> eval pipeline, rerun determinism, and config-file
//! precedence.

use std::path::Path;
use std::process::Command;

fn run_in(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dialect-atlas"))
        .args(args)
        .current_dir(dir)
        .env("DIALECT_ATLAS_LOG", "warn")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn stdout_json(stdout: &str) -> serde_json::Value {
    let line = stdout.lines().last().expect("stdout has a result line");
    serde_json::from_str(line).expect("stdout line is JSON")
}

#[test]
fn help_is_success_and_bad_usage_is_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run_in(dir.path(), &["--help"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("Usage"));

    let (code, _, _) = run_in(dir.path(), &["frobnicate"]);
    assert_eq!(code, 1);

    let (code, _, _) = run_in(dir.path(), &[]);
    assert_eq!(code, 1);
}

#[test]
fn geodist_training_without_resolution_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run_in(
        dir.path(),
        &["train", "--model", "geodist", "--corpus", "c.jsonl", "--out", "m.gdst"],
    );
    assert_eq!(code, 1);
    assert!(stderr.contains("--resolution"), "stderr was: {stderr}");
}

#[test]
fn unknown_model_type_in_eval_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run_in(
        dir.path(),
        &[
            "eval", "--model-type", "word2vec", "--lexicon", "l.tsv", "--corpus",
            "c.jsonl", "--pair", "US,UK",
        ],
    );
    assert_eq!(code, 1);
    assert!(stderr.contains("word2vec"), "stderr was: {stderr}");

    let (code, _, stderr) = run_in(
        dir.path(),
        &[
            "eval", "--model-type", "geodist", "--lexicon", "l.tsv", "--corpus",
            "c.jsonl", "--pair", "US,UK",
        ],
    );
    assert_eq!(code, 1);
    assert!(stderr.contains("--model-file"), "stderr was: {stderr}");
}

#[test]
fn missing_corpus_is_a_runtime_error_with_a_structured_record() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run_in(
        dir.path(),
        &["stats", "--corpus", "no-such-file.jsonl"],
    );
    assert_eq!(code, 2);
    let record: serde_json::Value =
        serde_json::from_str(stderr.lines().last().unwrap()).expect("structured error");
    assert_eq!(record["command"], "stats");
    assert!(record["error"].is_string());
}

#[test]
fn full_pipeline_produces_reports_and_stays_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let (code, stdout, stderr) =
        run_in(d, &["synth", "--out", "corpus.jsonl", "--labels", "lex.tsv"]);
    assert_eq!(code, 0, "synth failed: {stderr}");
    let synth = stdout_json(&stdout);
    assert_eq!(synth["documents"], 4000);
    assert_eq!(synth["planted"], 20);

    let (code, stdout, _) = run_in(d, &["stats", "--corpus", "corpus.jsonl"]);
    assert_eq!(code, 0);
    let stats = stdout_json(&stdout);
    assert_eq!(stats["total"]["documents"], 4000);
    assert!(stats["per_region"]["US"]["tokens"].as_u64().unwrap() > 0);

    let (code, stdout, _) = run_in(
        d,
        &["ingest", "--corpus", "corpus.jsonl", "--min-freq", "5", "--out", "vocab.tsv"],
    );
    assert_eq!(code, 0);
    assert_eq!(stdout_json(&stdout)["vocab"], 200);
    assert!(d.join("vocab.tsv").exists());

    let train_args = [
        "train", "--model", "dialectgram", "--corpus", "corpus.jsonl", "--min-freq",
        "5", "--dim", "8", "--window", "3", "--max-senses", "2", "--seed", "3",
    ];
    let with_out = |out: &str| {
        let mut v: Vec<&str> = train_args.to_vec();
        v.push("--out");
        let out: &str = Box::leak(out.to_string().into_boxed_str());
        v.push(out);
        v
    };
    let (code, stdout, stderr) = run_in(d, &with_out("model.adgm"));
    assert_eq!(code, 0, "train failed: {stderr}");
    assert_eq!(stdout_json(&stdout)["centers"], 48000);

    let (code, _, _) = run_in(d, &with_out("model2.adgm"));
    assert_eq!(code, 0);
    let a = std::fs::read(d.join("model.adgm")).unwrap();
    let b = std::fs::read(d.join("model2.adgm")).unwrap();
    assert_eq!(a, b, "same seed reruns must be bit-identical");

    std::fs::write(
        d.join("map.json"),
        r#"{"resolution":"country","regions":[
            {"id":"US","bbox":[-130.0,20.0,-60.0,50.0]},
            {"id":"UK","bbox":[-11.0,49.0,2.0,61.0]}]}"#,
    )
    .unwrap();
    let (code, stdout, stderr) = run_in(
        d,
        &[
            "analyze", "--model", "model.adgm", "--corpus", "corpus.jsonl",
            "--min-freq", "5", "--word", "p00", "--pair", "US,UK", "--neighbors", "2",
            "--region-map", "map.json", "--export-choropleth", "choro.csv",
            "--min-docs", "5",
        ],
    );
    assert_eq!(code, 0, "analyze failed: {stderr}");
    let analysis = stdout_json(&stdout);
    assert_eq!(analysis["word"], "p00");
    assert!(analysis["pair_score"].is_number());
    assert_eq!(analysis["regions"]["US"]["n"], 50);
    let choro = std::fs::read_to_string(d.join("choro.csv")).unwrap();
    assert!(choro.starts_with("region_id,sense,proportion,n_docs\n"));
    assert_eq!(choro.lines().count(), 3);
    assert!(d.join("choro.geojson").exists(), "bbox map should yield GeoJSON");

    let (code, stdout, stderr) = run_in(
        d,
        &[
            "eval", "--model-type", "dialectgram", "--model-file", "model.adgm",
            "--corpus", "corpus.jsonl", "--lexicon", "lex.tsv", "--pair", "US,UK",
            "--min-freq", "5", "--seed", "3", "--report", "report.tsv",
        ],
    );
    assert_eq!(code, 0, "eval failed: {stderr}");
    let metrics = stdout_json(&stdout);
    assert!(metrics["accuracy"].is_number());
    assert_eq!(metrics["train_size"], 30);
    assert_eq!(metrics["test_size"], 10);
    let report = std::fs::read_to_string(d.join("report.tsv")).unwrap();
    assert!(report.starts_with("Model\tAcc\tPrec\tRecall\tF1\n"));
    assert!(report.lines().nth(1).unwrap().starts_with("dialectgram\t"));

    let (code, stdout, _) = run_in(
        d,
        &[
            "score", "--model", "frequency", "--corpus", "corpus.jsonl", "--pair",
            "US,UK", "--words", "all", "--out", "scores.tsv",
        ],
    );
    assert_eq!(code, 0);
    assert_eq!(stdout_json(&stdout)["scored"], 200);
    let first = std::fs::read_to_string(d.join("scores.tsv")).unwrap();
    let mut fields = first.lines().next().unwrap().split('\t');
    fields.next().unwrap();
    fields.next().unwrap().parse::<f64>().unwrap();
}

#[test]
fn config_file_defaults_apply_and_flags_override_them() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (code, _, _) = run_in(d, &["synth", "--out", "corpus.jsonl", "--labels", "lex.tsvv"]);
    assert_eq!(code, 0);
    std::fs::write(d.join("conf.json"), r#"{"dim": 4, "min-freq": 5, "window": 3}"#).unwrap();

    let base = [
        "train", "--model", "dialectgram", "--corpus", "corpus.jsonl", "--max-senses",
        "2", "--seed", "9",
    ];
    let run_train = |extra: &[&str], out: &str| {
        let mut args: Vec<&str> = base.to_vec();
        args.extend_from_slice(extra);
        args.push("--out");
        let out: &str = Box::leak(out.to_string().into_boxed_str());
        args.push(out);
        let (code, _, stderr) = run_in(d, &args);
        assert_eq!(code, 0, "train failed: {stderr}");
    };

    run_train(&["--config", "conf.json"], "from_config.adgm");
    run_train(&["--dim", "4", "--min-freq", "5", "--window", "3"], "from_flags.adgm");
    run_train(&["--config", "conf.json", "--dim", "6"], "overridden.adgm");
    run_train(
        &["--dim", "6", "--min-freq", "5", "--window", "3"],
        "expected_override.adgm",
    );

    let read = |name: &str| std::fs::read(d.join(name)).unwrap();
    assert_eq!(read("from_config.adgm"), read("from_flags.adgm"));
    assert_ne!(read("from_config.adgm"), read("overridden.adgm"));
    assert_eq!(read("overridden.adgm"), read("expected_override.adgm"));
}
