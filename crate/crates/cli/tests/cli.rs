use std::path::Path;
use std::process::{Command, Output};

fn jtm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jtm")).args(args).output().unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let last = text.lines().last().expect("stderr line");
    serde_json::from_str(last).expect("json error line")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn unknown_config_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"train": {"learning_rate": 0.1}}"#);
    let out = jtm(&["gen-data", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_line(&out);
    assert_eq!(e["error"], "config");
    assert_eq!(e["code"], 2);
    assert!(e["message"].as_str().unwrap().contains("learning_rate"));
}

#[test]
fn missing_required_input_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = jtm(&["train", "--out", &dir.path().display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out)["message"].as_str().unwrap().contains("data.taxonomy"));
}

#[test]
fn unreadable_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = jtm(&[
        "build-graph",
        "--out",
        &dir.path().display().to_string(),
        "--resumes",
        "/nonexistent/resumes.jsonl",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)["error"], "data");
}

#[test]
fn invalid_values_are_rejected_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"synth": {"min_edits": 4, "max_edits": 1}}"#);
    let out = jtm(&["gen-data", "--config", &cfg, "--out", &dir.path().join("o").display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn small_pipeline_maps_standard_titles_to_themselves() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("run");
    let o = d.display().to_string();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"synth": {"groups": 15, "synonyms": 3, "persons": 200, "jobs_per_person": 4},
            "poincare": {"dim": 6, "epochs": 20}, "semantic": {"dim": 16},
            "train": {"max_epochs": 60, "batch_size": 32}}"#,
    );
    let f = |n: &str| d.join(n).display().to_string();
    assert!(jtm(&["gen-data", "--config", &cfg, "--out", &o]).status.success());
    let train = jtm(&[
        "train", "--config", &cfg, "--out", &o, "--taxonomy", &f("taxonomy.tsv"), "--labels", &f("labels.tsv"),
        "--resumes", &f("resumes.jsonl"),
    ]);
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));

    let taxonomy = std::fs::read_to_string(d.join("taxonomy.tsv")).unwrap();
    let standards: Vec<&str> = taxonomy
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    let titles = write(dir.path(), "titles.txt", &standards.join("\n"));
    let map = jtm(&["map", "--out", &o, "--model", &f("model.jtm"), "--titles", &titles, "--k", "1"]);
    assert!(map.status.success(), "{}", String::from_utf8_lossy(&map.stderr));

    let mappings = std::fs::read_to_string(d.join("mappings.tsv")).unwrap();
    let mut lines = mappings.lines();
    assert_eq!(lines.next(), Some("title\trank\tstandard_title\tprobability"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), standards.len());
    for r in rows {
        assert_eq!(r[1], "1");
        assert_eq!(r[0], r[2]);
    }
    let echo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("map.config.json")).unwrap()).unwrap();
    assert_eq!(echo["map_k"], 1);
    assert!(Path::new(echo["data"]["model"].as_str().unwrap()).is_absolute());
}
