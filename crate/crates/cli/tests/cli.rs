use std::io::Write;
use std::process::{Command, Output, Stdio};

use ducg_testkit::{fixture_path, fixture_text};

fn ducg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ducg")).args(args).output().expect("run ducg")
}

fn ducg_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ducg"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn ducg");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn fx(name: &str) -> String {
    fixture_path(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn lines(o: &Output) -> Vec<serde_json::Value> {
    stdout(o).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn replay_reports_each_triggering_tick() {
    let out = ducg(&["replay", "--kb", &fx("appendix_a.json"), "--signals", &fx("appendix_a.csv")]);
    assert_eq!(out.status.code(), Some(0));
    let reports = lines(&out);
    let top: Vec<(u64, u64)> = reports
        .iter()
        .map(|r| (r["hypotheses"][0]["root"].as_u64().unwrap(), r["hypotheses"][0]["state"].as_u64().unwrap()))
        .collect();
    assert_eq!(top, vec![(2, 1), (2, 2), (2, 2)]);
    let status: Vec<&str> = reports.iter().map(|r| r["status"].as_str().unwrap()).collect();
    assert_eq!(status, vec!["ambiguous", "ambiguous", "diagnosed"]);
}

#[test]
fn all_normal_signals_produce_nothing() {
    let out = ducg(&["replay", "--kb", &fx("appendix_a.json"), "--signals", &fx("all_normal.csv")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());

    let verbose = ducg(&["replay", "--kb", &fx("appendix_a.json"), "--signals", &fx("all_normal.csv"), "--verbose"]);
    let reports = lines(&verbose);
    assert_eq!(reports.len(), 3);
    assert!(reports.iter().all(|r| r["status"] == "no_trigger"));
}

#[test]
fn unexplained_evidence_exits_two() {
    let out = ducg(&["replay", "--kb", &fx("appendix_a_orphan.json"), "--signals", &fx("appendix_a_orphan.csv")]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(lines(&out)[0]["status"], "unexplained");
}

#[test]
fn missing_files_and_bad_input_exit_one() {
    let out = ducg(&["replay", "--kb", "no/such/kb.json", "--signals", &fx("appendix_a.csv")]);
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,MP5,42\n2,MP6\n").unwrap();
    let out = ducg(&["replay", "--kb", &fx("appendix_a.json"), "--signals", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = ducg(&["replay", "--kb", &fx("mutations/prior_sum.json"), "--signals", &fx("appendix_a.csv")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("PRIOR_SUM"));
}

#[test]
fn stream_skips_malformed_lines() {
    let input = "tick,measure_point,value\n1,MP3,4\n1,MP5,42\n1,MP6,3.5\nthis is not a record\n2,MP6,55\n3,MP4,31\n3,MP7,27.5\n";
    let out = ducg_stdin(&["stream", "--kb", &fx("appendix_a.json")], input);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: line 5"));
    assert_eq!(lines(&out).len(), 3);

    let quiet = ducg_stdin(&["stream", "--kb", &fx("appendix_a.json")], "1,MP3,4\n2,MP5,3\n");
    assert_eq!(quiet.status.code(), Some(0));
    assert!(quiet.stdout.is_empty());
}

#[test]
fn reports_match_the_published_schema() {
    let schema: serde_json::Value = serde_json::from_str(&fixture_text("report.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let runs = [
        ("appendix_a.json", "appendix_a.csv"),
        ("appendix_a_orphan.json", "appendix_a_orphan.csv"),
        ("ningde_synthetic.json", "ningde_cex001po.csv"),
        ("appendix_a.json", "all_normal.csv"),
    ];
    for (kb, signals) in runs {
        let out = ducg(&["replay", "--kb", &fx(kb), "--signals", &fx(signals), "--verbose"]);
        for report in lines(&out) {
            let errors: Vec<String> = validator.iter_errors(&report).map(|e| e.to_string()).collect();
            assert!(errors.is_empty(), "{kb}: {errors:?}");
        }
    }
}

#[test]
fn dot_files_are_named_by_root_and_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = ducg(&[
        "replay",
        "--kb",
        &fx("appendix_a.json"),
        "--signals",
        &fx("appendix_a.csv"),
        "--dot-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        vec!["cubic_B1_t1.dot", "cubic_B1_t2.dot", "cubic_B2_t1.dot", "cubic_B2_t2.dot", "cubic_B2_t3.dot"]
    );
    let t2 = std::fs::read_to_string(dir.path().join("cubic_B2_t2.dot")).unwrap();
    assert_eq!(t2.matches("subgraph cluster_t").count(), 2);
    assert!(t2.contains("\"5_1\" -> \"5_2\" [style=dashed"));
    let t1 = std::fs::read_to_string(dir.path().join("cubic_B1_t1.dot")).unwrap();
    assert!(!t1.contains("dashed"));
    let t3 = std::fs::read_to_string(dir.path().join("cubic_B2_t3.dot")).unwrap();
    for v in ["X4,1", "X5,1", "X6,1", "X7,1"] {
        assert!(t3.contains(v), "{v}");
    }
}

#[test]
fn pretty_output_uses_four_significant_digits() {
    let out = ducg(&["replay", "--kb", &fx("ningde_synthetic.json"), "--signals", &fx("ningde_cex001po.csv"), "--pretty"]);
    let text = stdout(&out);
    assert!(text.contains("0.6094"));
    assert!(text.contains("<1e-5"));
}

#[test]
fn predict_lists_expected_consequences() {
    let out = ducg(&[
        "predict",
        "--kb",
        &fx("appendix_a.json"),
        "--signals",
        &fx("appendix_a.csv"),
        "--root",
        "2",
        "--state",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    // every child is already abnormal at the last tick
    assert!(out.stdout.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let two = dir.path().join("two.csv");
    std::fs::write(&two, "1,MP3,4\n1,MP5,42\n1,MP6,3.5\n2,MP6,55\n").unwrap();
    let out = ducg(&["predict", "--kb", &fx("appendix_a.json"), "--signals", two.to_str().unwrap(), "--root", "2", "--state", "2"]);
    let first = &lines(&out)[0];
    assert_eq!(first["var"], 7);
    assert!((first["probability"].as_f64().unwrap() - 0.8).abs() < 1e-12);

    let out = ducg(&["predict", "--kb", &fx("appendix_a.json"), "--signals", &fx("appendix_a.csv"), "--root", "1", "--state", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_and_compile_round_trip() {
    assert_eq!(ducg(&["validate", &fx("ningde_synthetic.json")]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let merged = dir.path().join("merged.json");
    let out = ducg(&[
        "compile",
        &fx("mutations/conflict_b1.json"),
        &fx("appendix_a.json"),
        "-o",
        merged.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert_eq!(ducg(&["validate", merged.to_str().unwrap()]).status.code(), Some(0));

    let selected = dir.path().join("b2.json");
    let out = ducg(&["compile", &fx("appendix_a.json"), "-o", selected.to_str().unwrap(), "--roots", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&selected).unwrap()).unwrap();
    let ids: Vec<u64> = doc["variables"].as_array().unwrap().iter().map(|v| v["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, vec![2, 4, 5, 6, 7]);
}
