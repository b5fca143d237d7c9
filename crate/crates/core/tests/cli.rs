mod common;

use amc_core::evalharness::read_report;

#[test]
fn baseline_matches_frozen_report() {
    let dir = tempfile::tempdir().unwrap();
    let (code, path) = common::baseline_run(dir.path(), false);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&path).unwrap();
    common::check_golden(common::FROZEN_BASELINE_REPORT, &text).unwrap();
    let r = read_report(&path).unwrap();
    assert_eq!(r.correct, common::FROZEN_BASELINE_CORRECT);
    assert_eq!(r.total, 2000);
}

#[test]
fn mock_instruction_only_run_has_no_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = common::run_amc(&[
        "run-eval",
        "--backend",
        "mock",
        "--mode",
        "is",
        "--test-count",
        "100",
        "--keep-prompts",
        "--run-id",
        "m",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("invalid 0/100"), "{stdout}");
    let transcript = std::fs::read_to_string(dir.path().join("transcript.jsonl")).unwrap();
    for line in transcript.lines().skip(1) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["error"].is_null());
        assert!(!v["prompt"].as_str().unwrap().contains("Example 1:"));
    }
}

#[test]
fn interrupted_run_resumes_to_identical_report() {
    let full = tempfile::tempdir().unwrap();
    let part = tempfile::tempdir().unwrap();
    let args = |d: &std::path::Path| {
        vec![
            "run-eval".to_string(),
            "--backend".into(),
            "mock".into(),
            "--test-count".into(),
            "200".into(),
            "--run-id".into(),
            "r".into(),
            "--output-dir".into(),
            d.to_str().unwrap().to_string(),
        ]
    };
    let run = |d: &std::path::Path| {
        let a = args(d);
        common::run_amc(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    assert_eq!(run(full.path()).0, 0);

    // Keep the header, 80 entries and half of the next line.
    let transcript = std::fs::read_to_string(full.path().join("transcript.jsonl")).unwrap();
    let lines: Vec<&str> = transcript.lines().collect();
    let mut cut = lines[..81].join("\n");
    cut.push('\n');
    cut.push_str(&lines[81][..lines[81].len() / 2]);
    std::fs::write(part.path().join("transcript.jsonl"), cut).unwrap();

    let (code, _, stderr) = run(part.path());
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(
        std::fs::read(full.path().join("run-r.report.json")).unwrap(),
        std::fs::read(part.path().join("run-r.report.json")).unwrap()
    );

    // Replay needs no backend and reproduces the report.
    let (code, _, stderr) = common::run_amc(&["replay", "--run-dir", part.path().to_str().unwrap(), "--run-id", "again"]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(
        std::fs::read(part.path().join("run-r.report.json")).unwrap(),
        std::fs::read(part.path().join("run-again.report.json")).unwrap()
    );
}

#[test]
fn resume_refuses_a_different_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let base = ["run-eval", "--backend", "mock", "--test-count", "20", "--output-dir", d, "--run-id", "x"];
    assert_eq!(common::run_amc(&base).0, 0);
    let mut changed = base.to_vec();
    changed.extend(["--seed", "9"]);
    let (code, _, stderr) = common::run_amc(&changed);
    assert_eq!(code, 3);
    assert!(stderr.contains("--fresh"), "{stderr}");
    changed.push("--fresh");
    assert_eq!(common::run_amc(&changed).0, 0);
}

#[test]
fn baseline_without_exemplars_is_partial() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = common::run_amc(&[
        "run-eval",
        "--backend",
        "baseline",
        "--mode",
        "is",
        "--test-count",
        "20",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(stdout.contains("invalid 20/20"), "{stdout}");
}

#[test]
fn report_combines_runs_into_one_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut inputs = Vec::new();
    for mode in ["is", "icst"] {
        let out = dir.path().join(mode);
        let (code, _, stderr) = common::run_amc(&[
            "run-eval",
            "--backend",
            "mock",
            "--mode",
            mode,
            "--test-count",
            "20",
            "--run-id",
            mode,
            "--output-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{stderr}");
        inputs.push(out.join(format!("run-{mode}.report.json")));
    }
    let md = dir.path().join("table.md");
    let (code, _, stderr) = common::run_amc(&[
        "report",
        "--input",
        inputs[0].to_str().unwrap(),
        "--input",
        inputs[1].to_str().unwrap(),
        "--format",
        "markdown",
        "--out",
        md.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let text = std::fs::read_to_string(&md).unwrap();
    let table: Vec<&str> = text.lines().take_while(|l| l.starts_with('|')).collect();
    assert_eq!(table.len(), 4);
    assert!(table[2].contains("| I+S |") && table[3].contains("| I+C+S |"));
}

#[test]
fn malformed_config_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "this is = = not toml").unwrap();
    let (code, _, _) = common::run_amc(&["run-eval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 3);
}
