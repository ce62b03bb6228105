mod common;

use std::fs;

use common::*;

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = topg(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let o = topg(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("eval-recall"));
}

#[test]
fn appendix_check_reports_all_instances() {
    let o = topg(&["appendix-check", "--trials", "1000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "1000/1000 instances satisfy p_d<0");
}

#[test]
fn missing_ground_truth_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synth(dir.path(), "plain", 3);
    fs::remove_file(seq.join("groundtruth_rect.txt")).unwrap();
    let o = topg(&["eval-recall", "--seq", path(&seq)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("groundtruth_rect.txt"), "{}", stderr(&o));
}

#[test]
fn missing_sequence_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = topg(&["track", "--seq", path(&dir.path().join("absent"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    fs::write(&file, "# tracker cadence\nkappa=5\nlambda=0.2\n").unwrap();
    let o = topg(&["config", "--config", path(&file), "--kappa", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "kappa=10"));
    assert!(text.lines().any(|l| l == "lambda=0.2"));
}

#[test]
fn invalid_configuration_is_rejected() {
    let o = topg(&["config", "--phi", "0.4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("phi must exceed omega"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.cfg");
    fs::write(&file, "kapa=3\n").unwrap();
    let o = topg(&["config", "--config", path(&file)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kapa"));
}

#[test]
fn propose_and_rank_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synth(dir.path(), "plain", 4);
    let proposals = dir.path().join("p.csv");
    let dumps = dir.path().join("resp");
    let o = topg(&[
        "propose", "--seq", path(&seq), "--out", path(&proposals), "--dump-response", path(&dumps),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = parse_csv(&fs::read_to_string(&proposals).unwrap());
    assert_eq!(header, ["frame_id", "x", "y", "w", "h", "rho", "source"]);
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[6] == "frame" || r[6] == "response"));
    let ids: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(ids.into_iter().collect::<Vec<_>>(), ["1", "2", "3", "4"]);
    assert_eq!(fs::read_dir(&dumps).unwrap().count(), 4);

    let ranked = dir.path().join("r.csv");
    let o = topg(&[
        "rank", "--seq", path(&seq), "--proposals", path(&proposals), "--out", path(&ranked),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, ranked_rows) = parse_csv(&fs::read_to_string(&ranked).unwrap());
    assert_eq!(header, ["frame_id", "x", "y", "w", "h", "rho", "source", "s", "c", "z", "a"]);
    assert_eq!(ranked_rows.len(), rows.len());
    for frame in ["1", "2", "3", "4"] {
        let a: Vec<f64> = ranked_rows
            .iter()
            .filter(|r| r[0] == frame)
            .map(|r| r[10].parse().unwrap())
            .collect();
        assert!(a.windows(2).all(|w| w[0] >= w[1]), "frame {frame} not sorted by affinity");
    }
}

#[test]
fn track_outputs_are_valid_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synth(dir.path(), "plain", 6);
    let first = dir.path().join("t1.csv");
    let overlays = dir.path().join("ov");
    let o = topg(&[
        "track", "--seq", path(&seq), "--out", path(&first), "--dump-overlays", path(&overlays),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&first).unwrap();
    assert!(track_csv_valid(&text, 6), "{text}");
    assert_eq!(fs::read_dir(&overlays).unwrap().count(), 6);

    let o = topg(&["track", "--seq", path(&seq)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), text);
}

#[test]
fn evaluation_commands_emit_valid_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "plain", 5);
    let b = synth(dir.path(), "noise", 5);

    let json = dir.path().join("recall.json");
    let o = topg(&[
        "eval-recall", "--seq", path(&a), path(&b), "--budgets", "10,50", "--json", path(&json),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(recall_csv_valid(&stdout(&o), &[10, 50]), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!(recall_json_valid(&v, &[10, 50]), "{v}");
    assert_eq!(v["sequences"].as_array().unwrap().len(), 2);

    let attrs = dir.path().join("attrs.txt");
    fs::write(&attrs, "plain: IV\nnoise: IV, BC\n").unwrap();
    let o = topg(&[
        "eval-tracking", "--seq", path(&a), path(&b), "--attributes", path(&attrs), "--jobs", "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(tracking_json_valid(&v), "{v}");
    assert!(v["attributes"]["BC"].is_object(), "{v}");
}

#[test]
fn synth_suite_writes_twenty_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("suite");
    let o = topg(&["synth", "--kind", "suite", "--out", path(&out), "--length", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.len(), 20);
    assert_eq!(names[0], "seq_01");
    assert!(out.join("seq_20/groundtruth_rect.txt").is_file());
}
