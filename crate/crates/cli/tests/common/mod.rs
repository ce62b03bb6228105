#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn topg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topg"))
        .args(args)
        .env("TOPG_NO_PARALLEL", "1")
        .output()
        .expect("topg binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Write a short synthetic sequence in OTB layout and return its directory.
pub fn synth(dir: &Path, kind: &str, length: usize) -> std::path::PathBuf {
    let out = dir.join(kind);
    let o = topg(&["synth", "--kind", kind, "--out", path(&out), "--length", &length.to_string()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    out
}

/// Header and rows of a CSV document, checking every row has the header's
/// width.
pub fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    let rows: Vec<Vec<String>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    assert!(rows.iter().all(|r| r.len() == header.len()));
    (header, rows)
}

/// Whether a `track` CSV has the expected columns, consecutive 1-based
/// frame ids, positive sizes, finite scores and 0/1 lost flags.
pub fn track_csv_valid(text: &str, frames: usize) -> bool {
    let (header, rows) = parse_csv(text);
    header == ["frame_id", "x", "y", "w", "h", "score", "lost"]
        && rows.len() == frames
        && rows.iter().enumerate().all(|(i, r)| {
            r[0].parse::<usize>() == Ok(i + 1)
                && r[1].parse::<i32>().is_ok()
                && r[2].parse::<i32>().is_ok()
                && r[3].parse::<i32>().is_ok_and(|w| w > 0)
                && r[4].parse::<i32>().is_ok_and(|h| h > 0)
                && r[5].parse::<f64>().is_ok_and(f64::is_finite)
                && (r[6] == "0" || r[6] == "1")
        })
}

/// Whether an `eval-recall` CSV lists each budget once with a recall in
/// [0, 1].
pub fn recall_csv_valid(text: &str, budgets: &[usize]) -> bool {
    let (header, rows) = parse_csv(text);
    header == ["budget", "recall"]
        && rows.len() == budgets.len()
        && rows.iter().zip(budgets).all(|(r, b)| {
            r[0].parse::<usize>() == Ok(*b)
                && r[1].parse::<f64>().is_ok_and(|v| (0.0..=1.0).contains(&v))
        })
}

pub fn unit(v: &serde_json::Value) -> bool {
    v.as_f64().is_some_and(|x| (0.0..=1.0).contains(&x))
}

/// Whether an `eval-recall` JSON summary has the expected shape.
pub fn recall_json_valid(v: &serde_json::Value, budgets: &[usize]) -> bool {
    let listed: Option<Vec<u64>> = v["budgets"]
        .as_array()
        .map(|a| a.iter().filter_map(|b| b.as_u64()).collect());
    let per_budget = |x: &serde_json::Value| {
        x.as_array().is_some_and(|a| a.len() == budgets.len() && a.iter().all(unit))
    };
    listed == Some(budgets.iter().map(|&b| b as u64).collect())
        && unit(&v["iou_threshold"])
        && per_budget(&v["mean_recall"])
        && v["sequences"].as_array().is_some_and(|s| {
            !s.is_empty()
                && s.iter().all(|q| {
                    q["name"].is_string() && q["frames"].as_u64().is_some() && per_budget(&q["recall"])
                })
        })
}

/// Whether an `eval-tracking` JSON summary has the expected shape.
pub fn tracking_json_valid(v: &serde_json::Value) -> bool {
    let scores = |x: &serde_json::Value| {
        unit(&x["dp"]) && unit(&x["success_rate"]) && unit(&x["success_auc"])
    };
    scores(v)
        && v["sequences"]
            .as_array()
            .is_some_and(|s| !s.is_empty() && s.iter().all(|q| q["name"].is_string() && scores(q)))
}
