//! Metric history as CSV and JSON lines.

use std::fmt::Write as _;

use serde::Serialize;
use survnet_core::train::EpochMetrics;

pub const CSV_HEADER: &str = "epoch,train_loss,test_loss,auc,c1,c2,seconds,skipped_batches";

fn field(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn csv_row(m: &EpochMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        m.epoch,
        m.train_loss,
        m.test_loss,
        field(m.auc),
        field(m.c1),
        field(m.c2),
        field(m.seconds),
        m.skipped_batches
    )
}

pub fn to_csv(history: &[EpochMetrics]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for m in history {
        out.push_str(&csv_row(m));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Row {
    epoch: usize,
    train_loss: f64,
    test_loss: f64,
    auc: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    seconds: Option<f64>,
    skipped_batches: usize,
}

pub fn to_jsonl(history: &[EpochMetrics]) -> String {
    let mut out = String::new();
    for m in history {
        let row = Row {
            epoch: m.epoch,
            train_loss: m.train_loss,
            test_loss: m.test_loss,
            auc: m.auc,
            c1: m.c1,
            c2: m.c2,
            seconds: m.seconds,
            skipped_batches: m.skipped_batches,
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&row).expect("row serializes"));
    }
    out
}

/// Parses a CSV written by [`to_csv`].
pub fn from_csv(text: &str) -> Result<Vec<EpochMetrics>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err("unexpected CSV header".into());
    }
    let opt = |s: &str| -> Result<Option<f64>, String> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| format!("bad number {s:?}"))
        }
    };
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(format!("expected 8 fields in {line:?}"));
            }
            Ok(EpochMetrics {
                epoch: f[0].parse().map_err(|_| format!("bad epoch {:?}", f[0]))?,
                train_loss: opt(f[1])?.ok_or("missing train_loss")?,
                test_loss: opt(f[2])?.ok_or("missing test_loss")?,
                auc: opt(f[3])?,
                c1: opt(f[4])?,
                c2: opt(f[5])?,
                seconds: opt(f[6])?,
                skipped_batches: f[7].parse().map_err(|_| format!("bad count {:?}", f[7]))?,
            })
        })
        .collect()
}
