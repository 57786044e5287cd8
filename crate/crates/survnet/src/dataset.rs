//! On-disk dataset layout.
//!
//! ```text
//! <dir>/train/records.tsv   id, time, event, label, true_log_hazard, nodule_size
//! <dir>/train/pixels.bin    raw u8 pixels, HWC per image, images in record order
//! <dir>/train/dataset.json  image shape and generator provenance
//! <dir>/test/...            same three files
//! ```
//!
//! Times are written with the shortest representation that parses back to
//! the same `f64`, so a save/load roundtrip is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use survnet_core::datagen::{Images, Provenance, SurvivalDataset};
use survnet_core::survival::SurvivalRecord;

use crate::error::{Error, Result};

pub const RECORDS_HEADER: &str = "id\ttime\tevent\tlabel\ttrue_log_hazard\tnodule_size";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub records: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub generator: String,
    pub seed: u64,
    pub params: Vec<(String, String)>,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn records_to_tsv(records: &[SurvivalRecord]) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.id,
            r.time,
            r.event as u8,
            r.label as u8,
            opt(r.true_log_hazard),
            opt(r.nodule_size)
        );
    }
    out
}

pub fn records_from_tsv(text: &str) -> std::result::Result<Vec<SurvivalRecord>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(RECORDS_HEADER) {
        return Err("missing or unexpected header line".into());
    }
    let flag = |s: &str, line: usize| match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(format!("line {line}: expected 0 or 1, got {s:?}")),
    };
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(format!("line {n}: expected 6 fields, got {}", f.len()));
        }
        let bad = |what: &str| format!("line {n}: bad {what}");
        let mut r = SurvivalRecord::new(
            f[0].parse().map_err(|_| bad("id"))?,
            f[1].parse().map_err(|_| bad("time"))?,
            flag(f[2], n)?,
            flag(f[3], n)?,
        );
        if !f[4].is_empty() {
            r.true_log_hazard = Some(f[4].parse().map_err(|_| bad("true_log_hazard"))?);
        }
        if !f[5].is_empty() {
            r.nodule_size = Some(f[5].parse().map_err(|_| bad("nodule_size"))?);
        }
        r.validate().map_err(|e| format!("line {n}: {e}"))?;
        out.push(r);
    }
    Ok(out)
}

pub fn save_split(dir: &Path, data: &SurvivalDataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let meta = DatasetMeta {
        records: data.len(),
        height: data.images.height,
        width: data.images.width,
        channels: data.images.channels,
        generator: data.provenance.generator.clone(),
        seed: data.provenance.seed,
        params: data.provenance.params.clone(),
    };
    let p = dir.join("records.tsv");
    fs::write(&p, records_to_tsv(&data.records)).map_err(Error::io(&p))?;
    let p = dir.join("pixels.bin");
    fs::write(&p, &data.images.pixels).map_err(Error::io(&p))?;
    let p = dir.join("dataset.json");
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&p, json + "\n").map_err(Error::io(&p))
}

pub fn load_split(dir: &Path) -> Result<SurvivalDataset> {
    let p = dir.join("dataset.json");
    let text = fs::read_to_string(&p).map_err(Error::io(&p))?;
    let meta: DatasetMeta = serde_json::from_str(&text).map_err(|e| Error::format(&p, e))?;
    let p = dir.join("records.tsv");
    let text = fs::read_to_string(&p).map_err(Error::io(&p))?;
    let records = records_from_tsv(&text).map_err(|e| Error::format(&p, e))?;
    if records.len() != meta.records {
        return Err(Error::format(
            &p,
            format!("{} records, metadata says {}", records.len(), meta.records),
        ));
    }
    let p = dir.join("pixels.bin");
    let pixels = fs::read(&p).map_err(Error::io(&p))?;
    let images =
        Images::from_pixels(meta.height, meta.width, meta.channels, pixels).map_err(|e| Error::format(&p, e))?;
    let data = SurvivalDataset {
        records,
        images,
        provenance: Provenance {
            generator: meta.generator,
            seed: meta.seed,
            params: meta.params,
        },
    };
    if data.images.len() != data.len() {
        return Err(Error::format(
            &p,
            format!("{} images for {} records", data.images.len(), data.len()),
        ));
    }
    Ok(data)
}

pub fn save(dir: &Path, train: &SurvivalDataset, test: &SurvivalDataset) -> Result<()> {
    save_split(&dir.join("train"), train)?;
    save_split(&dir.join("test"), test)
}

pub fn load(dir: &Path) -> Result<(SurvivalDataset, SurvivalDataset)> {
    Ok((load_split(&dir.join("train"))?, load_split(&dir.join("test"))?))
}

/// Per-group record count, mean time and censoring rate.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub label: bool,
    pub count: usize,
    pub mean_time: f64,
    pub censored_rate: f64,
}

pub fn group_stats(records: &[SurvivalRecord]) -> Vec<GroupStats> {
    [false, true]
        .into_iter()
        .filter_map(|label| {
            let g: Vec<_> = records.iter().filter(|r| r.label == label).collect();
            (!g.is_empty()).then(|| GroupStats {
                label,
                count: g.len(),
                mean_time: g.iter().map(|r| r.time).sum::<f64>() / g.len() as f64,
                censored_rate: g.iter().filter(|r| !r.event).count() as f64 / g.len() as f64,
            })
        })
        .collect()
}
