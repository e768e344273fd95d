//! eWINE-style CSV ingestion and the reproducible 5:2 train/test split.
//!
//! A record carries a binary channel-state label (0 = LOS, 1 = NLOS), the
//! named RF diagnostic registers, the CIR amplitude block, and the
//! first-path index into it. The CIR block is located by column-name prefix
//! and its length is taken from the header, not hard-coded, so dataset
//! revisions with a different column count still parse. Rows that fail
//! validation are rejected with an error rather than silently dropped.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seeds::derive_seed;

/// One dataset record.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Stable record identity: parse order across the input files.
    pub id: usize,
    /// 0 = LOS, 1 = NLOS.
    pub label: u8,
    /// Every non-CIR, non-label column by name.
    pub rf_raw: BTreeMap<String, f64>,
    /// CIR amplitude sequence (accumulator counts).
    pub cir: Vec<f64>,
    /// Index of the first-path peak into `cir`.
    pub fp_idx: usize,
}

/// Column-name mapping for the CSV layout.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Schema {
    /// Label column (NLOS flag).
    pub label: String,
    /// First-path index column.
    pub fp_idx: String,
    /// Columns named as this prefix plus a bare tap index (`CIR0`,
    /// `CIR1`, …) form the CIR block.
    pub cir_prefix: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            label: "NLOS".into(),
            fp_idx: "FP_IDX".into(),
            cir_prefix: "CIR".into(),
        }
    }
}

/// Provenance of one parsed file, recorded into the run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: PathBuf,
    pub sha256: String,
    pub rows: usize,
}

/// A parsed dataset: samples plus the header needed to write records back
/// out in the original column order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub header: Vec<String>,
    pub files: Vec<SourceFile>,
}

/// Train/test partition. Every input record lands in exactly one side.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

struct ColumnLayout {
    label: usize,
    fp_idx: usize,
    cir_range: std::ops::Range<usize>,
}

fn resolve_layout(header: &[String], schema: &Schema) -> Result<ColumnLayout> {
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
    };
    let label = find(&schema.label)?;
    let fp_idx = find(&schema.fp_idx)?;

    // A CIR column is the prefix followed by a bare tap index — `CIR0`,
    // `CIR1`, … — which keeps registers like `CIR_PWR` out of the block.
    let is_cir = |h: &str| {
        h.strip_prefix(&schema.cir_prefix)
            .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
    };
    let cir_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| is_cir(h))
        .map(|(i, _)| i)
        .collect();
    if cir_cols.is_empty() {
        return Err(Error::MissingColumn {
            column: format!("{}*", schema.cir_prefix),
        });
    }
    let start = cir_cols[0];
    let end = *cir_cols.last().unwrap() + 1;
    if cir_cols.len() != end - start {
        return Err(Error::Format(format!(
            "CIR columns with prefix '{}' are not contiguous in the header",
            schema.cir_prefix
        )));
    }
    if label >= start && label < end || fp_idx >= start && fp_idx < end {
        return Err(Error::Format(
            "label/fp_idx columns overlap the CIR block".into(),
        ));
    }
    Ok(ColumnLayout {
        label,
        fp_idx,
        cir_range: start..end,
    })
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let trimmed = raw.trim();
    trimmed
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::NonNumericCell {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        })
}

/// Parse one CSV file. Row order is preserved; `first_id` seeds the record
/// identity counter so multi-file parses keep ids unique.
pub fn parse_dataset(path: &Path, schema: &Schema) -> Result<Dataset> {
    parse_with_ids(path, schema, 0)
}

fn parse_with_ids(path: &Path, schema: &Schema, first_id: usize) -> Result<Dataset> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut bytes = Vec::new();
    File::open(path)
        .map_err(io_err)?
        .read_to_end(&mut bytes)
        .map_err(io_err)?;
    let sha256 = hex::encode(Sha256::digest(&bytes));

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(bytes.as_slice()));
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let layout = resolve_layout(&header, schema)?;
    let cir_len = layout.cir_range.len();

    let mut samples = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_idx + 2; // 1-based, after the header line
        if record.len() != header.len() {
            return Err(Error::Format(format!(
                "row {row}: {} cells, header has {}",
                record.len(),
                header.len()
            )));
        }

        let label_val = parse_cell(&record[layout.label], row, &schema.label)?;
        let label = if label_val == 0.0 {
            0u8
        } else if label_val == 1.0 {
            1u8
        } else {
            return Err(Error::Format(format!(
                "row {row}: label must be 0 or 1, got {label_val}"
            )));
        };

        let fp_val = parse_cell(&record[layout.fp_idx], row, &schema.fp_idx)?;
        if fp_val < 0.0 || fp_val.fract() != 0.0 || fp_val as usize >= cir_len {
            return Err(Error::Format(format!(
                "row {row}: fp_idx {fp_val} outside [0, {cir_len})"
            )));
        }
        let fp_idx = fp_val as usize;

        let mut cir = Vec::with_capacity(cir_len);
        for col in layout.cir_range.clone() {
            cir.push(parse_cell(&record[col], row, &header[col])?);
        }

        let mut rf_raw = BTreeMap::new();
        for (col, name) in header.iter().enumerate() {
            if col == layout.label || layout.cir_range.contains(&col) {
                continue;
            }
            rf_raw.insert(name.clone(), parse_cell(&record[col], row, name)?);
        }

        samples.push(Sample {
            id: first_id + row_idx,
            label,
            rf_raw,
            cir,
            fp_idx,
        });
    }

    let rows = samples.len();
    Ok(Dataset {
        samples,
        header,
        files: vec![SourceFile {
            path: path.to_path_buf(),
            sha256,
            rows,
        }],
    })
}

/// Parse and concatenate several CSV files sharing one layout.
pub fn parse_files(paths: &[PathBuf], schema: &Schema) -> Result<Dataset> {
    if paths.is_empty() {
        return Err(Error::Config("no dataset files given".into()));
    }
    let mut merged: Option<Dataset> = None;
    for path in paths {
        let next_id = merged.as_ref().map_or(0, |d| d.samples.len());
        let part = parse_with_ids(path, schema, next_id)?;
        match &mut merged {
            None => merged = Some(part),
            Some(acc) => {
                if part.header != acc.header {
                    return Err(Error::Format(format!(
                        "{}: header differs from {}",
                        path.display(),
                        acc.files[0].path.display()
                    )));
                }
                acc.samples.extend(part.samples);
                acc.files.extend(part.files);
            }
        }
    }
    Ok(merged.unwrap())
}

/// Write samples back out as CSV in the stored header order. Re-parsing the
/// result yields field-identical records.
pub fn write_csv<W: Write>(dataset: &Dataset, schema: &Schema, out: W) -> Result<()> {
    let layout = resolve_layout(&dataset.header, schema)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&dataset.header)?;
    let mut row: Vec<String> = Vec::with_capacity(dataset.header.len());
    for sample in &dataset.samples {
        row.clear();
        for (col, name) in dataset.header.iter().enumerate() {
            let cell = if col == layout.label {
                sample.label.to_string()
            } else if layout.cir_range.contains(&col) {
                sample.cir[col - layout.cir_range.start].to_string()
            } else {
                sample
                    .rf_raw
                    .get(name)
                    .ok_or_else(|| Error::MissingRegister(name.clone()))?
                    .to_string()
            };
            row.push(cell);
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<writer>"),
        source,
    })?;
    Ok(())
}

fn take_ratio(n: usize) -> usize {
    // round(5n/7) without going through floats
    (10 * n + 7) / 14
}

/// Deterministic 5:2 split. When `stratified`, each class is split 5:2
/// independently (within ±1 record), which is the default the evaluation
/// harness uses.
pub fn split_dataset(samples: &[Sample], seed: u64, stratified: bool) -> Result<DatasetSplit> {
    if samples.len() < 7 {
        return Err(Error::InsufficientData(format!(
            "need at least 7 samples to split 5:2, got {}",
            samples.len()
        )));
    }
    let groups: Vec<Vec<usize>> = if stratified {
        let mut by_class = vec![Vec::new(), Vec::new()];
        for (i, s) in samples.iter().enumerate() {
            by_class[s.label as usize].push(i);
        }
        by_class.into_iter().filter(|g| !g.is_empty()).collect()
    } else {
        vec![(0..samples.len()).collect()]
    };

    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (class, mut group) in groups.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, class as u64]));
        group.shuffle(&mut rng);
        let cut = take_ratio(group.len());
        train_idx.extend_from_slice(&group[..cut]);
        test_idx.extend_from_slice(&group[cut..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    Ok(DatasetSplit {
        train: train_idx.iter().map(|&i| samples[i].clone()).collect(),
        test: test_idx.iter().map(|&i| samples[i].clone()).collect(),
    })
}

/// Deterministically cap a sample list at `max` records, keeping the class
/// balance. Used when a full-size dataset would blow the runtime budget;
/// the cap is recorded in the manifest.
pub fn subsample_stratified(samples: &[Sample], max: usize, seed: u64) -> Vec<Sample> {
    if samples.len() <= max {
        return samples.to_vec();
    }
    let mut by_class = vec![Vec::new(), Vec::new()];
    for (i, s) in samples.iter().enumerate() {
        by_class[s.label as usize].push(i);
    }
    let total = samples.len();
    let mut keep = Vec::new();
    for (class, mut group) in by_class.into_iter().enumerate() {
        if group.is_empty() {
            continue;
        }
        let quota = (group.len() * max + total / 2) / total;
        let quota = quota.min(group.len()).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0x5358, class as u64]));
        group.shuffle(&mut rng);
        keep.extend_from_slice(&group[..quota]);
    }
    keep.sort_unstable();
    keep.truncate(max);
    keep.into_iter().map(|i| samples[i].clone()).collect()
}
