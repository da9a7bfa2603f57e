//! File formats: JSONL records, the corpus file, and the binary embeddings
//! file (header of two 64-bit little-endian integers N and d, then row-major
//! 64-bit floats for images then texts).

use crate::error::CliError;
use ndarray::Array2;
use semalign::report::Finding;
use semalign::synth::SubjectRecord;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One pseudo-report record: the text and its gold finding items.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRecord {
    pub text: String,
    pub gold: Vec<Finding>,
}

/// One parser output record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PredictionRecord {
    Ok { findings: Vec<Finding> },
    ParseFailure,
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line)
            .map_err(|e| CliError::format(path, format!("line {}: {e}", lineno + 1)))?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CliError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serialization cannot fail"));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_text(
        path,
        &serde_json::to_string_pretty(value).expect("serialization cannot fail"),
    )
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e))
}

pub fn load_corpus(path: &Path) -> Result<Vec<SubjectRecord>, CliError> {
    read_jsonl(path)
}

/// Reads the binary embeddings file into (images, texts) matrices.
pub fn read_embeddings(path: &Path) -> Result<(Array2<f64>, Array2<f64>), CliError> {
    let data = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    if data.len() < 16 {
        return Err(CliError::format(path, "missing N,d header"));
    }
    let n = u64::from_le_bytes(data[0..8].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(data[8..16].try_into().unwrap()) as usize;
    let expected = 16 + 2 * n * d * 8;
    if data.len() != expected {
        return Err(CliError::format(
            path,
            format!("expected {expected} bytes for N={n}, d={d}, got {}", data.len()),
        ));
    }
    let read_matrix = |offset: usize| {
        let mut values = Vec::with_capacity(n * d);
        for k in 0..n * d {
            let at = offset + 8 * k;
            values.push(f64::from_le_bytes(data[at..at + 8].try_into().unwrap()));
        }
        Array2::from_shape_vec((n, d), values).expect("sized above")
    };
    let images = read_matrix(16);
    let texts = read_matrix(16 + n * d * 8);
    Ok((images, texts))
}

