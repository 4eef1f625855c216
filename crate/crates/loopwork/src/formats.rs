//! On-disk formats.
//!
//! A sequence file is line-delimited JSON: a header object with `n`,
//! `frame_rate` and `id`, then one frame per line as a flat array of reals.
//! Everything else (ground truth, predictions, mined workflows, reports) is a
//! single pretty-printed JSON document.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use loopwork_core::FeatureSequence;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SEQUENCE_EXT: &str = "jsonl";
pub const TRUTH_SUFFIX: &str = ".gt.json";
pub const PREDICTION_SUFFIX: &str = ".pred.json";
pub const MINED_SUFFIX: &str = ".mined.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    id: String,
    n: usize,
    frame_rate: f64,
}

pub fn read_sequence(path: &Path) -> Result<FeatureSequence, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::read(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header: Header = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(|e| CliError::read(path, e))?;
            serde_json::from_str(&line).map_err(|e| CliError::data(format!("{}:1: bad header: {e}", path.display())))?
        }
        None => return Err(CliError::data(format!("{}: empty sequence file", path.display()))),
    };
    let mut frames = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| CliError::read(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: Vec<f64> = serde_json::from_str(&line)
            .map_err(|e| CliError::data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if frame.len() != header.n {
            return Err(CliError::data(format!(
                "{}:{}: expected {} values, found {}",
                path.display(),
                i + 1,
                header.n,
                frame.len()
            )));
        }
        frames.push(frame);
    }
    FeatureSequence::new(header.id, frames, header.frame_rate)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn sequence_to_string(seq: &FeatureSequence) -> String {
    let header = Header { id: seq.id().to_string(), n: seq.dim(), frame_rate: seq.frame_rate() };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for frame in seq.frames() {
        out.push_str(&serde_json::to_string(frame).expect("finite frame serializes"));
        out.push('\n');
    }
    out
}

pub fn write_sequence(path: &Path, seq: &FeatureSequence) -> Result<(), CliError> {
    write_atomic(path, sequence_to_string(seq).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().ok_or_else(|| CliError::usage(format!("{}: not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::write(path, e)
    })
}

/// Files in `dir` whose name ends with `suffix`, sorted by name.
pub fn list_with_suffix(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::read(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::read(dir, e))?.path();
        let matches = path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(suffix));
        if matches && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// The part of a file name before `suffix`.
pub fn stem(path: &Path, suffix: &str) -> Option<String> {
    path.file_name()?.to_str()?.strip_suffix(suffix).map(str::to_string)
}
