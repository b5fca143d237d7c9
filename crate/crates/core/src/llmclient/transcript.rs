//! JSONL audit log of every prompt and reply. The first line is a header
//! carrying the run's config hash; each following line is one entry. Lines
//! are flushed as they are written so an interrupted run can be resumed.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::modgen::ModClass;

use super::{BackendError, RawResponse};

pub const TRANSCRIPT_FORMAT: &str = "amc-transcript";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub backend: String,
    pub model: String,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_sha256: Option<String>,
}

impl TranscriptHeader {
    pub fn new(config_hash: &str, backend: &str, model: &str, mode: &str) -> Self {
        Self {
            format: TRANSCRIPT_FORMAT.to_string(),
            version: 1,
            config_hash: config_hash.to_string(),
            backend: backend.to_string(),
            model: model.to_string(),
            mode: mode.to_string(),
            dataset_sha256: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub index: usize,
    pub label: ModClass,
    pub snr_db: Option<f64>,
    pub prompt_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub response: Option<String>,
    pub error: Option<BackendError>,
    pub attempts: u32,
    pub latency_ms: f64,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl TranscriptEntry {
    pub fn new(
        index: usize,
        label: ModClass,
        snr_db: Option<f64>,
        prompt: &str,
        keep_prompt: bool,
        raw: &RawResponse,
    ) -> Self {
        Self {
            index,
            label,
            snr_db,
            prompt_sha256: sha256_hex(prompt),
            prompt: keep_prompt.then(|| prompt.to_string()),
            response: raw.text().map(str::to_owned),
            error: raw.error().cloned(),
            attempts: raw.attempts,
            latency_ms: raw.latency.as_secs_f64() * 1000.0,
        }
    }

    pub fn to_raw(&self) -> RawResponse {
        let outcome = match (&self.response, &self.error) {
            (_, Some(e)) => Err(e.clone()),
            (Some(t), None) => Ok(t.clone()),
            (None, None) => Err(BackendError::Malformed {
                message: "transcript entry has neither response nor error".into(),
            }),
        };
        RawResponse {
            outcome,
            latency: std::time::Duration::from_secs_f64(self.latency_ms.max(0.0) / 1000.0),
            attempts: self.attempts,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TranscriptError {
    #[error("transcript I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("transcript JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("transcript header is missing or invalid")]
    Header,
    #[error("line {line} is malformed: {message}")]
    Line { line: usize, message: String },
}

/// Thread-safe appending writer.
pub struct TranscriptWriter {
    out: Mutex<BufWriter<File>>,
}

impl TranscriptWriter {
    /// Truncates `path` and writes the header.
    pub fn create(path: &Path, header: &TranscriptHeader) -> Result<Self, TranscriptError> {
        let file = File::create(path)?;
        let w = Self {
            out: Mutex::new(BufWriter::new(file)),
        };
        w.write_line(&serde_json::to_string(header)?)?;
        Ok(w)
    }

    /// Opens an existing transcript for appending. A truncated last line is
    /// cut off first so new entries start on a fresh line.
    pub fn append(path: &Path, valid_len: u64) -> Result<Self, TranscriptError> {
        let file = OpenOptions::new().write(true).open(path)?;
        file.set_len(valid_len)?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self {
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    fn write_line(&self, line: &str) -> Result<(), TranscriptError> {
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn write(&self, entry: &TranscriptEntry) -> Result<(), TranscriptError> {
        self.write_line(&serde_json::to_string(entry)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTranscript {
    pub header: TranscriptHeader,
    pub entries: Vec<TranscriptEntry>,
    /// Byte length of the well-formed prefix.
    pub valid_len: u64,
    /// True if the final line was incomplete and dropped.
    pub truncated_tail: bool,
}

/// Reads a transcript. A malformed final line (an interrupted write) is
/// dropped; a malformed line anywhere else is an error.
pub fn read_transcript(path: &Path) -> Result<LoadedTranscript, TranscriptError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut lines: Vec<(String, u64, bool)> = Vec::new();
    let mut offset = 0u64;
    loop {
        let mut buf = String::new();
        let n = reader.read_line(&mut buf)?;
        if n == 0 {
            break;
        }
        offset += n as u64;
        let complete = buf.ends_with('\n');
        lines.push((buf.trim_end_matches(['\n', '\r']).to_string(), offset, complete));
    }
    let (first, first_end, _) = lines.first().ok_or(TranscriptError::Header)?;
    let header: TranscriptHeader = serde_json::from_str(first).map_err(|_| TranscriptError::Header)?;
    if header.format != TRANSCRIPT_FORMAT {
        return Err(TranscriptError::Header);
    }
    let mut entries = Vec::new();
    let mut valid_len = *first_end;
    let mut truncated_tail = false;
    let last = lines.len() - 1;
    for (i, (text, end, complete)) in lines.iter().enumerate().skip(1) {
        if text.trim().is_empty() {
            valid_len = *end;
            continue;
        }
        match serde_json::from_str::<TranscriptEntry>(text) {
            Ok(e) if *complete || i < last => {
                entries.push(e);
                valid_len = *end;
            }
            Ok(_) | Err(_) if i == last => truncated_tail = true,
            Err(e) => {
                return Err(TranscriptError::Line {
                    line: i + 1,
                    message: e.to_string(),
                })
            }
            Ok(_) => unreachable!("complete or non-last lines are accepted above"),
        }
    }
    Ok(LoadedTranscript {
        header,
        entries,
        valid_len,
        truncated_tail,
    })
}
