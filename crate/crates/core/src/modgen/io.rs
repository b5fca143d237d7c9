//! JSON-lines dataset files.
//!
//! Line 1 is a header carrying the protocol and synthesis recipe. Every other
//! line is one record with inline `i`/`q` arrays, or with an `offset` into a
//! little-endian f32 sidecar holding interleaved I/Q pairs.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ComplexSignal, DatasetProtocol, ModClass, SignalRecord, SnrSpec, Split};

pub const DATASET_FORMAT: &str = "amc-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DatasetIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: missing or malformed header: {message}")]
    Header { path: PathBuf, message: String },
    #[error("json encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetIoError + '_ {
    move |source| DatasetIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub samples_per_symbol: usize,
    pub pulse_shaping: String,
    pub normalization: String,
    pub noise: String,
    pub exemplar_count: usize,
    pub test_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<String>,
    pub protocol: DatasetProtocol,
}

impl DatasetHeader {
    pub fn for_protocol(protocol: &DatasetProtocol, sidecar: Option<String>) -> Self {
        let w = &protocol.waveform;
        Self {
            format: DATASET_FORMAT.to_string(),
            version: DATASET_VERSION,
            samples_per_symbol: w.samples_per_symbol,
            pulse_shaping: format!(
                "linear: root-raised-cosine rolloff {} span {} symbols, gray mapping; \
                 CPFSK h={}; GFSK BT={} h={}; GMSK BT={} h=0.5; ASK levels {:?}",
                w.rrc_rolloff, w.rrc_span_symbols, w.cpfsk_index, w.gfsk_bt, w.gfsk_index, w.gmsk_bt, w.ask_levels
            ),
            normalization: "unit average power before noise".to_string(),
            noise: "circular complex gaussian scaled to measured signal power".to_string(),
            exemplar_count: protocol.exemplar_count(),
            test_count: protocol.test_count,
            sidecar,
            protocol: protocol.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordLine {
    label: ModClass,
    snr_db: Option<f64>,
    seed: u64,
    split: Split,
    index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    i: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<Vec<f64>>,
    /// Sample offset into the sidecar (in complex samples).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
}

/// Sidecar path used for a given JSONL path.
pub fn sidecar_path(jsonl: &Path) -> PathBuf {
    jsonl.with_extension("bin")
}

/// Writes `records` under `protocol`. With `sidecar`, samples go to a `.bin`
/// file next to `path` and the JSONL holds offsets.
pub fn write_dataset(
    path: &Path,
    protocol: &DatasetProtocol,
    records: &[SignalRecord],
    sidecar: bool,
) -> Result<(), DatasetIoError> {
    let bin_path = sidecar.then(|| sidecar_path(path));
    let sidecar_name = bin_path
        .as_ref()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned());
    let header = DatasetHeader::for_protocol(protocol, sidecar_name);

    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut bin = match &bin_path {
        Some(p) => Some((BufWriter::new(File::create(p).map_err(io_err(p))?), p.clone())),
        None => None,
    };

    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n").map_err(io_err(path))?;

    let mut offset = 0u64;
    for record in records {
        let s = &record.signal;
        let mut line = RecordLine {
            label: s.label,
            snr_db: s.snr.db(),
            seed: s.seed,
            split: record.split,
            index: record.index,
            i: None,
            q: None,
            offset: None,
            n: None,
        };
        match bin.as_mut() {
            Some((w, p)) => {
                for x in &s.samples {
                    w.write_all(&(x.re as f32).to_le_bytes()).map_err(io_err(p))?;
                    w.write_all(&(x.im as f32).to_le_bytes()).map_err(io_err(p))?;
                }
                line.offset = Some(offset);
                line.n = Some(s.len());
                offset += s.len() as u64;
            }
            None => {
                line.i = Some(s.samples.iter().map(|x| x.re).collect());
                line.q = Some(s.samples.iter().map(|x| x.im).collect());
            }
        }
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))?;
    if let Some((mut w, p)) = bin {
        w.flush().map_err(io_err(&p))?;
    }
    Ok(())
}

/// A record line that could not be decoded.
#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    /// 1-based physical line number; the header is line 1.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub header: DatasetHeader,
    pub records: Vec<SignalRecord>,
    pub errors: Vec<LineError>,
}

impl LoadedDataset {
    pub fn exemplars(&self) -> impl Iterator<Item = &SignalRecord> {
        self.records.iter().filter(|r| r.split == Split::Exemplar)
    }

    pub fn tests(&self) -> impl Iterator<Item = &SignalRecord> {
        self.records.iter().filter(|r| r.split == Split::Test)
    }
}

/// Reads a dataset. Malformed record lines are collected in `errors` and skipped.
pub fn read_dataset(path: &Path) -> Result<LoadedDataset, DatasetIoError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut lines = reader.lines();

    let header_line = lines
        .next()
        .transpose()
        .map_err(io_err(path))?
        .ok_or_else(|| DatasetIoError::Header {
            path: path.to_path_buf(),
            message: "empty file".into(),
        })?;
    let header: DatasetHeader = serde_json::from_str(&header_line).map_err(|e| DatasetIoError::Header {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if header.format != DATASET_FORMAT {
        return Err(DatasetIoError::Header {
            path: path.to_path_buf(),
            message: format!("unexpected format `{}`", header.format),
        });
    }

    let sidecar = match &header.sidecar {
        Some(name) => {
            let p = path.with_file_name(name);
            let mut bytes = Vec::new();
            File::open(&p)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(io_err(&p))?;
            Some(bytes)
        }
        None => None,
    };

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (k, line) in lines.enumerate() {
        let line_no = k + 2;
        let text = line.map_err(io_err(path))?;
        if text.trim().is_empty() {
            continue;
        }
        match decode_record(&text, sidecar.as_deref()) {
            Ok(r) => records.push(r),
            Err(message) => errors.push(LineError { line: line_no, message }),
        }
    }
    Ok(LoadedDataset { header, records, errors })
}

fn decode_record(text: &str, sidecar: Option<&[u8]>) -> Result<SignalRecord, String> {
    let line: RecordLine = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let samples: Vec<Complex64> = match (&line.i, &line.q, line.offset, line.n) {
        (Some(i), Some(q), _, _) => {
            if i.len() != q.len() {
                return Err(format!("i/q length mismatch ({} vs {})", i.len(), q.len()));
            }
            i.iter().zip(q).map(|(&re, &im)| Complex64::new(re, im)).collect()
        }
        (None, None, Some(offset), Some(n)) => {
            let bytes = sidecar.ok_or("record references a sidecar but the header names none")?;
            let start = offset as usize * 8;
            let end = start + n * 8;
            let chunk = bytes.get(start..end).ok_or("sidecar offset out of range")?;
            chunk
                .chunks_exact(8)
                .map(|c| {
                    let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                    let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                    Complex64::new(re as f64, im as f64)
                })
                .collect()
        }
        _ => return Err("record has neither i/q arrays nor a sidecar offset".into()),
    };
    if samples.is_empty() {
        return Err("record has no samples".into());
    }
    if samples.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err("record contains non-finite samples".into());
    }
    Ok(SignalRecord {
        split: line.split,
        index: line.index,
        signal: ComplexSignal {
            samples,
            label: line.label,
            snr: SnrSpec::from(line.snr_db),
            seed: line.seed,
        },
    })
}
