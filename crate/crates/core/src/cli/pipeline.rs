//! The evaluation pipeline behind `run-eval` and `replay`.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::evalharness::report::emit_all;
use crate::evalharness::{outcomes_from_transcript, score, EvalReport, RunMetadata};
use crate::llmclient::transcript::{read_transcript, TranscriptEntry, TranscriptHeader, TranscriptWriter};
use crate::llmclient::{classify_batch, make_backend, BatchProgress, PromptRequest};
use crate::modgen::io::read_dataset;
use crate::modgen::{make_dataset, ModClass, SignalRecord, Split};
use crate::promptkit::{build_prompt, Exemplar, PromptMode};
use crate::stats::{summarize_with, StatSummary, SummaryConfig};

use super::config::RunConfig;

pub const CONFIG_FILE: &str = "config.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";

/// Records to evaluate, with the protocol they came from.
pub struct Dataset {
    pub records: Vec<SignalRecord>,
    pub sha256: Option<String>,
}

/// Loads `path`, or generates from `cfg.protocol` when `path` is `None`. A
/// loaded file's protocol replaces the configured one.
pub fn obtain_dataset(cfg: &mut RunConfig, path: Option<&Path>) -> Result<Dataset> {
    match path {
        Some(p) => {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            let loaded = read_dataset(p)?;
            for e in &loaded.errors {
                log::error!("{}: line {}: {}", p.display(), e.line, e.message);
            }
            cfg.protocol = loaded.header.protocol.clone();
            Ok(Dataset {
                records: loaded.records,
                sha256: Some(hex::encode(Sha256::digest(&bytes))),
            })
        }
        None => Ok(Dataset {
            records: make_dataset(&cfg.protocol)?,
            sha256: None,
        }),
    }
}

pub fn summarize_records(records: &[SignalRecord], cfg: &SummaryConfig) -> Result<Vec<StatSummary>> {
    records
        .par_iter()
        .map(|r| {
            summarize_with(&r.signal, cfg).with_context(|| format!("summarizing {:?} record {}", r.split, r.index))
        })
        .collect()
}

/// Exemplars in file order; `slot` counts occurrences of each class.
pub fn exemplars_of(records: &[SignalRecord], summaries: &[StatSummary]) -> Vec<Exemplar> {
    let mut seen = [0usize; ModClass::COUNT];
    records
        .iter()
        .zip(summaries)
        .filter(|(r, _)| r.split == Split::Exemplar)
        .map(|(r, s)| {
            let label = r.label();
            let slot = seen[label.index()];
            seen[label.index()] += 1;
            Exemplar {
                label,
                slot,
                summary: s.clone(),
            }
        })
        .collect()
}

/// One prompt per test record.
pub struct PreparedItem {
    pub index: usize,
    pub label: ModClass,
    pub snr_db: Option<f64>,
    pub request: PromptRequest,
}

pub fn prepare_items(cfg: &RunConfig, dataset: &Dataset) -> Result<Vec<PreparedItem>> {
    let summaries = summarize_records(&dataset.records, &cfg.summary)?;
    let exemplars = exemplars_of(&dataset.records, &summaries);
    let shared = Arc::new(match cfg.mode {
        PromptMode::InstructionSuffix => Vec::new(),
        PromptMode::InstructionContextSuffix => exemplars.clone(),
    });
    dataset
        .records
        .iter()
        .zip(&summaries)
        .filter(|(r, _)| r.split == Split::Test)
        .map(|(r, s)| {
            let bundle = build_prompt(s, &exemplars, cfg.mode, &cfg.prompt)?;
            Ok(PreparedItem {
                index: r.index,
                label: r.label(),
                snr_db: r.signal.snr.db(),
                request: PromptRequest {
                    prompt: bundle.render(),
                    query: Some(s.clone()),
                    exemplars: Arc::clone(&shared),
                },
            })
        })
        .collect()
}

pub fn metadata(cfg: &RunConfig, dataset_sha256: Option<String>) -> RunMetadata {
    RunMetadata {
        model: cfg.backend.model_label(),
        backend: cfg.backend.kind.as_str().to_string(),
        mode: cfg.mode.table_label().to_string(),
        snr_condition: cfg.protocol.snr.table_label(),
        master_seed: cfg.protocol.master_seed,
        config_hash: cfg.hash(),
        dataset_sha256,
    }
}

/// First entry for each index, ordered by index.
fn dedup_entries(entries: Vec<TranscriptEntry>) -> Vec<TranscriptEntry> {
    let mut by_index = BTreeMap::new();
    for e in entries {
        by_index.entry(e.index).or_insert(e);
    }
    by_index.into_values().collect()
}

pub struct RunOutput {
    pub report: EvalReport,
    pub files: Vec<PathBuf>,
    pub resumed_entries: usize,
}

pub fn report_stem(run_id: &str) -> String {
    format!("run-{run_id}.report")
}

/// Runs (or resumes) an evaluation in `cfg.output_dir`.
pub fn run_eval(mut cfg: RunConfig, dataset_path: Option<&Path>, run_id: &str, fresh: bool) -> Result<RunOutput> {
    let dataset = obtain_dataset(&mut cfg, dataset_path)?;
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let hash = cfg.hash();
    let transcript_path = dir.join(TRANSCRIPT_FILE);

    let mut header = TranscriptHeader::new(
        &hash,
        cfg.backend.kind.as_str(),
        &cfg.backend.model_label(),
        cfg.mode.table_label(),
    );
    header.dataset_sha256 = dataset.sha256.clone();

    let (mut entries, writer) = if transcript_path.exists() && !fresh {
        let existing = read_transcript(&transcript_path)?;
        if existing.header.config_hash != hash {
            bail!(
                "{} was written by a different configuration (hash {}, current {}); pass --fresh to start over",
                transcript_path.display(),
                existing.header.config_hash,
                hash
            );
        }
        if existing.truncated_tail {
            log::warn!("dropping truncated final line of {}", transcript_path.display());
        }
        let w = TranscriptWriter::append(&transcript_path, existing.valid_len)?;
        (existing.entries, w)
    } else {
        (Vec::new(), TranscriptWriter::create(&transcript_path, &header)?)
    };
    cfg.write_json(&dir.join(CONFIG_FILE))?;
    let resumed_entries = entries.len();

    let items = prepare_items(&cfg, &dataset)?;
    let done: HashSet<usize> = entries.iter().map(|e| e.index).collect();
    let pending: Vec<&PreparedItem> = items.iter().filter(|it| !done.contains(&it.index)).collect();
    if resumed_entries > 0 {
        log::info!("resuming: {resumed_entries} entries on file, {} to go", pending.len());
    }

    let backend = make_backend(&cfg.backend)?;
    let requests: Vec<PromptRequest> = pending.iter().map(|it| it.request.clone()).collect();
    let progress = BatchProgress::default();
    let write_failure: Mutex<Option<String>> = Mutex::new(None);
    let fresh_entries: Mutex<Vec<TranscriptEntry>> = Mutex::new(Vec::with_capacity(pending.len()));
    let total = pending.len();
    classify_batch(backend.as_ref(), &requests, &cfg.backend, &progress, |i, raw| {
        let it = pending[i];
        let entry = TranscriptEntry::new(it.index, it.label, it.snr_db, &it.request.prompt, cfg.keep_prompts, raw);
        if let Err(e) = writer.write(&entry) {
            write_failure.lock().unwrap().get_or_insert(e.to_string());
        }
        fresh_entries.lock().unwrap().push(entry);
        let n = progress.completed() + 1;
        if n % 200 == 0 || n == total {
            log::info!("{n}/{total} classified");
        }
    });
    if let Some(e) = write_failure.into_inner().unwrap() {
        bail!("transcript write failed: {e}");
    }
    entries.extend(fresh_entries.into_inner().unwrap());

    let wanted: HashSet<usize> = items.iter().map(|it| it.index).collect();
    let entries: Vec<TranscriptEntry> = dedup_entries(entries).into_iter().filter(|e| wanted.contains(&e.index)).collect();
    let report = score(&outcomes_from_transcript(&entries), metadata(&cfg, dataset.sha256))?;
    let files = emit_all(&report, &dir, &report_stem(run_id))?;
    Ok(RunOutput {
        report,
        files,
        resumed_entries,
    })
}

/// Rescores a run directory from its config and transcript.
pub fn replay(dir: &Path, run_id: &str) -> Result<RunOutput> {
    let cfg = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let t = read_transcript(&dir.join(TRANSCRIPT_FILE))?;
    if t.header.config_hash != cfg.hash() {
        bail!("transcript and config.json in {} disagree on the config hash", dir.display());
    }
    let entries = dedup_entries(t.entries);
    let report = score(&outcomes_from_transcript(&entries), metadata(&cfg, t.header.dataset_sha256))?;
    let files = emit_all(&report, dir, &report_stem(run_id))?;
    Ok(RunOutput {
        report,
        files,
        resumed_entries: entries.len(),
    })
}
