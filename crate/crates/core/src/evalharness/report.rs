//! Report files. JSON is canonical; CSV and markdown are derived views.
//!
//! CSV schema: `<stem>.csv` is the confusion matrix with header
//! `truth,<10 classes>,Invalid`, one row per true class. `<stem>.per_class.csv`
//! has `class,total,correct,invalid,accuracy,cleaned_accuracy`, one row per
//! class and a final `ALL` row. Empty rates are blank.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::modgen::ModClass;

use super::{EvalReport, Tally};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Markdown => "md",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report CSV: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn rate(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", x * 100.0))
}

pub fn per_class_path(path: &Path) -> PathBuf {
    path.with_extension("per_class.csv")
}

pub fn confusion_csv(report: &EvalReport) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["truth".to_string()];
    header.extend(ModClass::ALL.iter().map(|c| c.to_string()));
    header.push("Invalid".to_string());
    w.write_record(&header)?;
    for (class, row) in ModClass::ALL.iter().zip(&report.confusion) {
        let mut rec = vec![class.to_string()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn per_class_csv(report: &EvalReport) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["class", "total", "correct", "invalid", "accuracy", "cleaned_accuracy"])?;
    let row = |name: String, t: &Tally| {
        vec![
            name,
            t.total.to_string(),
            t.correct.to_string(),
            t.invalid.to_string(),
            rate(t.accuracy),
            rate(t.cleaned_accuracy),
        ]
    };
    for r in &report.per_class {
        w.write_record(row(r.class.to_string(), &r.tally))?;
    }
    let all = Tally::from_counts(report.total, report.correct, report.invalid);
    w.write_record(row("ALL".to_string(), &all))?;
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// One summary table with a row per report, then per-run details.
pub fn render_markdown(reports: &[&EvalReport]) -> String {
    let mut out = String::from("| Model | Prompt | SNR (dB) | Accuracy (%) | Cleaned Accuracy (%) |\n");
    out.push_str("|---|---|---|---|---|\n");
    for r in reports {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            r.metadata.model,
            r.metadata.mode,
            r.metadata.snr_condition,
            percent(Some(r.accuracy)),
            percent(r.cleaned_accuracy)
        );
    }
    for r in reports {
        let _ = write!(
            out,
            "\n## {} / {} / {}\n\nbackend `{}`, seed {}, config `{}`\n\n",
            r.metadata.model,
            r.metadata.mode,
            r.metadata.snr_condition,
            r.metadata.backend,
            r.metadata.master_seed,
            r.metadata.config_hash
        );
        let _ = writeln!(
            out,
            "total {}, correct {}, invalid {} (no class {}, backend error {})\n",
            r.total, r.correct, r.invalid, r.invalid_no_class, r.invalid_backend
        );
        out.push_str("| Class | Total | Correct | Invalid | Accuracy (%) | Cleaned Accuracy (%) |\n");
        out.push_str("|---|---|---|---|---|---|\n");
        for row in &r.per_class {
            let t = &row.tally;
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                row.class,
                t.total,
                t.correct,
                t.invalid,
                percent(t.accuracy),
                percent(t.cleaned_accuracy)
            );
        }
        if r.snr_buckets.len() > 1 || r.snr_buckets.first().is_some_and(|b| b.bucket != super::NOISELESS_BUCKET) {
            out.push_str("\n| SNR bucket | Total | Accuracy (%) | Cleaned Accuracy (%) |\n|---|---|---|---|\n");
            for b in &r.snr_buckets {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    b.bucket,
                    b.tally.total,
                    percent(b.tally.accuracy),
                    percent(b.tally.cleaned_accuracy)
                );
            }
        }
        out.push_str("\n| Truth |");
        for c in ModClass::ALL {
            let _ = write!(out, " {c} |");
        }
        out.push_str(" Invalid |\n|---|");
        out.push_str(&"---|".repeat(ModClass::COUNT + 1));
        out.push('\n');
        for (class, row) in ModClass::ALL.iter().zip(&r.confusion) {
            let _ = write!(out, "| {class} |");
            for n in row {
                let _ = write!(out, " {n} |");
            }
            out.push('\n');
        }
    }
    out
}

/// Writes `report` to `path`. CSV also writes the per-class sidecar at
/// [`per_class_path`].
pub fn emit_report(report: &EvalReport, format: Format, path: &Path) -> Result<Vec<PathBuf>, ReportError> {
    match format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(report)?;
            text.push('\n');
            std::fs::write(path, text).map_err(io_err(path))?;
            Ok(vec![path.to_path_buf()])
        }
        Format::Csv => {
            std::fs::write(path, confusion_csv(report)?).map_err(io_err(path))?;
            let side = per_class_path(path);
            std::fs::write(&side, per_class_csv(report)?).map_err(io_err(&side))?;
            Ok(vec![path.to_path_buf(), side])
        }
        Format::Markdown => {
            std::fs::write(path, render_markdown(&[report])).map_err(io_err(path))?;
            Ok(vec![path.to_path_buf()])
        }
    }
}

/// Writes all three formats as `<dir>/<stem>.{json,csv,md}`.
pub fn emit_all(report: &EvalReport, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    for f in [Format::Json, Format::Csv, Format::Markdown] {
        let path = dir.join(format!("{stem}.{}", f.extension()));
        written.extend(emit_report(report, f, &path)?);
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<EvalReport, ReportError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}
