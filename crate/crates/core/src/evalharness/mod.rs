//! Prediction extraction, scoring and report output.

mod extract;
pub mod report;

use serde::{Deserialize, Serialize};

use crate::llmclient::transcript::TranscriptEntry;
use crate::llmclient::{BackendError, RawResponse};
use crate::modgen::ModClass;

pub use extract::{extract_class, extract_class_bytes};
pub use report::{emit_report, read_report, render_markdown, Format, ReportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    NoClassFound,
    BackendError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Prediction {
    Class(ModClass),
    Invalid(InvalidReason),
}

impl Prediction {
    pub fn class(self) -> Option<ModClass> {
        match self {
            Prediction::Class(c) => Some(c),
            Prediction::Invalid(_) => None,
        }
    }

    pub fn invalid_reason(self) -> Option<InvalidReason> {
        match self {
            Prediction::Class(_) => None,
            Prediction::Invalid(r) => Some(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationOutcome {
    pub index: usize,
    pub truth: ModClass,
    /// `None` for noiseless records.
    pub snr_db: Option<f64>,
    pub raw: String,
    pub prediction: Prediction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<BackendError>,
}

impl ClassificationOutcome {
    pub fn from_response(index: usize, truth: ModClass, snr_db: Option<f64>, response: &RawResponse) -> Self {
        match &response.outcome {
            Ok(text) => Self {
                index,
                truth,
                snr_db,
                raw: text.clone(),
                prediction: extract_class(text).map_or(Prediction::Invalid(InvalidReason::NoClassFound), Prediction::Class),
                error: None,
            },
            Err(e) => Self {
                index,
                truth,
                snr_db,
                raw: String::new(),
                prediction: Prediction::Invalid(InvalidReason::BackendError),
                error: Some(e.clone()),
            },
        }
    }

    pub fn from_transcript(entry: &TranscriptEntry) -> Self {
        Self::from_response(entry.index, entry.label, entry.snr_db, &entry.to_raw())
    }

    pub fn is_correct(&self) -> bool {
        self.prediction == Prediction::Class(self.truth)
    }
}

/// Rebuilds outcomes from transcript entries without any backend call.
pub fn outcomes_from_transcript(entries: &[TranscriptEntry]) -> Vec<ClassificationOutcome> {
    let mut out: Vec<ClassificationOutcome> = entries.iter().map(ClassificationOutcome::from_transcript).collect();
    out.sort_by_key(|o| o.index);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("cannot score an empty outcome list")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetadata {
    pub model: String,
    pub backend: String,
    /// Report label of the prompt mode, `I+S` or `I+C+S`.
    pub mode: String,
    pub snr_condition: String,
    pub master_seed: u64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_sha256: Option<String>,
}

/// Counts and rates for any subset of outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub total: u64,
    pub correct: u64,
    pub invalid: u64,
    pub accuracy: Option<f64>,
    pub cleaned_accuracy: Option<f64>,
}

impl Tally {
    pub fn from_counts(total: u64, correct: u64, invalid: u64) -> Self {
        let valid = total - invalid;
        Self {
            total,
            correct,
            invalid,
            accuracy: (total > 0).then(|| correct as f64 / total as f64),
            cleaned_accuracy: (valid > 0).then(|| correct as f64 / valid as f64),
        }
    }

    fn of<'a>(outcomes: impl Iterator<Item = &'a ClassificationOutcome>) -> Self {
        let (mut total, mut correct, mut invalid) = (0, 0, 0);
        for o in outcomes {
            total += 1;
            correct += o.is_correct() as u64;
            invalid += o.prediction.class().is_none() as u64;
        }
        Self::from_counts(total, correct, invalid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: ModClass,
    #[serde(flatten)]
    pub tally: Tally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrBucketRow {
    pub bucket: String,
    #[serde(flatten)]
    pub tally: Tally,
}

/// The fixed SNR reporting buckets. The last linear bucket is closed on the
/// right so 10 dB is included.
pub const SNR_BUCKETS: [(f64, f64, &str); 4] = [
    (-10.0, -5.0, "[-10~-5)"),
    (-5.0, 0.0, "[-5~0)"),
    (0.0, 5.0, "[0~5)"),
    (5.0, 10.0, "[5~10]"),
];
pub const NOISELESS_BUCKET: &str = "noiseless";
pub const OUT_OF_RANGE_BUCKET: &str = "out_of_range";

pub fn snr_bucket(snr_db: Option<f64>) -> &'static str {
    let Some(s) = snr_db else { return NOISELESS_BUCKET };
    for (k, (lo, hi, label)) in SNR_BUCKETS.iter().enumerate() {
        let last = k == SNR_BUCKETS.len() - 1;
        if s >= *lo && (s < *hi || (last && s <= *hi)) {
            return label;
        }
    }
    OUT_OF_RANGE_BUCKET
}

/// Columns of the confusion matrix: the ten classes, then Invalid.
pub const CONFUSION_COLUMNS: usize = ModClass::COUNT + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: RunMetadata,
    pub total: u64,
    pub correct: u64,
    pub invalid: u64,
    pub invalid_no_class: u64,
    pub invalid_backend: u64,
    pub accuracy: f64,
    /// `None` when every outcome is invalid.
    pub cleaned_accuracy: Option<f64>,
    /// Rows are true classes, columns predicted classes then Invalid.
    pub confusion: Vec<[u64; CONFUSION_COLUMNS]>,
    pub per_class: Vec<ClassRow>,
    pub snr_buckets: Vec<SnrBucketRow>,
    pub records: Vec<ClassificationOutcome>,
}

impl EvalReport {
    pub fn trace(&self) -> u64 {
        (0..ModClass::COUNT).map(|k| self.confusion[k][k]).sum()
    }
}

pub fn score(outcomes: &[ClassificationOutcome], metadata: RunMetadata) -> Result<EvalReport, ScoreError> {
    if outcomes.is_empty() {
        return Err(ScoreError::Empty);
    }
    let overall = Tally::of(outcomes.iter());
    let mut confusion = vec![[0u64; CONFUSION_COLUMNS]; ModClass::COUNT];
    let (mut no_class, mut backend) = (0, 0);
    for o in outcomes {
        let col = match o.prediction {
            Prediction::Class(c) => c.index(),
            Prediction::Invalid(r) => {
                match r {
                    InvalidReason::NoClassFound => no_class += 1,
                    InvalidReason::BackendError => backend += 1,
                }
                ModClass::COUNT
            }
        };
        confusion[o.truth.index()][col] += 1;
    }
    let per_class = ModClass::ALL
        .iter()
        .map(|&class| ClassRow {
            class,
            tally: Tally::of(outcomes.iter().filter(|o| o.truth == class)),
        })
        .collect();

    let mut bucket_labels: Vec<&str> = SNR_BUCKETS.iter().map(|b| b.2).collect();
    bucket_labels.push(NOISELESS_BUCKET);
    bucket_labels.push(OUT_OF_RANGE_BUCKET);
    let snr_buckets = bucket_labels
        .into_iter()
        .map(|label| SnrBucketRow {
            bucket: label.to_string(),
            tally: Tally::of(outcomes.iter().filter(|o| snr_bucket(o.snr_db) == label)),
        })
        .filter(|row| row.tally.total > 0)
        .collect();

    Ok(EvalReport {
        metadata,
        total: overall.total,
        correct: overall.correct,
        invalid: overall.invalid,
        invalid_no_class: no_class,
        invalid_backend: backend,
        accuracy: overall.accuracy.expect("non-empty"),
        cleaned_accuracy: overall.cleaned_accuracy,
        confusion,
        per_class,
        snr_buckets,
        records: outcomes.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(index: usize, truth: ModClass, prediction: Prediction, snr_db: Option<f64>) -> ClassificationOutcome {
        ClassificationOutcome {
            index,
            truth,
            snr_db,
            raw: prediction.class().map(|c| c.to_string()).unwrap_or_default(),
            prediction,
            error: None,
        }
    }

    #[test]
    fn six_correct_two_invalid_two_wrong() {
        let mut v = Vec::new();
        for i in 0..6 {
            v.push(outcome(i, ModClass::Ook, Prediction::Class(ModClass::Ook), None));
        }
        v.push(outcome(6, ModClass::Ook, Prediction::Invalid(InvalidReason::NoClassFound), None));
        v.push(outcome(7, ModClass::Gmsk, Prediction::Invalid(InvalidReason::BackendError), None));
        v.push(outcome(8, ModClass::Gmsk, Prediction::Class(ModClass::Ook), None));
        v.push(outcome(9, ModClass::Gmsk, Prediction::Class(ModClass::Gfsk), None));
        let r = score(&v, RunMetadata::default()).unwrap();
        assert_eq!(r.accuracy, 0.6);
        assert_eq!(r.cleaned_accuracy, Some(0.75));
        assert_eq!((r.invalid_no_class, r.invalid_backend), (1, 1));
        assert_eq!(r.trace(), 6);
        let ook = ModClass::Ook.index();
        assert_eq!(r.confusion[ook].iter().sum::<u64>(), 7);
        assert_eq!(r.confusion[ModClass::Gmsk.index()][ModClass::COUNT], 1);
    }

    #[test]
    fn all_invalid_has_null_cleaned_accuracy() {
        let v: Vec<_> = (0..5)
            .map(|i| outcome(i, ModClass::Ask4, Prediction::Invalid(InvalidReason::NoClassFound), None))
            .collect();
        let r = score(&v, RunMetadata::default()).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.cleaned_accuracy, None);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(score(&[], RunMetadata::default()), Err(ScoreError::Empty));
    }

    #[test]
    fn buckets() {
        assert_eq!(snr_bucket(None), "noiseless");
        assert_eq!(snr_bucket(Some(-10.0)), "[-10~-5)");
        assert_eq!(snr_bucket(Some(-5.0)), "[-5~0)");
        assert_eq!(snr_bucket(Some(-0.0)), "[0~5)");
        assert_eq!(snr_bucket(Some(10.0)), "[5~10]");
        assert_eq!(snr_bucket(Some(10.5)), "out_of_range");
        assert_eq!(snr_bucket(Some(-10.01)), "out_of_range");
    }

    #[test]
    fn response_conversion() {
        let ok = RawResponse {
            outcome: Ok("<think>OOK</think> GMSK".into()),
            latency: Default::default(),
            attempts: 1,
        };
        let o = ClassificationOutcome::from_response(3, ModClass::Gmsk, Some(1.0), &ok);
        assert!(o.is_correct());
        let err = RawResponse {
            outcome: Err(BackendError::Timeout),
            latency: Default::default(),
            attempts: 4,
        };
        let o = ClassificationOutcome::from_response(3, ModClass::Gmsk, None, &err);
        assert_eq!(o.prediction, Prediction::Invalid(InvalidReason::BackendError));
        assert_eq!(o.error, Some(BackendError::Timeout));
    }
}
