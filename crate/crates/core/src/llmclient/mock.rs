//! Deterministic offline backend. It re-parses the rendered prompt and
//! answers with the label of the exemplar whose k-statistics are nearest to
//! the query's.

use sha2::{Digest, Sha256};

use crate::modgen::ModClass;
use crate::promptkit::{parse_prompt, ParsedSummary};

use super::{Backend, BackendError, PromptRequest};

const KSTAT_KEYS: [&str; 4] = ["kstat_1", "kstat_2", "kstat_3", "kstat_4"];

pub struct MockBackend;

fn kstats(s: &ParsedSummary) -> Option<[f64; 4]> {
    let mut out = [0.0; 4];
    for (o, k) in out.iter_mut().zip(KSTAT_KEYS) {
        *o = s.get(k)?;
    }
    Some(out)
}

/// Answers for a prompt without usable exemplars: a class picked from the
/// prompt hash, so the answer is stable but uninformative.
fn hashed_answer(prompt: &str) -> ModClass {
    let digest = Sha256::digest(prompt.as_bytes());
    ModClass::from_index(digest[0] as usize % ModClass::COUNT).expect("index is below COUNT")
}

/// Nearest exemplar label by Euclidean distance on `kstat_1..4`; the first
/// exemplar wins ties.
pub fn mock_answer(prompt: &str) -> Result<ModClass, BackendError> {
    let parsed = parse_prompt(prompt);
    let query = parsed.query.as_ref().ok_or_else(|| BackendError::Rejected {
        message: "prompt has no question sample line".into(),
    })?;
    let q = kstats(query).ok_or_else(|| BackendError::Rejected {
        message: "question sample lacks k-statistics".into(),
    })?;
    let mut best: Option<(ModClass, f64)> = None;
    for (summary, label) in &parsed.exemplars {
        let Some(e) = kstats(summary) else { continue };
        let d2: f64 = q.iter().zip(&e).map(|(a, b)| (a - b).powi(2)).sum();
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((*label, d2));
        }
    }
    Ok(best.map_or_else(|| hashed_answer(prompt), |(c, _)| c))
}

impl Backend for MockBackend {
    fn attempt(&self, request: &PromptRequest) -> Result<String, BackendError> {
        mock_answer(&request.prompt).map(|c| c.to_string())
    }
}
