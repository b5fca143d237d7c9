//! Nearest-centroid classifier over standardized cumulant features. It stands
//! in for a language model so the pipeline can run offline.

use crate::modgen::ModClass;
use crate::promptkit::Exemplar;
use crate::stats::StatSummary;

use super::{Backend, BackendError, PromptRequest};

pub const FEATURE_NAMES: [&str; 8] = ["c40", "c41", "c42", "c60", "c63", "c80", "kurtosis", "variance"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BaselineError {
    #[error("baseline needs at least one exemplar")]
    NoExemplars,
}

/// Real parts of the power-normalized cumulants, then kurtosis and variance.
/// A zero-power summary contributes zero cumulant features.
pub fn feature_vector(s: &StatSummary) -> [f64; 8] {
    let c = s.cumulants.power_normalized().ok();
    let re = |f: fn(&crate::cumulants::CumulantSet) -> f64| c.as_ref().map_or(0.0, f);
    [
        re(|c| c.c40.re),
        re(|c| c.c41.re),
        re(|c| c.c42.re),
        re(|c| c.c60.re),
        re(|c| c.c63.re),
        re(|c| c.c80.re),
        s.kurtosis,
        s.variance,
    ]
}

/// Predicts the class whose exemplar centroid is nearest to `query` after
/// standardizing every feature by the exemplar-set mean and standard
/// deviation. Ties go to the earlier class in canonical order.
pub fn baseline_predict(query: &StatSummary, exemplars: &[Exemplar]) -> Result<ModClass, BaselineError> {
    if exemplars.is_empty() {
        return Err(BaselineError::NoExemplars);
    }
    let feats: Vec<[f64; 8]> = exemplars.iter().map(|e| feature_vector(&e.summary)).collect();
    let n = feats.len() as f64;
    let mut mean = [0.0; 8];
    for f in &feats {
        for j in 0..8 {
            mean[j] += f[j] / n;
        }
    }
    let mut std = [0.0; 8];
    for f in &feats {
        for j in 0..8 {
            std[j] += (f[j] - mean[j]).powi(2) / n;
        }
    }
    for s in &mut std {
        *s = s.sqrt();
        if !(s.is_finite() && *s > 0.0) {
            *s = 1.0;
        }
    }
    let standardize = |f: &[f64; 8]| -> [f64; 8] { std::array::from_fn(|j| (f[j] - mean[j]) / std[j]) };

    let mut sums = [[0.0; 8]; ModClass::COUNT];
    let mut counts = [0usize; ModClass::COUNT];
    for (e, f) in exemplars.iter().zip(&feats) {
        let z = standardize(f);
        let k = e.label.index();
        counts[k] += 1;
        for j in 0..8 {
            sums[k][j] += z[j];
        }
    }

    let q = standardize(&feature_vector(query));
    let mut best: Option<(ModClass, f64)> = None;
    for class in ModClass::ALL {
        let k = class.index();
        if counts[k] == 0 {
            continue;
        }
        let d2: f64 = (0..8)
            .map(|j| {
                let centroid = sums[k][j] / counts[k] as f64;
                (q[j] - centroid).powi(2)
            })
            .sum();
        // NaN distances never win.
        if best.is_none_or(|(_, b)| d2 < b) && !d2.is_nan() {
            best = Some((class, d2));
        }
    }
    Ok(best.map_or(exemplars[0].label, |(c, _)| c))
}

/// Backend answering with [`baseline_predict`] on the structured request.
pub struct BaselineBackend;

impl Backend for BaselineBackend {
    fn attempt(&self, request: &PromptRequest) -> Result<String, BackendError> {
        let query = request.query.as_ref().ok_or_else(|| BackendError::Rejected {
            message: "baseline backend needs the structured query".into(),
        })?;
        baseline_predict(query, &request.exemplars)
            .map(|c| c.to_string())
            .map_err(|e| BackendError::Rejected { message: e.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modgen::{generate, SnrSpec};
    use crate::stats::summarize;

    fn ex(label: ModClass, slot: usize, seed: u64) -> Exemplar {
        Exemplar {
            label,
            slot,
            summary: summarize(&generate(label, SnrSpec::Noiseless, 1024, seed).unwrap()).unwrap(),
        }
    }

    fn exemplar_set() -> Vec<Exemplar> {
        ModClass::ALL
            .iter()
            .flat_map(|&c| (0..2).map(move |s| ex(c, s, 1000 + 10 * c.index() as u64 + s as u64)))
            .collect()
    }

    #[test]
    fn identical_query_with_single_exemplar_per_class() {
        let set: Vec<Exemplar> = ModClass::ALL.iter().map(|&c| ex(c, 0, 500 + c.index() as u64)).collect();
        for e in &set {
            assert_eq!(baseline_predict(&e.summary, &set).unwrap(), e.label);
        }
    }

    #[test]
    fn identical_features_tie_break_to_first_class() {
        let base = ex(ModClass::Gmsk, 0, 3).summary;
        let set: Vec<Exemplar> = ModClass::ALL
            .iter()
            .rev()
            .map(|&c| Exemplar {
                label: c,
                slot: 0,
                summary: base.clone(),
            })
            .collect();
        assert_eq!(baseline_predict(&base, &set).unwrap(), ModClass::Ask4);
    }

    #[test]
    fn empty_exemplars_is_an_error() {
        let q = ex(ModClass::Ook, 0, 1).summary;
        assert_eq!(baseline_predict(&q, &[]), Err(BaselineError::NoExemplars));
    }

    #[test]
    fn backend_matches_direct_prediction() {
        let set = std::sync::Arc::new(exemplar_set());
        let q = ex(ModClass::Pam16, 0, 77).summary;
        let direct = baseline_predict(&q, &set).unwrap();
        let req = PromptRequest {
            prompt: "unused".into(),
            query: Some(q),
            exemplars: set,
        };
        assert_eq!(BaselineBackend.attempt(&req).unwrap(), direct.to_string());
    }

    #[test]
    fn separates_envelope_families() {
        let set = exemplar_set();
        let q = ex(ModClass::Ook, 0, 4242).summary;
        let p = baseline_predict(&q, &set).unwrap();
        assert!(!p.is_constant_envelope(), "OOK predicted as {p}");
    }
}
