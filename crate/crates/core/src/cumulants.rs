//! Complex mixed moments and the fourth-, sixth- and eighth-order cumulants
//! used as modulation features.
//!
//! Moment indices follow `(order p, conjugate count q)`:
//! `m_{p,q} = mean(x^(p-q) * conj(x)^q)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::modgen::ComplexSignal;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CumulantError {
    #[error("conjugate count {q} exceeds moment order {p}")]
    ConjugatesExceedOrder { p: u32, q: u32 },
    #[error("cannot take moments of an empty sequence")]
    Empty,
    #[error("signal power m21 is zero; power normalization is undefined")]
    ZeroPower,
}

/// How conjugates enter a mixed moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentConvention {
    /// `x^(p-q) * conj(x)^q`.
    #[default]
    Conjugated,
    /// `x^q * x^(p-q) = x^p`, no conjugation. Audit mode only: it cannot
    /// tell `m41` from `m40`.
    Literal,
}

/// Which algebraic form of the cumulant identities to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CumulantFormulas {
    /// Every term of an order-k cumulant has order k:
    /// `c63` subtracts `6 m21^3` and `c80` uses the `m40^2` and `m20^4` terms.
    #[default]
    Homogeneous,
    /// `c63 = m63 - 9 c42 m21 - 6 m21^2` and
    /// `c80 = m80 - 28 m60 m20 - 35 m42^2 + 420 m40 m20^2 - 630 m40^2`,
    /// term for term. These two do not scale as order-6/order-8 quantities.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    /// Each order-k cumulant divided by `m21^(k/2)`.
    PowerNormalized,
}

/// Sample mixed moments used by the cumulant identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedMomentSet {
    pub m20: Complex64,
    pub m21: Complex64,
    pub m30: Complex64,
    pub m40: Complex64,
    pub m41: Complex64,
    pub m42: Complex64,
    pub m60: Complex64,
    pub m63: Complex64,
    pub m80: Complex64,
}

const MOMENT_INDICES: [(u32, u32); 9] = [(2, 0), (2, 1), (3, 0), (4, 0), (4, 1), (4, 2), (6, 0), (6, 3), (8, 0)];

impl MixedMomentSet {
    pub fn from_samples(x: &[Complex64], convention: MomentConvention) -> Result<Self, CumulantError> {
        if x.is_empty() {
            return Err(CumulantError::Empty);
        }
        let mut sums = [Complex64::new(0.0, 0.0); 9];
        for &v in x {
            for (sum, &(p, q)) in sums.iter_mut().zip(&MOMENT_INDICES) {
                *sum += moment_term(v, p, q, convention);
            }
        }
        let n = x.len() as f64;
        let m = sums.map(|s| s / n);
        Ok(Self {
            m20: m[0],
            m21: m[1],
            m30: m[2],
            m40: m[3],
            m41: m[4],
            m42: m[5],
            m60: m[6],
            m63: m[7],
            m80: m[8],
        })
    }
}

fn moment_term(v: Complex64, p: u32, q: u32, convention: MomentConvention) -> Complex64 {
    match convention {
        MomentConvention::Conjugated => v.powu(p - q) * v.conj().powu(q),
        MomentConvention::Literal => v.powu(p),
    }
}

/// `mean(x^(p-q) * conj(x)^q)` under the conjugated convention.
pub fn mixed_moment(x: &[Complex64], p: u32, q: u32) -> Result<Complex64, CumulantError> {
    mixed_moment_with(x, p, q, MomentConvention::Conjugated)
}

pub fn mixed_moment_with(
    x: &[Complex64],
    p: u32,
    q: u32,
    convention: MomentConvention,
) -> Result<Complex64, CumulantError> {
    if q > p {
        return Err(CumulantError::ConjugatesExceedOrder { p, q });
    }
    if x.is_empty() {
        return Err(CumulantError::Empty);
    }
    let sum: Complex64 = x.iter().map(|&v| moment_term(v, p, q, convention)).sum();
    Ok(sum / x.len() as f64)
}

/// Higher-order cumulant features of one signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet {
    #[serde(with = "complex_pair")]
    pub c40: Complex64,
    #[serde(with = "complex_pair")]
    pub c41: Complex64,
    #[serde(with = "complex_pair")]
    pub c42: Complex64,
    #[serde(with = "complex_pair")]
    pub c60: Complex64,
    #[serde(with = "complex_pair")]
    pub c63: Complex64,
    #[serde(with = "complex_pair")]
    pub c80: Complex64,
    pub normalization: Normalization,
    /// Signal power `m21` the set was computed with, kept so a raw set can be
    /// power-normalized later.
    pub m21: f64,
}

impl CumulantSet {
    pub const KEYS: [&'static str; 6] = ["c40", "c41", "c42", "c60", "c63", "c80"];

    /// `(name, value, order)` in rendering order.
    pub fn entries(&self) -> [(&'static str, Complex64, i32); 6] {
        [
            ("c40", self.c40, 4),
            ("c41", self.c41, 4),
            ("c42", self.c42, 4),
            ("c60", self.c60, 6),
            ("c63", self.c63, 6),
            ("c80", self.c80, 8),
        ]
    }

    /// Divides each order-k cumulant by `m21^(k/2)`. Idempotent.
    pub fn power_normalized(&self) -> Result<CumulantSet, CumulantError> {
        if self.normalization == Normalization::PowerNormalized {
            return Ok(*self);
        }
        if self.m21 == 0.0 {
            return Err(CumulantError::ZeroPower);
        }
        let p2 = self.m21 * self.m21;
        let p3 = p2 * self.m21;
        let p4 = p2 * p2;
        Ok(CumulantSet {
            c40: self.c40 / p2,
            c41: self.c41 / p2,
            c42: self.c42 / p2,
            c60: self.c60 / p3,
            c63: self.c63 / p3,
            c80: self.c80 / p4,
            normalization: Normalization::PowerNormalized,
            m21: self.m21,
        })
    }
}

/// Evaluates the cumulant identities on a moment set. The result is raw
/// (unnormalized).
pub fn cumulants_from_moments(m: &MixedMomentSet, formulas: CumulantFormulas) -> CumulantSet {
    let MixedMomentSet {
        m20,
        m21,
        m30,
        m40,
        m41,
        m42,
        m60,
        m63,
        m80,
    } = *m;

    let c40 = m40 - 3.0 * m20 * m20;
    let c41 = m41 - 3.0 * m21 * m20;
    let c42 = m42 - m20.norm_sqr() - 2.0 * m21 * m21;
    let c60 = m60 - 15.0 * m40 * m20 + 30.0 * m30 * m30;
    let (c63, c80) = match formulas {
        CumulantFormulas::Homogeneous => (
            m63 - 9.0 * c42 * m21 - 6.0 * m21 * m21 * m21,
            m80 - 28.0 * m60 * m20 - 35.0 * m40 * m40 + 420.0 * m40 * m20 * m20 - 630.0 * m20.powu(4),
        ),
        CumulantFormulas::Literal => (
            m63 - 9.0 * c42 * m21 - 6.0 * m21 * m21,
            m80 - 28.0 * m60 * m20 - 35.0 * m42 * m42 + 420.0 * m40 * m20 * m20 - 630.0 * m40 * m40,
        ),
    };

    CumulantSet {
        c40,
        c41,
        c42,
        c60,
        c63,
        c80,
        normalization: Normalization::None,
        m21: m21.re,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CumulantConfig {
    pub normalization: Normalization,
    pub formulas: CumulantFormulas,
    pub convention: MomentConvention,
}

pub fn cumulant_features(signal: &ComplexSignal, normalization: Normalization) -> Result<CumulantSet, CumulantError> {
    cumulant_features_with(
        &signal.samples,
        &CumulantConfig {
            normalization,
            ..Default::default()
        },
    )
}

pub fn cumulant_features_with(samples: &[Complex64], cfg: &CumulantConfig) -> Result<CumulantSet, CumulantError> {
    let moments = MixedMomentSet::from_samples(samples, cfg.convention)?;
    let raw = cumulants_from_moments(&moments, cfg.formulas);
    match cfg.normalization {
        Normalization::None => Ok(raw),
        Normalization::PowerNormalized => raw.power_normalized(),
    }
}

mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [c.re, c.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}
