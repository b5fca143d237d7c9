//! Descriptive statistics, central moments, k-statistics and the per-signal
//! summary record that prompts are built from.
//!
//! Conventions: variance is the unbiased `(n-1)` estimate; skewness is the
//! biased `m3 / m2^1.5`; kurtosis is the biased excess `m4 / m2^2 - 3`.
//! All sums are two-pass (mean first, then deviations) in `f64`.

use serde::{Deserialize, Serialize};

use crate::cumulants::{cumulant_features_with, CumulantConfig, CumulantError, CumulantSet};
use crate::modgen::{ComplexSignal, ModClass};

/// Highest central-moment order in a summary.
pub const MAX_MOMENT_ORDER: u32 = 7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("a real view needs at least one value")]
    EmptyView,
    #[error("value at position {0} is not finite")]
    NonFinite(usize),
    #[error("{what} needs at least {needed} samples, got {got}")]
    InsufficientSamples { what: &'static str, needed: usize, got: usize },
    #[error("{what} order {order} is outside {min}..={max}")]
    OrderOutOfRange { what: &'static str, order: u32, min: u32, max: u32 },
    #[error(transparent)]
    Cumulant(#[from] CumulantError),
}

/// How a complex signal is flattened into real values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    /// `[i0, q0, i1, q1, ...]`, length `2n`.
    #[default]
    Interleaved,
    InPhase,
    Magnitude,
}

/// A finite, non-empty real sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct RealView {
    values: Vec<f64>,
    source: ViewKind,
}

impl RealView {
    pub fn new(values: Vec<f64>, source: ViewKind) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptyView);
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(pos));
        }
        Ok(Self { values, source })
    }

    pub fn from_values(values: &[f64]) -> Result<Self, StatsError> {
        Self::new(values.to_vec(), ViewKind::Interleaved)
    }

    pub fn of_signal(signal: &ComplexSignal, kind: ViewKind) -> Result<Self, StatsError> {
        let s = &signal.samples;
        let values = match kind {
            ViewKind::Interleaved => s.iter().flat_map(|x| [x.re, x.im]).collect(),
            ViewKind::InPhase => s.iter().map(|x| x.re).collect(),
            ViewKind::Magnitude => s.iter().map(|x| x.norm()).collect(),
        };
        Self::new(values, kind)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> ViewKind {
        self.source
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sums of deviation powers `sum (x - mean)^p` for p = 2, 3, 4.
    fn deviation_sums(&self) -> (f64, f64, f64) {
        let mean = self.mean();
        self.values.iter().fold((0.0, 0.0, 0.0), |(s2, s3, s4), &x| {
            let d = x - mean;
            let d2 = d * d;
            (s2 + d2, s3 + d2 * d, s4 + d2 * d2)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub nobs: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    /// Set when the variance is zero and skewness/kurtosis were reported as 0.
    pub degenerate: bool,
}

pub fn describe(x: &RealView) -> Result<Description, StatsError> {
    let n = x.len();
    if n < 2 {
        return Err(StatsError::InsufficientSamples {
            what: "describe",
            needed: 2,
            got: n,
        });
    }
    let v = x.values();
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = x.mean();
    let (s2, s3, s4) = x.deviation_sums();
    let nf = n as f64;
    let (m2, m3, m4) = (s2 / nf, s3 / nf, s4 / nf);

    let degenerate = m2 == 0.0;
    let (skewness, kurtosis) = if degenerate {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };
    Ok(Description {
        nobs: n,
        min,
        max,
        mean,
        variance: s2 / (nf - 1.0),
        skewness,
        kurtosis,
        degenerate,
    })
}

/// Central moment of order 0..=7.
pub fn central_moment(x: &RealView, order: u32) -> Result<f64, StatsError> {
    if order > MAX_MOMENT_ORDER {
        return Err(StatsError::OrderOutOfRange {
            what: "central moment",
            order,
            min: 0,
            max: MAX_MOMENT_ORDER,
        });
    }
    Ok(central_moment_any(x, order))
}

/// Central moment of any order. Orders 0 and 1 return exactly 1 and 0.
pub fn central_moment_any(x: &RealView, order: u32) -> f64 {
    match order {
        0 => 1.0,
        1 => 0.0,
        _ => {
            let mean = x.mean();
            let p = order as i32;
            x.values().iter().map(|&v| (v - mean).powi(p)).sum::<f64>() / x.len() as f64
        }
    }
}

/// k-statistic `k_order` for order 1..=4: the symmetric unbiased estimator of
/// the order-th cumulant. Requires `n > order`.
pub fn kstat(x: &RealView, order: u32) -> Result<f64, StatsError> {
    if !(1..=4).contains(&order) {
        return Err(StatsError::OrderOutOfRange {
            what: "kstat",
            order,
            min: 1,
            max: 4,
        });
    }
    let n = x.len();
    if n <= order as usize {
        return Err(StatsError::InsufficientSamples {
            what: "kstat",
            needed: order as usize + 1,
            got: n,
        });
    }
    Ok(kstat_unchecked(x, order))
}

/// Evaluates the k-statistic from power sums of deviations, where the first
/// power sum vanishes. Needs `n >= order` for a finite result.
fn kstat_unchecked(x: &RealView, order: u32) -> f64 {
    let n = x.len() as f64;
    if order == 1 {
        return x.mean();
    }
    let (s2, s3, s4) = x.deviation_sums();
    match order {
        2 => s2 / (n - 1.0),
        3 => n * s3 / ((n - 1.0) * (n - 2.0)),
        _ => (n * (n + 1.0) * s4 - 3.0 * (n - 1.0) * s2 * s2) / ((n - 1.0) * (n - 2.0) * (n - 3.0)),
    }
}

/// Unbiased estimate of the sampling variance of `kstat(x, order)` for order 1..=2.
pub fn kstatvar(x: &RealView, order: u32) -> Result<f64, StatsError> {
    let n = x.len();
    let needed = match order {
        1 => 2,
        2 => 4,
        _ => {
            return Err(StatsError::OrderOutOfRange {
                what: "kstatvar",
                order,
                min: 1,
                max: 2,
            })
        }
    };
    if n < needed {
        return Err(StatsError::InsufficientSamples {
            what: "kstatvar",
            needed,
            got: n,
        });
    }
    let nf = n as f64;
    let k2 = kstat_unchecked(x, 2);
    Ok(if order == 1 {
        k2 / nf
    } else {
        let k4 = kstat_unchecked(x, 4);
        (2.0 * nf * k2 * k2 + (nf - 1.0) * k4) / (nf * (nf + 1.0))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SummaryConfig {
    pub view: ViewKind,
    pub cumulants: CumulantConfig,
}

/// Everything a prompt needs about one signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SummaryWire", from = "SummaryWire")]
pub struct StatSummary {
    pub nobs: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    /// Central moments of order 0..=7.
    pub moments: [f64; 8],
    /// k-statistics 1..=4.
    pub kstats: [f64; 4],
    /// kstat variances 1..=2.
    pub kstatvars: [f64; 2],
    pub cumulants: CumulantSet,
    pub label: Option<ModClass>,
    pub view: ViewKind,
    pub degenerate: bool,
}

impl StatSummary {
    /// Scalar keys in rendering order, before the cumulant keys.
    pub const SCALAR_KEYS: [&'static str; 21] = [
        "nobs",
        "min",
        "max",
        "mean",
        "variance",
        "skewness",
        "kurtosis",
        "moment_0",
        "moment_1",
        "moment_2",
        "moment_3",
        "moment_4",
        "moment_5",
        "moment_6",
        "moment_7",
        "kstat_1",
        "kstat_2",
        "kstat_3",
        "kstat_4",
        "kstatvar_1",
        "kstatvar_2",
    ];

    /// `(key, value)` for every scalar field in rendering order. `nobs` is
    /// included as a float.
    pub fn scalar_entries(&self) -> [(&'static str, f64); 21] {
        let vals = [
            self.nobs as f64,
            self.min,
            self.max,
            self.mean,
            self.variance,
            self.skewness,
            self.kurtosis,
            self.moments[0],
            self.moments[1],
            self.moments[2],
            self.moments[3],
            self.moments[4],
            self.moments[5],
            self.moments[6],
            self.moments[7],
            self.kstats[0],
            self.kstats[1],
            self.kstats[2],
            self.kstats[3],
            self.kstatvars[0],
            self.kstatvars[1],
        ];
        std::array::from_fn(|i| (Self::SCALAR_KEYS[i], vals[i]))
    }
}

/// Summarizes a signal with the default view and raw cumulants.
pub fn summarize(signal: &ComplexSignal) -> Result<StatSummary, StatsError> {
    summarize_with(signal, &SummaryConfig::default())
}

pub fn summarize_with(signal: &ComplexSignal, cfg: &SummaryConfig) -> Result<StatSummary, StatsError> {
    let view = RealView::of_signal(signal, cfg.view)?;
    let d = describe(&view)?;
    let mut moments = [0.0; 8];
    for (order, m) in moments.iter_mut().enumerate() {
        *m = central_moment(&view, order as u32)?;
    }
    let mut kstats = [0.0; 4];
    for (k, v) in kstats.iter_mut().enumerate() {
        *v = kstat(&view, k as u32 + 1)?;
    }
    let kstatvars = [kstatvar(&view, 1)?, kstatvar(&view, 2)?];
    let cumulants = cumulant_features_with(&signal.samples, &cfg.cumulants)?;

    Ok(StatSummary {
        nobs: d.nobs,
        min: d.min,
        max: d.max,
        mean: d.mean,
        variance: d.variance,
        skewness: d.skewness,
        kurtosis: d.kurtosis,
        moments,
        kstats,
        kstatvars,
        cumulants,
        label: Some(signal.label),
        view: cfg.view,
        degenerate: d.degenerate,
    })
}

#[derive(Serialize, Deserialize)]
struct SummaryWire {
    nobs: usize,
    min: f64,
    max: f64,
    mean: f64,
    variance: f64,
    skewness: f64,
    kurtosis: f64,
    moment_0: f64,
    moment_1: f64,
    moment_2: f64,
    moment_3: f64,
    moment_4: f64,
    moment_5: f64,
    moment_6: f64,
    moment_7: f64,
    kstat_1: f64,
    kstat_2: f64,
    kstat_3: f64,
    kstat_4: f64,
    kstatvar_1: f64,
    kstatvar_2: f64,
    #[serde(flatten)]
    cumulants: CumulantSet,
    label: Option<ModClass>,
    view: ViewKind,
    degenerate: bool,
}

impl From<StatSummary> for SummaryWire {
    fn from(s: StatSummary) -> Self {
        let [moment_0, moment_1, moment_2, moment_3, moment_4, moment_5, moment_6, moment_7] = s.moments;
        let [kstat_1, kstat_2, kstat_3, kstat_4] = s.kstats;
        let [kstatvar_1, kstatvar_2] = s.kstatvars;
        Self {
            nobs: s.nobs,
            min: s.min,
            max: s.max,
            mean: s.mean,
            variance: s.variance,
            skewness: s.skewness,
            kurtosis: s.kurtosis,
            moment_0,
            moment_1,
            moment_2,
            moment_3,
            moment_4,
            moment_5,
            moment_6,
            moment_7,
            kstat_1,
            kstat_2,
            kstat_3,
            kstat_4,
            kstatvar_1,
            kstatvar_2,
            cumulants: s.cumulants,
            label: s.label,
            view: s.view,
            degenerate: s.degenerate,
        }
    }
}

impl From<SummaryWire> for StatSummary {
    fn from(w: SummaryWire) -> Self {
        Self {
            nobs: w.nobs,
            min: w.min,
            max: w.max,
            mean: w.mean,
            variance: w.variance,
            skewness: w.skewness,
            kurtosis: w.kurtosis,
            moments: [
                w.moment_0, w.moment_1, w.moment_2, w.moment_3, w.moment_4, w.moment_5, w.moment_6, w.moment_7,
            ],
            kstats: [w.kstat_1, w.kstat_2, w.kstat_3, w.kstat_4],
            kstatvars: [w.kstatvar_1, w.kstatvar_2],
            cumulants: w.cumulants,
            label: w.label,
            view: w.view,
            degenerate: w.degenerate,
        }
    }
}
