//! Baseband waveform synthesis for the ten modulation classes.
//!
//! Every waveform is a pure function of `(class, snr, n, seed)`. Symbols and
//! noise come from separate ChaCha8 streams keyed by the seed, so a noisy
//! signal and its noiseless twin share the same clean waveform exactly.

mod class;
pub mod dataset;
pub mod io;
pub mod pulse;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use class::{ModClass, UnknownClass};
pub use dataset::{make_dataset, record_seed, DatasetProtocol, SignalRecord, SnrCondition, Split};

/// Sentinel used in report tables for the noiseless condition.
pub const NOISELESS_TABLE_SENTINEL: f64 = 100.0;

/// SNR range the dataset protocol is defined over.
pub const PROTOCOL_SNR_RANGE_DB: (f64, f64) = (-10.0, 10.0);

const SYMBOL_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
pub(crate) const SNR_DRAW_STREAM: u64 = 2;

#[derive(Debug, thiserror::Error)]
pub enum ModgenError {
    #[error("sample count must be positive")]
    EmptySignal,
    #[error("sample count {n} is shorter than one symbol ({samples_per_symbol} samples)")]
    TooShort { n: usize, samples_per_symbol: usize },
    #[error("target SNR must be finite, got {0}")]
    InvalidSnr(f64),
    #[error("signal lengths differ: {clean} vs {noisy}")]
    LengthMismatch { clean: usize, noisy: usize },
    #[error("test count {0} is not a positive multiple of 10")]
    UnevenClassSplit(usize),
    #[error("invalid waveform configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid dataset protocol: {0}")]
    InvalidProtocol(String),
}

/// Noise condition of a single signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "Option<f64>", into = "Option<f64>")]
pub enum SnrSpec {
    Noiseless,
    TargetDb(f64),
}

impl SnrSpec {
    /// Builds a target SNR, warning when it falls outside the protocol range.
    pub fn target_db(db: f64) -> SnrSpec {
        let (lo, hi) = PROTOCOL_SNR_RANGE_DB;
        if !(lo..=hi).contains(&db) {
            log::warn!("target SNR {db} dB is outside the protocol range [{lo}, {hi}] dB");
        }
        SnrSpec::TargetDb(db)
    }

    pub fn db(self) -> Option<f64> {
        match self {
            SnrSpec::Noiseless => None,
            SnrSpec::TargetDb(db) => Some(db),
        }
    }

    /// Value used in report tables: the target in dB, or 100 for noiseless.
    pub fn table_value(self) -> f64 {
        self.db().unwrap_or(NOISELESS_TABLE_SENTINEL)
    }
}

impl From<Option<f64>> for SnrSpec {
    fn from(v: Option<f64>) -> Self {
        match v {
            None => SnrSpec::Noiseless,
            Some(db) => SnrSpec::TargetDb(db),
        }
    }
}

impl From<SnrSpec> for Option<f64> {
    fn from(s: SnrSpec) -> Self {
        s.db()
    }
}

/// Amplitude convention for the ASK classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AskLevels {
    /// Non-negative levels {1, 3, ..., 2M-1}.
    Unipolar,
    /// Same bipolar levels as PAM; ASK and PAM then differ only in name.
    Bipolar,
}

/// Synthesis recipe. Written into dataset headers so runs can be reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveformConfig {
    pub samples_per_symbol: usize,
    pub rrc_rolloff: f64,
    pub rrc_span_symbols: usize,
    pub gaussian_span_symbols: usize,
    pub cpfsk_index: f64,
    pub gfsk_bt: f64,
    pub gfsk_index: f64,
    pub gmsk_bt: f64,
    pub ask_levels: AskLevels,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self {
            samples_per_symbol: 8,
            rrc_rolloff: 0.35,
            rrc_span_symbols: 8,
            gaussian_span_symbols: 4,
            cpfsk_index: 0.5,
            gfsk_bt: 0.35,
            gfsk_index: 0.32,
            gmsk_bt: 0.3,
            ask_levels: AskLevels::Unipolar,
        }
    }
}

impl WaveformConfig {
    pub fn validate(&self) -> Result<(), ModgenError> {
        let bad = |m: &str| Err(ModgenError::InvalidConfig(m.to_string()));
        if self.samples_per_symbol == 0 {
            return bad("samples_per_symbol must be positive");
        }
        if !(0.0..=1.0).contains(&self.rrc_rolloff) {
            return bad("rrc_rolloff must lie in [0, 1]");
        }
        if self.rrc_span_symbols == 0 || self.gaussian_span_symbols == 0 {
            return bad("filter spans must be positive");
        }
        if !(self.gfsk_bt > 0.0 && self.gmsk_bt > 0.0) {
            return bad("Gaussian BT products must be positive");
        }
        if !(self.cpfsk_index > 0.0 && self.gfsk_index > 0.0) {
            return bad("modulation indices must be positive");
        }
        Ok(())
    }
}

/// Complex baseband samples plus the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<Complex64>,
    pub label: ModClass,
    pub snr: SnrSpec,
    pub seed: u64,
}

impl ComplexSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Multiplies every sample by `a`.
    pub fn scaled(&self, a: Complex64) -> ComplexSignal {
        ComplexSignal {
            samples: self.samples.iter().map(|&x| x * a).collect(),
            ..self.clone()
        }
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

/// Clean waveform and, for noisy specs, the exact noise that was added.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub clean: Vec<Complex64>,
    pub noise: Option<Vec<Complex64>>,
}

impl Synthesis {
    pub fn combined(&self) -> Vec<Complex64> {
        match &self.noise {
            None => self.clean.clone(),
            Some(noise) => self.clean.iter().zip(noise).map(|(s, w)| s + w).collect(),
        }
    }
}

pub fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|x| x.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Generates a signal with the default waveform recipe.
pub fn generate(class: ModClass, snr: SnrSpec, n: usize, seed: u64) -> Result<ComplexSignal, ModgenError> {
    generate_with(&WaveformConfig::default(), class, snr, n, seed)
}

pub fn generate_with(
    cfg: &WaveformConfig,
    class: ModClass,
    snr: SnrSpec,
    n: usize,
    seed: u64,
) -> Result<ComplexSignal, ModgenError> {
    let synth = synthesize(cfg, class, snr, n, seed)?;
    Ok(ComplexSignal {
        samples: synth.combined(),
        label: class,
        snr,
        seed,
    })
}

/// Generates the clean waveform and the scaled noise separately.
pub fn synthesize(
    cfg: &WaveformConfig,
    class: ModClass,
    snr: SnrSpec,
    n: usize,
    seed: u64,
) -> Result<Synthesis, ModgenError> {
    cfg.validate()?;
    if n == 0 {
        return Err(ModgenError::EmptySignal);
    }
    if n < cfg.samples_per_symbol {
        return Err(ModgenError::TooShort {
            n,
            samples_per_symbol: cfg.samples_per_symbol,
        });
    }
    if let SnrSpec::TargetDb(db) = snr {
        if !db.is_finite() {
            return Err(ModgenError::InvalidSnr(db));
        }
    }

    let mut symbol_rng = stream_rng(seed, SYMBOL_STREAM);
    let mut clean = match class {
        ModClass::Cpfsk => frequency_modulated(cfg, n, cfg.cpfsk_index, None, &mut symbol_rng),
        ModClass::Gfsk => frequency_modulated(cfg, n, cfg.gfsk_index, Some(cfg.gfsk_bt), &mut symbol_rng),
        ModClass::Gmsk => frequency_modulated(cfg, n, 0.5, Some(cfg.gmsk_bt), &mut symbol_rng),
        ModClass::Oqpsk => offset_qpsk(cfg, n, &mut symbol_rng),
        _ => linear(cfg, class, n, &mut symbol_rng),
    };

    let power = mean_power(&clean);
    if power > 0.0 {
        let scale = power.sqrt().recip();
        clean.iter_mut().for_each(|x| *x *= scale);
    }

    let noise = match snr {
        SnrSpec::Noiseless => None,
        SnrSpec::TargetDb(db) => Some(scaled_noise(&clean, db, seed)),
    };
    Ok(Synthesis { clean, noise })
}

/// Signal-to-noise ratio in dB, treating `noisy - clean` as the noise.
pub fn measure_snr(clean: &ComplexSignal, noisy: &ComplexSignal) -> Result<f64, ModgenError> {
    measure_snr_samples(&clean.samples, &noisy.samples)
}

pub fn measure_snr_samples(clean: &[Complex64], noisy: &[Complex64]) -> Result<f64, ModgenError> {
    if clean.len() != noisy.len() {
        return Err(ModgenError::LengthMismatch {
            clean: clean.len(),
            noisy: noisy.len(),
        });
    }
    let signal = mean_power(clean);
    let noise = clean
        .iter()
        .zip(noisy)
        .map(|(s, y)| (y - s).norm_sqr())
        .sum::<f64>()
        / clean.len().max(1) as f64;
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// Unit-power constellation symbols (linear classes) or +/-1 frequency symbols
/// (FSK classes), drawn from the same stream `generate` uses for `seed`.
pub fn symbol_stream(class: ModClass, count: usize, seed: u64) -> Vec<Complex64> {
    let cfg = WaveformConfig::default();
    let mut rng = stream_rng(seed, SYMBOL_STREAM);
    match class {
        ModClass::Cpfsk | ModClass::Gfsk | ModClass::Gmsk => (0..count)
            .map(|_| Complex64::new(binary_symbol(&mut rng), 0.0))
            .collect(),
        _ => {
            let points = constellation(&cfg, class);
            let rms = mean_power(&points).sqrt();
            let mut mapper = SymbolMapper::new(class, points);
            (0..count).map(|_| mapper.next(&mut rng) / rms).collect()
        }
    }
}

/// Constellation points indexed by Gray-decoded position.
pub fn constellation(cfg: &WaveformConfig, class: ModClass) -> Vec<Complex64> {
    let real = |v: Vec<f64>| v.into_iter().map(|r| Complex64::new(r, 0.0)).collect();
    let bipolar = |m: usize| (0..m).map(|i| 2.0 * i as f64 - (m as f64 - 1.0)).collect::<Vec<_>>();
    let unipolar = |m: usize| (0..m).map(|i| 2.0 * i as f64 + 1.0).collect::<Vec<_>>();
    let ask = |m: usize| match cfg.ask_levels {
        AskLevels::Unipolar => unipolar(m),
        AskLevels::Bipolar => bipolar(m),
    };
    match class {
        ModClass::Ask4 => real(ask(4)),
        ModClass::Ask8 => real(ask(8)),
        ModClass::Pam4 => real(bipolar(4)),
        ModClass::Pam16 => real(bipolar(16)),
        ModClass::Ook => real(vec![0.0, 1.0]),
        // DQPSK and OQPSK both sit on the pi/4-rotated QPSK circle.
        _ => (0..4)
            .map(|i| Complex64::from_polar(1.0, FRAC_PI_4 + i as f64 * FRAC_PI_2))
            .collect(),
    }
}

fn bits_per_symbol(points: usize) -> u32 {
    points.trailing_zeros()
}

fn gray_to_position(label: u32) -> u32 {
    let mut pos = label;
    let mut shift = label >> 1;
    while shift != 0 {
        pos ^= shift;
        shift >>= 1;
    }
    pos
}

/// Maps random bit groups to constellation points through a Gray code.
/// DQPSK advances an accumulated phase instead of selecting a point.
struct SymbolMapper {
    class: ModClass,
    points: Vec<Complex64>,
    bits: u32,
    phase: f64,
}

impl SymbolMapper {
    fn new(class: ModClass, points: Vec<Complex64>) -> Self {
        let bits = bits_per_symbol(points.len());
        Self {
            class,
            points,
            bits,
            phase: 0.0,
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> Complex64 {
        let label: u32 = rng.random_range(0..(1u32 << self.bits));
        let pos = gray_to_position(label);
        if self.class == ModClass::Dqpsk {
            self.phase = (self.phase + pos as f64 * FRAC_PI_2) % (2.0 * PI);
            Complex64::from_polar(1.0, FRAC_PI_4 + self.phase)
        } else {
            self.points[pos as usize]
        }
    }
}

fn binary_symbol(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Number of symbols needed so the output window sits past the filter transient.
fn symbol_count(n: usize, sps: usize, span: usize) -> usize {
    span + n.div_ceil(sps) + 1
}

fn linear(cfg: &WaveformConfig, class: ModClass, n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let sps = cfg.samples_per_symbol;
    let span = cfg.rrc_span_symbols;
    let nsym = symbol_count(n, sps, span);
    let mut mapper = SymbolMapper::new(class, constellation(cfg, class));

    let mut train = vec![Complex64::new(0.0, 0.0); nsym * sps];
    for k in 0..nsym {
        train[k * sps] = mapper.next(rng);
    }
    let taps = pulse::root_raised_cosine(cfg.rrc_rolloff, sps, span);
    let shaped = pulse::convolve(&train, &taps);
    let offset = span * sps;
    shaped[offset..offset + n].to_vec()
}

fn offset_qpsk(cfg: &WaveformConfig, n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let sps = cfg.samples_per_symbol;
    let span = cfg.rrc_span_symbols;
    let nsym = symbol_count(n, sps, span);
    let mut mapper = SymbolMapper::new(ModClass::Oqpsk, constellation(cfg, ModClass::Oqpsk));
    let half = sps / 2;

    let mut train = vec![Complex64::new(0.0, 0.0); nsym * sps + half];
    for k in 0..nsym {
        let s = mapper.next(rng);
        train[k * sps].re += s.re;
        train[k * sps + half].im += s.im;
    }
    let taps = pulse::root_raised_cosine(cfg.rrc_rolloff, sps, span);
    let shaped = pulse::convolve(&train, &taps);
    let offset = span * sps;
    shaped[offset..offset + n].to_vec()
}

fn frequency_modulated(
    cfg: &WaveformConfig,
    n: usize,
    index: f64,
    gaussian_bt: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Vec<Complex64> {
    let sps = cfg.samples_per_symbol;
    let span = cfg.gaussian_span_symbols;
    let nsym = symbol_count(n, sps, span);

    let nrz: Vec<f64> = (0..nsym)
        .flat_map(|_| std::iter::repeat_n(binary_symbol(rng), sps))
        .collect();
    let freq = match gaussian_bt {
        Some(bt) => pulse::convolve_real(&nrz, &pulse::gaussian(bt, sps, span)),
        None => nrz,
    };

    let step = PI * index / sps as f64;
    let offset = span * sps;
    let mut phase = 0.0;
    let mut out = Vec::with_capacity(n);
    for (k, f) in freq.iter().enumerate().take(offset + n) {
        phase += step * f;
        if k >= offset {
            out.push(Complex64::from_polar(1.0, phase));
        }
    }
    out
}

fn scaled_noise(clean: &[Complex64], snr_db: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = stream_rng(seed, NOISE_STREAM);
    let raw: Vec<Complex64> = (0..clean.len())
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        })
        .collect();
    let target = mean_power(clean) * 10f64.powf(-snr_db / 10.0);
    let raw_power = mean_power(&raw);
    let scale = if raw_power > 0.0 { (target / raw_power).sqrt() } else { 0.0 };
    raw.into_iter().map(|w| w * scale).collect()
}
