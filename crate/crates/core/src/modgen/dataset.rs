//! Dataset protocol: exemplar and test records evenly split over the classes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_with, stream_rng, ComplexSignal, ModClass, ModgenError, SnrSpec, WaveformConfig};
use super::{PROTOCOL_SNR_RANGE_DB, SNR_DRAW_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Exemplar,
    Test,
}

impl Split {
    fn tag(self) -> u64 {
        match self {
            Split::Exemplar => 1,
            Split::Test => 2,
        }
    }
}

/// Noise condition for a whole dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SnrCondition {
    Noiseless,
    /// One SNR per signal, drawn uniformly from `[min_db, max_db)`.
    Uniform { min_db: f64, max_db: f64 },
}

impl SnrCondition {
    pub fn protocol_noisy() -> Self {
        let (min_db, max_db) = PROTOCOL_SNR_RANGE_DB;
        SnrCondition::Uniform { min_db, max_db }
    }

    /// Report label: `100` for noiseless, `[lo~hi]` for a range.
    pub fn table_label(&self) -> String {
        match self {
            SnrCondition::Noiseless => "100".to_string(),
            SnrCondition::Uniform { min_db, max_db } => format!("[{min_db}~{max_db}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetProtocol {
    pub test_count: usize,
    pub exemplars_per_class: usize,
    pub snr: SnrCondition,
    pub master_seed: u64,
    pub samples: usize,
    pub waveform: WaveformConfig,
}

impl Default for DatasetProtocol {
    fn default() -> Self {
        Self {
            test_count: 2000,
            exemplars_per_class: 2,
            snr: SnrCondition::Noiseless,
            master_seed: 42,
            samples: 1024,
            waveform: WaveformConfig::default(),
        }
    }
}

impl DatasetProtocol {
    pub fn validate(&self) -> Result<(), ModgenError> {
        if self.test_count == 0 || !self.test_count.is_multiple_of(ModClass::COUNT) {
            return Err(ModgenError::UnevenClassSplit(self.test_count));
        }
        if let SnrCondition::Uniform { min_db, max_db } = self.snr {
            if !(min_db.is_finite() && max_db.is_finite()) || min_db > max_db {
                return Err(ModgenError::InvalidProtocol(format!(
                    "SNR range [{min_db}, {max_db}] is not a finite ordered interval"
                )));
            }
            let (lo, hi) = PROTOCOL_SNR_RANGE_DB;
            if min_db < lo || max_db > hi {
                log::warn!("SNR range [{min_db}, {max_db}] dB extends past the protocol range [{lo}, {hi}] dB");
            }
        }
        self.waveform.validate()
    }

    pub fn exemplar_count(&self) -> usize {
        self.exemplars_per_class * ModClass::COUNT
    }
}

/// A generated signal tagged with its split and its index within that split.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub split: Split,
    pub index: usize,
    pub signal: ComplexSignal,
}

impl SignalRecord {
    pub fn label(&self) -> ModClass {
        self.signal.label
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-record seed. The finalizer is a bijection and the inputs never
/// collide across splits, so exemplar and test seeds are always disjoint.
pub fn record_seed(master_seed: u64, split: Split, index: usize) -> u64 {
    let key = (split.tag() << 48) | (index as u64 & 0xFFFF_FFFF_FFFF);
    splitmix64(master_seed.wrapping_add(key))
}

/// Class of the `index`-th record of a split.
pub fn record_class(protocol: &DatasetProtocol, split: Split, index: usize) -> ModClass {
    let slot = match split {
        // Exemplars are grouped by class in canonical order.
        Split::Exemplar => index / protocol.exemplars_per_class.max(1),
        // Test records cycle through the classes.
        Split::Test => index % ModClass::COUNT,
    };
    ModClass::ALL[slot]
}

fn record_snr(condition: SnrCondition, seed: u64) -> SnrSpec {
    match condition {
        SnrCondition::Noiseless => SnrSpec::Noiseless,
        SnrCondition::Uniform { min_db, max_db } => {
            let u: f64 = stream_rng(seed, SNR_DRAW_STREAM).random();
            SnrSpec::TargetDb(min_db + (max_db - min_db) * u)
        }
    }
}

/// Exemplar records (grouped by class) followed by test records.
pub fn make_dataset(protocol: &DatasetProtocol) -> Result<Vec<SignalRecord>, ModgenError> {
    protocol.validate()?;
    let slots: Vec<(Split, usize)> = (0..protocol.exemplar_count())
        .map(|i| (Split::Exemplar, i))
        .chain((0..protocol.test_count).map(|i| (Split::Test, i)))
        .collect();

    slots
        .into_par_iter()
        .map(|(split, index)| {
            let seed = record_seed(protocol.master_seed, split, index);
            let class = record_class(protocol, split, index);
            let snr = record_snr(protocol.snr, seed);
            let signal = generate_with(&protocol.waveform, class, snr, protocol.samples, seed)?;
            Ok(SignalRecord { split, index, signal })
        })
        .collect()
}
