//! In-context automatic modulation classification.
//!
//! The pipeline synthesizes baseband signals ([`modgen`]), summarizes each one
//! into descriptive statistics, k-statistics and higher-order cumulants
//! ([`stats`], [`cumulants`]), renders those summaries into a classification
//! prompt ([`promptkit`]), sends the prompt to a backend ([`llmclient`]) and
//! scores the answers ([`evalharness`]). [`cli`] wires it into the `amc` binary.

pub mod cli;
pub mod cumulants;
pub mod evalharness;
pub mod llmclient;
pub mod modgen;
pub mod promptkit;
pub mod stats;
