//! Linearizes statistical summaries into `{key: value, ...}` text and
//! assembles the instruction / exemplar / query prompt.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cumulants::CumulantSet;
use crate::modgen::ModClass;
use crate::stats::StatSummary;

pub const DEFAULT_INSTRUCTION: &str = "You are an expert quantitative analyst in wireless communication modulation. \
Based on your knowledge in wireless communication modulation and the detailed signal statistics provided below, \
determine the modulation type.\n\
1. DO NOT PROVIDE ANY ADDITIONAL INFORMATION OR CONTEXT.\n\
2. No OTHER TEXT, NO BLABBER.";

pub const QUERY_PREFIX: &str = "Question Sample: ";
pub const CHOICES_PREFIX: &str = "Answer Choices: ";

/// Imaginary parts at or below this magnitude are not rendered.
pub const IMAG_RENDER_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("instruction+context mode needs at least one exemplar")]
    NoExemplars,
    #[error("exemplar slot {slot} of class {label} appears more than once")]
    DuplicateExemplar { label: ModClass, slot: usize },
}

/// Prompt composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum PromptMode {
    /// Instruction and answer-choices suffix only.
    #[serde(rename = "is")]
    #[value(name = "is")]
    InstructionSuffix,
    /// Instruction, exemplar context, query and suffix.
    #[serde(rename = "icst")]
    #[value(name = "icst")]
    InstructionContextSuffix,
}

impl PromptMode {
    /// Label used in report tables.
    pub fn table_label(self) -> &'static str {
        match self {
            PromptMode::InstructionSuffix => "I+S",
            PromptMode::InstructionContextSuffix => "I+C+S",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub instruction: String,
    /// Decimal places for exemplar summaries.
    pub exemplar_precision: usize,
    /// Decimal places for the query summary.
    pub query_precision: usize,
    /// Approximate token budget (characters / 4) above which a warning is logged.
    pub token_budget: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            instruction: DEFAULT_INSTRUCTION.to_string(),
            exemplar_precision: 3,
            query_precision: 3,
            token_budget: 16_384,
        }
    }
}

/// A summary rendered as brace-delimited, comma-separated `key: value` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearizedSummary {
    pub text: String,
}

/// Formats a value with `precision` decimals and trims trailing zeros, keeping
/// at least one. Exact zeros (including -0.0) render as `0.0`; values that
/// only round to zero keep their sign.
pub fn format_value(v: f64, precision: usize) -> String {
    if v == 0.0 {
        return "0.0".to_string();
    }
    let mut s = format!("{v:.precision$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').len();
        s.truncate(trimmed);
        if s.ends_with('.') {
            s.push('0');
        }
    } else {
        s.push_str(".0");
    }
    s
}

fn format_complex(re: f64, im: f64, precision: usize) -> String {
    let mut s = format_value(re, precision);
    if im.abs() > IMAG_RENDER_THRESHOLD {
        let imag = format_value(im, precision);
        if imag.starts_with('-') {
            s.push_str(&imag);
        } else {
            s.push('+');
            s.push_str(&imag);
        }
        s.push('j');
    }
    s
}

/// Renders every summary field in the fixed key order.
pub fn linearize(summary: &StatSummary, precision: usize) -> LinearizedSummary {
    let mut text = String::from("{");
    for (k, (key, value)) in summary.scalar_entries().iter().enumerate() {
        if k > 0 {
            text.push_str(", ");
        }
        if *key == "nobs" {
            let _ = write!(text, "nobs: {}", summary.nobs);
        } else {
            let _ = write!(text, "{key}: {}", format_value(*value, precision));
        }
    }
    for (key, value, _) in summary.cumulants.entries() {
        let _ = write!(text, ", {key}: {}", format_complex(value.re, value.im, precision));
    }
    text.push('}');
    LinearizedSummary { text }
}

/// Every key a linearized summary carries, in order.
pub fn linearized_keys() -> Vec<&'static str> {
    StatSummary::SCALAR_KEYS
        .iter()
        .chain(CumulantSet::KEYS.iter())
        .copied()
        .collect()
}

/// One labelled reference summary. `slot` orders exemplars within a class.
#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub label: ModClass,
    pub slot: usize,
    pub summary: StatSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub mode: PromptMode,
    pub instruction: String,
    /// Ordered by (canonical class order, slot).
    pub exemplars: Vec<(LinearizedSummary, ModClass)>,
    pub query: LinearizedSummary,
    pub suffix: String,
}

impl PromptBundle {
    pub fn instruction_block(&self) -> String {
        format!("{}\n\n", self.instruction)
    }

    /// The exemplar lines plus their trailing blank line; empty without exemplars.
    pub fn exemplar_block(&self) -> String {
        if self.exemplars.is_empty() {
            return String::new();
        }
        let mut out = String::new();
        for (k, (summary, label)) in self.exemplars.iter().enumerate() {
            let n = k + 1;
            let _ = writeln!(out, "Example {n}: {}, Answer {n}: {label}", summary.text);
        }
        out.push('\n');
        out
    }

    pub fn query_line(&self) -> String {
        format!("{QUERY_PREFIX}{}\n", self.query.text)
    }

    pub fn suffix_line(&self) -> String {
        format!("{}\n", self.suffix)
    }

    pub fn render(&self) -> String {
        let mut out = self.instruction_block();
        out.push_str(&self.exemplar_block());
        out.push_str(&self.query_line());
        out.push_str(&self.suffix_line());
        out
    }

    /// Rough token count: characters / 4.
    pub fn approx_tokens(&self) -> usize {
        self.render().len().div_ceil(4)
    }
}

pub fn answer_choices() -> String {
    let names: Vec<&str> = ModClass::ALL.iter().map(|c| c.as_str()).collect();
    format!("{CHOICES_PREFIX}{}", names.join(", "))
}

/// Builds the prompt for `query`. In I+S mode `exemplars` is ignored.
pub fn build_prompt(
    query: &StatSummary,
    exemplars: &[Exemplar],
    mode: PromptMode,
    cfg: &PromptConfig,
) -> Result<PromptBundle, PromptError> {
    let ordered = match mode {
        PromptMode::InstructionSuffix => Vec::new(),
        PromptMode::InstructionContextSuffix => {
            if exemplars.is_empty() {
                return Err(PromptError::NoExemplars);
            }
            let mut sorted: Vec<&Exemplar> = exemplars.iter().collect();
            sorted.sort_by_key(|e| (e.label, e.slot));
            if let Some(w) = sorted.windows(2).find(|w| (w[0].label, w[0].slot) == (w[1].label, w[1].slot)) {
                return Err(PromptError::DuplicateExemplar {
                    label: w[0].label,
                    slot: w[0].slot,
                });
            }
            sorted
                .into_iter()
                .map(|e| (linearize(&e.summary, cfg.exemplar_precision), e.label))
                .collect()
        }
    };

    let bundle = PromptBundle {
        mode,
        instruction: cfg.instruction.clone(),
        exemplars: ordered,
        query: linearize(query, cfg.query_precision),
        suffix: answer_choices(),
    };
    let tokens = bundle.approx_tokens();
    if tokens > cfg.token_budget {
        log::warn!("prompt is ~{tokens} tokens, above the budget of {}", cfg.token_budget);
    }
    Ok(bundle)
}

/// Field values recovered from a rendered summary. Complex values keep only
/// their real part.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedSummary {
    pub fields: Vec<(String, f64)>,
}

impl ParsedSummary {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

/// The machine-readable content of a rendered prompt.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedPrompt {
    pub exemplars: Vec<(ParsedSummary, ModClass)>,
    pub query: Option<ParsedSummary>,
}

/// Parses the leading real number of a rendered value such as `1.5`,
/// `-0.25+0.1j` or `7`.
fn parse_leading_real(s: &str) -> Option<f64> {
    let s = s.trim();
    let bytes = s.as_bytes();
    let mut end = 0;
    while end < bytes.len() {
        let c = bytes[end];
        let sign_ok = (c == b'-' || c == b'+') && (end == 0 || matches!(bytes[end - 1], b'e' | b'E'));
        if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || sign_ok {
            end += 1;
        } else {
            break;
        }
    }
    s[..end].parse().ok()
}

/// Parses a `{key: value, ...}` block. Returns `None` if the braces are missing.
pub fn parse_summary(text: &str) -> Option<ParsedSummary> {
    let inner = text.trim().strip_prefix('{')?.strip_suffix('}')?;
    let fields = inner
        .split(", ")
        .filter_map(|pair| {
            let (k, v) = pair.split_once(": ")?;
            Some((k.trim().to_string(), parse_leading_real(v)?))
        })
        .collect();
    Some(ParsedSummary { fields })
}

/// Recovers exemplars and the query from a rendered prompt. Lines that do not
/// match the layout are skipped.
pub fn parse_prompt(text: &str) -> ParsedPrompt {
    let mut out = ParsedPrompt::default();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix(QUERY_PREFIX) {
            out.query = parse_summary(rest);
        } else if let Some(rest) = line.strip_prefix("Example ") {
            let Some(open) = rest.find('{') else { continue };
            let Some(close) = rest.rfind('}') else { continue };
            let Some(summary) = parse_summary(&rest[open..=close]) else { continue };
            let tail = &rest[close + 1..];
            let Some(label) = tail.rsplit(": ").next().and_then(|n| n.trim().parse::<ModClass>().ok()) else {
                continue;
            };
            out.exemplars.push((summary, label));
        }
    }
    out
}
