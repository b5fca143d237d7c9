use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The closed set of modulation classes, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ModClass {
    Ask4,
    Pam4,
    Ask8,
    Pam16,
    Cpfsk,
    Dqpsk,
    Gfsk,
    Gmsk,
    Ook,
    Oqpsk,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown modulation class `{0}`")]
pub struct UnknownClass(pub String);

impl ModClass {
    pub const COUNT: usize = 10;

    pub const ALL: [ModClass; Self::COUNT] = [
        ModClass::Ask4,
        ModClass::Pam4,
        ModClass::Ask8,
        ModClass::Pam16,
        ModClass::Cpfsk,
        ModClass::Dqpsk,
        ModClass::Gfsk,
        ModClass::Gmsk,
        ModClass::Ook,
        ModClass::Oqpsk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModClass::Ask4 => "4ASK",
            ModClass::Pam4 => "4PAM",
            ModClass::Ask8 => "8ASK",
            ModClass::Pam16 => "16PAM",
            ModClass::Cpfsk => "CPFSK",
            ModClass::Dqpsk => "DQPSK",
            ModClass::Gfsk => "GFSK",
            ModClass::Gmsk => "GMSK",
            ModClass::Ook => "OOK",
            ModClass::Oqpsk => "OQPSK",
        }
    }

    /// Position in canonical order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<ModClass> {
        Self::ALL.get(index).copied()
    }

    /// Frequency-modulated classes with a constant complex envelope.
    pub fn is_constant_envelope(self) -> bool {
        matches!(self, ModClass::Cpfsk | ModClass::Gfsk | ModClass::Gmsk)
    }
}

impl fmt::Display for ModClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownClass(s.to_string()))
    }
}

impl From<ModClass> for String {
    fn from(c: ModClass) -> String {
        c.as_str().to_string()
    }
}

impl TryFrom<String> for ModClass {
    type Error = UnknownClass;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
