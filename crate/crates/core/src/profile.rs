//! Paper-scale versus desk-scale configurations.

use serde::{Deserialize, Serialize};

/// Scale at which the whole pipeline runs.
///
/// `Paper` is the canonical 1024-sample / 2048-bin configuration. `Desk` keeps
/// the chirp rate and sampling rate (so every target distance maps to the same
/// beat frequency) but shortens the sweep to 256 samples and the FFT to 512
/// bins, and narrows the networks, so the full pipeline fits a CI budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Paper,
    Desk,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Paper => "paper",
            Profile::Desk => "desk",
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Profile::Paper => 0,
            Profile::Desk => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Profile::Paper),
            1 => Some(Profile::Desk),
            _ => None,
        }
    }
}

impl core::fmt::Display for Profile {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Profile {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            other => Err(crate::error::invalid(
                "profile",
                alloc::format!("unknown profile `{other}` (expected paper|desk)"),
            )),
        }
    }
}
