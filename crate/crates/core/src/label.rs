use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Binary sponsorship label shared by every stage of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Sponsored,
    NonSponsored,
}

impl Label {
    pub fn is_sponsored(self) -> bool {
        matches!(self, Label::Sponsored)
    }

    pub fn from_sponsored(sponsored: bool) -> Self {
        if sponsored {
            Label::Sponsored
        } else {
            Label::NonSponsored
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Sponsored => Label::NonSponsored,
            Label::NonSponsored => Label::Sponsored,
        }
    }

    /// Canonical text form used in every delimited file.
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Sponsored => "sponsored",
            Label::NonSponsored => "non_sponsored",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label {0:?}")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    /// Accepts the canonical form plus the spellings used by common
    /// annotation tools ("Sponsored", "Non-Sponsored", "not sponsored").
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        match norm.as_str() {
            "sponsored" => Ok(Label::Sponsored),
            "nonsponsored" | "notsponsored" => Ok(Label::NonSponsored),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}
