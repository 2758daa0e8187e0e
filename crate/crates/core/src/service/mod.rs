//! Annotation backend: per-annotator projects over a shared batch in two
//! setups (with and without explanations), sequential labelling with
//! last-write-wins revisions, attention checks on disclosed posts, the
//! post-task survey, label exports and report replay.
//!
//! State lives in an append-only JSONL event log that is fsynced before a
//! call returns, with periodic snapshots written by atomic rename.

mod annotate;
mod export;
mod store;

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::agreement::AgreementError;
use crate::detector::DetectorError;
use crate::Label;

pub use annotate::{batch_from_corpus, AnnotationService, EXPLANATION_DELIMITER};
pub use export::{
    auto_report_manifest, replay_report, ExportFilter, ExportManifest, LabelExport, RaterInfo,
    ReplayOutput,
};
pub use store::SNAPSHOT_EVERY;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid request: {0}")]
    Validation(String),
    #[error("event log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error(transparent)]
    Agreement(#[from] AgreementError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expertise {
    NoExperience,
    SomeExperience,
    LegalExpert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    WithoutExplanations,
    WithExplanations,
}

impl Setup {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::WithoutExplanations => "without_explanations",
            Self::WithExplanations => "with_explanations",
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An annotator known only by an opaque id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotator {
    pub annotator_id: String,
    pub expertise: Expertise,
    pub setups: BTreeSet<Setup>,
}

/// One batch post as stored by the service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchItem {
    pub post_id: String,
    pub caption: String,
    /// Explanation text in "Key indicators" format, label line included.
    pub explanation: Option<String>,
    pub model_label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredBatch {
    pub batch_id: String,
    pub items: Vec<BatchItem>,
    pub disclosed_items: BTreeSet<String>,
}

impl StoredBatch {
    pub fn item(&self, post_id: &str) -> Option<&BatchItem> {
        self.items.iter().find(|i| i.post_id == post_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub project_id: String,
    pub annotator_id: String,
    pub setup: Setup,
    pub batch_id: String,
    pub item_order: Vec<String>,
    pub seed: u64,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub project_id: String,
    pub post_id: String,
    pub label: Label,
    pub labeled_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemView {
    pub post_id: String,
    pub caption: String,
    pub explanation_block: Option<String>,
    /// 1-based.
    pub position: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextItem {
    Item(ItemView),
    Done { total: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAck {
    pub project_id: String,
    pub post_id: String,
    pub label: Label,
    pub labeled_at: DateTime<Utc>,
    pub labelled: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    pub disclosed_seen: usize,
    pub disclosed_correct: usize,
    /// `None` until a disclosed post has been labelled.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aspect {
    Reasoning,
    SpecificWords,
    ClearExamples,
    Other(String),
    None,
}

/// Post-task questionnaire. Scales run from 1 to 5.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyAnswers {
    pub q1_helpful: u8,
    pub q2_accurate: u8,
    pub q3_agree_freq: u8,
    pub q4_confidence: bool,
    pub q5_aspects: Vec<Aspect>,
    #[serde(default)]
    pub q6_understanding: String,
    #[serde(default)]
    pub q7_improvements: String,
}

impl SurveyAnswers {
    pub fn validate(&self) -> Result<(), ServiceError> {
        for (name, v) in [
            ("q1_helpful", self.q1_helpful),
            ("q2_accurate", self.q2_accurate),
            ("q3_agree_freq", self.q3_agree_freq),
        ] {
            if !(1..=5).contains(&v) {
                return Err(ServiceError::Validation(format!("{name} must be between 1 and 5, got {v}")));
            }
        }
        if self.q5_aspects.is_empty() {
            return Err(ServiceError::Validation("q5_aspects needs at least one answer".into()));
        }
        if self.q5_aspects.contains(&Aspect::None) && self.q5_aspects.len() > 1 {
            return Err(ServiceError::Validation("q5_aspects: 'none' excludes other answers".into()));
        }
        let unique: BTreeSet<&Aspect> = self.q5_aspects.iter().collect();
        if unique.len() != self.q5_aspects.len() {
            return Err(ServiceError::Validation("q5_aspects contains duplicates".into()));
        }
        if self
            .q5_aspects
            .iter()
            .any(|a| matches!(a, Aspect::Other(t) if t.trim().is_empty()))
        {
            return Err(ServiceError::Validation("q5_aspects: 'other' needs text".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub project_id: String,
    #[serde(flatten)]
    pub answers: SurveyAnswers,
    pub submitted_at: DateTime<Utc>,
}
