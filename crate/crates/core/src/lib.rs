//! Core library for sponsored-content annotation research tooling.
//!
//! The crate is split by pipeline stage:
//!
//! - [`corpus`]: post ingestion, disclosure scanning, weak labels, balanced
//!   sampling, temporal splits and annotation batches.
//! - [`detector`]: TF-IDF n-gram features and a logistic-regression
//!   classifier, evaluation metrics and prediction import/export.
//! - [`explainer`]: prompt recipes, a retrying/caching chat-completion client,
//!   explanation parsing and a local feature-contribution fallback.
//! - [`agreement`]: Krippendorff's alpha and the other inter-annotator
//!   agreement statistics, plus report builders.
//! - [`service`]: annotation projects, label persistence, attention checks,
//!   surveys, exports and report replay.

pub mod agreement;
pub mod corpus;
pub mod detector;
pub mod explainer;
pub mod service;

mod label;

pub use label::{Label, ParseLabelError};

pub use agreement::{AgreementReport, BiasReport, LabelMatrix, PairwiseStats};
pub use corpus::{AnnotationBatch, Corpus, DatasetSplit, DisclosureScan, Post, WeakLabeledPost};
pub use detector::{EvalReport, LogRegModel, Prediction, TrainedDetector, Vectorizer};
pub use explainer::{Explanation, ExplanationSource, ImpliedLabel, PromptRecipe};
pub use service::AnnotationService;
