//! Inter-annotator agreement: nominal Krippendorff's alpha with missing data,
//! absolute and at-most-one-disagreement rates, attention-check accuracy,
//! sponsored share, pairwise spread, majority-vs-model agreement and the
//! subgroup report that ties them together.

mod matrix;
mod metrics;
mod report;

pub use matrix::{read_label_file, write_label_file, LabelMatrix, LabelRow, LABEL_HEADER};
pub use metrics::{
    absolute_agreement, alpha_nominal, at_most_one_disagreement, disclosed_accuracy,
    krippendorff_alpha, majority_label, model_agreement_majority, pairwise_agreement,
    relative_diff, sample_std, sponsored_proportion, BiasReport, PairRecord, PairwiseStats,
    PairwiseSummary, SponsoredRate,
};
pub use report::{
    build_report, group_report, render_text, AgreementReport, Comparison, DiffRow, FullReport,
    GroupReport, MetricDeltas, ReportManifest, SubgroupSpec,
};

#[derive(Debug, thiserror::Error)]
pub enum AgreementError {
    #[error("need at least {needed} annotators, got {got}")]
    TooFewAnnotators { needed: usize, got: usize },
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),
    #[error("unknown group {0:?}")]
    UnknownGroup(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("annotator {annotator:?} labelled item {item:?} twice")]
    DuplicateCell { annotator: String, item: String },
    #[error("cell grid does not match the annotator/item lists")]
    Shape,
    #[error("no model prediction for item {0:?}")]
    MissingPrediction(String),
    #[error("relative difference undefined for a zero base")]
    ZeroBase,
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
