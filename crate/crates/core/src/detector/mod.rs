//! Sponsored-content classifier: word n-gram TF-IDF features feeding a
//! logistic regression, the evaluation metrics used to compare models, and
//! delimited prediction files for importing external model outputs.

mod eval;
mod logreg;
mod predictions;
mod tfidf;
mod tokenize;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Label;

pub use eval::{evaluate, f1_pct, macro_f1, Confusion, EvalReport, TruthRecord};
pub use logreg::{sigmoid, train_logreg, LogRegModel, Objective, TrainConfig, TrainingMeta};
pub use predictions::{export_predictions, import_predictions, Prediction, PREDICTION_HEADER};
pub use tfidf::{ngrams, SparseVector, Vectorizer, VectorizerConfig};
pub use tokenize::{tokenize, tokenize_spans, Token, TokenizerConfig};

#[derive(Debug, thiserror::Error)]
pub enum DetectorError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("feature index {index} out of range for dimension {dim}")]
    FeatureOutOfRange { index: usize, dim: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("no prediction for post {0:?}")]
    MissingPrediction(String),
    #[error("more than one prediction for post {0:?}")]
    DuplicatePrediction(String),
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("duplicate prediction for post {post_id:?} from model {model_id:?}")]
    DuplicateImport { post_id: String, model_id: String },
    #[error("model artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub const ARTIFACT_FORMAT: &str = "sponsorscope-detector";
pub const ARTIFACT_VERSION: u32 = 1;

/// A fitted vectorizer and classifier saved together as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedDetector {
    pub format: String,
    pub version: u32,
    pub model_id: String,
    pub vectorizer: Vectorizer,
    pub model: LogRegModel,
    pub train_config: TrainConfig,
}

impl TrainedDetector {
    /// Fits the vectorizer on `captions` and trains the classifier on the
    /// resulting features.
    pub fn fit(
        model_id: impl Into<String>,
        captions: &[&str],
        labels: &[Label],
        tokenizer: TokenizerConfig,
        vectorizer_config: VectorizerConfig,
        train_config: TrainConfig,
    ) -> Result<Self, DetectorError> {
        let vectorizer = Vectorizer::fit(captions.iter().copied(), tokenizer, vectorizer_config)?;
        let xs: Vec<SparseVector> = captions.iter().map(|c| vectorizer.vectorize(c)).collect();
        let model = train_logreg(&xs, labels, vectorizer.dim(), &train_config)?;
        Ok(Self {
            format: ARTIFACT_FORMAT.to_string(),
            version: ARTIFACT_VERSION,
            model_id: model_id.into(),
            vectorizer,
            model,
            train_config,
        })
    }

    pub fn probability(&self, caption: &str) -> f64 {
        self.model.probability(&self.vectorizer.vectorize(caption))
    }

    pub fn predict(&self, post_id: &str, caption: &str) -> Prediction {
        let probability = self.probability(caption);
        Prediction {
            post_id: post_id.to_string(),
            label: Label::from_sponsored(probability >= 0.5),
            probability: Some(probability),
            model_id: self.model_id.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String, DetectorError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, DetectorError> {
        let d: Self = serde_json::from_str(text)?;
        if d.format != ARTIFACT_FORMAT {
            return Err(DetectorError::Artifact(format!("unexpected format {:?}", d.format)));
        }
        if d.version != ARTIFACT_VERSION {
            return Err(DetectorError::Artifact(format!("unsupported version {}", d.version)));
        }
        if d.vectorizer.idf.len() != d.vectorizer.vocabulary.len()
            || d.model.weights.len() != d.vectorizer.dim()
        {
            return Err(DetectorError::Artifact("dimension mismatch".to_string()));
        }
        Ok(d)
    }

    pub fn save(&self, path: &Path) -> Result<(), DetectorError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DetectorError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
