//! Where each pipeline stage keeps its files inside `--data-dir`.

use std::path::{Path, PathBuf};

pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.jsonl")
    }

    pub fn weak_labeled(&self) -> PathBuf {
        self.root.join("weak_labeled.jsonl")
    }

    pub fn split_dir(&self) -> PathBuf {
        self.root.join("split")
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("model.json")
    }

    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions.csv")
    }

    pub fn explanations(&self) -> PathBuf {
        self.root.join("explanations.jsonl")
    }

    pub fn cache(&self) -> PathBuf {
        self.root.join("cache")
    }

    pub fn batch(&self, batch_id: &str) -> PathBuf {
        self.root.join("batches").join(format!("{batch_id}.json"))
    }

    pub fn service(&self) -> PathBuf {
        self.root.join("service")
    }

    pub fn export_dir(&self, batch_id: &str) -> PathBuf {
        self.root.join("exports").join(batch_id)
    }
}

/// File names inside an export directory.
pub const LABELS_FILE: &str = "labels.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DISCLOSED_FILE: &str = "disclosed.ids";
pub const MODEL_LABELS_FILE: &str = "model_labels.csv";
