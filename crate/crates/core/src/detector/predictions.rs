use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::DetectorError;
use crate::Label;

/// One model output for one post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub post_id: String,
    pub label: Label,
    /// Always set for models trained here; optional for imported predictions.
    pub probability: Option<f64>,
    pub model_id: String,
}

pub const PREDICTION_HEADER: [&str; 4] = ["post_id", "label", "probability", "model_id"];

#[derive(Debug, Deserialize)]
struct PredictionRow {
    post_id: String,
    label: String,
    #[serde(default)]
    probability: Option<f64>,
    model_id: String,
}

/// Reads a `post_id,label,probability,model_id` file. Row numbers in errors
/// count the header as row 1.
pub fn import_predictions<R: Read>(reader: R) -> Result<Vec<Prediction>, DetectorError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| DetectorError::Parse {
        row: 1,
        message: e.to_string(),
    })?;
    for required in ["post_id", "label", "model_id"] {
        if !headers.iter().any(|h| h == required) {
            return Err(DetectorError::Parse {
                row: 1,
                message: format!("missing column {required:?}"),
            });
        }
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<PredictionRow>().enumerate() {
        let row_no = i + 2;
        let row = row.map_err(|e| DetectorError::Parse {
            row: row_no,
            message: e.to_string(),
        })?;
        let label: Label = row.label.parse().map_err(|e| DetectorError::Parse {
            row: row_no,
            message: format!("{e}"),
        })?;
        if let Some(p) = row.probability {
            if !(0.0..=1.0).contains(&p) {
                return Err(DetectorError::Parse {
                    row: row_no,
                    message: format!("probability {p} outside [0, 1]"),
                });
            }
        }
        if !seen.insert((row.post_id.clone(), row.model_id.clone())) {
            return Err(DetectorError::DuplicateImport {
                post_id: row.post_id,
                model_id: row.model_id,
            });
        }
        out.push(Prediction {
            post_id: row.post_id,
            label,
            probability: row.probability,
            model_id: row.model_id,
        });
    }
    Ok(out)
}

pub fn export_predictions<W: Write>(writer: W, preds: &[Prediction]) -> Result<(), DetectorError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PREDICTION_HEADER)?;
    for p in preds {
        let prob = p.probability.map(|v| format!("{v:.6}")).unwrap_or_default();
        w.write_record([p.post_id.as_str(), p.label.as_str(), prob.as_str(), p.model_id.as_str()])?;
    }
    w.flush()?;
    Ok(())
}
