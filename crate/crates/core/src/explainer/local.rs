use super::{Explanation, ExplanationSource, ImpliedLabel};
use crate::detector::{LogRegModel, TrainedDetector, Vectorizer};
use crate::Label;

pub const DEFAULT_TOP_K: usize = 5;

/// Feature-contribution explanation from the linear model. Indicators are the
/// caption substrings behind the `k` features with the largest
/// `|weight * value|`, strongest first (ties by feature index).
pub fn local_explain(
    model: &LogRegModel,
    vectorizer: &Vectorizer,
    post_id: &str,
    caption: &str,
    k: usize,
) -> Explanation {
    let x = vectorizer.vectorize(caption);
    let spans = vectorizer.locate(caption);
    let probability = model.probability(&x);
    let label = Label::from_sponsored(probability >= 0.5);

    let mut contributions: Vec<(usize, f64)> =
        x.iter().map(|(i, v)| (i, model.weights[i] * v)).collect();
    contributions.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    contributions.truncate(k);

    let phrases: Vec<(String, f64)> = contributions
        .iter()
        .map(|&(i, c)| (caption[spans[&i].clone()].to_string(), c))
        .collect();

    let name = if label.is_sponsored() { "sponsored" } else { "not sponsored" };
    let rationale = if phrases.is_empty() {
        format!(
            "No words from this caption are known to the local classifier, so the label \
             follows its prior: {name} (p = {probability:.2})."
        )
    } else {
        let listed = phrases
            .iter()
            .map(|(p, c)| format!("'{p}' ({c:+.3})"))
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "The local classifier rates this post {name} (p = {probability:.2}). \
             Largest contributions: {listed}."
        )
    };

    Explanation {
        post_id: post_id.to_string(),
        key_indicators: phrases.into_iter().map(|(p, _)| p).collect(),
        rationale,
        implied_label: ImpliedLabel::from(label),
        source: ExplanationSource::LocalFallback,
    }
}

impl TrainedDetector {
    pub fn explain(&self, post_id: &str, caption: &str, k: usize) -> Explanation {
        local_explain(&self.model, &self.vectorizer, post_id, caption, k)
    }
}
