use serde::{Deserialize, Serialize};

use super::tfidf::SparseVector;
use super::DetectorError;
use crate::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub l2_lambda: f64,
    /// Training stops once the absolute change in loss falls below this.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_epochs: 300,
            l2_lambda: 1e-4,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub learning_rate: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Loss before the first step followed by the loss after every epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2_lambda: f64,
    pub training_meta: TrainingMeta,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy plus `(lambda / 2) * ||w||^2`; the bias is not
/// regularised.
pub struct Objective<'a> {
    xs: &'a [SparseVector],
    ys: Vec<f64>,
    dim: usize,
    lambda: f64,
}

impl<'a> Objective<'a> {
    pub fn new(
        xs: &'a [SparseVector],
        labels: &[Label],
        dim: usize,
        lambda: f64,
    ) -> Result<Self, DetectorError> {
        if xs.is_empty() {
            return Err(DetectorError::EmptyTrainingSet);
        }
        if xs.len() != labels.len() {
            return Err(DetectorError::LengthMismatch {
                features: xs.len(),
                labels: labels.len(),
            });
        }
        if let Some(bad) = xs.iter().flat_map(|x| x.indices.iter()).find(|&&i| i >= dim) {
            return Err(DetectorError::FeatureOutOfRange { index: *bad, dim });
        }
        let ys = labels.iter().map(|l| f64::from(u8::from(l.is_sponsored()))).collect();
        Ok(Self { xs, ys, dim, lambda })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn loss(&self, weights: &[f64], bias: f64) -> f64 {
        let n = self.xs.len() as f64;
        let data: f64 = self
            .xs
            .iter()
            .zip(&self.ys)
            .map(|(x, &y)| {
                let z = x.dot(weights) + bias;
                softplus(z) - y * z
            })
            .sum();
        let reg: f64 = weights.iter().map(|w| w * w).sum();
        data / n + 0.5 * self.lambda * reg
    }

    /// Analytic gradient with respect to `(weights, bias)`.
    pub fn gradient(&self, weights: &[f64], bias: f64) -> (Vec<f64>, f64) {
        let n = self.xs.len() as f64;
        let mut grad: Vec<f64> = weights.iter().map(|w| self.lambda * w).collect();
        let mut grad_b = 0.0;
        for (x, &y) in self.xs.iter().zip(&self.ys) {
            let r = (sigmoid(x.dot(weights) + bias) - y) / n;
            for (i, v) in x.iter() {
                grad[i] += r * v;
            }
            grad_b += r;
        }
        (grad, grad_b)
    }
}

/// Full-batch gradient descent from zero.
pub fn train_logreg(
    xs: &[SparseVector],
    labels: &[Label],
    dim: usize,
    config: &TrainConfig,
) -> Result<LogRegModel, DetectorError> {
    let objective = Objective::new(xs, labels, dim, config.l2_lambda)?;
    let positives = labels.iter().filter(|l| l.is_sponsored()).count();
    if positives == 0 || positives == labels.len() {
        return Err(DetectorError::SingleClass);
    }

    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let initial_loss = objective.loss(&weights, bias);
    let mut history = vec![initial_loss];
    let mut epochs = 0;
    while epochs < config.max_epochs {
        let (grad, grad_b) = objective.gradient(&weights, bias);
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * g;
        }
        bias -= config.learning_rate * grad_b;
        epochs += 1;
        let loss = objective.loss(&weights, bias);
        let prev = *history.last().expect("history starts non-empty");
        history.push(loss);
        if !loss.is_finite() {
            return Err(DetectorError::Diverged { epoch: epochs });
        }
        if (prev - loss).abs() < config.tolerance {
            break;
        }
    }

    Ok(LogRegModel {
        weights,
        bias,
        l2_lambda: config.l2_lambda,
        training_meta: TrainingMeta {
            epochs,
            learning_rate: config.learning_rate,
            initial_loss,
            final_loss: *history.last().unwrap(),
            loss_history: history,
        },
    })
}

impl LogRegModel {
    pub fn decision(&self, x: &SparseVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    pub fn probability(&self, x: &SparseVector) -> f64 {
        sigmoid(self.decision(x))
    }

    /// Ties at exactly 0.5 go to Sponsored.
    pub fn predict(&self, x: &SparseVector) -> Label {
        Label::from_sponsored(self.probability(x) >= 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(pairs: &[(usize, f64)]) -> SparseVector {
        SparseVector::from_pairs(pairs.iter().copied())
    }

    #[test]
    fn separable_toy_set_is_fit_exactly() {
        let xs = vec![
            sv(&[(0, 1.0)]),
            sv(&[(0, 0.9), (1, 0.1)]),
            sv(&[(1, 1.0)]),
            sv(&[(0, 0.2), (1, 0.8)]),
        ];
        let ys = [Label::Sponsored, Label::Sponsored, Label::NonSponsored, Label::NonSponsored];
        let model = train_logreg(&xs, &ys, 2, &TrainConfig::default()).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert_eq!(model.predict(x), y);
        }
        assert!(model.training_meta.final_loss < model.training_meta.initial_loss);
        assert!(model.weights.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn single_class_is_rejected() {
        let xs = vec![sv(&[(0, 1.0)]), sv(&[(1, 1.0)])];
        let r = train_logreg(&xs, &[Label::Sponsored; 2], 2, &TrainConfig::default());
        assert!(matches!(r, Err(DetectorError::SingleClass)));
    }

    #[test]
    fn shape_errors() {
        let xs = vec![sv(&[(5, 1.0)])];
        assert!(matches!(
            train_logreg(&xs, &[Label::Sponsored], 2, &TrainConfig::default()),
            Err(DetectorError::FeatureOutOfRange { index: 5, dim: 2 })
        ));
        assert!(matches!(
            train_logreg(&xs, &[], 6, &TrainConfig::default()),
            Err(DetectorError::LengthMismatch { .. })
        ));
        assert!(matches!(
            train_logreg(&[], &[], 2, &TrainConfig::default()),
            Err(DetectorError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn heavy_regularisation_leaves_only_the_base_rate() {
        // 3 of 10 positive: with w forced to ~0 the optimal bias is logit(0.3).
        let xs: Vec<SparseVector> = (0..10).map(|i| sv(&[(i % 3, 1.0)])).collect();
        let ys: Vec<Label> = (0..10).map(|i| Label::from_sponsored(i < 3)).collect();
        let cfg = TrainConfig {
            learning_rate: 0.02,
            max_epochs: 200_000,
            l2_lambda: 50.0,
            tolerance: 1e-14,
        };
        let model = train_logreg(&xs, &ys, 3, &cfg).unwrap();
        let logit = (0.3f64 / 0.7).ln();
        assert!(model.weights.iter().all(|w| w.abs() < 0.02), "{:?}", model.weights);
        assert!((model.bias - logit).abs() < 0.02, "{} vs {logit}", model.bias);

        let mild = train_logreg(&xs, &ys, 3, &TrainConfig { l2_lambda: 0.01, ..cfg }).unwrap();
        let norm = |w: &[f64]| w.iter().map(|v| v * v).sum::<f64>();
        assert!(norm(&model.weights) < norm(&mild.weights));
    }

    #[test]
    fn tie_goes_to_sponsored() {
        let model = LogRegModel {
            weights: vec![0.0],
            bias: 0.0,
            l2_lambda: 0.0,
            training_meta: TrainingMeta {
                epochs: 0,
                learning_rate: 0.1,
                initial_loss: 0.0,
                final_loss: 0.0,
                loss_history: vec![],
            },
        };
        assert_eq!(model.predict(&SparseVector::default()), Label::Sponsored);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-300);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert_eq!(softplus(800.0), 800.0);
    }
}
