use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::predictions::Prediction;
use super::DetectorError;
use crate::Label;

/// Gold annotation for one evaluated post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub post_id: String,
    pub sponsored: bool,
    pub disclosed: bool,
}

/// Classification metrics, all in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pos_f1: f64,
    pub neg_f1: f64,
    pub macro_f1: f64,
    /// Share of sponsored-but-undisclosed posts predicted Sponsored; `None`
    /// when the truth set has no such post.
    pub undisclosed_acc: Option<f64>,
    pub n_items: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    /// F1 of the positive class in percent. A class absent from both truth and
    /// predictions scores 100.
    pub fn f1_positive(&self) -> f64 {
        f1_pct(self.tp, self.fp, self.fn_)
    }

    pub fn f1_negative(&self) -> f64 {
        f1_pct(self.tn, self.fn_, self.fp)
    }
}

pub fn f1_pct(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        return 100.0;
    }
    200.0 * tp as f64 / denom as f64
}

/// Simple (unweighted) mean of the two per-class F1 scores.
pub fn macro_f1(pos_f1: f64, neg_f1: f64) -> f64 {
    (pos_f1 + neg_f1) / 2.0
}

pub fn evaluate(preds: &[Prediction], truth: &[TruthRecord]) -> Result<EvalReport, DetectorError> {
    let mut by_id: HashMap<&str, Label> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.post_id.as_str(), p.label).is_some() {
            return Err(DetectorError::DuplicatePrediction(p.post_id.clone()));
        }
    }

    let mut cm = Confusion::default();
    let mut undisclosed = 0usize;
    let mut undisclosed_hit = 0usize;
    for t in truth {
        let predicted = *by_id
            .get(t.post_id.as_str())
            .ok_or_else(|| DetectorError::MissingPrediction(t.post_id.clone()))?;
        let hit = predicted.is_sponsored();
        match (t.sponsored, hit) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
        if t.sponsored && !t.disclosed {
            undisclosed += 1;
            undisclosed_hit += usize::from(hit);
        }
    }

    let pos_f1 = cm.f1_positive();
    let neg_f1 = cm.f1_negative();
    Ok(EvalReport {
        pos_f1,
        neg_f1,
        macro_f1: macro_f1(pos_f1, neg_f1),
        undisclosed_acc: (undisclosed > 0)
            .then(|| 100.0 * undisclosed_hit as f64 / undisclosed as f64),
        n_items: truth.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pred(id: &str, label: Label) -> Prediction {
        Prediction {
            post_id: id.to_string(),
            label,
            probability: None,
            model_id: "m".to_string(),
        }
    }

    fn truth(id: &str, sponsored: bool, disclosed: bool) -> TruthRecord {
        TruthRecord {
            post_id: id.to_string(),
            sponsored,
            disclosed,
        }
    }

    #[test]
    fn published_macro_average() {
        assert!((macro_f1(76.09, 63.93) - 70.01).abs() < 5e-3);
    }

    #[test]
    fn perfect_predictions() {
        let t = vec![truth("a", true, false), truth("b", false, false), truth("c", true, true)];
        let p = vec![
            pred("a", Label::Sponsored),
            pred("b", Label::NonSponsored),
            pred("c", Label::Sponsored),
        ];
        let r = evaluate(&p, &t).unwrap();
        assert_eq!((r.pos_f1, r.neg_f1, r.macro_f1), (100.0, 100.0, 100.0));
        assert_eq!(r.undisclosed_acc, Some(100.0));
    }

    #[test]
    fn one_of_each_cell() {
        // TP, FP, FN, TN: precision = recall = 0.5 for both classes.
        let t = vec![
            truth("tp", true, false),
            truth("fp", false, false),
            truth("fn", true, false),
            truth("tn", false, false),
        ];
        let p = vec![
            pred("tp", Label::Sponsored),
            pred("fp", Label::Sponsored),
            pred("fn", Label::NonSponsored),
            pred("tn", Label::NonSponsored),
        ];
        let r = evaluate(&p, &t).unwrap();
        assert_eq!(r.pos_f1, 50.0);
        assert_eq!(r.neg_f1, 50.0);
        assert_eq!(r.undisclosed_acc, Some(50.0));
    }

    #[test]
    fn missing_prediction_names_id() {
        let r = evaluate(&[], &[truth("x9", true, true)]);
        match r {
            Err(DetectorError::MissingPrediction(id)) => assert_eq!(id, "x9"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_undisclosed_ads_gives_none() {
        let r = evaluate(&[pred("a", Label::Sponsored)], &[truth("a", true, true)]).unwrap();
        assert_eq!(r.undisclosed_acc, None);
    }

    proptest! {
        #[test]
        fn swapping_classes_swaps_f1(cells in prop::collection::vec((any::<bool>(), any::<bool>()), 1..40)) {
            let t: Vec<_> = cells.iter().enumerate().map(|(i, &(s, _))| truth(&i.to_string(), s, false)).collect();
            let p: Vec<_> = cells.iter().enumerate().map(|(i, &(_, h))| pred(&i.to_string(), Label::from_sponsored(h))).collect();
            let flipped_t: Vec<_> = t.iter().map(|r| truth(&r.post_id, !r.sponsored, false)).collect();
            let flipped_p: Vec<_> = p.iter().map(|r| pred(&r.post_id, r.label.flipped())).collect();
            let a = evaluate(&p, &t).unwrap();
            let b = evaluate(&flipped_p, &flipped_t).unwrap();
            prop_assert_eq!(a.pos_f1, b.neg_f1);
            prop_assert_eq!(a.neg_f1, b.pos_f1);
            prop_assert_eq!(a.macro_f1, (a.pos_f1 + a.neg_f1) / 2.0);
        }
    }
}
