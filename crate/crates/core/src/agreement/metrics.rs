use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{AgreementError, LabelMatrix};
use crate::Label;

fn require_annotators(matrix: &LabelMatrix, needed: usize) -> Result<(), AgreementError> {
    if matrix.n_annotators() < needed {
        return Err(AgreementError::TooFewAnnotators {
            needed,
            got: matrix.n_annotators(),
        });
    }
    Ok(())
}

/// Nominal Krippendorff's alpha over units of present ratings.
///
/// Each unit with `m_u >= 2` ratings contributes `n_uc * n_uk / (m_u - 1)` to
/// the coincidence cell `(c, k)` for `c != k` and `n_uc * (n_uc - 1) / (m_u - 1)`
/// to `(c, c)`. Then `alpha = 1 - D_o / D_e` with
/// `D_o = sum_{c!=k} o_ck / n` and `D_e = sum_{c!=k} n_c n_k / (n (n - 1))`.
/// A single-category sample (`D_e = 0`) scores 1.
pub fn alpha_nominal<T, U>(units: impl IntoIterator<Item = U>) -> Result<f64, AgreementError>
where
    T: Ord + Copy,
    U: AsRef<[T]>,
{
    let mut coincidence: BTreeMap<(T, T), f64> = BTreeMap::new();
    for unit in units {
        let ratings = unit.as_ref();
        let m = ratings.len();
        if m < 2 {
            continue;
        }
        let mut counts: BTreeMap<T, usize> = BTreeMap::new();
        for &r in ratings {
            *counts.entry(r).or_default() += 1;
        }
        let scale = 1.0 / (m as f64 - 1.0);
        for (&c, &nc) in &counts {
            for (&k, &nk) in &counts {
                let pairs = if c == k { nc * (nc - 1) } else { nc * nk };
                if pairs > 0 {
                    *coincidence.entry((c, k)).or_default() += pairs as f64 * scale;
                }
            }
        }
    }
    if coincidence.is_empty() {
        return Err(AgreementError::Undefined(
            "no item has two or more ratings".to_string(),
        ));
    }

    let mut marginals: BTreeMap<T, f64> = BTreeMap::new();
    for (&(c, _), &v) in &coincidence {
        *marginals.entry(c).or_default() += v;
    }
    let n: f64 = marginals.values().sum();
    let observed: f64 = coincidence
        .iter()
        .filter(|((c, k), _)| c != k)
        .map(|(_, v)| v)
        .sum::<f64>()
        / n;
    let mut expected = 0.0;
    for (c, nc) in &marginals {
        for (k, nk) in &marginals {
            if c != k {
                expected += nc * nk;
            }
        }
    }
    expected /= n * (n - 1.0);
    if expected == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - observed / expected)
}

/// Krippendorff's alpha in [-1, 1].
pub fn krippendorff_alpha(matrix: &LabelMatrix) -> Result<f64, AgreementError> {
    require_annotators(matrix, 2)?;
    alpha_nominal(matrix.units())
}

fn eligible_units(matrix: &LabelMatrix) -> impl Iterator<Item = Vec<Label>> + '_ {
    matrix.units().filter(|u| u.len() >= 2)
}

fn fraction_of_units(
    matrix: &LabelMatrix,
    keep: impl Fn(&[Label]) -> bool,
) -> Result<f64, AgreementError> {
    require_annotators(matrix, 2)?;
    let (mut total, mut hits) = (0usize, 0usize);
    for unit in eligible_units(matrix) {
        total += 1;
        hits += usize::from(keep(&unit));
    }
    if total == 0 {
        return Err(AgreementError::Undefined(
            "no item has two or more ratings".to_string(),
        ));
    }
    Ok(hits as f64 / total as f64)
}

fn modal_count(unit: &[Label]) -> usize {
    let sponsored = unit.iter().filter(|l| l.is_sponsored()).count();
    sponsored.max(unit.len() - sponsored)
}

/// Share of items (with at least two ratings) on which every rating agrees.
pub fn absolute_agreement(matrix: &LabelMatrix) -> Result<f64, AgreementError> {
    fraction_of_units(matrix, |u| modal_count(u) == u.len())
}

/// Share of items (with at least two ratings) that become unanimous after
/// removing at most one rating.
pub fn at_most_one_disagreement(matrix: &LabelMatrix) -> Result<f64, AgreementError> {
    fraction_of_units(matrix, |u| u.len() - modal_count(u) <= 1)
}

/// Pooled share of (annotator, disclosed item) judgements labelled Sponsored.
pub fn disclosed_accuracy<S: AsRef<str>>(
    matrix: &LabelMatrix,
    disclosed_ids: &[S],
) -> Result<f64, AgreementError> {
    let (mut judged, mut correct) = (0usize, 0usize);
    for id in disclosed_ids {
        let id = id.as_ref();
        let item = matrix
            .item_index(id)
            .ok_or_else(|| AgreementError::UnknownItem(id.to_string()))?;
        for label in matrix.unit(item) {
            judged += 1;
            correct += usize::from(label.is_sponsored());
        }
    }
    if judged == 0 {
        return Err(AgreementError::Undefined(
            "no judgements on disclosed items".to_string(),
        ));
    }
    Ok(correct as f64 / judged as f64)
}

/// How the sponsored share is aggregated across annotators.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SponsoredRate {
    /// Mean of each annotator's own sponsored share; annotators with no
    /// labels are skipped.
    #[default]
    PerAnnotatorMean,
    /// Sponsored judgements over all judgements.
    Pooled,
}

pub fn sponsored_proportion(matrix: &LabelMatrix, rate: SponsoredRate) -> Result<f64, AgreementError> {
    let per_row: Vec<(usize, usize)> = (0..matrix.n_annotators())
        .map(|a| {
            let labels: Vec<Label> = matrix.row(a).iter().flatten().copied().collect();
            (labels.iter().filter(|l| l.is_sponsored()).count(), labels.len())
        })
        .filter(|&(_, n)| n > 0)
        .collect();
    if per_row.is_empty() {
        return Err(AgreementError::Undefined("matrix has no labels".to_string()));
    }
    Ok(match rate {
        SponsoredRate::PerAnnotatorMean => {
            per_row.iter().map(|&(s, n)| s as f64 / n as f64).sum::<f64>() / per_row.len() as f64
        }
        SponsoredRate::Pooled => {
            let (s, n) = per_row
                .iter()
                .fold((0, 0), |(s, n), &(rs, rn)| (s + rs, n + rn));
            s as f64 / n as f64
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub a: String,
    pub b: String,
    pub co_rated: usize,
    pub abs_pct: f64,
    pub alpha_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSummary {
    pub min_abs: f64,
    pub max_abs: f64,
    pub std_abs: f64,
    pub min_alpha: f64,
    pub max_alpha: f64,
    pub std_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseStats {
    pub pairs: Vec<PairRecord>,
    /// Pairs without any co-rated item.
    pub skipped_pairs: Vec<(String, String)>,
    /// `None` when every pair was skipped.
    pub summary: Option<PairwiseSummary>,
}

/// Sample standard deviation; a single value has deviation 0.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Absolute agreement and alpha (both in percent) for every unordered pair of
/// annotators, over the items both rated.
pub fn pairwise_agreement(matrix: &LabelMatrix) -> Result<PairwiseStats, AgreementError> {
    require_annotators(matrix, 2)?;
    let ids = matrix.annotators();
    let mut pairs = Vec::new();
    let mut skipped_pairs = Vec::new();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let pair = matrix.restrict_annotators(&[&ids[i], &ids[j]])?;
            let co_rated = pair.units().filter(|u| u.len() == 2).count();
            if co_rated == 0 {
                skipped_pairs.push((ids[i].clone(), ids[j].clone()));
                continue;
            }
            pairs.push(PairRecord {
                a: ids[i].clone(),
                b: ids[j].clone(),
                co_rated,
                abs_pct: 100.0 * absolute_agreement(&pair)?,
                alpha_pct: 100.0 * krippendorff_alpha(&pair)?,
            });
        }
    }
    let summary = (!pairs.is_empty()).then(|| {
        let abs: Vec<f64> = pairs.iter().map(|p| p.abs_pct).collect();
        let alpha: Vec<f64> = pairs.iter().map(|p| p.alpha_pct).collect();
        let (min_abs, max_abs) = min_max(&abs);
        let (min_alpha, max_alpha) = min_max(&alpha);
        PairwiseSummary {
            min_abs,
            max_abs,
            std_abs: sample_std(&abs),
            min_alpha,
            max_alpha,
            std_alpha: sample_std(&alpha),
        }
    });
    Ok(PairwiseStats {
        pairs,
        skipped_pairs,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub sponsored_pct: f64,
    pub model_majority_agreement_pct: f64,
    /// Items without a strict majority (ties, including unrated items).
    pub tie_items_excluded: usize,
    pub items_compared: usize,
}

/// Strict-majority label of a unit, if any.
pub fn majority_label(unit: &[Label]) -> Option<Label> {
    let sponsored = unit.iter().filter(|l| l.is_sponsored()).count();
    let other = unit.len() - sponsored;
    match sponsored.cmp(&other) {
        std::cmp::Ordering::Greater => Some(Label::Sponsored),
        std::cmp::Ordering::Less => Some(Label::NonSponsored),
        std::cmp::Ordering::Equal => None,
    }
}

/// Agreement between the annotators' strict-majority label and a model's
/// prediction, over items that have a strict majority.
pub fn model_agreement_majority(
    matrix: &LabelMatrix,
    preds: &HashMap<String, Label>,
    rate: SponsoredRate,
) -> Result<BiasReport, AgreementError> {
    let mut ties = 0;
    let mut compared = 0;
    let mut agree = 0;
    for (i, item) in matrix.items().iter().enumerate() {
        let predicted = preds
            .get(item)
            .ok_or_else(|| AgreementError::MissingPrediction(item.clone()))?;
        match majority_label(&matrix.unit(i)) {
            None => ties += 1,
            Some(m) => {
                compared += 1;
                agree += usize::from(m == *predicted);
            }
        }
    }
    if compared == 0 {
        return Err(AgreementError::Undefined(
            "every item is tied; no majority labels".to_string(),
        ));
    }
    Ok(BiasReport {
        sponsored_pct: 100.0 * sponsored_proportion(matrix, rate)?,
        model_majority_agreement_pct: 100.0 * agree as f64 / compared as f64,
        tie_items_excluded: ties,
        items_compared: compared,
    })
}

/// Proportional change from `base` to `new`, in percent.
pub fn relative_diff(base: f64, new: f64) -> Result<f64, AgreementError> {
    if base == 0.0 {
        return Err(AgreementError::ZeroBase);
    }
    Ok((new - base) / base * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{NonSponsored as N, Sponsored as S};

    fn matrix(rows: &[&[Option<Label>]]) -> LabelMatrix {
        let annotators = (0..rows.len()).map(|i| format!("a{i}")).collect();
        let items = (0..rows[0].len()).map(|i| format!("p{i:02}")).collect();
        LabelMatrix::from_cells(annotators, items, rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn full(rows: &[&[Label]]) -> LabelMatrix {
        let rows: Vec<Vec<Option<Label>>> =
            rows.iter().map(|r| r.iter().map(|&l| Some(l)).collect()).collect();
        let refs: Vec<&[Option<Label>]> = rows.iter().map(Vec::as_slice).collect();
        matrix(&refs)
    }

    #[test]
    fn perfect_agreement_alpha_is_one() {
        let m = full(&[&[S, N, S], &[S, N, S]]);
        assert_eq!(krippendorff_alpha(&m).unwrap(), 1.0);
    }

    #[test]
    fn hand_computed_alpha() {
        // o_SS = 2, o_SN = o_NS = 1, o_NN = 4; n = 8, D_o = 1/4, D_e = 30/56.
        let m = full(&[&[S, S, N, N], &[S, N, N, N]]);
        let alpha = krippendorff_alpha(&m).unwrap();
        assert!((alpha - 0.533_333_333).abs() < 1e-6, "{alpha}");
        assert!((alpha - (1.0 - 0.25 / (30.0 / 56.0))).abs() < 1e-15);
    }

    #[test]
    fn single_split_item_alpha() {
        // D_o = 1 and D_e = 2 * 1 * 1 / (2 * 1) = 1, so alpha = 0.
        let m = full(&[&[S], &[N]]);
        assert_eq!(krippendorff_alpha(&m).unwrap(), 0.0);
    }

    #[test]
    fn alpha_needs_a_pairable_item() {
        let m = matrix(&[&[Some(S), None], &[None, Some(N)]]);
        assert!(matches!(krippendorff_alpha(&m), Err(AgreementError::Undefined(_))));
        let one = full(&[&[S, N]]);
        assert!(matches!(
            krippendorff_alpha(&one),
            Err(AgreementError::TooFewAnnotators { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn absolute_agreement_cases() {
        assert_eq!(absolute_agreement(&full(&[&[S, S, N, N], &[S, N, N, N]])).unwrap(), 0.75);
        assert_eq!(absolute_agreement(&full(&[&[S, S], &[S, S]])).unwrap(), 1.0);
        assert_eq!(absolute_agreement(&full(&[&[S, N], &[N, S]])).unwrap(), 0.0);
    }

    #[test]
    fn one_disagreement_cases() {
        assert_eq!(at_most_one_disagreement(&full(&[&[S], &[S], &[N]])).unwrap(), 1.0);
        let m = matrix(&[&[Some(S)], &[Some(N)], &[None]]);
        assert_eq!(at_most_one_disagreement(&m).unwrap(), 1.0);
        assert_eq!(at_most_one_disagreement(&full(&[&[S], &[S], &[N], &[N]])).unwrap(), 0.0);
    }

    #[test]
    fn disclosed_accuracy_pools_judgements() {
        let mut a = vec![S; 16];
        let b = vec![S; 16];
        a[3] = N;
        let m = full(&[&a, &b]);
        let ids: Vec<String> = m.items().to_vec();
        assert_eq!(disclosed_accuracy(&m, &ids).unwrap(), 31.0 / 32.0);
        assert_eq!(disclosed_accuracy(&m, &ids).unwrap(), 0.96875);
        assert_eq!(disclosed_accuracy(&full(&[&[S, S], &[S, S]]), &["p00", "p01"]).unwrap(), 1.0);

        let empty = matrix(&[&[None, Some(S)], &[None, Some(S)]]);
        assert!(matches!(
            disclosed_accuracy(&empty, &["p00"]),
            Err(AgreementError::Undefined(_))
        ));
        assert!(matches!(
            disclosed_accuracy(&empty, &["nope"]),
            Err(AgreementError::UnknownItem(_))
        ));
    }

    #[test]
    fn sponsored_proportion_cases() {
        let half: Vec<Label> = (0..100).map(|i| Label::from_sponsored(i % 2 == 0)).collect();
        assert_eq!(sponsored_proportion(&full(&[&half]), SponsoredRate::default()).unwrap(), 0.5);

        let a: Vec<Option<Label>> = (0..10).map(|i| Some(Label::from_sponsored(i < 4))).collect();
        let b: Vec<Option<Label>> = (0..10).map(|i| Some(Label::from_sponsored(i < 6))).collect();
        assert_eq!(sponsored_proportion(&matrix(&[&a, &b]), SponsoredRate::PerAnnotatorMean).unwrap(), 0.5);

        let silent = vec![None; 10];
        let m = matrix(&[&a, &silent]);
        assert_eq!(sponsored_proportion(&m, SponsoredRate::PerAnnotatorMean).unwrap(), 0.4);

        // per-annotator mean and pooled differ when coverage differs
        let c: Vec<Option<Label>> = (0..10).map(|i| (i < 2).then_some(S)).collect();
        let m = matrix(&[&a, &c]);
        assert_eq!(sponsored_proportion(&m, SponsoredRate::PerAnnotatorMean).unwrap(), 0.7);
        assert_eq!(sponsored_proportion(&m, SponsoredRate::Pooled).unwrap(), 0.5);
    }

    #[test]
    fn pairwise_single_pair() {
        let p = pairwise_agreement(&full(&[&[S, S, N, N], &[S, N, N, N]])).unwrap();
        assert_eq!(p.pairs.len(), 1);
        let s = p.summary.unwrap();
        assert_eq!(s.min_abs, s.max_abs);
        assert_eq!(s.std_abs, 0.0);
        assert_eq!(s.std_alpha, 0.0);
    }

    #[test]
    fn pairwise_known_values() {
        // a0 rates all ten items S; a1 rates only the first five, all S;
        // a2 has six S overall, four of them in the first five items.
        let a0: Vec<Option<Label>> = vec![Some(S); 10];
        let a1: Vec<Option<Label>> = (0..10).map(|i| (i < 5).then_some(S)).collect();
        let a2: Vec<Option<Label>> = [S, S, S, S, N, S, S, N, N, N].iter().map(|&l| Some(l)).collect();
        let p = pairwise_agreement(&matrix(&[&a0, &a1, &a2])).unwrap();
        let abs: Vec<f64> = p.pairs.iter().map(|r| r.abs_pct).collect();
        assert_eq!(abs, vec![100.0, 60.0, 80.0]);
        let s = p.summary.unwrap();
        assert_eq!((s.min_abs, s.max_abs), (60.0, 100.0));
        assert!((s.std_abs - 20.0).abs() < 1e-12);
        assert!((sample_std(&[0.6, 0.8, 1.0]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn pairwise_duplicate_annotators_agree_fully() {
        let p = pairwise_agreement(&full(&[&[S, N, S], &[S, N, S], &[N, N, S]])).unwrap();
        assert_eq!(p.pairs[0].abs_pct, 100.0);
        assert_eq!(p.pairs[0].alpha_pct, 100.0);
    }

    #[test]
    fn pairwise_skips_disjoint_pairs() {
        let m = matrix(&[&[Some(S), None], &[None, Some(S)], &[Some(S), Some(N)]]);
        let p = pairwise_agreement(&m).unwrap();
        assert_eq!(p.skipped_pairs, vec![("a0".to_string(), "a1".to_string())]);
        assert_eq!(p.pairs.len(), 2);
    }

    fn preds(labels: &[Label]) -> HashMap<String, Label> {
        labels.iter().enumerate().map(|(i, &l)| (format!("p{i:02}"), l)).collect()
    }

    #[test]
    fn majority_agreement_cases() {
        let m = full(&[&[S, N, S], &[S, N, N], &[S, S, S]]);
        let r = model_agreement_majority(&m, &preds(&[S, S, S]), SponsoredRate::default()).unwrap();
        assert!((r.model_majority_agreement_pct - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.tie_items_excluded, 0);

        let r = model_agreement_majority(&m, &preds(&[S, N, S]), SponsoredRate::default()).unwrap();
        assert_eq!(r.model_majority_agreement_pct, 100.0);
    }

    #[test]
    fn even_split_is_excluded() {
        let rows: Vec<Vec<Label>> = (0..8).map(|i| vec![Label::from_sponsored(i < 4), S]).collect();
        let refs: Vec<&[Label]> = rows.iter().map(Vec::as_slice).collect();
        let r = model_agreement_majority(&full(&refs), &preds(&[S, S]), SponsoredRate::default()).unwrap();
        assert_eq!(r.tie_items_excluded, 1);
        assert_eq!(r.items_compared, 1);

        let all_tied = full(&[&[S], &[N]]);
        assert!(matches!(
            model_agreement_majority(&all_tied, &preds(&[S]), SponsoredRate::default()),
            Err(AgreementError::Undefined(_))
        ));
        assert!(matches!(
            model_agreement_majority(&all_tied, &HashMap::new(), SponsoredRate::default()),
            Err(AgreementError::MissingPrediction(_))
        ));
    }

    #[test]
    fn relative_diff_cases() {
        assert!((relative_diff(54.98, 63.58).unwrap() - 15.65).abs() < 0.1);
        assert!((relative_diff(46.50, 54.50).unwrap() - 17.20).abs() < 0.02);
        assert_eq!(relative_diff(3.0, 3.0).unwrap(), 0.0);
        assert!(matches!(relative_diff(0.0, 1.0), Err(AgreementError::ZeroBase)));
    }
}
