use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{
    absolute_agreement, at_most_one_disagreement, disclosed_accuracy, krippendorff_alpha,
    model_agreement_majority, pairwise_agreement, relative_diff, sponsored_proportion,
    BiasReport, PairwiseStats, SponsoredRate,
};
use super::{AgreementError, LabelMatrix};
use crate::Label;

/// A named set of annotators (rows of the label matrix).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupSpec {
    pub id: String,
    pub annotators: Vec<String>,
}

/// Two groups whose metrics are compared, `base` first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub base: String,
    pub new: String,
}

/// Which subgroups to report on and which of them to compare.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportManifest {
    #[serde(default)]
    pub batch_id: Option<String>,
    pub groups: Vec<SubgroupSpec>,
    #[serde(default)]
    pub comparisons: Vec<Comparison>,
}

/// Agreement metrics for one subgroup, in percent. `None` marks a metric
/// that is undefined for the group (e.g. alpha with fewer than two
/// annotators).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub group_id: String,
    pub n_annotators: usize,
    pub alpha_pct: Option<f64>,
    pub absolute_pct: Option<f64>,
    pub one_disag_pct: Option<f64>,
    pub disclosed_acc_pct: Option<f64>,
    pub sponsored_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub metrics: AgreementReport,
    pub pairwise: Option<PairwiseStats>,
    pub bias: Option<BiasReport>,
}

/// Per-metric deltas between two groups (absolute or relative).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub alpha: Option<f64>,
    pub absolute: Option<f64>,
    pub one_disag: Option<f64>,
    pub disclosed_acc: Option<f64>,
    pub sponsored: Option<f64>,
    pub min_abs: Option<f64>,
    pub max_abs: Option<f64>,
    pub std_abs: Option<f64>,
    pub min_alpha: Option<f64>,
    pub max_alpha: Option<f64>,
    pub std_alpha: Option<f64>,
    pub model_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub base: String,
    pub new: String,
    /// `new - base`.
    pub absolute: MetricDeltas,
    /// `(new - base) / base * 100`.
    pub relative: MetricDeltas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub batch_id: Option<String>,
    pub sponsored_rate: SponsoredRate,
    pub groups: Vec<GroupReport>,
    pub diffs: Vec<DiffRow>,
}

fn defined<T>(r: Result<T, AgreementError>) -> Result<Option<T>, AgreementError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(AgreementError::Undefined(_) | AgreementError::TooFewAnnotators { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn pct(r: Result<f64, AgreementError>) -> Result<Option<f64>, AgreementError> {
    Ok(defined(r)?.map(|v| 100.0 * v))
}

/// Metrics for one subgroup on its row-restricted matrix.
pub fn group_report<S: AsRef<str>>(
    matrix: &LabelMatrix,
    group: &SubgroupSpec,
    disclosed_ids: &[S],
    preds: Option<&HashMap<String, Label>>,
    rate: SponsoredRate,
) -> Result<GroupReport, AgreementError> {
    let sub = matrix.restrict_annotators(&group.annotators)?;
    let metrics = AgreementReport {
        group_id: group.id.clone(),
        n_annotators: sub.n_annotators(),
        alpha_pct: pct(krippendorff_alpha(&sub))?,
        absolute_pct: pct(absolute_agreement(&sub))?,
        one_disag_pct: pct(at_most_one_disagreement(&sub))?,
        disclosed_acc_pct: if disclosed_ids.is_empty() {
            None
        } else {
            pct(disclosed_accuracy(&sub, disclosed_ids))?
        },
        sponsored_pct: pct(sponsored_proportion(&sub, rate))?,
    };
    let pairwise = defined(pairwise_agreement(&sub))?;
    let bias = match preds {
        Some(p) => defined(model_agreement_majority(&sub, p, rate))?,
        None => None,
    };
    Ok(GroupReport {
        metrics,
        pairwise,
        bias,
    })
}

fn deltas(base: &GroupReport, new: &GroupReport, f: impl Fn(f64, f64) -> Option<f64>) -> MetricDeltas {
    let both = |a: Option<f64>, b: Option<f64>| a.zip(b).and_then(|(a, b)| f(a, b));
    let (bm, nm) = (&base.metrics, &new.metrics);
    let bs = base.pairwise.as_ref().and_then(|p| p.summary.as_ref());
    let ns = new.pairwise.as_ref().and_then(|p| p.summary.as_ref());
    let summary = |get: fn(&super::PairwiseSummary) -> f64| both(bs.map(get), ns.map(get));
    MetricDeltas {
        alpha: both(bm.alpha_pct, nm.alpha_pct),
        absolute: both(bm.absolute_pct, nm.absolute_pct),
        one_disag: both(bm.one_disag_pct, nm.one_disag_pct),
        disclosed_acc: both(bm.disclosed_acc_pct, nm.disclosed_acc_pct),
        sponsored: both(bm.sponsored_pct, nm.sponsored_pct),
        min_abs: summary(|s| s.min_abs),
        max_abs: summary(|s| s.max_abs),
        std_abs: summary(|s| s.std_abs),
        min_alpha: summary(|s| s.min_alpha),
        max_alpha: summary(|s| s.max_alpha),
        std_alpha: summary(|s| s.std_alpha),
        model_agreement: both(
            base.bias.as_ref().map(|b| b.model_majority_agreement_pct),
            new.bias.as_ref().map(|b| b.model_majority_agreement_pct),
        ),
    }
}

/// One report per subgroup (manifest order) plus a diff row per comparison.
pub fn build_report<S: AsRef<str>>(
    matrix: &LabelMatrix,
    disclosed_ids: &[S],
    manifest: &ReportManifest,
    preds: Option<&HashMap<String, Label>>,
    rate: SponsoredRate,
) -> Result<FullReport, AgreementError> {
    let mut seen = HashSet::new();
    let mut groups = Vec::with_capacity(manifest.groups.len());
    for g in &manifest.groups {
        if !seen.insert(g.id.as_str()) {
            return Err(AgreementError::DuplicateId(g.id.clone()));
        }
        groups.push(group_report(matrix, g, disclosed_ids, preds, rate)?);
    }
    let find = |id: &str| {
        groups
            .iter()
            .find(|g| g.metrics.group_id == id)
            .ok_or_else(|| AgreementError::UnknownGroup(id.to_string()))
    };
    let diffs = manifest
        .comparisons
        .iter()
        .map(|c| {
            let (base, new) = (find(&c.base)?, find(&c.new)?);
            Ok(DiffRow {
                base: c.base.clone(),
                new: c.new.clone(),
                absolute: deltas(base, new, |a, b| Some(b - a)),
                relative: deltas(base, new, |a, b| relative_diff(a, b).ok()),
            })
        })
        .collect::<Result<Vec<_>, AgreementError>>()?;
    Ok(FullReport {
        batch_id: manifest.batch_id.clone(),
        sponsored_rate: rate,
        groups,
        diffs,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

fn table(out: &mut String, title: &str, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |out: &mut String, cells: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    out.push_str(title);
    out.push('\n');
    line(out, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in rows {
        line(out, r);
    }
    out.push('\n');
}

/// Plain-text tables: group agreement, pairwise spread and model agreement,
/// each followed by its absolute and relative diff rows.
pub fn render_text(report: &FullReport) -> String {
    let mut out = String::new();
    if let Some(b) = &report.batch_id {
        let _ = writeln!(out, "batch: {b}\n");
    }
    let diff_name = |kind: &str, d: &DiffRow| format!("{kind} diff ({} vs {})", d.new, d.base);

    let mut rows: Vec<Vec<String>> = report
        .groups
        .iter()
        .map(|g| {
            let m = &g.metrics;
            vec![
                m.group_id.clone(),
                cell(m.alpha_pct),
                cell(m.absolute_pct),
                cell(m.one_disag_pct),
                cell(m.disclosed_acc_pct),
                cell(m.sponsored_pct),
                m.n_annotators.to_string(),
            ]
        })
        .collect();
    for d in &report.diffs {
        for (kind, v) in [("Absolute", &d.absolute), ("Relative", &d.relative)] {
            rows.push(vec![
                diff_name(kind, d),
                cell(v.alpha),
                cell(v.absolute),
                cell(v.one_disag),
                cell(v.disclosed_acc),
                cell(v.sponsored),
                "-".to_string(),
            ]);
        }
    }
    table(
        &mut out,
        "Agreement",
        &["group", "alpha", "Abs", "1-Disag", "Acc", "Sponsored", "#"],
        &rows,
    );

    let mut rows: Vec<Vec<String>> = report
        .groups
        .iter()
        .map(|g| {
            let s = g.pairwise.as_ref().and_then(|p| p.summary.as_ref());
            vec![
                g.metrics.group_id.clone(),
                cell(s.map(|s| s.min_abs)),
                cell(s.map(|s| s.max_abs)),
                cell(s.map(|s| s.std_abs)),
                cell(s.map(|s| s.min_alpha)),
                cell(s.map(|s| s.max_alpha)),
                cell(s.map(|s| s.std_alpha)),
            ]
        })
        .collect();
    for d in &report.diffs {
        for (kind, v) in [("Absolute", &d.absolute), ("Relative", &d.relative)] {
            rows.push(vec![
                diff_name(kind, d),
                cell(v.min_abs),
                cell(v.max_abs),
                cell(v.std_abs),
                cell(v.min_alpha),
                cell(v.max_alpha),
                cell(v.std_alpha),
            ]);
        }
    }
    table(
        &mut out,
        "Pairwise agreement",
        &["group", "Min Abs", "Max Abs", "±", "Min alpha", "Max alpha", "±"],
        &rows,
    );

    if report.groups.iter().any(|g| g.bias.is_some()) {
        let mut rows: Vec<Vec<String>> = report
            .groups
            .iter()
            .map(|g| {
                let b = g.bias.as_ref();
                vec![
                    g.metrics.group_id.clone(),
                    cell(b.map(|b| b.sponsored_pct)),
                    cell(b.map(|b| b.model_majority_agreement_pct)),
                    b.map_or_else(|| "-".to_string(), |b| b.tie_items_excluded.to_string()),
                ]
            })
            .collect();
        for d in &report.diffs {
            rows.push(vec![
                diff_name("Relative", d),
                cell(d.relative.sponsored),
                cell(d.relative.model_agreement),
                "-".to_string(),
            ]);
        }
        table(
            &mut out,
            "Model agreement (strict majority)",
            &["group", "Sponsored", "Agreement", "Ties"],
            &rows,
        );
    }
    out
}
