use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::annotate::AnnotationService;
use super::{Expertise, ServiceError, Setup};
use crate::agreement::{
    build_report, read_label_file, render_text, write_label_file, Comparison, FullReport,
    LabelMatrix, LabelRow, ReportManifest, SponsoredRate, SubgroupSpec,
};
use crate::detector::import_predictions;
use crate::Label;

/// Restricts an export to one setup and/or expertise level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportFilter {
    pub setup: Option<Setup>,
    pub expertise: Option<Expertise>,
}

/// One exported rater: an annotator in one setup. Annotators who took both
/// setups appear twice with distinct rater ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterInfo {
    pub rater_id: String,
    pub annotator_id: String,
    pub setup: Setup,
    pub expertise: Expertise,
    pub project_id: String,
    pub labelled: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub batch_id: String,
    pub setups: Vec<Setup>,
    pub raters: Vec<RaterInfo>,
    pub disclosed_items: Vec<String>,
    /// Subgroups and comparisons for the agreement report.
    pub report: ReportManifest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelExport {
    pub rows: Vec<LabelRow>,
    pub manifest: ExportManifest,
}

impl LabelExport {
    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        write_label_file(&mut buf, &self.rows).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn rater_id(annotator_id: &str, setup: Setup) -> String {
    format!("{annotator_id}/{setup}")
}

/// Default subgroups: per setup, everyone, legal experts, non-experts and
/// annotators who took both setups, each compared across setups.
pub fn auto_report_manifest(batch_id: &str, raters: &[RaterInfo]) -> ReportManifest {
    let setups_of: BTreeMap<&str, BTreeSet<Setup>> =
        raters.iter().fold(BTreeMap::new(), |mut m, r| {
            m.entry(r.annotator_id.as_str()).or_default().insert(r.setup);
            m
        });
    type Member<'a> = Box<dyn Fn(&RaterInfo) -> bool + 'a>;
    let kinds: [(&str, Member); 4] = [
        ("", Box::new(|_| true)),
        ("legal_experts", Box::new(|r| r.expertise == Expertise::LegalExpert)),
        ("non_experts", Box::new(|r| r.expertise != Expertise::LegalExpert)),
        ("both_setups", Box::new(|r| setups_of[r.annotator_id.as_str()].len() == 2)),
    ];
    let group_id = |setup: Setup, kind: &str| {
        if kind.is_empty() {
            setup.as_str().to_string()
        } else {
            format!("{setup}/{kind}")
        }
    };

    let mut groups = Vec::new();
    let mut comparisons = Vec::new();
    for (kind, keep) in &kinds {
        let mut present = Vec::new();
        for setup in [Setup::WithoutExplanations, Setup::WithExplanations] {
            let annotators: Vec<String> = raters
                .iter()
                .filter(|r| r.setup == setup && keep(r))
                .map(|r| r.rater_id.clone())
                .collect();
            if !annotators.is_empty() {
                groups.push(SubgroupSpec {
                    id: group_id(setup, kind),
                    annotators,
                });
                present.push(setup);
            }
        }
        if present.len() == 2 {
            comparisons.push(Comparison {
                base: group_id(Setup::WithoutExplanations, kind),
                new: group_id(Setup::WithExplanations, kind),
            });
        }
    }
    ReportManifest {
        batch_id: Some(batch_id.to_string()),
        groups,
        comparisons,
    }
}

impl AnnotationService {
    /// Current labels of every matching project on `batch_id`, sorted by
    /// rater then post, with a manifest describing the raters.
    pub fn export_labels(&self, batch_id: &str, filter: ExportFilter) -> Result<LabelExport, ServiceError> {
        self.with_state(|state| {
            let batch = state
                .batches
                .get(batch_id)
                .ok_or_else(|| ServiceError::NotFound(format!("batch {batch_id:?}")))?;
            let mut raters = Vec::new();
            let mut rows = Vec::new();
            for p in state.projects.values().filter(|p| p.batch_id == batch_id) {
                let expertise = state.annotators[&p.annotator_id].expertise;
                if filter.setup.is_some_and(|s| s != p.setup)
                    || filter.expertise.is_some_and(|e| e != expertise)
                {
                    continue;
                }
                let rid = rater_id(&p.annotator_id, p.setup);
                let labels = &state.labels[&p.project_id];
                rows.extend(labels.values().map(|l| LabelRow {
                    annotator_id: rid.clone(),
                    post_id: l.post_id.clone(),
                    label: l.label,
                }));
                raters.push(RaterInfo {
                    rater_id: rid,
                    annotator_id: p.annotator_id.clone(),
                    setup: p.setup,
                    expertise,
                    project_id: p.project_id.clone(),
                    labelled: labels.len(),
                });
            }
            raters.sort_by(|a, b| a.rater_id.cmp(&b.rater_id));
            rows.sort_by(|a, b| (&a.annotator_id, &a.post_id).cmp(&(&b.annotator_id, &b.post_id)));
            let setups: BTreeSet<Setup> = raters.iter().map(|r| r.setup).collect();
            let report = auto_report_manifest(batch_id, &raters);
            Ok(LabelExport {
                rows,
                manifest: ExportManifest {
                    batch_id: batch_id.to_string(),
                    setups: setups.into_iter().collect(),
                    raters,
                    disclosed_items: batch.disclosed_items.iter().cloned().collect(),
                    report,
                },
            })
        })
    }

    /// Model labels for a batch, if every item has one.
    pub fn model_labels(&self, batch_id: &str) -> Result<Option<HashMap<String, Label>>, ServiceError> {
        let batch = self.batch(batch_id)?;
        Ok(batch
            .items
            .iter()
            .map(|i| i.model_label.map(|l| (i.post_id.clone(), l)))
            .collect())
    }

    /// Live agreement report over everything labelled so far.
    pub fn agreement_report(&self, batch_id: &str, rate: SponsoredRate) -> Result<FullReport, ServiceError> {
        let export = self.export_labels(batch_id, ExportFilter::default())?;
        let preds = self.model_labels(batch_id)?;
        let matrix = LabelMatrix::from_rows(&export.rows)?;
        let disclosed = present_items(&matrix, &export.manifest.disclosed_items);
        Ok(build_report(&matrix, &disclosed, &export.manifest.report, preds.as_ref(), rate)?)
    }
}

fn present_items(matrix: &LabelMatrix, ids: &[String]) -> Vec<String> {
    ids.iter().filter(|id| matrix.item_index(id).is_some()).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutput {
    pub report: FullReport,
    /// Pretty JSON, byte-stable for fixed inputs.
    pub json: String,
    pub text: String,
}

/// Rebuilds the agreement report from exported files. Disclosed posts that
/// nobody labelled are ignored. With `predictions` absent the bias section
/// is omitted; a file holding several models needs `model_id`.
pub fn replay_report<L: Read, P: Read>(
    labels: L,
    disclosed_ids: &[String],
    manifest: &ReportManifest,
    predictions: Option<P>,
    model_id: Option<&str>,
    rate: SponsoredRate,
) -> Result<ReplayOutput, ServiceError> {
    let rows = read_label_file(labels)?;
    let matrix = LabelMatrix::from_rows(&rows)?;
    let preds = match predictions {
        None => None,
        Some(r) => {
            let all = import_predictions(r)?;
            let models: BTreeSet<&str> = all.iter().map(|p| p.model_id.as_str()).collect();
            let wanted = match model_id {
                Some(m) if models.contains(m) => m,
                Some(m) => return Err(ServiceError::NotFound(format!("model {m:?} in predictions"))),
                None if models.len() <= 1 => models.first().copied().unwrap_or_default(),
                None => {
                    return Err(ServiceError::Validation(format!(
                        "predictions hold several models {models:?}; pick one"
                    )))
                }
            };
            Some(
                all.iter()
                    .filter(|p| p.model_id == wanted)
                    .map(|p| (p.post_id.clone(), p.label))
                    .collect::<HashMap<_, _>>(),
            )
        }
    };
    let disclosed = present_items(&matrix, disclosed_ids);
    let report = build_report(&matrix, &disclosed, manifest, preds.as_ref(), rate)?;
    Ok(ReplayOutput {
        json: serde_json::to_string_pretty(&report)?,
        text: render_text(&report),
        report,
    })
}
