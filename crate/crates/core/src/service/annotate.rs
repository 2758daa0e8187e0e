use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use chrono::Utc;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::store::{Event, State, Store};
use super::{
    Annotator, AttentionReport, BatchItem, Expertise, ItemView, LabelAck, LabelRecord, NextItem,
    Project, ServiceError, Setup, StoredBatch, SurveyAnswers, SurveyResponse,
};
use crate::corpus::{AnnotationBatch, Corpus};
use crate::explainer::{strip_label_line, Explanation};
use crate::Label;

/// Divider placed between a caption and its explanation.
pub const EXPLANATION_DELIMITER: &str = "--- AI explanation ---";

/// Joins a sampled batch with captions and (optionally) explanations.
pub fn batch_from_corpus(
    batch: &AnnotationBatch,
    corpus: &Corpus,
    explanations: &HashMap<String, Explanation>,
) -> Result<StoredBatch, ServiceError> {
    let items = batch
        .items
        .iter()
        .map(|id| {
            let post = corpus
                .get(id)
                .ok_or_else(|| ServiceError::NotFound(format!("post {id:?}")))?;
            let explanation = explanations.get(id);
            Ok(BatchItem {
                post_id: id.clone(),
                caption: post.caption.clone(),
                explanation: explanation.map(Explanation::to_text),
                model_label: explanation.map(|e| e.implied_label.label()),
            })
        })
        .collect::<Result<Vec<_>, ServiceError>>()?;
    Ok(StoredBatch {
        batch_id: batch.batch_id.clone(),
        items,
        disclosed_items: batch.disclosed_items.clone(),
    })
}

fn validate_id(kind: &str, id: &str) -> Result<(), ServiceError> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(ServiceError::Validation(format!(
            "{kind} must be 1-64 characters of [A-Za-z0-9_-], got {id:?}"
        )))
    }
}

fn project_digest(annotator_id: &str, setup: Setup, batch_id: &str, seed: Option<u64>) -> [u8; 32] {
    let mut h = Sha256::new();
    if let Some(seed) = seed {
        h.update(seed.to_le_bytes());
    }
    for part in [annotator_id, setup.as_str(), batch_id] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.finalize().into()
}

/// Opaque project token derived from the (annotator, setup, batch) triple.
pub fn project_id(annotator_id: &str, setup: Setup, batch_id: &str) -> String {
    format!("prj-{}", &hex::encode(project_digest(annotator_id, setup, batch_id, None))[..16])
}

/// Item order for a project: the batch shuffled by a generator keyed on the
/// seed and the triple, so the same annotator gets unrelated orders per setup.
pub fn item_order(batch: &StoredBatch, annotator_id: &str, setup: Setup, seed: u64) -> Vec<String> {
    let mut rng =
        ChaCha8Rng::from_seed(project_digest(annotator_id, setup, &batch.batch_id, Some(seed)));
    let mut order: Vec<String> = batch.items.iter().map(|i| i.post_id.clone()).collect();
    order.shuffle(&mut rng);
    order
}

struct Inner {
    store: Store,
    state: State,
}

/// Thread-safe annotation backend. Every mutating call is durable when it
/// returns.
pub struct AnnotationService {
    inner: Mutex<Inner>,
}

impl AnnotationService {
    pub fn in_memory() -> Self {
        Self {
            inner: Mutex::new(Inner {
                store: Store::memory(),
                state: State::default(),
            }),
        }
    }

    pub fn open(dir: &Path) -> Result<Self, ServiceError> {
        let (store, state) = Store::open(dir)?;
        Ok(Self {
            inner: Mutex::new(Inner { store, state }),
        })
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Registers a batch. Re-registering identical content is a no-op.
    pub fn register_batch(&self, batch: StoredBatch) -> Result<(), ServiceError> {
        validate_id("batch_id", &batch.batch_id)?;
        let mut seen = BTreeSet::new();
        for item in &batch.items {
            if !seen.insert(item.post_id.as_str()) {
                return Err(ServiceError::Validation(format!("duplicate post {:?}", item.post_id)));
            }
        }
        if let Some(d) = batch.disclosed_items.iter().find(|d| !seen.contains(d.as_str())) {
            return Err(ServiceError::Validation(format!("disclosed post {d:?} not in batch")));
        }
        let mut g = self.lock();
        match g.state.batches.get(&batch.batch_id) {
            Some(existing) if *existing == batch => return Ok(()),
            Some(_) => {
                return Err(ServiceError::Conflict(format!(
                    "batch {:?} already registered with different content",
                    batch.batch_id
                )))
            }
            None => {}
        }
        let Inner { store, state } = &mut *g;
        store.commit(state, Event::BatchRegistered(batch))
    }

    /// Registers an annotator. Idempotent for the same expertise.
    pub fn register_annotator(&self, annotator_id: &str, expertise: Expertise) -> Result<(), ServiceError> {
        validate_id("annotator_id", annotator_id)?;
        let mut g = self.lock();
        match g.state.annotators.get(annotator_id) {
            Some(a) if a.expertise == expertise => return Ok(()),
            Some(a) => {
                return Err(ServiceError::Conflict(format!(
                    "annotator {annotator_id:?} already registered as {:?}",
                    a.expertise
                )))
            }
            None => {}
        }
        let Inner { store, state } = &mut *g;
        store.commit(
            state,
            Event::AnnotatorRegistered(Annotator {
                annotator_id: annotator_id.to_string(),
                expertise,
                setups: BTreeSet::new(),
            }),
        )
    }

    pub fn create_project(
        &self,
        annotator_id: &str,
        batch_id: &str,
        setup: Setup,
        seed: u64,
    ) -> Result<Project, ServiceError> {
        let mut g = self.lock();
        if !g.state.annotators.contains_key(annotator_id) {
            return Err(ServiceError::NotFound(format!("annotator {annotator_id:?}")));
        }
        let batch = g
            .state
            .batches
            .get(batch_id)
            .ok_or_else(|| ServiceError::NotFound(format!("batch {batch_id:?}")))?;
        let project_id = project_id(annotator_id, setup, batch_id);
        if g.state.projects.contains_key(&project_id) {
            return Err(ServiceError::Conflict(format!(
                "annotator {annotator_id:?} already has a {setup} project for batch {batch_id:?}"
            )));
        }
        if setup == Setup::WithExplanations {
            if let Some(missing) = batch.items.iter().find(|i| i.explanation.is_none()) {
                return Err(ServiceError::Validation(format!(
                    "post {:?} has no explanation; batch cannot be used with explanations",
                    missing.post_id
                )));
            }
        }
        let project = Project {
            project_id,
            annotator_id: annotator_id.to_string(),
            setup,
            batch_id: batch_id.to_string(),
            item_order: item_order(batch, annotator_id, setup, seed),
            seed,
            created_at: Utc::now(),
        };
        let Inner { store, state } = &mut *g;
        store.commit(state, Event::ProjectCreated(project.clone()))?;
        Ok(project)
    }

    pub fn project(&self, project_id: &str) -> Result<Project, ServiceError> {
        self.lock()
            .state
            .projects
            .get(project_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("project {project_id:?}")))
    }

    pub fn projects(&self) -> Vec<Project> {
        self.lock().state.projects.values().cloned().collect()
    }

    pub fn batch(&self, batch_id: &str) -> Result<StoredBatch, ServiceError> {
        self.lock()
            .state
            .batches
            .get(batch_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("batch {batch_id:?}")))
    }

    pub fn annotators(&self) -> Vec<Annotator> {
        self.lock().state.annotators.values().cloned().collect()
    }

    /// Current labels of one project, keyed by post.
    pub fn labels(&self, project_id: &str) -> Result<Vec<LabelRecord>, ServiceError> {
        let g = self.lock();
        g.state
            .labels
            .get(project_id)
            .map(|m| m.values().cloned().collect())
            .ok_or_else(|| ServiceError::NotFound(format!("project {project_id:?}")))
    }

    /// First unlabelled item in the project's order.
    pub fn next_item(&self, project_id: &str) -> Result<NextItem, ServiceError> {
        let g = self.lock();
        let (project, batch, labels) = lookup(&g.state, project_id)?;
        let total = project.item_order.len();
        let Some((idx, post_id)) = project
            .item_order
            .iter()
            .enumerate()
            .find(|(_, id)| !labels.contains_key(*id))
        else {
            return Ok(NextItem::Done { total });
        };
        let item = batch.item(post_id).expect("project items come from the batch");
        let explanation_block = match project.setup {
            Setup::WithoutExplanations => None,
            Setup::WithExplanations => Some(format!(
                "{EXPLANATION_DELIMITER}\n{}",
                strip_label_line(item.explanation.as_deref().unwrap_or_default())
            )),
        };
        Ok(NextItem::Item(ItemView {
            post_id: post_id.clone(),
            caption: item.caption.clone(),
            explanation_block,
            position: idx + 1,
            total,
        }))
    }

    /// Records a label for the current item, or revises an earlier one (last
    /// write wins). Items ahead of the current one cannot be labelled.
    pub fn submit_label(&self, project_id: &str, post_id: &str, label: Label) -> Result<LabelAck, ServiceError> {
        let mut g = self.lock();
        let (project, batch, labels) = lookup(&g.state, project_id)?;
        if batch.item(post_id).is_none() {
            return Err(ServiceError::Validation(format!(
                "post {post_id:?} is not part of batch {:?}",
                project.batch_id
            )));
        }
        if !labels.contains_key(post_id) {
            let current = project.item_order.iter().find(|id| !labels.contains_key(*id));
            if current.map(String::as_str) != Some(post_id) {
                return Err(ServiceError::Validation(format!(
                    "post {post_id:?} is not the current item; items are labelled in order"
                )));
            }
        }
        let total = project.item_order.len();
        let record = LabelRecord {
            project_id: project_id.to_string(),
            post_id: post_id.to_string(),
            label,
            labeled_at: Utc::now(),
        };
        let Inner { store, state } = &mut *g;
        store.commit(state, Event::LabelSubmitted(record.clone()))?;
        Ok(LabelAck {
            project_id: record.project_id,
            post_id: record.post_id,
            label,
            labeled_at: record.labeled_at,
            labelled: state.labels[project_id].len(),
            total,
        })
    }

    /// Accuracy on the batch's disclosed posts labelled so far.
    pub fn attention_report(&self, project_id: &str) -> Result<AttentionReport, ServiceError> {
        let g = self.lock();
        let (_, batch, labels) = lookup(&g.state, project_id)?;
        let seen: Vec<Label> = batch
            .disclosed_items
            .iter()
            .filter_map(|id| labels.get(id).map(|r| r.label))
            .collect();
        let correct = seen.iter().filter(|l| l.is_sponsored()).count();
        Ok(AttentionReport {
            disclosed_seen: seen.len(),
            disclosed_correct: correct,
            accuracy: (!seen.is_empty()).then(|| correct as f64 / seen.len() as f64),
        })
    }

    /// Stores the questionnaire once per explanation-setup project.
    pub fn submit_survey(&self, project_id: &str, answers: SurveyAnswers) -> Result<SurveyResponse, ServiceError> {
        let mut g = self.lock();
        let (project, _, _) = lookup(&g.state, project_id)?;
        if project.setup != Setup::WithExplanations {
            return Err(ServiceError::Validation(
                "the survey is only for projects with explanations".into(),
            ));
        }
        answers.validate()?;
        if g.state.surveys.contains_key(project_id) {
            return Err(ServiceError::Conflict(format!("survey for {project_id:?} already submitted")));
        }
        let response = SurveyResponse {
            project_id: project_id.to_string(),
            answers,
            submitted_at: Utc::now(),
        };
        let Inner { store, state } = &mut *g;
        store.commit(state, Event::SurveySubmitted(response.clone()))?;
        Ok(response)
    }

    pub fn surveys(&self) -> Vec<SurveyResponse> {
        self.lock().state.surveys.values().cloned().collect()
    }

    /// Forces a snapshot and log compaction.
    pub fn snapshot(&self) -> Result<(), ServiceError> {
        let mut g = self.lock();
        let Inner { store, state } = &mut *g;
        store.snapshot(state)
    }

    pub(crate) fn with_state<T>(&self, f: impl FnOnce(&State) -> T) -> T {
        f(&self.lock().state)
    }
}

type Lookup<'a> = (
    &'a Project,
    &'a StoredBatch,
    &'a std::collections::BTreeMap<String, LabelRecord>,
);

fn lookup<'a>(state: &'a State, project_id: &str) -> Result<Lookup<'a>, ServiceError> {
    let project = state
        .projects
        .get(project_id)
        .ok_or_else(|| ServiceError::NotFound(format!("project {project_id:?}")))?;
    let batch = &state.batches[&project.batch_id];
    Ok((project, batch, &state.labels[project_id]))
}
