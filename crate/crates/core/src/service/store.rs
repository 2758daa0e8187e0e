use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Annotator, LabelRecord, Project, ServiceError, StoredBatch, SurveyResponse};

/// Events between automatic snapshots.
pub const SNAPSHOT_EVERY: u64 = 1000;

const LOG_FILE: &str = "events.jsonl";
const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub(crate) enum Event {
    BatchRegistered(StoredBatch),
    AnnotatorRegistered(Annotator),
    ProjectCreated(Project),
    LabelSubmitted(LabelRecord),
    SurveySubmitted(SurveyResponse),
}

#[derive(Serialize, Deserialize)]
struct Record {
    seq: u64,
    event: Event,
}

/// Everything the service knows, rebuilt by folding events in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub(crate) struct State {
    pub last_seq: u64,
    pub batches: BTreeMap<String, StoredBatch>,
    pub annotators: BTreeMap<String, Annotator>,
    pub projects: BTreeMap<String, Project>,
    /// project_id -> post_id -> current label.
    pub labels: BTreeMap<String, BTreeMap<String, LabelRecord>>,
    pub surveys: BTreeMap<String, SurveyResponse>,
}

impl State {
    pub fn apply(&mut self, event: Event) {
        match event {
            Event::BatchRegistered(b) => {
                self.batches.insert(b.batch_id.clone(), b);
            }
            Event::AnnotatorRegistered(a) => {
                self.annotators.insert(a.annotator_id.clone(), a);
            }
            Event::ProjectCreated(p) => {
                if let Some(a) = self.annotators.get_mut(&p.annotator_id) {
                    a.setups.insert(p.setup);
                }
                self.labels.entry(p.project_id.clone()).or_default();
                self.projects.insert(p.project_id.clone(), p);
            }
            Event::LabelSubmitted(l) => {
                self.labels
                    .entry(l.project_id.clone())
                    .or_default()
                    .insert(l.post_id.clone(), l);
            }
            Event::SurveySubmitted(s) => {
                self.surveys.insert(s.project_id.clone(), s);
            }
        }
    }
}

/// Durable event log. `None` directory keeps everything in memory.
pub(crate) struct Store {
    dir: Option<PathBuf>,
    log: Option<File>,
    since_snapshot: u64,
}

fn sync_dir(dir: &Path) -> std::io::Result<()> {
    File::open(dir)?.sync_all()
}

impl Store {
    pub fn memory() -> Self {
        Self {
            dir: None,
            log: None,
            since_snapshot: 0,
        }
    }

    /// Loads the snapshot (if any) and replays newer log records. A torn
    /// final line from an interrupted append is dropped; damage anywhere else
    /// is an error.
    pub fn open(dir: &Path) -> Result<(Self, State), ServiceError> {
        fs::create_dir_all(dir)?;
        let mut state = match fs::read(dir.join(SNAPSHOT_FILE)) {
            Ok(bytes) => serde_json::from_slice(&bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => State::default(),
            Err(e) => return Err(e.into()),
        };
        let log_path = dir.join(LOG_FILE);
        let mut since_snapshot = 0;
        if log_path.exists() {
            let lines: Vec<String> =
                BufReader::new(File::open(&log_path)?).lines().collect::<Result<_, _>>()?;
            let raw = fs::read(&log_path)?;
            let ends_clean = raw.last().is_none_or(|&b| b == b'\n');
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let record: Record = match serde_json::from_str(line) {
                    Ok(r) => r,
                    Err(_) if i + 1 == lines.len() && !ends_clean => {
                        tracing::warn!(line = i + 1, "dropping torn final event");
                        break;
                    }
                    Err(e) => {
                        return Err(ServiceError::Corrupt {
                            line: i + 1,
                            message: e.to_string(),
                        })
                    }
                };
                if record.seq <= state.last_seq {
                    continue;
                }
                if record.seq != state.last_seq + 1 {
                    return Err(ServiceError::Corrupt {
                        line: i + 1,
                        message: format!("expected seq {}, found {}", state.last_seq + 1, record.seq),
                    });
                }
                state.apply(record.event);
                state.last_seq = record.seq;
                since_snapshot += 1;
            }
            if !ends_clean {
                rewrite_log(dir, &lines, state.last_seq)?;
            }
        }
        let log = OpenOptions::new().create(true).append(true).open(&log_path)?;
        Ok((
            Self {
                dir: Some(dir.to_path_buf()),
                log: Some(log),
                since_snapshot,
            },
            state,
        ))
    }

    /// Appends and fsyncs `event`, then applies it. Nothing is applied if the
    /// write fails.
    pub fn commit(&mut self, state: &mut State, event: Event) -> Result<(), ServiceError> {
        let seq = state.last_seq + 1;
        if let Some(log) = &mut self.log {
            let mut line = serde_json::to_vec(&Record {
                seq,
                event: event.clone(),
            })?;
            line.push(b'\n');
            log.write_all(&line)?;
            log.sync_data()?;
        }
        state.apply(event);
        state.last_seq = seq;
        self.since_snapshot += 1;
        if self.since_snapshot >= SNAPSHOT_EVERY {
            self.snapshot(state)?;
        }
        Ok(())
    }

    /// Writes the full state via temp file and rename, then starts a fresh
    /// log. Records already covered by the snapshot are skipped on replay, so
    /// a crash between the two steps is harmless.
    pub fn snapshot(&mut self, state: &State) -> Result<(), ServiceError> {
        let Some(dir) = self.dir.clone() else {
            return Ok(());
        };
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&serde_json::to_vec(state)?)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, dir.join(SNAPSHOT_FILE))?;
        sync_dir(&dir)?;
        rewrite_log(&dir, &[], state.last_seq)?;
        self.log = Some(OpenOptions::new().append(true).open(dir.join(LOG_FILE))?);
        self.since_snapshot = 0;
        Ok(())
    }
}

/// Replaces the log with the given lines (those up to `last_seq`), atomically.
fn rewrite_log(dir: &Path, lines: &[String], last_seq: u64) -> Result<(), ServiceError> {
    let tmp = dir.join(format!("{LOG_FILE}.tmp"));
    {
        let mut f = File::create(&tmp)?;
        for line in lines {
            let Ok(r) = serde_json::from_str::<Record>(line) else {
                continue;
            };
            if r.seq <= last_seq {
                f.write_all(line.as_bytes())?;
                f.write_all(b"\n")?;
            }
        }
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(LOG_FILE))?;
    sync_dir(dir)?;
    Ok(())
}
