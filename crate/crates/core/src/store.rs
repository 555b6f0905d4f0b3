//! Append-only session store.
//!
//! Layout under the data directory:
//!
//! ```text
//! sessions/<session_id>/manifest.json   rewritten atomically (temp + rename)
//! sessions/<session_id>/trials.jsonl    one trial per line, append + fsync
//! ```
//!
//! The trial file is authoritative. Submitted counts are recomputed from it
//! when a session is opened, and a fragment left by an interrupted append is
//! cut off before the next write. Writes to one session are serialized by a
//! per-session lock; sessions are independent.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::trial::{read_trials, TrialRecord};

pub const SCHEMA_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const TRIALS: &str = "trials.jsonl";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationPrompt {
    pub id: String,
    pub prompt: String,
}

/// The rating prompts used when a session is created without its own.
pub fn default_evaluations() -> Vec<EvaluationPrompt> {
    [
        ("EC", "How sure are you that your answer was right?"),
        ("EL", "How likely is it that you made a mistake?"),
        ("EK", "How well did you know the answer before responding?"),
    ]
    .into_iter()
    .map(|(id, prompt)| EvaluationPrompt {
        id: id.into(),
        prompt: prompt.into(),
    })
    .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionCount {
    pub first: String,
    pub second: String,
    /// Trials stored for this condition.
    pub submitted: u64,
    /// Times this condition was handed out by `next_condition`.
    pub assigned: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub session_id: String,
    pub created_at: chrono::DateTime<chrono::Utc>,
    pub evaluations: Vec<EvaluationPrompt>,
    pub seed: u64,
    pub conditions: Vec<ConditionCount>,
    pub total_trials: u64,
    pub schema_version: u32,
}

impl SessionManifest {
    /// Ordered pairs of the evaluation set, in evaluation order.
    pub fn condition_pairs(&self) -> Vec<(String, String)> {
        self.conditions
            .iter()
            .map(|c| (c.first.clone(), c.second.clone()))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NewSession {
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub evaluations: Option<Vec<EvaluationPrompt>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acknowledgment {
    pub session_id: String,
    pub trial_index: u64,
    /// True when an identical record had already been stored.
    pub duplicate: bool,
    pub total_trials: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub session_id: String,
    pub first_eval: String,
    pub second_eval: String,
    pub first_prompt: String,
    pub second_prompt: String,
}

struct Session {
    dir: PathBuf,
    manifest: SessionManifest,
    trials: BTreeMap<u64, TrialRecord>,
}

pub struct TrialStore {
    root: PathBuf,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl TrialStore {
    pub fn open(data_dir: impl AsRef<Path>) -> Result<Self> {
        let root = data_dir.as_ref().join("sessions");
        fs::create_dir_all(&root)?;
        Ok(TrialStore {
            root,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn create_session(&self, request: NewSession) -> Result<SessionManifest> {
        let now = chrono::Utc::now();
        let nanos = now.timestamp_nanos_opt().unwrap_or_default() as u64;
        let session_id = match request.session_id {
            Some(id) => {
                if !valid_session_id(&id) {
                    return Err(Error::validation(
                        "session_id",
                        "use 1-64 ASCII letters, digits, '-' or '_'",
                    ));
                }
                id
            }
            None => format!("s{:016x}", seed::derive(nanos, &[std::process::id().into()])),
        };
        let evaluations = request.evaluations.unwrap_or_else(default_evaluations);
        if evaluations.len() != 3 {
            return Err(Error::validation("evaluations", "exactly three evaluations are required"));
        }
        for (k, e) in evaluations.iter().enumerate() {
            if e.id.is_empty() || evaluations[..k].iter().any(|o| o.id == e.id) {
                return Err(Error::validation("evaluations", "ids must be nonempty and distinct"));
            }
        }
        let conditions = evaluations
            .iter()
            .flat_map(|a| {
                evaluations.iter().filter(move |b| b.id != a.id).map(move |b| ConditionCount {
                    first: a.id.clone(),
                    second: b.id.clone(),
                    submitted: 0,
                    assigned: 0,
                })
            })
            .collect();
        let manifest = SessionManifest {
            session_id: session_id.clone(),
            created_at: now,
            evaluations,
            seed: request.seed.unwrap_or_else(|| seed::mix64(nanos)),
            conditions,
            total_trials: 0,
            schema_version: SCHEMA_VERSION,
        };

        let mut sessions = self.sessions.lock().expect("session table lock");
        let dir = self.root.join(&session_id);
        if sessions.contains_key(&session_id) || dir.exists() {
            return Err(Error::SessionExists(session_id));
        }
        fs::create_dir_all(&dir)?;
        File::create(dir.join(TRIALS))?.sync_all()?;
        write_manifest(&dir, &manifest)?;
        sessions.insert(
            session_id,
            Arc::new(Mutex::new(Session {
                dir,
                manifest: manifest.clone(),
                trials: BTreeMap::new(),
            })),
        );
        Ok(manifest)
    }

    fn session(&self, session_id: &str) -> Result<Arc<Mutex<Session>>> {
        let mut sessions = self.sessions.lock().expect("session table lock");
        if let Some(s) = sessions.get(session_id) {
            return Ok(Arc::clone(s));
        }
        if !valid_session_id(session_id) {
            return Err(Error::UnknownSession(session_id.into()));
        }
        let dir = self.root.join(session_id);
        if !dir.join(MANIFEST).is_file() {
            return Err(Error::UnknownSession(session_id.into()));
        }
        let session = Arc::new(Mutex::new(load_session(dir)?));
        sessions.insert(session_id.into(), Arc::clone(&session));
        Ok(session)
    }

    pub fn manifest(&self, session_id: &str) -> Result<SessionManifest> {
        let session = self.session(session_id)?;
        let guard = session.lock().expect("session lock");
        Ok(guard.manifest.clone())
    }

    /// Stores a trial durably. Resubmitting an identical record is
    /// acknowledged without counting it twice; a different record under an
    /// already used `trial_index` is rejected.
    pub fn append_trial(&self, session_id: &str, record: &TrialRecord) -> Result<Acknowledgment> {
        let session = self.session(session_id)?;
        let mut s = session.lock().expect("session lock");
        record.validate()?;
        if record.session_id != session_id {
            return Err(Error::validation(
                "session_id",
                format!("record names `{}` but was sent to `{session_id}`", record.session_id),
            ));
        }
        let Some(slot) = s
            .manifest
            .conditions
            .iter()
            .position(|c| c.first == record.first_eval && c.second == record.second_eval)
        else {
            let field = if s.manifest.evaluations.iter().any(|e| e.id == record.first_eval) {
                "second_eval"
            } else {
                "first_eval"
            };
            return Err(Error::validation(field, "not an evaluation of this session"));
        };
        let canonical = record.canonical();
        if let Some(existing) = s.trials.get(&record.trial_index) {
            if *existing == canonical {
                return Ok(Acknowledgment {
                    session_id: session_id.into(),
                    trial_index: record.trial_index,
                    duplicate: true,
                    total_trials: s.manifest.total_trials,
                });
            }
            return Err(Error::IdempotencyConflict {
                session_id: session_id.into(),
                trial_index: record.trial_index,
            });
        }

        let mut file = OpenOptions::new().append(true).open(s.dir.join(TRIALS))?;
        let mut line = canonical.to_line();
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.sync_data()?;

        s.trials.insert(record.trial_index, canonical);
        s.manifest.conditions[slot].submitted += 1;
        s.manifest.total_trials += 1;
        write_manifest(&s.dir, &s.manifest)?;
        Ok(Acknowledgment {
            session_id: session_id.into(),
            trial_index: record.trial_index,
            duplicate: false,
            total_trials: s.manifest.total_trials,
        })
    }

    /// Hands out the condition with the fewest assignments so far. Ties are
    /// broken by a shuffle seeded from the session seed and the current
    /// minimum, so each round of six visits every condition once.
    pub fn next_condition(&self, session_id: &str) -> Result<Assignment> {
        let session = self.session(session_id)?;
        let mut s = session.lock().expect("session lock");
        let pick = pick_least_assigned(&s.manifest);
        s.manifest.conditions[pick].assigned += 1;
        write_manifest(&s.dir, &s.manifest)?;
        let c = &s.manifest.conditions[pick];
        let prompt = |id: &str| {
            s.manifest
                .evaluations
                .iter()
                .find(|e| e.id == id)
                .map(|e| e.prompt.clone())
                .unwrap_or_default()
        };
        Ok(Assignment {
            session_id: session_id.into(),
            first_eval: c.first.clone(),
            second_eval: c.second.clone(),
            first_prompt: prompt(&c.first),
            second_prompt: prompt(&c.second),
        })
    }

    /// The session's trial file, exactly as stored.
    pub fn export(&self, session_id: &str) -> Result<Vec<u8>> {
        let session = self.session(session_id)?;
        let s = session.lock().expect("session lock");
        Ok(fs::read(s.dir.join(TRIALS))?)
    }

    pub fn trials(&self, session_id: &str) -> Result<Vec<TrialRecord>> {
        let session = self.session(session_id)?;
        let s = session.lock().expect("session lock");
        Ok(s.trials.values().cloned().collect())
    }

    pub fn trial_file(&self, session_id: &str) -> Result<PathBuf> {
        let session = self.session(session_id)?;
        let s = session.lock().expect("session lock");
        Ok(s.dir.join(TRIALS))
    }
}

fn pick_least_assigned(manifest: &SessionManifest) -> usize {
    let min = manifest.conditions.iter().map(|c| c.assigned).min().unwrap_or(0);
    let mut order: Vec<usize> = (0..manifest.conditions.len()).collect();
    order.shuffle(&mut seed::substream(manifest.seed, &[min]));
    order
        .into_iter()
        .find(|&k| manifest.conditions[k].assigned == min)
        .expect("at least one condition")
}

fn write_manifest(dir: &Path, manifest: &SessionManifest) -> Result<()> {
    let tmp = dir.join(format!("{MANIFEST}.tmp"));
    {
        let mut f = File::create(&tmp)?;
        serde_json::to_writer_pretty(&mut f, manifest)?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(MANIFEST))?;
    Ok(())
}

fn load_session(dir: PathBuf) -> Result<Session> {
    let mut manifest: SessionManifest =
        serde_json::from_reader(BufReader::new(File::open(dir.join(MANIFEST))?))?;
    let path = dir.join(TRIALS);
    if !path.exists() {
        File::create(&path)?;
    }
    let bytes = fs::read(&path)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    if complete < bytes.len() {
        OpenOptions::new().write(true).open(&path)?.set_len(complete as u64)?;
    }
    let records = read_trials(&bytes[..complete])?;
    let mut trials = BTreeMap::new();
    for c in &mut manifest.conditions {
        c.submitted = 0;
    }
    for r in records {
        if let Some(c) = manifest
            .conditions
            .iter_mut()
            .find(|c| c.first == r.first_eval && c.second == r.second_eval)
        {
            c.submitted += 1;
        }
        trials.insert(r.trial_index, r);
    }
    manifest.total_trials = trials.len() as u64;
    Ok(Session {
        dir,
        manifest,
        trials,
    })
}
