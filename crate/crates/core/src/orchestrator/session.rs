//! Interactive clarification sessions: a query is clarified once, then the
//! user picks one clarification and gets its stored answer and citation.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::Method;
use super::engine::Engine;
use crate::consolidate::ClarificationSet;
use crate::error::{Error, Result};
use crate::ledger::CostLedger;

pub const SNIPPET_CHARS: usize = 280;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Created,
    Clarified,
    Chosen,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub state: SessionState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarifySession {
    pub session_id: String,
    pub original_query: String,
    pub state: SessionState,
    pub clarifications: ClarificationSet,
    /// Snippet of each clarification's cited passage, aligned with the items.
    pub snippets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_shown: Option<String>,
    /// Unix seconds.
    pub created_at: u64,
    pub history: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub answer: String,
    pub interpretation: String,
    pub passage_id: String,
    pub snippet: String,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// In-memory session map, optionally mirrored to a JSON snapshot file.
pub struct SessionStore {
    engine: Arc<Engine>,
    sessions: Mutex<BTreeMap<String, ClarifySession>>,
    snapshot: Option<PathBuf>,
}

impl std::fmt::Debug for SessionStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionStore")
            .field("sessions", &self.sessions.lock().map(|s| s.len()).unwrap_or(0))
            .finish()
    }
}

impl SessionStore {
    pub fn new(engine: Arc<Engine>) -> Self {
        Self {
            engine,
            sessions: Mutex::new(BTreeMap::new()),
            snapshot: None,
        }
    }

    /// Mirrors sessions to `path`, loading any sessions already there.
    pub fn with_snapshot(mut self, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        if path.exists() {
            let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let loaded: BTreeMap<String, ClarifySession> = serde_json::from_str(&raw)?;
            *self.sessions.get_mut().expect("sessions poisoned") = loaded;
        }
        self.snapshot = Some(path);
        Ok(self)
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn persist(&self, sessions: &BTreeMap<String, ClarifySession>) -> Result<()> {
        if let Some(path) = &self.snapshot {
            let raw = serde_json::to_string_pretty(sessions)?;
            fs::write(path, raw).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    /// Runs VerDICT once and stores the clarifications whose passage
    /// resolves in the corpus.
    pub fn start_session(&self, q: &str) -> Result<ClarifySession> {
        let q = q.trim();
        if q.is_empty() {
            return Err(Error::Invalid("query is empty".into()));
        }
        let created_at = now();
        let mut session = ClarifySession {
            session_id: uuid::Uuid::new_v4().to_string(),
            original_query: q.to_string(),
            state: SessionState::Created,
            clarifications: ClarificationSet::empty(q, Method::Verdict.source()),
            snippets: Vec::new(),
            chosen: None,
            answer_shown: None,
            created_at,
            history: vec![Transition {
                state: SessionState::Created,
                index: None,
                at: created_at,
            }],
        };
        let run = self
            .engine
            .run_method(Method::Verdict, q, &Arc::new(CostLedger::new()))?;
        let mut set = run.clarifications;
        let corpus = &self.engine.corpus;
        let before = set.items.len();
        set.items
            .retain(|i| i.passage_id.as_deref().is_some_and(|id| corpus.contains(id)));
        if set.items.len() < before {
            set.warnings
                .push(format!("{} clarification(s) without a resolvable passage dropped", before - set.items.len()));
        }
        session.snippets = set
            .items
            .iter()
            .map(|i| {
                i.passage_id
                    .as_deref()
                    .and_then(|id| corpus.by_id(id))
                    .map(|p| p.snippet(SNIPPET_CHARS))
                    .unwrap_or_default()
            })
            .collect();
        session.clarifications = set;
        session.state = SessionState::Clarified;
        session.history.push(Transition {
            state: SessionState::Clarified,
            index: None,
            at: now(),
        });
        let mut sessions = self.sessions.lock().expect("sessions poisoned");
        sessions.insert(session.session_id.clone(), session.clone());
        self.persist(&sessions)?;
        Ok(session)
    }

    pub fn get_session(&self, id: &str) -> Result<ClarifySession> {
        self.sessions
            .lock()
            .expect("sessions poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("session `{id}`")))
    }

    /// Marks `index` as chosen and returns its stored answer and citation.
    /// Choosing again overwrites the choice; history keeps every choice.
    pub fn choose(&self, id: &str, index: usize) -> Result<Choice> {
        let mut sessions = self.sessions.lock().expect("sessions poisoned");
        let session = sessions
            .get_mut(id)
            .ok_or_else(|| Error::NotFound(format!("session `{id}`")))?;
        let n = session.clarifications.items.len();
        let item = session.clarifications.items.get(index).ok_or_else(|| {
            Error::Invalid(format!("index {index} out of range for {n} clarification(s)"))
        })?;
        let choice = Choice {
            answer: item.answer.clone(),
            interpretation: item.interpretation.clone(),
            passage_id: item.passage_id.clone().unwrap_or_default(),
            snippet: session.snippets.get(index).cloned().unwrap_or_default(),
        };
        session.chosen = Some(index);
        session.answer_shown = Some(choice.answer.clone());
        session.state = SessionState::Chosen;
        session.history.push(Transition {
            state: SessionState::Chosen,
            index: Some(index),
            at: now(),
        });
        self.persist(&sessions)?;
        Ok(choice)
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("sessions poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
