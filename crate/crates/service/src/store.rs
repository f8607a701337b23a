//! SQLite persistence for stories, versioned reflections, sessions and
//! human evaluations.
//!
//! One connection behind a mutex; every multi-statement write runs in a
//! transaction, so readers only ever see committed rows.

use std::io::Write;
use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use reflective_core::analysis::{AnalysisInput, JoinedEvaluation, ScoredStory};
use reflective_core::argument_mining::ReflectionReport;
use reflective_core::argumentation::ArgumentPlan;
use reflective_core::evaluation::{EvaluationError, EvaluationResponse, PostStudyResponse};
use reflective_core::generation::Narrative;
use rusqlite::{params, Connection, ErrorCode, OptionalExtension};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS sessions (
    token       TEXT PRIMARY KEY,
    created_at  TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS stories (
    id            TEXT PRIMARY KEY,
    persona_id    TEXT NOT NULL,
    dialogue_type TEXT NOT NULL,
    creativity    TEXT NOT NULL,
    prompt_id     TEXT NOT NULL,
    narrative     TEXT NOT NULL,
    plan          TEXT NOT NULL,
    created_at    TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS reflections (
    story_id    TEXT NOT NULL REFERENCES stories(id),
    version     INTEGER NOT NULL,
    status      TEXT NOT NULL CHECK (status IN ('done', 'failed')),
    report      TEXT,
    error       TEXT,
    is_current  INTEGER NOT NULL,
    created_at  TEXT NOT NULL,
    PRIMARY KEY (story_id, version)
);
CREATE TABLE IF NOT EXISTS evaluations (
    id             INTEGER PRIMARY KEY AUTOINCREMENT,
    narrative_id   TEXT NOT NULL REFERENCES stories(id),
    respondent_id  TEXT NOT NULL,
    body           TEXT NOT NULL,
    created_at     TEXT NOT NULL,
    UNIQUE (narrative_id, respondent_id)
);
CREATE TABLE IF NOT EXISTS post_study (
    id             INTEGER PRIMARY KEY AUTOINCREMENT,
    respondent_id  TEXT NOT NULL UNIQUE,
    body           TEXT NOT NULL,
    created_at     TEXT NOT NULL
);
";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{kind} '{id}' not found")]
    NotFound { kind: &'static str, id: String },
    #[error("story id '{0}' already exists")]
    ConflictingId(String),
    #[error("respondent '{respondent_id}' already evaluated story '{narrative_id}'")]
    DuplicateEvaluation { narrative_id: String, respondent_id: String },
    #[error("respondent '{0}' already submitted the post-study form")]
    DuplicatePostStudy(String),
    #[error("invalid submission: {0}")]
    Validation(#[from] EvaluationError),
    #[error("storage error: {0}")]
    Storage(String),
}

impl From<rusqlite::Error> for StoreError {
    fn from(e: rusqlite::Error) -> Self {
        StoreError::Storage(e.to_string())
    }
}

impl From<serde_json::Error> for StoreError {
    fn from(e: serde_json::Error) -> Self {
        StoreError::Storage(format!("corrupt record: {e}"))
    }
}

impl From<csv::Error> for StoreError {
    fn from(e: csv::Error) -> Self {
        StoreError::Storage(e.to_string())
    }
}

fn is_unique_violation(e: &rusqlite::Error) -> bool {
    matches!(e, rusqlite::Error::SqliteFailure(f, _) if f.code == ErrorCode::ConstraintViolation)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionStatus {
    Pending,
    Done,
    Failed,
}

impl ReflectionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pending => "pending",
            Self::Done => "done",
            Self::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryRecord {
    pub narrative: Narrative,
    pub plan: ArgumentPlan,
    pub reflection: Option<ReflectionReport>,
    pub reflection_status: ReflectionStatus,
    /// Error message of the current reflection when it failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection_error: Option<String>,
    pub created_at: String,
}

impl StoryRecord {
    pub fn new(narrative: Narrative, plan: ArgumentPlan) -> Self {
        StoryRecord {
            narrative,
            plan,
            reflection: None,
            reflection_status: ReflectionStatus::Pending,
            reflection_error: None,
            created_at: chrono::Utc::now().to_rfc3339(),
        }
    }

    pub fn id(&self) -> &str {
        &self.narrative.id
    }
}

/// One stored reflection attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionRecord {
    pub story_id: String,
    pub version: i64,
    pub status: ReflectionStatus,
    pub report: Option<ReflectionReport>,
    pub error: Option<String>,
    pub is_current: bool,
    pub created_at: String,
}

/// Export columns, in order.
pub const EXPORT_HEADER: [&str; 23] = [
    "story_id",
    "persona_id",
    "dialogue_type",
    "creativity",
    "prompt_id",
    "reflection_status",
    "claim_count",
    "q_struct",
    "h_struct",
    "q_llm",
    "h_llm",
    "q_final",
    "h_final",
    "degenerate",
    "inconsistency_flags",
    "respondent_id",
    "purpose_selections",
    "liking",
    "creativity_rating",
    "creativity_judgement",
    "inconsistency",
    "disturbance",
    "inconsistency_explanation",
];

pub struct Store {
    conn: Mutex<Connection>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, StoreError> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        conn.execute_batch(SCHEMA)?;
        Ok(Store { conn: Mutex::new(conn) })
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        // a panic while holding the lock cannot leave a half-written
        // transaction behind, so the poisoned connection is still usable
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    // -- sessions --------------------------------------------------------

    pub fn create_session(&self) -> Result<String, StoreError> {
        let token = uuid::Uuid::new_v4().to_string();
        self.conn()
            .execute("INSERT INTO sessions (token, created_at) VALUES (?1, ?2)", params![token, now()])?;
        Ok(token)
    }

    pub fn session_exists(&self, token: &str) -> Result<bool, StoreError> {
        Ok(self
            .conn()
            .query_row("SELECT 1 FROM sessions WHERE token = ?1", [token], |_| Ok(()))
            .optional()?
            .is_some())
    }

    // -- stories ---------------------------------------------------------

    /// Stores a new story. Any reflection on the record is ignored; use
    /// [`Store::record_reflection`].
    pub fn persist_story(&self, record: &StoryRecord) -> Result<(), StoreError> {
        let n = &record.narrative;
        let result = self.conn().execute(
            "INSERT INTO stories (id, persona_id, dialogue_type, creativity, prompt_id, narrative, plan, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
            params![
                n.id,
                n.persona_id,
                n.dialogue_type.as_str(),
                n.creativity.as_str(),
                n.prompt_id,
                serde_json::to_string(n)?,
                serde_json::to_string(&record.plan)?,
                record.created_at,
            ],
        );
        match result {
            Ok(_) => Ok(()),
            Err(e) if is_unique_violation(&e) => Err(StoreError::ConflictingId(n.id.clone())),
            Err(e) => Err(e.into()),
        }
    }

    pub fn story_exists(&self, id: &str) -> Result<bool, StoreError> {
        Ok(self
            .conn()
            .query_row("SELECT 1 FROM stories WHERE id = ?1", [id], |_| Ok(()))
            .optional()?
            .is_some())
    }

    pub fn fetch_story(&self, id: &str) -> Result<StoryRecord, StoreError> {
        let conn = self.conn();
        let row: Option<(String, String, String)> = conn
            .query_row(
                "SELECT narrative, plan, created_at FROM stories WHERE id = ?1",
                [id],
                |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)),
            )
            .optional()?;
        let Some((narrative, plan, created_at)) = row else {
            return Err(StoreError::NotFound { kind: "story", id: id.to_string() });
        };
        let current = current_reflection(&conn, id)?;
        let (reflection_status, reflection, reflection_error) = match current {
            None => (ReflectionStatus::Pending, None, None),
            Some(r) => (r.status, r.report, r.error),
        };
        Ok(StoryRecord {
            narrative: serde_json::from_str(&narrative)?,
            plan: serde_json::from_str(&plan)?,
            reflection,
            reflection_status,
            reflection_error,
            created_at,
        })
    }

    /// Story ids in ascending order.
    pub fn story_ids(&self) -> Result<Vec<String>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT id FROM stories ORDER BY id")?;
        let ids = stmt.query_map([], |r| r.get(0))?.collect::<Result<_, _>>()?;
        Ok(ids)
    }

    /// Stories whose current reflection is missing or failed.
    pub fn unreflected_story_ids(&self) -> Result<Vec<String>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT s.id FROM stories s
             LEFT JOIN reflections r ON r.story_id = s.id AND r.is_current = 1
             WHERE r.status IS NULL OR r.status = 'failed'
             ORDER BY s.id",
        )?;
        let ids = stmt.query_map([], |r| r.get(0))?.collect::<Result<_, _>>()?;
        Ok(ids)
    }

    // -- reflections -----------------------------------------------------

    /// Appends a reflection version for a story and marks it current.
    /// `Err(message)` records a failed reflection.
    pub fn record_reflection(
        &self,
        story_id: &str,
        outcome: Result<&ReflectionReport, &str>,
    ) -> Result<i64, StoreError> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let exists = tx
            .query_row("SELECT 1 FROM stories WHERE id = ?1", [story_id], |_| Ok(()))
            .optional()?
            .is_some();
        if !exists {
            return Err(StoreError::NotFound { kind: "story", id: story_id.to_string() });
        }
        let version: i64 = tx.query_row(
            "SELECT COALESCE(MAX(version), 0) + 1 FROM reflections WHERE story_id = ?1",
            [story_id],
            |r| r.get(0),
        )?;
        tx.execute("UPDATE reflections SET is_current = 0 WHERE story_id = ?1", [story_id])?;
        let (status, report, error) = match outcome {
            Ok(report) => ("done", Some(serde_json::to_string(report)?), None),
            Err(message) => ("failed", None, Some(message.to_string())),
        };
        tx.execute(
            "INSERT INTO reflections (story_id, version, status, report, error, is_current, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5, 1, ?6)",
            params![story_id, version, status, report, error, now()],
        )?;
        tx.commit()?;
        Ok(version)
    }

    pub fn reflection_history(&self, story_id: &str) -> Result<Vec<ReflectionRecord>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT story_id, version, status, report, error, is_current, created_at
             FROM reflections WHERE story_id = ?1 ORDER BY version",
        )?;
        let rows = stmt
            .query_map([story_id], reflection_row)?
            .collect::<Result<Vec<_>, _>>()?;
        rows.into_iter().map(decode_reflection).collect()
    }

    // -- evaluations -----------------------------------------------------

    /// Validates and stores an evaluation. The story must exist and the
    /// respondent must hold a session.
    pub fn record_evaluation(&self, response: &EvaluationResponse) -> Result<i64, StoreError> {
        response.validate()?;
        let conn = self.conn();
        let story = conn
            .query_row("SELECT 1 FROM stories WHERE id = ?1", [&response.narrative_id], |_| Ok(()))
            .optional()?;
        if story.is_none() {
            return Err(StoreError::NotFound { kind: "story", id: response.narrative_id.clone() });
        }
        require_session(&conn, &response.respondent_id)?;
        let result = conn.execute(
            "INSERT INTO evaluations (narrative_id, respondent_id, body, created_at) VALUES (?1, ?2, ?3, ?4)",
            params![response.narrative_id, response.respondent_id, serde_json::to_string(response)?, now()],
        );
        match result {
            Ok(_) => Ok(conn.last_insert_rowid()),
            Err(e) if is_unique_violation(&e) => Err(StoreError::DuplicateEvaluation {
                narrative_id: response.narrative_id.clone(),
                respondent_id: response.respondent_id.clone(),
            }),
            Err(e) => Err(e.into()),
        }
    }

    pub fn record_post_study(&self, response: &PostStudyResponse) -> Result<i64, StoreError> {
        response.validate()?;
        let conn = self.conn();
        require_session(&conn, &response.respondent_id)?;
        let result = conn.execute(
            "INSERT INTO post_study (respondent_id, body, created_at) VALUES (?1, ?2, ?3)",
            params![response.respondent_id, serde_json::to_string(response)?, now()],
        );
        match result {
            Ok(_) => Ok(conn.last_insert_rowid()),
            Err(e) if is_unique_violation(&e) => Err(StoreError::DuplicatePostStudy(response.respondent_id.clone())),
            Err(e) => Err(e.into()),
        }
    }

    pub fn evaluations(&self) -> Result<Vec<EvaluationResponse>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT body FROM evaluations ORDER BY narrative_id, respondent_id")?;
        let bodies: Vec<String> = stmt.query_map([], |r| r.get(0))?.collect::<Result<_, _>>()?;
        Ok(bodies.iter().map(|b| serde_json::from_str(b)).collect::<Result<_, _>>()?)
    }

    pub fn post_study_responses(&self) -> Result<Vec<PostStudyResponse>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT body FROM post_study ORDER BY respondent_id")?;
        let bodies: Vec<String> = stmt.query_map([], |r| r.get(0))?.collect::<Result<_, _>>()?;
        Ok(bodies.iter().map(|b| serde_json::from_str(b)).collect::<Result<_, _>>()?)
    }

    // -- read models -----------------------------------------------------

    /// All stories in id order with their current reflection.
    pub fn stories(&self) -> Result<Vec<StoryRecord>, StoreError> {
        self.story_ids()?.iter().map(|id| self.fetch_story(id)).collect()
    }

    /// Snapshot for the analysis module: evaluations joined to their story
    /// and its current scores; stories with a finished reflection.
    pub fn analysis_input(&self) -> Result<AnalysisInput, StoreError> {
        let stories = self.stories()?;
        let by_id: std::collections::HashMap<&str, &StoryRecord> =
            stories.iter().map(|s| (s.id(), s)).collect();
        let mut evaluations = Vec::new();
        for e in self.evaluations()? {
            let story = by_id.get(e.narrative_id.as_str()).ok_or_else(|| StoreError::NotFound {
                kind: "story",
                id: e.narrative_id.clone(),
            })?;
            let n = &story.narrative;
            evaluations.push(JoinedEvaluation {
                persona_id: n.persona_id.clone(),
                dialogue_type: n.dialogue_type,
                creativity: n.creativity,
                prompt_id: n.prompt_id.clone(),
                q_final: story.reflection.as_ref().map(|r| r.q_final),
                h_final: story.reflection.as_ref().map(|r| r.h_final),
                evaluation: e,
            });
        }
        let scored = stories
            .iter()
            .filter_map(|s| {
                s.reflection.as_ref().map(|r| ScoredStory {
                    narrative_id: s.narrative.id.clone(),
                    persona_id: s.narrative.persona_id.clone(),
                    dialogue_type: s.narrative.dialogue_type,
                    creativity: s.narrative.creativity,
                    q_final: r.q_final,
                    h_final: r.h_final,
                })
            })
            .collect();
        Ok(AnalysisInput { evaluations, stories: scored, post_study: self.post_study_responses()? })
    }

    /// Writes one row per (story, evaluation) pair, sorted by story id then
    /// respondent id. Stories without evaluations get a single row with
    /// empty evaluation columns. Returns the number of data rows.
    pub fn export_dataset<W: Write>(&self, out: W) -> Result<usize, StoreError> {
        let stories = self.stories()?;
        let evaluations = self.evaluations()?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(EXPORT_HEADER)?;
        let mut rows = 0;
        for story in &stories {
            let mine: Vec<&EvaluationResponse> =
                evaluations.iter().filter(|e| e.narrative_id == story.narrative.id).collect();
            if mine.is_empty() {
                w.write_record(export_row(story, None))?;
                rows += 1;
            }
            for e in mine {
                w.write_record(export_row(story, Some(e)))?;
                rows += 1;
            }
        }
        w.flush().map_err(|e| StoreError::Storage(e.to_string()))?;
        Ok(rows)
    }
}

fn require_session(conn: &Connection, token: &str) -> Result<(), StoreError> {
    let found = conn
        .query_row("SELECT 1 FROM sessions WHERE token = ?1", [token], |_| Ok(()))
        .optional()?;
    match found {
        Some(()) => Ok(()),
        None => Err(StoreError::NotFound { kind: "session", id: token.to_string() }),
    }
}

type RawReflection = (String, i64, String, Option<String>, Option<String>, bool, String);

fn reflection_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<RawReflection> {
    Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?, r.get(5)?, r.get(6)?))
}

fn decode_reflection(raw: RawReflection) -> Result<ReflectionRecord, StoreError> {
    let (story_id, version, status, report, error, is_current, created_at) = raw;
    let status = match status.as_str() {
        "done" => ReflectionStatus::Done,
        "failed" => ReflectionStatus::Failed,
        other => return Err(StoreError::Storage(format!("unknown reflection status '{other}'"))),
    };
    Ok(ReflectionRecord {
        story_id,
        version,
        status,
        report: report.map(|r| serde_json::from_str(&r)).transpose()?,
        error,
        is_current,
        created_at,
    })
}

fn current_reflection(conn: &Connection, story_id: &str) -> Result<Option<ReflectionRecord>, StoreError> {
    conn.query_row(
        "SELECT story_id, version, status, report, error, is_current, created_at
         FROM reflections WHERE story_id = ?1 AND is_current = 1",
        [story_id],
        reflection_row,
    )
    .optional()?
    .map(decode_reflection)
    .transpose()
}

fn export_row(story: &StoryRecord, e: Option<&EvaluationResponse>) -> Vec<String> {
    let n = &story.narrative;
    let num = |f: fn(&ReflectionReport) -> f64| story.reflection.as_ref().map(|r| f(r).to_string()).unwrap_or_default();
    let mut row = vec![
        n.id.clone(),
        n.persona_id.clone(),
        n.dialogue_type.to_string(),
        n.creativity.to_string(),
        n.prompt_id.clone(),
        story.reflection_status.as_str().to_string(),
        story.reflection.as_ref().map(|r| r.claim_count.to_string()).unwrap_or_default(),
        num(|r| r.q_struct),
        num(|r| r.h_struct),
        num(|r| r.q_llm),
        num(|r| r.h_llm),
        num(|r| r.q_final),
        num(|r| r.h_final),
        story.reflection.as_ref().map(|r| r.degenerate.to_string()).unwrap_or_default(),
        story
            .reflection
            .as_ref()
            .map(|r| r.inconsistency_flags.iter().map(usize::to_string).collect::<Vec<_>>().join(";"))
            .unwrap_or_default(),
    ];
    match e {
        Some(e) => row.extend([
            e.respondent_id.clone(),
            e.purpose_selections.iter().cloned().collect::<Vec<_>>().join(";"),
            e.liking.to_string(),
            e.creativity_rating.to_string(),
            e.creativity_judgement.as_str().to_string(),
            e.inconsistency.as_str().to_string(),
            e.disturbance.map(|d| d.to_string()).unwrap_or_default(),
            e.inconsistency_explanation.clone().unwrap_or_default(),
        ]),
        None => row.extend(std::iter::repeat_n(String::new(), 8)),
    }
    row
}
