//! Personas, their logged activities, and the grounding vocabulary derived
//! from them.
//!
//! The vocabulary is what the reflection layer checks narrative sentences
//! against: a lexical set built from activity names, domains, motivations,
//! partners and frequency, and a numeric set holding the 1-5 ratings.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bundled fixture personas A-E.
pub const FIXTURE_PERSONAS: &str = include_str!("../data/personas.toml");

/// Version tag of [`STOPWORDS`]. Bump whenever the list changes, since it
/// shifts grounding results.
pub const STOPWORDS_VERSION: &str = "en-function-words-v1";

/// Fixed English function-word list removed from lexical tokens.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "are", "as", "at", "be", "been", "but",
    "by", "can", "did", "do", "does", "each", "every", "for", "from", "had", "has", "have",
    "he", "her", "him", "his", "how", "if", "in", "into", "is", "it", "its", "me", "my", "no",
    "not", "of", "on", "or", "our", "she", "so", "than", "that", "the", "their", "them",
    "then", "there", "these", "they", "this", "those", "to", "was", "we", "were", "what",
    "when", "which", "who", "will", "with", "would", "you", "your",
];

pub const RATING_MIN: i64 = 1;
pub const RATING_MAX: i64 = 5;

#[derive(Debug, Error, PartialEq)]
pub enum UserModelError {
    #[error("activity '{activity}': {field} rating {value} is outside [1, 5]")]
    OutOfRangeRating {
        activity: String,
        field: &'static str,
        value: i64,
    },
    #[error("activity '{activity}' has an empty name")]
    EmptyName { activity: String },
    #[error("unknown activity domain '{0}' (expected physical, social or recovery)")]
    UnknownDomain(String),
    #[error("persona '{0}' has no activities")]
    NoActivities(String),
    #[error("persona '{persona}' repeats activity id '{activity}'")]
    DuplicateActivityId { persona: String, activity: String },
    #[error("persona file not found: {0}")]
    FileMissing(String),
    #[error("could not parse persona file: {0}")]
    ParseError(String),
    #[error("invalid persona '{persona}': {source}")]
    ValidationError {
        persona: String,
        #[source]
        source: Box<UserModelError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityDomain {
    Physical,
    Social,
    Recovery,
}

impl ActivityDomain {
    pub const ALL: [ActivityDomain; 3] = [Self::Physical, Self::Social, Self::Recovery];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Physical => "physical",
            Self::Social => "social",
            Self::Recovery => "recovery",
        }
    }
}

impl fmt::Display for ActivityDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityDomain {
    type Err = UserModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "physical" => Ok(Self::Physical),
            "social" => Ok(Self::Social),
            "recovery" => Ok(Self::Recovery),
            _ => Err(UserModelError::UnknownDomain(s.to_string())),
        }
    }
}

/// A logged activity in the user model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub id: String,
    pub name: String,
    pub activity_domain: ActivityDomain,
    pub motivations: Vec<String>,
    pub done_with: Vec<String>,
    pub importance: u8,
    pub fun: u8,
    pub frequency: String,
}

/// Unvalidated activity fields, as found in a persona file or an API body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawActivity {
    pub id: String,
    pub name: String,
    pub domain: String,
    #[serde(default)]
    pub motivations: Vec<String>,
    #[serde(default)]
    pub done_with: Vec<String>,
    pub importance: i64,
    pub fun: i64,
    pub frequency: String,
}

impl From<&Activity> for RawActivity {
    fn from(a: &Activity) -> Self {
        RawActivity {
            id: a.id.clone(),
            name: a.name.clone(),
            domain: a.activity_domain.as_str().to_string(),
            motivations: a.motivations.clone(),
            done_with: a.done_with.clone(),
            importance: i64::from(a.importance),
            fun: i64::from(a.fun),
            frequency: a.frequency.clone(),
        }
    }
}

fn check_rating(activity: &str, field: &'static str, value: i64) -> Result<u8, UserModelError> {
    if (RATING_MIN..=RATING_MAX).contains(&value) {
        Ok(value as u8)
    } else {
        Err(UserModelError::OutOfRangeRating {
            activity: activity.to_string(),
            field,
            value,
        })
    }
}

pub fn validate_activity(raw: RawActivity) -> Result<Activity, UserModelError> {
    let label = if raw.name.trim().is_empty() {
        raw.id.clone()
    } else {
        raw.name.clone()
    };
    if raw.name.trim().is_empty() {
        return Err(UserModelError::EmptyName { activity: label });
    }
    let activity_domain = raw.domain.parse::<ActivityDomain>()?;
    let importance = check_rating(&label, "importance", raw.importance)?;
    let fun = check_rating(&label, "fun", raw.fun)?;
    Ok(Activity {
        id: raw.id,
        name: raw.name.trim().to_string(),
        activity_domain,
        motivations: raw.motivations,
        done_with: raw.done_with,
        importance,
        fun,
        frequency: raw.frequency,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub label: String,
    pub activities: Vec<Activity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptors: Option<String>,
}

impl Persona {
    /// Builds a persona, enforcing the non-empty and unique-id invariants.
    pub fn new(
        id: impl Into<String>,
        label: impl Into<String>,
        activities: Vec<Activity>,
        descriptors: Option<String>,
    ) -> Result<Self, UserModelError> {
        let persona = Persona {
            id: id.into(),
            label: label.into(),
            activities,
            descriptors,
        };
        persona.check()?;
        Ok(persona)
    }

    fn check(&self) -> Result<(), UserModelError> {
        if self.activities.is_empty() {
            return Err(UserModelError::NoActivities(self.id.clone()));
        }
        let mut seen = HashSet::new();
        for a in &self.activities {
            if !seen.insert(a.id.as_str()) {
                return Err(UserModelError::DuplicateActivityId {
                    persona: self.id.clone(),
                    activity: a.id.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn activity(&self, id: &str) -> Option<&Activity> {
        self.activities.iter().find(|a| a.id == id)
    }

    pub fn covers_all_domains(&self) -> bool {
        ActivityDomain::ALL
            .iter()
            .all(|d| self.activities.iter().any(|a| a.activity_domain == *d))
    }

    /// Activities ordered by id, the order used for every serialization.
    pub fn activities_by_id(&self) -> Vec<&Activity> {
        let mut sorted: Vec<&Activity> = self.activities.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        sorted
    }
}

/// The vocabulary against which narrative sentences are checked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingVocabulary {
    pub lexical: BTreeSet<String>,
    pub numeric: BTreeSet<u8>,
    pub source_persona: String,
}

/// Tokens of a text after the shared tokenization rule.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tokens {
    /// Lowercased, length >= 2, stopwords removed, in text order.
    pub lexical: Vec<String>,
    /// Purely numeric tokens that fit in a `u64`, in text order.
    pub numeric: Vec<u64>,
}

fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Lowercase, split on every non-alphanumeric character. All-digit tokens go
/// to `numeric`; the rest are kept as lexical tokens when at least two
/// characters long and not a stopword.
pub fn tokenize(text: &str) -> Tokens {
    let mut out = Tokens::default();
    for raw in text.split(|c: char| !c.is_alphanumeric()) {
        if raw.is_empty() {
            continue;
        }
        if raw.chars().all(|c| c.is_ascii_digit()) {
            if let Ok(n) = raw.parse::<u64>() {
                out.numeric.push(n);
            }
            continue;
        }
        let token = raw.to_lowercase();
        if token.chars().count() < 2 || is_stopword(&token) {
            continue;
        }
        out.lexical.push(token);
    }
    out
}

pub fn derive_vocabulary(persona: &Persona) -> GroundingVocabulary {
    let mut lexical = BTreeSet::new();
    let mut numeric = BTreeSet::new();
    for a in &persona.activities {
        let fields = std::iter::once(a.name.as_str())
            .chain(std::iter::once(a.activity_domain.as_str()))
            .chain(a.motivations.iter().map(String::as_str))
            .chain(a.done_with.iter().map(String::as_str))
            .chain(std::iter::once(a.frequency.as_str()));
        for field in fields {
            lexical.extend(tokenize(field).lexical);
        }
        numeric.insert(a.importance);
        numeric.insert(a.fun);
    }
    GroundingVocabulary {
        lexical,
        numeric,
        source_persona: persona.id.clone(),
    }
}

fn list_or_none(items: &[String]) -> String {
    if items.is_empty() {
        "none".to_string()
    } else {
        items.join(", ")
    }
}

/// One line per activity, ordered by activity id. Descriptors are not part
/// of the compact model.
pub fn compact_user_model(persona: &Persona) -> String {
    persona
        .activities_by_id()
        .into_iter()
        .map(|a| {
            format!(
                "- [{}] {} | domain: {} | motivations: {} | done with: {} | importance: {}/5 | fun: {}/5 | frequency: {}",
                a.id,
                a.name,
                a.activity_domain,
                list_or_none(&a.motivations),
                list_or_none(&a.done_with),
                a.importance,
                a.fun,
                a.frequency,
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Serialize, Deserialize)]
struct PersonaFile {
    version: u32,
    #[serde(rename = "persona")]
    personas: Vec<RawPersona>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPersona {
    id: String,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    descriptors: Option<String>,
    #[serde(rename = "activity", default)]
    activities: Vec<RawActivity>,
}

pub fn parse_personas(text: &str) -> Result<Vec<Persona>, UserModelError> {
    let file: PersonaFile =
        toml::from_str(text).map_err(|e| UserModelError::ParseError(e.message().to_string()))?;
    if file.personas.is_empty() {
        return Err(UserModelError::ParseError("file defines no personas".into()));
    }
    let mut seen = HashSet::new();
    let mut personas = Vec::with_capacity(file.personas.len());
    for raw in file.personas {
        if !seen.insert(raw.id.clone()) {
            return Err(UserModelError::ParseError(format!(
                "duplicate persona id '{}'",
                raw.id
            )));
        }
        let wrap = |source: UserModelError| UserModelError::ValidationError {
            persona: raw.id.clone(),
            source: Box::new(source),
        };
        let activities = raw
            .activities
            .into_iter()
            .map(validate_activity)
            .collect::<Result<Vec<_>, _>>()
            .map_err(wrap)?;
        let persona = Persona {
            id: raw.id.clone(),
            label: raw.label,
            activities,
            descriptors: raw.descriptors,
        };
        persona.check().map_err(wrap)?;
        personas.push(persona);
    }
    Ok(personas)
}

pub fn load_personas(path: impl AsRef<Path>) -> Result<Vec<Persona>, UserModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => UserModelError::FileMissing(path.display().to_string()),
        _ => UserModelError::ParseError(format!("{}: {e}", path.display())),
    })?;
    parse_personas(&text)
}

/// Serializes personas in the persona file format read by [`parse_personas`].
pub fn personas_to_toml(personas: &[Persona]) -> String {
    let file = PersonaFile {
        version: 1,
        personas: personas
            .iter()
            .map(|p| RawPersona {
                id: p.id.clone(),
                label: p.label.clone(),
                descriptors: p.descriptors.clone(),
                activities: p.activities.iter().map(RawActivity::from).collect(),
            })
            .collect(),
    };
    toml::to_string(&file).expect("persona file is always representable in TOML")
}

pub fn fixture_personas() -> Vec<Persona> {
    parse_personas(FIXTURE_PERSONAS).expect("bundled persona fixtures are valid")
}
