//! Human evaluation records: per-narrative responses and the post-study form.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvaluationError {
    #[error("{field} must be within [1, 5], got {value}")]
    LikertOutOfRange { field: &'static str, value: u8 },
    #[error("disturbance rating is required when an inconsistency was noticed")]
    MissingDisturbance,
    #[error("disturbance rating is only allowed when an inconsistency was noticed")]
    UnexpectedDisturbance,
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreativityJudgement {
    Appealing,
    Appropriate,
    TooMuch,
    TooLittle,
}

impl CreativityJudgement {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Appealing => "appealing",
            Self::Appropriate => "appropriate",
            Self::TooMuch => "too_much",
            Self::TooLittle => "too_little",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InconsistencyAnswer {
    Yes,
    No,
    NotSure,
}

impl InconsistencyAnswer {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Yes => "yes",
            Self::No => "no",
            Self::NotSure => "not_sure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriState {
    Yes,
    Maybe,
    No,
}

impl TriState {
    pub const ALL: [TriState; 3] = [Self::Yes, Self::Maybe, Self::No];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Yes => "yes",
            Self::Maybe => "maybe",
            Self::No => "no",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationResponse {
    pub narrative_id: String,
    pub respondent_id: String,
    #[serde(default)]
    pub purpose_selections: BTreeSet<String>,
    pub liking: u8,
    pub creativity_rating: u8,
    pub creativity_judgement: CreativityJudgement,
    pub inconsistency: InconsistencyAnswer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inconsistency_explanation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<u8>,
}

fn likert(field: &'static str, value: u8) -> Result<(), EvaluationError> {
    if (1..=5).contains(&value) {
        Ok(())
    } else {
        Err(EvaluationError::LikertOutOfRange { field, value })
    }
}

impl EvaluationResponse {
    pub fn validate(&self) -> Result<(), EvaluationError> {
        if self.narrative_id.trim().is_empty() {
            return Err(EvaluationError::EmptyField("narrative_id"));
        }
        if self.respondent_id.trim().is_empty() {
            return Err(EvaluationError::EmptyField("respondent_id"));
        }
        likert("liking", self.liking)?;
        likert("creativity_rating", self.creativity_rating)?;
        match (self.inconsistency, self.disturbance) {
            (InconsistencyAnswer::Yes, None) => return Err(EvaluationError::MissingDisturbance),
            (InconsistencyAnswer::Yes, Some(d)) => likert("disturbance", d)?,
            (_, Some(_)) => return Err(EvaluationError::UnexpectedDisturbance),
            (_, None) => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostStudyResponse {
    pub respondent_id: String,
    pub overall_reflection: String,
    pub overall_relevance: u8,
    pub cultural_relatability: TriState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relatability_comment: Option<String>,
    pub future_use: TriState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub future_use_comment: Option<String>,
    pub persona_relatedness: u8,
}

impl PostStudyResponse {
    pub fn validate(&self) -> Result<(), EvaluationError> {
        if self.respondent_id.trim().is_empty() {
            return Err(EvaluationError::EmptyField("respondent_id"));
        }
        likert("overall_relevance", self.overall_relevance)?;
        likert("persona_relatedness", self.persona_relatedness)
    }
}
