//! Story prompts, creativity control and three-paragraph narratives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::argumentation::{scheme_catalog, ArgumentPlan, DialogueType};
use crate::llm::{GenerationRequest, LlmClient, LlmError, ResponseFormat};
use crate::user_model::{compact_user_model, Persona};

pub const LOW_TEMPERATURE: f64 = 0.3;
pub const HIGH_TEMPERATURE: f64 = 0.9;
pub const LENGTH_BUDGET_WORDS: u32 = 250;
pub const STORY_MAX_OUTPUT_TOKENS: u32 = 800;
pub const TARGET_PARAGRAPHS: usize = 3;

/// Marker that opens the style section of a story prompt. Everything before
/// it is identical across creativity levels.
pub const STYLE_HEADER: &str = "STYLE:";

pub const STORY_SYSTEM_TEXT: &str = "You write short, warm, personal stories for older adults \
about their own everyday activities. Use only the facts in the user model and the argument \
plan. Do not invent feelings, motives, people, places or events that are not listed.";

#[derive(Debug, Error, PartialEq)]
pub enum GenerationError {
    #[error("plan belongs to persona '{plan}' but persona '{persona}' was given")]
    PersonaMismatch { plan: String, persona: String },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("model returned {paragraphs} paragraph(s) after a corrective re-prompt")]
    StructureError { paragraphs: usize },
    #[error("model returned empty output")]
    EmptyOutput,
    #[error("unknown creativity level '{0}'")]
    UnknownCreativity(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreativityLevel {
    Low,
    High,
}

impl CreativityLevel {
    pub const ALL: [CreativityLevel; 2] = [Self::Low, Self::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Low => "low",
            Self::High => "high",
        }
    }
}

impl fmt::Display for CreativityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CreativityLevel {
    type Err = GenerationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(Self::Low),
            "high" => Ok(Self::High),
            _ => Err(GenerationError::UnknownCreativity(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleConstraints {
    pub temperature: f64,
    pub style_directives: Vec<String>,
    pub length_budget: u32,
}

pub fn style_for(creativity: CreativityLevel) -> StyleConstraints {
    let style_directives: Vec<String> = match creativity {
        CreativityLevel::Low => vec![
            "Use clear, simple and concrete language.".into(),
            "Prefer short sentences and everyday words.".into(),
            "Avoid metaphors and decorative descriptions.".into(),
        ],
        CreativityLevel::High => vec![
            "Use moderately expressive, vivid phrasing.".into(),
            "Keep imagery light; do not stack metaphors or add dense description.".into(),
            "Stay close to the listed activities; embellish tone, not facts.".into(),
        ],
    };
    StyleConstraints {
        temperature: match creativity {
            CreativityLevel::Low => LOW_TEMPERATURE,
            CreativityLevel::High => HIGH_TEMPERATURE,
        },
        style_directives,
        length_budget: LENGTH_BUDGET_WORDS,
    }
}

pub fn dialogue_purpose(dialogue_type: DialogueType) -> &'static str {
    match dialogue_type {
        DialogueType::Inquiry => {
            "Help the reader look back on the past week: notice what they did, how it went, and why it matters to them."
        }
        DialogueType::Deliberation => {
            "Help the reader weigh their options and settle on concrete next steps for the coming week."
        }
        DialogueType::Persuasion => {
            "Give the reader good reasons to keep up or change an activity by linking it to what they value."
        }
    }
}

/// Prompt content shared by both creativity levels.
fn story_content(plan: &ArgumentPlan, persona: &Persona) -> String {
    let scheme_name = scheme_catalog()
        .get(plan.scheme)
        .map(|s| s.name.clone())
        .unwrap_or_else(|_| plan.scheme.to_string());
    let mut out = String::new();
    out.push_str(&format!(
        "PURPOSE ({}): {}\n\n",
        plan.dialogue_type,
        dialogue_purpose(plan.dialogue_type)
    ));
    out.push_str("USER MODEL:\n");
    out.push_str(&compact_user_model(persona));
    out.push_str(&format!("\n\nARGUMENT PLAN ({scheme_name}):\nPremises:\n"));
    for p in &plan.premises {
        out.push_str(&format!("- {}\n", p.text));
    }
    out.push_str(&format!("Conclusion: {}\n\n", plan.conclusion));
    out.push_str(
        "STRUCTURE: Write exactly three paragraphs (beginning, middle, end) separated by one \
blank line. No title, no lists, no headings. Address the reader as \"you\".\n\n",
    );
    out
}

fn style_section(style: &StyleConstraints) -> String {
    let mut out = format!("{STYLE_HEADER}\n");
    for d in &style.style_directives {
        out.push_str(&format!("- {d}\n"));
    }
    out.push_str(&format!("- Keep the story under {} words.", style.length_budget));
    out
}

pub fn build_story_prompt(
    plan: &ArgumentPlan,
    persona: &Persona,
    creativity: CreativityLevel,
) -> Result<GenerationRequest, GenerationError> {
    if plan.persona_id != persona.id {
        return Err(GenerationError::PersonaMismatch {
            plan: plan.persona_id.clone(),
            persona: persona.id.clone(),
        });
    }
    let style = style_for(creativity);
    Ok(GenerationRequest {
        system_text: STORY_SYSTEM_TEXT.into(),
        user_text: format!("{}{}", story_content(plan, persona), style_section(&style)),
        temperature: style.temperature,
        response_format: ResponseFormat::PlainText,
        max_output: STORY_MAX_OUTPUT_TOKENS,
    })
}

/// Splits on blank lines, trims, drops empty segments.
pub fn parse_paragraphs(text: &str) -> Vec<String> {
    let normalized = text.replace("\r\n", "\n");
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in normalized.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join("\n").trim().to_string());
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join("\n").trim().to_string());
    }
    paragraphs.retain(|p| !p.is_empty());
    paragraphs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMetadata {
    pub model: String,
    pub temperature: f64,
    pub timestamp: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub attempts: u32,
    #[serde(default)]
    pub structure_warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Narrative {
    pub id: String,
    pub persona_id: String,
    pub dialogue_type: DialogueType,
    pub creativity: CreativityLevel,
    pub prompt_id: String,
    pub paragraphs: Vec<String>,
    pub full_text: String,
    pub generation_metadata: GenerationMetadata,
}

impl Narrative {
    pub fn join_paragraphs(paragraphs: &[String]) -> String {
        paragraphs.join("\n\n")
    }
}

/// Who a narrative is for and which matrix cell it fills.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrativeContext {
    pub id: String,
    pub persona_id: String,
    pub dialogue_type: DialogueType,
    pub creativity: CreativityLevel,
    pub prompt_id: String,
    pub seed: Option<u64>,
}

impl NarrativeContext {
    pub fn for_plan(plan: &ArgumentPlan, creativity: CreativityLevel, prompt_id: &str) -> Self {
        NarrativeContext {
            id: uuid::Uuid::new_v4().to_string(),
            persona_id: plan.persona_id.clone(),
            dialogue_type: plan.dialogue_type,
            creativity,
            prompt_id: prompt_id.to_string(),
            seed: None,
        }
    }
}

fn structure_correction(found: usize) -> String {
    format!(
        "Your previous answer had {found} paragraph(s). Rewrite the story as exactly three \
paragraphs separated by one blank line, keeping the same content."
    )
}

fn acceptable(n: usize) -> bool {
    (2..=4).contains(&n)
}

/// Calls the model, enforcing the three-paragraph structure with one
/// corrective re-prompt. Two or four paragraphs are accepted with a stored
/// warning after the retry.
pub fn generate_narrative(
    request: &GenerationRequest,
    client: &dyn LlmClient,
    ctx: &NarrativeContext,
) -> Result<Narrative, GenerationError> {
    let first = client.complete(request)?;
    if first.trim().is_empty() {
        return Err(GenerationError::EmptyOutput);
    }
    let first_paragraphs = parse_paragraphs(&first);
    let (paragraphs, attempts, warning) = if first_paragraphs.len() == TARGET_PARAGRAPHS {
        (first_paragraphs, 1, None)
    } else {
        let retry = client.complete(&request.with_follow_up(&structure_correction(first_paragraphs.len())))?;
        if retry.trim().is_empty() {
            return Err(GenerationError::EmptyOutput);
        }
        let retry_paragraphs = parse_paragraphs(&retry);
        let n = retry_paragraphs.len();
        if n == TARGET_PARAGRAPHS {
            (retry_paragraphs, 2, None)
        } else if acceptable(n) {
            (retry_paragraphs, 2, Some(format!("accepted {n} paragraphs instead of 3")))
        } else if acceptable(first_paragraphs.len()) {
            let n = first_paragraphs.len();
            (first_paragraphs, 2, Some(format!("accepted {n} paragraphs instead of 3")))
        } else {
            return Err(GenerationError::StructureError { paragraphs: n });
        }
    };

    Ok(Narrative {
        id: ctx.id.clone(),
        persona_id: ctx.persona_id.clone(),
        dialogue_type: ctx.dialogue_type,
        creativity: ctx.creativity,
        prompt_id: ctx.prompt_id.clone(),
        full_text: Narrative::join_paragraphs(&paragraphs),
        paragraphs,
        generation_metadata: GenerationMetadata {
            model: client.model_name(),
            temperature: request.temperature,
            timestamp: chrono::Utc::now().to_rfc3339(),
            seed: ctx.seed,
            attempts,
            structure_warning: warning,
        },
    })
}
