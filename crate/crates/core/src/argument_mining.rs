//! Reflective analysis of a generated narrative.
//!
//! Two steps. The model first returns the argumentative structure of the
//! story (sentence spans, claim/premise labels, supports/attacks links, its
//! own groundedness flags and self-estimated scores). Groundedness is then
//! recomputed against the persona's vocabulary, and a span counts as
//! grounded only when both the model and the vocabulary check agree.
//!
//! Story-level scores, over the set of claim spans of size `C`:
//!
//! ```text
//! Q = 0.5 * supported / C + 0.5 * grounded / C
//! H = 0.6 * U / C + 0.4 * S0 / C        U = C - grounded, S0 = C - supported
//! Q_final = (Q_llm + Q) / 2
//! H_final = (H_llm + H) / 2
//! ```
//!
//! A claim is supported when at least one `supports` link points at it.
//! Attack links are kept but never enter the scores.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::argumentation::{ArgumentPlan, SchemeCatalog, SchemeKind};
use crate::generation::Narrative;
use crate::llm::{GenerationRequest, LlmClient, LlmError, ResponseFormat};
use crate::user_model::{compact_user_model, derive_vocabulary, tokenize, GroundingVocabulary, Persona};

pub const REPAIR_RETRIES: u32 = 2;
pub const EXTRACTION_TEMPERATURE: f64 = 0.0;
pub const EXTRACTION_MAX_OUTPUT_TOKENS: u32 = 3000;

pub const QUALITY_SUPPORT_WEIGHT: f64 = 0.5;
pub const QUALITY_GROUNDING_WEIGHT: f64 = 0.5;
pub const RISK_UNGROUNDED_WEIGHT: f64 = 0.6;
pub const RISK_UNSUPPORTED_WEIGHT: f64 = 0.4;

pub const NARRATIVE_START: &str = "NARRATIVE START";
pub const NARRATIVE_END: &str = "NARRATIVE END";

pub const EXTRACTION_SYSTEM_TEXT: &str = "You are an argument-mining assistant. You analyse \
short narratives sentence by sentence and report their argumentative structure as JSON. You \
never add commentary outside the JSON object.";

/// Documented response schema, also embedded in the extraction prompt.
pub const EXTRACTION_SCHEMA: &str = r#"{"spans":[{"index":0,"text":"<sentence>","label":"claim|premise|none","scheme":"<one of the permissible schemes, or null>","g_llm":true}],"links":[{"from_index":1,"to_index":0,"link_type":"supports|attacks"}],"q_llm":0.0,"h_llm":0.0}"#;

#[derive(Debug, Error, PartialEq)]
pub enum MiningError {
    #[error("extraction still malformed after {attempts} attempt(s): {}", errors.join("; "))]
    ExtractionFormat { attempts: u32, errors: Vec<String> },
    #[error(transparent)]
    Transport(#[from] LlmError),
    #[error("grounding does not cover span(s) {missing:?}")]
    Coverage { missing: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanLabel {
    Claim,
    Premise,
    None,
}

impl fmt::Display for SpanLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpanLabel::Claim => "claim",
            SpanLabel::Premise => "premise",
            SpanLabel::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkType {
    Supports,
    Attacks,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub index: usize,
    pub text: String,
    pub label: SpanLabel,
    #[serde(default)]
    pub scheme: Option<SchemeKind>,
    pub g_llm: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentLink {
    pub from_index: usize,
    pub to_index: usize,
    pub link_type: LinkType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureExtraction {
    pub narrative_id: String,
    pub spans: Vec<SentenceSpan>,
    pub links: Vec<ArgumentLink>,
    pub q_llm: f64,
    pub h_llm: f64,
    pub dropped_links: usize,
}

impl StructureExtraction {
    pub fn claim_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.spans
            .iter()
            .filter(|s| s.label == SpanLabel::Claim)
            .map(|s| s.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanGrounding {
    pub index: usize,
    pub g_final: bool,
    pub matched_tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionReport {
    pub narrative_id: String,
    pub claim_count: usize,
    pub supported_claims: usize,
    pub grounded_claims: usize,
    #[serde(rename = "U")]
    pub ungrounded_claims: usize,
    #[serde(rename = "S0")]
    pub unsupported_claims: usize,
    pub q_struct: f64,
    pub h_struct: f64,
    pub q_llm: f64,
    pub h_llm: f64,
    pub q_final: f64,
    pub h_final: f64,
    pub inconsistency_flags: Vec<usize>,
    pub degenerate: bool,
    pub ungrounded_span_texts: Vec<String>,
    /// Final groundedness of every span, premises included. Only claims are
    /// scored.
    pub span_grounding: Vec<SpanGrounding>,
    pub dropped_links: usize,
}

// ---------------------------------------------------------------------------
// Step 1: structure extraction

pub fn build_extraction_prompt(
    narrative: &Narrative,
    persona: &Persona,
    schemes: &SchemeCatalog,
    critical_questions: &[String],
) -> GenerationRequest {
    let names: Vec<&str> = SchemeKind::ALL
        .iter()
        .filter(|k| schemes.get(**k).is_ok())
        .map(|k| k.as_str())
        .collect();
    let mut user = String::new();
    user.push_str(
        "Analyse the argumentative structure of the narrative below relative to the user model.\n\n",
    );
    user.push_str("USER MODEL:\n");
    user.push_str(&compact_user_model(persona));
    user.push_str(&format!("\n\n{NARRATIVE_START}\n{}\n{NARRATIVE_END}\n\n", narrative.full_text));
    user.push_str(&format!("PERMISSIBLE SCHEMES: {}\n\n", names.join(", ")));
    if !critical_questions.is_empty() {
        user.push_str("CRITICAL QUESTIONS (guidance for judging support and grounding):\n");
        for q in critical_questions {
            user.push_str(&format!("- {q}\n"));
        }
        user.push('\n');
    }
    user.push_str(
        "INSTRUCTIONS:\n\
1. Split the narrative into sentences and number them from 0 in reading order.\n\
2. Label each sentence as claim, premise or none.\n\
3. For claims and premises, give the permissible scheme they instantiate, or null.\n\
4. Add directed links from a sentence to the claim it supports or attacks. Links must point at a claim.\n\
5. Set g_llm to true only when the sentence is anchored in facts of the user model.\n\
6. q_llm is your estimate of argument quality in [0,1]: 0.5 * (share of claims with at least one incoming supports link) + 0.5 * (share of claims grounded in the user model).\n\
7. h_llm is your estimate of hallucination risk in [0,1]: 0.6 * (share of ungrounded claims) + 0.4 * (share of claims without support).\n\n",
    );
    user.push_str("Return only one JSON object with exactly this shape:\n");
    user.push_str(EXTRACTION_SCHEMA);

    GenerationRequest {
        system_text: EXTRACTION_SYSTEM_TEXT.into(),
        user_text: user,
        temperature: EXTRACTION_TEMPERATURE,
        response_format: ResponseFormat::Structured,
        max_output: EXTRACTION_MAX_OUTPUT_TOKENS,
    }
}

#[derive(Debug, Deserialize)]
struct WireExtraction {
    spans: Vec<WireSpan>,
    #[serde(default)]
    links: Vec<WireLink>,
    q_llm: f64,
    h_llm: f64,
}

#[derive(Debug, Deserialize)]
struct WireSpan {
    index: i64,
    text: String,
    label: String,
    #[serde(default)]
    scheme: Option<String>,
    g_llm: bool,
}

#[derive(Debug, Deserialize)]
struct WireLink {
    from_index: i64,
    to_index: i64,
    link_type: String,
}

/// The JSON object inside a model reply, tolerating code fences and prose
/// around it.
fn json_object_slice(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| &text[start..=end])
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Parses and validates a structured extraction reply.
///
/// Schema violations are returned as a list of messages suitable for a
/// repair prompt. Links that are well-formed but point nowhere useful (self
/// links, missing endpoints, targets that are not claims) are dropped and
/// counted instead.
pub fn parse_extraction(narrative_id: &str, reply: &str) -> Result<StructureExtraction, Vec<String>> {
    let Some(slice) = json_object_slice(reply) else {
        return Err(vec!["response contains no JSON object".into()]);
    };
    let wire: WireExtraction =
        serde_json::from_str(slice).map_err(|e| vec![format!("invalid JSON document: {e}")])?;

    let mut errors = Vec::new();
    let mut spans = Vec::with_capacity(wire.spans.len());
    for (pos, s) in wire.spans.iter().enumerate() {
        let label = match s.label.trim().to_ascii_lowercase().as_str() {
            "claim" => Some(SpanLabel::Claim),
            "premise" => Some(SpanLabel::Premise),
            "none" => Some(SpanLabel::None),
            other => {
                errors.push(format!("spans[{pos}].label '{other}' is not claim, premise or none"));
                None
            }
        };
        let scheme = match s.scheme.as_deref().map(str::trim) {
            None | Some("") | Some("null") | Some("none") => None,
            Some(name) => match name.parse::<SchemeKind>() {
                Ok(k) => Some(k),
                Err(_) => {
                    errors.push(format!("spans[{pos}].scheme '{name}' is not a permissible scheme"));
                    None
                }
            },
        };
        if s.index < 0 {
            errors.push(format!("spans[{pos}].index {} is negative", s.index));
        }
        if s.text.trim().is_empty() {
            errors.push(format!("spans[{pos}].text is empty"));
        }
        if let (Some(label), true) = (label, s.index >= 0) {
            spans.push(SentenceSpan {
                index: s.index as usize,
                text: s.text.trim().to_string(),
                label,
                scheme,
                g_llm: s.g_llm,
            });
        }
    }
    let mut indices: Vec<i64> = wire.spans.iter().map(|s| s.index).collect();
    indices.sort_unstable();
    let contiguous = indices.iter().enumerate().all(|(i, idx)| *idx == i as i64);
    if !contiguous {
        errors.push(format!(
            "span indices must be unique and contiguous from 0, got {indices:?}"
        ));
    }
    if !wire.q_llm.is_finite() || !wire.h_llm.is_finite() {
        errors.push("q_llm and h_llm must be finite numbers".into());
    }

    let mut links = Vec::new();
    for (pos, l) in wire.links.iter().enumerate() {
        match l.link_type.trim().to_ascii_lowercase().as_str() {
            "supports" => links.push((l, LinkType::Supports)),
            "attacks" => links.push((l, LinkType::Attacks)),
            other => errors.push(format!("links[{pos}].link_type '{other}' is not supports or attacks")),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    spans.sort_by_key(|s| s.index);
    let labels: HashMap<usize, SpanLabel> = spans.iter().map(|s| (s.index, s.label)).collect();
    let mut kept = Vec::new();
    let mut dropped = 0;
    for (l, link_type) in links {
        let endpoints = (usize::try_from(l.from_index), usize::try_from(l.to_index));
        let valid = match endpoints {
            (Ok(from), Ok(to)) => {
                from != to && labels.contains_key(&from) && labels.get(&to) == Some(&SpanLabel::Claim)
            }
            _ => false,
        };
        if valid {
            kept.push(ArgumentLink {
                from_index: l.from_index as usize,
                to_index: l.to_index as usize,
                link_type,
            });
        } else {
            dropped += 1;
        }
    }

    Ok(StructureExtraction {
        narrative_id: narrative_id.to_string(),
        spans,
        links: kept,
        q_llm: clamp_unit(wire.q_llm),
        h_llm: clamp_unit(wire.h_llm),
        dropped_links: dropped,
    })
}

fn repair_note(errors: &[String]) -> String {
    let mut note = String::from("Your previous response was invalid:\n");
    for e in errors {
        note.push_str(&format!("- {e}\n"));
    }
    note.push_str("Return only the corrected JSON object with the required shape.");
    note
}

/// Runs structure extraction with up to [`REPAIR_RETRIES`] repair prompts.
pub fn extract_structure_with(
    request: &GenerationRequest,
    narrative_id: &str,
    client: &dyn LlmClient,
) -> Result<StructureExtraction, MiningError> {
    let mut current = request.clone();
    let mut attempts = 0;
    loop {
        attempts += 1;
        let reply = client.complete(&current)?;
        match parse_extraction(narrative_id, &reply) {
            Ok(extraction) => return Ok(extraction),
            Err(errors) => {
                if attempts > REPAIR_RETRIES {
                    return Err(MiningError::ExtractionFormat { attempts, errors });
                }
                log::debug!("extraction for {narrative_id} malformed: {errors:?}");
                current = request.with_follow_up(&repair_note(&errors));
            }
        }
    }
}

pub fn extract_structure(
    narrative: &Narrative,
    persona: &Persona,
    schemes: &SchemeCatalog,
    critical_questions: &[String],
    client: &dyn LlmClient,
) -> Result<StructureExtraction, MiningError> {
    let request = build_extraction_prompt(narrative, persona, schemes, critical_questions);
    extract_structure_with(&request, &narrative.id, client)
}

// ---------------------------------------------------------------------------
// Step 2: groundedness

/// True when a lexical token of the span is in the vocabulary or a numeric
/// token is among the persona's ratings. Returns the matching tokens in text
/// order, without repeats.
pub fn looks_grounded(span_text: &str, vocab: &GroundingVocabulary) -> (bool, Vec<String>) {
    let tokens = tokenize(span_text);
    let mut matched: Vec<String> = Vec::new();
    for t in tokens.lexical {
        if vocab.lexical.contains(&t) && !matched.contains(&t) {
            matched.push(t);
        }
    }
    for n in tokens.numeric {
        let hit = u8::try_from(n).is_ok_and(|n| vocab.numeric.contains(&n));
        let s = n.to_string();
        if hit && !matched.contains(&s) {
            matched.push(s);
        }
    }
    (!matched.is_empty(), matched)
}

pub fn recompute_grounding(
    extraction: &StructureExtraction,
    vocab: &GroundingVocabulary,
) -> Vec<SpanGrounding> {
    extraction
        .spans
        .iter()
        .map(|span| {
            let (heuristic, matched_tokens) = looks_grounded(&span.text, vocab);
            SpanGrounding {
                index: span.index,
                g_final: span.g_llm && heuristic,
                matched_tokens,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Scoring

pub fn score_story(
    extraction: &StructureExtraction,
    grounding: &[SpanGrounding],
) -> Result<ReflectionReport, MiningError> {
    let by_index: BTreeMap<usize, &SpanGrounding> = grounding.iter().map(|g| (g.index, g)).collect();
    let missing: Vec<usize> = extraction
        .spans
        .iter()
        .map(|s| s.index)
        .filter(|i| !by_index.contains_key(i))
        .collect();
    if !missing.is_empty() {
        return Err(MiningError::Coverage { missing });
    }

    let supported_targets: BTreeSet<usize> = extraction
        .links
        .iter()
        .filter(|l| l.link_type == LinkType::Supports)
        .map(|l| l.to_index)
        .collect();

    let mut claim_count = 0;
    let mut supported = 0;
    let mut grounded = 0;
    let mut flags = Vec::new();
    for idx in extraction.claim_indices() {
        claim_count += 1;
        let is_supported = supported_targets.contains(&idx);
        let is_grounded = by_index[&idx].g_final;
        supported += usize::from(is_supported);
        grounded += usize::from(is_grounded);
        if !is_supported || !is_grounded {
            flags.push(idx);
        }
    }

    let ungrounded = claim_count - grounded;
    let unsupported = claim_count - supported;
    let degenerate = claim_count == 0;
    let (q_struct, h_struct) = if degenerate {
        (0.0, 1.0)
    } else {
        let c = claim_count as f64;
        (
            QUALITY_SUPPORT_WEIGHT * supported as f64 / c + QUALITY_GROUNDING_WEIGHT * grounded as f64 / c,
            RISK_UNGROUNDED_WEIGHT * ungrounded as f64 / c + RISK_UNSUPPORTED_WEIGHT * unsupported as f64 / c,
        )
    };
    let q_llm = clamp_unit(extraction.q_llm);
    let h_llm = clamp_unit(extraction.h_llm);

    let ungrounded_span_texts = extraction
        .spans
        .iter()
        .filter(|s| !by_index[&s.index].g_final)
        .map(|s| s.text.clone())
        .collect();
    let mut span_grounding: Vec<SpanGrounding> = extraction
        .spans
        .iter()
        .map(|s| by_index[&s.index].clone())
        .collect();
    span_grounding.sort_by_key(|g| g.index);

    Ok(ReflectionReport {
        narrative_id: extraction.narrative_id.clone(),
        claim_count,
        supported_claims: supported,
        grounded_claims: grounded,
        ungrounded_claims: ungrounded,
        unsupported_claims: unsupported,
        q_struct,
        h_struct,
        q_llm,
        h_llm,
        q_final: 0.5 * q_llm + 0.5 * q_struct,
        h_final: 0.5 * h_llm + 0.5 * h_struct,
        inconsistency_flags: flags,
        degenerate,
        ungrounded_span_texts,
        span_grounding,
        dropped_links: extraction.dropped_links,
    })
}

/// Full reflection: extraction, vocabulary, grounding, scoring. The plan's
/// critical questions go into the extraction prompt as guidance.
pub fn reflect(
    narrative: &Narrative,
    persona: &Persona,
    plan: &ArgumentPlan,
    schemes: &SchemeCatalog,
    client: &dyn LlmClient,
) -> Result<ReflectionReport, MiningError> {
    let extraction = extract_structure(narrative, persona, schemes, &plan.critical_questions, client)?;
    let vocab = derive_vocabulary(persona);
    let grounding = recompute_grounding(&extraction, &vocab);
    score_story(&extraction, &grounding)
}
