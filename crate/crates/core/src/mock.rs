//! Deterministic offline language model.
//!
//! Replies are looked up by prompt hash first. Without a fixture the mock
//! writes a three-paragraph story from the argument plan in a story prompt,
//! or a structure extraction for the narrative in an extraction prompt.
//! Same request, same reply.

use std::collections::HashMap;
use std::sync::RwLock;

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::argument_mining::{NARRATIVE_END, NARRATIVE_START};
use crate::llm::{GenerationRequest, LlmClient, LlmError, ResponseFormat};

pub const MOCK_MODEL_NAME: &str = "mock-storyteller-v1";

/// Hex SHA-256 over system text, user text, temperature and format.
pub fn prompt_hash(request: &GenerationRequest) -> String {
    let mut h = Sha256::new();
    h.update(request.system_text.as_bytes());
    h.update([0u8]);
    h.update(request.user_text.as_bytes());
    h.update([0u8]);
    h.update(request.temperature.to_bits().to_le_bytes());
    h.update([request.response_format as u8]);
    hex::encode(h.finalize())
}

fn digest(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

#[derive(Debug, Default)]
pub struct MockLlm {
    fixtures: RwLock<HashMap<String, String>>,
}

impl MockLlm {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pins the reply for an exact request.
    pub fn with_fixture(self, request: &GenerationRequest, reply: impl Into<String>) -> Self {
        self.insert_fixture(prompt_hash(request), reply);
        self
    }

    pub fn insert_fixture(&self, hash: String, reply: impl Into<String>) {
        self.fixtures.write().expect("fixture lock").insert(hash, reply.into());
    }
}

impl LlmClient for MockLlm {
    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        if let Some(reply) = self.fixtures.read().expect("fixture lock").get(&prompt_hash(request)) {
            return Ok(reply.clone());
        }
        Ok(match request.response_format {
            ResponseFormat::Structured if request.user_text.contains(NARRATIVE_START) => {
                mock_extraction(&request.user_text)
            }
            ResponseFormat::Structured => json!({"spans": [], "links": [], "q_llm": 0.0, "h_llm": 1.0}).to_string(),
            ResponseFormat::PlainText => mock_story(request),
        })
    }

    fn model_name(&self) -> String {
        MOCK_MODEL_NAME.into()
    }
}

fn section_lines<'a>(text: &'a str, header: &str) -> Vec<&'a str> {
    text.lines()
        .skip_while(|l| !l.starts_with(header))
        .skip(1)
        .take_while(|l| l.starts_with("- "))
        .map(|l| l.trim_start_matches("- ").trim())
        .collect()
}

fn to_second_person(sentence: &str) -> String {
    sentence
        .replace("The person's", "Your")
        .replace("the person's", "your")
        .replace("The person has", "You have")
        .replace("The person does", "You do")
        .replace("The person rates", "You rate")
        .replace("The person values", "You value")
        .replace("The person should", "You could")
        .replace("the person", "you")
        .replace("The person", "You")
}

const FLOURISHES: &[&str] = &[
    "The morning light seems to promise that every step will make the heart lighter.",
    "It feels as if the whole town is cheering you on from behind its curtains.",
    "Some say a single good day can change a whole life.",
    "Your worries drift away like leaves on a quiet river.",
];

fn mock_story(request: &GenerationRequest) -> String {
    let text = &request.user_text;
    let premises: Vec<String> = section_lines(text, "Premises:")
        .into_iter()
        .map(to_second_person)
        .collect();
    let conclusion = text
        .lines()
        .find_map(|l| l.strip_prefix("Conclusion: "))
        .map(to_second_person)
        .unwrap_or_else(|| "It is worth keeping up what matters to you.".into());
    let purpose = text
        .lines()
        .find_map(|l| l.strip_prefix("PURPOSE ("))
        .and_then(|l| l.split(')').next())
        .unwrap_or("inquiry");
    let seed = digest(text);
    let expressive = request.temperature > 0.5;

    let half = premises.len().div_ceil(2);
    let opening = match purpose {
        "deliberation" => "The coming week lies ahead of you.",
        "persuasion" => "There is something in your week worth holding on to.",
        _ => "Think back on the past week.",
    };
    let mut first = vec![opening.to_string()];
    first.extend(premises.iter().take(half).cloned());
    let mut second: Vec<String> = premises.iter().skip(half).cloned().collect();
    if second.is_empty() {
        second.push("Small routines carry the days along.".into());
    }
    if expressive {
        second.push(FLOURISHES[seed[0] as usize % FLOURISHES.len()].into());
    }
    let mut third = vec![conclusion];
    if expressive && seed[1].is_multiple_of(2) {
        third.push("Surely you will feel ten years younger by the end of the month.".into());
    }
    third.push("One day at a time is enough.".into());

    [first, second, third]
        .iter()
        .map(|p| p.join(" "))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Splits text into sentences on `.`, `!` and `?`.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        current.push(c);
        if matches!(c, '.' | '!' | '?') {
            let s = current.trim().to_string();
            if !s.is_empty() {
                out.push(s);
            }
            current.clear();
        }
    }
    let rest = current.trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}

const PREMISE_CUES: &[&str] = &[
    "value", "promotes", "rate", "in a position to know", "is enough", "can be planned", "do ",
];
const CLAIM_CUES: &[&str] = &[
    "reason", "should", "could plan", "meaningful", "worth", "will", "surely", "change",
];

fn mock_extraction(user_text: &str) -> String {
    let narrative: String = user_text
        .lines()
        .skip_while(|l| *l != NARRATIVE_START)
        .skip(1)
        .take_while(|l| *l != NARRATIVE_END)
        .collect::<Vec<_>>()
        .join("\n");
    let sentences = split_sentences(&narrative);

    let labels: Vec<&str> = sentences
        .iter()
        .map(|s| {
            let lower = s.to_lowercase();
            let d = digest(s);
            if CLAIM_CUES.iter().any(|c| lower.contains(c)) {
                "claim"
            } else if PREMISE_CUES.iter().any(|c| lower.contains(c)) {
                "premise"
            } else if d[0].is_multiple_of(3) {
                "claim"
            } else {
                "none"
            }
        })
        .collect();

    let claims: Vec<usize> = (0..labels.len()).filter(|i| labels[*i] == "claim").collect();
    let mut links = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        if *label != "premise" {
            continue;
        }
        let target = claims
            .iter()
            .find(|c| **c > i)
            .or_else(|| claims.iter().rev().find(|c| **c < i));
        if let Some(t) = target {
            let d = digest(&sentences[i]);
            let link_type = if d[2].is_multiple_of(9) { "attacks" } else { "supports" };
            links.push(json!({"from_index": i, "to_index": t, "link_type": link_type}));
        }
    }

    let spans: Vec<_> = sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let d = digest(s);
            let scheme = match labels[i] {
                "none" => serde_json::Value::Null,
                _ => json!(["argument_from_value", "position_to_know", "sufficient_condition"]
                    [d[3] as usize % 3]),
            };
            json!({
                "index": i,
                "text": s,
                "label": labels[i],
                "scheme": scheme,
                "g_llm": !d[4].is_multiple_of(5),
            })
        })
        .collect();

    let whole = digest(&narrative);
    let jitter = |b: u8| (f64::from(b) / 255.0 - 0.5) * 0.2;
    let c = claims.len().max(1) as f64;
    let supported = claims
        .iter()
        .filter(|c| links.iter().any(|l| l["to_index"] == json!(**c) && l["link_type"] == "supports"))
        .count() as f64;
    let q_llm = (0.5 * supported / c + 0.4 + jitter(whole[0])).clamp(0.0, 1.0);
    let h_llm = (0.4 * (1.0 - supported / c) + 0.25 + jitter(whole[1])).clamp(0.0, 1.0);

    json!({"spans": spans, "links": links, "q_llm": q_llm, "h_llm": h_llm}).to_string()
}
