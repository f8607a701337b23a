//! Structure extraction with repair retries, and the golden reflection.

mod support;

use std::path::PathBuf;
use std::sync::Mutex;

use reflective_core::argument_mining::{
    build_extraction_prompt, extract_structure, reflect, LinkType, MiningError, SpanGrounding,
    SpanLabel, StructureExtraction, NARRATIVE_END, NARRATIVE_START, REPAIR_RETRIES,
};
use reflective_core::argumentation::{
    derive_argument_plan, scheme_catalog, DialogueType, SchemeSelector,
};
use reflective_core::generation::{CreativityLevel, GenerationMetadata, Narrative};
use reflective_core::llm::{GenerationRequest, LlmClient, LlmError};
use reflective_core::mock::MockLlm;
use reflective_core::user_model::{fixture_personas, Persona, STOPWORDS};
use serde_json::{json, Value};

use support::oracle;

struct Scripted {
    replies: Mutex<Vec<Result<String, LlmError>>>,
    seen: Mutex<Vec<GenerationRequest>>,
}

impl Scripted {
    fn new(replies: Vec<Result<String, LlmError>>) -> Self {
        Scripted { replies: Mutex::new(replies), seen: Mutex::new(vec![]) }
    }

    fn calls(&self) -> usize {
        self.seen.lock().unwrap().len()
    }
}

impl LlmClient for Scripted {
    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        self.seen.lock().unwrap().push(request.clone());
        let mut replies = self.replies.lock().unwrap();
        if replies.len() > 1 {
            replies.remove(0)
        } else {
            replies[0].clone()
        }
    }

    fn model_name(&self) -> String {
        "scripted".into()
    }
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn narrative(persona: &Persona, text: &str) -> Narrative {
    let paragraphs: Vec<String> = text.trim().split("\n\n").map(|p| p.trim().to_string()).collect();
    Narrative {
        id: "golden-a".into(),
        persona_id: persona.id.clone(),
        dialogue_type: DialogueType::Persuasion,
        creativity: CreativityLevel::High,
        prompt_id: "persuasion".into(),
        full_text: Narrative::join_paragraphs(&paragraphs),
        paragraphs,
        generation_metadata: GenerationMetadata {
            model: "fixture".into(),
            temperature: 0.9,
            timestamp: "2024-01-01T00:00:00Z".into(),
            seed: None,
            attempts: 1,
            structure_warning: None,
        },
    }
}

fn persona_a() -> Persona {
    fixture_personas().remove(0)
}

fn valid_reply() -> String {
    json!({
        "spans": [
            {"index": 0, "text": "You value calm.", "label": "premise", "scheme": "argument_from_value", "g_llm": true},
            {"index": 1, "text": "Gardening gives you calm.", "label": "premise", "scheme": null, "g_llm": true},
            {"index": 2, "text": "Keep gardening.", "label": "claim", "scheme": "argument_from_value", "g_llm": true},
            {"index": 3, "text": "It is lovely.", "label": "none", "scheme": null, "g_llm": false},
            {"index": 4, "text": "The sun shines.", "label": "none", "scheme": null, "g_llm": false}
        ],
        "links": [{"from_index": 0, "to_index": 2, "link_type": "supports"}],
        "q_llm": 0.7,
        "h_llm": 0.2
    })
    .to_string()
}

#[test]
fn prompt_lists_four_schemes_and_quotes_narrative() {
    let persona = persona_a();
    let n = narrative(&persona, "One.\n\nTwo.\n\nThree.");
    let req = build_extraction_prompt(&n, &persona, &scheme_catalog(), &[]);
    assert!(req.user_text.contains(&n.full_text));
    let line = req.user_text.lines().find(|l| l.starts_with("PERMISSIBLE SCHEMES:")).unwrap();
    let names: Vec<&str> = line["PERMISSIBLE SCHEMES:".len()..].split(',').map(str::trim).collect();
    assert_eq!(names, ["argument_from_value", "position_to_know", "sufficient_condition", "expert_opinion"]);
    assert_eq!(req, build_extraction_prompt(&n, &persona, &scheme_catalog(), &[]));
}

#[test]
fn valid_reply_passes_through() {
    let persona = persona_a();
    let n = narrative(&persona, "a.\n\nb.\n\nc.");
    let client = Scripted::new(vec![Ok(valid_reply())]);
    let ex = extract_structure(&n, &persona, &scheme_catalog(), &[], &client).unwrap();
    assert_eq!(ex.spans.len(), 5);
    assert_eq!(client.calls(), 1);
}

#[test]
fn malformed_twice_then_valid_uses_both_repairs() {
    let persona = persona_a();
    let n = narrative(&persona, "a.\n\nb.\n\nc.");
    let client = Scripted::new(vec![
        Ok("not json at all".into()),
        Ok(r#"{"spans": [{"index": 0, "text": "x", "label": "thesis", "g_llm": true}], "q_llm": 0.1, "h_llm": 0.1}"#.into()),
        Ok(valid_reply()),
    ]);
    let ex = extract_structure(&n, &persona, &scheme_catalog(), &[], &client).unwrap();
    assert_eq!(ex.spans.len(), 5);
    assert_eq!(client.calls(), 1 + REPAIR_RETRIES as usize);
    let seen = client.seen.lock().unwrap();
    // each repair prompt quotes the validation errors of the previous reply
    assert!(seen[1].user_text.contains("no JSON object"));
    assert!(seen[2].user_text.contains("thesis"));
}

#[test]
fn always_malformed_is_a_format_error() {
    let persona = persona_a();
    let n = narrative(&persona, "a.\n\nb.\n\nc.");
    let client = Scripted::new(vec![Ok("{\"spans\": 3}".into())]);
    let err = extract_structure(&n, &persona, &scheme_catalog(), &[], &client).unwrap_err();
    match err {
        MiningError::ExtractionFormat { attempts, errors } => {
            assert_eq!(attempts, 3);
            assert!(!errors.is_empty());
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(client.calls(), 3);
}

#[test]
fn transport_failure_propagates() {
    let persona = persona_a();
    let n = narrative(&persona, "a.\n\nb.\n\nc.");
    let client = Scripted::new(vec![Err(LlmError::Transport("down".into()))]);
    let err = extract_structure(&n, &persona, &scheme_catalog(), &[], &client).unwrap_err();
    assert!(matches!(err, MiningError::Transport(LlmError::Transport(_))));
}

#[test]
fn mock_extraction_round_trips_for_matrix_story() {
    let persona = persona_a();
    let story = "Think back on the past week. You value calm.\n\nDoing gardening promotes calm.\n\nYou have good reason to continue gardening because it serves calm.";
    let n = narrative(&persona, story);
    let ex = extract_structure(&n, &persona, &scheme_catalog(), &[], &MockLlm::new()).unwrap();
    assert!(ex.spans.iter().any(|s| s.label == SpanLabel::Claim));
    let req = build_extraction_prompt(&n, &persona, &scheme_catalog(), &[]);
    assert!(req.user_text.contains(NARRATIVE_START) && req.user_text.contains(NARRATIVE_END));
}

// ---------------------------------------------------------------------------
// Golden reflection

/// Scores the fixture extraction straight from its JSON with the oracle.
fn oracle_report(persona: &Persona, extraction: &Value) -> Value {
    let spans = extraction["spans"].as_array().unwrap();
    let is_claim = |i: u64| spans.iter().any(|s| s["index"] == i && s["label"] == "claim");
    let n = spans.len() as u64;
    let mut links = Vec::new();
    let mut dropped = 0;
    for l in extraction["links"].as_array().unwrap() {
        let (from, to) = (l["from_index"].as_u64().unwrap(), l["to_index"].as_u64().unwrap());
        if from == to || from >= n || to >= n || !is_claim(to) {
            dropped += 1;
            continue;
        }
        links.push(reflective_core::argument_mining::ArgumentLink {
            from_index: from as usize,
            to_index: to as usize,
            link_type: if l["link_type"] == "supports" { LinkType::Supports } else { LinkType::Attacks },
        });
    }
    let (words, numbers) = oracle::naive_vocab(persona);
    let words: Vec<&str> = words.iter().map(String::as_str).collect();
    let parsed: StructureExtraction = StructureExtraction {
        narrative_id: "golden-a".into(),
        spans: serde_json::from_value(Value::Array(spans.clone())).unwrap(),
        links,
        q_llm: extraction["q_llm"].as_f64().unwrap(),
        h_llm: extraction["h_llm"].as_f64().unwrap(),
        dropped_links: dropped,
    };
    let grounding: Vec<SpanGrounding> = parsed
        .spans
        .iter()
        .map(|s| SpanGrounding {
            index: s.index,
            g_final: s.g_llm && oracle::naive_grounded(&s.text, &words, &numbers, STOPWORDS),
            matched_tokens: vec![],
        })
        .collect();
    let o = oracle::score(&parsed, &grounding);
    let ungrounded: Vec<&str> = parsed
        .spans
        .iter()
        .zip(&grounding)
        .filter(|(_, g)| !g.g_final)
        .map(|(s, _)| s.text.as_str())
        .collect();
    json!({
        "narrative_id": "golden-a",
        "claim_count": o.c,
        "supported_claims": o.supported,
        "grounded_claims": o.grounded,
        "q_struct": o.q_struct,
        "h_struct": o.h_struct,
        "q_final": o.q_final,
        "h_final": o.h_final,
        "inconsistency_flags": o.flags,
        "ungrounded_span_texts": ungrounded,
        "dropped_links": dropped,
    })
}

fn load_fixture() -> (Persona, Narrative, String) {
    let persona = persona_a();
    let text = std::fs::read_to_string(golden_dir().join("narrative_persona_a.txt")).unwrap();
    let reply = std::fs::read_to_string(golden_dir().join("extraction_persona_a.json")).unwrap();
    (persona.clone(), narrative(&persona, &text), reply)
}

#[test]
fn golden_file_is_the_oracle_result() {
    let (persona, _, reply) = load_fixture();
    let computed = oracle_report(&persona, &serde_json::from_str(&reply).unwrap());
    let path = golden_dir().join("reflection_persona_a.json");
    if std::env::var_os("REFLECTIVE_BLESS_GOLDEN").is_some() {
        std::fs::write(&path, serde_json::to_string_pretty(&computed).unwrap() + "\n").unwrap();
    }
    let golden: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(golden, computed);
}

#[test]
fn reflection_matches_golden_file() {
    let (persona, n, reply) = load_fixture();
    let catalog = scheme_catalog();
    let plan = derive_argument_plan(&persona, DialogueType::Persuasion, &mut SchemeSelector::alternating(), &catalog).unwrap();
    let request = build_extraction_prompt(&n, &persona, &catalog, &plan.critical_questions);
    let client = MockLlm::new().with_fixture(&request, reply);
    let report = reflect(&n, &persona, &plan, &catalog, &client).unwrap();

    let golden: Value =
        serde_json::from_str(&std::fs::read_to_string(golden_dir().join("reflection_persona_a.json")).unwrap()).unwrap();
    assert_eq!(report.narrative_id, golden["narrative_id"]);
    assert_eq!(report.claim_count as u64, golden["claim_count"]);
    assert_eq!(report.supported_claims as u64, golden["supported_claims"]);
    assert_eq!(report.grounded_claims as u64, golden["grounded_claims"]);
    for (got, key) in [
        (report.q_struct, "q_struct"),
        (report.h_struct, "h_struct"),
        (report.q_final, "q_final"),
        (report.h_final, "h_final"),
    ] {
        assert!((got - golden[key].as_f64().unwrap()).abs() < 1e-12, "{key}: {got}");
    }
    assert_eq!(serde_json::to_value(&report.inconsistency_flags).unwrap(), golden["inconsistency_flags"]);
    assert_eq!(serde_json::to_value(&report.ungrounded_span_texts).unwrap(), golden["ungrounded_span_texts"]);
    assert_eq!(report.dropped_links as u64, golden["dropped_links"]);
}
