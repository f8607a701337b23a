//! Brute-force reference scorer and random extraction generator.
//!
//! Deliberately written without the library's scoring helpers: every claim
//! scans every link, and the weights are spelled out as literals.

#![allow(dead_code)]

use rand::Rng;
use reflective_core::argument_mining::{
    ArgumentLink, LinkType, SentenceSpan, SpanGrounding, SpanLabel, StructureExtraction,
};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleScores {
    pub c: usize,
    pub supported: usize,
    pub grounded: usize,
    pub u: usize,
    pub s0: usize,
    pub q_struct: f64,
    pub h_struct: f64,
    pub q_final: f64,
    pub h_final: f64,
    pub flags: Vec<usize>,
}

#[allow(clippy::manual_clamp)]
fn unit(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else if x > 1.0 {
        1.0
    } else {
        x
    }
}

pub fn score(ex: &StructureExtraction, grounding: &[SpanGrounding]) -> OracleScores {
    let mut c = 0;
    let mut supported = 0;
    let mut grounded = 0;
    let mut flags = Vec::new();
    for span in &ex.spans {
        if span.label != SpanLabel::Claim {
            continue;
        }
        c += 1;
        let mut has_support = false;
        for link in &ex.links {
            if link.to_index == span.index && link.link_type == LinkType::Supports {
                has_support = true;
            }
        }
        let mut is_grounded = false;
        for g in grounding {
            if g.index == span.index {
                is_grounded = g.g_final;
            }
        }
        if has_support {
            supported += 1;
        }
        if is_grounded {
            grounded += 1;
        }
        if !(has_support && is_grounded) {
            flags.push(span.index);
        }
    }
    let u = c - grounded;
    let s0 = c - supported;
    let (q_struct, h_struct) = if c == 0 {
        (0.0, 1.0)
    } else {
        let cf = c as f64;
        (
            supported as f64 / (2.0 * cf) + grounded as f64 / (2.0 * cf),
            (6.0 * u as f64 + 4.0 * s0 as f64) / (10.0 * cf),
        )
    };
    OracleScores {
        c,
        supported,
        grounded,
        u,
        s0,
        q_struct,
        h_struct,
        q_final: (unit(ex.q_llm) + q_struct) / 2.0,
        h_final: (unit(ex.h_llm) + h_struct) / 2.0,
        flags,
    }
}

/// A random extraction with at most `max_claims` claims, valid links only,
/// and random final grounding for every span. q_llm/h_llm may fall outside
/// [0, 1] to exercise clamping.
pub fn random_extraction<R: Rng>(rng: &mut R, max_claims: usize) -> (StructureExtraction, Vec<SpanGrounding>) {
    let claims = rng.gen_range(0..=max_claims);
    let others = rng.gen_range(0..=10);
    let mut labels: Vec<SpanLabel> = (0..claims).map(|_| SpanLabel::Claim).collect();
    for _ in 0..others {
        labels.push(if rng.gen_bool(0.7) { SpanLabel::Premise } else { SpanLabel::None });
    }
    // Fisher-Yates so claims land anywhere.
    for i in (1..labels.len()).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    let spans: Vec<SentenceSpan> = labels
        .iter()
        .enumerate()
        .map(|(index, label)| SentenceSpan {
            index,
            text: format!("sentence {index}"),
            label: *label,
            scheme: None,
            g_llm: rng.gen_bool(0.5),
        })
        .collect();
    let claim_idx: Vec<usize> = (0..spans.len()).filter(|i| labels[*i] == SpanLabel::Claim).collect();
    let mut links = Vec::new();
    if !claim_idx.is_empty() && spans.len() > 1 {
        for _ in 0..rng.gen_range(0..=2 * spans.len()) {
            let to = claim_idx[rng.gen_range(0..claim_idx.len())];
            let from = loop {
                let f = rng.gen_range(0..spans.len());
                if f != to {
                    break f;
                }
            };
            let link_type = if rng.gen_bool(0.6) { LinkType::Supports } else { LinkType::Attacks };
            links.push(ArgumentLink { from_index: from, to_index: to, link_type });
        }
    }
    let grounding = spans
        .iter()
        .map(|s| SpanGrounding { index: s.index, g_final: rng.gen_bool(0.5), matched_tokens: vec![] })
        .collect();
    let ex = StructureExtraction {
        narrative_id: "random".into(),
        spans,
        links,
        q_llm: rng.gen_range(-0.2..1.2),
        h_llm: rng.gen_range(-0.2..1.2),
        dropped_links: 0,
    };
    (ex, grounding)
}

/// Independent token check: lowercase words of the span against a word set,
/// digit runs against a number set.
pub fn naive_grounded(text: &str, words: &[&str], numbers: &[u32], stopwords: &[&str]) -> bool {
    let lower = text.to_lowercase();
    let mut token = String::new();
    let mut hit = false;
    let check = |t: &str| {
        if t.is_empty() {
            return false;
        }
        if t.chars().all(|c| c.is_ascii_digit()) {
            return t.parse::<u32>().map(|n| numbers.contains(&n)).unwrap_or(false);
        }
        t.chars().count() >= 2 && !stopwords.contains(&t) && words.contains(&t)
    };
    for ch in lower.chars() {
        if ch.is_alphanumeric() {
            token.push(ch);
        } else {
            hit |= check(&token);
            token.clear();
        }
    }
    hit |= check(&token);
    hit
}

/// Words and ratings of a persona, split by hand-rolled rules.
pub fn naive_vocab(persona: &reflective_core::user_model::Persona) -> (Vec<String>, Vec<u32>) {
    let mut words = Vec::new();
    let mut numbers = Vec::new();
    for a in &persona.activities {
        let mut fields = vec![a.name.clone(), a.activity_domain.as_str().to_string(), a.frequency.clone()];
        fields.extend(a.motivations.iter().cloned());
        fields.extend(a.done_with.iter().cloned());
        for f in fields {
            for w in f.to_lowercase().split(|c: char| !c.is_alphanumeric()) {
                if !w.is_empty() && !words.iter().any(|x: &String| x == w) {
                    words.push(w.to_string());
                }
            }
        }
        numbers.push(u32::from(a.importance));
        numbers.push(u32::from(a.fun));
    }
    (words, numbers)
}
