//! A synthetic study: 55 respondents rating 8 stories each, with planted
//! recognition counts, risk medians and a disturbance ranking.

#![allow(dead_code)]

use reflective_core::analysis::{AnalysisInput, JoinedEvaluation, ScoredStory};
use reflective_core::argumentation::DialogueType;
use reflective_core::evaluation::{
    CreativityJudgement, EvaluationResponse, InconsistencyAnswer, PostStudyResponse, TriState,
};
use reflective_core::generation::CreativityLevel;

pub const RESPONDENTS: usize = 55;

pub const SLOTS: [(&str, DialogueType, CreativityLevel); 8] = [
    ("persuasion", DialogueType::Persuasion, CreativityLevel::Low),
    ("persuasion", DialogueType::Persuasion, CreativityLevel::High),
    ("deliberation", DialogueType::Deliberation, CreativityLevel::Low),
    ("deliberation", DialogueType::Deliberation, CreativityLevel::High),
    ("inquiry-1", DialogueType::Inquiry, CreativityLevel::Low),
    ("inquiry-1", DialogueType::Inquiry, CreativityLevel::High),
    ("inquiry-2", DialogueType::Inquiry, CreativityLevel::Low),
    ("inquiry-2", DialogueType::Inquiry, CreativityLevel::High),
];

/// Respondents recognising the intended purpose, per condition, after the
/// two inquiry stories are merged.
pub const PLANTED_RECOGNITION: [(DialogueType, CreativityLevel, usize); 6] = [
    (DialogueType::Persuasion, CreativityLevel::Low, 22),
    (DialogueType::Persuasion, CreativityLevel::High, 33),
    (DialogueType::Deliberation, CreativityLevel::Low, 11),
    (DialogueType::Deliberation, CreativityLevel::High, 44),
    (DialogueType::Inquiry, CreativityLevel::Low, 30),
    (DialogueType::Inquiry, CreativityLevel::High, 15),
];

pub const PLANTED_MERGED: usize = 330;
pub const NOTICED_RISK: [f64; 5] = [0.40, 0.44, 0.48, 0.52, 0.56];
pub const NOTICED_DISTURBANCE: [u8; 5] = [2, 1, 4, 3, 5];
pub const PLANTED_MEDIAN_NOTICED: f64 = 0.48;
pub const PLANTED_MEDIAN_OTHER: f64 = 0.39;
/// Ranks of risk are 1..5; disturbance ranks differ by (1,1,1,1,0), so
/// sum d^2 = 4 and rho = 1 - 6*4 / (5 * 24).
pub const PLANTED_RHO: f64 = 0.8;

fn selections(slot: usize, r: usize) -> Vec<&'static str> {
    match slot {
        0 => if r < 22 { vec!["per-change"] } else if r.is_multiple_of(2) { vec!["del-inspire"] } else { vec![] },
        1 => if r < 33 { vec!["per-reasons", "open"] } else { vec!["inq-motives"] },
        2 => if r < 11 { vec!["del-reasons"] } else if r.is_multiple_of(3) { vec![] } else { vec!["per-reasons"] },
        3 => if r < 44 { vec!["del-inspire"] } else { vec!["open"] },
        4 => if r < 20 { vec!["inq-notice"] } else { vec!["open"] },
        5 => if r < 5 { vec!["inq-summary"] } else { vec![] },
        6 => if (15..30).contains(&r) { vec!["inq-summary"] } else { vec![] },
        7 => if (40..50).contains(&r) { vec!["inq-motives", "del-reasons"] } else { vec!["per-change"] },
        _ => unreachable!(),
    }
}

pub fn study() -> AnalysisInput {
    let mut evaluations = Vec::new();
    let mut other_k = 0;
    for r in 0..RESPONDENTS {
        for (slot, (prompt, dt, cr)) in SLOTS.iter().enumerate() {
            let noticed = slot == 1 && r < NOTICED_RISK.len();
            let h = if noticed {
                NOTICED_RISK[r]
            } else {
                let h = match other_k {
                    k if k < 217 => 0.30,
                    217 => 0.39,
                    _ => 0.45,
                };
                other_k += 1;
                h
            };
            evaluations.push(JoinedEvaluation {
                evaluation: EvaluationResponse {
                    narrative_id: format!("story-{prompt}-{cr}-{}", r % 5),
                    respondent_id: format!("resp-{r:02}"),
                    purpose_selections: selections(slot, r).into_iter().map(String::from).collect(),
                    liking: 1 + (r % 5) as u8,
                    creativity_rating: 1 + ((r + slot) % 5) as u8,
                    creativity_judgement: CreativityJudgement::Appropriate,
                    inconsistency: if noticed {
                        InconsistencyAnswer::Yes
                    } else if (r + slot) % 2 == 0 {
                        InconsistencyAnswer::No
                    } else {
                        InconsistencyAnswer::NotSure
                    },
                    inconsistency_explanation: None,
                    disturbance: noticed.then(|| NOTICED_DISTURBANCE[r]),
                },
                persona_id: format!("persona-{}", ["a", "b", "c", "d", "e"][r % 5]),
                dialogue_type: *dt,
                creativity: *cr,
                prompt_id: prompt.to_string(),
                q_final: Some(0.6),
                h_final: Some(h),
            });
        }
    }
    let stories = (0..5)
        .flat_map(|p| {
            SLOTS.iter().map(move |(prompt, dt, cr)| ScoredStory {
                narrative_id: format!("story-{prompt}-{cr}-{p}"),
                persona_id: format!("persona-{p}"),
                dialogue_type: *dt,
                creativity: *cr,
                q_final: 0.5 + 0.05 * p as f64,
                h_final: 0.3 + 0.02 * p as f64,
            })
        })
        .collect();
    let post_study = (0..RESPONDENTS)
        .map(|r| PostStudyResponse {
            respondent_id: format!("resp-{r:02}"),
            overall_reflection: "fine".into(),
            overall_relevance: 3,
            cultural_relatability: [TriState::Yes, TriState::Maybe, TriState::No][r % 3],
            relatability_comment: None,
            future_use: if r < 20 { TriState::Yes } else if r < 40 { TriState::Maybe } else { TriState::No },
            future_use_comment: None,
            persona_relatedness: 1 + (r % 5) as u8,
        })
        .collect();
    AnalysisInput { evaluations, stories, post_study }
}
