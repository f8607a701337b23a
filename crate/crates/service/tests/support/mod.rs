#![allow(dead_code)]

use std::sync::Arc;

use reflective_core::argumentation::DialogueType;
use reflective_core::evaluation::{CreativityJudgement, EvaluationResponse, InconsistencyAnswer, PostStudyResponse, TriState};
use reflective_core::generation::CreativityLevel;
use reflective_core::llm::LlmClient;
use reflective_core::mock::MockLlm;
use reflective_core::user_model::fixture_personas;
use reflective_service::engine::Engine;
use reflective_service::store::{Store, StoryRecord};

pub fn engine_with(client: Arc<dyn LlmClient>) -> Engine {
    Engine::new(Arc::new(Store::open_in_memory().unwrap()), client, fixture_personas()).with_workers(4)
}

pub fn mock_engine() -> Engine {
    engine_with(Arc::new(MockLlm::new()))
}

pub fn story(engine: &Engine) -> StoryRecord {
    engine
        .request_story("persona-a", DialogueType::Persuasion, CreativityLevel::Low, None)
        .unwrap()
}

pub fn evaluation(narrative_id: &str, respondent_id: &str) -> EvaluationResponse {
    EvaluationResponse {
        narrative_id: narrative_id.into(),
        respondent_id: respondent_id.into(),
        purpose_selections: ["per-change".to_string()].into(),
        liking: 4,
        creativity_rating: 3,
        creativity_judgement: CreativityJudgement::Appealing,
        inconsistency: InconsistencyAnswer::No,
        inconsistency_explanation: None,
        disturbance: None,
    }
}

pub fn post_study(respondent_id: &str) -> PostStudyResponse {
    PostStudyResponse {
        respondent_id: respondent_id.into(),
        overall_reflection: "It made me think about my week.".into(),
        overall_relevance: 4,
        cultural_relatability: TriState::Yes,
        relatability_comment: None,
        future_use: TriState::Maybe,
        future_use_comment: Some("perhaps".into()),
        persona_relatedness: 3,
    }
}
