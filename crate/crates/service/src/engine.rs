//! Story generation, the story matrix and background reflection on top of
//! the store.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use reflective_core::analysis::{build_report, fixture_statements, AnalysisConfig, AnalysisError, AnalysisReport};
use reflective_core::argument_mining::reflect;
use reflective_core::argumentation::{
    derive_argument_plan, scheme_catalog, story_matrix_prompts, ArgumentationError, DialogueType,
    SchemeCatalog, SchemeSelector,
};
use reflective_core::generation::{
    build_story_prompt, generate_narrative, CreativityLevel, GenerationError, NarrativeContext,
};
use reflective_core::llm::LlmClient;
use reflective_core::user_model::Persona;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{ReflectionStatus, Store, StoreError, StoryRecord};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown persona '{0}'")]
    UnknownPersona(String),
    #[error(transparent)]
    Plan(#[from] ArgumentationError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// A matrix cell that could not be produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub persona_id: String,
    pub prompt_id: String,
    pub creativity: CreativityLevel,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub story_ids: Vec<String>,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectSummary {
    pub done: usize,
    pub failed: usize,
}

pub struct Engine {
    store: Arc<Store>,
    client: Arc<dyn LlmClient>,
    personas: Vec<Persona>,
    catalog: SchemeCatalog,
    selector: Mutex<SchemeSelector>,
    workers: usize,
    analysis: AnalysisConfig,
}

impl Engine {
    pub fn new(store: Arc<Store>, client: Arc<dyn LlmClient>, personas: Vec<Persona>) -> Self {
        Engine {
            store,
            client,
            personas,
            catalog: scheme_catalog(),
            selector: Mutex::new(SchemeSelector::alternating()),
            workers: 4,
            analysis: AnalysisConfig::default(),
        }
    }

    /// Single story requests pick inquiry schemes with a seeded selector.
    pub fn with_scheme_seed(self, seed: u64) -> Self {
        Engine { selector: Mutex::new(SchemeSelector::seeded(seed)), ..self }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        Engine { workers: workers.max(1), ..self }
    }

    pub fn with_analysis(self, analysis: AnalysisConfig) -> Self {
        Engine { analysis, ..self }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn personas(&self) -> &[Persona] {
        &self.personas
    }

    pub fn persona(&self, id: &str) -> Result<&Persona, EngineError> {
        self.personas
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| EngineError::UnknownPersona(id.to_string()))
    }

    /// Generates and stores one story with a pending reflection.
    pub fn request_story(
        &self,
        persona_id: &str,
        dialogue_type: DialogueType,
        creativity: CreativityLevel,
        prompt_id: Option<&str>,
    ) -> Result<StoryRecord, EngineError> {
        let persona = self.persona(persona_id)?;
        let plan = {
            let mut selector = self.selector.lock().unwrap_or_else(|p| p.into_inner());
            derive_argument_plan(persona, dialogue_type, &mut selector, &self.catalog)?
        };
        let request = build_story_prompt(&plan, persona, creativity)?;
        let ctx = NarrativeContext::for_plan(&plan, creativity, prompt_id.unwrap_or(dialogue_type.as_str()));
        let narrative = generate_narrative(&request, self.client.as_ref(), &ctx)?;
        let record = StoryRecord::new(narrative, plan);
        self.store.persist_story(&record)?;
        Ok(record)
    }

    /// Generates the full matrix for each persona: every matrix prompt at
    /// both creativity levels. The plan for a (persona, prompt) cell is
    /// derived once and shared by both creativity levels, so the two stories
    /// differ only in style. Failures are collected per cell.
    pub fn batch_generate(&self, persona_ids: &[String]) -> Result<BatchReport, EngineError> {
        let personas: Vec<&Persona> = if persona_ids.is_empty() {
            self.personas.iter().collect()
        } else {
            persona_ids.iter().map(|id| self.persona(id)).collect::<Result<_, _>>()?
        };
        let mut report = BatchReport::default();
        for persona in personas {
            let mut selector = SchemeSelector::alternating();
            for prompt in story_matrix_prompts() {
                let plan = derive_argument_plan(persona, prompt.dialogue_type, &mut selector, &self.catalog);
                for creativity in CreativityLevel::ALL {
                    let cell = plan
                        .as_ref()
                        .map_err(|e| EngineError::Plan(e.clone()))
                        .and_then(|plan| {
                            let request = build_story_prompt(plan, persona, creativity)?;
                            let ctx = NarrativeContext::for_plan(plan, creativity, &prompt.id);
                            let narrative = generate_narrative(&request, self.client.as_ref(), &ctx)?;
                            let record = StoryRecord::new(narrative, plan.clone());
                            self.store.persist_story(&record)?;
                            Ok(record.narrative.id)
                        });
                    match cell {
                        Ok(id) => report.story_ids.push(id),
                        Err(e) => {
                            log::warn!("{} / {} / {creativity}: {e}", persona.id, prompt.id);
                            report.failures.push(CellFailure {
                                persona_id: persona.id.clone(),
                                prompt_id: prompt.id.clone(),
                                creativity,
                                error: e.to_string(),
                            });
                        }
                    }
                }
            }
        }
        Ok(report)
    }

    /// Runs the reflection for one story and records the outcome as a new
    /// version. A failing reflection is stored as failed, never raised,
    /// unless the story itself cannot be read or written.
    pub fn reflect_story(&self, story_id: &str) -> Result<ReflectionStatus, EngineError> {
        let story = self.store.fetch_story(story_id)?;
        let outcome = self
            .persona(&story.narrative.persona_id)
            .map_err(|e| e.to_string())
            .and_then(|persona| {
                reflect(&story.narrative, persona, &story.plan, &self.catalog, self.client.as_ref())
                    .map_err(|e| e.to_string())
            });
        match outcome {
            Ok(report) => {
                self.store.record_reflection(story_id, Ok(&report))?;
                Ok(ReflectionStatus::Done)
            }
            Err(message) => {
                log::warn!("reflection for {story_id} failed: {message}");
                self.store.record_reflection(story_id, Err(&message))?;
                Ok(ReflectionStatus::Failed)
            }
        }
    }

    /// Reflects the given stories on a pool of worker threads.
    pub fn reflect_many(&self, story_ids: Vec<String>) -> Result<ReflectSummary, EngineError> {
        let queue = Mutex::new(VecDeque::from(story_ids));
        let summary = Mutex::new(ReflectSummary::default());
        let first_error: Mutex<Option<EngineError>> = Mutex::new(None);
        std::thread::scope(|scope| {
            for _ in 0..self.workers {
                scope.spawn(|| loop {
                    let Some(id) = queue.lock().unwrap().pop_front() else { break };
                    match self.reflect_story(&id) {
                        Ok(ReflectionStatus::Done) => summary.lock().unwrap().done += 1,
                        Ok(_) => summary.lock().unwrap().failed += 1,
                        Err(e) => {
                            first_error.lock().unwrap().get_or_insert(e);
                        }
                    }
                });
            }
        });
        match first_error.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(summary.into_inner().unwrap()),
        }
    }

    /// Reflects every story without a finished reflection.
    pub fn reflect_pending(&self) -> Result<ReflectSummary, EngineError> {
        let ids = self.store.unreflected_story_ids()?;
        self.reflect_many(ids)
    }

    pub fn report(&self) -> Result<AnalysisReport, EngineError> {
        let input = self.store.analysis_input()?;
        Ok(build_report(&input, &fixture_statements(), &self.analysis)?)
    }
}
