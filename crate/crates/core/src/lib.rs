//! Persona-grounded reflective stories: user model, argument planning,
//! narrative generation, argument mining and study analysis.

pub mod analysis;
pub mod argument_mining;
pub mod argumentation;
pub mod evaluation;
pub mod generation;
pub mod llm;
pub mod mock;
pub mod user_model;
