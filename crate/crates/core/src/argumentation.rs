//! Argumentation schemes, scheme selection per dialogue type, and argument
//! plans bound to persona facts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::user_model::{Activity, Persona};

/// Bundled scheme catalog.
pub const SCHEME_CATALOG: &str = include_str!("../data/schemes.toml");

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ArgumentationError {
    #[error("no activity of persona '{persona}' can bind scheme {scheme}")]
    NoBindableActivity { persona: String, scheme: SchemeKind },
    #[error("scheme {0} is not active")]
    InactiveScheme(SchemeKind),
    #[error("scheme {0} is missing from the catalog")]
    MissingScheme(SchemeKind),
    #[error("invalid scheme catalog: {0}")]
    Catalog(String),
    #[error("unknown {kind} '{value}'")]
    Unknown { kind: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogueType {
    Inquiry,
    Deliberation,
    Persuasion,
}

impl DialogueType {
    pub const ALL: [DialogueType; 3] = [Self::Inquiry, Self::Deliberation, Self::Persuasion];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Inquiry => "inquiry",
            Self::Deliberation => "deliberation",
            Self::Persuasion => "persuasion",
        }
    }
}

impl fmt::Display for DialogueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DialogueType {
    type Err = ArgumentationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inquiry" => Ok(Self::Inquiry),
            "deliberation" => Ok(Self::Deliberation),
            "persuasion" => Ok(Self::Persuasion),
            _ => Err(ArgumentationError::Unknown {
                kind: "dialogue type",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    ArgumentFromValue,
    PositionToKnow,
    SufficientCondition,
    ExpertOpinion,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        Self::ArgumentFromValue,
        Self::PositionToKnow,
        Self::SufficientCondition,
        Self::ExpertOpinion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ArgumentFromValue => "argument_from_value",
            Self::PositionToKnow => "position_to_know",
            Self::SufficientCondition => "sufficient_condition",
            Self::ExpertOpinion => "expert_opinion",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = ArgumentationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| ArgumentationError::Unknown {
                kind: "scheme",
                value: s.to_string(),
            })
    }
}

/// A user-model field a template placeholder can bind to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Activity,
    Value,
    Frequency,
    Importance,
    Fun,
    Partner,
}

impl Slot {
    fn from_name(name: &str) -> Option<Slot> {
        Some(match name {
            "activity" => Slot::Activity,
            "value" => Slot::Value,
            "frequency" => Slot::Frequency,
            "importance" => Slot::Importance,
            "fun" => Slot::Fun,
            "partner" => Slot::Partner,
            _ => return None,
        })
    }
}

/// Placeholder names (`{name}`) in template order, without duplicates.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        let Some(end) = after.find('}') else { break };
        let name = after[..end].to_string();
        if !out.contains(&name) {
            out.push(name);
        }
        rest = &after[end + 1..];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentScheme {
    pub kind: SchemeKind,
    pub name: String,
    pub premise_templates: Vec<String>,
    pub conclusion_template: String,
    pub critical_questions: Vec<String>,
    pub active: bool,
}

impl ArgumentScheme {
    pub fn template_id(&self, position: usize) -> String {
        format!("{}.p{}", self.kind, position + 1)
    }

    fn slots(&self) -> BTreeSet<Slot> {
        self.premise_templates
            .iter()
            .chain(std::iter::once(&self.conclusion_template))
            .flat_map(|t| placeholders(t))
            .filter_map(|n| Slot::from_name(&n))
            .collect()
    }

    fn validate(&self) -> Result<(), ArgumentationError> {
        let err = |msg: String| Err(ArgumentationError::Catalog(format!("{}: {msg}", self.kind)));
        if self.premise_templates.is_empty() {
            return err("no premise templates".into());
        }
        if self.critical_questions.is_empty() {
            return err("no critical questions".into());
        }
        let mut premise_names = BTreeSet::new();
        for t in &self.premise_templates {
            for name in placeholders(t) {
                if Slot::from_name(&name).is_none() {
                    return err(format!("unknown placeholder {{{name}}}"));
                }
                premise_names.insert(name);
            }
        }
        for name in placeholders(&self.conclusion_template) {
            if Slot::from_name(&name).is_none() {
                return err(format!("unknown placeholder {{{name}}} in conclusion"));
            }
        }
        for q in &self.critical_questions {
            if !placeholders(q).is_empty() {
                return err("critical questions must not contain placeholders".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeCatalog {
    pub version: u32,
    #[serde(rename = "scheme")]
    pub schemes: Vec<ArgumentScheme>,
}

impl SchemeCatalog {
    pub fn parse(text: &str) -> Result<Self, ArgumentationError> {
        let catalog: SchemeCatalog =
            toml::from_str(text).map_err(|e| ArgumentationError::Catalog(e.to_string()))?;
        for kind in SchemeKind::ALL {
            let n = catalog.schemes.iter().filter(|s| s.kind == kind).count();
            if n != 1 {
                return Err(ArgumentationError::Catalog(format!(
                    "expected exactly one {kind} scheme, found {n}"
                )));
            }
        }
        for s in &catalog.schemes {
            s.validate()?;
        }
        Ok(catalog)
    }

    pub fn get(&self, kind: SchemeKind) -> Result<&ArgumentScheme, ArgumentationError> {
        self.schemes
            .iter()
            .find(|s| s.kind == kind)
            .ok_or(ArgumentationError::MissingScheme(kind))
    }
}

/// The bundled catalog of four schemes.
pub fn scheme_catalog() -> SchemeCatalog {
    SchemeCatalog::parse(SCHEME_CATALOG).expect("bundled scheme catalog is valid")
}

/// How the inquiry scheme is chosen; persuasion and deliberation are fixed.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum SchemeSelector {
    /// Alternates argument_from_value, position_to_know, ... per inquiry call.
    Alternating { calls: u64 },
    Seeded(ChaCha8Rng),
}

impl SchemeSelector {
    pub fn alternating() -> Self {
        Self::Alternating { calls: 0 }
    }

    pub fn seeded(seed: u64) -> Self {
        Self::Seeded(ChaCha8Rng::seed_from_u64(seed))
    }

    fn inquiry_scheme(&mut self) -> SchemeKind {
        let use_value = match self {
            Self::Alternating { calls } => {
                let even = *calls % 2 == 0;
                *calls += 1;
                even
            }
            Self::Seeded(rng) => rng.gen_bool(0.5),
        };
        if use_value {
            SchemeKind::ArgumentFromValue
        } else {
            SchemeKind::PositionToKnow
        }
    }
}

pub fn select_scheme(dialogue_type: DialogueType, selector: &mut SchemeSelector) -> SchemeKind {
    match dialogue_type {
        DialogueType::Persuasion => SchemeKind::ArgumentFromValue,
        DialogueType::Deliberation => SchemeKind::SufficientCondition,
        DialogueType::Inquiry => selector.inquiry_scheme(),
    }
}

/// What a placeholder was bound to. Every variant names the activity it
/// came from, so groundedness of a plan can be checked by id lookup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binding {
    Activity { activity_id: String },
    Motivation { activity_id: String, text: String },
    Frequency { activity_id: String, text: String },
    Importance { activity_id: String, value: u8 },
    Fun { activity_id: String, value: u8 },
    Partner { activity_id: String, text: String },
}

impl Binding {
    /// True when the bound element exists in the persona.
    pub fn resolves_in(&self, persona: &Persona) -> bool {
        let lookup = |id: &str| persona.activity(id);
        match self {
            Binding::Activity { activity_id } => lookup(activity_id).is_some(),
            Binding::Motivation { activity_id, text } => {
                lookup(activity_id).is_some_and(|a| a.motivations.contains(text))
            }
            Binding::Frequency { activity_id, text } => {
                lookup(activity_id).is_some_and(|a| &a.frequency == text)
            }
            Binding::Importance { activity_id, value } => {
                lookup(activity_id).is_some_and(|a| a.importance == *value)
            }
            Binding::Fun { activity_id, value } => {
                lookup(activity_id).is_some_and(|a| a.fun == *value)
            }
            Binding::Partner { activity_id, text } => {
                lookup(activity_id).is_some_and(|a| a.done_with.contains(text))
            }
        }
    }
}

fn bind_slot(slot: Slot, activity: &Activity) -> Option<(String, Binding)> {
    let id = activity.id.clone();
    Some(match slot {
        Slot::Activity => (activity.name.clone(), Binding::Activity { activity_id: id }),
        Slot::Value => {
            let m = activity.motivations.first()?;
            (m.clone(), Binding::Motivation { activity_id: id, text: m.clone() })
        }
        Slot::Frequency => {
            if activity.frequency.trim().is_empty() {
                return None;
            }
            (
                activity.frequency.clone(),
                Binding::Frequency { activity_id: id, text: activity.frequency.clone() },
            )
        }
        Slot::Importance => (
            activity.importance.to_string(),
            Binding::Importance { activity_id: id, value: activity.importance },
        ),
        Slot::Fun => (
            activity.fun.to_string(),
            Binding::Fun { activity_id: id, value: activity.fun },
        ),
        Slot::Partner => {
            let p = activity.done_with.first()?;
            (p.clone(), Binding::Partner { activity_id: id, text: p.clone() })
        }
    })
}

fn can_bind(scheme: &ArgumentScheme, activity: &Activity) -> bool {
    scheme.slots().into_iter().all(|s| bind_slot(s, activity).is_some())
}

/// Fills a template from one activity. Returns the text and the bindings of
/// the placeholders it used.
fn instantiate(template: &str, activity: &Activity) -> (String, BTreeMap<String, Binding>) {
    let mut text = template.to_string();
    let mut bindings = BTreeMap::new();
    for name in placeholders(template) {
        let slot = Slot::from_name(&name).expect("catalog placeholders are validated");
        let (value, binding) = bind_slot(slot, activity).expect("activity checked by can_bind");
        text = text.replace(&format!("{{{name}}}"), &value);
        bindings.insert(name, binding);
    }
    (capitalize_first(&text), bindings)
}

fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundPremise {
    pub template_id: String,
    pub text: String,
    pub bindings: BTreeMap<String, Binding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentPlan {
    pub dialogue_type: DialogueType,
    pub scheme: SchemeKind,
    pub premises: Vec<BoundPremise>,
    pub conclusion: String,
    pub critical_questions: Vec<String>,
    pub persona_id: String,
    pub focus_activities: Vec<String>,
}

pub const MAX_FOCUS_ACTIVITIES: usize = 3;

/// Activities ordered by salience: importance, then fun (both descending),
/// then id.
pub fn by_salience(persona: &Persona) -> Vec<&Activity> {
    let mut ranked: Vec<&Activity> = persona.activities.iter().collect();
    ranked.sort_by(|a, b| {
        b.importance
            .cmp(&a.importance)
            .then(b.fun.cmp(&a.fun))
            .then(a.id.cmp(&b.id))
    });
    ranked
}

pub fn derive_argument_plan(
    persona: &Persona,
    dialogue_type: DialogueType,
    selector: &mut SchemeSelector,
    catalog: &SchemeCatalog,
) -> Result<ArgumentPlan, ArgumentationError> {
    let kind = select_scheme(dialogue_type, selector);
    plan_with_scheme(persona, dialogue_type, kind, catalog)
}

/// Builds a plan for an explicitly chosen scheme.
pub fn plan_with_scheme(
    persona: &Persona,
    dialogue_type: DialogueType,
    kind: SchemeKind,
    catalog: &SchemeCatalog,
) -> Result<ArgumentPlan, ArgumentationError> {
    let scheme = catalog.get(kind)?;
    if !scheme.active {
        return Err(ArgumentationError::InactiveScheme(kind));
    }
    let focus: Vec<&Activity> = by_salience(persona)
        .into_iter()
        .filter(|a| can_bind(scheme, a))
        .take(MAX_FOCUS_ACTIVITIES)
        .collect();
    let Some(primary) = focus.first() else {
        return Err(ArgumentationError::NoBindableActivity {
            persona: persona.id.clone(),
            scheme: kind,
        });
    };

    let mut premises = Vec::new();
    for activity in &focus {
        for (pos, template) in scheme.premise_templates.iter().enumerate() {
            let (text, bindings) = instantiate(template, activity);
            premises.push(BoundPremise {
                template_id: scheme.template_id(pos),
                text,
                bindings,
            });
        }
    }
    let (conclusion, _) = instantiate(&scheme.conclusion_template, primary);

    Ok(ArgumentPlan {
        dialogue_type,
        scheme: kind,
        premises,
        conclusion,
        critical_questions: scheme.critical_questions.clone(),
        persona_id: persona.id.clone(),
        focus_activities: focus.iter().map(|a| a.id.clone()).collect(),
    })
}

/// Returns true when every binding of every premise resolves in `persona`
/// and every focus activity exists.
pub fn plan_is_grounded(plan: &ArgumentPlan, persona: &Persona) -> bool {
    plan.persona_id == persona.id
        && plan.focus_activities.iter().all(|id| persona.activity(id).is_some())
        && plan
            .premises
            .iter()
            .all(|p| p.bindings.values().all(|b| b.resolves_in(persona)))
}

/// One prompt of the story matrix: a dialogue type plus the scheme used for
/// it. The matrix holds two inquiry prompts, one deliberation and one
/// persuasion prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryPrompt {
    pub id: String,
    pub dialogue_type: DialogueType,
}

pub fn story_matrix_prompts() -> Vec<StoryPrompt> {
    [
        ("inquiry-1", DialogueType::Inquiry),
        ("inquiry-2", DialogueType::Inquiry),
        ("deliberation", DialogueType::Deliberation),
        ("persuasion", DialogueType::Persuasion),
    ]
    .into_iter()
    .map(|(id, dialogue_type)| StoryPrompt { id: id.into(), dialogue_type })
    .collect()
}
