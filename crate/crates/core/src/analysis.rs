//! Aggregate reports comparing human judgments with reflection scores.
//!
//! Every function here is a pure function of its input snapshot.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::argumentation::DialogueType;
use crate::evaluation::{EvaluationResponse, InconsistencyAnswer, PostStudyResponse, TriState};
use crate::generation::CreativityLevel;

pub const PURPOSE_STATEMENTS: &str = include_str!("../data/purpose_statements.toml");

pub const DEFAULT_PERMUTATIONS: usize = 10_000;
pub const DEFAULT_PERMUTATION_SEED: u64 = 0x5EED;
pub const DEFAULT_LOW_RISK_UPPER: f64 = 0.35;
pub const DEFAULT_HIGH_RISK_LOWER: f64 = 0.45;

/// Table row order: persuasion, deliberation, inquiry; low before high.
pub const CONDITION_ORDER: [(DialogueType, CreativityLevel); 6] = [
    (DialogueType::Persuasion, CreativityLevel::Low),
    (DialogueType::Persuasion, CreativityLevel::High),
    (DialogueType::Deliberation, CreativityLevel::Low),
    (DialogueType::Deliberation, CreativityLevel::High),
    (DialogueType::Inquiry, CreativityLevel::Low),
    (DialogueType::Inquiry, CreativityLevel::High),
];

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("unknown purpose statement id '{0}'")]
    UnknownStatementId(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid purpose statements: {0}")]
    InvalidStatements(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurposeStatement {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub mapped_type: Option<DialogueType>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurposeStatements {
    #[serde(rename = "statement")]
    pub statements: Vec<PurposeStatement>,
}

impl PurposeStatements {
    pub fn parse(text: &str) -> Result<Self, AnalysisError> {
        let parsed: PurposeStatements =
            toml::from_str(text).map_err(|e| AnalysisError::InvalidStatements(e.to_string()))?;
        parsed.check()?;
        Ok(parsed)
    }

    fn check(&self) -> Result<(), AnalysisError> {
        let mut ids = BTreeSet::new();
        for s in &self.statements {
            if !ids.insert(&s.id) {
                return Err(AnalysisError::InvalidStatements(format!("duplicate id '{}'", s.id)));
            }
        }
        for t in DialogueType::ALL {
            if !self.statements.iter().any(|s| s.mapped_type == Some(t)) {
                return Err(AnalysisError::InvalidStatements(format!("no statement for {t}")));
            }
        }
        let open = self.statements.iter().filter(|s| s.mapped_type.is_none()).count();
        if open != 1 {
            return Err(AnalysisError::InvalidStatements(format!(
                "expected exactly one open option, found {open}"
            )));
        }
        Ok(())
    }

    /// Mapped type of a statement id; `Ok(None)` for the open option.
    pub fn mapped_type(&self, id: &str) -> Result<Option<DialogueType>, AnalysisError> {
        self.statements
            .iter()
            .find(|s| s.id == id)
            .map(|s| s.mapped_type)
            .ok_or_else(|| AnalysisError::UnknownStatementId(id.to_string()))
    }
}

pub fn fixture_statements() -> PurposeStatements {
    PurposeStatements::parse(PURPOSE_STATEMENTS).expect("bundled purpose statements are valid")
}

/// An evaluation joined with the story it rates and that story's current
/// reflection scores, when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinedEvaluation {
    pub evaluation: EvaluationResponse,
    pub persona_id: String,
    pub dialogue_type: DialogueType,
    pub creativity: CreativityLevel,
    pub prompt_id: String,
    pub q_final: Option<f64>,
    pub h_final: Option<f64>,
}

/// A story with finished reflection scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredStory {
    pub narrative_id: String,
    pub persona_id: String,
    pub dialogue_type: DialogueType,
    pub creativity: CreativityLevel,
    pub q_final: f64,
    pub h_final: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assessment {
    pub respondent_id: String,
    pub dialogue_type: DialogueType,
    pub creativity: CreativityLevel,
    pub narrative_ids: Vec<String>,
    pub purpose_selections: BTreeSet<String>,
    /// Set once two inquiry assessments have been collapsed into this one.
    pub merged: bool,
}

impl From<&JoinedEvaluation> for Assessment {
    fn from(j: &JoinedEvaluation) -> Self {
        Assessment {
            respondent_id: j.evaluation.respondent_id.clone(),
            dialogue_type: j.dialogue_type,
            creativity: j.creativity,
            narrative_ids: vec![j.evaluation.narrative_id.clone()],
            purpose_selections: j.evaluation.purpose_selections.clone(),
            merged: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeOutcome {
    pub assessments: Vec<Assessment>,
    pub warnings: Vec<String>,
}

fn assessment_order(a: &Assessment, b: &Assessment) -> std::cmp::Ordering {
    (&a.respondent_id, a.dialogue_type, a.creativity, &a.narrative_ids).cmp(&(
        &b.respondent_id,
        b.dialogue_type,
        b.creativity,
        &b.narrative_ids,
    ))
}

/// Collapses the inquiry assessments of each (respondent, creativity) pair
/// into one whose selections are the union. Unpaired inquiry assessments
/// pass through unmerged with a warning.
pub fn merge_inquiry(assessments: &[Assessment]) -> MergeOutcome {
    let mut out = Vec::with_capacity(assessments.len());
    let mut groups: BTreeMap<(String, CreativityLevel), Vec<&Assessment>> = BTreeMap::new();
    for a in assessments {
        if a.dialogue_type == DialogueType::Inquiry && !a.merged {
            groups.entry((a.respondent_id.clone(), a.creativity)).or_default().push(a);
        } else {
            out.push(a.clone());
        }
    }
    let mut warnings = Vec::new();
    for ((respondent, creativity), members) in groups {
        if members.len() == 1 {
            warnings.push(format!(
                "respondent {respondent}: only one inquiry assessment at {creativity} creativity"
            ));
            out.push(members[0].clone());
            continue;
        }
        if members.len() > 2 {
            warnings.push(format!(
                "respondent {respondent}: {} inquiry assessments at {creativity} creativity merged into one",
                members.len()
            ));
        }
        let mut narrative_ids: Vec<String> =
            members.iter().flat_map(|m| m.narrative_ids.iter().cloned()).collect();
        narrative_ids.sort();
        out.push(Assessment {
            respondent_id: respondent,
            dialogue_type: DialogueType::Inquiry,
            creativity,
            narrative_ids,
            purpose_selections: members
                .iter()
                .flat_map(|m| m.purpose_selections.iter().cloned())
                .collect(),
            merged: true,
        });
    }
    out.sort_by(assessment_order);
    MergeOutcome { assessments: out, warnings }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionCell {
    pub dialogue_type: DialogueType,
    pub creativity: CreativityLevel,
    pub assessments: usize,
    pub recognized: usize,
    pub rate: f64,
}

fn recognizes(a: &Assessment, statements: &PurposeStatements) -> Result<bool, AnalysisError> {
    let mut hit = false;
    for id in &a.purpose_selections {
        hit |= statements.mapped_type(id)? == Some(a.dialogue_type);
    }
    Ok(hit)
}

/// Share of assessments per condition selecting at least one statement
/// mapped to the story's own dialogue type. Empty conditions are omitted.
pub fn recognition_rate(
    assessments: &[Assessment],
    statements: &PurposeStatements,
) -> Result<Vec<RecognitionCell>, AnalysisError> {
    let mut cells = Vec::new();
    for (dt, cr) in CONDITION_ORDER {
        let mut n = 0;
        let mut hits = 0;
        for a in assessments.iter().filter(|a| a.dialogue_type == dt && a.creativity == cr) {
            n += 1;
            hits += usize::from(recognizes(a, statements)?);
        }
        if n > 0 {
            cells.push(RecognitionCell {
                dialogue_type: dt,
                creativity: cr,
                assessments: n,
                recognized: hits,
                rate: hits as f64 / n as f64,
            });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurposeRow {
    pub dialogue_type: DialogueType,
    pub creativity: CreativityLevel,
    pub assessments: usize,
    pub no_clear: usize,
    pub intended: usize,
    pub other: usize,
    pub total_instances: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurposeTable {
    pub rows: Vec<PurposeRow>,
    pub total_assessments: usize,
    pub no_clear_assessments: usize,
    pub intended_assessments: usize,
    pub other_assessments: usize,
    pub intended_instances: usize,
    pub other_instances: usize,
    pub total_instances: usize,
}

/// Assessment-level counts (whether a category occurs at least once in an
/// assessment) and instance-level counts (individual selections). The open
/// option counts as "other".
pub fn purpose_table(
    assessments: &[Assessment],
    statements: &PurposeStatements,
) -> Result<PurposeTable, AnalysisError> {
    let mut rows = Vec::new();
    let (mut intended_instances, mut other_instances) = (0, 0);
    for (dt, cr) in CONDITION_ORDER {
        let mut row = PurposeRow {
            dialogue_type: dt,
            creativity: cr,
            assessments: 0,
            no_clear: 0,
            intended: 0,
            other: 0,
            total_instances: 0,
        };
        for a in assessments.iter().filter(|a| a.dialogue_type == dt && a.creativity == cr) {
            row.assessments += 1;
            if a.purpose_selections.is_empty() {
                row.no_clear += 1;
                continue;
            }
            let (mut hit, mut other) = (0, 0);
            for id in &a.purpose_selections {
                if statements.mapped_type(id)? == Some(dt) {
                    hit += 1;
                } else {
                    other += 1;
                }
            }
            row.intended += usize::from(hit > 0);
            row.other += usize::from(other > 0);
            row.total_instances += hit + other;
            intended_instances += hit;
            other_instances += other;
        }
        if row.assessments > 0 {
            rows.push(row);
        }
    }
    Ok(PurposeTable {
        total_assessments: rows.iter().map(|r| r.assessments).sum(),
        no_clear_assessments: rows.iter().map(|r| r.no_clear).sum(),
        intended_assessments: rows.iter().map(|r| r.intended).sum(),
        other_assessments: rows.iter().map(|r| r.other).sum(),
        total_instances: intended_instances + other_instances,
        intended_instances,
        other_instances,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionAggregate {
    pub dialogue_type: DialogueType,
    pub creativity: CreativityLevel,
    pub mean_quality: f64,
    pub mean_hallucination: f64,
    pub n: usize,
}

pub fn condition_aggregates(stories: &[ScoredStory]) -> Vec<ConditionAggregate> {
    CONDITION_ORDER
        .iter()
        .filter_map(|(dt, cr)| {
            let cell: Vec<&ScoredStory> = stories
                .iter()
                .filter(|s| s.dialogue_type == *dt && s.creativity == *cr)
                .collect();
            if cell.is_empty() {
                return None;
            }
            let n = cell.len() as f64;
            Some(ConditionAggregate {
                dialogue_type: *dt,
                creativity: *cr,
                mean_quality: cell.iter().map(|s| s.q_final).sum::<f64>() / n,
                mean_hallucination: cell.iter().map(|s| s.h_final).sum::<f64>() / n,
                n: cell.len(),
            })
        })
        .collect()
}

/// Median; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    })
}

/// 1-based ranks; tied values share the mean of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho as the Pearson correlation of average ranks. `None` when
/// fewer than two pairs or either variable is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    if x.len() < 2 {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Two-sided permutation p-value for Spearman's rho: the share of seeded
/// shuffles of `y` whose |rho| reaches the observed |rho|, with the usual
/// +1 correction.
pub fn permutation_p_value(x: &[f64], y: &[f64], iterations: usize, seed: u64) -> Option<f64> {
    let observed = spearman(x, y)?.abs();
    let rx = average_ranks(x);
    let mut ry = average_ranks(y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    for _ in 0..iterations {
        ry.shuffle(&mut rng);
        let rho = pearson(&rx, &ry).unwrap_or(0.0).abs();
        if rho >= observed - 1e-12 {
            extreme += 1;
        }
    }
    Some((extreme + 1) as f64 / (iterations + 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InconsistencyRiskReport {
    pub median_risk_noticed: Option<f64>,
    pub median_risk_not_noticed: Option<f64>,
    pub n_noticed: usize,
    pub n_other: usize,
    /// Evaluations with inconsistency = yes and a disturbance rating.
    pub n_correlation: usize,
    pub spearman_rho: Option<f64>,
    pub permutation_p: Option<f64>,
    pub permutation_iterations: usize,
}

pub fn risk_by_inconsistency(
    evaluations: &[JoinedEvaluation],
    iterations: usize,
    seed: u64,
) -> Result<InconsistencyRiskReport, AnalysisError> {
    let scored: Vec<(&JoinedEvaluation, f64)> =
        evaluations.iter().filter_map(|e| e.h_final.map(|h| (e, h))).collect();
    if scored.is_empty() {
        return Err(AnalysisError::InsufficientData(
            "no evaluations joined to a finished reflection".into(),
        ));
    }
    let noticed: Vec<f64> = scored
        .iter()
        .filter(|(e, _)| e.evaluation.inconsistency == InconsistencyAnswer::Yes)
        .map(|(_, h)| *h)
        .collect();
    let other: Vec<f64> = scored
        .iter()
        .filter(|(e, _)| e.evaluation.inconsistency != InconsistencyAnswer::Yes)
        .map(|(_, h)| *h)
        .collect();
    let (risk, disturbance): (Vec<f64>, Vec<f64>) = scored
        .iter()
        .filter(|(e, _)| e.evaluation.inconsistency == InconsistencyAnswer::Yes)
        .filter_map(|(e, h)| e.evaluation.disturbance.map(|d| (*h, f64::from(d))))
        .unzip();
    let spearman_rho = if risk.len() >= 2 { spearman(&risk, &disturbance) } else { None };
    let permutation_p = spearman_rho.and_then(|_| permutation_p_value(&risk, &disturbance, iterations, seed));
    Ok(InconsistencyRiskReport {
        median_risk_noticed: median(&noticed),
        median_risk_not_noticed: median(&other),
        n_noticed: noticed.len(),
        n_other: other.len(),
        n_correlation: risk.len(),
        spearman_rho,
        permutation_p,
        permutation_iterations: iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinThresholds {
    /// Upper bound (exclusive) of the low bin.
    pub low_upper: f64,
    /// Lower bound (inclusive) of the high bin.
    pub high_lower: f64,
}

impl Default for BinThresholds {
    fn default() -> Self {
        BinThresholds {
            low_upper: DEFAULT_LOW_RISK_UPPER,
            high_lower: DEFAULT_HIGH_RISK_LOWER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskBin {
    Low,
    Medium,
    High,
}

impl RiskBin {
    pub const ALL: [RiskBin; 3] = [Self::Low, Self::Medium, Self::High];

    pub fn of(h: f64, t: BinThresholds) -> RiskBin {
        if h < t.low_upper {
            RiskBin::Low
        } else if h < t.high_lower {
            RiskBin::Medium
        } else {
            RiskBin::High
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Low => "low",
            Self::Medium => "medium",
            Self::High => "high",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskBinRow {
    pub bin: RiskBin,
    pub n: usize,
    pub inconsistent: usize,
    pub proportion: Option<f64>,
    pub standard_error: Option<f64>,
}

/// Share of evaluations judged inconsistent per hallucination-risk bin,
/// with the binomial standard error sqrt(p(1-p)/n).
pub fn bin_risk(evaluations: &[JoinedEvaluation], thresholds: BinThresholds) -> Vec<RiskBinRow> {
    RiskBin::ALL
        .iter()
        .map(|bin| {
            let members: Vec<&JoinedEvaluation> = evaluations
                .iter()
                .filter(|e| e.h_final.is_some_and(|h| RiskBin::of(h, thresholds) == *bin))
                .collect();
            let n = members.len();
            let inconsistent = members
                .iter()
                .filter(|e| e.evaluation.inconsistency == InconsistencyAnswer::Yes)
                .count();
            let proportion = (n > 0).then(|| inconsistent as f64 / n as f64);
            RiskBinRow {
                bin: *bin,
                n,
                inconsistent,
                proportion,
                standard_error: proportion.map(|p| (p * (1.0 - p) / n as f64).sqrt()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossTabRow {
    pub future_use: TriState,
    pub relatable_yes: usize,
    pub relatable_maybe: usize,
    pub relatable_no: usize,
    pub total: usize,
}

/// Future-use intention against cultural relatability, one row per answer.
pub fn future_use_crosstab(responses: &[PostStudyResponse]) -> Vec<CrossTabRow> {
    TriState::ALL
        .iter()
        .map(|fu| {
            let rows: Vec<&PostStudyResponse> = responses.iter().filter(|r| r.future_use == *fu).collect();
            let count = |t: TriState| rows.iter().filter(|r| r.cultural_relatability == t).count();
            CrossTabRow {
                future_use: *fu,
                relatable_yes: count(TriState::Yes),
                relatable_maybe: count(TriState::Maybe),
                relatable_no: count(TriState::No),
                total: rows.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FutureUseSummaryRow {
    pub future_use: TriState,
    pub n: usize,
    /// Respondents with at least one purpose selection over all their
    /// evaluations, in percent.
    pub purpose_pct: Option<f64>,
    pub median_relatedness: Option<f64>,
    /// Respondents answering yes or maybe on cultural relatability, percent.
    pub cultural_fit_pct: Option<f64>,
}

pub fn future_use_summary(
    responses: &[PostStudyResponse],
    evaluations: &[JoinedEvaluation],
) -> Vec<FutureUseSummaryRow> {
    let mut any_purpose: HashMap<&str, bool> = HashMap::new();
    for e in evaluations {
        *any_purpose.entry(e.evaluation.respondent_id.as_str()).or_default() |=
            !e.evaluation.purpose_selections.is_empty();
    }
    TriState::ALL
        .iter()
        .map(|fu| {
            let group: Vec<&PostStudyResponse> = responses.iter().filter(|r| r.future_use == *fu).collect();
            let n = group.len();
            let pct = |k: usize| (n > 0).then(|| 100.0 * k as f64 / n as f64);
            let with_purpose = group
                .iter()
                .filter(|r| any_purpose.get(r.respondent_id.as_str()).copied().unwrap_or(false))
                .count();
            let fit = group.iter().filter(|r| r.cultural_relatability != TriState::No).count();
            let relatedness: Vec<f64> = group.iter().map(|r| f64::from(r.persona_relatedness)).collect();
            FutureUseSummaryRow {
                future_use: *fu,
                n,
                purpose_pct: pct(with_purpose),
                median_relatedness: median(&relatedness),
                cultural_fit_pct: pct(fit),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub permutation_iterations: usize,
    pub permutation_seed: u64,
    pub bins: BinThresholds,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            permutation_iterations: DEFAULT_PERMUTATIONS,
            permutation_seed: DEFAULT_PERMUTATION_SEED,
            bins: BinThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisInput {
    pub evaluations: Vec<JoinedEvaluation>,
    pub stories: Vec<ScoredStory>,
    pub post_study: Vec<PostStudyResponse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub total_evaluations: usize,
    pub merged_assessments: usize,
    pub purpose_table: PurposeTable,
    pub recognition: Vec<RecognitionCell>,
    pub condition_scores: Vec<ConditionAggregate>,
    pub inconsistency_risk: Option<InconsistencyRiskReport>,
    pub risk_bins: Vec<RiskBinRow>,
    pub future_use_crosstab: Vec<CrossTabRow>,
    pub future_use_summary: Vec<FutureUseSummaryRow>,
    pub warnings: Vec<String>,
}

pub fn build_report(
    input: &AnalysisInput,
    statements: &PurposeStatements,
    config: &AnalysisConfig,
) -> Result<AnalysisReport, AnalysisError> {
    let raw: Vec<Assessment> = input.evaluations.iter().map(Assessment::from).collect();
    let merged = merge_inquiry(&raw);
    let mut warnings = merged.warnings.clone();
    let inconsistency_risk = match risk_by_inconsistency(
        &input.evaluations,
        config.permutation_iterations,
        config.permutation_seed,
    ) {
        Ok(r) => Some(r),
        Err(AnalysisError::InsufficientData(msg)) => {
            warnings.push(format!("inconsistency risk not computed: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    Ok(AnalysisReport {
        total_evaluations: input.evaluations.len(),
        merged_assessments: merged.assessments.len(),
        purpose_table: purpose_table(&merged.assessments, statements)?,
        recognition: recognition_rate(&merged.assessments, statements)?,
        condition_scores: condition_aggregates(&input.stories),
        inconsistency_risk,
        risk_bins: bin_risk(&input.evaluations, config.bins),
        future_use_crosstab: future_use_crosstab(&input.post_study),
        future_use_summary: future_use_summary(&input.post_study, &input.evaluations),
        warnings,
    })
}

/// Names of the delimited tables emitted by [`report_tables`].
pub const TABLE_NAMES: [&str; 6] = [
    "purpose_recognition",
    "condition_scores",
    "inconsistency_risk",
    "risk_bins",
    "future_use_cultural",
    "future_use_summary",
];

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3}")).unwrap_or_default()
}

fn pct(num: usize, den: usize) -> String {
    if den == 0 {
        format!("{num}/0")
    } else {
        format!("{num}/{den} ({:.1}%)", 100.0 * num as f64 / den as f64)
    }
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Renders one delimited table by name.
pub fn render_table(report: &AnalysisReport, name: &str) -> Option<String> {
    Some(match name {
        "purpose_recognition" => {
            let t = &report.purpose_table;
            let mut rows: Vec<Vec<String>> = t
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.dialogue_type.to_string(),
                        r.creativity.to_string(),
                        r.no_clear.to_string(),
                        r.intended.to_string(),
                        r.other.to_string(),
                        r.total_instances.to_string(),
                    ]
                })
                .collect();
            rows.push(vec![
                "summary (assessment-level)".into(),
                String::new(),
                pct(t.no_clear_assessments, t.total_assessments),
                pct(t.intended_assessments, t.total_assessments),
                pct(t.other_assessments, t.total_assessments),
                "-".into(),
            ]);
            rows.push(vec![
                "summary (instance-level)".into(),
                String::new(),
                pct(0, t.total_instances),
                pct(t.intended_instances, t.total_instances),
                pct(t.other_instances, t.total_instances),
                t.total_instances.to_string(),
            ]);
            csv_string(
                &["type", "creativity", "no_clear_purpose", "intended_purpose", "other_purpose", "total_instances"],
                rows,
            )
        }
        "condition_scores" => csv_string(
            &["dialogue_type", "creativity", "mean_quality", "mean_hallucination", "n"],
            report
                .condition_scores
                .iter()
                .map(|c| {
                    vec![
                        c.dialogue_type.to_string(),
                        c.creativity.to_string(),
                        format!("{:.3}", c.mean_quality),
                        format!("{:.3}", c.mean_hallucination),
                        c.n.to_string(),
                    ]
                })
                .collect(),
        ),
        "inconsistency_risk" => {
            let rows = match &report.inconsistency_risk {
                Some(r) => vec![
                    vec!["inconsistency noticed (yes)".into(), fmt_opt(r.median_risk_noticed), r.n_noticed.to_string()],
                    vec!["not noticed / not sure".into(), fmt_opt(r.median_risk_not_noticed), r.n_other.to_string()],
                    vec![
                        format!("spearman rho (risk vs disturbance, n={})", r.n_correlation),
                        fmt_opt(r.spearman_rho),
                        format!("p={}", fmt_opt(r.permutation_p)),
                    ],
                ],
                None => vec![],
            };
            csv_string(&["participant_reported_inconsistency", "median_am_risk", "n_evaluations"], rows)
        }
        "risk_bins" => csv_string(
            &["bin", "n", "inconsistent", "proportion", "standard_error"],
            report
                .risk_bins
                .iter()
                .map(|b| {
                    vec![
                        b.bin.as_str().into(),
                        b.n.to_string(),
                        b.inconsistent.to_string(),
                        fmt_opt(b.proportion),
                        fmt_opt(b.standard_error),
                    ]
                })
                .collect(),
        ),
        "future_use_cultural" => {
            let mut rows: Vec<Vec<String>> = report
                .future_use_crosstab
                .iter()
                .map(|r| {
                    vec![
                        r.future_use.as_str().into(),
                        r.relatable_yes.to_string(),
                        r.relatable_maybe.to_string(),
                        r.relatable_no.to_string(),
                        r.total.to_string(),
                    ]
                })
                .collect();
            let sum = |f: fn(&CrossTabRow) -> usize| report.future_use_crosstab.iter().map(f).sum::<usize>().to_string();
            rows.push(vec![
                "total".into(),
                sum(|r| r.relatable_yes),
                sum(|r| r.relatable_maybe),
                sum(|r| r.relatable_no),
                sum(|r| r.total),
            ]);
            csv_string(
                &["future_use", "relatable_yes", "relatable_maybe", "relatable_no", "total"],
                rows,
            )
        }
        "future_use_summary" => csv_string(
            &["future_use", "n", "purpose_pct", "median_relatedness", "cultural_fit_pct"],
            report
                .future_use_summary
                .iter()
                .map(|r| {
                    vec![
                        r.future_use.as_str().into(),
                        r.n.to_string(),
                        r.purpose_pct.map(|v| format!("{v:.0}")).unwrap_or_default(),
                        r.median_relatedness.map(|v| format!("{v:.1}")).unwrap_or_default(),
                        r.cultural_fit_pct.map(|v| format!("{v:.0}")).unwrap_or_default(),
                    ]
                })
                .collect(),
        ),
        _ => return None,
    })
}

pub fn report_tables(report: &AnalysisReport) -> Vec<(&'static str, String)> {
    TABLE_NAMES
        .iter()
        .map(|name| (*name, render_table(report, name).expect("known table")))
        .collect()
}
