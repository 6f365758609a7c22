//! Shared data model: catalog, user histories, perturbation specs, scores.
//!
//! All types here are immutable value objects and safe to share across
//! worker threads. Optional interaction fields use `Option`, never sentinel
//! values, so a removed field is distinguishable from any real value.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A catalog item with a category and a few short feature descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub name: String,
    pub category: String,
    pub features: Vec<String>,
}

/// The synthetic item universe: the sampling space for noise, dilution
/// and drift perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub categories: Vec<String>,
    pub items: Vec<Item>,
}

impl Catalog {
    pub fn item(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Items grouped by category label.
    pub fn items_by_category(&self) -> HashMap<&str, Vec<&Item>> {
        let mut map: HashMap<&str, Vec<&Item>> = HashMap::new();
        for item in &self.items {
            map.entry(item.category.as_str()).or_default().push(item);
        }
        map
    }
}

/// One entry of a user's interaction history. `item_id` is always present;
/// the metadata fields can be removed by the missing-values perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub item_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamp: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub category: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rating: Option<f64>,
}

/// A user and their interaction history in canonical temporal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: String,
    pub interactions: Vec<Interaction>,
}

impl UserProfile {
    /// Modal interaction category; ties broken by ascending label. Categories
    /// stripped by the missing-values perturbation are resolved through the
    /// catalog via `item_id`.
    pub fn dominant_category(&self, catalog: &Catalog) -> Option<String> {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for interaction in &self.interactions {
            if let Some(cat) = interaction_category(interaction, catalog) {
                *counts.entry(cat).or_insert(0) += 1;
            }
        }
        counts
            .into_iter()
            .max_by(|(la, ca), (lb, cb)| ca.cmp(cb).then_with(|| lb.cmp(la)))
            .map(|(label, _)| label)
    }
}

/// Category of one interaction, falling back to the catalog when the field
/// was removed by a perturbation.
pub fn interaction_category(interaction: &Interaction, catalog: &Catalog) -> Option<String> {
    interaction
        .category
        .clone()
        .or_else(|| catalog.item(&interaction.item_id).map(|i| i.category.clone()))
}

/// The five perturbation operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    Noise,
    Shuffle,
    Dilution,
    Drift,
    Missing,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 5] = [
        PerturbationKind::Noise,
        PerturbationKind::Shuffle,
        PerturbationKind::Dilution,
        PerturbationKind::Drift,
        PerturbationKind::Missing,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PerturbationKind::Noise => "noise",
            PerturbationKind::Shuffle => "shuffle",
            PerturbationKind::Dilution => "dilution",
            PerturbationKind::Drift => "drift",
            PerturbationKind::Missing => "missing",
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerturbationKind {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "noise" => Ok(PerturbationKind::Noise),
            "shuffle" => Ok(PerturbationKind::Shuffle),
            "dilution" | "dilute" => Ok(PerturbationKind::Dilution),
            "drift" => Ok(PerturbationKind::Drift),
            "missing" => Ok(PerturbationKind::Missing),
            other => Err(DomainError::UnknownKind(other.to_string())),
        }
    }
}

/// Fully determines one perturbation application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub severity: u8,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind, severity: u8, seed: u64) -> Result<Self, DomainError> {
        if !(1..=5).contains(&severity) {
            return Err(DomainError::InvalidSeverity(severity));
        }
        Ok(Self { kind, severity, seed })
    }
}

/// Normalized weights for the four stability metrics. Construction enforces
/// the unit-sum constraint, so a bad weights value is unrepresentable
/// downstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct MetricWeights {
    w_sem: f64,
    w_key: f64,
    w_struct: f64,
    w_len: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawWeights {
    w_sem: f64,
    w_key: f64,
    w_struct: f64,
    w_len: f64,
}

impl TryFrom<RawWeights> for MetricWeights {
    type Error = DomainError;

    fn try_from(raw: RawWeights) -> Result<Self, Self::Error> {
        MetricWeights::new(raw.w_sem, raw.w_key, raw.w_struct, raw.w_len)
    }
}

impl From<MetricWeights> for RawWeights {
    fn from(w: MetricWeights) -> Self {
        RawWeights {
            w_sem: w.w_sem,
            w_key: w.w_key,
            w_struct: w.w_struct,
            w_len: w.w_len,
        }
    }
}

impl MetricWeights {
    pub fn new(w_sem: f64, w_key: f64, w_struct: f64, w_len: f64) -> Result<Self, DomainError> {
        let values = [w_sem, w_key, w_struct, w_len];
        if values.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(DomainError::InvalidWeights("weights must be finite and non-negative".into()));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DomainError::InvalidWeights(format!(
                "weights must sum to 1, got {sum}"
            )));
        }
        Ok(Self { w_sem, w_key, w_struct, w_len })
    }

    pub fn semantic(&self) -> f64 {
        self.w_sem
    }

    pub fn keyword(&self) -> f64 {
        self.w_key
    }

    pub fn structural(&self) -> f64 {
        self.w_struct
    }

    pub fn length(&self) -> f64 {
        self.w_len
    }
}

impl Default for MetricWeights {
    /// Semantic gets the highest weight, keyword second, the two surface
    /// metrics share the rest.
    fn default() -> Self {
        MetricWeights::new(0.40, 0.30, 0.15, 0.15).expect("default weights sum to 1")
    }
}

/// The four metric components plus their weighted aggregate, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub semantic: f64,
    pub keyword: f64,
    pub structural: f64,
    pub length: f64,
    pub aggregate: f64,
}

impl MetricScores {
    pub fn from_components(
        semantic: f64,
        keyword: f64,
        structural: f64,
        length: f64,
        weights: &MetricWeights,
    ) -> Self {
        let aggregate = weights.semantic() * semantic
            + weights.keyword() * keyword
            + weights.structural() * structural
            + weights.length() * length;
        MetricScores { semantic, keyword, structural, length, aggregate }
    }
}

/// One evaluated explanation pair with full provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model_id: String,
    pub user_id: String,
    pub item_id: String,
    pub spec: PerturbationSpec,
    pub original_text: String,
    pub perturbed_text: String,
    pub scores: MetricScores,
}

/// The canonical on-disk dataset: `{"categories": [...], "items": [...], "users": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub categories: Vec<String>,
    pub items: Vec<Item>,
    pub users: Vec<UserProfile>,
}

impl Dataset {
    pub fn new(catalog: Catalog, users: Vec<UserProfile>) -> Self {
        Dataset { categories: catalog.categories, items: catalog.items, users }
    }

    pub fn catalog(&self) -> Catalog {
        Catalog { categories: self.categories.clone(), items: self.items.clone() }
    }

    pub fn load(path: &Path) -> Result<Self, DomainError> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| DomainError::Io(path.display().to_string(), e.to_string()))?;
        serde_json::from_str(&data).map_err(|e| DomainError::Parse(path.display().to_string(), e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), DomainError> {
        let json = serde_json::to_string_pretty(self).expect("dataset serializes");
        std::fs::write(path, json)
            .map_err(|e| DomainError::Io(path.display().to_string(), e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("unknown perturbation kind: {0}")]
    UnknownKind(String),
    #[error("severity must be in 1..=5, got {0}")]
    InvalidSeverity(u8),
    #[error("invalid metric weights: {0}")]
    InvalidWeights(String),
    #[error("io error on {0}: {1}")]
    Io(String, String),
    #[error("failed to parse {0}: {1}")]
    Parse(String, String),
}

/// Checks a profile against the interaction invariants and referential
/// integrity with the catalog. Violations are data, not failures.
pub fn validate_profile(profile: &UserProfile, catalog: &Catalog) -> Vec<String> {
    let mut violations = Vec::new();
    for (idx, interaction) in profile.interactions.iter().enumerate() {
        if catalog.item(&interaction.item_id).is_none() {
            violations.push(format!(
                "interaction {idx}: dangling item_id {:?}",
                interaction.item_id
            ));
        }
        if let Some(ts) = interaction.timestamp {
            if ts < 0 {
                violations.push(format!("interaction {idx}: negative timestamp {ts}"));
            }
        }
        if let Some(rating) = interaction.rating {
            if !(1.0..=5.0).contains(&rating) {
                violations.push(format!("interaction {idx}: rating out of range ({rating})"));
            }
        }
        if let Some(cat) = &interaction.category {
            if !catalog.categories.contains(cat) {
                violations.push(format!("interaction {idx}: unknown category {cat:?}"));
            }
        }
    }
    violations
}
