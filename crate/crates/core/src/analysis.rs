//! Builds the statistical analysis document over one or more result sets:
//! model-pair paired t-tests, perturbation-type ANOVA with Tukey HSD pairs,
//! the severity L1-vs-L5 paired t-test, and the 4x4 metric correlation
//! matrix.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{PerturbationKind, RunRecord};
use crate::harness::ResultSet;
use crate::stats::{
    one_way_anova, paired_t_test, pearson, tukey_hsd, StatsError, TestReport, TukeyPair,
};

pub const METRIC_NAMES: [&str; 4] = ["semantic", "keyword", "structural", "length"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub model_a: String,
    pub model_b: String,
    /// Paired over shared (user, kind, severity) triples.
    pub n_pairs: usize,
    pub report: TestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyComparison {
    pub kind_a: PerturbationKind,
    pub kind_b: PerturbationKind,
    pub pair: TukeyPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDoc {
    pub config_fingerprints: Vec<String>,
    pub record_count: usize,
    pub model_t_tests: Vec<ModelComparison>,
    pub perturbation_anova: Option<TestReport>,
    pub tukey_pairs: Vec<TukeyComparison>,
    /// L1 vs L5 aggregates paired over (model, user, kind).
    pub severity_t_test: Option<TestReport>,
    /// Pearson matrix over the four metric components; `None` cells mark
    /// undefined correlations (constant columns).
    pub metric_correlations: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no records to analyze")]
    Empty,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

fn triple_key(record: &RunRecord) -> (String, PerturbationKind, u8) {
    (record.user_id.clone(), record.spec.kind, record.spec.severity)
}

/// Runs every analysis that the available data supports. Sections that need
/// more structure (a second model, both L1 and L5, >= 2 kinds) are `None` or
/// empty when the data cannot support them.
pub fn analyze(results: &[ResultSet]) -> Result<AnalysisDoc, AnalysisError> {
    let records: Vec<&RunRecord> = results.iter().flat_map(|r| r.records.iter()).collect();
    if records.is_empty() {
        return Err(AnalysisError::Empty);
    }

    // Group by model, keyed maps for pairing.
    let mut by_model: BTreeMap<&str, BTreeMap<(String, PerturbationKind, u8), f64>> =
        BTreeMap::new();
    for record in &records {
        by_model
            .entry(record.model_id.as_str())
            .or_default()
            .insert(triple_key(record), record.scores.aggregate);
    }

    let models: Vec<&str> = by_model.keys().copied().collect();
    let mut model_t_tests = Vec::new();
    for i in 0..models.len() {
        for j in (i + 1)..models.len() {
            let a = &by_model[models[i]];
            let b = &by_model[models[j]];
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (key, value) in a {
                if let Some(other) = b.get(key) {
                    xs.push(*value);
                    ys.push(*other);
                }
            }
            if xs.len() >= 2 {
                model_t_tests.push(ModelComparison {
                    model_a: models[i].to_string(),
                    model_b: models[j].to_string(),
                    n_pairs: xs.len(),
                    report: paired_t_test(&xs, &ys)?,
                });
            }
        }
    }

    // ANOVA + Tukey across perturbation types.
    let mut by_kind: BTreeMap<PerturbationKind, Vec<f64>> = BTreeMap::new();
    for record in &records {
        by_kind.entry(record.spec.kind).or_default().push(record.scores.aggregate);
    }
    let kinds: Vec<PerturbationKind> = by_kind.keys().copied().collect();
    let groups: Vec<Vec<f64>> = by_kind.values().cloned().collect();
    let anova_ok = groups.len() >= 2 && groups.iter().all(|g| g.len() >= 2);
    let perturbation_anova = if anova_ok { one_way_anova(&groups).ok() } else { None };
    let tukey_pairs = if anova_ok && perturbation_anova.is_some() && groups.len() <= 10 {
        match tukey_hsd(&groups, 0.05) {
            Ok(pairs) => pairs
                .into_iter()
                .map(|pair| TukeyComparison {
                    kind_a: kinds[pair.group_a],
                    kind_b: kinds[pair.group_b],
                    pair,
                })
                .collect(),
            Err(_) => Vec::new(),
        }
    } else {
        Vec::new()
    };

    // Severity L1 vs L5, paired over (model, user, kind).
    let mut l1: BTreeMap<(String, String, PerturbationKind), f64> = BTreeMap::new();
    let mut l5: BTreeMap<(String, String, PerturbationKind), f64> = BTreeMap::new();
    for record in &records {
        let key = (record.model_id.clone(), record.user_id.clone(), record.spec.kind);
        match record.spec.severity {
            1 => {
                l1.insert(key, record.scores.aggregate);
            }
            5 => {
                l5.insert(key, record.scores.aggregate);
            }
            _ => {}
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (key, value) in &l1 {
        if let Some(other) = l5.get(key) {
            xs.push(*value);
            ys.push(*other);
        }
    }
    let severity_t_test = if xs.len() >= 2 { paired_t_test(&xs, &ys).ok() } else { None };

    // 4x4 metric Pearson matrix.
    let columns: [Vec<f64>; 4] = [
        records.iter().map(|r| r.scores.semantic).collect(),
        records.iter().map(|r| r.scores.keyword).collect(),
        records.iter().map(|r| r.scores.structural).collect(),
        records.iter().map(|r| r.scores.length).collect(),
    ];
    let mut metric_correlations = vec![vec![None; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            metric_correlations[i][j] = if i == j {
                Some(1.0)
            } else {
                pearson(&columns[i], &columns[j]).ok()
            };
        }
    }

    Ok(AnalysisDoc {
        config_fingerprints: results.iter().map(|r| r.config_fingerprint.clone()).collect(),
        record_count: records.len(),
        model_t_tests,
        perturbation_anova,
        tukey_pairs,
        severity_t_test,
        metric_correlations,
    })
}
