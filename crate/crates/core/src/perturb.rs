//! The five perturbation operators over user interaction histories.
//!
//! Each operator is a pure function of `(history, spec, catalog)`; the seed
//! carried by the spec struct fully determines the outcome. Severity maps to a change count
//! through `round(0.1 * severity * base)`, computed in integer arithmetic
//! (round half up) so results are identical across platforms. Level 5 anchors
//! at roughly 50% of the history affected.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::random_rating;
use crate::domain::{
    interaction_category, Catalog, Interaction, PerturbationKind, PerturbationSpec, UserProfile,
};

/// A perturbed history plus a diff summary against its source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedHistory {
    pub interactions: Vec<Interaction>,
    pub provenance: PerturbationSpec,
    /// Item ids of interactions added by noise or dilution, in insertion order.
    pub injected_ids: Vec<String>,
    /// Interactions whose item was swapped by drift.
    pub replaced_count: usize,
    /// Metadata cells blanked by the missing-values operator.
    pub removed_field_count: usize,
    /// Positions included in the shuffle permutation.
    pub permuted_count: usize,
}

impl PerturbedHistory {
    fn unchanged(interactions: Vec<Interaction>, provenance: PerturbationSpec) -> Self {
        PerturbedHistory {
            interactions,
            provenance,
            injected_ids: Vec::new(),
            replaced_count: 0,
            removed_field_count: 0,
            permuted_count: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("history too short for shuffle: need at least 2 interactions, got {0}")]
    HistoryTooShort(usize),
    #[error("catalog must contain at least 2 categories with items")]
    TooFewCategories,
    #[error("no candidate items outside the dominant category")]
    NoCandidateItems,
}

/// `round(0.1 * severity * base)` with round-half-up, in integer arithmetic.
fn scaled_count(severity: u8, base: usize) -> usize {
    (severity as usize * base + 5) / 10
}

/// Additive operators never inject zero interactions.
fn additive_count(severity: u8, base: usize) -> usize {
    scaled_count(severity, base).max(1)
}

/// Dispatches to the operator selected by `spec.kind`. Never mutates the input.
pub fn apply(
    history: &UserProfile,
    spec: &PerturbationSpec,
    catalog: &Catalog,
) -> Result<PerturbedHistory, PerturbError> {
    match spec.kind {
        PerturbationKind::Noise => noise_inject(history, spec.severity, spec.seed, catalog)
            .map(|mut p| {
                p.provenance = *spec;
                p
            }),
        PerturbationKind::Shuffle => temporal_shuffle(history, spec.severity, spec.seed).map(|mut p| {
            p.provenance = *spec;
            p
        }),
        PerturbationKind::Dilution => behavior_dilute(history, spec.severity, spec.seed, catalog)
            .map(|mut p| {
                p.provenance = *spec;
                p
            }),
        PerturbationKind::Drift => category_drift(history, spec.severity, spec.seed, catalog)
            .map(|mut p| {
                p.provenance = *spec;
                p
            }),
        PerturbationKind::Missing => missing_values(history, spec.severity, spec.seed).map(|mut p| {
            p.provenance = *spec;
            p
        }),
    }
}

/// Timestamp span of the interactions that carry one. Degenerates to a single
/// point when no timestamps are present.
fn timestamp_span(interactions: &[Interaction]) -> (i64, i64) {
    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    for interaction in interactions {
        if let Some(ts) = interaction.timestamp {
            lo = lo.min(ts);
            hi = hi.max(ts);
        }
    }
    if lo > hi {
        (0, 0)
    } else {
        (lo, hi)
    }
}

/// Inserts `extra` into `base` at temporal position: before the first original
/// interaction with a later timestamp. Original relative order is preserved.
fn interleave_by_timestamp(base: &mut Vec<Interaction>, extra: Vec<Interaction>) {
    let mut sorted = extra;
    sorted.sort_by_key(|i| i.timestamp.unwrap_or(i64::MAX));
    for interaction in sorted {
        let t = interaction.timestamp.unwrap_or(i64::MAX);
        let pos = base
            .iter()
            .position(|existing| existing.timestamp.map_or(false, |ts| ts > t))
            .unwrap_or(base.len());
        base.insert(pos, interaction);
    }
}

/// Adds `max(1, round(0.1·s·|H|))` interactions with items uniform over the
/// whole catalog, timestamps uniform within the history's span.
pub fn noise_inject(
    history: &UserProfile,
    severity: u8,
    seed: u64,
    catalog: &Catalog,
) -> Result<PerturbedHistory, PerturbError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = history.interactions.len();
    let k = additive_count(severity, n);
    let (lo, hi) = timestamp_span(&history.interactions);

    let mut injected = Vec::with_capacity(k);
    let mut injected_ids = Vec::with_capacity(k);
    for _ in 0..k {
        let item = &catalog.items[rng.gen_range(0..catalog.items.len())];
        injected_ids.push(item.id.clone());
        injected.push(Interaction {
            item_id: item.id.clone(),
            timestamp: Some(rng.gen_range(lo..=hi)),
            category: Some(item.category.clone()),
            rating: Some(random_rating(&mut rng)),
        });
    }

    let mut interactions = history.interactions.clone();
    interleave_by_timestamp(&mut interactions, injected);
    Ok(PerturbedHistory {
        injected_ids,
        ..PerturbedHistory::unchanged(
            interactions,
            PerturbationSpec { kind: PerturbationKind::Noise, severity, seed },
        )
    })
}

/// Permutes the interactions at `round((s/5)·|H|)` uniformly chosen positions.
/// Timestamps travel with their interactions; the multiset is preserved.
pub fn temporal_shuffle(
    history: &UserProfile,
    severity: u8,
    seed: u64,
) -> Result<PerturbedHistory, PerturbError> {
    let n = history.interactions.len();
    if n < 2 {
        return Err(PerturbError::HistoryTooShort(n));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // round(s/5 * n), half up.
    let m = ((2 * severity as usize * n + 5) / 10).min(n);

    let mut positions = rand::seq::index::sample(&mut rng, n, m).into_vec();
    positions.sort_unstable();
    let mut selected: Vec<Interaction> = positions
        .iter()
        .map(|&p| history.interactions[p].clone())
        .collect();
    selected.shuffle(&mut rng);

    let mut interactions = history.interactions.clone();
    for (slot, interaction) in positions.into_iter().zip(selected) {
        interactions[slot] = interaction;
    }
    Ok(PerturbedHistory {
        permuted_count: m,
        ..PerturbedHistory::unchanged(
            interactions,
            PerturbationSpec { kind: PerturbationKind::Shuffle, severity, seed },
        )
    })
}

/// Adds interactions drawn from the user's least-engaged categories, filling
/// the least-engaged first (ties broken by label order). The most-engaged
/// category is never used, so dilution always pulls away from the dominant
/// preference.
pub fn behavior_dilute(
    history: &UserProfile,
    severity: u8,
    seed: u64,
    catalog: &Catalog,
) -> Result<PerturbedHistory, PerturbError> {
    let by_category = catalog.items_by_category();
    let with_items: Vec<&str> = catalog
        .categories
        .iter()
        .map(String::as_str)
        .filter(|c| by_category.contains_key(c))
        .collect();
    if with_items.len() < 2 {
        return Err(PerturbError::TooFewCategories);
    }

    // Ascending engagement, ties by label order; drop the most-engaged.
    let mut ordered: Vec<(&str, usize)> = with_items
        .iter()
        .map(|&cat| {
            let count = history
                .interactions
                .iter()
                .filter(|i| interaction_category(i, catalog).as_deref() == Some(cat))
                .count();
            (cat, count)
        })
        .collect();
    ordered.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    ordered.pop();
    if ordered.is_empty() {
        return Err(PerturbError::NoCandidateItems);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = history.interactions.len();
    let k = additive_count(severity, n);
    let (lo, hi) = timestamp_span(&history.interactions);

    let mut injected = Vec::with_capacity(k);
    let mut injected_ids = Vec::with_capacity(k);
    for j in 0..k {
        let (category, _) = ordered[j % ordered.len()];
        let candidates = &by_category[category];
        let item = candidates[rng.gen_range(0..candidates.len())];
        injected_ids.push(item.id.clone());
        injected.push(Interaction {
            item_id: item.id.clone(),
            timestamp: Some(rng.gen_range(lo..=hi)),
            category: Some(item.category.clone()),
            rating: Some(random_rating(&mut rng)),
        });
    }

    let mut interactions = history.interactions.clone();
    interleave_by_timestamp(&mut interactions, injected);
    Ok(PerturbedHistory {
        injected_ids,
        ..PerturbedHistory::unchanged(
            interactions,
            PerturbationSpec { kind: PerturbationKind::Dilution, severity, seed },
        )
    })
}

/// Replaces `round(0.1·s·|H|)` uniformly chosen interactions with items from
/// one drift category (uniform among non-dominant categories). Replaced
/// interactions keep their original timestamps; `|H'| = |H|`.
pub fn category_drift(
    history: &UserProfile,
    severity: u8,
    seed: u64,
    catalog: &Catalog,
) -> Result<PerturbedHistory, PerturbError> {
    let by_category = catalog.items_by_category();
    let dominant = history.dominant_category(catalog);
    let candidates: Vec<&str> = catalog
        .categories
        .iter()
        .map(String::as_str)
        .filter(|c| by_category.contains_key(c) && Some(*c) != dominant.as_deref())
        .collect();
    if candidates.is_empty() {
        return Err(PerturbError::TooFewCategories);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let drift_category = candidates[rng.gen_range(0..candidates.len())];
    let drift_items = &by_category[drift_category];

    let n = history.interactions.len();
    let m = scaled_count(severity, n).min(n);
    let positions = rand::seq::index::sample(&mut rng, n, m);

    let mut interactions = history.interactions.clone();
    for pos in positions {
        let item = drift_items[rng.gen_range(0..drift_items.len())];
        let original_ts = interactions[pos].timestamp;
        interactions[pos] = Interaction {
            item_id: item.id.clone(),
            timestamp: original_ts,
            category: Some(item.category.clone()),
            rating: Some(random_rating(&mut rng)),
        };
    }
    Ok(PerturbedHistory {
        replaced_count: m,
        ..PerturbedHistory::unchanged(
            interactions,
            PerturbationSpec { kind: PerturbationKind::Drift, severity, seed },
        )
    })
}

/// Blanks `round(0.1·s·|cells|)` metadata cells chosen uniformly without
/// replacement from the currently-present rating/timestamp/category fields.
/// `item_id` is never eligible.
pub fn missing_values(
    history: &UserProfile,
    severity: u8,
    seed: u64,
) -> Result<PerturbedHistory, PerturbError> {
    #[derive(Clone, Copy)]
    enum Field {
        Rating,
        Timestamp,
        Category,
    }

    let mut cells: Vec<(usize, Field)> = Vec::new();
    for (idx, interaction) in history.interactions.iter().enumerate() {
        if interaction.rating.is_some() {
            cells.push((idx, Field::Rating));
        }
        if interaction.timestamp.is_some() {
            cells.push((idx, Field::Timestamp));
        }
        if interaction.category.is_some() {
            cells.push((idx, Field::Category));
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let m = scaled_count(severity, cells.len()).min(cells.len());
    let chosen = rand::seq::index::sample(&mut rng, cells.len().max(1), m.min(cells.len()));

    let mut interactions = history.interactions.clone();
    if !cells.is_empty() {
        for cell_idx in chosen {
            let (idx, field) = cells[cell_idx];
            match field {
                Field::Rating => interactions[idx].rating = None,
                Field::Timestamp => interactions[idx].timestamp = None,
                Field::Category => interactions[idx].category = None,
            }
        }
    }
    Ok(PerturbedHistory {
        removed_field_count: m,
        ..PerturbedHistory::unchanged(
            interactions,
            PerturbationSpec { kind: PerturbationKind::Missing, severity, seed },
        )
    })
}
