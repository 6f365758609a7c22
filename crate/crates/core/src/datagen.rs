//! Deterministic synthetic e-commerce dataset generator.
//!
//! `(seed, config)` fully determines the dataset. Per-user RNG streams are
//! derived from the run seed and the user index, so users can be generated
//! in any order (or in parallel) without changing the output.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::domain::{Catalog, Interaction, Item, UserProfile};
use crate::seed::derive_seed;

/// Seven representative product categories.
pub const DEFAULT_CATEGORIES: [&str; 7] =
    ["Electronics", "Fashion", "Home", "Beauty", "Sports", "Books", "Toys"];

/// Per-category feature descriptor pools. Features feed both the prompt and
/// the keyword lexicon, so they are embedded to keep runs hermetic.
const DESCRIPTOR_POOLS: [(&str, [&str; 8]); 7] = [
    (
        "Electronics",
        ["wireless", "rechargeable", "portable", "smart display", "noise cancelling", "fast charging", "bluetooth", "energy efficient"],
    ),
    (
        "Fashion",
        ["lightweight", "breathable fabric", "slim fit", "water resistant", "classic style", "hand stitched", "machine washable", "seasonal"],
    ),
    (
        "Home",
        ["space saving", "easy assembly", "stain resistant", "modern design", "durable", "eco friendly", "stackable", "non slip"],
    ),
    (
        "Beauty",
        ["fragrance free", "hypoallergenic", "long lasting", "dermatologist tested", "moisturizing", "vegan", "travel size", "gentle formula"],
    ),
    (
        "Sports",
        ["shock absorbing", "quick dry", "adjustable", "high grip", "lightweight frame", "sweat resistant", "reflective", "all terrain"],
    ),
    (
        "Books",
        ["bestselling", "illustrated", "hardcover", "award winning", "beginner friendly", "comprehensive", "pocket edition", "annotated"],
    ),
    (
        "Toys",
        ["educational", "battery free", "choke safe", "collectible", "interactive", "washable", "glow in the dark", "buildable"],
    ),
];

/// Fallback pool for categories outside the default seven.
const GENERIC_POOL: [&str; 8] = [
    "popular", "versatile", "premium", "compact", "reliable", "affordable", "handcrafted", "limited edition",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DataGenConfig {
    pub seed: u64,
    pub n_items: usize,
    pub n_users: usize,
    pub categories: Vec<String>,
    pub min_history: usize,
    pub max_history: usize,
}

impl Default for DataGenConfig {
    fn default() -> Self {
        DataGenConfig {
            seed: 42,
            n_items: 200,
            n_users: 100,
            categories: DEFAULT_CATEGORIES.iter().map(|c| c.to_string()).collect(),
            min_history: 10,
            max_history: 50,
        }
    }
}

impl DataGenConfig {
    pub fn validate(&self) -> Result<(), DataGenError> {
        if self.categories.is_empty() {
            return Err(DataGenError::InvalidConfig("categories must be non-empty".into()));
        }
        let mut sorted = self.categories.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.categories.len() {
            return Err(DataGenError::InvalidConfig("duplicate category labels".into()));
        }
        if self.n_items < self.categories.len() {
            return Err(DataGenError::InvalidConfig(format!(
                "n_items ({}) must be >= number of categories ({})",
                self.n_items,
                self.categories.len()
            )));
        }
        if self.n_users == 0 || self.n_items == 0 {
            return Err(DataGenError::InvalidConfig("n_items and n_users must be positive".into()));
        }
        if self.min_history > self.max_history {
            return Err(DataGenError::InvalidConfig(format!(
                "min_history ({}) > max_history ({})",
                self.min_history, self.max_history
            )));
        }
        if self.min_history == 0 {
            return Err(DataGenError::InvalidConfig("min_history must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DataGenError {
    #[error("invalid datagen config: {0}")]
    InvalidConfig(String),
    #[error("catalog has no items")]
    EmptyCatalog,
}

fn descriptor_pool(category: &str) -> &'static [&'static str] {
    DESCRIPTOR_POOLS
        .iter()
        .find(|(label, _)| *label == category)
        .map(|(_, pool)| pool.as_slice())
        .unwrap_or(GENERIC_POOL.as_slice())
}

/// Generates `n_items` items with categories assigned round-robin and the
/// assignment order shuffled per seed, so every category gets at least
/// `floor(n_items / n_categories)` items.
pub fn generate_catalog(cfg: &DataGenConfig) -> Result<Catalog, DataGenError> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, &["catalog"]));

    let k = cfg.categories.len();
    let mut assignment: Vec<usize> = (0..cfg.n_items).map(|i| i % k).collect();
    assignment.shuffle(&mut rng);

    let mut per_category_counter = vec![0usize; k];
    let mut items = Vec::with_capacity(cfg.n_items);
    for (idx, &cat_idx) in assignment.iter().enumerate() {
        let category = &cfg.categories[cat_idx];
        per_category_counter[cat_idx] += 1;
        let pool = descriptor_pool(category);
        let n_features = rng.gen_range(2..=4usize);
        let features: Vec<String> = {
            let mut shuffled: Vec<&str> = pool.to_vec();
            shuffled.shuffle(&mut rng);
            shuffled.into_iter().take(n_features).map(String::from).collect()
        };
        items.push(Item {
            id: format!("item-{idx:04}"),
            name: format!("{} Item {}", category, per_category_counter[cat_idx]),
            category: category.clone(),
            features,
        });
    }

    Ok(Catalog { categories: cfg.categories.clone(), items })
}

/// Share of each history assigned to the user's dominant category.
/// Fixed at 60% so dilution and drift have a well-defined reference point.
const DOMINANT_SHARE_PERCENT: usize = 60;

/// Generates `n_users` profiles. Each user gets a dominant category holding
/// 60% of interactions, strictly increasing timestamps, and ratings uniform
/// on the half-step grid {1.0, 1.5, ..., 5.0}.
pub fn generate_users(cfg: &DataGenConfig, catalog: &Catalog) -> Result<Vec<UserProfile>, DataGenError> {
    cfg.validate()?;
    if catalog.items.is_empty() {
        return Err(DataGenError::EmptyCatalog);
    }
    let by_category = catalog.items_by_category();
    // Only categories that actually have items are usable.
    let usable: Vec<&str> = catalog
        .categories
        .iter()
        .map(String::as_str)
        .filter(|c| by_category.contains_key(c))
        .collect();
    if usable.is_empty() {
        return Err(DataGenError::EmptyCatalog);
    }

    let mut users = Vec::with_capacity(cfg.n_users);
    for user_idx in 0..cfg.n_users {
        let sub_seed = derive_seed(cfg.seed, &["user", &user_idx.to_string()]);
        let mut rng = ChaCha20Rng::seed_from_u64(sub_seed);

        let history_len = rng.gen_range(cfg.min_history..=cfg.max_history);
        let dominant = usable[rng.gen_range(0..usable.len())];

        // Round-half-up on 0.6 * len without floating point.
        let n_dominant = (DOMINANT_SHARE_PERCENT * history_len + 50) / 100;
        let mut slots: Vec<&str> = Vec::with_capacity(history_len);
        for _ in 0..n_dominant {
            slots.push(dominant);
        }
        let others: Vec<&str> = usable.iter().copied().filter(|c| *c != dominant).collect();
        for _ in n_dominant..history_len {
            if others.is_empty() {
                slots.push(dominant);
            } else {
                slots.push(others[rng.gen_range(0..others.len())]);
            }
        }
        slots.shuffle(&mut rng);

        let mut timestamp = 1_600_000_000i64 + rng.gen_range(0..=86_400i64);
        let mut interactions = Vec::with_capacity(history_len);
        for category in slots {
            let candidates = &by_category[category];
            let item = candidates[rng.gen_range(0..candidates.len())];
            timestamp += rng.gen_range(3_600..=259_200i64);
            interactions.push(Interaction {
                item_id: item.id.clone(),
                timestamp: Some(timestamp),
                category: Some(item.category.clone()),
                rating: Some(random_rating(&mut rng)),
            });
        }

        users.push(UserProfile { id: format!("user-{user_idx:04}"), interactions });
    }
    Ok(users)
}

/// Uniform rating on {1.0, 1.5, ..., 5.0}.
pub fn random_rating(rng: &mut impl Rng) -> f64 {
    1.0 + 0.5 * rng.gen_range(0..9) as f64
}
