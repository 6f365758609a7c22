//! Robustness evaluation harness for LLM-generated recommendation explanations.
//!
//! The pipeline: generate a seeded synthetic e-commerce dataset, perturb user
//! interaction histories in five controlled ways, generate paired explanations
//! (original vs. perturbed history, same recommended item), score the pair with
//! four stability metrics plus a weighted aggregate, and run the statistical
//! analyses and report tables over the collected results.

pub mod analysis;
pub mod datagen;
pub mod domain;
pub mod harness;
pub mod llm;
pub mod metrics;
pub mod perturb;
pub mod report;
pub mod seed;
pub mod stats;

pub use domain::{
    Catalog, Dataset, Interaction, Item, MetricScores, MetricWeights, PerturbationKind,
    PerturbationSpec, RunRecord, UserProfile,
};
