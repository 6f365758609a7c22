//! Prompt rendering, explanation generators, and the completion cache.
//!
//! Three deterministic mock generators with known invariances serve as
//! ground-truth oracles for end-to-end tests; the remote generator speaks the
//! OpenAI-style chat-completions protocol (with a plain `generate` fallback
//! for local servers) and caches completions content-addressed on
//! `(model_id, prompt)`.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{Catalog, Interaction, Item};

/// Wire protocol shape for the remote generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireProtocol {
    /// `POST` body `{model, messages, temperature, max_tokens}`, response at
    /// `choices[0].message.content`.
    ChatCompletions,
    /// `POST` body `{model, prompt, stream: false}`, response field `response`.
    Generate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_id: String,
    pub endpoint_url: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub api_key: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub protocol: WireProtocol,
}

impl ModelConfig {
    pub fn new(model_id: impl Into<String>, endpoint_url: impl Into<String>) -> Self {
        ModelConfig {
            model_id: model_id.into(),
            endpoint_url: endpoint_url.into(),
            api_key: None,
            temperature: 0.0,
            max_tokens: 256,
            timeout_secs: 60,
            max_retries: 3,
            protocol: WireProtocol::ChatCompletions,
        }
    }
}

/// Which generator backs `generate_explanation`.
#[derive(Debug, Clone)]
pub enum GeneratorKind {
    Remote(ModelConfig),
    MockOrderInvariant,
    MockCategoryHistogram,
    MockEcho,
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("request failed after {attempts} attempts: {log}")]
    Exhausted { attempts: u32, log: String },
    #[error("endpoint returned an empty completion")]
    EmptyCompletion,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("cache io error: {0}")]
    CacheIo(String),
}

/// Renders the evaluation prompt. History lines render absent fields as "?"
/// so the missing-values perturbation is visible to the model.
pub fn render_prompt(history: &[Interaction], item: &Item, catalog: &Catalog) -> String {
    let history_block = if history.is_empty() {
        "(no interactions)".to_string()
    } else {
        history
            .iter()
            .map(|interaction| {
                let name = catalog
                    .item(&interaction.item_id)
                    .map(|i| i.name.as_str())
                    .unwrap_or(interaction.item_id.as_str());
                let category = interaction.category.as_deref().unwrap_or("?");
                let rating = interaction
                    .rating
                    .map(|r| format!("{r:.1}"))
                    .unwrap_or_else(|| "?".to_string());
                let timestamp = interaction
                    .timestamp
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "?".to_string());
                format!("- {name} ({category}, rating {rating}, t={timestamp})")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    format!(
        "Given the user's interaction history\n{history_block}\nexplain why the item {item_name} with features {features} is recommended. Focus on connecting the user's demonstrated preferences to the item's characteristics.",
        item_name = item.name,
        features = item.features.join(", "),
    )
}

/// Content hash of `model_id || 0x1f || prompt`: SHA-256, lowercase hex.
pub fn cache_key(model_id: &str, prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(prompt.as_bytes());
    hex::encode(hasher.finalize())
}

/// Common interface of all generators; implementations must be pure given
/// `(history, item, catalog)` up to endpoint nondeterminism.
pub trait ExplanationGenerator: Send + Sync {
    fn model_id(&self) -> &str;
    fn generate(
        &self,
        history: &[Interaction],
        item: &Item,
        catalog: &Catalog,
    ) -> Result<String, GenerationError>;
}

impl GeneratorKind {
    /// Short CLI-facing identifier.
    pub fn label(&self) -> String {
        match self {
            GeneratorKind::Remote(cfg) => cfg.model_id.clone(),
            GeneratorKind::MockOrderInvariant => "mock-order".into(),
            GeneratorKind::MockCategoryHistogram => "mock-hist".into(),
            GeneratorKind::MockEcho => "mock-echo".into(),
        }
    }

    pub fn build(&self, cache_dir: Option<PathBuf>) -> Box<dyn ExplanationGenerator> {
        match self {
            GeneratorKind::Remote(cfg) => Box::new(RemoteGenerator::new(cfg.clone(), cache_dir)),
            GeneratorKind::MockOrderInvariant => Box::new(MockOrderInvariant),
            GeneratorKind::MockCategoryHistogram => Box::new(MockCategoryHistogram),
            GeneratorKind::MockEcho => Box::new(MockEcho),
        }
    }
}

fn category_of(interaction: &Interaction, catalog: &Catalog) -> String {
    crate::domain::interaction_category(interaction, catalog).unwrap_or_else(|| "unknown".into())
}

/// Builds its text from the sorted multiset of history categories and the
/// item name only, so any reordering of the history yields identical output.
pub struct MockOrderInvariant;

impl ExplanationGenerator for MockOrderInvariant {
    fn model_id(&self) -> &str {
        "mock-order"
    }

    fn generate(
        &self,
        history: &[Interaction],
        item: &Item,
        catalog: &Catalog,
    ) -> Result<String, GenerationError> {
        let mut categories: Vec<String> =
            history.iter().map(|i| category_of(i, catalog)).collect();
        categories.sort();
        Ok(format!(
            "We recommend {} because your history shows interest in {}.",
            item.name,
            if categories.is_empty() { "general browsing".to_string() } else { categories.join(", ") }
        ))
    }
}

/// Lists history categories with their counts in descending order plus the
/// item's features; sensitive to composition changes, not to order.
pub struct MockCategoryHistogram;

impl ExplanationGenerator for MockCategoryHistogram {
    fn model_id(&self) -> &str {
        "mock-hist"
    }

    fn generate(
        &self,
        history: &[Interaction],
        item: &Item,
        catalog: &Catalog,
    ) -> Result<String, GenerationError> {
        let mut counts: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
        for interaction in history {
            *counts.entry(category_of(interaction, catalog)).or_insert(0) += 1;
        }
        let mut ordered: Vec<(String, usize)> = counts.into_iter().collect();
        ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let histogram = ordered
            .iter()
            .map(|(cat, count)| format!("{cat} appears {count} times"))
            .collect::<Vec<_>>()
            .join(", ");
        Ok(format!(
            "{} offers {}. Your activity breakdown: {}.",
            item.name,
            item.features.join(", "),
            if histogram.is_empty() { "no recorded activity".to_string() } else { histogram }
        ))
    }
}

/// Returns the rendered prompt itself; used for plumbing tests.
pub struct MockEcho;

impl ExplanationGenerator for MockEcho {
    fn model_id(&self) -> &str {
        "mock-echo"
    }

    fn generate(
        &self,
        history: &[Interaction],
        item: &Item,
        catalog: &Catalog,
    ) -> Result<String, GenerationError> {
        Ok(render_prompt(history, item, catalog))
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    stream: bool,
}

#[derive(Deserialize)]
struct GenerateResponse {
    response: String,
}

/// Remote generator with retry, exponential backoff and an on-disk cache
/// (one file per key, filename = cache key, content = raw completion).
pub struct RemoteGenerator {
    config: ModelConfig,
    client: reqwest::blocking::Client,
    cache_dir: Option<PathBuf>,
    request_count: AtomicUsize,
}

impl RemoteGenerator {
    pub fn new(config: ModelConfig, cache_dir: Option<PathBuf>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .expect("client builds");
        RemoteGenerator { config, client, cache_dir, request_count: AtomicUsize::new(0) }
    }

    /// Number of HTTP requests actually sent (cache hits don't count).
    pub fn request_count(&self) -> usize {
        self.request_count.load(Ordering::SeqCst)
    }

    fn cache_path(&self, key: &str) -> Option<PathBuf> {
        self.cache_dir.as_ref().map(|dir| dir.join(key))
    }

    fn send_once(&self, prompt: &str) -> Result<String, String> {
        self.request_count.fetch_add(1, Ordering::SeqCst);
        let mut request = self.client.post(&self.config.endpoint_url);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        let text = match self.config.protocol {
            WireProtocol::ChatCompletions => {
                let body = ChatRequest {
                    model: &self.config.model_id,
                    messages: vec![ChatMessage { role: "user", content: prompt }],
                    temperature: self.config.temperature,
                    max_tokens: self.config.max_tokens,
                };
                let response = request.json(&body).send().map_err(|e| e.to_string())?;
                let response = response.error_for_status().map_err(|e| e.to_string())?;
                let parsed: ChatResponse = response.json().map_err(|e| e.to_string())?;
                parsed
                    .choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or_else(|| "response has no choices".to_string())?
            }
            WireProtocol::Generate => {
                let body = GenerateRequest { model: &self.config.model_id, prompt, stream: false };
                let response = request.json(&body).send().map_err(|e| e.to_string())?;
                let response = response.error_for_status().map_err(|e| e.to_string())?;
                let parsed: GenerateResponse = response.json().map_err(|e| e.to_string())?;
                parsed.response
            }
        };
        Ok(text)
    }
}

impl ExplanationGenerator for RemoteGenerator {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn generate(
        &self,
        history: &[Interaction],
        item: &Item,
        catalog: &Catalog,
    ) -> Result<String, GenerationError> {
        let prompt = render_prompt(history, item, catalog);
        let key = cache_key(&self.config.model_id, &prompt);

        if let Some(path) = self.cache_path(&key) {
            if let Ok(cached) = std::fs::read_to_string(&path) {
                return Ok(cached);
            }
        }

        let mut log = Vec::new();
        for attempt in 0..=self.config.max_retries {
            match self.send_once(&prompt) {
                Ok(text) => {
                    if text.trim().is_empty() {
                        return Err(GenerationError::EmptyCompletion);
                    }
                    if let Some(path) = self.cache_path(&key) {
                        if let Some(parent) = path.parent() {
                            std::fs::create_dir_all(parent)
                                .map_err(|e| GenerationError::CacheIo(e.to_string()))?;
                        }
                        std::fs::write(&path, &text)
                            .map_err(|e| GenerationError::CacheIo(e.to_string()))?;
                    }
                    return Ok(text);
                }
                Err(err) => {
                    log.push(format!("attempt {}: {err}", attempt + 1));
                    if attempt < self.config.max_retries {
                        std::thread::sleep(Duration::from_millis(250 * (1 << attempt.min(6))));
                    }
                }
            }
        }
        Err(GenerationError::Exhausted {
            attempts: self.config.max_retries + 1,
            log: log.join("; "),
        })
    }
}
