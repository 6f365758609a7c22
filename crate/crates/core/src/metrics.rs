//! The four stability metrics and their weighted aggregate.
//!
//! All four compare an original explanation `e` with a perturbed explanation
//! `e'` and return a value in [0, 1]. Semantic, keyword and length are
//! symmetric; structural (BLEU) treats the original as the reference and is
//! deliberately asymmetric. Empty-input convention: both texts empty scores
//! 1.0, exactly one empty scores 0.0.

use std::collections::{HashMap, HashSet};

use crate::domain::{Catalog, MetricScores, MetricWeights};

/// Embedded English stopword list used by keyword extraction.
pub const STOPWORDS: [&str; 123] = [
    "a", "about", "above", "after", "again", "all", "also", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his",
    "how", "i", "if", "in", "into", "is", "it", "its", "just", "like", "may", "me", "might",
    "more", "most", "my", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
    "other", "our", "out", "over", "own", "same", "she", "should", "so", "some", "such", "than",
    "that", "the", "their", "them", "then", "there", "these", "they", "this", "those", "through",
    "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where",
    "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours",
    "yourself", "itself", "ourselves", "themselves",
];

/// Lowercase tokens with no whitespace or empties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

/// Lowercases and splits on every maximal run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> TokenSequence {
    let tokens = text
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect();
    TokenSequence { tokens }
}

/// Source material for keyword extraction: catalog-derived names, categories
/// and feature terms, plus the stopword list. Multiword entries are stored as
/// space-joined normalized token sequences.
#[derive(Debug, Clone)]
pub struct KeywordLexicon {
    pub item_names: HashSet<String>,
    pub category_labels: HashSet<String>,
    pub feature_terms: HashSet<String>,
    pub stopwords: HashSet<String>,
}

impl KeywordLexicon {
    pub fn new(
        item_names: impl IntoIterator<Item = String>,
        category_labels: impl IntoIterator<Item = String>,
        feature_terms: impl IntoIterator<Item = String>,
    ) -> Self {
        let normalize = |s: String| tokenize(&s).tokens.join(" ");
        let item_names: HashSet<String> =
            item_names.into_iter().map(normalize).filter(|s| !s.is_empty()).collect();
        let category_labels: HashSet<String> =
            category_labels.into_iter().map(normalize).filter(|s| !s.is_empty()).collect();
        let feature_terms: HashSet<String> =
            feature_terms.into_iter().map(normalize).filter(|s| !s.is_empty()).collect();
        // Stopwords must stay disjoint from the content sets.
        let stopwords = STOPWORDS
            .iter()
            .map(|s| s.to_string())
            .filter(|s| {
                !item_names.contains(s) && !category_labels.contains(s) && !feature_terms.contains(s)
            })
            .collect();
        KeywordLexicon { item_names, category_labels, feature_terms, stopwords }
    }

    pub fn from_catalog(catalog: &Catalog) -> Self {
        KeywordLexicon::new(
            catalog.items.iter().map(|i| i.name.clone()),
            catalog.categories.iter().cloned(),
            catalog.items.iter().flat_map(|i| i.features.iter().cloned()),
        )
    }

    fn phrases(&self) -> impl Iterator<Item = &String> {
        self.item_names
            .iter()
            .chain(self.category_labels.iter())
            .chain(self.feature_terms.iter())
    }
}

/// Bag-of-words cosine similarity over the union vocabulary.
pub fn semantic_similarity(e: &str, e2: &str) -> f64 {
    let a = tokenize(e).tokens;
    let b = tokenize(e2).tokens;
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut tf_a: HashMap<&str, f64> = HashMap::new();
    for t in &a {
        *tf_a.entry(t).or_insert(0.0) += 1.0;
    }
    let mut tf_b: HashMap<&str, f64> = HashMap::new();
    for t in &b {
        *tf_b.entry(t).or_insert(0.0) += 1.0;
    }
    let dot: f64 = tf_a
        .iter()
        .filter_map(|(t, ca)| tf_b.get(t).map(|cb| ca * cb))
        .sum();
    let sq_a: f64 = tf_a.values().map(|c| c * c).sum();
    let sq_b: f64 = tf_b.values().map(|c| c * c).sum();
    // Single sqrt keeps the identity case exactly 1.0.
    (dot / (sq_a * sq_b).sqrt()).clamp(0.0, 1.0)
}

/// Extracts the keyword set: multiword lexicon phrases found as contiguous
/// token subsequences, single-token lexicon members, and content tokens
/// (length >= 3, not a stopword, not purely numeric).
pub fn extract_keywords(text: &str, lexicon: &KeywordLexicon) -> HashSet<String> {
    let tokens = tokenize(text).tokens;
    let mut keywords = HashSet::new();

    for phrase in lexicon.phrases() {
        let parts: Vec<&str> = phrase.split(' ').collect();
        if parts.len() > 1 {
            if tokens
                .windows(parts.len())
                .any(|w| w.iter().map(String::as_str).eq(parts.iter().copied()))
            {
                keywords.insert(phrase.clone());
            }
        }
    }

    for token in &tokens {
        let single_member = lexicon.item_names.contains(token)
            || lexicon.category_labels.contains(token)
            || lexicon.feature_terms.contains(token);
        let content = token.len() >= 3
            && !lexicon.stopwords.contains(token)
            && !token.chars().all(|c| c.is_ascii_digit());
        if single_member || content {
            keywords.insert(token.clone());
        }
    }
    keywords
}

/// Jaccard coefficient of the two keyword sets.
pub fn keyword_stability(e: &str, e2: &str, lexicon: &KeywordLexicon) -> f64 {
    let ka = extract_keywords(e, lexicon);
    let kb = extract_keywords(e2, lexicon);
    match (ka.is_empty(), kb.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let intersection = ka.intersection(&kb).count() as f64;
    let union = ka.union(&kb).count() as f64;
    intersection / union
}

/// BLEU with the original as reference and the perturbed text as hypothesis.
/// Max order `N = min(4, hypothesis length)`, uniform weights `1/N`, clipped
/// n-gram precisions, add-one smoothing for zero precisions at orders >= 2,
/// and the standard brevity penalty.
pub fn structural_consistency(e: &str, e2: &str) -> f64 {
    let reference = tokenize(e).tokens;
    let hypothesis = tokenize(e2).tokens;
    match (reference.is_empty(), hypothesis.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }

    let max_order = hypothesis.len().min(4);
    let mut log_sum = 0.0;
    for order in 1..=max_order {
        let mut ref_counts: HashMap<&[String], usize> = HashMap::new();
        for gram in reference.windows(order) {
            *ref_counts.entry(gram).or_insert(0) += 1;
        }
        let mut hyp_counts: HashMap<&[String], usize> = HashMap::new();
        for gram in hypothesis.windows(order) {
            *hyp_counts.entry(gram).or_insert(0) += 1;
        }
        let total: usize = hypothesis.len() - order + 1;
        let matched: usize = hyp_counts
            .iter()
            .map(|(gram, count)| (*count).min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let precision = if matched == 0 && order >= 2 {
            (matched as f64 + 1.0) / (total as f64 + 1.0)
        } else {
            matched as f64 / total as f64
        };
        if precision == 0.0 {
            return 0.0;
        }
        log_sum += precision.ln() / max_order as f64;
    }

    let brevity = if hypothesis.len() < reference.len() {
        (1.0 - reference.len() as f64 / hypothesis.len() as f64).exp()
    } else {
        1.0
    };
    (brevity * log_sum.exp()).clamp(0.0, 1.0)
}

/// Relative token-count preservation.
pub fn length_stability(e: &str, e2: &str) -> f64 {
    let la = tokenize(e).tokens.len() as f64;
    let lb = tokenize(e2).tokens.len() as f64;
    if la == 0.0 && lb == 0.0 {
        return 1.0;
    }
    1.0 - (la - lb).abs() / la.max(lb)
}

/// Weighted aggregate of the four components.
pub fn robustness_score(
    semantic: f64,
    keyword: f64,
    structural: f64,
    length: f64,
    weights: &MetricWeights,
) -> f64 {
    weights.semantic() * semantic
        + weights.keyword() * keyword
        + weights.structural() * structural
        + weights.length() * length
}

/// Computes all four components and the aggregate for one explanation pair.
pub fn score_pair(
    original: &str,
    perturbed: &str,
    lexicon: &KeywordLexicon,
    weights: &MetricWeights,
) -> MetricScores {
    MetricScores::from_components(
        semantic_similarity(original, perturbed),
        keyword_stability(original, perturbed, lexicon),
        structural_consistency(original, perturbed),
        length_stability(original, perturbed),
        weights,
    )
}
