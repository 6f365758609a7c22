//! Acceptance suite: ten gate checks, each printing a single PASS/FAIL line.
//!
//! Every check that involves a numeric result is validated against an oracle
//! written independently inside this file (brute-force tf-cosine, brute-force
//! n-gram overlap, a from-scratch re-aggregator, numerical density
//! integration) rather than against the library's own code paths.

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use robustexplain_core::datagen::{generate_catalog, generate_users, DataGenConfig};
use robustexplain_core::harness::{run_sweep, ResultSet, SweepConfig};
use robustexplain_core::llm::{GeneratorKind, ModelConfig};
use robustexplain_core::metrics::{
    score_pair, semantic_similarity, structural_consistency, KeywordLexicon,
};
use robustexplain_core::perturb::apply;
use robustexplain_core::report::{
    table_correlation, table_model_by_perturbation, table_per_metric, table_severity,
};
use robustexplain_core::stats::{one_way_anova, paired_t_test, pearson};
use robustexplain_core::{
    Catalog, Dataset, MetricWeights, PerturbationKind, PerturbationSpec, RunRecord, UserProfile,
};

fn gate(name: &str, body: impl FnOnce() + UnwindSafe) {
    match catch_unwind(body) {
        Ok(()) => println!("PASS - {name}"),
        Err(cause) => {
            println!("FAIL - {name}");
            resume_unwind(cause);
        }
    }
}

fn fixture() -> (Catalog, Vec<UserProfile>) {
    let cfg = DataGenConfig::default();
    let catalog = generate_catalog(&cfg).unwrap();
    let users = generate_users(&cfg, &catalog).unwrap();
    (catalog, users)
}

/// Word pool mixing catalog-style vocabulary with filler so random texts
/// exercise both keyword and non-keyword paths.
fn word_pool() -> Vec<&'static str> {
    vec![
        "wireless", "headphones", "premium", "sound", "quality", "your", "history", "shows",
        "interest", "in", "electronics", "because", "the", "item", "offers", "noise",
        "cancellation", "battery", "life", "and", "a", "comfortable", "fit", "books", "fashion",
        "beauty", "sports", "toys", "home", "durable", "design", "recommend", "activity", "times",
        "appears", "breakdown", "features", "preferences", "demonstrated", "connecting",
    ]
}

fn random_text(rng: &mut ChaCha20Rng, len: usize, pool: &[&str]) -> String {
    (0..len).map(|_| *pool.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

// ---- independent oracles -------------------------------------------------

fn oracle_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn oracle_cosine(a: &str, b: &str) -> f64 {
    let ta = oracle_tokens(a);
    let tb = oracle_tokens(b);
    match (ta.is_empty(), tb.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut ca: BTreeMap<&str, f64> = BTreeMap::new();
    let mut cb: BTreeMap<&str, f64> = BTreeMap::new();
    for t in &ta {
        *ca.entry(t).or_insert(0.0) += 1.0;
    }
    for t in &tb {
        *cb.entry(t).or_insert(0.0) += 1.0;
    }
    let dot: f64 = ca.iter().map(|(t, x)| x * cb.get(t).copied().unwrap_or(0.0)).sum();
    let na: f64 = ca.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = cb.values().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn oracle_bleu(reference: &str, hypothesis: &str) -> f64 {
    let r = oracle_tokens(reference);
    let h = oracle_tokens(hypothesis);
    match (r.is_empty(), h.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let max_order = h.len().min(4);
    let mut product = 1.0f64;
    for order in 1..=max_order {
        let mut ref_counts: BTreeMap<Vec<&str>, usize> = BTreeMap::new();
        for gram in r.windows(order) {
            *ref_counts.entry(gram.iter().map(String::as_str).collect()).or_insert(0) += 1;
        }
        let mut matched = 0usize;
        let mut seen: BTreeMap<Vec<&str>, usize> = BTreeMap::new();
        for gram in h.windows(order) {
            let key: Vec<&str> = gram.iter().map(String::as_str).collect();
            let used = seen.entry(key.clone()).or_insert(0);
            if *used < ref_counts.get(&key).copied().unwrap_or(0) {
                matched += 1;
            }
            *used += 1;
        }
        let total = h.len() - order + 1;
        let precision = if matched == 0 && order >= 2 {
            1.0 / (total as f64 + 1.0)
        } else {
            matched as f64 / total as f64
        };
        if precision == 0.0 {
            return 0.0;
        }
        product *= precision.powf(1.0 / max_order as f64);
    }
    let brevity =
        if h.len() < r.len() { (1.0 - r.len() as f64 / h.len() as f64).exp() } else { 1.0 };
    (brevity * product).clamp(0.0, 1.0)
}

/// Two-sided upper-tail probability of the t distribution by numerical
/// integration of its density (Simpson's rule on a wide finite window).
fn oracle_t_two_sided_p(t: f64, df: f64) -> f64 {
    let density = |x: f64| -> f64 {
        // Normalizing constant via ln-gamma (Stirling series, independent of
        // the library's Lanczos coefficients).
        fn ln_gamma(z: f64) -> f64 {
            if z < 8.0 {
                return ln_gamma(z + 1.0) - z.ln();
            }
            let inv = 1.0 / z;
            (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + inv / 12.0
                - inv.powi(3) / 360.0
                + inv.powi(5) / 1260.0
        }
        let ln_c = ln_gamma((df + 1.0) / 2.0)
            - ln_gamma(df / 2.0)
            - 0.5 * (df * std::f64::consts::PI).ln();
        (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
    };
    // Map [t, inf) onto s in [0, 1) via x = t + s/(1-s) so the heavy tail is
    // integrated in full; the transformed integrand vanishes at s = 1 for
    // df > 1.
    let g = |s: f64| -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        let x = t.abs() + s / (1.0 - s);
        density(x) / ((1.0 - s) * (1.0 - s))
    };
    let n = 400_000usize; // even
    let h = 1.0 / n as f64;
    let mut sum = g(0.0) + g(1.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * g(i as f64 * h);
    }
    2.0 * sum * h / 3.0
}

/// Pooled-variance two-sample t statistic, written from the textbook formula.
fn oracle_pooled_t(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (a.iter().sum::<f64>() / na, b.iter().sum::<f64>() / nb);
    let ssa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let ssb: f64 = b.iter().map(|x| (x - mb).powi(2)).sum();
    let pooled = (ssa + ssb) / (na + nb - 2.0);
    (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt()
}

fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: {actual} vs {expected} (tol {tol})"
    );
}

// ---- the ten gates -------------------------------------------------------

#[test]
fn gate_01_identity_pairs_score_perfectly() {
    gate("identity pairs score (1,1,1,1) with aggregate 1.0 on 200 random texts", || {
        let (catalog, _) = fixture();
        let lexicon = KeywordLexicon::from_catalog(&catalog);
        let weights = MetricWeights::default();
        let pool = word_pool();
        let mut rng = ChaCha20Rng::seed_from_u64(101);
        let started = Instant::now();
        for i in 0..200 {
            let len = (i * 201 / 200).min(200); // covers 0..=200 tokens
            let text = random_text(&mut rng, len, &pool);
            let scores = score_pair(&text, &text, &lexicon, &weights);
            assert_close(scores.semantic, 1.0, 1e-9, "semantic identity");
            assert_close(scores.keyword, 1.0, 1e-9, "keyword identity");
            assert_close(scores.structural, 1.0, 1e-9, "structural identity");
            assert_close(scores.length, 1.0, 1e-9, "length identity");
            assert_close(scores.aggregate, 1.0, 1e-9, "aggregate identity");
        }
        assert!(started.elapsed().as_secs_f64() < 5.0, "identity suite exceeded 5 s");
    });
}

#[test]
fn gate_02_cosine_matches_brute_force_oracle() {
    gate("semantic similarity matches the brute-force tf-cosine on 1,000 pairs", || {
        let pool = word_pool();
        let mut rng = ChaCha20Rng::seed_from_u64(202);
        for _ in 0..1_000 {
            let la = rng.gen_range(0..60);
            let lb = rng.gen_range(0..60);
            let a = random_text(&mut rng, la, &pool);
            let b = random_text(&mut rng, lb, &pool);
            assert_close(
                semantic_similarity(&a, &b),
                oracle_cosine(&a, &b),
                1e-9,
                "cosine oracle",
            );
        }
    });
}

#[test]
fn gate_03_bleu_matches_brute_force_oracle() {
    gate("n-gram consistency matches the brute-force oracle and is 1.0 on identical pairs", || {
        let reference = "the cat sat on the mat";
        let hypothesis = "the cat sat on the mat today";
        let expected = oracle_bleu(reference, hypothesis);
        // Worked by hand: clipped precisions 6/7, 5/6, 4/5, 3/4 with no
        // brevity penalty give (3/7)^(1/4).
        assert_close(expected, (3.0f64 / 7.0).powf(0.25), 1e-9, "oracle self-check");
        assert_close(
            structural_consistency(reference, hypothesis),
            expected,
            1e-6,
            "hand-worked case",
        );

        let pool = word_pool();
        let mut rng = ChaCha20Rng::seed_from_u64(303);
        for _ in 0..100 {
            let len = rng.gen_range(1..50);
            let text = random_text(&mut rng, len, &pool);
            assert_eq!(structural_consistency(&text, &text), 1.0, "identical pair must be 1.0");
        }
        // Random pairs against the oracle for good measure.
        for _ in 0..200 {
            let la = rng.gen_range(1..30);
            let lb = rng.gen_range(1..30);
            let a = random_text(&mut rng, la, &pool);
            let b = random_text(&mut rng, lb, &pool);
            assert_close(
                structural_consistency(&a, &b),
                oracle_bleu(&a, &b),
                1e-6,
                "random-pair oracle",
            );
        }
    });
}

#[test]
fn gate_04_perturbation_invariants_hold() {
    gate("perturbation operators keep their count/multiset/determinism invariants", || {
        let (catalog, users) = fixture();
        let mut rng = ChaCha20Rng::seed_from_u64(404);

        let multiset = |interactions: &[robustexplain_core::Interaction]| -> Vec<String> {
            let mut v: Vec<String> = interactions
                .iter()
                .map(|i| {
                    format!("{}|{:?}|{:?}|{:?}", i.item_id, i.timestamp, i.category, i.rating)
                })
                .collect();
            v.sort();
            v
        };

        for _ in 0..1_000 {
            let user = users.choose(&mut rng).unwrap();
            let len = rng.gen_range(2..=user.interactions.len());
            let history = UserProfile {
                id: user.id.clone(),
                interactions: user.interactions[..len].to_vec(),
            };
            let kind = *PerturbationKind::ALL.choose(&mut rng).unwrap();
            let severity = rng.gen_range(1..=5u8);
            let seed = rng.gen::<u64>();
            let spec = PerturbationSpec::new(kind, severity, seed).unwrap();
            let out = apply(&history, &spec, &catalog).unwrap();

            let expected_added = ((severity as usize * len + 5) / 10).max(1);
            match kind {
                PerturbationKind::Noise | PerturbationKind::Dilution => {
                    assert_eq!(out.interactions.len(), len + expected_added, "additive count");
                    assert_eq!(out.injected_ids.len(), expected_added, "injected ids");
                }
                PerturbationKind::Shuffle => {
                    assert_eq!(out.interactions.len(), len);
                    assert_eq!(
                        multiset(&out.interactions),
                        multiset(&history.interactions),
                        "shuffle multiset"
                    );
                }
                PerturbationKind::Missing => {
                    assert_eq!(out.interactions.len(), len);
                    let ids: Vec<&str> =
                        out.interactions.iter().map(|i| i.item_id.as_str()).collect();
                    let orig: Vec<&str> =
                        history.interactions.iter().map(|i| i.item_id.as_str()).collect();
                    assert_eq!(ids, orig, "missing-values item ids");
                }
                PerturbationKind::Drift => {
                    assert_eq!(out.interactions.len(), len);
                    let mut ts: Vec<_> =
                        out.interactions.iter().map(|i| i.timestamp).collect();
                    let mut orig: Vec<_> =
                        history.interactions.iter().map(|i| i.timestamp).collect();
                    ts.sort();
                    orig.sort();
                    assert_eq!(ts, orig, "drift timestamp multiset");
                }
            }

            // Identical seeds reproduce byte-identical output.
            let again = apply(&history, &spec, &catalog).unwrap();
            assert_eq!(
                serde_json::to_string(&out).unwrap(),
                serde_json::to_string(&again).unwrap(),
                "determinism"
            );
        }

        // Change counts are non-decreasing in severity.
        for user in users.iter().take(25) {
            for kind in PerturbationKind::ALL {
                let mut last = 0usize;
                for severity in 1..=5u8 {
                    let spec = PerturbationSpec::new(kind, severity, 77).unwrap();
                    let out = apply(user, &spec, &catalog).unwrap();
                    let changed = out.injected_ids.len()
                        + out.replaced_count
                        + out.removed_field_count
                        + out.permuted_count;
                    assert!(
                        changed >= last,
                        "{kind:?} severity {severity}: {changed} < {last}"
                    );
                    last = changed;
                }
            }
        }
    });
}

#[test]
fn gate_05_sweep_produces_complete_grid() {
    gate("offline sweep over 20 users x 5 kinds x 5 levels yields 500 unique records", || {
        let (catalog, users) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let cfg = SweepConfig::new(
            GeneratorKind::MockCategoryHistogram,
            dir.path().join("grid.jsonl"),
        );
        let started = Instant::now();
        let results = run_sweep(&cfg, &catalog, &users).unwrap();
        assert!(started.elapsed().as_secs_f64() < 60.0, "sweep exceeded 60 s");
        assert_eq!(results.records.len(), 500);
        assert!(results.failures.is_empty(), "failures: {:?}", results.failures);
        let triples: HashSet<(String, PerturbationKind, u8)> = results
            .records
            .iter()
            .map(|r| (r.user_id.clone(), r.spec.kind, r.spec.severity))
            .collect();
        assert_eq!(triples.len(), 500, "duplicate triples");
    });
}

#[test]
fn gate_06_mock_invariances_bound_scores() {
    gate("order-invariant mock scores 1.0 under shuffle; histogram mock degrades under drift", || {
        let (catalog, users) = fixture();
        let dir = tempfile::tempdir().unwrap();

        let mut cfg =
            SweepConfig::new(GeneratorKind::MockOrderInvariant, dir.path().join("shuffle.jsonl"));
        cfg.kinds = vec![PerturbationKind::Shuffle];
        let results = run_sweep(&cfg, &catalog, &users).unwrap();
        for severity in 1..=5u8 {
            let values: Vec<f64> = results
                .records
                .iter()
                .filter(|r| r.spec.severity == severity)
                .map(|r| r.scores.aggregate)
                .collect();
            assert_eq!(values.len(), 20);
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            assert_close(mean, 1.0, 1e-9, "shuffle invariance mean");
        }

        let mut cfg =
            SweepConfig::new(GeneratorKind::MockCategoryHistogram, dir.path().join("drift.jsonl"));
        cfg.kinds = vec![PerturbationKind::Drift];
        cfg.severities = vec![1, 5];
        let results = run_sweep(&cfg, &catalog, &users).unwrap();
        let mean_at = |severity: u8| -> f64 {
            let values: Vec<f64> = results
                .records
                .iter()
                .filter(|r| r.spec.severity == severity)
                .map(|r| r.scores.aggregate)
                .collect();
            assert_eq!(values.len(), 20);
            values.iter().sum::<f64>() / values.len() as f64
        };
        assert!(
            mean_at(5) < mean_at(1),
            "drift at level 5 ({}) should score below level 1 ({})",
            mean_at(5),
            mean_at(1)
        );
    });
}

#[test]
fn gate_07_statistical_tests_match_oracles() {
    gate("correlation, t-test, ANOVA and the F = t^2 identity match their oracles", || {
        assert_close(
            pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap(),
            0.6,
            1e-9,
            "pearson",
        );

        let report = paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert_close(report.statistic, 2.0 * 3.0f64.sqrt(), 1e-9, "paired t statistic");
        let p = report.p_value.unwrap();
        assert_close(p, 0.0742, 1e-4, "paired t p-value (tabulated)");
        assert_close(p, oracle_t_two_sided_p(report.statistic, 2.0), 1e-6, "p vs integration");

        let groups =
            vec![vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0]];
        let anova = one_way_anova(&groups).unwrap();
        assert_close(anova.statistic, 3.0, 1e-9, "ANOVA F");
        assert_close(anova.effect_size, 0.5, 1e-9, "partial eta squared");

        let mut rng = ChaCha20Rng::seed_from_u64(707);
        for _ in 0..100 {
            let na = rng.gen_range(3..20);
            let nb = rng.gen_range(3..20);
            let a: Vec<f64> = (0..na).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..nb).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let f = one_way_anova(&[a.clone(), b.clone()]).unwrap().statistic;
            let t = oracle_pooled_t(&a, &b);
            assert!(
                (f - t * t).abs() <= 1e-6 * f.abs().max(1.0),
                "F = t^2 violated: F={f}, t^2={}",
                t * t
            );
        }
    });
}

#[test]
fn gate_08_report_cells_match_reaggregation() {
    gate("every exported table cell is re-derivable from the raw result file", || {
        let (catalog, users) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.jsonl");
        let mut cfg = SweepConfig::new(GeneratorKind::MockCategoryHistogram, path.clone());
        cfg.n_eval_users = 10;
        run_sweep(&cfg, &catalog, &users).unwrap();

        // Work only from the raw file, as an external consumer would.
        let results = vec![ResultSet::load(&path).unwrap()];
        let records: Vec<&RunRecord> = results[0].records.iter().collect();
        let mean = |values: &[f64]| values.iter().sum::<f64>() / values.len() as f64;

        let t = table_model_by_perturbation(&results).unwrap();
        for (col, kind) in PerturbationKind::ALL.iter().enumerate() {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.spec.kind == *kind)
                .map(|r| r.scores.aggregate)
                .collect();
            assert_close(t.cells[0][col].unwrap(), mean(&values), 1e-12, "kind column");
        }
        let all: Vec<f64> = records.iter().map(|r| r.scores.aggregate).collect();
        assert_close(t.cells[0][5].unwrap(), mean(&all), 1e-12, "Overall column");
        // Single model: the Average row repeats the model row.
        for col in 0..6 {
            assert_close(t.cells[1][col].unwrap(), t.cells[0][col].unwrap(), 1e-12, "Average row");
        }

        let t = table_per_metric(&results).unwrap();
        let columns: [Vec<f64>; 4] = [
            records.iter().map(|r| r.scores.semantic).collect(),
            records.iter().map(|r| r.scores.keyword).collect(),
            records.iter().map(|r| r.scores.structural).collect(),
            records.iter().map(|r| r.scores.length).collect(),
        ];
        for (col, values) in columns.iter().enumerate() {
            assert_close(t.cells[0][col].unwrap(), mean(values), 1e-12, "metric column");
        }

        let t = table_severity(&results).unwrap();
        for (row, kind) in PerturbationKind::ALL.iter().enumerate() {
            for severity in 1..=5u8 {
                let values: Vec<f64> = records
                    .iter()
                    .filter(|r| r.spec.kind == *kind && r.spec.severity == severity)
                    .map(|r| r.scores.aggregate)
                    .collect();
                assert_close(
                    t.cells[row][(severity - 1) as usize].unwrap(),
                    mean(&values),
                    1e-12,
                    "severity cell",
                );
            }
        }

        let t = table_correlation(&results).unwrap();
        for i in 0..4 {
            assert_eq!(t.cells[i][i], Some(1.0), "unit diagonal");
            for j in 0..4 {
                match (t.cells[i][j], t.cells[j][i]) {
                    (Some(forward), Some(backward)) => {
                        assert_close(forward, backward, 1e-12, "correlation symmetry");
                        if i != j {
                            assert_close(
                                forward,
                                pearson(&columns[i], &columns[j]).unwrap(),
                                1e-12,
                                "correlation cell",
                            );
                        }
                    }
                    (None, None) => {}
                    _ => panic!("asymmetric absent cell at ({i}, {j})"),
                }
            }
        }
    });
}

#[test]
fn gate_09_pipeline_is_byte_deterministic() {
    gate("two same-seed offline runs produce byte-identical dataset, result and report files", || {
        let run = |dir: &std::path::Path| {
            let cfg = DataGenConfig::default();
            let catalog = generate_catalog(&cfg).unwrap();
            let users = generate_users(&cfg, &catalog).unwrap();
            Dataset::new(catalog.clone(), users.clone())
                .save(&dir.join("dataset.json"))
                .unwrap();

            let mut sweep_cfg = SweepConfig::new(
                GeneratorKind::MockCategoryHistogram,
                dir.join("results.jsonl"),
            );
            sweep_cfg.n_eval_users = 8;
            let results = vec![run_sweep(&sweep_cfg, &catalog, &users).unwrap()];

            let table = table_model_by_perturbation(&results).unwrap();
            robustexplain_core::report::export(
                &table,
                robustexplain_core::report::ExportFormat::Json,
                &dir.join("table.json"),
            )
            .unwrap();
            robustexplain_core::report::export(
                &table,
                robustexplain_core::report::ExportFormat::Csv,
                &dir.join("table.csv"),
            )
            .unwrap();
        };

        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        run(dir_a.path());
        run(dir_b.path());
        for name in ["dataset.json", "results.jsonl", "table.json", "table.csv"] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    });
}

#[test]
fn gate_10_live_endpoint_smoke() {
    // Non-gating: exercises a real endpoint only when one is configured.
    let Ok(endpoint) = std::env::var("ROBUSTEXPLAIN_ENDPOINT") else {
        println!("SKIP - live endpoint smoke test (ROBUSTEXPLAIN_ENDPOINT not set)");
        return;
    };
    gate("live endpoint smoke test: small sweep completes and reruns hit the cache", || {
        let (catalog, users) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let mut model = ModelConfig::new(
            std::env::var("ROBUSTEXPLAIN_MODEL").unwrap_or_else(|_| "gpt-4o-mini".into()),
            endpoint,
        );
        model.api_key = std::env::var("ROBUSTEXPLAIN_API_KEY").ok();

        let mut cfg = SweepConfig::new(
            GeneratorKind::Remote(model),
            dir.path().join("live.jsonl"),
        );
        cfg.n_eval_users = 2;
        cfg.kinds = vec![PerturbationKind::Shuffle];
        cfg.severities = vec![1, 5];
        cfg.cache_dir = Some(dir.path().join("cache"));
        let results = run_sweep(&cfg, &catalog, &users).unwrap();
        assert_eq!(results.records.len(), 4);
        for record in &results.records {
            assert!(
                record.scores.aggregate > 0.0 && record.scores.aggregate < 1.0,
                "live aggregate out of (0, 1): {}",
                record.scores.aggregate
            );
        }

        // Rerun into a fresh output file; every completion must come from cache.
        cfg.output_path = dir.path().join("live2.jsonl");
        let rerun = run_sweep(&cfg, &catalog, &users).unwrap();
        assert_eq!(rerun.records.len(), 4);
        for (a, b) in results.records.iter().zip(&rerun.records) {
            assert_eq!(a.original_text, b.original_text, "cache miss on rerun");
            assert_eq!(a.perturbed_text, b.perturbed_text, "cache miss on rerun");
        }
    });
}
