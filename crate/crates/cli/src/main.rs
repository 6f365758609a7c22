//! `robustexplain`: dataset generation, perturbation, paired evaluation,
//! statistical analysis, report export and one-off pair scoring.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use robustexplain_core::analysis::analyze;
use robustexplain_core::datagen::{generate_catalog, generate_users, DataGenConfig};
use robustexplain_core::harness::{run_sweep, ResultSet, SweepConfig};
use robustexplain_core::llm::{GeneratorKind, ModelConfig, WireProtocol};
use robustexplain_core::metrics::{score_pair, KeywordLexicon};
use robustexplain_core::perturb::apply;
use robustexplain_core::report::{
    export, table_correlation, table_model_by_perturbation, table_per_metric, table_severity,
    write_severity_curve, ExportFormat,
};
use robustexplain_core::{Catalog, Dataset, PerturbationKind, PerturbationSpec};

use config::{pick, FileConfig};

const ENDPOINT_ENV: &str = "ROBUSTEXPLAIN_ENDPOINT";
const API_KEY_ENV: &str = "ROBUSTEXPLAIN_API_KEY";

#[derive(Parser)]
#[command(name = "robustexplain", version, about = "Robustness evaluation for recommendation explanations")]
struct Cli {
    /// Optional TOML config file; flags > env > file > defaults.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic item catalog and user histories.
    GenData(GenDataArgs),
    /// Apply one perturbation to one user's history and show the diff.
    Perturb(PerturbArgs),
    /// Run the paired evaluation sweep and write a result file.
    Evaluate(EvaluateArgs),
    /// Run the statistical analyses over one or more result files.
    Analyze(AnalyzeArgs),
    /// Export the report tables and severity-curve data.
    Report(ReportArgs),
    /// Score one explanation pair read from two text files.
    Score(ScoreArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    user: String,
    #[arg(long = "type")]
    kind: PerturbationKind,
    #[arg(long)]
    severity: u8,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    /// remote | mock-order | mock-hist | mock-echo
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    api_key: Option<String>,
    /// chat | generate (remote wire shape)
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<PerturbationKind>>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<u8>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, num_args = 1.., required = true)]
    results: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, num_args = 1.., required = true)]
    results: Vec<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ExportFormat,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    perturbed: PathBuf,
    /// Dataset whose catalog seeds the keyword lexicon; a generic lexicon is
    /// used when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    let file = match FileConfig::load(cli.config.as_deref()) {
        Ok(file) => file,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(1);
        }
    };

    match run(cli.command, &file) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}\nRun with --help for usage.");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command, file: &FileConfig) -> Result<String, CliError> {
    match command {
        Command::GenData(args) => gen_data(args, file),
        Command::Perturb(args) => perturb(args),
        Command::Evaluate(args) => evaluate(args, file),
        Command::Analyze(args) => analyze_cmd(args),
        Command::Report(args) => report(args),
        Command::Score(args) => score(args, file),
    }
}

fn load_dataset(path: &std::path::Path) -> Result<Dataset, CliError> {
    Dataset::load(path).map_err(CliError::runtime)
}

fn load_results(paths: &[PathBuf]) -> Result<Vec<ResultSet>, CliError> {
    paths.iter().map(|p| ResultSet::load(p).map_err(CliError::runtime)).collect()
}

fn gen_data(args: GenDataArgs, file: &FileConfig) -> Result<String, CliError> {
    let defaults = DataGenConfig::default();
    let cfg = DataGenConfig {
        seed: pick([args.seed, file.data.seed], defaults.seed),
        n_items: pick([args.items, file.data.items], defaults.n_items),
        n_users: pick([args.users, file.data.users], defaults.n_users),
        ..defaults
    };
    let catalog = generate_catalog(&cfg).map_err(CliError::runtime)?;
    let users = generate_users(&cfg, &catalog).map_err(CliError::runtime)?;
    let dataset = Dataset::new(catalog, users);
    dataset.save(&args.out).map_err(CliError::runtime)?;
    Ok(format!(
        "gen-data: wrote {} items and {} users (seed {}) to {}",
        dataset.items.len(),
        dataset.users.len(),
        cfg.seed,
        args.out.display()
    ))
}

fn perturb(args: PerturbArgs) -> Result<String, CliError> {
    let dataset = load_dataset(&args.data)?;
    let catalog = dataset.catalog();
    let user = dataset
        .users
        .iter()
        .find(|u| u.id == args.user)
        .ok_or_else(|| CliError::Usage(format!("unknown user id: {}", args.user)))?;
    let spec = PerturbationSpec::new(args.kind, args.severity, args.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let perturbed = apply(user, &spec, &catalog).map_err(CliError::runtime)?;
    let json = serde_json::to_string_pretty(&perturbed).map_err(CliError::runtime)?;
    if let Some(out) = &args.out {
        std::fs::write(out, json).map_err(CliError::runtime)?;
    } else {
        println!("{json}");
    }
    Ok(format!(
        "perturb: {} L{} on {}: {} -> {} interactions (+{} injected, {} replaced, {} fields removed, {} permuted)",
        args.kind,
        args.severity,
        user.id,
        user.interactions.len(),
        perturbed.interactions.len(),
        perturbed.injected_ids.len(),
        perturbed.replaced_count,
        perturbed.removed_field_count,
        perturbed.permuted_count,
    ))
}

fn parse_protocol(value: &str) -> Result<WireProtocol, CliError> {
    match value {
        "chat" | "chat-completions" => Ok(WireProtocol::ChatCompletions),
        "generate" => Ok(WireProtocol::Generate),
        other => Err(CliError::Usage(format!("unknown protocol: {other} (chat | generate)"))),
    }
}

fn build_generator(args: &EvaluateArgs, file: &FileConfig) -> Result<GeneratorKind, CliError> {
    let label = pick(
        [args.generator.clone(), file.evaluate.generator.clone()],
        "mock-order".to_string(),
    );
    match label.as_str() {
        "mock-order" => Ok(GeneratorKind::MockOrderInvariant),
        "mock-hist" => Ok(GeneratorKind::MockCategoryHistogram),
        "mock-echo" => Ok(GeneratorKind::MockEcho),
        "remote" => {
            let endpoint = pick(
                [
                    args.endpoint.clone(),
                    std::env::var(ENDPOINT_ENV).ok(),
                    file.evaluate.endpoint.clone(),
                ],
                String::new(),
            );
            if endpoint.is_empty() {
                return Err(CliError::Usage(format!(
                    "remote generator needs an endpoint (--endpoint, {ENDPOINT_ENV} or the config file)"
                )));
            }
            let model = pick([args.model.clone(), file.evaluate.model.clone()], String::new());
            if model.is_empty() {
                return Err(CliError::Usage(
                    "remote generator needs a model id (--model or the config file)".into(),
                ));
            }
            let mut model_cfg = ModelConfig::new(model, endpoint);
            model_cfg.api_key = [
                args.api_key.clone(),
                std::env::var(API_KEY_ENV).ok(),
                file.evaluate.api_key.clone(),
            ]
            .into_iter()
            .flatten()
            .next();
            if let Some(protocol) =
                [args.protocol.clone(), file.evaluate.protocol.clone()].into_iter().flatten().next()
            {
                model_cfg.protocol = parse_protocol(&protocol)?;
            }
            Ok(GeneratorKind::Remote(model_cfg))
        }
        other => Err(CliError::Usage(format!(
            "unknown generator: {other} (remote | mock-order | mock-hist | mock-echo)"
        ))),
    }
}

fn evaluate(args: EvaluateArgs, file: &FileConfig) -> Result<String, CliError> {
    let dataset = load_dataset(&args.data)?;
    let catalog = dataset.catalog();
    let generator = build_generator(&args, file)?;

    let mut cfg = SweepConfig::new(generator, args.out.clone());
    cfg.n_eval_users = pick([args.users, file.evaluate.users], cfg.n_eval_users);
    if let Some(kinds) = args.kinds {
        cfg.kinds = kinds;
    } else if let Some(kinds) = &file.evaluate.kinds {
        cfg.kinds = kinds
            .iter()
            .map(|k| k.parse().map_err(|e: robustexplain_core::domain::DomainError| CliError::Usage(e.to_string())))
            .collect::<Result<_, _>>()?;
    }
    if let Some(levels) = args.levels.or_else(|| file.evaluate.levels.clone()) {
        cfg.severities = levels;
    }
    cfg.seed = pick([args.seed, file.evaluate.seed], cfg.seed);
    cfg.worker_count = pick([args.workers, file.evaluate.workers], cfg.worker_count);
    cfg.cache_dir = [args.cache_dir, file.evaluate.cache_dir.clone()].into_iter().flatten().next();
    if let Some(weights) = file.weights {
        cfg.weights = weights;
    }

    let results = run_sweep(&cfg, &catalog, &dataset.users).map_err(CliError::runtime)?;
    let summary = format!(
        "evaluate: wrote {} records ({} failures) to {}",
        results.records.len(),
        results.failures.len(),
        args.out.display()
    );
    if results.failures.is_empty() {
        Ok(summary)
    } else {
        // Partial results stay on disk; a nonzero failure count is a runtime
        // failure so pipelines notice it.
        Err(CliError::Runtime(summary))
    }
}

fn analyze_cmd(args: AnalyzeArgs) -> Result<String, CliError> {
    let results = load_results(&args.results)?;
    let doc = analyze(&results).map_err(CliError::runtime)?;
    let json = serde_json::to_string_pretty(&doc).map_err(CliError::runtime)?;
    std::fs::write(&args.out, json).map_err(CliError::runtime)?;
    Ok(format!(
        "analyze: {} records from {} result file(s) -> {}",
        doc.record_count,
        args.results.len(),
        args.out.display()
    ))
}

fn report(args: ReportArgs) -> Result<String, CliError> {
    let results = load_results(&args.results)?;
    std::fs::create_dir_all(&args.out).map_err(CliError::runtime)?;
    let extension = match args.format {
        ExportFormat::Csv => "csv",
        ExportFormat::Json => "json",
        ExportFormat::Markdown => "md",
    };
    let tables = [
        table_model_by_perturbation(&results).map_err(CliError::runtime)?,
        table_per_metric(&results).map_err(CliError::runtime)?,
        table_severity(&results).map_err(CliError::runtime)?,
        table_correlation(&results).map_err(CliError::runtime)?,
    ];
    for table in &tables {
        let path = args.out.join(format!("{}.{extension}", table.name));
        export(table, args.format, &path).map_err(CliError::runtime)?;
    }
    write_severity_curve(&results, &args.out.join("severity_curve.csv"))
        .map_err(CliError::runtime)?;
    Ok(format!(
        "report: wrote {} tables and severity_curve.csv to {}",
        tables.len(),
        args.out.display()
    ))
}

fn score(args: ScoreArgs, file: &FileConfig) -> Result<String, CliError> {
    let original = std::fs::read_to_string(&args.original).map_err(CliError::runtime)?;
    let perturbed = std::fs::read_to_string(&args.perturbed).map_err(CliError::runtime)?;
    let lexicon = match &args.data {
        Some(path) => KeywordLexicon::from_catalog(&load_dataset(path)?.catalog()),
        None => KeywordLexicon::from_catalog(&Catalog { categories: vec![], items: vec![] }),
    };
    let weights = file.weights.unwrap_or_default();
    let scores = score_pair(&original, &perturbed, &lexicon, &weights);
    Ok(format!(
        "score: semantic={:.4} keyword={:.4} structural={:.4} length={:.4} aggregate={:.4}",
        scores.semantic, scores.keyword, scores.structural, scores.length, scores.aggregate
    ))
}
