//! Command-line front end. Exit codes: 0 success, 1 domain error
//! (one machine-parseable line on stderr), 2 usage error (clap).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{self, MetricValue, StrategyKind, StudyConfig};
use crate::graphs::{self, ComparisonGraph};
use crate::io::{self, EloRecord, GraphRecord, QrelRecord, ScoreRecord};
use crate::pipeline::{self, HumanLabelRecord, RunConfig, SquashKind, ThresholdMap};
use crate::solver::{FitOptions, FitReport, InitStrategy, ModelKind};
use crate::types::{CandidateSet, PreferenceRecord};

/// Toolkit version plus the wire-format versions it reads and writes.
const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (jsonl format 1, manifest format 1, study csv format 1)"
);

#[derive(Parser)]
#[command(name = "zelo", version = VERSION, about = "pairwise preferences to pointwise scores")]
struct Cli {
    /// Cap on worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Seed override; wins over any config file value.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a comparison graph and print it as JSON.
    SampleGraph(SampleGraphArgs),
    /// Fit pointwise scores from a preference file, one model per query.
    Fit(FitArgs),
    /// Judge every sampled pair and emit preference records, without fitting.
    Annotate(AnnotateArgs),
    /// Full pipeline: annotate, fit, and write sft/pairs/elos/manifest.
    Run(RunArgs),
    /// Mine contradicted human labels into hard pairwise examples.
    Mine(MineArgs),
    /// Budget-accuracy convergence study over sampling strategies.
    Study(StudyArgs),
    /// Score ranked lists against relevance judgments.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SampleGraphArgs {
    /// One of: random, bipartite, cycles, greedy.
    #[arg(long)]
    strategy: StrategyKind,
    /// Number of nodes.
    #[arg(long)]
    n: usize,
    /// Edge budget (random, greedy) or target edge count (bipartite).
    #[arg(long)]
    budget: Option<usize>,
    /// Cycles per-node degree (cycles strategy only, even).
    #[arg(long)]
    k: Option<usize>,
    /// Left partition size (bipartite only; wins over --budget).
    #[arg(long)]
    split: Option<usize>,
    /// Preference file answering greedy oracle lookups (greedy only).
    #[arg(long)]
    prefs: Option<PathBuf>,
    /// Query to select from --prefs when it holds several.
    #[arg(long)]
    query_id: Option<String>,
    /// Print degree/diameter statistics instead of the edge list.
    #[arg(long)]
    stats: bool,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Preference records (JSONL), any number of queries.
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value_t = ModelKind::Thurstone)]
    model: ModelKind,
    /// Node count override; default is the largest index plus one per query.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    prob_clamp_eps: Option<f64>,
    /// One of: zeros, seed-random.
    #[arg(long)]
    init: Option<InitStrategy>,
    /// Output path for elo records; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnnotateArgs {
    /// Run config (JSON): inputs, judges, graph spec.
    #[arg(long)]
    config: PathBuf,
    /// Output path for preference records; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Run config (JSON): inputs, judges, graph spec, output directory.
    #[arg(long)]
    config: PathBuf,
    /// Output directory override.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Model override.
    #[arg(long)]
    model: Option<ModelKind>,
    /// Squash override: logistic or minmax.
    #[arg(long)]
    squash: Option<SquashKind>,
}

#[derive(Args)]
struct MineArgs {
    /// Pointwise scores (JSONL), grouped per query in file order.
    #[arg(long)]
    scores: PathBuf,
    /// Human-preferred documents (JSONL).
    #[arg(long)]
    human: PathBuf,
    /// Per-dataset rank threshold map (JSON).
    #[arg(long)]
    threshold_map: Option<PathBuf>,
    /// Flat threshold; wins over --threshold-map.
    #[arg(long)]
    threshold: Option<usize>,
    /// Output path for mined pairs; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    /// Study config (JSON): n, strategies, budgets, oracle.
    #[arg(long)]
    config: PathBuf,
    /// Trial count override.
    #[arg(long)]
    trials: Option<usize>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Ranked scores (JSONL): query_id, doc_id, score.
    #[arg(long)]
    ranked: PathBuf,
    /// Relevance judgments (JSONL): query_id, doc_id, rel.
    #[arg(long)]
    qrels: PathBuf,
    /// Cutoff for both metrics.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Minimum relevance that counts for recall.
    #[arg(long, default_value_t = 1.0)]
    recall_threshold: f64,
    /// Optional per-query metrics output (JSONL).
    #[arg(long)]
    per_query: Option<PathBuf>,
}

/// Runs the CLI and returns the process exit code.
pub fn main_entry() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build_global();
        if let Err(e) = pool {
            log::warn!("worker pool already initialized: {e}");
        }
    }
    match dispatch(cli.command, cli.seed) {
        Ok(()) => 0,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} message={message}", e.kind_slug());
            1
        }
    }
}

fn dispatch(command: Command, seed: Option<u64>) -> Result<()> {
    match command {
        Command::SampleGraph(args) => cmd_sample_graph(args, seed.unwrap_or(0)),
        Command::Fit(args) => cmd_fit(args, seed),
        Command::Annotate(args) => cmd_annotate(args, seed),
        Command::Run(args) => cmd_run(args, seed),
        Command::Mine(args) => cmd_mine(args),
        Command::Study(args) => cmd_study(args, seed),
        Command::Eval(args) => cmd_eval(args),
    }
}

/// Writes bytes to the path, or to stdout when no path is given.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => io::atomic_write(path, bytes),
        None => {
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| Error::File { path: "<stdout>".into(), message: e.to_string() })
        }
    }
}

fn emit_jsonl<T: Serialize>(out: Option<&Path>, rows: &[T]) -> Result<()> {
    emit(out, &io::jsonl_bytes(rows)?)
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    emit(out, &bytes)
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    io::read_json(path)
}

fn cmd_sample_graph(args: SampleGraphArgs, seed: u64) -> Result<()> {
    let need_budget = || {
        args.budget.ok_or_else(|| {
            Error::Config(format!("--budget is required for strategy {}", args.strategy))
        })
    };
    let graph = match args.strategy {
        StrategyKind::Random => graphs::sample_random_pairs(args.n, need_budget()?, seed)?,
        StrategyKind::Cycles => {
            let k = args
                .k
                .ok_or_else(|| Error::Config("--k is required for strategy cycles".into()))?;
            graphs::sample_cycle_union(args.n, k, seed)?
        }
        StrategyKind::Bipartite => {
            let split = match args.split {
                Some(l) => l,
                None => eval::bipartite_split_for_budget(args.n, need_budget()?)?,
            };
            graphs::sample_bipartite(args.n, split)?
        }
        StrategyKind::Greedy => sample_greedy_from_prefs(&args, need_budget()?, seed)?,
    };
    if args.stats {
        emit_json(args.out.as_deref(), &graphs::graph_stats(&graph))
    } else {
        emit_json(args.out.as_deref(), &GraphRecord::from_graph(&graph))
    }
}

/// Greedy sampling needs judged pairs; on the command line those come from
/// an existing preference file acting as the oracle.
fn sample_greedy_from_prefs(
    args: &SampleGraphArgs,
    budget: usize,
    seed: u64,
) -> Result<ComparisonGraph> {
    let path = args.prefs.as_ref().ok_or_else(|| {
        Error::Config("--prefs is required for strategy greedy (oracle lookups)".into())
    })?;
    let records: Vec<PreferenceRecord> = io::read_jsonl(path)?;
    let query_id = match &args.query_id {
        Some(id) => id.clone(),
        None => {
            let mut ids: Vec<&str> = records.iter().map(|r| r.query_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            match ids.as_slice() {
                [only] => only.to_string(),
                [] => return Err(Error::Config("preference file is empty".into())),
                _ => {
                    return Err(Error::Config(
                        "preference file holds several queries; pass --query-id".into(),
                    ))
                }
            }
        }
    };
    let mut table = BTreeMap::new();
    for r in records.iter().filter(|r| r.query_id == query_id) {
        let (a, b) = (r.i.min(r.j), r.i.max(r.j));
        let p = if r.i < r.j { r.p } else { 1.0 - r.p };
        table.insert((a, b), p);
    }
    if table.is_empty() {
        return Err(Error::UnknownQuery(query_id));
    }
    let oracle = |i: usize, j: usize| -> Result<f64> {
        let (a, b) = (i.min(j), i.max(j));
        let p = *table.get(&(a, b)).ok_or_else(|| {
            Error::Config(format!("preference file lacks pair ({a}, {b}) needed by greedy"))
        })?;
        Ok(if i < j { p } else { 1.0 - p })
    };
    let (graph, _) = graphs::sample_entropy_greedy(
        args.n,
        budget,
        &query_id,
        oracle,
        ModelKind::Thurstone,
        seed,
    )?;
    Ok(graph)
}

fn cmd_fit(args: FitArgs, seed: Option<u64>) -> Result<()> {
    let records: Vec<PreferenceRecord> = io::read_jsonl(&args.matrix)?;
    if records.is_empty() {
        return Err(Error::Config(format!("{}: no preference records", args.matrix.display())));
    }
    let mut opts = FitOptions::default();
    if let Some(v) = args.max_iters {
        opts.max_iters = v;
    }
    if let Some(v) = args.grad_tol {
        opts.grad_tol = v;
    }
    if let Some(v) = args.prob_clamp_eps {
        opts.prob_clamp_eps = v;
    }
    if let Some(init) = args.init {
        opts.init = init;
    }
    if let (Some(seed), InitStrategy::SeedRandom(_)) = (seed, &opts.init) {
        opts.init = InitStrategy::SeedRandom(seed);
    }

    // Group by query in first-appearance order.
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&PreferenceRecord>> = BTreeMap::new();
    for r in &records {
        let slot = groups.entry(&r.query_id).or_default();
        if slot.is_empty() {
            order.push(&r.query_id);
        }
        slot.push(r);
    }

    let mut out_rows = Vec::with_capacity(order.len());
    for query_id in order {
        let group = &groups[query_id];
        let max_index = group.iter().map(|r| r.i.max(r.j)).max().unwrap_or(0);
        let n = match args.n {
            Some(n) => n,
            None => max_index + 1,
        };
        let owned: Vec<PreferenceRecord> = group.iter().map(|&r| r.clone()).collect();
        let matrix = crate::types::build_preference_matrix(&owned, n)?;
        let report: FitReport = crate::solver::fit_elos(&matrix, args.model, &opts)?;
        if !report.converged {
            log::warn!(
                "query {query_id}: not converged after {} iterations (grad {:.3e})",
                report.iterations,
                report.final_grad_norm
            );
        }
        out_rows.push(EloRecord {
            query_id: query_id.to_string(),
            elos: report.elos.scores().to_vec(),
            model: args.model,
            converged: report.converged,
            iterations: report.iterations,
        });
    }
    emit_jsonl(args.out.as_deref(), &out_rows)
}

fn cmd_annotate(args: AnnotateArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg: RunConfig = read_config(&args.config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let records = pipeline::annotate_dataset(&cfg)?;
    emit_jsonl(args.out.as_deref(), &records)
}

fn cmd_run(args: RunArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg: RunConfig = read_config(&args.config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out_dir) = args.out_dir {
        cfg.out_dir = out_dir;
    }
    if let Some(model) = args.model {
        cfg.model = model;
    }
    if let Some(squash) = args.squash {
        cfg.squash = squash;
    }
    let manifest = pipeline::run_dataset(&cfg)?;
    log::info!(
        "run complete: {} queries ({} failed), {} ensemble judgments",
        manifest.queries_total,
        manifest.queries_failed,
        manifest.ensemble_judgments
    );
    emit_json(None, &manifest)
}

fn cmd_mine(args: MineArgs) -> Result<()> {
    let scores: Vec<ScoreRecord> = io::read_jsonl(&args.scores)?;
    let human: Vec<HumanLabelRecord> = io::read_jsonl(&args.human)?;
    let thresholds = match (&args.threshold, &args.threshold_map) {
        (Some(t), _) => ThresholdMap { default: *t, datasets: Default::default() },
        (None, Some(path)) => read_config(path)?,
        (None, None) => ThresholdMap::default(),
    };

    // Scores grouped per query in file order; duplicates within a query are
    // configuration errors because ranks would be ambiguous.
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, (Vec<String>, Vec<f64>)> = BTreeMap::new();
    for r in &scores {
        let slot = groups.entry(&r.query_id).or_default();
        if slot.0.is_empty() {
            order.push(&r.query_id);
        }
        if slot.0.contains(&r.doc_id) {
            return Err(Error::DuplicateId(format!("{}/{}", r.query_id, r.doc_id)));
        }
        slot.0.push(r.doc_id.clone());
        slot.1.push(r.score);
    }

    let mut mined = Vec::new();
    for label in &human {
        let (doc_ids, vals) = groups
            .get(label.query_id.as_str())
            .ok_or_else(|| Error::UnknownQuery(label.query_id.clone()))?;
        let cs = CandidateSet::new(label.query_id.clone(), doc_ids.clone(), doc_ids.len().max(2))?;
        let threshold = thresholds.lookup(&label.query_id);
        if let Some(pair) = pipeline::mine_failures(&cs, vals, &label.doc_id, threshold)? {
            mined.push(pair);
        }
    }
    log::info!("mined {} pairs from {} human labels", mined.len(), human.len());
    emit_jsonl(args.out.as_deref(), &mined)
}

fn cmd_study(args: StudyArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg: StudyConfig = read_config(&args.config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    let table = eval::convergence_study(&cfg)?;
    emit(args.out.as_deref(), table.to_csv().as_bytes())
}

#[derive(Serialize)]
struct MetricSummary {
    mean_all: f64,
    mean_excluding_degenerate: f64,
    degenerate_queries: usize,
}

#[derive(Serialize)]
struct EvalSummary {
    k: usize,
    recall_threshold: f64,
    queries: usize,
    ndcg: MetricSummary,
    recall: MetricSummary,
}

#[derive(Serialize)]
struct PerQueryMetrics {
    query_id: String,
    ndcg: f64,
    recall: f64,
    ndcg_degenerate: bool,
    recall_degenerate: bool,
}

fn summarize_metric(values: &[MetricValue]) -> MetricSummary {
    let mean = |vals: &[f64]| {
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    let all: Vec<f64> = values.iter().map(|m| m.value).collect();
    let clean: Vec<f64> = values.iter().filter(|m| !m.degenerate).map(|m| m.value).collect();
    MetricSummary {
        mean_all: mean(&all),
        mean_excluding_degenerate: mean(&clean),
        degenerate_queries: values.len() - clean.len(),
    }
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let scores: Vec<ScoreRecord> = io::read_jsonl(&args.ranked)?;
    let qrels: Vec<QrelRecord> = io::read_jsonl(&args.qrels)?;
    let lists = eval::ranked_lists_from_records(&scores, &qrels)?;
    if lists.is_empty() {
        return Err(Error::Config("no queries shared between scores and qrels".into()));
    }
    let mut ndcgs = Vec::with_capacity(lists.len());
    let mut recalls = Vec::with_capacity(lists.len());
    let mut per_query = Vec::with_capacity(lists.len());
    for list in &lists {
        let ndcg = eval::ndcg_at_k(list, args.k)?;
        let recall = eval::recall_at_k(list, args.k, args.recall_threshold)?;
        per_query.push(PerQueryMetrics {
            query_id: list.query_id.clone(),
            ndcg: ndcg.value,
            recall: recall.value,
            ndcg_degenerate: ndcg.degenerate,
            recall_degenerate: recall.degenerate,
        });
        ndcgs.push(ndcg);
        recalls.push(recall);
    }
    if let Some(path) = &args.per_query {
        emit_jsonl(Some(path), &per_query)?;
    }
    let summary = EvalSummary {
        k: args.k,
        recall_threshold: args.recall_threshold,
        queries: lists.len(),
        ndcg: summarize_metric(&ndcgs),
        recall: summarize_metric(&recalls),
    };
    emit_json(None, &summary)
}
