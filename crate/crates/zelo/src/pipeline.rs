//! End-to-end runs: graph sampling, ensemble annotation, Elo fitting, and
//! dataset emission, plus failure mining against an external ranking.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::ensemble_score;
use crate::error::{Error, Result};
use crate::eval::StrategyKind;
use crate::graphs::{
    sample_bipartite, sample_cycle_union, sample_entropy_greedy, sample_random_pairs,
    ComparisonGraph,
};
use crate::io::{self, EloRecord};
use crate::judges::{Judge, JudgeSpec, PairRequest};
use crate::solver::{fit_elos, sigmoid, FitOptions, FitReport, ModelKind};
use crate::types::{
    build_preference_matrix, CandidateSet, Document, EloVector, PreferenceRecord, Query,
};
use crate::util::{derive_seed, derive_seed_str};

/// One supervised fine-tuning row: the fitted Elo squashed into a [0,1]
/// target plus the 1-indexed rank under descending Elo.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SftRecord {
    pub query_id: String,
    pub doc_id: String,
    pub elo: f64,
    pub target: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairSource {
    RandomPair,
    FailureMined,
}

/// One judged pair for training a pairwise model with BCE.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PairwiseExportRecord {
    pub query_id: String,
    pub i: usize,
    pub j: usize,
    pub p: f64,
    pub source: PairSource,
}

/// How per-query Elos squash into [0,1] SFT targets. Both are monotone,
/// so the target order always equals the Elo order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SquashKind {
    /// target = sigmoid(elo); keeps cross-query comparability.
    #[default]
    Logistic,
    /// Per-query affine map with max -> 1 and min -> 0; all-equal Elos
    /// degenerate to 0.5.
    Minmax,
}

impl std::fmt::Display for SquashKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SquashKind::Logistic => "logistic",
            SquashKind::Minmax => "minmax",
        })
    }
}

impl std::str::FromStr for SquashKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(SquashKind::Logistic),
            "minmax" => Ok(SquashKind::Minmax),
            other => Err(Error::InvalidParam(format!(
                "unknown squash {other}; expected logistic|minmax"
            ))),
        }
    }
}

/// Comparison graph choice for annotation. Cycle unions that cannot fit
/// (k >= n or n < 3) degrade to the complete graph, which is smaller than
/// the kn/2 budget they were allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    Cycles {
        #[serde(default = "default_k")]
        k: usize,
    },
    Random {
        budget: usize,
    },
    Bipartite {
        split: usize,
    },
    Greedy {
        budget: usize,
    },
}

fn default_k() -> usize {
    8
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec::Cycles { k: default_k() }
    }
}

impl GraphSpec {
    pub fn strategy(&self) -> StrategyKind {
        match self {
            GraphSpec::Cycles { .. } => StrategyKind::Cycles,
            GraphSpec::Random { .. } => StrategyKind::Random,
            GraphSpec::Bipartite { .. } => StrategyKind::Bipartite,
            GraphSpec::Greedy { .. } => StrategyKind::Greedy,
        }
    }
}

fn complete_graph(n: usize) -> Result<ComparisonGraph> {
    let mut g = ComparisonGraph::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            g.insert(i, j)?;
        }
    }
    Ok(g)
}

fn sample_for_spec(spec: &GraphSpec, n: usize, seed: u64) -> Result<ComparisonGraph> {
    match *spec {
        GraphSpec::Cycles { k } => {
            if n < 3 || k >= n {
                complete_graph(n)
            } else {
                sample_cycle_union(n, k, seed)
            }
        }
        GraphSpec::Random { budget } => sample_random_pairs(n, budget, seed),
        GraphSpec::Bipartite { split } => sample_bipartite(n, split),
        GraphSpec::Greedy { .. } => unreachable!("greedy drives its own sampling"),
    }
}

/// Everything annotation learned about one query.
#[derive(Debug, Clone)]
pub struct AnnotateOutcome {
    pub graph: ComparisonGraph,
    pub records: Vec<PreferenceRecord>,
    /// Ensemble judgments spent: one per judged pair.
    pub ensemble_judgments: usize,
    /// Individual judge verdicts summed over all ensembles.
    pub judge_verdicts: usize,
    pub warnings: Vec<String>,
}

/// Builds the comparison graph for a candidate set and obtains one
/// ensemble judgment per edge. `p` is the unit-mapped ensemble score for
/// the lower-index document of the pair; weight is always 1.
pub fn annotate_query(
    cs: &CandidateSet,
    query: &Query,
    doc_texts: &[&str],
    judges: &[Box<dyn Judge>],
    graph_spec: &GraphSpec,
    model: ModelKind,
    seed: u64,
) -> Result<AnnotateOutcome> {
    let n = cs.k();
    if doc_texts.len() != n {
        return Err(Error::InvalidParam(format!(
            "candidate set {} has {} docs but {} texts were supplied",
            cs.query_id,
            n,
            doc_texts.len()
        )));
    }
    let qseed = derive_seed_str(seed, &cs.query_id);
    let graph_seed = derive_seed(qseed, 0);

    let mut ensemble_judgments = 0usize;
    let mut judge_verdicts = 0usize;
    let mut warnings = Vec::new();

    let mut judge_edge = |a: usize, b: usize, edge_seed: u64| -> Result<f64> {
        let pair = PairRequest {
            query_id: &cs.query_id,
            query_text: &query.text,
            first_index: a,
            first_text: doc_texts[a],
            second_index: b,
            second_text: doc_texts[b],
        };
        let outcome = ensemble_score(judges, &pair, edge_seed)?;
        ensemble_judgments += 1;
        judge_verdicts += outcome.score.samples;
        warnings.extend(outcome.warnings);
        Ok(outcome.score.unit)
    };

    let (graph, records) = match *graph_spec {
        GraphSpec::Greedy { budget } => {
            let mut edge_index = 0u64;
            sample_entropy_greedy(
                n,
                budget,
                &cs.query_id,
                |a, b| {
                    edge_index += 1;
                    judge_edge(a, b, derive_seed(qseed, edge_index))
                },
                model,
                graph_seed,
            )?
        }
        _ => {
            let graph = sample_for_spec(graph_spec, n, graph_seed)?;
            let mut records = Vec::with_capacity(graph.edge_count());
            for (edge_index, (i, j)) in graph.edges().enumerate() {
                let p = judge_edge(i, j, derive_seed(qseed, 1 + edge_index as u64))?;
                records.push(PreferenceRecord {
                    query_id: cs.query_id.clone(),
                    i,
                    j,
                    p,
                    weight: 1.0,
                });
            }
            (graph, records)
        }
    };

    Ok(AnnotateOutcome { graph, records, ensemble_judgments, judge_verdicts, warnings })
}

/// Builds the sparse preference matrix from the records and fits Elos.
pub fn compute_zelo(
    records: &[PreferenceRecord],
    n: usize,
    model: ModelKind,
    opts: &FitOptions,
) -> Result<FitReport> {
    let w = build_preference_matrix(records, n)?;
    fit_elos(&w, model, opts)
}

/// Squashes fitted Elos into SFT targets and assigns ranks (1-indexed by
/// descending Elo, ties broken by candidate order). Rows come out in
/// candidate order.
pub fn emit_sft(cs: &CandidateSet, elos: &EloVector, squash: SquashKind) -> Result<Vec<SftRecord>> {
    let n = cs.k();
    if elos.len() != n {
        return Err(Error::InvalidParam(format!(
            "candidate set {} has {} docs but {} elos were supplied",
            cs.query_id,
            n,
            elos.len()
        )));
    }
    let scores = elos.scores();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("elos are finite"));
    let mut rank = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        rank[idx] = pos + 1;
    }

    let targets: Vec<f64> = match squash {
        SquashKind::Logistic => scores.iter().map(|&e| sigmoid(e)).collect(),
        SquashKind::Minmax => {
            let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == min {
                vec![0.5; n]
            } else {
                scores.iter().map(|&e| (e - min) / (max - min)).collect()
            }
        }
    };

    Ok((0..n)
        .map(|idx| SftRecord {
            query_id: cs.query_id.clone(),
            doc_id: cs.doc_ids[idx].clone(),
            elo: scores[idx],
            target: targets[idx],
            rank: rank[idx],
        })
        .collect())
}

/// A failure-mined judgment request: the human-preferred document against
/// the one ranked immediately better than it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MinedPairRecord {
    pub query_id: String,
    pub human_doc: String,
    pub partner_doc: String,
    pub human_rank: usize,
    pub threshold: usize,
}

/// Ranks candidates by descending pointwise score (ties by candidate
/// order) and, when the human-preferred document lands strictly below the
/// threshold rank, pairs it with the document one rank better.
pub fn mine_failures(
    cs: &CandidateSet,
    scores: &[f64],
    human_top: &str,
    threshold: usize,
) -> Result<Option<MinedPairRecord>> {
    if threshold < 1 {
        return Err(Error::InvalidParam("mining threshold must be >= 1".into()));
    }
    if scores.len() != cs.k() {
        return Err(Error::InvalidParam(format!(
            "candidate set {} has {} docs but {} scores were supplied",
            cs.query_id,
            cs.k(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("pointwise score"));
    }
    let human_idx = cs
        .index_of(human_top)
        .ok_or_else(|| Error::UnknownDocument(human_top.to_string()))?;

    let mut order: Vec<usize> = (0..cs.k()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("validated finite"));
    let human_rank = order.iter().position(|&idx| idx == human_idx).expect("index present") + 1;
    if human_rank <= threshold {
        return Ok(None);
    }
    let partner_idx = order[human_rank - 2];
    Ok(Some(MinedPairRecord {
        query_id: cs.query_id.clone(),
        human_doc: human_top.to_string(),
        partner_doc: cs.doc_ids[partner_idx].clone(),
        human_rank,
        threshold,
    }))
}

/// Human preference label: the document annotators put first for a query.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HumanLabelRecord {
    pub query_id: String,
    pub doc_id: String,
}

/// Per-dataset mining thresholds. A query's dataset is the prefix before
/// the first '/' in its id (the whole id when there is none).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThresholdMap {
    #[serde(default = "default_threshold")]
    pub default: usize,
    #[serde(default)]
    pub datasets: HashMap<String, usize>,
}

fn default_threshold() -> usize {
    5
}

impl Default for ThresholdMap {
    fn default() -> Self {
        Self { default: default_threshold(), datasets: HashMap::new() }
    }
}

impl ThresholdMap {
    pub fn lookup(&self, query_id: &str) -> usize {
        let dataset = query_id.split('/').next().unwrap_or(query_id);
        self.datasets.get(dataset).copied().unwrap_or(self.default)
    }
}

fn default_max_candidates() -> usize {
    100
}

fn default_model() -> ModelKind {
    ModelKind::Thurstone
}

/// Full configuration of a `run` invocation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub queries: PathBuf,
    pub documents: PathBuf,
    pub candidates: PathBuf,
    pub out_dir: PathBuf,
    pub judges: Vec<JudgeSpec>,
    #[serde(default)]
    pub graph: GraphSpec,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub squash: SquashKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_candidates")]
    pub max_candidates: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QueryManifest {
    pub query_id: String,
    pub candidates: usize,
    pub ensemble_judgments: usize,
    pub judge_verdicts: usize,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: usize,
    /// Set when the query was skipped; its rows appear in no output file.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub format_version: u32,
    pub seed: u64,
    pub model: ModelKind,
    pub squash: SquashKind,
    pub graph: GraphSpec,
    pub queries_total: usize,
    pub queries_failed: usize,
    pub ensemble_judgments: usize,
    pub judge_verdicts: usize,
    pub queries: Vec<QueryManifest>,
    /// Excluded from content_hash so reruns hash identically.
    pub wall_time_secs: f64,
    /// SHA-256 over the emitted sft/pairs/elos bytes and this manifest
    /// with wall_time_secs and content_hash zeroed.
    pub content_hash: String,
}

struct QueryOutput {
    manifest: QueryManifest,
    sft: Vec<SftRecord>,
    pairs: Vec<PairwiseExportRecord>,
    elos: Option<EloRecord>,
}

fn process_query(
    cs: &CandidateSet,
    queries: &HashMap<String, Query>,
    documents: &HashMap<String, Document>,
    judges: &[Box<dyn Judge>],
    cfg: &RunConfig,
) -> QueryOutput {
    let mut manifest = QueryManifest {
        query_id: cs.query_id.clone(),
        candidates: cs.k(),
        ensemble_judgments: 0,
        judge_verdicts: 0,
        converged: false,
        iterations: 0,
        warnings: 0,
        error: None,
    };
    let mut run = || -> Result<QueryOutput> {
        let query = queries
            .get(&cs.query_id)
            .ok_or_else(|| Error::UnknownQuery(cs.query_id.clone()))?;
        let doc_texts: Vec<&str> = cs
            .doc_ids
            .iter()
            .map(|id| {
                documents
                    .get(id)
                    .map(|d| d.text.as_str())
                    .ok_or_else(|| Error::UnknownDocument(id.clone()))
            })
            .collect::<Result<_>>()?;

        let annotated =
            annotate_query(cs, query, &doc_texts, judges, &cfg.graph, cfg.model, cfg.seed)?;
        manifest.ensemble_judgments = annotated.ensemble_judgments;
        manifest.judge_verdicts = annotated.judge_verdicts;
        manifest.warnings = annotated.warnings.len();
        for w in &annotated.warnings {
            log::warn!("query={} {w}", cs.query_id);
        }

        let report = compute_zelo(&annotated.records, cs.k(), cfg.model, &cfg.fit)?;
        manifest.converged = report.converged;
        manifest.iterations = report.iterations;

        let sft = emit_sft(cs, &report.elos, cfg.squash)?;
        let pairs = annotated
            .records
            .iter()
            .map(|r| PairwiseExportRecord {
                query_id: r.query_id.clone(),
                i: r.i,
                j: r.j,
                p: r.p,
                source: PairSource::RandomPair,
            })
            .collect();
        let elos = EloRecord {
            query_id: cs.query_id.clone(),
            elos: report.elos.scores().to_vec(),
            model: cfg.model,
            converged: report.converged,
            iterations: report.iterations,
        };
        Ok(QueryOutput { manifest: manifest.clone(), sft, pairs, elos: Some(elos) })
    };

    let result = run();
    match result {
        Ok(out) => out,
        Err(e) => {
            log::error!("query={} failed: {e}", cs.query_id);
            manifest.error = Some(e.to_string());
            QueryOutput { manifest, sft: Vec::new(), pairs: Vec::new(), elos: None }
        }
    }
}

/// Loaded and cross-validated run inputs.
pub struct Dataset {
    pub queries: HashMap<String, Query>,
    pub documents: HashMap<String, Document>,
    /// Candidate sets in input file order.
    pub candidate_sets: Vec<CandidateSet>,
}

impl Dataset {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let queries: Vec<Query> = io::read_jsonl(&cfg.queries)?;
        let documents: Vec<Document> = io::read_jsonl(&cfg.documents)?;

        #[derive(Deserialize)]
        struct CandidateRecord {
            query_id: String,
            doc_ids: Vec<String>,
        }
        let candidate_records: Vec<CandidateRecord> = io::read_jsonl(&cfg.candidates)?;

        let mut query_map = HashMap::with_capacity(queries.len());
        for q in queries {
            if query_map.insert(q.id.clone(), q).is_some() {
                return Err(Error::DuplicateId("query".into()));
            }
        }
        let mut doc_map = HashMap::with_capacity(documents.len());
        for d in documents {
            if doc_map.insert(d.id.clone(), d).is_some() {
                return Err(Error::DuplicateId("document".into()));
            }
        }
        let mut seen_queries = std::collections::HashSet::new();
        let candidate_sets: Vec<CandidateSet> = candidate_records
            .into_iter()
            .map(|r| {
                if !seen_queries.insert(r.query_id.clone()) {
                    return Err(Error::DuplicateId(format!("candidate set for {}", r.query_id)));
                }
                CandidateSet::new(r.query_id, r.doc_ids, cfg.max_candidates)
            })
            .collect::<Result<_>>()?;
        Ok(Self { queries: query_map, documents: doc_map, candidate_sets })
    }
}

fn build_judges(cfg: &RunConfig) -> Result<Vec<Box<dyn Judge>>> {
    if cfg.judges.is_empty() {
        return Err(Error::Config("run config lists no judges".into()));
    }
    cfg.judges.iter().enumerate().map(|(ordinal, spec)| spec.build(ordinal)).collect()
}

/// Annotation without fitting: judges every candidate set and returns the
/// preference records in input order. Unlike `run_dataset`, any query
/// failure aborts, since the output would otherwise silently lose queries.
pub fn annotate_dataset(cfg: &RunConfig) -> Result<Vec<PreferenceRecord>> {
    let ds = Dataset::load(cfg)?;
    let judges = build_judges(cfg)?;
    let per_query: Vec<Vec<PreferenceRecord>> = ds
        .candidate_sets
        .par_iter()
        .map(|cs| {
            let query = ds
                .queries
                .get(&cs.query_id)
                .ok_or_else(|| Error::UnknownQuery(cs.query_id.clone()))?;
            let doc_texts: Vec<&str> = cs
                .doc_ids
                .iter()
                .map(|id| {
                    ds.documents
                        .get(id)
                        .map(|d| d.text.as_str())
                        .ok_or_else(|| Error::UnknownDocument(id.clone()))
                })
                .collect::<Result<_>>()?;
            annotate_query(cs, query, &doc_texts, &judges, &cfg.graph, cfg.model, cfg.seed)
                .map(|o| o.records)
        })
        .collect::<Result<_>>()?;
    Ok(per_query.into_iter().flatten().collect())
}

/// Runs the whole dataset: every candidate set is annotated, fitted, and
/// emitted. Per-query failures are recorded in the manifest and skipped;
/// only configuration problems (unreadable inputs, bad specs) abort.
/// Writes `sft.jsonl`, `pairs.jsonl`, `elos.jsonl`, and `manifest.json`
/// into the output directory and returns the manifest.
pub fn run_dataset(cfg: &RunConfig) -> Result<RunManifest> {
    let started = Instant::now();
    let ds = Dataset::load(cfg)?;
    let judges = build_judges(cfg)?;

    let outputs: Vec<QueryOutput> = ds
        .candidate_sets
        .par_iter()
        .map(|cs| process_query(cs, &ds.queries, &ds.documents, &judges, cfg))
        .collect();

    let mut sft = Vec::new();
    let mut pairs = Vec::new();
    let mut elos = Vec::new();
    let mut query_manifests = Vec::with_capacity(outputs.len());
    let mut failed = 0;
    let mut ensemble_judgments = 0;
    let mut judge_verdicts = 0;
    for out in outputs {
        if out.manifest.error.is_some() {
            failed += 1;
        }
        ensemble_judgments += out.manifest.ensemble_judgments;
        judge_verdicts += out.manifest.judge_verdicts;
        query_manifests.push(out.manifest);
        sft.extend(out.sft);
        pairs.extend(out.pairs);
        elos.extend(out.elos);
    }

    let mut manifest = RunManifest {
        format_version: 1,
        seed: cfg.seed,
        model: cfg.model,
        squash: cfg.squash,
        graph: cfg.graph,
        queries_total: query_manifests.len(),
        queries_failed: failed,
        ensemble_judgments,
        judge_verdicts,
        queries: query_manifests,
        wall_time_secs: 0.0,
        content_hash: String::new(),
    };

    let sft_bytes = io::jsonl_bytes(&sft)?;
    let pairs_bytes = io::jsonl_bytes(&pairs)?;
    let elos_bytes = io::jsonl_bytes(&elos)?;
    let mut hasher = Sha256::new();
    hasher.update(&sft_bytes);
    hasher.update(&pairs_bytes);
    hasher.update(&elos_bytes);
    hasher.update(serde_json::to_vec(&manifest)?);
    manifest.content_hash = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    manifest.wall_time_secs = started.elapsed().as_secs_f64();

    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::File { path: cfg.out_dir.display().to_string(), message: e.to_string() })?;
    io::atomic_write(&cfg.out_dir.join("sft.jsonl"), &sft_bytes)?;
    io::atomic_write(&cfg.out_dir.join("pairs.jsonl"), &pairs_bytes)?;
    io::atomic_write(&cfg.out_dir.join("elos.jsonl"), &elos_bytes)?;
    io::write_json(&cfg.out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judges::SyntheticJudge;

    fn candidate_set(k: usize) -> CandidateSet {
        CandidateSet::new(
            "q1".into(),
            (0..k).map(|i| format!("d{i}")).collect(),
            100,
        )
        .unwrap()
    }

    fn synthetic_judges(hidden: &[f64], noise: f64, count: usize) -> Vec<Box<dyn Judge>> {
        (0..count)
            .map(|i| {
                Box::new(
                    SyntheticJudge::new(format!("s{i}"), hidden.to_vec(), noise, 40 + i as u64)
                        .unwrap(),
                ) as Box<dyn Judge>
            })
            .collect()
    }

    fn annotate_simple(
        k: usize,
        hidden: &[f64],
        graph: &GraphSpec,
        seed: u64,
    ) -> AnnotateOutcome {
        let cs = candidate_set(k);
        let query = Query { id: "q1".into(), text: "q".into() };
        let texts: Vec<&str> = (0..k).map(|_| "doc").collect();
        let judges = synthetic_judges(hidden, 1.0, 3);
        annotate_query(&cs, &query, &texts, &judges, graph, ModelKind::Thurstone, seed)
            .unwrap()
    }

    #[test]
    fn two_candidates_need_exactly_one_judgment() {
        let out = annotate_simple(2, &[0.5, -0.5], &GraphSpec::default(), 7);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.ensemble_judgments, 1);
        assert_eq!(out.judge_verdicts, 3);
        let r = &out.records[0];
        assert!((0.0..=1.0).contains(&r.p));
        assert_eq!(r.weight, 1.0);
    }

    #[test]
    fn default_cycles_spend_at_most_kn_over_two() {
        let hidden: Vec<f64> = (0..20).map(|i| i as f64 * 0.1 - 0.95).collect();
        let out = annotate_simple(20, &hidden, &GraphSpec::default(), 3);
        assert_eq!(out.records.len(), 80, "k=8 cycles over n=20");
        assert!(out.records.iter().all(|r| r.weight == 1.0));
    }

    #[test]
    fn annotation_is_deterministic_per_seed() {
        let hidden = [0.8, 0.2, -0.3, -0.7];
        let a = annotate_simple(4, &hidden, &GraphSpec::Random { budget: 5 }, 11);
        let b = annotate_simple(4, &hidden, &GraphSpec::Random { budget: 5 }, 11);
        let c = annotate_simple(4, &hidden, &GraphSpec::Random { budget: 5 }, 12);
        assert_eq!(a.records, b.records);
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn greedy_annotation_judges_while_sampling() {
        let hidden = [1.0, 0.4, -0.2, -1.2];
        let out = annotate_simple(4, &hidden, &GraphSpec::Greedy { budget: 5 }, 13);
        assert_eq!(out.records.len(), 5);
        assert_eq!(out.ensemble_judgments, 5);
        assert_eq!(out.graph.edge_count(), 5);
    }

    #[test]
    fn dominant_document_gets_the_top_elo() {
        let mut records = Vec::new();
        for j in 1..4 {
            records.push(PreferenceRecord {
                query_id: "q".into(),
                i: 0,
                j,
                p: 0.99,
                weight: 1.0,
            });
        }
        for (i, j) in [(1, 2), (2, 3)] {
            records.push(PreferenceRecord { query_id: "q".into(), i, j, p: 0.5, weight: 1.0 });
        }
        let report =
            compute_zelo(&records, 4, ModelKind::BradleyTerry, &FitOptions::default()).unwrap();
        let elos = report.elos.scores();
        for other in 1..4 {
            assert!(elos[0] > elos[other] + 0.5, "{elos:?}");
        }
    }

    #[test]
    fn dense_synthetic_annotation_recovers_the_hidden_order() {
        // Spearman rank correlation between fitted and hidden Elos,
        // averaged over 10 seeds at k=50 with noise 0.5.
        let k = 50;
        let hidden: Vec<f64> = (0..k).map(|i| (i as f64 / (k - 1) as f64) * 4.0 - 2.0).collect();
        let budget = k * (k - 1) / 2;
        let mut total = 0.0;
        for seed in 0..10 {
            let cs = candidate_set(k);
            let query = Query { id: "q1".into(), text: "q".into() };
            let texts: Vec<&str> = (0..k).map(|_| "doc").collect();
            let judges = synthetic_judges(&hidden, 0.5, 1);
            let out = annotate_query(
                &cs,
                &query,
                &texts,
                &judges,
                &GraphSpec::Random { budget },
                ModelKind::Thurstone,
                seed,
            )
            .unwrap();
            let report =
                compute_zelo(&out.records, k, ModelKind::Thurstone, &FitOptions::default())
                    .unwrap();
            total += spearman(report.elos.scores(), &hidden);
        }
        let mean = total / 10.0;
        assert!(mean > 0.95, "mean Spearman {mean}");
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        let rank = |v: &[f64]| {
            let mut order: Vec<usize> = (0..v.len()).collect();
            order.sort_by(|&x, &y| v[x].partial_cmp(&v[y]).unwrap());
            let mut r = vec![0.0; v.len()];
            for (pos, &idx) in order.iter().enumerate() {
                r[idx] = pos as f64;
            }
            r
        };
        let ra = rank(a);
        let rb = rank(b);
        let n = a.len() as f64;
        let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    #[test]
    fn logistic_targets_sit_on_the_sigmoid() {
        let cs = candidate_set(3);
        let elos = EloVector::new(vec![1.0, 0.0, -1.0]).unwrap();
        let rows = emit_sft(&cs, &elos, SquashKind::Logistic).unwrap();
        assert_eq!(rows[1].target, 0.5);
        assert!((rows[0].target - sigmoid(1.0)).abs() < 1e-15);
        assert_eq!(
            rows.iter().map(|r| r.rank).collect::<Vec<_>>(),
            vec![1, 2, 3],
            "ranks follow descending elo"
        );
    }

    #[test]
    fn minmax_targets_hit_the_endpoints() {
        let cs = candidate_set(3);
        let elos = EloVector::new(vec![1.0, 0.0, -1.0]).unwrap();
        let rows = emit_sft(&cs, &elos, SquashKind::Minmax).unwrap();
        let targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
        assert_eq!(targets, vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn equal_elos_degrade_minmax_to_half() {
        let cs = candidate_set(3);
        let elos = EloVector::new(vec![0.0, 0.0, 0.0]).unwrap();
        let rows = emit_sft(&cs, &elos, SquashKind::Minmax).unwrap();
        assert!(rows.iter().all(|r| r.target == 0.5));
        assert_eq!(rows.iter().map(|r| r.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn sft_ties_break_by_candidate_order() {
        let cs = candidate_set(4);
        let elos = EloVector::new(vec![-0.5, 0.5, -0.5, 0.5]).unwrap();
        let rows = emit_sft(&cs, &elos, SquashKind::Logistic).unwrap();
        assert_eq!(rows.iter().map(|r| r.rank).collect::<Vec<_>>(), vec![3, 1, 4, 2]);
    }

    #[test]
    fn targets_are_monotone_in_rank_for_both_squashes() {
        let cs = candidate_set(5);
        let elos = EloVector::centered(vec![0.3, -1.2, 2.0, 0.3, -0.1]).unwrap();
        for squash in [SquashKind::Logistic, SquashKind::Minmax] {
            let mut rows = emit_sft(&cs, &elos, squash).unwrap();
            rows.sort_by_key(|r| r.rank);
            for pair in rows.windows(2) {
                assert!(pair[0].target >= pair[1].target, "{squash}: {pair:?}");
            }
        }
    }

    #[test]
    fn mining_pairs_the_human_doc_with_its_better_neighbor() {
        let cs = candidate_set(10);
        // Descending scores rank d0..d9 in order, so d4 sits at rank 5.
        let scores: Vec<f64> = (0..10).map(|i| 1.0 - i as f64 * 0.1).collect();
        let mined = mine_failures(&cs, &scores, "d4", 3).unwrap().unwrap();
        assert_eq!(mined.human_doc, "d4");
        assert_eq!(mined.human_rank, 5);
        assert_eq!(mined.partner_doc, "d3", "the rank 4 document");
        assert_eq!(mined.threshold, 3);
    }

    #[test]
    fn mining_skips_top_ranked_and_threshold_ranked_docs() {
        let cs = candidate_set(10);
        let scores: Vec<f64> = (0..10).map(|i| 1.0 - i as f64 * 0.1).collect();
        assert!(mine_failures(&cs, &scores, "d0", 3).unwrap().is_none(), "rank 1");
        assert!(mine_failures(&cs, &scores, "d2", 3).unwrap().is_none(), "rank == t");
        assert!(mine_failures(&cs, &scores, "d3", 3).unwrap().is_some(), "rank t+1 mines");
        assert!(matches!(
            mine_failures(&cs, &scores, "nope", 3),
            Err(Error::UnknownDocument(_))
        ));
    }

    #[test]
    fn threshold_map_keys_datasets_by_prefix() {
        let map: ThresholdMap = serde_json::from_str(
            r#"{"default": 5, "datasets": {"legal": 2, "code": 10}}"#,
        )
        .unwrap();
        assert_eq!(map.lookup("legal/q17"), 2);
        assert_eq!(map.lookup("code/q1"), 10);
        assert_eq!(map.lookup("web/q9"), 5);
        assert_eq!(map.lookup("naked-id"), 5);
        assert_eq!(ThresholdMap::default().lookup("x/y"), 5);
    }

    fn write_run_inputs(dir: &std::path::Path, queries: usize, k: usize) -> RunConfig {
        let qs: Vec<Query> = (0..queries)
            .map(|i| Query { id: format!("q{i}"), text: format!("query {i}") })
            .collect();
        let docs: Vec<Document> = (0..k)
            .map(|i| Document { id: format!("d{i}"), text: format!("document {i}") })
            .collect();
        #[derive(Serialize)]
        struct Cands<'a> {
            query_id: &'a str,
            doc_ids: Vec<String>,
        }
        let cands: Vec<Cands> = qs
            .iter()
            .map(|q| Cands {
                query_id: &q.id,
                doc_ids: docs.iter().map(|d| d.id.clone()).collect(),
            })
            .collect();
        io::write_jsonl(&dir.join("queries.jsonl"), &qs).unwrap();
        io::write_jsonl(&dir.join("documents.jsonl"), &docs).unwrap();
        io::write_jsonl(&dir.join("candidates.jsonl"), &cands).unwrap();
        let hidden: Vec<f64> = (0..k).map(|i| i as f64 * 0.4 - 1.0).collect();
        RunConfig {
            queries: dir.join("queries.jsonl"),
            documents: dir.join("documents.jsonl"),
            candidates: dir.join("candidates.jsonl"),
            out_dir: dir.join("out"),
            judges: vec![
                JudgeSpec::Synthetic {
                    hidden_elos: hidden.clone(),
                    noise_scale: 1.0,
                    seed: 5,
                    indifference: 0.0,
                    id: None,
                },
                JudgeSpec::Synthetic {
                    hidden_elos: hidden,
                    noise_scale: 1.0,
                    seed: 6,
                    indifference: 0.1,
                    id: None,
                },
            ],
            graph: GraphSpec::Cycles { k: 4 },
            model: ModelKind::Thurstone,
            fit: FitOptions::default(),
            squash: SquashKind::Logistic,
            seed: 99,
            max_candidates: 100,
        }
    }

    #[test]
    fn run_emits_all_outputs_and_a_stable_hash() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_run_inputs(dir.path(), 2, 6);
        let first = run_dataset(&cfg).unwrap();
        assert_eq!(first.queries_total, 2);
        assert_eq!(first.queries_failed, 0);
        assert_eq!(first.ensemble_judgments, 2 * 12, "two queries of k=4 cycles over n=6");

        let sft: Vec<SftRecord> = io::read_jsonl(&cfg.out_dir.join("sft.jsonl")).unwrap();
        assert_eq!(sft.len(), 12);
        for qid in ["q0", "q1"] {
            let mean: f64 =
                sft.iter().filter(|r| r.query_id == qid).map(|r| r.elo).sum::<f64>() / 6.0;
            assert!(mean.abs() < 1e-9, "query {qid} mean {mean}");
        }
        let pairs: Vec<PairwiseExportRecord> =
            io::read_jsonl(&cfg.out_dir.join("pairs.jsonl")).unwrap();
        assert_eq!(pairs.len(), 24);
        assert!(pairs.iter().all(|p| p.source == PairSource::RandomPair));

        let second = run_dataset(&cfg).unwrap();
        assert_eq!(first.content_hash, second.content_hash);
        let manifest: RunManifest =
            io::read_json(&cfg.out_dir.join("manifest.json")).unwrap();
        assert_eq!(manifest.content_hash, second.content_hash);
    }

    #[test]
    fn empty_candidate_files_still_produce_a_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = write_run_inputs(dir.path(), 0, 4);
        cfg.candidates = dir.path().join("none.jsonl");
        std::fs::write(&cfg.candidates, "").unwrap();
        let manifest = run_dataset(&cfg).unwrap();
        assert_eq!(manifest.queries_total, 0);
        assert!(cfg.out_dir.join("sft.jsonl").exists());
        assert!(cfg.out_dir.join("manifest.json").exists());
    }

    #[test]
    fn unknown_documents_fail_the_query_not_the_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_run_inputs(dir.path(), 2, 5);
        let mut bad = String::new();
        bad.push_str("{\"query_id\":\"q0\",\"doc_ids\":[\"d0\",\"ghost\"]}\n");
        bad.push_str("{\"query_id\":\"q1\",\"doc_ids\":[\"d0\",\"d1\",\"d2\"]}\n");
        std::fs::write(&cfg.candidates, bad).unwrap();
        let manifest = run_dataset(&cfg).unwrap();
        assert_eq!(manifest.queries_failed, 1);
        assert!(manifest.queries[0].error.as_deref().unwrap().contains("ghost"));
        assert!(manifest.queries[1].error.is_none());
        let sft: Vec<SftRecord> = io::read_jsonl(&cfg.out_dir.join("sft.jsonl")).unwrap();
        assert!(sft.iter().all(|r| r.query_id == "q1"));
    }

    #[test]
    fn run_config_defaults_fill_in() {
        let json = r#"{
            "queries": "q.jsonl", "documents": "d.jsonl",
            "candidates": "c.jsonl", "out_dir": "out",
            "judges": [{"kind": "synthetic", "hidden_elos": [0.0, 1.0],
                         "noise_scale": 1.0, "seed": 1}]
        }"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.graph, GraphSpec::Cycles { k: 8 });
        assert_eq!(cfg.model, ModelKind::Thurstone);
        assert_eq!(cfg.squash, SquashKind::Logistic);
        assert_eq!(cfg.max_candidates, 100);
        assert_eq!(cfg.seed, 0);
    }
}
