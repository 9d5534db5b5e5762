//! Ranking metrics and the sparse-vs-dense convergence study.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{
    connected_components, sample_bipartite, sample_cycle_union, sample_entropy_greedy,
    sample_random_pairs, ComparisonGraph,
};
use crate::io::{QrelRecord, ScoreRecord};
use crate::solver::{fit_elos, FitOptions, ModelKind};
use crate::types::{build_preference_matrix, EloVector, PreferenceRecord, SparsePreferenceMatrix};
use crate::util::{derive_seed, derive_seed_str};

/// A ranking to evaluate: documents in descending predicted score order
/// plus graded relevance gains. Relevance may cover unlisted documents
/// (judged but not retrieved); listed documents without an entry gain 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub doc_ids: Vec<String>,
    pub relevance: HashMap<String, f64>,
}

impl RankedList {
    pub fn new(
        query_id: String,
        doc_ids: Vec<String>,
        relevance: HashMap<String, f64>,
    ) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(doc_ids.len());
        for d in &doc_ids {
            if !seen.insert(d.as_str()) {
                return Err(Error::DuplicateId(format!("ranked doc {d}")));
            }
        }
        for (d, r) in &relevance {
            if !r.is_finite() || *r < 0.0 {
                return Err(Error::InvalidParam(format!(
                    "relevance of {d} must be a finite nonnegative real, got {r}"
                )));
            }
        }
        Ok(Self { query_id, doc_ids, relevance })
    }
}

/// A metric value plus a flag for degenerate inputs (no relevant document
/// at all), which score 0 but deserve separate aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub degenerate: bool,
}

fn dcg_gain(rel: f64) -> f64 {
    rel.exp2() - 1.0
}

fn dcg(rels: impl Iterator<Item = f64>) -> f64 {
    rels.enumerate().map(|(idx, rel)| dcg_gain(rel) / ((idx + 2) as f64).log2()).sum()
}

/// Normalized discounted cumulative gain over the top k positions, with
/// exponential gain 2^rel - 1 and log2(pos + 1) discount. The ideal ranking
/// draws from every relevance entry, listed or not.
pub fn ndcg_at_k(rl: &RankedList, k: usize) -> Result<MetricValue> {
    if k == 0 {
        return Err(Error::InvalidParam("ndcg needs k >= 1".into()));
    }
    let mut ideal: Vec<f64> = rl.relevance.values().copied().collect();
    ideal.sort_by(|a, b| b.partial_cmp(a).expect("validated finite"));
    let idcg = dcg(ideal.into_iter().take(k));
    if idcg == 0.0 {
        return Ok(MetricValue { value: 0.0, degenerate: true });
    }
    let got = dcg(
        rl.doc_ids
            .iter()
            .take(k)
            .map(|d| rl.relevance.get(d).copied().unwrap_or(0.0)),
    );
    Ok(MetricValue { value: got / idcg, degenerate: false })
}

/// Fraction of the relevant documents (relevance >= threshold, over every
/// relevance entry) that appear in the top k of the ranking.
pub fn recall_at_k(rl: &RankedList, k: usize, relevant_threshold: f64) -> Result<MetricValue> {
    if k == 0 {
        return Err(Error::InvalidParam("recall needs k >= 1".into()));
    }
    let relevant: std::collections::HashSet<&str> = rl
        .relevance
        .iter()
        .filter(|(_, r)| **r >= relevant_threshold)
        .map(|(d, _)| d.as_str())
        .collect();
    if relevant.is_empty() {
        return Ok(MetricValue { value: 0.0, degenerate: true });
    }
    let hit = rl.doc_ids.iter().take(k).filter(|d| relevant.contains(d.as_str())).count();
    Ok(MetricValue { value: hit as f64 / relevant.len() as f64, degenerate: false })
}

/// Mean squared difference between two Elo vectors after mean-centering
/// both, so the comparison ignores the unidentifiable global offset.
pub fn elo_mse(a: &EloVector, b: &EloVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidParam(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let center = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| x - m).collect::<Vec<f64>>()
    };
    let ca = center(a.scores());
    let cb = center(b.scores());
    Ok(ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / ca.len() as f64)
}

const PRED_CLAMP: f64 = 1e-15;

/// Mean binary cross-entropy between the preference matrices implied by
/// two Elo vectors, over all ordered pairs (i != j): `a` supplies the
/// target probabilities, `b` the predictions.
pub fn pref_cross_entropy(a: &EloVector, b: &EloVector, model: ModelKind) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidParam(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidParam(format!("cross-entropy needs n >= 2, got {n}")));
    }
    let ea = a.scores();
    let eb = b.scores();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let t = model.link(ea[i] - ea[j]);
            let q = model.link(eb[i] - eb[j]).clamp(PRED_CLAMP, 1.0 - PRED_CLAMP);
            total -= t * q.ln() + (1.0 - t) * (1.0 - q).ln();
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// pref_cross_entropy minus its lower bound (the entropy of `a`'s implied
/// matrix); zero exactly when the two vectors induce the same preferences.
pub fn excess_pref_cross_entropy(
    a: &EloVector,
    b: &EloVector,
    model: ModelKind,
) -> Result<f64> {
    let ce = pref_cross_entropy(a, b, model)?;
    let entropy = pref_cross_entropy(a, a, model)?;
    let excess = ce - entropy;
    assert!(excess >= -1e-9, "Gibbs inequality violated: excess {excess}");
    Ok(excess.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Random,
    Cycles,
    Bipartite,
    Greedy,
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StrategyKind::Random => "random",
            StrategyKind::Cycles => "cycles",
            StrategyKind::Bipartite => "bipartite",
            StrategyKind::Greedy => "greedy",
        })
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(StrategyKind::Random),
            "cycles" => Ok(StrategyKind::Cycles),
            "bipartite" => Ok(StrategyKind::Bipartite),
            "greedy" => Ok(StrategyKind::Greedy),
            other => Err(Error::InvalidParam(format!(
                "unknown strategy {other}; expected random|cycles|bipartite|greedy"
            ))),
        }
    }
}

/// Cycle count whose union spends roughly the given edge budget: the
/// nearest even k with 2 <= k < n.
pub fn cycles_for_budget(n: usize, budget: usize) -> Result<usize> {
    if n < 3 {
        return Err(Error::InvalidParam(format!("cycle union needs n >= 3, got {n}")));
    }
    let ideal = 2.0 * budget as f64 / n as f64;
    let k = ((ideal / 2.0).round() as usize * 2).max(2);
    if k >= n {
        return Err(Error::BudgetTooLarge { budget, max: n * (n - 1) / 2 });
    }
    Ok(k)
}

/// Bipartite split whose complete graph spends roughly the given budget:
/// l(n - l) = budget solved for the smaller root, clamped to [1, n/2].
pub fn bipartite_split_for_budget(n: usize, budget: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::InvalidParam(format!("bipartite needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    let disc = nf * nf - 4.0 * budget as f64;
    let l = if disc <= 0.0 { nf / 2.0 } else { (nf - disc.sqrt()) / 2.0 };
    Ok((l.round() as usize).clamp(1, n / 2))
}

/// Hidden-Elo generator and judgment noise for the synthetic study oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSpec {
    pub elo_low: f64,
    pub elo_high: f64,
    pub noise_scale: f64,
    /// Synthetic verdicts averaged into each pair's judged probability.
    pub judgments_per_edge: usize,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self { elo_low: -2.0, elo_high: 2.0, noise_scale: 1.0, judgments_per_edge: 8 }
    }
}

fn default_model() -> ModelKind {
    ModelKind::Thurstone
}

fn default_trials() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub n: usize,
    pub strategies: Vec<StrategyKind>,
    pub budgets: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub seed: u64,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidParam(format!("study needs n >= 3, got {}", self.n)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParam("study needs trials >= 1".into()));
        }
        if self.strategies.is_empty() || self.budgets.is_empty() {
            return Err(Error::InvalidParam(
                "study needs at least one strategy and one budget".into(),
            ));
        }
        let max = self.n * (self.n - 1) / 2;
        for &b in &self.budgets {
            if b > max {
                return Err(Error::BudgetTooLarge { budget: b, max });
            }
            if b == 0 {
                return Err(Error::InvalidParam("study budgets must be positive".into()));
            }
        }
        if self.strategies.contains(&StrategyKind::Cycles) {
            for &b in &self.budgets {
                cycles_for_budget(self.n, b)?;
            }
        }
        let o = &self.oracle;
        if !(o.elo_low.is_finite() && o.elo_high.is_finite() && o.elo_low < o.elo_high) {
            return Err(Error::InvalidParam(format!(
                "hidden-Elo range [{}, {}] is invalid",
                o.elo_low, o.elo_high
            )));
        }
        if !(o.noise_scale.is_finite() && o.noise_scale > 0.0) {
            return Err(Error::InvalidParam(format!(
                "study noise_scale must be positive, got {}",
                o.noise_scale
            )));
        }
        if o.judgments_per_edge == 0 {
            return Err(Error::InvalidParam("judgments_per_edge must be >= 1".into()));
        }
        self.fit.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub strategy: StrategyKind,
    pub budget: usize,
    pub trial_count: usize,
    /// Trials whose sparse graph came out disconnected. Those trials fall
    /// back to component-wise fits (isolated candidates pinned at 0) and
    /// still enter the means, since low budgets would otherwise have no
    /// defined value at all.
    pub failures: usize,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub xent_mean: f64,
    pub xent_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
}

impl StudyTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "strategy,budget,trial_count,failures,mse_mean,mse_std,xent_mean,xent_std\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.strategy,
                r.budget,
                r.trial_count,
                r.failures,
                r.mse_mean,
                r.mse_std,
                r.xent_mean,
                r.xent_std
            ));
        }
        out
    }

    pub fn row(&self, strategy: StrategyKind, budget: usize) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.strategy == strategy && r.budget == budget)
    }
}

/// Fits each connected component separately and splices the results into
/// one globally centered vector; isolated candidates sit at 0.
fn fit_components(
    w: &SparsePreferenceMatrix,
    model: ModelKind,
    opts: &FitOptions,
) -> Result<EloVector> {
    let n = w.n();
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in w.pairs() {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut elos = vec![0.0; n];
    for comp in connected_components(&adj) {
        if comp.len() < 2 {
            continue;
        }
        let local_index: HashMap<usize, usize> =
            comp.iter().enumerate().map(|(local, &global)| (global, local)).collect();
        let mut records = Vec::new();
        for (i, j, cell) in w.pairs() {
            if let (Some(&li), Some(&lj)) = (local_index.get(&i), local_index.get(&j)) {
                records.push(PreferenceRecord {
                    query_id: String::new(),
                    i: li,
                    j: lj,
                    p: cell.p,
                    weight: cell.weight,
                });
            }
        }
        let sub = build_preference_matrix(&records, comp.len())?;
        let report = fit_elos(&sub, model, opts)?;
        for (local, &global) in comp.iter().enumerate() {
            elos[global] = report.elos.scores()[local];
        }
    }
    EloVector::centered(elos)
}

struct TrialData {
    /// Judged probability for every pair, indexed canonically.
    judged: HashMap<(usize, usize), f64>,
    /// Fit on the full pair set: the study's reference ("actual") Elos.
    dense: EloVector,
}

/// Draws hidden Elos and one ensemble-judged probability per pair, shared
/// by every cell of the trial, then fits the dense reference.
fn build_trial(cfg: &StudyConfig, trial_seed: u64) -> Result<TrialData> {
    let n = cfg.n;
    let o = &cfg.oracle;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, 0));
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(o.elo_low..o.elo_high)).collect();
    let hidden = EloVector::centered(raw)?;

    let mut judged = HashMap::new();
    let mut records = Vec::with_capacity(n * (n - 1) / 2);
    let mut pair_index = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            pair_index += 1;
            let p_true = 0.5
                * (1.0
                    + libm::erf(
                        (hidden.scores()[i] - hidden.scores()[j]) / o.noise_scale,
                    ));
            let mut pair_rng =
                ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, pair_index));
            let wins = (0..o.judgments_per_edge)
                .filter(|_| pair_rng.gen::<f64>() < p_true)
                .count();
            let p_hat = wins as f64 / o.judgments_per_edge as f64;
            judged.insert((i, j), p_hat);
            records.push(PreferenceRecord {
                query_id: String::new(),
                i,
                j,
                p: p_hat,
                weight: 1.0,
            });
        }
    }
    let w = build_preference_matrix(&records, n)?;
    let dense = fit_elos(&w, cfg.model, &cfg.fit)?.elos;
    Ok(TrialData { judged, dense })
}

fn sample_cell_graph(
    cfg: &StudyConfig,
    data: &TrialData,
    strategy: StrategyKind,
    budget: usize,
    cell_seed: u64,
) -> Result<ComparisonGraph> {
    match strategy {
        StrategyKind::Random => sample_random_pairs(cfg.n, budget, cell_seed),
        StrategyKind::Cycles => {
            sample_cycle_union(cfg.n, cycles_for_budget(cfg.n, budget)?, cell_seed)
        }
        StrategyKind::Bipartite => {
            sample_bipartite(cfg.n, bipartite_split_for_budget(cfg.n, budget)?)
        }
        StrategyKind::Greedy => {
            let judged = &data.judged;
            let (g, _) = sample_entropy_greedy(
                cfg.n,
                budget,
                "",
                |i, j| {
                    let (a, b, flip) = if i < j { (i, j, false) } else { (j, i, true) };
                    let p = judged[&(a, b)];
                    Ok(if flip { 1.0 - p } else { p })
                },
                cfg.model,
                cell_seed,
            )?;
            Ok(g)
        }
    }
}

struct CellOutcome {
    mse: f64,
    xent: f64,
    disconnected: bool,
}

fn run_cell(
    cfg: &StudyConfig,
    data: &TrialData,
    strategy: StrategyKind,
    budget: usize,
    cell_seed: u64,
) -> Result<CellOutcome> {
    let g = sample_cell_graph(cfg, data, strategy, budget, cell_seed)?;
    let records: Vec<PreferenceRecord> = g
        .edges()
        .map(|(i, j)| PreferenceRecord {
            query_id: String::new(),
            i,
            j,
            p: data.judged[&(i, j)],
            weight: 1.0,
        })
        .collect();
    let w = build_preference_matrix(&records, cfg.n)?;
    let mut adj = vec![Vec::new(); cfg.n];
    for (i, j, _) in w.pairs() {
        adj[i].push(j);
        adj[j].push(i);
    }
    let disconnected = connected_components(&adj).len() > 1;
    let sparse = if disconnected {
        fit_components(&w, cfg.model, &cfg.fit)?
    } else {
        fit_elos(&w, cfg.model, &cfg.fit)?.elos
    };
    Ok(CellOutcome {
        mse: elo_mse(&data.dense, &sparse)?,
        xent: excess_pref_cross_entropy(&data.dense, &sparse, cfg.model)?,
        disconnected,
    })
}

/// Runs the full (strategy x budget x trial) grid against a synthetic
/// ground truth: dense fits are the per-trial reference, sparse fits reuse
/// the same judgments restricted to the sampled edges. Rows aggregate
/// mean and sample standard deviation over trials.
pub fn convergence_study(cfg: &StudyConfig) -> Result<StudyTable> {
    cfg.validate()?;
    let cells: Vec<(StrategyKind, usize)> = cfg
        .strategies
        .iter()
        .flat_map(|&s| cfg.budgets.iter().map(move |&b| (s, b)))
        .collect();

    let trial_results: Vec<Result<Vec<CellOutcome>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = derive_seed_str(cfg.seed, &format!("trial-{t}"));
            let data = build_trial(cfg, trial_seed)?;
            cells
                .iter()
                .map(|&(s, b)| {
                    let cell_seed = derive_seed_str(trial_seed, &format!("{s}-{b}"));
                    run_cell(cfg, &data, s, b, cell_seed)
                })
                .collect()
        })
        .collect();

    let mut per_cell: Vec<Vec<CellOutcome>> =
        (0..cells.len()).map(|_| Vec::with_capacity(cfg.trials)).collect();
    for trial in trial_results {
        for (idx, outcome) in trial?.into_iter().enumerate() {
            per_cell[idx].push(outcome);
        }
    }

    let rows = cells
        .iter()
        .zip(per_cell)
        .map(|(&(strategy, budget), outcomes)| {
            let stats = |f: fn(&CellOutcome) -> f64| {
                let vals: Vec<f64> = outcomes.iter().map(f).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let std = if vals.len() < 2 {
                    0.0
                } else {
                    (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                        / (vals.len() - 1) as f64)
                        .sqrt()
                };
                (mean, std)
            };
            let (mse_mean, mse_std) = stats(|o| o.mse);
            let (xent_mean, xent_std) = stats(|o| o.xent);
            StudyRow {
                strategy,
                budget,
                trial_count: outcomes.len(),
                failures: outcomes.iter().filter(|o| o.disconnected).count(),
                mse_mean,
                mse_std,
                xent_mean,
                xent_std,
            }
        })
        .collect();
    Ok(StudyTable { rows })
}

/// Groups score records into per-query rankings (descending score, doc id
/// as the deterministic tie-break) with relevance taken from the qrels.
pub fn ranked_lists_from_records(
    scores: &[ScoreRecord],
    qrels: &[QrelRecord],
) -> Result<Vec<RankedList>> {
    let mut rel_by_query: HashMap<&str, HashMap<String, f64>> = HashMap::new();
    for q in qrels {
        let entry = rel_by_query.entry(&q.query_id).or_default();
        if entry.insert(q.doc_id.clone(), q.rel).is_some() {
            return Err(Error::DuplicateId(format!("qrel {}/{}", q.query_id, q.doc_id)));
        }
    }
    let mut by_query: std::collections::BTreeMap<&str, Vec<&ScoreRecord>> =
        std::collections::BTreeMap::new();
    for s in scores {
        by_query.entry(&s.query_id).or_default().push(s);
    }
    let mut lists = Vec::with_capacity(by_query.len());
    for (query_id, mut docs) in by_query {
        docs.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores must be comparable")
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        for d in &docs {
            if !d.score.is_finite() {
                return Err(Error::NonFinite("predicted score"));
            }
        }
        lists.push(RankedList::new(
            query_id.to_string(),
            docs.iter().map(|d| d.doc_id.clone()).collect(),
            rel_by_query.remove(query_id).unwrap_or_default(),
        )?);
    }
    Ok(lists)
}
