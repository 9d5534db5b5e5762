//! Python bindings: solver, graph samplers, ensemble algebra, metrics, and
//! the SFT/mining emitters, over plain lists, tuples, and dicts.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use zelo::ensemble;
use zelo::eval;
use zelo::graphs;
use zelo::pipeline;
use zelo::solver::{self, FitOptions, InitStrategy, ModelKind};
use zelo::types::{build_preference_matrix, CandidateSet, EloVector, PreferenceRecord};
use zelo::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParam(_)
        | Error::IndexOutOfRange { .. }
        | Error::SelfComparison(_)
        | Error::BudgetTooLarge { .. }
        | Error::NonFinite(_)
        | Error::DuplicateId(_)
        | Error::UnknownDocument(_)
        | Error::UnknownQuery(_)
        | Error::Config(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_model(model: &str) -> PyResult<ModelKind> {
    model.parse().map_err(to_py_err)
}

fn elo_vector(name: &str, elos: Vec<f64>) -> PyResult<EloVector> {
    EloVector::centered(elos)
        .map_err(|e| PyValueError::new_err(format!("{name}: {e}")))
}

fn records_from_pairs(pairs: Vec<(usize, usize, f64, f64)>) -> Vec<PreferenceRecord> {
    pairs
        .into_iter()
        .map(|(i, j, p, weight)| PreferenceRecord { query_id: "py".into(), i, j, p, weight })
        .collect()
}

/// Result of a maximum-likelihood Elo fit.
#[pyclass(frozen, get_all)]
struct FitResult {
    elos: Vec<f64>,
    converged: bool,
    iterations: usize,
    final_loss: f64,
    final_grad_norm: f64,
}

#[pymethods]
impl FitResult {
    fn __repr__(&self) -> String {
        format!(
            "FitResult(n={}, converged={}, iterations={})",
            self.elos.len(),
            self.converged,
            self.iterations
        )
    }
}

/// Fits mean-centered Elo scores from (i, j, p, weight) preference tuples,
/// where p is the probability that candidate i beats candidate j.
#[pyfunction]
#[pyo3(signature = (pairs, n, model="thurstone", max_iters=2000, grad_tol=1e-7,
                    prob_clamp_eps=1e-6, seed=None))]
#[allow(clippy::too_many_arguments)]
fn fit_elos(
    pairs: Vec<(usize, usize, f64, f64)>,
    n: usize,
    model: &str,
    max_iters: usize,
    grad_tol: f64,
    prob_clamp_eps: f64,
    seed: Option<u64>,
) -> PyResult<FitResult> {
    let model = parse_model(model)?;
    let w = build_preference_matrix(&records_from_pairs(pairs), n).map_err(to_py_err)?;
    let opts = FitOptions {
        max_iters,
        grad_tol,
        prob_clamp_eps,
        init: seed.map_or(InitStrategy::Zeros, InitStrategy::SeedRandom),
        ..FitOptions::default()
    };
    let report = solver::fit_elos(&w, model, &opts).map_err(to_py_err)?;
    Ok(FitResult {
        elos: report.elos.scores().to_vec(),
        converged: report.converged,
        iterations: report.iterations,
        final_loss: report.final_loss,
        final_grad_norm: report.final_grad_norm,
    })
}

/// Probability that candidate i beats candidate j under fitted Elos.
#[pyfunction]
#[pyo3(signature = (elos, i, j, model="thurstone"))]
fn predict_pref(elos: Vec<f64>, i: usize, j: usize, model: &str) -> PyResult<f64> {
    let model = parse_model(model)?;
    let elos = elo_vector("elos", elos)?;
    solver::predict_pref(&elos, i, j, model).map_err(to_py_err)
}

/// Samples a comparison graph; returns its edge list. Strategies: "random"
/// (budget), "cycles" (k), "bipartite" (split or budget), "greedy" (budget
/// plus an oracle callable (i, j) -> probability that i beats j).
#[pyfunction]
#[pyo3(signature = (strategy, n, budget=None, k=None, split=None, seed=0, oracle=None,
                    model="thurstone"))]
#[allow(clippy::too_many_arguments)]
fn sample_graph(
    strategy: &str,
    n: usize,
    budget: Option<usize>,
    k: Option<usize>,
    split: Option<usize>,
    seed: u64,
    oracle: Option<&Bound<'_, PyAny>>,
    model: &str,
) -> PyResult<Vec<(usize, usize)>> {
    let need_budget = || {
        budget.ok_or_else(|| PyValueError::new_err(format!("strategy {strategy} needs budget=")))
    };
    let graph = match strategy {
        "random" => graphs::sample_random_pairs(n, need_budget()?, seed).map_err(to_py_err)?,
        "cycles" => {
            let k = k.ok_or_else(|| PyValueError::new_err("strategy cycles needs k="))?;
            graphs::sample_cycle_union(n, k, seed).map_err(to_py_err)?
        }
        "bipartite" => {
            let l = match split {
                Some(l) => l,
                None => eval::bipartite_split_for_budget(n, need_budget()?).map_err(to_py_err)?,
            };
            graphs::sample_bipartite(n, l).map_err(to_py_err)?
        }
        "greedy" => {
            let cb = oracle.ok_or_else(|| {
                PyValueError::new_err("strategy greedy needs oracle=callable(i, j) -> float")
            })?;
            let judge = |i: usize, j: usize| -> zelo::Result<f64> {
                cb.call1((i, j))
                    .and_then(|v| v.extract::<f64>())
                    .map_err(|e| Error::JudgeFailure {
                        judge_id: "python-oracle".into(),
                        message: e.to_string(),
                    })
            };
            let (graph, _) = graphs::sample_entropy_greedy(
                n,
                need_budget()?,
                "py",
                judge,
                parse_model(model)?,
                seed,
            )
            .map_err(to_py_err)?;
            graph
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown strategy {other:?}, expected random, cycles, bipartite, or greedy"
            )))
        }
    };
    Ok(graph.edges().collect())
}

/// Connectivity, degree range, BFS diameter (None when disconnected), and
/// edge count of an undirected graph given as an edge list.
#[pyfunction]
fn graph_stats(n: usize, edges: Vec<(usize, usize)>) -> PyResult<HashMap<String, Py<PyAny>>> {
    let graph = graphs::ComparisonGraph::from_edges(n, edges).map_err(to_py_err)?;
    let stats = graphs::graph_stats(&graph);
    Python::attach(|py| {
        let mut out: HashMap<String, Py<PyAny>> = HashMap::new();
        out.insert("connected".into(), stats.connected.into_pyobject(py)?.to_owned().unbind().into());
        out.insert("min_degree".into(), stats.min_degree.into_pyobject(py)?.unbind().into());
        out.insert("max_degree".into(), stats.max_degree.into_pyobject(py)?.unbind().into());
        out.insert("diameter".into(), stats.diameter.into_pyobject(py)?.unbind().into());
        out.insert("edge_count".into(), stats.edge_count.into_pyobject(py)?.unbind().into());
        Ok(out)
    })
}

/// Asymptotic diameter bound for a random k-regular graph on n vertices.
#[pyfunction]
fn bollobas_bound(n: usize, k: usize) -> PyResult<f64> {
    graphs::bollobas_bound(n, k).map_err(to_py_err)
}

/// Clamps a raw verdict in [-1, 1] to the nearest of {-1, 0, 1}.
#[pyfunction]
fn clamp_verdict(raw: f64) -> PyResult<i8> {
    ensemble::clamp_verdict(raw).map_err(to_py_err)
}

/// Maps a mean raw verdict to the probability the first document wins.
#[pyfunction]
fn map_to_unit(mean_raw: f64) -> f64 {
    ensemble::map_to_unit(mean_raw)
}

fn ranked_list(doc_ids: Vec<String>, relevance: HashMap<String, f64>) -> PyResult<eval::RankedList> {
    eval::RankedList::new("py".into(), doc_ids, relevance).map_err(to_py_err)
}

/// NDCG at k. Returns (value, degenerate); degenerate means the query has
/// no relevant document and the value defaults to 0.
#[pyfunction]
fn ndcg_at_k(
    ranked_doc_ids: Vec<String>,
    relevance: HashMap<String, f64>,
    k: usize,
) -> PyResult<(f64, bool)> {
    let m = eval::ndcg_at_k(&ranked_list(ranked_doc_ids, relevance)?, k).map_err(to_py_err)?;
    Ok((m.value, m.degenerate))
}

/// Recall at k against a relevance threshold. Returns (value, degenerate).
#[pyfunction]
#[pyo3(signature = (ranked_doc_ids, relevance, k, threshold=1.0))]
fn recall_at_k(
    ranked_doc_ids: Vec<String>,
    relevance: HashMap<String, f64>,
    k: usize,
    threshold: f64,
) -> PyResult<(f64, bool)> {
    let m = eval::recall_at_k(&ranked_list(ranked_doc_ids, relevance)?, k, threshold)
        .map_err(to_py_err)?;
    Ok((m.value, m.degenerate))
}

/// Mean squared error between two Elo vectors after centering both.
#[pyfunction]
fn elo_mse(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    eval::elo_mse(&elo_vector("a", a)?, &elo_vector("b", b)?).map_err(to_py_err)
}

/// Mean cross-entropy between the pairwise preference tables implied by two
/// Elo vectors.
#[pyfunction]
#[pyo3(signature = (a, b, model="thurstone"))]
fn pref_cross_entropy(a: Vec<f64>, b: Vec<f64>, model: &str) -> PyResult<f64> {
    let model = parse_model(model)?;
    eval::pref_cross_entropy(&elo_vector("a", a)?, &elo_vector("b", b)?, model).map_err(to_py_err)
}

/// Cross-entropy above the irreducible entropy of the reference table.
#[pyfunction]
#[pyo3(signature = (a, b, model="thurstone"))]
fn excess_pref_cross_entropy(a: Vec<f64>, b: Vec<f64>, model: &str) -> PyResult<f64> {
    let model = parse_model(model)?;
    eval::excess_pref_cross_entropy(&elo_vector("a", a)?, &elo_vector("b", b)?, model)
        .map_err(to_py_err)
}

/// Emits SFT rows as (doc_id, elo, target, rank) tuples in candidate order.
/// Squash is "logistic" or "minmax".
#[pyfunction]
#[pyo3(signature = (query_id, doc_ids, elos, squash="logistic"))]
fn emit_sft(
    query_id: String,
    doc_ids: Vec<String>,
    elos: Vec<f64>,
    squash: &str,
) -> PyResult<Vec<(String, f64, f64, usize)>> {
    let squash: pipeline::SquashKind = squash.parse().map_err(to_py_err)?;
    let max = doc_ids.len().max(2);
    let cs = CandidateSet::new(query_id, doc_ids, max).map_err(to_py_err)?;
    let elos = elo_vector("elos", elos)?;
    let rows = pipeline::emit_sft(&cs, &elos, squash).map_err(to_py_err)?;
    Ok(rows.into_iter().map(|r| (r.doc_id, r.elo, r.target, r.rank)).collect())
}

/// Mines a hard pair when the human-preferred document ranks strictly worse
/// than the threshold. Returns (human_doc, partner_doc, human_rank) or None.
#[pyfunction]
#[pyo3(signature = (query_id, doc_ids, scores, human_doc, threshold=5))]
fn mine_failures(
    query_id: String,
    doc_ids: Vec<String>,
    scores: Vec<f64>,
    human_doc: &str,
    threshold: usize,
) -> PyResult<Option<(String, String, usize)>> {
    let max = doc_ids.len().max(2);
    let cs = CandidateSet::new(query_id, doc_ids, max).map_err(to_py_err)?;
    let mined = pipeline::mine_failures(&cs, &scores, human_doc, threshold).map_err(to_py_err)?;
    Ok(mined.map(|m| (m.human_doc, m.partner_doc, m.human_rank)))
}

#[pymodule]
fn zelo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<FitResult>()?;
    m.add_function(wrap_pyfunction!(fit_elos, m)?)?;
    m.add_function(wrap_pyfunction!(predict_pref, m)?)?;
    m.add_function(wrap_pyfunction!(sample_graph, m)?)?;
    m.add_function(wrap_pyfunction!(graph_stats, m)?)?;
    m.add_function(wrap_pyfunction!(bollobas_bound, m)?)?;
    m.add_function(wrap_pyfunction!(clamp_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(map_to_unit, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(recall_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(elo_mse, m)?)?;
    m.add_function(wrap_pyfunction!(pref_cross_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(excess_pref_cross_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(emit_sft, m)?)?;
    m.add_function(wrap_pyfunction!(mine_failures, m)?)?;
    Ok(())
}
