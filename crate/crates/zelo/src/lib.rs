//! Turns sparse pairwise preference judgments over candidate documents into
//! pointwise relevance scores, by fitting latent Elo values with a paired
//! comparison model over a sampled comparison graph.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod graphs;
pub mod io;
pub mod judges;
pub mod pipeline;
pub mod solver;
pub mod types;
pub mod util;

pub use ensemble::{
    clamp_verdict, debiased_judgment, ensemble_score, map_to_unit, sample_until_sem,
    EnsembleOutcome, EnsembleScore, JudgeVerdict, SemOptions,
};
pub use error::{Error, Result};
pub use eval::{
    bipartite_split_for_budget, convergence_study, cycles_for_budget, elo_mse,
    excess_pref_cross_entropy, ndcg_at_k, pref_cross_entropy, ranked_lists_from_records,
    recall_at_k, MetricValue, OracleSpec, RankedList, StrategyKind, StudyConfig, StudyRow,
    StudyTable,
};
pub use graphs::{
    bollobas_bound, connected_components, graph_stats, sample_bipartite, sample_cycle_union,
    sample_entropy_greedy, sample_random_pairs, ComparisonGraph, GraphStats,
};
pub use pipeline::{
    annotate_dataset, annotate_query, compute_zelo, emit_sft, mine_failures, run_dataset,
    AnnotateOutcome, Dataset,
    GraphSpec, HumanLabelRecord, MinedPairRecord, PairSource, PairwiseExportRecord,
    QueryManifest, RunConfig, RunManifest, SftRecord, SquashKind, ThresholdMap,
};
pub use judges::{
    parse_judge_score, HttpJudge, Judge, JudgeSpec, PairRequest, ReplayJudge, ReplayRecord,
    SyntheticJudge, PAIRWISE_PROMPT,
};
pub use solver::{
    fit_elos, fit_elos_from, nll_gradient, nll_loss, predict_pref, FitOptions, FitReport,
    InitStrategy, ModelKind,
};
pub use types::{
    build_preference_matrix, implied_dense_matrix, CandidateSet, Document, EloVector,
    PreferenceRecord, Query, SparsePreferenceMatrix,
};
