//! Domain types shared by the whole toolkit.
//!
//! The central structure is [`SparsePreferenceMatrix`]: a sparse, antisymmetric
//! store of pairwise preference probabilities. Absence of an entry means the
//! pair was never inferred, which is different from indifference (0.5).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::ModelKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
}

/// The candidate documents retrieved for one query, in retrieval order.
/// Pair indices everywhere in the toolkit refer to positions in `doc_ids`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub query_id: String,
    pub doc_ids: Vec<String>,
}

impl CandidateSet {
    /// Validates id uniqueness and the size bounds `2 <= k <= max_candidates`.
    pub fn new(query_id: String, doc_ids: Vec<String>, max_candidates: usize) -> Result<Self> {
        if doc_ids.len() < 2 {
            return Err(Error::InvalidParam(format!(
                "candidate set for {query_id} has {} documents, need at least 2",
                doc_ids.len()
            )));
        }
        if doc_ids.len() > max_candidates {
            return Err(Error::InvalidParam(format!(
                "candidate set for {query_id} has {} documents, cap is {max_candidates}",
                doc_ids.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &doc_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(format!("{query_id}/{id}")));
            }
        }
        Ok(Self { query_id, doc_ids })
    }

    pub fn k(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn index_of(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.iter().position(|d| d == doc_id)
    }
}

/// One judged (or replayed) preference observation: `p` is the probability
/// that candidate `i` is preferred over candidate `j` for this query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub query_id: String,
    pub i: usize,
    pub j: usize,
    pub p: f64,
    /// Count of underlying judgments behind `p`. At least 1.
    pub weight: f64,
}

impl PreferenceRecord {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.i >= n {
            return Err(Error::IndexOutOfRange { index: self.i, n });
        }
        if self.j >= n {
            return Err(Error::IndexOutOfRange { index: self.j, n });
        }
        if self.i == self.j {
            return Err(Error::SelfComparison(self.i));
        }
        if !self.p.is_finite() || !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParam(format!(
                "preference p={} for ({}, {}) is outside [0, 1]",
                self.p, self.i, self.j
            )));
        }
        if !self.weight.is_finite() || self.weight < 1.0 {
            return Err(Error::InvalidParam(format!(
                "weight {} for ({}, {}) must be at least 1",
                self.weight, self.i, self.j
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefCell {
    pub p: f64,
    pub weight: f64,
}

/// Sparse pairwise preference matrix over `n` candidates.
///
/// Stores both orientations of every inferred pair with the mirror held
/// exactly at `w_ji = 1 - w_ij` and equal weight. The diagonal is never
/// stored. Entries absent from the map were not inferred at all.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePreferenceMatrix {
    n: usize,
    entries: BTreeMap<(usize, usize), PrefCell>,
}

impl SparsePreferenceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Option<PrefCell> {
        self.entries.get(&(i, j)).copied()
    }

    /// All stored oriented entries in index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, PrefCell)> + '_ {
        self.entries.iter().map(|(&(i, j), &c)| (i, j, c))
    }

    /// Unordered inferred pairs `(i, j)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, PrefCell)> + '_ {
        self.iter().filter(|&(i, j, _)| i < j)
    }

    pub fn pair_count(&self) -> usize {
        self.entries.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total judgment weight incident to each vertex, counting each unordered
    /// pair once.
    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n];
        for (i, j, c) in self.pairs() {
            deg[i] += c.weight;
            deg[j] += c.weight;
        }
        deg
    }
}

/// Builds the sparse preference matrix from raw records.
///
/// Records for the same unordered pair are merged by weight-weighted mean,
/// with records oriented `(j, i)` contributing `1 - p`. Contributions are
/// sorted before reduction so the result is exactly invariant under
/// permutation of the input list.
pub fn build_preference_matrix(
    records: &[PreferenceRecord],
    n: usize,
) -> Result<SparsePreferenceMatrix> {
    let mut contributions: BTreeMap<(usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        r.validate(n)?;
        let (key, p) = if r.i < r.j {
            ((r.i, r.j), r.p)
        } else {
            ((r.j, r.i), 1.0 - r.p)
        };
        contributions.entry(key).or_default().push((p, r.weight));
    }

    let mut entries = BTreeMap::new();
    for ((i, j), mut parts) in contributions {
        parts.sort_by(|a, b| {
            (a.0.to_bits(), a.1.to_bits()).cmp(&(b.0.to_bits(), b.1.to_bits()))
        });
        let total_w: f64 = parts.iter().map(|&(_, w)| w).sum();
        let mean: f64 = parts.iter().map(|&(p, w)| p * w).sum::<f64>() / total_w;
        entries.insert((i, j), PrefCell { p: mean, weight: total_w });
        entries.insert((j, i), PrefCell { p: 1.0 - mean, weight: total_w });
    }
    Ok(SparsePreferenceMatrix { n, entries })
}

/// Mean-centered Elo scores for one candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EloVector(Vec<f64>);

impl EloVector {
    pub const CENTER_TOL: f64 = 1e-9;

    /// Wraps scores that are already mean-centered within [`Self::CENTER_TOL`].
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("elo vector"));
        }
        if !scores.is_empty() {
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            if mean.abs() > Self::CENTER_TOL {
                return Err(Error::InvalidParam(format!(
                    "elo vector mean {mean:e} exceeds the centering tolerance"
                )));
            }
        }
        Ok(Self(scores))
    }

    /// Mean-centers arbitrary finite scores.
    pub fn centered(mut scores: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("elo vector"));
        }
        if !scores.is_empty() {
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            for x in &mut scores {
                *x -= mean;
            }
        }
        Ok(Self(scores))
    }

    pub fn scores(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Dense implied preference matrix `E` with `E[i][j] = link(elo_i - elo_j)`.
///
/// The lower triangle is written as `1 - E[j][i]` so antisymmetry holds
/// exactly, and the diagonal is exactly 0.5.
pub fn implied_dense_matrix(elos: &EloVector, model: ModelKind) -> Vec<Vec<f64>> {
    let n = elos.len();
    let e = elos.scores();
    let mut m = vec![vec![0.5; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let p = model.link(e[i] - e[j]);
            m[i][j] = p;
            m[j][i] = 1.0 - p;
        }
    }
    m
}
