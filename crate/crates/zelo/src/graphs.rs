//! Comparison graph construction and diagnostics.
//!
//! A comparison graph selects which of the n(n-1)/2 candidate pairs get
//! judged. The samplers trade judgment budget against connectivity and
//! degree balance; every fitted Elo difference is only identified along
//! paths of judged pairs, so connectivity is the property that matters.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{fit_elos_from, FitOptions, ModelKind};
use crate::types::{build_preference_matrix, PreferenceRecord};

/// Undirected simple graph over candidates `0..n`. Edges are stored in
/// canonical `(low, high)` orientation, deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl ComparisonGraph {
    pub fn new(n: usize) -> Self {
        Self { n, edges: BTreeSet::new() }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::new(n);
        for (a, b) in edges {
            g.insert(a, b)?;
        }
        Ok(g)
    }

    /// Inserts an edge, returning whether it was new.
    pub fn insert(&mut self, a: usize, b: usize) -> Result<bool> {
        if a >= self.n {
            return Err(Error::IndexOutOfRange { index: a, n: self.n });
        }
        if b >= self.n {
            return Err(Error::IndexOutOfRange { index: b, n: self.n });
        }
        if a == b {
            return Err(Error::SelfComparison(a));
        }
        Ok(self.edges.insert(canonical(a, b)))
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.contains(&canonical(a, b))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

fn canonical(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Connected components as sorted vertex lists, ordered by smallest member.
pub fn connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([start]);
        seen[start] = true;
        let mut comp = Vec::new();
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub connected: bool,
    pub min_degree: usize,
    pub max_degree: usize,
    /// None when the graph is disconnected or has fewer than two vertices:
    /// the diameter is undefined there, not infinite.
    pub diameter: Option<usize>,
    pub edge_count: usize,
}

/// Computes degree bounds, connectivity and (when defined) the diameter via
/// breadth-first search from every vertex.
pub fn graph_stats(g: &ComparisonGraph) -> GraphStats {
    let n = g.n();
    let deg = g.degrees();
    let adj = g.adjacency();
    let components = connected_components(&adj);
    let connected = components.len() <= 1;

    let diameter = if connected && n >= 2 {
        let mut diam = 0;
        for start in 0..n {
            let mut dist = vec![usize::MAX; n];
            let mut queue = std::collections::VecDeque::from([start]);
            dist[start] = 0;
            while let Some(v) = queue.pop_front() {
                for &u in &adj[v] {
                    if dist[u] == usize::MAX {
                        dist[u] = dist[v] + 1;
                        queue.push_back(u);
                    }
                }
            }
            diam = diam.max(dist.into_iter().max().unwrap_or(0));
        }
        Some(diam)
    } else {
        None
    };

    GraphStats {
        connected,
        min_degree: deg.iter().copied().min().unwrap_or(0),
        max_degree: deg.iter().copied().max().unwrap_or(0),
        diameter,
        edge_count: g.edge_count(),
    }
}

fn max_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Uniform sample of `budget` distinct pairs without replacement.
pub fn sample_random_pairs(n: usize, budget: usize, seed: u64) -> Result<ComparisonGraph> {
    let max = max_pairs(n);
    if budget > max {
        return Err(Error::BudgetTooLarge { budget, max });
    }
    let mut pairs = Vec::with_capacity(max);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates: only the first `budget` slots are drawn.
    for t in 0..budget {
        let r = rng.gen_range(t..pairs.len());
        pairs.swap(t, r);
    }
    let mut g = ComparisonGraph::new(n);
    for &(a, b) in &pairs[..budget] {
        g.insert(a, b)?;
    }
    Ok(g)
}

/// Complete bipartite graph between `0..l` and `l..n`.
pub fn sample_bipartite(n: usize, l: usize) -> Result<ComparisonGraph> {
    if l == 0 || l >= n {
        return Err(Error::InvalidParam(format!(
            "bipartite split l={l} must satisfy 1 <= l < n={n}"
        )));
    }
    let mut g = ComparisonGraph::new(n);
    for a in 0..l {
        for b in l..n {
            g.insert(a, b)?;
        }
    }
    Ok(g)
}

/// Union of k/2 uniformly random Hamiltonian cycles.
///
/// Cycles are redrawn, then locally repaired by vertex swaps, until their
/// edges avoid every previously placed cycle. The union is then exactly
/// k-regular with kn/2 edges. If a cycle cannot be made edge-disjoint
/// within the step bounds (only plausible when kn/2 approaches the total
/// pair count) its colliding edges are deduplicated instead, which keeps
/// kn/2 as an upper bound.
pub fn sample_cycle_union(n: usize, k: usize, seed: u64) -> Result<ComparisonGraph> {
    if k % 2 != 0 || k < 2 {
        return Err(Error::InvalidParam(format!("cycle count needs an even k >= 2, got {k}")));
    }
    if k >= n {
        return Err(Error::InvalidParam(format!("k={k} must be smaller than n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = ComparisonGraph::new(n);
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..k / 2 {
        perm.shuffle(&mut rng);
        disjoint_cycle(&mut rng, &mut perm, &g);
        for t in 0..n {
            g.insert(perm[t], perm[(t + 1) % n])?;
        }
    }
    Ok(g)
}

const CYCLE_REDRAWS: usize = 32;
const REPAIR_STEPS_PER_VERTEX: usize = 50;

fn cycle_collisions(perm: &[usize], g: &ComparisonGraph) -> Vec<usize> {
    let n = perm.len();
    (0..n).filter(|&t| g.contains(perm[t], perm[(t + 1) % n])).collect()
}

/// Redraws and then swap-repairs `perm` until its cycle edges avoid `g`.
/// May leave residual collisions when the packing is too tight; the caller
/// deduplicates those.
fn disjoint_cycle(rng: &mut ChaCha8Rng, perm: &mut Vec<usize>, g: &ComparisonGraph) {
    if g.edge_count() == 0 {
        return;
    }
    let n = perm.len();
    let mut best = perm.clone();
    let mut best_count = cycle_collisions(perm, g).len();
    for _ in 0..CYCLE_REDRAWS {
        if best_count == 0 {
            break;
        }
        perm.shuffle(rng);
        let count = cycle_collisions(perm, g).len();
        if count < best_count {
            best_count = count;
            best.copy_from_slice(perm);
        }
    }
    perm.copy_from_slice(&best);

    let mut count = best_count;
    let mut steps = 0;
    while count > 0 && steps < REPAIR_STEPS_PER_VERTEX * n {
        steps += 1;
        let colliding = cycle_collisions(perm, g);
        let t = colliding[rng.gen_range(0..colliding.len())];
        let s = rng.gen_range(0..n);
        if s == t {
            continue;
        }
        perm.swap(t, s);
        let after = cycle_collisions(perm, g).len();
        if after < count {
            count = after;
        } else {
            perm.swap(t, s);
        }
    }
}

/// Adaptive pair selection: after seeding one random Hamiltonian cycle for
/// connectivity, repeatedly refits Elos on the judgments so far and judges
/// the unjudged pair with the smallest fitted Elo gap (ties broken by the
/// lexicographically smallest pair).
///
/// The oracle is called once per selected pair with `(i, j)` and returns the
/// probability that candidate `i` is preferred.
pub fn sample_entropy_greedy<F>(
    n: usize,
    budget: usize,
    query_id: &str,
    mut oracle: F,
    model: ModelKind,
    seed: u64,
) -> Result<(ComparisonGraph, Vec<PreferenceRecord>)>
where
    F: FnMut(usize, usize) -> Result<f64>,
{
    if n < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 candidates, got {n}")));
    }
    let max = max_pairs(n);
    if budget > max {
        return Err(Error::BudgetTooLarge { budget, max });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = ComparisonGraph::new(n);
    let mut records = Vec::with_capacity(budget);
    let judge = |a: usize,
                 b: usize,
                 g: &mut ComparisonGraph,
                 records: &mut Vec<PreferenceRecord>,
                 oracle: &mut F|
     -> Result<()> {
        let p = oracle(a, b)?;
        g.insert(a, b)?;
        records.push(PreferenceRecord { query_id: query_id.to_string(), i: a, j: b, p, weight: 1.0 });
        Ok(())
    };

    // A Hamiltonian cycle guarantees connectivity before adaptive picks.
    // When the budget cannot afford the full cycle, its prefix is a path.
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let seed_edges = budget.min(n);
    for t in 0..seed_edges {
        judge(perm[t], perm[(t + 1) % n], &mut g, &mut records, &mut oracle)?;
    }

    let refit_opts = FitOptions {
        max_iters: 200,
        grad_tol: 1e-6,
        ..FitOptions::default()
    };
    let mut warm = vec![0.0; n];
    while g.edge_count() < budget {
        let w = build_preference_matrix(&records, n)?;
        let report = fit_elos_from(&w, model, &refit_opts, &warm)?;
        warm = report.elos.scores().to_vec();

        let mut pick: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            for j in (i + 1)..n {
                if g.contains(i, j) {
                    continue;
                }
                let gap = (warm[i] - warm[j]).abs();
                let better = match pick {
                    None => true,
                    Some((best_gap, bi, bj)) => {
                        gap < best_gap || (gap == best_gap && (i, j) < (bi, bj))
                    }
                };
                if better {
                    pick = Some((gap, i, j));
                }
            }
        }
        let (_, i, j) = pick.expect("budget <= max_pairs leaves an unjudged pair");
        judge(i, j, &mut g, &mut records, &mut oracle)?;
    }

    Ok((g, records))
}

/// Budget at which random pair sampling starts to reach the diameter of a
/// random k-regular graph: `log_{k-1}(n) + log_{k-1}(ln n) + log_{k-1}(5k(k-1)/2)`.
pub fn bollobas_bound(n: usize, k: usize) -> Result<f64> {
    if k < 3 {
        return Err(Error::InvalidParam(format!("bound needs k >= 3, got {k}")));
    }
    if n <= k {
        return Err(Error::InvalidParam(format!("bound needs n > k, got n={n}, k={k}")));
    }
    let base = ((k - 1) as f64).ln();
    let n = n as f64;
    let k = k as f64;
    Ok((n.ln() + n.ln().ln() + (2.5 * k * (k - 1.0)).ln()) / base)
}
