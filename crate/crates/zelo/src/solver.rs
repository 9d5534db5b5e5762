//! Maximum-likelihood Elo fitting over a sparse preference matrix.
//!
//! The negative log likelihood is summed over every stored oriented entry.
//! For Bradley-Terry this is `sum w_ij * weight * log(1 + exp(elo_j - elo_i))`,
//! evaluated in log1p form. For Thurstone the generic form
//! `-sum w_ij * weight * log(p_ij)` is used with `p_ij = (1 + erf(elo_i - elo_j)) / 2`.
//! Judged probabilities and Thurstone predictions are clamped to
//! `[eps, 1 - eps]` inside the loss so unanimous judgments keep the optimum
//! finite. Elo differences are only identified on a connected comparison
//! graph, so fitting a disconnected matrix is a hard error.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::connected_components;
use crate::types::{EloVector, SparsePreferenceMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    BradleyTerry,
    Thurstone,
}

impl ModelKind {
    /// Preference probability implied by an Elo difference.
    pub fn link(self, d: f64) -> f64 {
        match self {
            ModelKind::BradleyTerry => sigmoid(d),
            ModelKind::Thurstone => 0.5 * (1.0 + libm::erf(d)),
        }
    }

    /// Derivative of the link at `d`.
    fn dlink(self, d: f64) -> f64 {
        match self {
            ModelKind::BradleyTerry => {
                let s = sigmoid(d);
                s * (1.0 - s)
            }
            ModelKind::Thurstone => (-d * d).exp() / PI_SQRT,
        }
    }

    /// Upper bound on the per-pair curvature of the pairwise NLL, used to
    /// scale gradient steps.
    fn curvature_bound(self) -> f64 {
        match self {
            ModelKind::BradleyTerry => 0.25,
            ModelKind::Thurstone => 1.3,
        }
    }
}

const PI_SQRT: f64 = 1.7724538509055159;

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::BradleyTerry => write!(f, "bradley-terry"),
            ModelKind::Thurstone => write!(f, "thurstone"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bradley-terry" | "bt" => Ok(ModelKind::BradleyTerry),
            "thurstone" => Ok(ModelKind::Thurstone),
            other => Err(Error::InvalidParam(format!(
                "unknown model {other:?}, expected bradley-terry or thurstone"
            ))),
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(sigmoid(x)) without overflow on either tail.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    Zeros,
    SeedRandom(u64),
}

impl FromStr for InitStrategy {
    type Err = Error;

    /// Accepts `zeros` or `seed-random`; the random seed defaults to 0 and
    /// is overridden by the caller's seed flag.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeros" => Ok(InitStrategy::Zeros),
            "seed-random" => Ok(InitStrategy::SeedRandom(0)),
            other => Err(Error::InvalidParam(format!(
                "unknown init {other:?}, expected zeros or seed-random"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Convergence threshold on the max-abs gradient component.
    pub grad_tol: f64,
    /// Step size schedule exponent: the step at iteration t is t^(-lr_exponent).
    pub lr_exponent: f64,
    /// Probabilities are clamped to [eps, 1 - eps] inside the loss.
    pub prob_clamp_eps: f64,
    pub init: InitStrategy,
    /// Record the loss after every step (diagnostic, off by default).
    #[serde(skip)]
    pub record_loss_trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            grad_tol: 1e-7,
            lr_exponent: 0.125,
            prob_clamp_eps: 1e-6,
            init: InitStrategy::Zeros,
            record_loss_trace: false,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.prob_clamp_eps > 0.0 && self.prob_clamp_eps < 0.5) {
            return Err(Error::InvalidParam(format!(
                "prob_clamp_eps {} must lie in (0, 0.5)",
                self.prob_clamp_eps
            )));
        }
        if !(self.lr_exponent > 0.0) || !self.lr_exponent.is_finite() {
            return Err(Error::InvalidParam(format!(
                "lr_exponent {} must be positive",
                self.lr_exponent
            )));
        }
        if !(self.grad_tol > 0.0) || !self.grad_tol.is_finite() {
            return Err(Error::InvalidParam(format!(
                "grad_tol {} must be positive",
                self.grad_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub elos: EloVector,
    pub iterations: usize,
    pub final_loss: f64,
    pub final_grad_norm: f64,
    pub converged: bool,
    /// Present only when `record_loss_trace` was set: loss after every step.
    pub loss_trace: Option<Vec<f64>>,
}

/// Negative log likelihood of `elos` under the stored preferences.
pub fn nll_loss(w: &SparsePreferenceMatrix, elos: &[f64], model: ModelKind, eps: f64) -> f64 {
    let mut loss = 0.0;
    for (i, j, cell) in w.iter() {
        let d = elos[i] - elos[j];
        let target = cell.p.clamp(eps, 1.0 - eps);
        loss += match model {
            ModelKind::BradleyTerry => cell.weight * target * -log_sigmoid(d),
            ModelKind::Thurstone => {
                let p = model.link(d).clamp(eps, 1.0 - eps);
                cell.weight * target * -p.ln()
            }
        };
    }
    loss
}

/// Gradient of [`nll_loss`] with respect to each Elo component.
///
/// In the Thurstone clamp region the loss is locally flat in `d`, so the
/// contribution there is exactly zero, matching finite differences.
pub fn nll_gradient(
    w: &SparsePreferenceMatrix,
    elos: &[f64],
    model: ModelKind,
    eps: f64,
) -> Vec<f64> {
    let mut grad = vec![0.0; w.n()];
    for (i, j, cell) in w.iter() {
        let d = elos[i] - elos[j];
        let target = cell.p.clamp(eps, 1.0 - eps);
        let dd = match model {
            // d/dd of -log sigmoid(d) is sigmoid(d) - 1.
            ModelKind::BradleyTerry => cell.weight * target * (sigmoid(d) - 1.0),
            ModelKind::Thurstone => {
                let p = model.link(d);
                if p <= eps || p >= 1.0 - eps {
                    0.0
                } else {
                    cell.weight * target * (-model.dlink(d) / p)
                }
            }
        };
        grad[i] += dd;
        grad[j] -= dd;
    }
    grad
}

/// Preference probability implied by fitted Elos, antisymmetric by
/// construction: the pair is always evaluated in canonical orientation.
pub fn predict_pref(elos: &EloVector, i: usize, j: usize, model: ModelKind) -> Result<f64> {
    let n = elos.len();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, n });
    }
    if i == j {
        return Ok(0.5);
    }
    let e = elos.scores();
    if i < j {
        Ok(model.link(e[i] - e[j]))
    } else {
        Ok(1.0 - model.link(e[j] - e[i]))
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn mean_center(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v {
        *x -= mean;
    }
}

fn check_connected(w: &SparsePreferenceMatrix) -> Result<()> {
    let n = w.n();
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in w.pairs() {
        adj[i].push(j);
        adj[j].push(i);
    }
    let components = connected_components(&adj);
    if components.len() > 1 {
        return Err(Error::DisconnectedGraph { components });
    }
    Ok(())
}

/// Fits Elos by gradient descent with the time-decaying schedule
/// `t^(-lr_exponent)`, mean-centering after every step.
///
/// Steps are additionally scaled by the inverse of the largest
/// curvature-weighted vertex degree. The schedule alone is not stable for
/// summed losses: the first steps overshoot on dense instances and the
/// Thurstone link then saturates, freezing the gradient far from the
/// optimum. The scaling is constant per fit, so the decay shape and the
/// divergent step sum are preserved.
pub fn fit_elos(
    w: &SparsePreferenceMatrix,
    model: ModelKind,
    opts: &FitOptions,
) -> Result<FitReport> {
    let n = w.n();
    let init = match opts.init {
        InitStrategy::Zeros => vec![0.0; n],
        InitStrategy::SeedRandom(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()
        }
    };
    fit_elos_from(w, model, opts, &init)
}

/// [`fit_elos`] from an explicit starting point, used for warm restarts.
pub fn fit_elos_from(
    w: &SparsePreferenceMatrix,
    model: ModelKind,
    opts: &FitOptions,
    init: &[f64],
) -> Result<FitReport> {
    opts.validate()?;
    let n = w.n();
    if init.len() != n {
        return Err(Error::InvalidParam(format!(
            "init vector has length {}, matrix has {n} candidates",
            init.len()
        )));
    }
    if n == 0 {
        return Ok(FitReport {
            elos: EloVector::new(Vec::new())?,
            iterations: 0,
            final_loss: 0.0,
            final_grad_norm: 0.0,
            converged: true,
            loss_trace: opts.record_loss_trace.then(Vec::new),
        });
    }
    check_connected(w)?;

    let eps = opts.prob_clamp_eps;
    let wdeg_max = w
        .weighted_degrees()
        .into_iter()
        .fold(0.0f64, f64::max);
    let step_scale = 1.0 / (model.curvature_bound() * wdeg_max).max(1.0);

    let mut e = init.to_vec();
    mean_center(&mut e);
    let mut trace = opts.record_loss_trace.then(Vec::new);

    let mut grad = nll_gradient(w, &e, model, eps);
    let mut gmax = max_abs(&grad);
    if !gmax.is_finite() {
        return Err(Error::NonFinite("nll gradient"));
    }
    let mut t = 0;
    while gmax > opts.grad_tol && t < opts.max_iters {
        t += 1;
        let eta = (t as f64).powf(-opts.lr_exponent) * step_scale;
        for (x, g) in e.iter_mut().zip(&grad) {
            *x -= eta * g;
        }
        mean_center(&mut e);
        if let Some(tr) = trace.as_mut() {
            tr.push(nll_loss(w, &e, model, eps));
        }
        grad = nll_gradient(w, &e, model, eps);
        gmax = max_abs(&grad);
        if !gmax.is_finite() {
            return Err(Error::NonFinite("nll gradient"));
        }
    }

    let final_loss = nll_loss(w, &e, model, eps);
    if !final_loss.is_finite() {
        return Err(Error::NonFinite("nll loss"));
    }
    Ok(FitReport {
        elos: EloVector::centered(e)?,
        iterations: t,
        final_loss,
        final_grad_norm: gmax,
        converged: gmax <= opts.grad_tol,
        loss_trace: trace,
    })
}
