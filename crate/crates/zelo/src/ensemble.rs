//! Ensemble judgment of a document pair.
//!
//! Raw judge scores are clamped to the ternary verdicts {-1, 0, 1},
//! debiased against position preference by randomly swapping the presented
//! order, and averaged over a judge ensemble. The mean verdict maps to a
//! preference probability via (1 - mean) / 2, so -1 (first document wins
//! unanimously) becomes 1.0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::judges::{Judge, PairRequest};
use crate::util::derive_seed;

/// One debiased judge verdict in canonical orientation: negative `raw`
/// favors the pair's first (lower-index) document even when the judge saw
/// the documents swapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub raw: f64,
    pub clamped: i8,
    pub judge_id: String,
    pub swapped: bool,
}

/// Rounds a raw score to the nearest of {-1, 0, 1}; exact ties (|raw| =
/// 0.5) round toward 0, the no-preference verdict.
pub fn clamp_verdict(raw: f64) -> Result<i8> {
    if !raw.is_finite() || raw.abs() > 1.0 {
        return Err(Error::InvalidParam(format!("raw verdict {raw} lies outside [-1, 1]")));
    }
    Ok(if raw > 0.5 {
        1
    } else if raw < -0.5 {
        -1
    } else {
        0
    })
}

/// Maps a mean verdict in [-1, 1] to a preference probability in [0, 1]
/// for the first document: -1 -> 1.0, 0 -> 0.5, 1 -> 0.0.
pub fn map_to_unit(mean_raw: f64) -> f64 {
    (1.0 - mean_raw) / 2.0
}

/// Obtains one verdict with the presentation order fixed by the caller.
/// `pair` is in canonical orientation; when `swapped`, the judge sees the
/// documents flipped and its score is negated back.
pub fn judged_with_presentation(
    judge: &dyn Judge,
    pair: &PairRequest,
    swapped: bool,
    call_seed: u64,
) -> Result<JudgeVerdict> {
    if pair.first_index == pair.second_index {
        return Err(Error::SelfComparison(pair.first_index));
    }
    let presented = if swapped {
        PairRequest {
            query_id: pair.query_id,
            query_text: pair.query_text,
            first_index: pair.second_index,
            first_text: pair.second_text,
            second_index: pair.first_index,
            second_text: pair.first_text,
        }
    } else {
        *pair
    };
    let seen = judge.judge_pair(&presented, call_seed)?;
    if !seen.is_finite() || seen.abs() > 1.0 {
        return Err(Error::MalformedJudgeOutput {
            judge_id: judge.id().to_string(),
            message: format!("raw score {seen} lies outside [-1, 1]"),
        });
    }
    let raw = if swapped { -seen } else { seen };
    Ok(JudgeVerdict {
        raw,
        clamped: clamp_verdict(raw)?,
        judge_id: judge.id().to_string(),
        swapped,
    })
}

/// Obtains one verdict, presenting the documents in a seed-determined
/// random order to cancel any position preference of the judge.
pub fn debiased_judgment(
    judge: &dyn Judge,
    pair: &PairRequest,
    seed: u64,
) -> Result<JudgeVerdict> {
    let swapped = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0)).gen_bool(0.5);
    judged_with_presentation(judge, pair, swapped, derive_seed(seed, 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleScore {
    /// Mean clamped verdict in [-1, 1].
    pub mean_raw: f64,
    /// map_to_unit(mean_raw): preference probability for the first document.
    pub unit: f64,
    pub samples: usize,
    /// Standard error of the mean over the clamped verdicts; infinite when
    /// fewer than two samples exist.
    pub sem: f64,
}

#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    pub score: EnsembleScore,
    pub verdicts: Vec<JudgeVerdict>,
    /// One entry per judge that was skipped after its retry also failed.
    pub warnings: Vec<String>,
}

fn sem_of(values: &[f64]) -> f64 {
    let m = values.len();
    if m < 2 {
        return f64::INFINITY;
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
    (var / m as f64).sqrt()
}

fn summarize(verdicts: Vec<JudgeVerdict>, warnings: Vec<String>) -> EnsembleOutcome {
    let clamped: Vec<f64> = verdicts.iter().map(|v| v.clamped as f64).collect();
    let mean_raw = clamped.iter().sum::<f64>() / clamped.len() as f64;
    EnsembleOutcome {
        score: EnsembleScore {
            mean_raw,
            unit: map_to_unit(mean_raw),
            samples: clamped.len(),
            sem: sem_of(&clamped),
        },
        verdicts,
        warnings,
    }
}

/// One debiased verdict from every judge, averaged. Failed judges are
/// retried once with fresh randomness, then skipped with a warning; the
/// call errs when fewer than half the ensemble (rounded up) delivers.
pub fn ensemble_score(
    judges: &[Box<dyn Judge>],
    pair: &PairRequest,
    seed: u64,
) -> Result<EnsembleOutcome> {
    if judges.is_empty() {
        return Err(Error::InvalidParam("ensemble needs at least one judge".into()));
    }
    let mut verdicts = Vec::with_capacity(judges.len());
    let mut warnings = Vec::new();
    for (k, judge) in judges.iter().enumerate() {
        let first = debiased_judgment(judge.as_ref(), pair, derive_seed(seed, 2 * k as u64 + 2));
        match first {
            Ok(v) => verdicts.push(v),
            Err(first_err) => {
                let retry =
                    debiased_judgment(judge.as_ref(), pair, derive_seed(seed, 2 * k as u64 + 3));
                match retry {
                    Ok(v) => verdicts.push(v),
                    Err(retry_err) => warnings.push(format!(
                        "judge {} skipped: {first_err}; retry: {retry_err}",
                        judge.id()
                    )),
                }
            }
        }
    }
    let required = judges.len().div_ceil(2);
    if verdicts.len() < required {
        return Err(Error::TooManyJudgeFailures {
            failed: judges.len() - verdicts.len(),
            total: judges.len(),
            required,
        });
    }
    Ok(summarize(verdicts, warnings))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemOptions {
    pub sem_target: f64,
    pub min_samples: usize,
    pub max_samples: usize,
}

impl Default for SemOptions {
    fn default() -> Self {
        Self { sem_target: 0.1, min_samples: 3, max_samples: 400 }
    }
}

impl SemOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.sem_target > 0.0 && self.sem_target.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "sem_target must be positive and finite, got {}",
                self.sem_target
            )));
        }
        if self.min_samples < 2 || self.max_samples < self.min_samples {
            return Err(Error::InvalidParam(format!(
                "need max_samples >= min_samples >= 2, got min {} max {}",
                self.min_samples, self.max_samples
            )));
        }
        Ok(())
    }
}

/// Draws debiased verdicts from the pool (uniformly, with replacement)
/// until the standard error of the mean verdict reaches the target or the
/// sample cap is hit. Failed draws are skipped with a warning; the attempt
/// budget bounds the loop when the pool keeps failing.
pub fn sample_until_sem(
    pool: &[Box<dyn Judge>],
    pair: &PairRequest,
    opts: &SemOptions,
    seed: u64,
) -> Result<EnsembleOutcome> {
    opts.validate()?;
    if pool.is_empty() {
        return Err(Error::InvalidParam("judge pool is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let mut verdicts: Vec<JudgeVerdict> = Vec::new();
    let mut warnings = Vec::new();
    let mut clamped: Vec<f64> = Vec::new();
    let max_attempts = 4 * opts.max_samples + 8;
    let mut attempts = 0;
    while clamped.len() < opts.max_samples {
        if attempts >= max_attempts {
            return Err(Error::PoolExhausted {
                attempts,
                message: format!(
                    "{} of {} draws failed before reaching {} samples",
                    warnings.len(),
                    attempts,
                    opts.max_samples
                ),
            });
        }
        attempts += 1;
        let judge = pool[rng.gen_range(0..pool.len())].as_ref();
        match debiased_judgment(judge, pair, derive_seed(seed, attempts as u64)) {
            Ok(v) => {
                clamped.push(v.clamped as f64);
                verdicts.push(v);
            }
            Err(e) => {
                warnings.push(format!("draw {attempts} ({}) failed: {e}", judge.id()));
                continue;
            }
        }
        if clamped.len() >= opts.min_samples && sem_of(&clamped) <= opts.sem_target {
            break;
        }
    }
    Ok(summarize(verdicts, warnings))
}
