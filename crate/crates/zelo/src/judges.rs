//! Judge backends that score a presented document pair.
//!
//! A judge sees the pair in presentation order and returns a raw score in
//! [-1, 1] where negative favors the first document shown (Document A).
//! Position-swap debiasing and clamping happen above this layer.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::mix64;

/// A pair as presented to a judge. `first_*` is Document A, `second_*` is
/// Document B; indices refer to positions in the owning candidate set.
#[derive(Debug, Clone, Copy)]
pub struct PairRequest<'a> {
    pub query_id: &'a str,
    pub query_text: &'a str,
    pub first_index: usize,
    pub first_text: &'a str,
    pub second_index: usize,
    pub second_text: &'a str,
}

pub trait Judge: Send + Sync {
    fn id(&self) -> &str;

    /// Raw preference for the presented pair in [-1, 1]; negative favors
    /// the first document. `seed` feeds stochastic judges so repeat calls
    /// are reproducible regardless of scheduling.
    fn judge_pair(&self, req: &PairRequest, seed: u64) -> Result<f64>;
}

/// Test oracle with known ground truth: prefers the first document with
/// probability (1 + erf((e_first - e_second) / noise_scale)) / 2, the same
/// link later used for fitting, so studies have a closed-form target.
pub struct SyntheticJudge {
    id: String,
    hidden: Vec<f64>,
    noise_scale: f64,
    indifference: f64,
    seed: u64,
}

impl SyntheticJudge {
    pub fn new(id: impl Into<String>, hidden: Vec<f64>, noise_scale: f64, seed: u64) -> Result<Self> {
        Self::with_indifference(id, hidden, noise_scale, 0.0, seed)
    }

    /// `indifference` is the probability of a 0 (no preference) verdict.
    pub fn with_indifference(
        id: impl Into<String>,
        hidden: Vec<f64>,
        noise_scale: f64,
        indifference: f64,
        seed: u64,
    ) -> Result<Self> {
        if !noise_scale.is_finite() || noise_scale < 0.0 {
            return Err(Error::InvalidParam(format!(
                "noise_scale must be finite and >= 0, got {noise_scale}"
            )));
        }
        if !(0.0..=1.0).contains(&indifference) {
            return Err(Error::InvalidParam(format!(
                "indifference must lie in [0, 1], got {indifference}"
            )));
        }
        Ok(Self { id: id.into(), hidden, noise_scale, indifference, seed })
    }

    /// Probability that candidate `i` is preferred over candidate `j`.
    /// A zero noise scale degrades to the deterministic step function.
    pub fn preference_probability(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.hidden.len();
        let e_i = *self.hidden.get(i).ok_or(Error::IndexOutOfRange { index: i, n })?;
        let e_j = *self.hidden.get(j).ok_or(Error::IndexOutOfRange { index: j, n })?;
        let scale = self.noise_scale.max(1e-12);
        Ok(0.5 * (1.0 + libm::erf((e_i - e_j) / scale)))
    }
}

impl Judge for SyntheticJudge {
    fn id(&self) -> &str {
        &self.id
    }

    fn judge_pair(&self, req: &PairRequest, seed: u64) -> Result<f64> {
        let p_first = self.preference_probability(req.first_index, req.second_index)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ mix64(seed));
        if self.indifference > 0.0 && rng.gen::<f64>() < self.indifference {
            return Ok(0.0);
        }
        Ok(if rng.gen::<f64>() < p_first { -1.0 } else { 1.0 })
    }
}

/// One recorded raw judgment keyed by query and candidate indices.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReplayRecord {
    pub query_id: String,
    pub i: usize,
    pub j: usize,
    pub raw: f64,
}

/// Replays recorded raw scores. A pair stored as (i, j) answers a swapped
/// presentation (j, i) with the negated score, so debiasing still works.
pub struct ReplayJudge {
    id: String,
    map: HashMap<(String, usize, usize), f64>,
}

impl ReplayJudge {
    pub fn new(id: impl Into<String>, records: Vec<ReplayRecord>) -> Result<Self> {
        let mut map = HashMap::with_capacity(records.len());
        for r in records {
            if r.i == r.j {
                return Err(Error::SelfComparison(r.i));
            }
            if map.insert((r.query_id.clone(), r.i, r.j), r.raw).is_some() {
                return Err(Error::DuplicateId(format!(
                    "replay entry ({}, {}, {})",
                    r.query_id, r.i, r.j
                )));
            }
        }
        Ok(Self { id: id.into(), map })
    }

    pub fn from_path(id: impl Into<String>, path: &Path) -> Result<Self> {
        Self::new(id, crate::io::read_jsonl(path)?)
    }
}

impl Judge for ReplayJudge {
    fn id(&self) -> &str {
        &self.id
    }

    fn judge_pair(&self, req: &PairRequest, _seed: u64) -> Result<f64> {
        let forward = (req.query_id.to_string(), req.first_index, req.second_index);
        if let Some(&raw) = self.map.get(&forward) {
            return Ok(raw);
        }
        let reverse = (req.query_id.to_string(), req.second_index, req.first_index);
        if let Some(&raw) = self.map.get(&reverse) {
            return Ok(-raw);
        }
        Err(Error::JudgeFailure {
            judge_id: self.id.clone(),
            message: format!(
                "no replay entry for pair ({}, {}) of query {}",
                req.first_index, req.second_index, req.query_id
            ),
        })
    }
}

/// Instruction block sent as the system prompt of every HTTP judge call.
pub const PAIRWISE_PROMPT: &str = "You are a relevance scoring system. Given a query and two documents (A and B), your job is to decide which document is more relevant to the given query. You should think carefully, considering the pros and cons between each document. For your first few sentences, consider the pros and cons of Document A. Then, spend some time thinking about Document B. Then, at the end, compare, and make a decision as to which one is more relevant. Do NOT make a decision in the beginning of your thoughts, stay open-minded until the last 1-2 sentences of your thoughts.\n\nThe score should range from -1.0 to 1.0, where negative means document A is more relevant, and positive means Document B is more relevant. You can pick any number from -1.0 to 1.0.";

/// Extracts the verdict from judge prose: the last signed decimal that lies
/// within [-1, 1] wins, so trailing "final score" phrasing dominates any
/// numbers quoted mid-reasoning.
pub fn parse_judge_score(text: &str) -> Option<f64> {
    let re = regex::Regex::new(r"-?(?:\d+\.\d*|\.\d+|\d+)").expect("static regex compiles");
    re.find_iter(text)
        .filter_map(|m| m.as_str().parse::<f64>().ok())
        .filter(|v| v.abs() <= 1.0)
        .last()
}

/// Chat-completion judge. POSTs the pairwise prompt to an OpenAI-style
/// endpoint and parses the assistant message for a score.
pub struct HttpJudge {
    id: String,
    endpoint: String,
    model: String,
    prompt_template: String,
    auth_env: Option<String>,
    temperature: Option<f64>,
    max_retries: u32,
    agent: ureq::Agent,
}

impl HttpJudge {
    pub fn new(
        id: impl Into<String>,
        endpoint: impl Into<String>,
        model: impl Into<String>,
        prompt_template: Option<String>,
        auth_env: Option<String>,
        temperature: Option<f64>,
        timeout_secs: u64,
        max_retries: u32,
    ) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(timeout_secs)))
            .http_status_as_error(true)
            .build();
        Self {
            id: id.into(),
            endpoint: endpoint.into(),
            model: model.into(),
            prompt_template: prompt_template.unwrap_or_else(|| PAIRWISE_PROMPT.to_string()),
            auth_env,
            temperature,
            max_retries,
            agent: ureq::Agent::new_with_config(config),
        }
    }

    fn call_once(&self, req: &PairRequest) -> Result<f64> {
        let user = format!(
            "Query: {}\n\nDocument A:\n{}\n\nDocument B:\n{}",
            req.query_text, req.first_text, req.second_text
        );
        let mut body = serde_json::json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": self.prompt_template},
                {"role": "user", "content": user},
            ],
        });
        if let Some(t) = self.temperature {
            body["temperature"] = serde_json::json!(t);
        }
        let mut request = self.agent.post(&self.endpoint);
        if let Some(var) = &self.auth_env {
            let token = std::env::var(var).map_err(|_| {
                Error::Config(format!("auth env var {var} is not set"))
            })?;
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request.send_json(&body).map_err(|e| Error::JudgeFailure {
            judge_id: self.id.clone(),
            message: format!("request to {} failed: {e}", self.endpoint),
        })?;
        let value: serde_json::Value =
            response.body_mut().read_json().map_err(|e| Error::JudgeFailure {
                judge_id: self.id.clone(),
                message: format!("unreadable response body: {e}"),
            })?;
        let content = value["choices"][0]["message"]["content"].as_str().ok_or_else(|| {
            Error::MalformedJudgeOutput {
                judge_id: self.id.clone(),
                message: "response carries no choices[0].message.content".into(),
            }
        })?;
        parse_judge_score(content).ok_or_else(|| Error::MalformedJudgeOutput {
            judge_id: self.id.clone(),
            message: format!("no score in [-1, 1] found in: {content:.60}"),
        })
    }
}

impl Judge for HttpJudge {
    fn id(&self) -> &str {
        &self.id
    }

    fn judge_pair(&self, req: &PairRequest, _seed: u64) -> Result<f64> {
        let mut last = None;
        for attempt in 0..=self.max_retries {
            match self.call_once(req) {
                Ok(raw) => return Ok(raw),
                // Config errors (like a missing token) never heal on retry.
                Err(e @ Error::Config(_)) => return Err(e),
                Err(e) => {
                    log::warn!(
                        "judge={} attempt={} failed: {e}",
                        self.id,
                        attempt + 1
                    );
                    last = Some(e);
                }
            }
        }
        Err(last.expect("at least one attempt ran"))
    }
}

/// Declarative judge configuration, as it appears in run configs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JudgeSpec {
    Replay {
        path: PathBuf,
        #[serde(default)]
        id: Option<String>,
    },
    Synthetic {
        hidden_elos: Vec<f64>,
        noise_scale: f64,
        seed: u64,
        #[serde(default)]
        indifference: f64,
        #[serde(default)]
        id: Option<String>,
    },
    Http {
        endpoint: String,
        model: String,
        max_retries: u32,
        #[serde(default)]
        prompt_template: Option<String>,
        #[serde(default)]
        auth_env: Option<String>,
        #[serde(default)]
        temperature: Option<f64>,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default)]
        id: Option<String>,
    },
}

fn default_timeout_secs() -> u64 {
    60
}

impl JudgeSpec {
    /// Instantiates the judge. `ordinal` disambiguates default ids when a
    /// config lists several judges of the same kind.
    pub fn build(&self, ordinal: usize) -> Result<Box<dyn Judge>> {
        match self {
            JudgeSpec::Replay { path, id } => {
                let id = id.clone().unwrap_or_else(|| format!("replay-{ordinal}"));
                Ok(Box::new(ReplayJudge::from_path(id, path)?))
            }
            JudgeSpec::Synthetic { hidden_elos, noise_scale, seed, indifference, id } => {
                let id = id.clone().unwrap_or_else(|| format!("synthetic-{ordinal}"));
                Ok(Box::new(SyntheticJudge::with_indifference(
                    id,
                    hidden_elos.clone(),
                    *noise_scale,
                    *indifference,
                    *seed,
                )?))
            }
            JudgeSpec::Http {
                endpoint,
                model,
                max_retries,
                prompt_template,
                auth_env,
                temperature,
                timeout_secs,
                id,
            } => {
                let id = id.clone().unwrap_or_else(|| format!("http-{ordinal}"));
                Ok(Box::new(HttpJudge::new(
                    id,
                    endpoint.clone(),
                    model.clone(),
                    prompt_template.clone(),
                    auth_env.clone(),
                    *temperature,
                    *timeout_secs,
                    *max_retries,
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request<'a>(i: usize, j: usize) -> PairRequest<'a> {
        PairRequest {
            query_id: "q1",
            query_text: "which doc",
            first_index: i,
            first_text: "first",
            second_index: j,
            second_text: "second",
        }
    }

    #[test]
    fn synthetic_is_symmetric_at_equal_elos() {
        let judge = SyntheticJudge::new("s", vec![0.0, 0.0], 1.0, 7).unwrap();
        assert_eq!(judge.preference_probability(0, 1).unwrap(), 0.5);
        let mut wins = 0;
        for call in 0..10_000u64 {
            if judge.judge_pair(&request(0, 1), call).unwrap() < 0.0 {
                wins += 1;
            }
        }
        assert!((4700..=5300).contains(&wins), "got {wins} first-doc wins");
    }

    #[test]
    fn synthetic_noiseless_limit_always_prefers_the_stronger() {
        let judge = SyntheticJudge::new("s", vec![1.0, 0.0], 0.0, 7).unwrap();
        assert_eq!(judge.preference_probability(0, 1).unwrap(), 1.0);
        for call in 0..50u64 {
            assert_eq!(judge.judge_pair(&request(0, 1), call).unwrap(), -1.0);
            assert_eq!(judge.judge_pair(&request(1, 0), call).unwrap(), 1.0);
        }
    }

    #[test]
    fn synthetic_frequency_matches_the_erf_formula() {
        // P(prefer first) at delta 1, scale 1 is (1 + erf(1)) / 2.
        let judge = SyntheticJudge::new("s", vec![1.0, 0.0], 1.0, 3).unwrap();
        let mut wins = 0u32;
        let draws = 100_000u64;
        for call in 0..draws {
            if judge.judge_pair(&request(0, 1), call).unwrap() < 0.0 {
                wins += 1;
            }
        }
        let freq = wins as f64 / draws as f64;
        assert!((freq - 0.9214).abs() < 0.005, "frequency was {freq}");
    }

    #[test]
    fn synthetic_indifference_band_emits_zeros() {
        let judge =
            SyntheticJudge::with_indifference("s", vec![0.0, 0.0], 1.0, 0.5, 11).unwrap();
        let zeros = (0..10_000u64)
            .filter(|&c| judge.judge_pair(&request(0, 1), c).unwrap() == 0.0)
            .count();
        assert!((4600..=5400).contains(&zeros), "got {zeros} zeros");
    }

    #[test]
    fn synthetic_repeat_calls_with_one_seed_agree() {
        let judge = SyntheticJudge::new("s", vec![0.3, -0.3], 0.8, 5).unwrap();
        let a = judge.judge_pair(&request(0, 1), 42).unwrap();
        let b = judge.judge_pair(&request(0, 1), 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replay_answers_both_presentations() {
        let judge = ReplayJudge::new(
            "r",
            vec![ReplayRecord { query_id: "q1".into(), i: 0, j: 1, raw: 0.8 }],
        )
        .unwrap();
        assert_eq!(judge.judge_pair(&request(0, 1), 0).unwrap(), 0.8);
        assert_eq!(judge.judge_pair(&request(1, 0), 0).unwrap(), -0.8);
        assert!(matches!(
            judge.judge_pair(&request(0, 2), 0),
            Err(Error::JudgeFailure { .. })
        ));
    }

    #[test]
    fn replay_rejects_duplicate_entries() {
        let records = vec![
            ReplayRecord { query_id: "q1".into(), i: 0, j: 1, raw: 0.8 },
            ReplayRecord { query_id: "q1".into(), i: 0, j: 1, raw: 0.2 },
        ];
        assert!(matches!(ReplayJudge::new("r", records), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn score_parsing_takes_the_last_in_range_number() {
        assert_eq!(parse_judge_score("The score is 0.7."), Some(0.7));
        assert_eq!(parse_judge_score("A looks at 0.9 first, but B wins: -0.25"), Some(-0.25));
        assert_eq!(parse_judge_score("definitely -1"), Some(-1.0));
        assert_eq!(parse_judge_score("on a scale of -1.0 to 1.0 I say .5"), Some(0.5));
        // Out-of-range trailing numbers fall back to the last valid one.
        assert_eq!(parse_judge_score("score -0.5 out of 10"), Some(-0.5));
        assert_eq!(parse_judge_score("no numbers here"), None);
        assert_eq!(parse_judge_score("way off: 42"), None);
    }

    #[test]
    fn judge_spec_round_trips_and_builds() {
        let spec: JudgeSpec = serde_json::from_str(
            r#"{"kind":"synthetic","hidden_elos":[0.5,-0.5],"noise_scale":1.0,"seed":3}"#,
        )
        .unwrap();
        let judge = spec.build(0).unwrap();
        assert_eq!(judge.id(), "synthetic-0");
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(spec, serde_json::from_str(&json).unwrap());

        assert!(serde_json::from_str::<JudgeSpec>(
            r#"{"kind":"http","endpoint":"http://x","model":"m"}"#
        )
        .is_err(), "max_retries bound is required for http judges");
    }
}
