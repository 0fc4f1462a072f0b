//! Rejection sampling of LLM-proposed progressions against the chord prior.
//!
//! A candidate `x` drawn from the proposal model is kept with probability
//! `min(1, P(x) / (M * Q(x)))`, where `P` is the prior trained on human
//! progressions and `Q` models the LLM's own output distribution. Keyword
//! conditioning cancels out of the ratio, so neither model sees keywords.

mod calibrate;

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chordlang::{transpose_progression, Key, Mode, Progression};
use crate::corpus::{encode, TokenVocab};
use crate::llmgate::{generate_candidates_batch, ChatProvider, KeywordSet, LlmError};
use crate::seqmodel::{ModelError, PriorModel};

pub use calibrate::{calibrate_m, log_ratios, nearest_rank, CalibrationArtifact, DEFAULT_PERCENTILE};

/// Scale constant used when no calibration artifact is supplied.
pub const DEFAULT_M: f64 = 7.64;
pub const DEFAULT_N: usize = 30;
pub const DEFAULT_TAU: f64 = 1.7;
pub const DEFAULT_TARGET_COUNT: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("need at least {needed} ratios for calibration, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("ratio {0} is not finite and positive")]
    InvalidRatio(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0}")]
    Format(String),
}

/// How accepted suggestions are ordered before top-k fills.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptedOrder {
    #[default]
    Ratio,
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    #[serde(rename = "M", default = "default_m")]
    pub m: f64,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_target")]
    pub target_count: usize,
    /// Per-model temperature overrides; both fall back to `tau`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_q: Option<f64>,
    /// Fill up to `target_count` with the best-ratio rejects.
    #[serde(default = "default_true")]
    pub fallback: bool,
    #[serde(default)]
    pub order: AcceptedOrder,
}

fn default_m() -> f64 {
    DEFAULT_M
}
fn default_n() -> usize {
    DEFAULT_N
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_target() -> usize {
    DEFAULT_TARGET_COUNT
}
fn default_true() -> bool {
    true
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            m: DEFAULT_M,
            n: DEFAULT_N,
            tau: DEFAULT_TAU,
            target_count: DEFAULT_TARGET_COUNT,
            tau_p: None,
            tau_q: None,
            fallback: true,
            order: AcceptedOrder::Ratio,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |msg: String| Err(SamplerError::InvalidConfig(msg));
        if !(self.m.is_finite() && self.m > 0.0) {
            return bad(format!("M must be finite and positive, got {}", self.m));
        }
        if self.target_count == 0 || self.n < self.target_count {
            return bad(format!("need N >= target_count >= 1, got N={} target_count={}", self.n, self.target_count));
        }
        for t in [Some(self.tau), self.tau_p, self.tau_q].into_iter().flatten() {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("temperature must be finite and positive, got {t}"));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SamplerConfig, SamplerError> {
        let text = fs::read_to_string(path)
            .map_err(|source| SamplerError::Io { path: path.display().to_string(), source })?;
        let cfg: SamplerConfig = serde_json::from_str(&text)
            .map_err(|e| SamplerError::Format(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tau_p(&self) -> f64 {
        self.tau_p.unwrap_or(self.tau)
    }

    pub fn tau_q(&self) -> f64 {
        self.tau_q.unwrap_or(self.tau)
    }

    pub fn with_calibration(mut self, artifact: &CalibrationArtifact) -> SamplerConfig {
        self.m = artifact.m;
        self
    }
}

/// Scores candidates under the prior and proposal models.
pub struct Scorer<'a> {
    vocab: &'a TokenVocab,
    p: &'a PriorModel,
    q: &'a PriorModel,
}

impl<'a> Scorer<'a> {
    pub fn new(vocab: &'a TokenVocab, p: &'a PriorModel, q: &'a PriorModel) -> Result<Self, SamplerError> {
        p.check_vocab(vocab)?;
        q.check_vocab(vocab)?;
        Ok(Scorer { vocab, p, q })
    }

    /// `(log P(x), log Q(x))` of the candidate transposed to C.
    pub fn score(&self, candidate: &Progression, cfg: &SamplerConfig) -> Result<(f64, f64), SamplerError> {
        let in_c = transpose_progression(candidate, Key::C);
        let ids = encode(&in_c, self.vocab);
        Ok((self.p.log_prob(&ids, cfg.tau_p())?, self.q.log_prob(&ids, cfg.tau_q())?))
    }

    pub fn acceptance_ratio(&self, candidate: &Progression, cfg: &SamplerConfig) -> Result<f64, SamplerError> {
        let (lp, lq) = self.score(candidate, cfg)?;
        Ok(ratio_from_scores(lp, lq, cfg.m))
    }
}

/// `min(1, exp(log_p - log_q) / m)`. Dividing by `m` rather than subtracting
/// its log keeps a change of scale exact. Undefined ratios count as zero.
pub fn ratio_from_scores(log_p: f64, log_q: f64, m: f64) -> f64 {
    let diff = log_p - log_q;
    if diff.is_nan() {
        return 0.0;
    }
    if diff >= m.ln() {
        return 1.0;
    }
    (diff.exp() / m).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRecord {
    pub index: usize,
    pub candidate: Progression,
    pub log_p: f64,
    pub log_q: f64,
    pub ratio: f64,
    pub u: f64,
    pub accepted: bool,
    /// An earlier candidate in the pool rendered identically.
    pub duplicate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Accepted,
    TopkFill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub progression: Progression,
    pub provenance: Provenance,
    pub ratio: f64,
    /// Position of the candidate in the pool.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionSet {
    pub suggestions: Vec<Suggestion>,
    pub audit: Vec<AcceptanceRecord>,
}

impl SuggestionSet {
    pub fn accepted_count(&self) -> usize {
        self.audit.iter().filter(|r| r.accepted).count()
    }

    pub fn progressions(&self) -> Vec<&Progression> {
        self.suggestions.iter().map(|s| &s.progression).collect()
    }
}

/// A candidate already scored under both models.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub progression: Progression,
    pub log_p: f64,
    pub log_q: f64,
}

pub fn run_rejection<R: Rng>(
    candidates: &[Progression],
    scorer: &Scorer<'_>,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<SuggestionSet, SamplerError> {
    let scored = candidates
        .iter()
        .map(|c| {
            let (log_p, log_q) = scorer.score(c, cfg)?;
            Ok(ScoredCandidate { progression: c.clone(), log_p, log_q })
        })
        .collect::<Result<Vec<_>, SamplerError>>()?;
    select(scored, cfg, rng)
}

/// The accept/reject pass: one uniform draw per candidate, accept iff
/// `u < ratio`, then trim or fill to `target_count`.
pub fn select<R: Rng>(
    scored: Vec<ScoredCandidate>,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<SuggestionSet, SamplerError> {
    cfg.validate()?;
    if scored.is_empty() {
        log::warn!("rejection sampling called with no candidates");
    } else if scored.len() < cfg.n {
        log::warn!("rejection sampling {} candidates, expected {}", scored.len(), cfg.n);
    }

    let mut seen = HashSet::new();
    let audit: Vec<AcceptanceRecord> = scored
        .into_iter()
        .enumerate()
        .map(|(index, c)| {
            let ratio = ratio_from_scores(c.log_p, c.log_q, cfg.m);
            let u: f64 = rng.random();
            let duplicate = !seen.insert(c.progression.to_string());
            AcceptanceRecord {
                index,
                candidate: c.progression,
                log_p: c.log_p,
                log_q: c.log_q,
                ratio,
                u,
                accepted: u < ratio,
                duplicate,
            }
        })
        .collect();

    let mut accepted = by_ratio(audit.iter().filter(|r| r.accepted).collect());
    accepted.truncate(cfg.target_count);
    if cfg.order == AcceptedOrder::Candidate {
        accepted.sort_by_key(|r| r.index);
    }
    let mut suggestions: Vec<Suggestion> = accepted
        .into_iter()
        .map(|r| suggestion(r, Provenance::Accepted))
        .collect();
    if cfg.fallback && suggestions.len() < cfg.target_count {
        let need = cfg.target_count - suggestions.len();
        let fills = by_ratio(audit.iter().filter(|r| !r.accepted).collect());
        suggestions.extend(fills.into_iter().take(need).map(|r| suggestion(r, Provenance::TopkFill)));
    }
    Ok(SuggestionSet { suggestions, audit })
}

/// Highest ratio first; the sort is stable, so ties keep pool order.
fn by_ratio(mut records: Vec<&AcceptanceRecord>) -> Vec<&AcceptanceRecord> {
    records.sort_by(|a, b| b.ratio.total_cmp(&a.ratio));
    records
}

fn suggestion(r: &AcceptanceRecord, provenance: Provenance) -> Suggestion {
    Suggestion { progression: r.candidate.clone(), provenance, ratio: r.ratio, index: r.index }
}

/// Full request path: batch prompt, validation, then rejection sampling.
/// Suggestions stay in the requested key.
#[allow(clippy::too_many_arguments)]
pub fn generate_suggestions<R: Rng>(
    keywords: &KeywordSet,
    key: Key,
    mode: Mode,
    bars: usize,
    provider: &dyn ChatProvider,
    scorer: &Scorer<'_>,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<SuggestionSet, SamplerError> {
    cfg.validate()?;
    let batch = generate_candidates_batch(keywords, key, mode, bars, cfg.n, provider)?;
    if !batch.dropped.is_empty() {
        log::info!("{} of the batch lines were dropped", batch.dropped.len());
    }
    run_rejection(&batch.candidates, scorer, cfg, rng)
}

/// One JSON object per acceptance record.
pub fn write_audit<W: Write>(mut out: W, records: &[AcceptanceRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
