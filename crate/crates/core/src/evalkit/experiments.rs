//! Desk-scale runners for the diversity and coherence comparisons.

use rand::seq::{IndexedRandom, IteratorRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::metrics::{jsd, self_bleu, NGramDistribution, BLEU_EPSILON, DEFAULT_MAX_N};
use super::report::{ExperimentReport, ReportRow};
use super::EvalError;
use crate::chordlang::{Key, Mode, Progression};
use crate::corpus::TokenVocab;
use crate::llmgate::{
    generate_candidate_single, generate_candidates_batch, keyword_vocabulary, ChatProvider,
    KeywordSet,
};
use crate::sampler::{run_rejection, SamplerConfig, Scorer};
use crate::seqmodel::PriorModel;

pub const BATCH_CONDITION: &str = "batch_diverse";
pub const SINGLE_CONDITION: &str = "single_baseline";
/// Smallest condition size accepted by the coherence comparison.
pub const MIN_CONDITION_SIZE: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityConfig {
    pub pairs: usize,
    pub set_size: usize,
    pub bars: usize,
    pub keywords_per_generation: usize,
    pub max_n: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        DiversityConfig {
            pairs: 100,
            set_size: 30,
            bars: 4,
            keywords_per_generation: 3,
            max_n: DEFAULT_MAX_N,
            epsilon: BLEU_EPSILON,
            seed: 0,
        }
    }
}

fn random_keywords<R: Rng>(vocab: &[String], k: usize, rng: &mut R) -> KeywordSet {
    let picked: Vec<&String> = vocab.iter().choose_multiple(rng, k.max(1));
    KeywordSet::from_user(&picked)
}

/// For each pair: one set from a single batch call and one set from
/// `set_size` single-progression calls, all in C major with fresh random
/// keywords per call. Scores every set with Self-BLEU.
pub fn run_diversity_experiment(
    provider: &dyn ChatProvider,
    cfg: &DiversityConfig,
) -> Result<ExperimentReport, EvalError> {
    if cfg.pairs == 0 {
        return Err(EvalError::InsufficientData("diversity experiment needs at least one pair".into()));
    }
    if cfg.set_size < 2 {
        return Err(EvalError::InsufficientData("sets need at least 2 progressions".into()));
    }
    let vocab = keyword_vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut batch_scores, mut single_scores) = (Vec::new(), Vec::new());
    for pair in 0..cfg.pairs {
        let kws = random_keywords(&vocab, cfg.keywords_per_generation, &mut rng);
        let batch = generate_candidates_batch(&kws, Key::C, Mode::Maj, cfg.bars, cfg.set_size, provider)?;
        let batch_set: Vec<Vec<String>> =
            batch.candidates.iter().take(cfg.set_size).map(Progression::symbols).collect();
        if batch_set.len() < 2 {
            return Err(EvalError::InsufficientData(format!(
                "pair {pair}: batch produced {} valid progressions",
                batch_set.len()
            )));
        }
        let mut single_set = Vec::with_capacity(cfg.set_size);
        for _ in 0..cfg.set_size {
            let kws = random_keywords(&vocab, cfg.keywords_per_generation, &mut rng);
            single_set.push(generate_candidate_single(&kws, Key::C, Mode::Maj, cfg.bars, provider)?.symbols());
        }
        batch_scores.push(self_bleu(&batch_set, cfg.max_n, cfg.epsilon)?);
        single_scores.push(self_bleu(&single_set, cfg.max_n, cfg.epsilon)?);
    }
    Ok(ExperimentReport {
        experiment: "diversity".into(),
        rows: vec![
            ReportRow::from_values(BATCH_CONDITION, "self_bleu", batch_scores),
            ReportRow::from_values(SINGLE_CONDITION, "self_bleu", single_scores),
        ],
        config: serde_json::to_value(cfg).expect("config serializes"),
        seeds: vec![cfg.seed],
    })
}

/// Self-BLEU per set for sets already on disk, grouped by condition.
pub fn self_bleu_report(
    conditions: &[(String, Vec<Vec<Vec<String>>>)],
    max_n: usize,
    epsilon: f64,
) -> Result<ExperimentReport, EvalError> {
    let mut rows = Vec::new();
    for (label, sets) in conditions {
        if sets.is_empty() {
            return Err(EvalError::InsufficientData(format!("condition {label} has no sets")));
        }
        let scores = sets.iter().map(|s| self_bleu(s, max_n, epsilon)).collect::<Result<Vec<_>, _>>()?;
        rows.push(ReportRow::from_values(label, "self_bleu", scores));
    }
    Ok(ExperimentReport {
        experiment: "diversity".into(),
        rows,
        config: json!({"max_n": max_n, "epsilon": epsilon}),
        seeds: Vec::new(),
    })
}

/// A labelled collection of progressions, as chord-token lists in C.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub label: String,
    pub progressions: Vec<Vec<String>>,
}

impl Condition {
    pub fn new(label: impl Into<String>, progressions: Vec<Vec<String>>) -> Condition {
        Condition { label: label.into(), progressions }
    }
}

/// Unigram and bigram JSD of every condition against the reference corpus.
pub fn run_coherence_experiment(
    corpus: &[Vec<String>],
    conditions: &[Condition],
    min_size: usize,
) -> Result<ExperimentReport, EvalError> {
    let reference = [
        NGramDistribution::from_sequences(1, corpus)?,
        NGramDistribution::from_sequences(2, corpus)?,
    ];
    let mut rows = Vec::new();
    let mut sizes = serde_json::Map::new();
    for c in conditions {
        if c.progressions.len() < min_size {
            return Err(EvalError::InsufficientData(format!(
                "condition {} has {} progressions, need {min_size}",
                c.label,
                c.progressions.len()
            )));
        }
        for (order, metric) in [(1, "unigram_jsd"), (2, "bigram_jsd")] {
            let dist = NGramDistribution::from_sequences(order, &c.progressions)?;
            let value = jsd(&reference[order - 1], &dist)?;
            rows.push(ReportRow::from_values(&c.label, metric, vec![value]));
        }
        sizes.insert(c.label.clone(), c.progressions.len().into());
    }
    Ok(ExperimentReport {
        experiment: "coherence".into(),
        rows,
        config: json!({"corpus_size": corpus.len(), "condition_sizes": sizes, "min_size": min_size}),
        seeds: Vec::new(),
    })
}

/// Ancestral samples from a prior, as chord tokens in C.
pub fn sample_prior<R: Rng>(
    model: &PriorModel,
    vocab: &TokenVocab,
    count: usize,
    bars: usize,
    rng: &mut R,
) -> Result<Vec<Vec<String>>, EvalError> {
    (0..count)
        .map(|_| Ok(model.sample(vocab, bars, Mode::Maj, rng)?.symbols()))
        .collect()
}

/// Progressions whose chords are drawn uniformly from the vocabulary.
pub fn uniform_progressions<R: Rng>(vocab: &TokenVocab, count: usize, bars: usize, rng: &mut R) -> Vec<Vec<String>> {
    let tokens = vocab.tokens();
    (0..count)
        .map(|_| (0..bars).map(|_| tokens.choose(rng).expect("vocabulary has chords").clone()).collect())
        .collect()
}

/// Deployed selection applied to consecutive pools of `cfg.n` candidates;
/// returns every suggestion made, transposed to C.
pub fn rejection_condition<R: Rng>(
    pool: &[Progression],
    scorer: &Scorer<'_>,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Vec<Vec<String>>, EvalError> {
    let mut out = Vec::new();
    for chunk in pool.chunks(cfg.n) {
        let set = run_rejection(chunk, scorer, cfg, rng)?;
        out.extend(
            set.suggestions
                .iter()
                .map(|s| crate::chordlang::transpose_progression(&s.progression, Key::C).symbols()),
        );
    }
    Ok(out)
}
