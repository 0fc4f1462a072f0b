//! Chord-token n-gram distributions, Jensen-Shannon divergence and Self-BLEU.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Smoothing mass substituted for zero n-gram matches in BLEU.
pub const BLEU_EPSILON: f64 = 1e-9;
pub const DEFAULT_MAX_N: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramDistribution {
    order: usize,
    counts: BTreeMap<Vec<String>, u64>,
    total: u64,
}

impl NGramDistribution {
    /// Counts n-grams inside each progression; nothing spans two progressions.
    pub fn from_sequences<S: AsRef<str>>(order: usize, sequences: &[Vec<S>]) -> Result<Self, EvalError> {
        if !(1..=2).contains(&order) {
            return Err(EvalError::UnsupportedOrder(order));
        }
        let mut counts = BTreeMap::new();
        let mut total = 0;
        for seq in sequences {
            for w in seq.windows(order) {
                let gram = w.iter().map(|s| s.as_ref().to_string()).collect();
                *counts.entry(gram).or_insert(0) += 1;
                total += 1;
            }
        }
        Ok(NGramDistribution { order, counts, total })
    }

    pub fn from_counts(order: usize, counts: BTreeMap<Vec<String>, u64>) -> Self {
        let counts: BTreeMap<_, _> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        let total = counts.values().sum();
        NGramDistribution { order, counts, total }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<Vec<String>, u64> {
        &self.counts
    }

    pub fn probability(&self, gram: &[String]) -> f64 {
        match self.counts.get(gram) {
            Some(&c) => c as f64 / self.total as f64,
            None => 0.0,
        }
    }
}

/// Base-2 Jensen-Shannon divergence over the union support, in `[0, 1]`.
pub fn jsd(a: &NGramDistribution, b: &NGramDistribution) -> Result<f64, EvalError> {
    if a.order != b.order {
        return Err(EvalError::OrderMismatch(a.order, b.order));
    }
    if a.total == 0 || b.total == 0 {
        return Err(EvalError::EmptyDistribution);
    }
    let support: BTreeSet<&Vec<String>> = a.counts.keys().chain(b.counts.keys()).collect();
    let mut sum = 0.0;
    for gram in support {
        let p = a.probability(gram);
        let q = b.probability(gram);
        let m = 0.5 * (p + q);
        if p > 0.0 {
            sum += p * (p / m).log2();
        }
        if q > 0.0 {
            sum += q * (q / m).log2();
        }
    }
    Ok((0.5 * sum).clamp(0.0, 1.0))
}

fn ngram_counts<S: AsRef<str>>(seq: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut out = HashMap::new();
    for w in seq.windows(n) {
        *out.entry(w.iter().map(|s| s.as_ref()).collect()).or_insert(0) += 1;
    }
    out
}

/// Sentence BLEU of `hypothesis` against `references`: clipped n-gram
/// precisions for n = 1..=max_n, geometric mean, brevity penalty against the
/// closest reference length. Orders longer than the hypothesis are skipped;
/// zero matches count as `epsilon`.
pub fn bleu<S: AsRef<str>>(hypothesis: &[S], references: &[&[S]], max_n: usize, epsilon: f64) -> f64 {
    let c = hypothesis.len();
    if c == 0 || references.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut orders = 0;
    for n in 1..=max_n.min(c) {
        let hyp = ngram_counts(hypothesis, n);
        let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
        for r in references {
            for (gram, count) in ngram_counts(r, n) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(count);
            }
        }
        let total: usize = hyp.values().sum();
        let clipped: usize = hyp
            .iter()
            .map(|(g, &k)| k.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        let matched = if clipped == 0 { epsilon } else { clipped as f64 };
        log_sum += (matched / total as f64).ln();
        orders += 1;
    }
    let r = references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("references is non-empty");
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * (log_sum / orders as f64).exp()
}

/// Mean BLEU of each progression against all the others. Per-item scores
/// are summed in sorted order so the result does not depend on set order.
pub fn self_bleu<S: AsRef<str>>(set: &[Vec<S>], max_n: usize, epsilon: f64) -> Result<f64, EvalError> {
    if set.len() < 2 {
        return Err(EvalError::InsufficientData(format!(
            "self-BLEU needs at least 2 progressions, got {}",
            set.len()
        )));
    }
    if max_n == 0 {
        return Err(EvalError::UnsupportedOrder(0));
    }
    let mut scores: Vec<f64> = (0..set.len())
        .map(|i| {
            let refs: Vec<&[S]> = set
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, s)| s.as_slice())
                .collect();
            bleu(&set[i], &refs, max_n, epsilon)
        })
        .collect();
    scores.sort_by(f64::total_cmp);
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
