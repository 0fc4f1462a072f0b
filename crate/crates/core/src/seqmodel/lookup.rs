use std::collections::BTreeMap;

use super::masked_logits;
use crate::corpus::{BOS, PAD};

/// Explicit conditional probability table over the last `order` tokens.
///
/// Contexts are the most recent `min(order, history)` tokens, BOS included,
/// so an order-2 table can pin down any joint distribution over two-chord
/// progressions. Contexts without a row predict uniformly over live tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupModel {
    vocab_size: usize,
    order: usize,
    rows: BTreeMap<Vec<u32>, Vec<f64>>,
    fallback: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LookupError {
    #[error("row for context {context:?} has {got} entries, expected {expected}")]
    RowLength {
        context: Vec<u32>,
        got: usize,
        expected: usize,
    },
    #[error("row for context {context:?} sums to {sum}, expected 1")]
    NotNormalized { context: Vec<u32>, sum: f64 },
    #[error("row for context {0:?} puts mass on PAD or BOS")]
    ReservedMass(Vec<u32>),
    #[error("order must be at least 1")]
    ZeroOrder,
}

impl LookupModel {
    /// Builds a table from probability rows. Each row must have one entry per
    /// vocabulary id and sum to one.
    pub fn from_probabilities(
        vocab_size: usize,
        order: usize,
        rows: impl IntoIterator<Item = (Vec<u32>, Vec<f64>)>,
    ) -> Result<Self, LookupError> {
        if order == 0 {
            return Err(LookupError::ZeroOrder);
        }
        let mut table = BTreeMap::new();
        for (context, probs) in rows {
            if probs.len() != vocab_size {
                return Err(LookupError::RowLength {
                    context,
                    got: probs.len(),
                    expected: vocab_size,
                });
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(LookupError::NotNormalized { context, sum });
            }
            if probs[PAD as usize] > 0.0 || probs[BOS as usize] > 0.0 {
                return Err(LookupError::ReservedMass(context));
            }
            table.insert(context, probs.iter().map(|p| p.ln()).collect());
        }
        let mut fallback = vec![0.0; vocab_size];
        masked_logits(&mut fallback);
        Ok(Self {
            vocab_size,
            order,
            rows: table,
            fallback,
        })
    }

    pub(crate) fn from_parts(
        vocab_size: usize,
        order: usize,
        rows: BTreeMap<Vec<u32>, Vec<f64>>,
        fallback: Vec<f64>,
    ) -> Self {
        Self {
            vocab_size,
            order,
            rows,
            fallback,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub(crate) fn rows(&self) -> &BTreeMap<Vec<u32>, Vec<f64>> {
        &self.rows
    }

    pub(crate) fn fallback(&self) -> &[f64] {
        &self.fallback
    }

    /// Appends `token` to the history and returns next-token logits.
    pub fn step(&self, history: &mut Vec<u32>, token: u32) -> Vec<f64> {
        history.push(token);
        let start = history.len().saturating_sub(self.order);
        let mut logits = self
            .rows
            .get(&history[start..])
            .unwrap_or(&self.fallback)
            .clone();
        masked_logits(&mut logits);
        logits
    }
}
