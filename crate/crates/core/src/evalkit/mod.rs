//! Diversity and coherence metrics and the experiments built on them.

mod experiments;
mod metrics;
mod report;

use std::io;
use std::path::Path;

pub use experiments::{
    rejection_condition, run_coherence_experiment, run_diversity_experiment, sample_prior,
    self_bleu_report, uniform_progressions, Condition, DiversityConfig, BATCH_CONDITION,
    MIN_CONDITION_SIZE, SINGLE_CONDITION,
};
pub use metrics::{bleu, jsd, self_bleu, NGramDistribution, BLEU_EPSILON, DEFAULT_MAX_N};
pub use report::{mean_std, ExperimentReport, ReportRow};

use crate::llmgate::LlmError;
use crate::sampler::SamplerError;
use crate::seqmodel::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("n-gram orders differ: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("unsupported n-gram order {0}")]
    UnsupportedOrder(usize),
    #[error("distribution has no n-grams")]
    EmptyDistribution,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl EvalError {
    fn io(path: &Path, source: io::Error) -> EvalError {
        EvalError::Io { path: path.display().to_string(), source }
    }
}
