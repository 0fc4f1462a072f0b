//! Autoregressive chord priors: the human-corpus prior and the LLM proposal
//! model share this interface.
//!
//! A [`PriorModel`] wraps either a stacked LSTM (trained with [`train`]) or an
//! explicit [`LookupModel`] table. Scoring applies a softmax temperature to
//! every step; sampling draws ancestrally from BOS.

pub(crate) mod artifact;
mod lookup;
mod lstm;
mod train;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chordlang::{parse_chord, Key, Mode, Progression};
use crate::corpus::{TokenVocab, BOS, EOS, PAD, UNK};

pub use artifact::{load, save, FORMAT_VERSION};
pub use lookup::{LookupError, LookupModel};
pub use lstm::{LstmNet, LstmState};
pub use train::{evaluate_nll, train, TrainReport};

/// Attempts before [`PriorModel::sample_ids`] gives up on reaching the
/// requested length.
pub const MAX_SAMPLE_ATTEMPTS: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("token id {id} is outside the model vocabulary of {vocab_size}")]
    VocabMismatch { id: u32, vocab_size: usize },
    #[error("vocabulary version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}: negative log-likelihood is {nll}")]
    Divergence { epoch: usize, nll: f64 },
    #[error("no {bars}-chord sample after {attempts} attempts")]
    SamplingExhausted { bars: usize, attempts: usize },
    #[error("model artifact checksum mismatch")]
    Checksum,
    #[error("malformed model artifact: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelRole {
    /// Trained on human-written progressions.
    #[serde(rename = "P")]
    Prior,
    /// Trained on language-model generations.
    #[serde(rename = "Q")]
    Proposal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_validation_ratio")]
    pub validation_ratio: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    #[serde(default = "default_clip_norm")]
    pub clip_norm: f64,
}

fn default_patience() -> usize {
    5
}

fn default_validation_ratio() -> f64 {
    0.1
}

fn default_clip_norm() -> f64 {
    5.0
}

impl ModelConfig {
    /// Reference configuration for the human-corpus prior: two layers of 512.
    pub fn prior_reference() -> Self {
        Self {
            layers: 2,
            embed_dim: 512,
            hidden_dim: 512,
            dropout: 0.2,
            learning_rate: 1e-5,
            max_epochs: 200,
            batch_size: 64,
            seed: 0,
            patience: default_patience(),
            validation_ratio: default_validation_ratio(),
            clip_norm: default_clip_norm(),
        }
    }

    /// Reference configuration for the proposal model: two layers of 256.
    pub fn proposal_reference() -> Self {
        Self {
            embed_dim: 256,
            hidden_dim: 256,
            ..Self::prior_reference()
        }
    }

    /// Small configuration that trains in seconds on a few thousand
    /// progressions.
    pub fn desk() -> Self {
        Self {
            layers: 2,
            embed_dim: 32,
            hidden_dim: 48,
            dropout: 0.1,
            learning_rate: 5e-3,
            max_epochs: 40,
            batch_size: 32,
            seed: 0,
            patience: 5,
            validation_ratio: 0.1,
            clip_norm: 5.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layers == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(ModelError::InvalidConfig("dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.batch_size == 0 {
            return Err(ModelError::InvalidConfig(
                "learning rate and batch size must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Network {
    Lstm(LstmNet),
    Lookup(LookupModel),
}

#[derive(Debug, Clone)]
pub enum DecodeState {
    Lstm(LstmState),
    Lookup(Vec<u32>),
}

impl Network {
    pub fn vocab_size(&self) -> usize {
        match self {
            Network::Lstm(n) => n.vocab_size(),
            Network::Lookup(t) => t.vocab_size(),
        }
    }

    pub fn init_state(&self) -> DecodeState {
        match self {
            Network::Lstm(n) => DecodeState::Lstm(n.init_state()),
            Network::Lookup(_) => DecodeState::Lookup(Vec::new()),
        }
    }

    /// Consumes `token` and returns logits over the next token.
    pub fn step(&self, state: &mut DecodeState, token: u32) -> Vec<f64> {
        match (self, state) {
            (Network::Lstm(n), DecodeState::Lstm(s)) => n.step(s, token),
            (Network::Lookup(t), DecodeState::Lookup(h)) => t.step(h, token),
            _ => panic!("decode state does not belong to this network"),
        }
    }
}

/// PAD and BOS are never predicted.
pub(crate) fn masked_logits(logits: &mut [f64]) {
    logits[PAD as usize] = f64::NEG_INFINITY;
    logits[BOS as usize] = f64::NEG_INFINITY;
}

/// `log softmax(logits / temperature)`; masked (`-inf`) entries stay `-inf`.
pub fn log_softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logits.iter().map(|l| (l - max) / temperature).collect();
    let log_z = scaled
        .iter()
        .filter(|s| s.is_finite())
        .map(|s| s.exp())
        .sum::<f64>()
        .ln();
    scaled.into_iter().map(|s| s - log_z).collect()
}

pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    log_softmax(logits, temperature)
        .into_iter()
        .map(f64::exp)
        .collect()
}

fn check_temperature(t: f64) -> Result<(), ModelError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidTemperature(t))
    }
}

/// A trained (or hand-set) chord-sequence distribution bound to one
/// vocabulary version.
#[derive(Debug, Clone)]
pub struct PriorModel {
    pub role: ModelRole,
    pub config: ModelConfig,
    vocab_version: String,
    network: Network,
}

impl PriorModel {
    /// Randomly initialized LSTM seeded from `config.seed`.
    pub fn untrained(
        role: ModelRole,
        config: ModelConfig,
        vocab: &TokenVocab,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let net = LstmNet::new(
            vocab.len(),
            config.embed_dim,
            config.hidden_dim,
            config.layers,
            &mut rng,
        );
        Ok(Self {
            role,
            config,
            vocab_version: vocab.version().to_string(),
            network: Network::Lstm(net),
        })
    }

    pub fn from_lookup(role: ModelRole, vocab: &TokenVocab, table: LookupModel) -> Result<Self, ModelError> {
        if table.vocab_size() != vocab.len() {
            return Err(ModelError::InvalidConfig(format!(
                "table covers {} ids but the vocabulary has {}",
                table.vocab_size(),
                vocab.len()
            )));
        }
        Ok(Self {
            role,
            config: ModelConfig {
                layers: 1,
                embed_dim: 1,
                hidden_dim: 1,
                dropout: 0.0,
                ..ModelConfig::desk()
            },
            vocab_version: vocab.version().to_string(),
            network: Network::Lookup(table),
        })
    }

    pub(crate) fn from_parts(
        role: ModelRole,
        config: ModelConfig,
        vocab_version: String,
        network: Network,
    ) -> Self {
        Self {
            role,
            config,
            vocab_version,
            network,
        }
    }

    pub fn vocab_version(&self) -> &str {
        &self.vocab_version
    }

    pub fn vocab_size(&self) -> usize {
        self.network.vocab_size()
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    /// Errors unless `vocab` is the vocabulary this model was built against.
    pub fn check_vocab(&self, vocab: &TokenVocab) -> Result<(), ModelError> {
        if vocab.version() != self.vocab_version {
            return Err(ModelError::VersionMismatch {
                expected: self.vocab_version.clone(),
                found: vocab.version().to_string(),
            });
        }
        Ok(())
    }

    fn check_ids(&self, ids: &[u32]) -> Result<(), ModelError> {
        let v = self.vocab_size();
        if let Some(&id) = ids.iter().find(|&&id| id as usize >= v) {
            return Err(ModelError::VocabMismatch { id, vocab_size: v });
        }
        Ok(())
    }

    /// Next-token probabilities after consuming `prefix` (which starts with BOS).
    pub fn next_distribution(&self, prefix: &[u32], temperature: f64) -> Result<Vec<f64>, ModelError> {
        check_temperature(temperature)?;
        self.check_ids(prefix)?;
        if prefix.first() != Some(&BOS) {
            return Err(ModelError::InvalidSequence("prefix must start with BOS".into()));
        }
        let mut state = self.network.init_state();
        let mut logits = Vec::new();
        for &id in prefix {
            logits = self.network.step(&mut state, id);
        }
        Ok(softmax(&logits, temperature))
    }

    /// Total log-probability of `[BOS, ..., EOS]` under temperature-scaled
    /// step distributions.
    pub fn log_prob(&self, ids: &[u32], temperature: f64) -> Result<f64, ModelError> {
        check_temperature(temperature)?;
        self.check_ids(ids)?;
        if ids.len() < 2 || ids[0] != BOS || ids[ids.len() - 1] != EOS {
            return Err(ModelError::InvalidSequence(
                "sequence must start with BOS and end with EOS".into(),
            ));
        }
        let mut state = self.network.init_state();
        let mut total = 0.0;
        for w in ids.windows(2) {
            let logits = self.network.step(&mut state, w[0]);
            total += log_softmax(&logits, temperature)[w[1] as usize];
        }
        Ok(total)
    }

    /// Ancestral sample of exactly `bars` chord ids, returned as
    /// `[BOS, chords..., EOS]`. Reserved tokens are never drawn as chords; a
    /// draw that ends before `bars` chords is discarded and retried, and the
    /// walk is truncated once `bars` chords are drawn.
    pub fn sample_ids<R: Rng>(
        &self,
        bars: usize,
        temperature: f64,
        rng: &mut R,
    ) -> Result<Vec<u32>, ModelError> {
        check_temperature(temperature)?;
        'attempt: for _ in 0..MAX_SAMPLE_ATTEMPTS {
            let mut state = self.network.init_state();
            let mut ids = vec![BOS];
            let mut logits = self.network.step(&mut state, BOS);
            while ids.len() <= bars {
                logits[UNK as usize] = f64::NEG_INFINITY;
                let probs = softmax(&logits, temperature);
                if probs.iter().any(|p| p.is_nan()) {
                    continue 'attempt;
                }
                let next = draw(&probs, rng);
                if next == EOS {
                    continue 'attempt;
                }
                ids.push(next);
                if ids.len() <= bars {
                    logits = self.network.step(&mut state, next);
                }
            }
            ids.push(EOS);
            return Ok(ids);
        }
        Err(ModelError::SamplingExhausted {
            bars,
            attempts: MAX_SAMPLE_ATTEMPTS,
        })
    }

    /// Samples a progression in C. The priors carry no mode information, so
    /// the caller names the mode to attach.
    pub fn sample<R: Rng>(
        &self,
        vocab: &TokenVocab,
        bars: usize,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Progression, ModelError> {
        self.check_vocab(vocab)?;
        let ids = self.sample_ids(bars, 1.0, rng)?;
        let chords = ids[1..ids.len() - 1]
            .iter()
            .map(|&id| {
                let sym = vocab.token(id).expect("sampled id is in vocabulary");
                parse_chord(sym).map_err(|e| ModelError::Format(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Progression::new(chords, Key::C, mode))
    }
}

/// Inverse-CDF draw from a probability vector.
fn draw<R: Rng>(probs: &[f64], rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i as u32;
            }
        }
    }
    last as u32
}

#[cfg(test)]
mod tests;
