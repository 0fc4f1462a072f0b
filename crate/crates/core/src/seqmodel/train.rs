use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, ModelRole, Network, PriorModel};
use crate::corpus::{DatasetSplit, TokenVocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    /// Per-token negative log-likelihood of the kept parameters.
    pub train_nll: f64,
    pub validation_nll: f64,
    /// `(train, validation)` per-token NLL after each epoch.
    pub history: Vec<(f64, f64)>,
    pub wall_time_s: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Mean per-token negative log-likelihood at temperature 1.
pub fn evaluate_nll(model: &PriorModel, sequences: &[Vec<u32>]) -> Result<f64, ModelError> {
    let mut total = 0.0;
    let mut tokens = 0usize;
    for seq in sequences {
        total -= model.log_prob(seq, 1.0)?;
        tokens += seq.len() - 1;
    }
    Ok(if tokens == 0 { f64::NAN } else { total / tokens as f64 })
}

/// Fits a stacked LSTM to next-token cross-entropy with Adam, stopping early
/// once validation NLL has not improved for `config.patience` epochs. The
/// best-validation parameters are returned. Runs are reproducible from
/// `config.seed`.
pub fn train(
    dataset: &DatasetSplit,
    config: &ModelConfig,
    vocab: &TokenVocab,
    role: ModelRole,
) -> Result<(PriorModel, TrainReport), ModelError> {
    if dataset.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let started = Instant::now();
    let mut model = PriorModel::untrained(role, config.clone(), vocab)?;
    for seq in dataset.train.iter().chain(&dataset.validation) {
        model.check_ids(seq)?;
        if seq.len() < 2 {
            return Err(ModelError::InvalidSequence("sequence shorter than two tokens".into()));
        }
    }
    let heldout: &[Vec<u32>] = if dataset.validation.is_empty() {
        &dataset.train
    } else {
        &dataset.validation
    };

    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    let n_params = match model.network() {
        Network::Lstm(n) => n.params().len(),
        Network::Lookup(_) => unreachable!("untrained models are recurrent"),
    };
    let mut adam = Adam::new(n_params, config.learning_rate);
    let mut grad = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();

    let mut best: Option<(f64, f64, usize, Vec<f64>)> = None;
    let mut history = Vec::new();
    let mut stale = 0usize;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut order_rng);
        for batch in order.chunks(config.batch_size) {
            let Network::Lstm(net) = model.network_mut() else { unreachable!() };
            let tokens: usize = batch.iter().map(|&i| dataset.train[i].len() - 1).sum();
            let scale = 1.0 / tokens as f64;
            grad.fill(0.0);
            let mut loss = 0.0;
            for &i in batch {
                loss += net.sequence_loss(
                    &dataset.train[i],
                    Some((&mut grad, scale)),
                    config.dropout,
                    Some(&mut dropout_rng),
                );
            }
            if !loss.is_finite() {
                return Err(ModelError::Divergence {
                    epoch,
                    nll: loss * scale,
                });
            }
            if config.clip_norm > 0.0 {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > config.clip_norm {
                    let k = config.clip_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= k);
                }
            }
            adam.step(net.params_mut(), &grad);
        }

        let train_nll = evaluate_nll(&model, &dataset.train)?;
        let val_nll = evaluate_nll(&model, heldout)?;
        if !val_nll.is_finite() || !train_nll.is_finite() {
            return Err(ModelError::Divergence { epoch, nll: val_nll });
        }
        history.push((train_nll, val_nll));
        log::debug!("epoch {epoch}: train {train_nll:.4} validation {val_nll:.4}");

        let improved = best.as_ref().is_none_or(|b| val_nll < b.1);
        if improved {
            let Network::Lstm(net) = model.network() else { unreachable!() };
            best = Some((train_nll, val_nll, epoch, net.params().to_vec()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    let epochs_run = history.len();
    let (train_nll, validation_nll, best_epoch) = match best {
        Some((t, v, e, params)) => {
            let Network::Lstm(net) = model.network_mut() else { unreachable!() };
            net.params_mut().copy_from_slice(&params);
            (t, v, e)
        }
        None => {
            let t = evaluate_nll(&model, &dataset.train)?;
            let v = evaluate_nll(&model, heldout)?;
            (t, v, 0)
        }
    };
    Ok((
        model,
        TrainReport {
            epochs_run,
            best_epoch,
            train_nll,
            validation_nll,
            history,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    ))
}
