use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::Workspace;
use super::{decoder_input, AdherenceState, Ahm, Gradient, Mlp};
use crate::rng::{self, streams};
use crate::{Error, Result};

/// One supervised example `(ŝ_t, u_ai_t) → u_h_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub state: AdherenceState,
    pub u_ai: usize,
    pub u_h: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 30,
            batch_size: 64,
            seed: 42,
        }
    }
}

/// Provenance stored alongside a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub n_samples: usize,
    pub first_epoch_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean negative log-likelihood over each epoch.
    pub loss_curve: Vec<f64>,
    pub meta: TrainingMeta,
}

/// Fits the action decoder by mini-batch gradient descent on the negative
/// log-likelihood of the observed human actions.
///
/// Each step moves the parameters by `learning_rate` times the gradient of the
/// loss summed over the batch. Batches are drawn from a per-epoch shuffle
/// seeded from `config.seed`, so training is fully reproducible.
pub fn train_decoder(
    samples: &[Sample],
    n_obs: usize,
    n_actions: usize,
    config: &TrainConfig,
) -> Result<(Ahm, TrainReport)> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::Domain("batch size and epochs must be positive".into()));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::Domain(format!("learning rate {}", config.learning_rate)));
    }
    let n_states = AdherenceState::count(n_obs);
    for s in samples {
        if s.state.y >= n_obs || s.u_ai >= n_actions || s.u_h >= n_actions {
            return Err(Error::DimensionMismatch(format!("sample {s:?} outside model dimensions")));
        }
    }

    // only |Ŝ|·|U| distinct inputs exist
    let inputs: Vec<Vec<f64>> = (0..n_states)
        .flat_map(|i| (0..n_actions).map(move |u| (i, u)))
        .map(|(i, u)| decoder_input(&AdherenceState::from_index(i), u, n_obs, n_actions))
        .collect();
    let keyed: Vec<(usize, usize)> = samples
        .iter()
        .map(|s| (s.state.index() * n_actions + s.u_ai, s.u_h))
        .collect();

    let init_seed = rng::derive_seed(config.seed, streams::INIT, 0);
    let mut net = Mlp::decoder(n_obs + 2 + n_actions, n_actions, init_seed);
    let mut ws = Workspace::new(&net);
    let mut grad = Gradient::zeros(&net);
    let mut order: Vec<usize> = (0..keyed.len()).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut r = rng::child_stream(config.seed, streams::TRAINING, epoch as u64);
        order.shuffle(&mut r);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.clear();
            for &i in batch {
                let (input, target) = keyed[i];
                epoch_loss += net.accumulate_gradient(&inputs[input], target, &mut ws, &mut grad);
            }
            net.apply(&grad, config.learning_rate);
        }
        let mean = epoch_loss / keyed.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        loss_curve.push(mean);
    }
    net.check()?;

    let meta = TrainingMeta {
        seed: config.seed,
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        n_samples: samples.len(),
        first_epoch_loss: loss_curve[0],
        final_loss: *loss_curve.last().expect("at least one epoch"),
    };
    let mut ahm = Ahm::with_mlp(n_obs, n_actions, net)?;
    ahm.training = Some(meta.clone());
    Ok((ahm, TrainReport { loss_curve, meta }))
}
