use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureGrid;
use super::model::{backward_into, forward_loss};
use super::params::{init_decoder, DecoderParams, Dims};
use crate::corpus::Vocab;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global gradient-norm clip; `0` disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
    /// Longest caption (in words) used for training; longer ones are cut.
    pub max_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            epochs: 30,
            batch_size: 8,
            clip_norm: 5.0,
            seed: 42,
            max_len: 30,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm >= 0.0) {
            return Err(Error::Config(format!(
                "clip norm must be >= 0, got {}",
                self.clip_norm
            )));
        }
        if self.max_len == 0 {
            return Err(Error::Config(
                "max caption length must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: DecoderParams,
    /// Mean training loss of each epoch, measured before each batch update.
    pub loss_curve: Vec<f64>,
}

/// Cut `<start> w1 .. wn <end>` to at most `max_len` words, keeping `<end>`.
pub fn truncate_gold(gold: &[usize], max_len: usize) -> Vec<usize> {
    if gold.len() <= max_len + 2 {
        return gold.to_vec();
    }
    let mut out = gold[..=max_len].to_vec();
    out.push(*gold.last().expect("non-empty"));
    out
}

/// Encode caption tokens for training.
pub fn encode_caption(vocab: &Vocab, tokens: &[String], max_len: usize) -> Vec<usize> {
    truncate_gold(&vocab.encode(tokens), max_len)
}

/// Initialize from `config.seed` and train.
pub fn train(
    dataset: &[(FeatureGrid, Vec<usize>)],
    dims: Dims,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let params = init_decoder(dims, config.seed)?;
    train_from(params, dataset, config)
}

/// Plain minibatch SGD with global-norm clipping over a seeded batch order.
pub fn train_from(
    mut params: DecoderParams,
    dataset: &[(FeatureGrid, Vec<usize>)],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    let gold: Vec<Vec<usize>> = dataset
        .iter()
        .map(|(_, g)| truncate_gold(g, config.max_len))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x05ee_d0fb_a7c4);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut grads = DecoderParams::zeros(params.dims);
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.scale(0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (loss, tape) = match forward_loss(&dataset[i].0, &gold[i], &params) {
                    Ok(r) => r,
                    Err(Error::NonFinite(_)) => {
                        return Err(Error::Diverged {
                            epoch,
                            loss: f64::NAN,
                        })
                    }
                    Err(e) => return Err(e),
                };
                epoch_loss += loss;
                backward_into(&tape, &params, scale, &mut grads);
            }
            let norm = grads.norm();
            if !norm.is_finite() {
                return Err(Error::Diverged { epoch, loss: norm });
            }
            let step = if config.clip_norm > 0.0 && norm > config.clip_norm {
                config.learning_rate * config.clip_norm / norm
            } else {
                config.learning_rate
            };
            params.add_scaled(-step, &grads);
        }
        let mean = epoch_loss / dataset.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        if !mean.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        curve.push(mean);
    }
    Ok(TrainOutcome {
        params,
        loss_curve: curve,
    })
}
