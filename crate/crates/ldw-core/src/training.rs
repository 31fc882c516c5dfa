//! Gradient-descent learning of the filter taps at desk scale.
//!
//! The task loss is the mean squared error of the decompose/reconstruct
//! roundtrip over an image batch, which directly exercises reversibility.
//! The total objective adds the weighted constraint losses; both gradient
//! paths are analytic (the filter JVPs of the transform plus the closed-form
//! constraint gradients) and the parameters step with Adam.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::filters::{
    constraint_residuals, grad_loss_wavelet, loss_wavelet, ConstraintResiduals, LossWeights,
    WaveletFilterPair,
};
use crate::tensor::FeatureMap;
use crate::transform::{
    decompose, decompose_filter_jvp, reconstruct, reconstruct_filter_jvp, PaddingMode,
};

/// Optimizer and objective settings. Defaults follow the usual recipe:
/// Adam(0.9, 0.999, 1e-8), learning rate 1e-4, decoupled weight decay 1e-4,
/// 400 epochs, unit loss weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub wavelet_weights: LossWeights,
    pub task_weight: f64,
    pub seed: u64,
    /// Initialize from a constrained random pair instead of raw uniform draws.
    pub pretrain: bool,
    /// Multiply the learning rate by 0.1 every 100 epochs.
    pub lr_step_decay: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 400,
            weight_decay: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            wavelet_weights: LossWeights::default(),
            task_weight: 1.0,
            seed: 0,
            pretrain: true,
            lr_step_decay: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, beta) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidParameter(format!(
                    "adam {name} must be in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.adam_epsilon > 0.0 && self.adam_epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "adam epsilon must be positive, got {}",
                self.adam_epsilon
            )));
        }
        for (name, v) in [
            ("weight_decay", self.weight_decay),
            ("task_weight", self.task_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        self.wavelet_weights.validate()
    }

    fn learning_rate_at(&self, epoch: usize) -> f64 {
        if self.lr_step_decay {
            self.learning_rate * 0.1f64.powi((epoch / 100) as i32)
        } else {
            self.learning_rate
        }
    }
}

/// Adam moment estimates plus the step counter for bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update with bias correction. Weight decay is decoupled: it adds
/// `lr * wd * param` to the update without touching the moment estimates.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::LengthMismatch {
            expected: params.len(),
            actual: grads.len(),
        });
    }
    if state.m.len() != params.len() {
        return Err(Error::LengthMismatch {
            expected: params.len(),
            actual: state.m.len(),
        });
    }
    config.validate()?;
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let m_corr = 1.0 - b1.powi(t);
    let v_corr = 1.0 - b2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / m_corr;
        let v_hat = state.v[i] / v_corr;
        params[i] -= config.learning_rate
            * (m_hat / (v_hat.sqrt() + config.adam_epsilon) + config.weight_decay * params[i]);
    }
    Ok(())
}

/// Binary cross-entropy `-sum[y*log(p) + (1-y)*log(1-p)]` with probabilities
/// clamped to `[1e-12, 1 - 1e-12]`.
pub fn cross_entropy(labels: &[f64], probabilities: &[f64]) -> Result<f64> {
    if labels.len() != probabilities.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: probabilities.len(),
        });
    }
    const CLAMP: f64 = 1e-12;
    let mut total = 0.0;
    for (y, p) in labels.iter().zip(probabilities) {
        let p = p.clamp(CLAMP, 1.0 - CLAMP);
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    Ok(total)
}

/// `task_weight * task_loss + loss_wavelet(pair, wavelet_weights)`.
pub fn total_loss(task_loss: f64, pair: &WaveletFilterPair, config: &TrainConfig) -> Result<f64> {
    Ok(config.task_weight * task_loss + loss_wavelet(pair, &config.wavelet_weights)?)
}

/// Losses and residuals observed at one epoch boundary. Record 0 describes
/// the initialization; record `e` the parameters after `e` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task_loss: f64,
    pub wavelet_loss: f64,
    pub total_loss: f64,
    pub residuals: ConstraintResiduals,
}

/// Per-epoch history plus the final filter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub pair: WaveletFilterPair,
}

impl TrainReport {
    pub fn final_record(&self) -> &EpochRecord {
        self.history.last().expect("history is never empty")
    }

    /// Tab-separated log: epoch, task, wavelet, total, then the four
    /// constraint residuals. One line per record.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for r in &self.history {
            let [a, b, c, d] = r.residuals.as_array();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.epoch, r.task_loss, r.wavelet_loss, r.total_loss, a, b, c, d
            ));
        }
        out
    }
}

fn check_images(images: &[FeatureMap]) -> Result<()> {
    if images.is_empty() {
        return Err(Error::InvalidParameter(
            "training needs at least one image".into(),
        ));
    }
    for image in images {
        if image.height() % 2 != 0 || image.width() % 2 != 0 {
            return Err(Error::OddDimensions {
                height: image.height(),
                width: image.width(),
            });
        }
    }
    Ok(())
}

/// Mean over the batch of the per-pixel squared roundtrip error, plus the
/// tap gradient of that mean. The subband cotangent of the reconstruction
/// error is `decompose(residual)` because reconstruction is the exact
/// adjoint of decomposition.
fn task_loss_and_grad(
    images: &[FeatureMap],
    pair: &WaveletFilterPair,
    padding: PaddingMode,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let k = pair.taps();
    let mut loss = 0.0;
    let mut g_low = vec![0.0; k];
    let mut g_high = vec![0.0; k];
    let batch = images.len() as f64;
    for image in images {
        let subbands = decompose(image, pair, padding)?;
        let rec = reconstruct(&subbands, pair, padding);
        let n = image.data().len() as f64;
        let residual: Vec<f64> = rec
            .data()
            .iter()
            .zip(image.data())
            .map(|(r, x)| r - x)
            .collect();
        loss += residual.iter().map(|e| e * e).sum::<f64>() / (n * batch);
        let scale = 2.0 / (n * batch);
        let cotangent = FeatureMap::new(
            image.channels(),
            image.height(),
            image.width(),
            residual.iter().map(|e| scale * e).collect(),
        )?;
        let cot_subbands = decompose(&cotangent, pair, padding)?;
        let (dl, dh) = decompose_filter_jvp(image, pair, &cot_subbands, padding)?;
        let (rl, rh) = reconstruct_filter_jvp(&subbands, pair, &cotangent, padding)?;
        for i in 0..k {
            g_low[i] += dl[i] + rl[i];
            g_high[i] += dh[i] + rh[i];
        }
    }
    Ok((loss, g_low, g_high))
}

/// Mean per-pixel squared roundtrip error of a batch (no gradient).
pub fn reconstruction_mse(
    images: &[FeatureMap],
    pair: &WaveletFilterPair,
    padding: PaddingMode,
) -> Result<f64> {
    check_images(images)?;
    let mut loss = 0.0;
    for image in images {
        let rec = reconstruct(&decompose(image, pair, padding)?, pair, padding);
        let n = image.data().len() as f64;
        loss += rec
            .data()
            .iter()
            .zip(image.data())
            .map(|(r, x)| (r - x) * (r - x))
            .sum::<f64>()
            / (n * images.len() as f64);
    }
    Ok(loss)
}

/// Learn a `taps`-tap pair on an image batch. Initialization follows
/// `config.pretrain`: a constrained random pair, or raw uniform draws for
/// the ablation. Deterministic in the seed.
pub fn train_filters(
    images: &[FeatureMap],
    taps: usize,
    config: &TrainConfig,
) -> Result<TrainReport> {
    let init = if config.pretrain {
        WaveletFilterPair::random_constrained(taps, config.seed)?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut draw = |count: usize| -> Vec<f64> {
            (0..count).map(|_| rng.random_range(-1.0..=1.0)).collect()
        };
        WaveletFilterPair::new(draw(taps), draw(taps))?
    };
    train_filters_from(images, init, config)
}

/// [`train_filters`] with an explicit initial pair.
pub fn train_filters_from(
    images: &[FeatureMap],
    init: WaveletFilterPair,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    check_images(images)?;
    let padding = PaddingMode::Circular;
    let k = init.taps();
    let mut pair = init;
    let mut state = AdamState::new(2 * k);
    let mut history = Vec::with_capacity(config.epochs + 1);

    for epoch in 0..config.epochs {
        let (task, task_low, task_high) = task_loss_and_grad(images, &pair, padding)?;
        let wavelet = loss_wavelet(&pair, &config.wavelet_weights)?;
        history.push(EpochRecord {
            epoch,
            task_loss: task,
            wavelet_loss: wavelet,
            total_loss: config.task_weight * task + wavelet,
            residuals: constraint_residuals(&pair),
        });

        let (wav_low, wav_high) = grad_loss_wavelet(&pair, &config.wavelet_weights)?;
        let mut params: Vec<f64> = pair.low().iter().chain(pair.high()).copied().collect();
        let grads: Vec<f64> = task_low
            .iter()
            .zip(&wav_low)
            .chain(task_high.iter().zip(&wav_high))
            .map(|(t, w)| config.task_weight * t + w)
            .collect();
        let epoch_config = TrainConfig {
            learning_rate: config.learning_rate_at(epoch),
            ..*config
        };
        adam_step(&mut params, &grads, &mut state, &epoch_config)?;
        pair = WaveletFilterPair::new(params[..k].to_vec(), params[k..].to_vec())?;
    }

    // closing record for the final parameters
    let task = reconstruction_mse(images, &pair, padding)?;
    let wavelet = loss_wavelet(&pair, &config.wavelet_weights)?;
    history.push(EpochRecord {
        epoch: config.epochs,
        task_loss: task,
        wavelet_loss: wavelet,
        total_loss: config.task_weight * task + wavelet,
        residuals: constraint_residuals(&pair),
    });

    Ok(TrainReport { history, pair })
}
