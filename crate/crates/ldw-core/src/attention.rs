//! Energy-based channel attention: per-channel energies feed a two-layer
//! squeeze-and-excitation gate (reduce, relu, expand, sigmoid) in place of
//! global average pooling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, DEFAULT_EPSILON};

/// Weights of the two-layer gating network. `w1` is `(C/r) x C` row-major,
/// `w2` is `C x (C/r)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    channels: usize,
    reduction: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl AttentionParams {
    pub fn new(
        channels: usize,
        reduction: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        if channels == 0 || reduction == 0 || channels % reduction != 0 {
            return Err(Error::InvalidParameter(format!(
                "reduction {reduction} must be positive and divide channels {channels}"
            )));
        }
        let hidden = channels / reduction;
        for (name, len, expected) in [
            ("w1", w1.len(), hidden * channels),
            ("b1", b1.len(), hidden),
            ("w2", w2.len(), channels * hidden),
            ("b2", b2.len(), channels),
        ] {
            if len != expected {
                return Err(Error::InvalidParameter(format!(
                    "attention tensor {name} has {len} entries, expected {expected}"
                )));
            }
        }
        if let Some(index) = w1
            .iter()
            .chain(&b1)
            .chain(&w2)
            .chain(&b2)
            .position(|v| !v.is_finite())
        {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            channels,
            reduction,
            w1,
            b1,
            w2,
            b2,
        })
    }

    /// All-zero parameters; every gate comes out at sigmoid(0) = 0.5.
    pub fn zeros(channels: usize, reduction: usize) -> Result<Self> {
        let hidden = channels / reduction.max(1);
        Self::new(
            channels,
            reduction,
            vec![0.0; hidden * channels],
            vec![0.0; hidden],
            vec![0.0; channels * hidden],
            vec![0.0; channels],
        )
    }

    /// Seeded uniform init scaled by 1/sqrt(fan_in); deterministic in the seed.
    pub fn random(channels: usize, reduction: usize, seed: u64) -> Result<Self> {
        if channels == 0 || reduction == 0 || channels % reduction != 0 {
            return Err(Error::InvalidParameter(format!(
                "reduction {reduction} must be positive and divide channels {channels}"
            )));
        }
        let hidden = channels / reduction;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |count: usize, fan_in: usize| -> Vec<f64> {
            let scale = 1.0 / (fan_in as f64).sqrt();
            (0..count)
                .map(|_| rng.random_range(-1.0..=1.0) * scale)
                .collect()
        };
        let w1 = draw(hidden * channels, channels);
        let b1 = draw(hidden, channels);
        let w2 = draw(channels * hidden, hidden);
        let b2 = draw(channels, hidden);
        Self::new(channels, reduction, w1, b1, w2, b2)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn reduction(&self) -> usize {
        self.reduction
    }

    pub fn hidden(&self) -> usize {
        self.channels / self.reduction
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }
}

/// Per-channel energy: sum of squared values. With `normalize_first` the map
/// is channel-normalized before squaring, which removes brightness scale.
pub fn channel_energy(map: &FeatureMap, normalize_first: bool) -> Vec<f64> {
    let normalized;
    let source = if normalize_first {
        // zero epsilon (the constant-channel guard still applies) so that
        // rescaling the input by a power of two leaves the energies bit-equal
        normalized = map.channel_normalize(0.0);
        &normalized
    } else {
        map
    };
    (0..source.channels())
        .map(|c| source.channel(c).iter().map(|v| v * v).sum())
        .collect()
}

/// Standardize energies to zero mean and unit variance across channels. Raw
/// energies grow with H*W and would saturate the sigmoid, so gating runs on
/// the standardized values.
pub fn standardize_energies(energies: &[f64]) -> Vec<f64> {
    let n = energies.len() as f64;
    if energies.is_empty() {
        return Vec::new();
    }
    let mean = energies.iter().sum::<f64>() / n;
    let var = energies.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    let denom = (var + DEFAULT_EPSILON).sqrt();
    if denom == 0.0 {
        return vec![0.0; energies.len()];
    }
    energies.iter().map(|e| (e - mean) / denom).collect()
}

fn sigmoid(x: f64) -> f64 {
    // the plain formula rounds to exactly 0 or 1 for |x| beyond ~37; clamp
    // keeps gates strictly inside (0, 1) for all finite inputs
    let s = 1.0 / (1.0 + (-x).exp());
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `sigmoid(w2 * relu(w1 * e + b1) + b2)`, one gate per channel, each
/// strictly inside (0, 1).
pub fn se_gate(energies: &[f64], params: &AttentionParams) -> Result<Vec<f64>> {
    let c = params.channels();
    if energies.len() != c {
        return Err(Error::LengthMismatch {
            expected: c,
            actual: energies.len(),
        });
    }
    let hidden = params.hidden();
    let mut squeezed = vec![0.0; hidden];
    for (row, out) in squeezed.iter_mut().enumerate() {
        let dot: f64 = params.w1[row * c..(row + 1) * c]
            .iter()
            .zip(energies)
            .map(|(w, e)| w * e)
            .sum();
        *out = (dot + params.b1[row]).max(0.0);
    }
    let mut gates = vec![0.0; c];
    for (row, gate) in gates.iter_mut().enumerate() {
        let dot: f64 = params.w2[row * hidden..(row + 1) * hidden]
            .iter()
            .zip(&squeezed)
            .map(|(w, s)| w * s)
            .sum();
        *gate = sigmoid(dot + params.b2[row]);
    }
    Ok(gates)
}

/// Scale channel `c` of the map by `gates[c]`.
pub fn apply_attention(map: &FeatureMap, gates: &[f64]) -> Result<FeatureMap> {
    let (c, h, w) = map.shape();
    if gates.len() != c {
        return Err(Error::LengthMismatch {
            expected: c,
            actual: gates.len(),
        });
    }
    let mut data = Vec::with_capacity(c * h * w);
    for (ch, gate) in gates.iter().enumerate() {
        data.extend(map.channel(ch).iter().map(|v| v * gate));
    }
    FeatureMap::new(c, h, w, data)
}
