//! Learnable wavelet filter pair, its constraint losses and their analytic
//! gradients.
//!
//! A pair holds one low-pass and one high-pass 1-D filter of `K` taps. The
//! four losses penalize deviation from the wavelet constraints: the low-pass
//! taps should sum to sqrt(2) with unit energy, the high-pass taps should sum
//! to zero with unit energy, the combined energy should stay at 2, and both
//! filters should be mirror-symmetric. Each loss is zero exactly on its own
//! constraint manifold and non-negative everywhere.

use std::f64::consts::SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One low-pass and one high-pass 1-D filter, `K >= 2` taps each.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilterPair {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl WaveletFilterPair {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.len() != high.len() {
            return Err(Error::LengthMismatch {
                expected: low.len(),
                actual: high.len(),
            });
        }
        if low.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "filters need at least 2 taps, got {}",
                low.len()
            )));
        }
        if let Some(index) = low.iter().chain(&high).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { low, high })
    }

    /// The orthonormal Haar pair `{1/sqrt2, 1/sqrt2}` / `{1/sqrt2, -1/sqrt2}`.
    pub fn haar() -> Self {
        let s = 1.0 / SQRT_2;
        Self {
            low: vec![s, s],
            high: vec![s, -s],
        }
    }

    /// Random pair that satisfies the sum and energy constraints up to
    /// rounding: sum(low) = sqrt2, energy(low) = 1, sum(high) = 0,
    /// energy(high) = 1. Deterministic in the seed. Symmetry is not enforced.
    ///
    /// The low-pass constraint set is the sphere of radius sqrt(1 - 2/K)
    /// around the centroid (sqrt2/K, ..., sqrt2/K) inside the sum hyperplane,
    /// so a draw is projected in closed form: remove the mean, rescale the
    /// deviation, add the centroid back. For K = 2 the set is the single
    /// point (1/sqrt2, 1/sqrt2).
    pub fn random_constrained(taps: usize, seed: u64) -> Result<Self> {
        if taps < 2 {
            return Err(Error::InvalidParameter(format!(
                "filters need at least 2 taps, got {taps}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radius = (1.0 - 2.0 / taps as f64).sqrt();
        let centroid = SQRT_2 / taps as f64;
        let low: Vec<f64> = unit_zero_mean(taps, &mut rng)
            .into_iter()
            .map(|v| centroid + radius * v)
            .collect();
        let high = unit_zero_mean(taps, &mut rng);
        Self::new(low, high)
    }

    pub fn taps(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    /// Text form: line 1 the tap count, line 2 the low taps, line 3 the high
    /// taps, space-separated decimal reals.
    pub fn to_text(&self) -> String {
        let join = |taps: &[f64]| {
            taps.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!("{}\n{}\n{}\n", self.taps(), join(&self.low), join(&self.high))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let k: usize = lines
            .next()
            .ok_or_else(|| Error::FilterParse("empty file".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::FilterParse(format!("bad tap count: {e}")))?;
        let mut parse_taps = |name: &str| -> Result<Vec<f64>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::FilterParse(format!("missing {name} taps line")))?;
            let taps = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::FilterParse(format!("bad {name} tap {t:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if taps.len() != k {
                return Err(Error::FilterParse(format!(
                    "expected {k} {name} taps, got {}",
                    taps.len()
                )));
            }
            Ok(taps)
        };
        let low = parse_taps("low")?;
        let high = parse_taps("high")?;
        if lines.next().is_some() {
            return Err(Error::FilterParse("trailing content after high taps".into()));
        }
        Self::new(low, high)
    }
}

/// Zero-mean unit-norm vector of uniform draws; redraws on a degenerate
/// all-equal sample.
fn unit_zero_mean(taps: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let draw: Vec<f64> = (0..taps).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let mean = draw.iter().sum::<f64>() / taps as f64;
        let centered: Vec<f64> = draw.iter().map(|v| v - mean).collect();
        let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return centered.into_iter().map(|v| v / norm).collect();
        }
    }
}

fn sum(taps: &[f64]) -> f64 {
    taps.iter().sum()
}

fn energy(taps: &[f64]) -> f64 {
    taps.iter().map(|v| v * v).sum()
}

/// `(energy(low) - 1)^2 + (sum(low) - sqrt2)^2`
pub fn loss_low(pair: &WaveletFilterPair) -> f64 {
    let e = energy(pair.low()) - 1.0;
    let s = sum(pair.low()) - SQRT_2;
    e * e + s * s
}

/// `(energy(high) - 1)^2 + sum(high)^2`
pub fn loss_high(pair: &WaveletFilterPair) -> f64 {
    let e = energy(pair.high()) - 1.0;
    let s = sum(pair.high());
    e * e + s * s
}

/// `(energy(low) + energy(high) - 2)^2`
pub fn loss_reverse(pair: &WaveletFilterPair) -> f64 {
    let d = energy(pair.low()) + energy(pair.high()) - 2.0;
    d * d
}

/// Palindrome penalty: squared differences of mirror tap pairs `i <-> K-1-i`
/// over both filters.
pub fn loss_sym(pair: &WaveletFilterPair) -> f64 {
    let mirror = |taps: &[f64]| {
        let k = taps.len();
        (0..k / 2)
            .map(|i| {
                let d = taps[i] - taps[k - 1 - i];
                d * d
            })
            .sum::<f64>()
    };
    mirror(pair.low()) + mirror(pair.high())
}

/// Non-negative weights for the four constraint terms; all 1 by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub low: f64,
    pub high: f64,
    pub reverse: f64,
    pub sym: f64,
}

impl LossWeights {
    pub fn new(low: f64, high: f64, reverse: f64, sym: f64) -> Result<Self> {
        let w = Self {
            low,
            high,
            reverse,
            sym,
        };
        w.validate()?;
        Ok(w)
    }

    /// Weights with the symmetry term disabled.
    pub fn without_sym() -> Self {
        Self {
            sym: 0.0,
            ..Self::default()
        }
    }

    /// All-zero weights (constraint losses disabled).
    pub fn off() -> Self {
        Self {
            low: 0.0,
            high: 0.0,
            reverse: 0.0,
            sym: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("low", self.low),
            ("high", self.high),
            ("reverse", self.reverse),
            ("sym", self.sym),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "loss weight {name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            low: 1.0,
            high: 1.0,
            reverse: 1.0,
            sym: 1.0,
        }
    }
}

/// Weighted sum of the four constraint losses.
pub fn loss_wavelet(pair: &WaveletFilterPair, weights: &LossWeights) -> Result<f64> {
    weights.validate()?;
    Ok(weights.low * loss_low(pair)
        + weights.high * loss_high(pair)
        + weights.reverse * loss_reverse(pair)
        + weights.sym * loss_sym(pair))
}

/// Analytic gradient of [`loss_wavelet`] with respect to the low and high
/// taps.
pub fn grad_loss_wavelet(
    pair: &WaveletFilterPair,
    weights: &LossWeights,
) -> Result<(Vec<f64>, Vec<f64>)> {
    weights.validate()?;
    let k = pair.taps();
    let (low, high) = (pair.low(), pair.high());
    let (s_low, e_low) = (sum(low), energy(low));
    let (s_high, e_high) = (sum(high), energy(high));
    let reverse_common = 4.0 * (e_low + e_high - 2.0);

    let mut g_low = vec![0.0; k];
    let mut g_high = vec![0.0; k];
    for i in 0..k {
        g_low[i] += weights.low * (4.0 * (e_low - 1.0) * low[i] + 2.0 * (s_low - SQRT_2));
        g_low[i] += weights.reverse * reverse_common * low[i];
        g_high[i] += weights.high * (4.0 * (e_high - 1.0) * high[i] + 2.0 * s_high);
        g_high[i] += weights.reverse * reverse_common * high[i];
    }
    for i in 0..k / 2 {
        let j = k - 1 - i;
        let d_low = 2.0 * weights.sym * (low[i] - low[j]);
        g_low[i] += d_low;
        g_low[j] -= d_low;
        let d_high = 2.0 * weights.sym * (high[i] - high[j]);
        g_high[i] += d_high;
        g_high[j] -= d_high;
    }
    Ok((g_low, g_high))
}

/// Deviations from the four hard constraints, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintResiduals {
    /// `energy(low) - 1`
    pub low_energy: f64,
    /// `sum(low) - sqrt2`
    pub low_sum: f64,
    /// `sum(high)`
    pub high_sum: f64,
    /// `energy(high) - 1`
    pub high_energy: f64,
}

impl ConstraintResiduals {
    pub fn as_array(&self) -> [f64; 4] {
        [self.low_energy, self.low_sum, self.high_sum, self.high_energy]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn constraint_residuals(pair: &WaveletFilterPair) -> ConstraintResiduals {
    ConstraintResiduals {
        low_energy: energy(pair.low()) - 1.0,
        low_sum: sum(pair.low()) - SQRT_2,
        high_sum: sum(pair.high()),
        high_energy: energy(pair.high()) - 1.0,
    }
}
