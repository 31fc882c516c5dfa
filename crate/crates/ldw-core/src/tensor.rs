//! Feature-map container, baseline 2x2 pooling, per-channel normalization
//! and the PSNR quality metric.

use crate::error::{Error, Result};

/// Epsilon used by normalization when the caller does not pick one.
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// A dense `C x H x W` tensor of 64-bit reals, channel-major then row-major.
///
/// Construction rejects length mismatches and non-finite values, so a
/// `FeatureMap` always holds finite data. Values are immutable after
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "feature map dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::DataLength {
                channels,
                height,
                width,
                expected,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(channels, height, width, vec![0.0; channels * height * width])
    }

    /// Single-channel convenience constructor.
    pub fn from_2d(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(1, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Slice of one channel, `H*W` values row-major.
    pub fn channel(&self, c: usize) -> &[f64] {
        let hw = self.height * self.width;
        &self.data[c * hw..(c + 1) * hw]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    fn require_even(&self) -> Result<()> {
        if self.height % 2 != 0 || self.width % 2 != 0 {
            return Err(Error::OddDimensions {
                height: self.height,
                width: self.width,
            });
        }
        Ok(())
    }

    /// 2x2 stride-2 average pooling.
    pub fn avg_pool_2x2(&self) -> Result<FeatureMap> {
        self.pool_2x2(|block| block.iter().sum::<f64>() / 4.0)
    }

    /// 2x2 stride-2 max pooling.
    pub fn max_pool_2x2(&self) -> Result<FeatureMap> {
        self.pool_2x2(|block| block.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    fn pool_2x2(&self, reduce: impl Fn(&[f64; 4]) -> f64) -> Result<FeatureMap> {
        self.require_even()?;
        let (c, h, w) = self.shape();
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Vec::with_capacity(c * oh * ow);
        for ch in 0..c {
            let plane = self.channel(ch);
            for oy in 0..oh {
                for ox in 0..ow {
                    let (y, x) = (2 * oy, 2 * ox);
                    let block = [
                        plane[y * w + x],
                        plane[y * w + x + 1],
                        plane[(y + 1) * w + x],
                        plane[(y + 1) * w + x + 1],
                    ];
                    out.push(reduce(&block));
                }
            }
        }
        FeatureMap::new(c, oh, ow, out)
    }

    /// Standardize each channel over its spatial positions:
    /// `(x - mean) / sqrt(population_variance + epsilon)`.
    ///
    /// Constant channels come out all-zero. With `epsilon = 0` a zero-variance
    /// channel would divide by zero, so it is zeroed explicitly.
    pub fn channel_normalize(&self, epsilon: f64) -> FeatureMap {
        let (c, h, w) = self.shape();
        let n = (h * w) as f64;
        let mut out = Vec::with_capacity(self.data.len());
        for ch in 0..c {
            let plane = self.channel(ch);
            let mean = plane.iter().sum::<f64>() / n;
            let var = plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let denom = (var + epsilon).sqrt();
            if denom == 0.0 {
                out.extend(std::iter::repeat(0.0).take(h * w));
            } else {
                out.extend(plane.iter().map(|v| (v - mean) / denom));
            }
        }
        FeatureMap {
            channels: c,
            height: h,
            width: w,
            data: out,
        }
    }
}

/// Peak signal-to-noise ratio, with a distinguished value for a zero-MSE pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    /// The two maps are bit-identical (MSE is exactly zero).
    Identical,
    Decibels(f64),
}

impl Psnr {
    pub fn decibels(self) -> Option<f64> {
        match self {
            Psnr::Identical => None,
            Psnr::Decibels(db) => Some(db),
        }
    }

    /// dB value with identical maps mapped to +inf, for threshold checks.
    pub fn decibels_or_inf(self) -> f64 {
        match self {
            Psnr::Identical => f64::INFINITY,
            Psnr::Decibels(db) => db,
        }
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Identical => write!(f, "identical"),
            Psnr::Decibels(db) => write!(f, "{db:.4} dB"),
        }
    }
}

/// `10 * log10(peak^2 / MSE)` over all values of two same-shape maps.
pub fn psnr(reference: &FeatureMap, test: &FeatureMap, peak: f64) -> Result<Psnr> {
    if reference.shape() != test.shape() {
        return Err(Error::ShapeMismatch {
            expected: reference.shape(),
            actual: test.shape(),
        });
    }
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "psnr peak must be a positive real, got {peak}"
        )));
    }
    let n = reference.data().len() as f64;
    let mse = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        Ok(Psnr::Identical)
    } else {
        Ok(Psnr::Decibels(10.0 * (peak * peak / mse).log10()))
    }
}
