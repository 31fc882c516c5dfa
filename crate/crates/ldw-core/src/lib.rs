//! Learnable discrete-wavelet pooling engine.
//!
//! A 2-D feature map is decomposed into four half-resolution subbands with a
//! separable pair of 1-D filters, reconstructed through the exact adjoint,
//! and the filter taps themselves can be learned by gradient descent under
//! wavelet constraints. Energy-based channel attention gates channels by
//! their squared activation mass.

pub mod attention;
pub mod filters;
pub mod tensor;
pub mod training;
pub mod transform;

mod error;

pub use attention::AttentionParams;
pub use error::{Error, Result};
pub use filters::{ConstraintResiduals, LossWeights, WaveletFilterPair};
pub use tensor::{FeatureMap, Psnr};
pub use training::{AdamState, EpochRecord, TrainConfig, TrainReport};
pub use transform::{FlopReport, PaddingMode, SubbandSet};
