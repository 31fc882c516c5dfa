//! Browser bindings for the interactive demo page.
//!
//! Filter taps cross the boundary packed as one flat array: the K low taps
//! followed by the K high taps. Images are single-channel row-major f64
//! buffers in `[0, 1]`.

use wasm_bindgen::prelude::*;

use ldw_core::attention::{apply_attention, channel_energy, se_gate, standardize_energies};
use ldw_core::filters::{
    constraint_residuals, loss_high, loss_low, loss_reverse, loss_sym, WaveletFilterPair,
};
use ldw_core::tensor::psnr;
use ldw_core::training::TrainConfig;
use ldw_core::transform::{decompose, reconstruct, PaddingMode};
use ldw_core::{AttentionParams, FeatureMap, LossWeights};

fn js_err(err: impl std::fmt::Display) -> JsError {
    JsError::new(&err.to_string())
}

fn unpack_taps(taps: &[f64]) -> Result<WaveletFilterPair, ldw_core::Error> {
    if taps.len() % 2 != 0 {
        return Err(ldw_core::Error::InvalidParameter(format!(
            "packed taps need an even length, got {}",
            taps.len()
        )));
    }
    let k = taps.len() / 2;
    WaveletFilterPair::new(taps[..k].to_vec(), taps[k..].to_vec())
}

fn pack_taps(pair: &WaveletFilterPair) -> Vec<f64> {
    pair.low().iter().chain(pair.high()).copied().collect()
}

fn image_map(gray: &[f64], width: usize, height: usize) -> Result<FeatureMap, ldw_core::Error> {
    FeatureMap::new(1, height, width, gray.to_vec())
}

fn padding_mode(reflect: bool) -> PaddingMode {
    if reflect {
        PaddingMode::Reflect
    } else {
        PaddingMode::Circular
    }
}

/// Synthetic grayscale test pattern: smooth gradient, a disc, a square and
/// a frequency sweep, values in `[0, 1]`.
pub fn test_pattern(width: usize, height: usize) -> Vec<f64> {
    let mut data = vec![0.0; width * height];
    let (fw, fh) = (width as f64, height as f64);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64 / fw, y as f64 / fh);
            let mut v = 0.35 * fx + 0.2 * fy;
            let (dx, dy) = (fx - 0.32, fy - 0.36);
            if (dx * dx + dy * dy).sqrt() < 0.18 {
                v += 0.38;
            }
            if (0.58..0.86).contains(&fx) && (0.55..0.83).contains(&fy) {
                v += 0.3;
            }
            v += 0.08 * (fx * fx * 48.0).sin() * (fy * 22.0).cos();
            data[y * width + x] = v.clamp(0.0, 1.0);
        }
    }
    data
}

#[wasm_bindgen(js_name = testImage)]
pub fn test_image(width: usize, height: usize) -> Vec<f64> {
    test_pattern(width, height)
}

#[wasm_bindgen(js_name = haarTaps)]
pub fn haar_taps() -> Vec<f64> {
    pack_taps(&WaveletFilterPair::haar())
}

#[wasm_bindgen(js_name = randomTaps)]
pub fn random_taps(taps: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    Ok(pack_taps(
        &WaveletFilterPair::random_constrained(taps, seed).map_err(js_err)?,
    ))
}

/// Constraint losses and residuals of a packed tap array.
#[wasm_bindgen]
pub struct FilterReport {
    losses: [f64; 4],
    residuals: [f64; 4],
}

#[wasm_bindgen]
impl FilterReport {
    #[wasm_bindgen(getter, js_name = lossLow)]
    pub fn loss_low(&self) -> f64 {
        self.losses[0]
    }

    #[wasm_bindgen(getter, js_name = lossHigh)]
    pub fn loss_high(&self) -> f64 {
        self.losses[1]
    }

    #[wasm_bindgen(getter, js_name = lossReverse)]
    pub fn loss_reverse(&self) -> f64 {
        self.losses[2]
    }

    #[wasm_bindgen(getter, js_name = lossSym)]
    pub fn loss_sym(&self) -> f64 {
        self.losses[3]
    }

    /// low energy, low sum, high sum, high energy deviations
    pub fn residuals(&self) -> Vec<f64> {
        self.residuals.to_vec()
    }
}

#[wasm_bindgen(js_name = filterReport)]
pub fn filter_report(taps: &[f64]) -> Result<FilterReport, JsError> {
    let pair = unpack_taps(taps).map_err(js_err)?;
    Ok(FilterReport {
        losses: [
            loss_low(&pair),
            loss_high(&pair),
            loss_reverse(&pair),
            loss_sym(&pair),
        ],
        residuals: constraint_residuals(&pair).as_array(),
    })
}

/// Subbands plus the adjoint reconstruction of one image.
#[wasm_bindgen]
pub struct DecomposeDemo {
    band_width: usize,
    band_height: usize,
    bands: [Vec<f64>; 4],
    reconstruction: Vec<f64>,
    psnr_db: f64,
}

#[wasm_bindgen]
impl DecomposeDemo {
    #[wasm_bindgen(getter, js_name = bandWidth)]
    pub fn band_width(&self) -> usize {
        self.band_width
    }

    #[wasm_bindgen(getter, js_name = bandHeight)]
    pub fn band_height(&self) -> usize {
        self.band_height
    }

    pub fn ll(&self) -> Vec<f64> {
        self.bands[0].clone()
    }

    pub fn lh(&self) -> Vec<f64> {
        self.bands[1].clone()
    }

    pub fn hl(&self) -> Vec<f64> {
        self.bands[2].clone()
    }

    pub fn hh(&self) -> Vec<f64> {
        self.bands[3].clone()
    }

    pub fn reconstruction(&self) -> Vec<f64> {
        self.reconstruction.clone()
    }

    /// Roundtrip PSNR in dB against the input; infinity when bit-exact.
    #[wasm_bindgen(getter, js_name = psnrDb)]
    pub fn psnr_db(&self) -> f64 {
        self.psnr_db
    }
}

fn run_decompose(
    gray: &[f64],
    width: usize,
    height: usize,
    pair: &WaveletFilterPair,
    padding: PaddingMode,
) -> Result<DecomposeDemo, ldw_core::Error> {
    let map = image_map(gray, width, height)?;
    let subbands = decompose(&map, pair, padding)?;
    let rec = reconstruct(&subbands, pair, padding);
    let db = psnr(&map, &rec, 1.0)?.decibels_or_inf();
    let [ll, lh, hl, hh] = subbands.bands().map(|b| b.data().to_vec());
    Ok(DecomposeDemo {
        band_width: width / 2,
        band_height: height / 2,
        bands: [ll, lh, hl, hh],
        reconstruction: rec.into_data(),
        psnr_db: db,
    })
}

#[wasm_bindgen(js_name = decomposeImage)]
pub fn decompose_image(
    gray: &[f64],
    width: usize,
    height: usize,
    taps: &[f64],
    reflect: bool,
) -> Result<DecomposeDemo, JsError> {
    let pair = unpack_taps(taps).map_err(js_err)?;
    run_decompose(gray, width, height, &pair, padding_mode(reflect)).map_err(js_err)
}

/// Loss curves and the learned taps of one training run.
#[wasm_bindgen]
pub struct TrainDemo {
    task_curve: Vec<f64>,
    wavelet_curve: Vec<f64>,
    total_curve: Vec<f64>,
    taps: Vec<f64>,
    residuals: [f64; 4],
    psnr_db: f64,
}

#[wasm_bindgen]
impl TrainDemo {
    #[wasm_bindgen(js_name = taskCurve)]
    pub fn task_curve(&self) -> Vec<f64> {
        self.task_curve.clone()
    }

    #[wasm_bindgen(js_name = waveletCurve)]
    pub fn wavelet_curve(&self) -> Vec<f64> {
        self.wavelet_curve.clone()
    }

    #[wasm_bindgen(js_name = totalCurve)]
    pub fn total_curve(&self) -> Vec<f64> {
        self.total_curve.clone()
    }

    /// Learned taps, packed low-then-high.
    pub fn taps(&self) -> Vec<f64> {
        self.taps.clone()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.residuals.to_vec()
    }

    /// Roundtrip PSNR of the learned pair on the training image.
    #[wasm_bindgen(getter, js_name = psnrDb)]
    pub fn psnr_db(&self) -> f64 {
        self.psnr_db
    }
}

#[allow(clippy::too_many_arguments)]
fn run_train(
    gray: &[f64],
    width: usize,
    height: usize,
    taps: usize,
    epochs: usize,
    learning_rate: f64,
    pretrain: bool,
    weights: LossWeights,
    seed: u64,
) -> Result<TrainDemo, ldw_core::Error> {
    let map = image_map(gray, width, height)?;
    let config = TrainConfig {
        epochs,
        learning_rate,
        wavelet_weights: weights,
        seed,
        pretrain,
        ..TrainConfig::default()
    };
    let report = ldw_core::training::train_filters(&[map.clone()], taps, &config)?;
    let rec = reconstruct(
        &decompose(&map, &report.pair, PaddingMode::Circular)?,
        &report.pair,
        PaddingMode::Circular,
    );
    let db = psnr(&map, &rec, 1.0)?.decibels_or_inf();
    Ok(TrainDemo {
        task_curve: report.history.iter().map(|r| r.task_loss).collect(),
        wavelet_curve: report.history.iter().map(|r| r.wavelet_loss).collect(),
        total_curve: report.history.iter().map(|r| r.total_loss).collect(),
        taps: pack_taps(&report.pair),
        residuals: report.final_record().residuals.as_array(),
        psnr_db: db,
    })
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = trainFilters)]
pub fn train_filters(
    gray: &[f64],
    width: usize,
    height: usize,
    taps: usize,
    epochs: usize,
    learning_rate: f64,
    pretrain: bool,
    w_low: f64,
    w_high: f64,
    w_reverse: f64,
    w_sym: f64,
    seed: u64,
) -> Result<TrainDemo, JsError> {
    let weights = LossWeights::new(w_low, w_high, w_reverse, w_sym).map_err(js_err)?;
    run_train(
        gray,
        width,
        height,
        taps,
        epochs,
        learning_rate,
        pretrain,
        weights,
        seed,
    )
    .map_err(js_err)
}

/// Energy gating of the four subbands treated as a 4-channel map.
#[wasm_bindgen]
pub struct AttentionDemo {
    energies: Vec<f64>,
    gates: Vec<f64>,
    gated_reconstruction: Vec<f64>,
}

#[wasm_bindgen]
impl AttentionDemo {
    /// LL, LH, HL, HH energies.
    pub fn energies(&self) -> Vec<f64> {
        self.energies.clone()
    }

    pub fn gates(&self) -> Vec<f64> {
        self.gates.clone()
    }

    /// Reconstruction from the gated subbands.
    #[wasm_bindgen(js_name = gatedReconstruction)]
    pub fn gated_reconstruction(&self) -> Vec<f64> {
        self.gated_reconstruction.clone()
    }
}

fn run_attention(
    gray: &[f64],
    width: usize,
    height: usize,
    pair: &WaveletFilterPair,
    seed: u64,
    normalize: bool,
) -> Result<AttentionDemo, ldw_core::Error> {
    let map = image_map(gray, width, height)?;
    let padding = PaddingMode::Circular;
    let subbands = decompose(&map, pair, padding)?;
    let (bh, bw) = (subbands.ll().height(), subbands.ll().width());
    let stacked_data: Vec<f64> = subbands
        .bands()
        .iter()
        .flat_map(|b| b.data().iter().copied())
        .collect();
    let stacked = FeatureMap::new(4, bh, bw, stacked_data)?;

    let params = AttentionParams::random(4, 2, seed)?;
    let energies = channel_energy(&stacked, normalize);
    let gates = se_gate(&standardize_energies(&energies), &params)?;
    let gated = apply_attention(&stacked, &gates)?;

    let band = |c: usize| FeatureMap::new(1, bh, bw, gated.channel(c).to_vec());
    let gated_bands = ldw_core::SubbandSet::new(band(0)?, band(1)?, band(2)?, band(3)?)?;
    let rec = reconstruct(&gated_bands, pair, padding);
    Ok(AttentionDemo {
        energies,
        gates,
        gated_reconstruction: rec.into_data(),
    })
}

#[wasm_bindgen(js_name = attentionDemo)]
pub fn attention_demo(
    gray: &[f64],
    width: usize,
    height: usize,
    taps: &[f64],
    seed: u64,
    normalize: bool,
) -> Result<AttentionDemo, JsError> {
    let pair = unpack_taps(taps).map_err(js_err)?;
    run_attention(gray, width, height, &pair, seed, normalize).map_err(js_err)
}
