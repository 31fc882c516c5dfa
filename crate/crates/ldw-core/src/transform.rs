//! Separable four-subband decomposition, its adjoint reconstruction, a dense
//! 2-D reference path, filter-tap gradients and MAC accounting.
//!
//! The forward pass runs a stride-2 correlation with the low and high taps
//! along rows, then along columns of both intermediates, producing the LL,
//! LH, HL, HH subbands (first letter names the horizontal filter). Taps are
//! anchored at `2x' + i` with `i = 0..K-1`; out-of-range indices fold back by
//! the padding mode. Reconstruction applies the exact adjoint - zero-insert
//! upsampling realized as a scatter through the same taps - which inverts
//! the transform exactly when the pair's polyphase operator is orthonormal
//! (Haar under circular padding).

use crate::error::{Error, Result};
use crate::filters::WaveletFilterPair;
use crate::tensor::FeatureMap;

/// Boundary rule for indices past the end of a row or column.
///
/// Circular is the default and the only mode under which orthonormal taps
/// invert exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaddingMode {
    #[default]
    Circular,
    Reflect,
}

impl PaddingMode {
    /// Fold an index into `[0, n)`. Reflect bounces off both edges with edge
    /// repeat (period `2n`).
    #[inline]
    fn fold(self, idx: usize, n: usize) -> usize {
        if idx < n {
            return idx;
        }
        match self {
            PaddingMode::Circular => idx % n,
            PaddingMode::Reflect => {
                let m = idx % (2 * n);
                if m < n {
                    m
                } else {
                    2 * n - 1 - m
                }
            }
        }
    }
}

impl std::str::FromStr for PaddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circular" => Ok(PaddingMode::Circular),
            "reflect" => Ok(PaddingMode::Reflect),
            other => Err(Error::InvalidParameter(format!(
                "unknown padding mode {other:?} (expected circular or reflect)"
            ))),
        }
    }
}

impl std::fmt::Display for PaddingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PaddingMode::Circular => write!(f, "circular"),
            PaddingMode::Reflect => write!(f, "reflect"),
        }
    }
}

/// The four half-resolution subbands of one decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandSet {
    ll: FeatureMap,
    lh: FeatureMap,
    hl: FeatureMap,
    hh: FeatureMap,
    source_height: usize,
    source_width: usize,
}

impl SubbandSet {
    pub fn new(ll: FeatureMap, lh: FeatureMap, hl: FeatureMap, hh: FeatureMap) -> Result<Self> {
        let shape = ll.shape();
        for band in [&lh, &hl, &hh] {
            if band.shape() != shape {
                return Err(Error::ShapeMismatch {
                    expected: shape,
                    actual: band.shape(),
                });
            }
        }
        Ok(Self {
            source_height: 2 * ll.height(),
            source_width: 2 * ll.width(),
            ll,
            lh,
            hl,
            hh,
        })
    }

    pub fn ll(&self) -> &FeatureMap {
        &self.ll
    }

    pub fn lh(&self) -> &FeatureMap {
        &self.lh
    }

    pub fn hl(&self) -> &FeatureMap {
        &self.hl
    }

    pub fn hh(&self) -> &FeatureMap {
        &self.hh
    }

    pub fn source_height(&self) -> usize {
        self.source_height
    }

    pub fn source_width(&self) -> usize {
        self.source_width
    }

    pub fn channels(&self) -> usize {
        self.ll.channels()
    }

    /// Bands in LL, LH, HL, HH order.
    pub fn bands(&self) -> [&FeatureMap; 4] {
        [&self.ll, &self.lh, &self.hl, &self.hh]
    }
}

/// MAC counts for one separable vs one dense decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlopReport {
    pub separable_macs: u64,
    pub dense_macs: u64,
    /// `dense / separable = K / 2`
    pub ratio: f64,
}

/// Multiply-add counts for a `C x H x W` map and `K`-tap filters:
/// `2*K*W*H*C` separable vs `K^2*W*H*C` dense.
pub fn flop_report(taps: usize, channels: usize, height: usize, width: usize) -> Result<FlopReport> {
    if height % 2 != 0 || width % 2 != 0 {
        return Err(Error::OddDimensions { height, width });
    }
    if taps == 0 || channels == 0 || height == 0 || width == 0 {
        return Err(Error::InvalidParameter(
            "flop_report arguments must be positive".into(),
        ));
    }
    let (k, c, h, w) = (taps as u64, channels as u64, height as u64, width as u64);
    Ok(FlopReport {
        separable_macs: 2 * k * w * h * c,
        dense_macs: k * k * w * h * c,
        ratio: taps as f64 / 2.0,
    })
}

/// Stride-2 correlation: `out[x'] = sum_i taps[i] * input[fold(2x'+i)]`.
fn analyze_1d(input: &[f64], taps: &[f64], padding: PaddingMode, out: &mut [f64], macs: &mut u64) {
    let n = input.len();
    for (xp, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, t) in taps.iter().enumerate() {
            acc += t * input[padding.fold(2 * xp + i, n)];
        }
        *o = acc;
    }
    *macs += (taps.len() * out.len()) as u64;
}

/// Adjoint of [`analyze_1d`]: scatter each coefficient through the taps,
/// accumulating into `out`.
fn synthesize_1d(coeffs: &[f64], taps: &[f64], padding: PaddingMode, out: &mut [f64], macs: &mut u64) {
    let n = out.len();
    for (xp, c) in coeffs.iter().enumerate() {
        for (i, t) in taps.iter().enumerate() {
            out[padding.fold(2 * xp + i, n)] += t * c;
        }
    }
    *macs += (taps.len() * coeffs.len()) as u64;
}

/// Tap gradient of `<cot, analyze_1d(input)>`:
/// `grad[i] += sum_x' cot[x'] * input[fold(2x'+i)]`.
fn tap_grad_1d(cot: &[f64], input: &[f64], padding: PaddingMode, grad: &mut [f64]) {
    let n = input.len();
    for (xp, c) in cot.iter().enumerate() {
        for (i, g) in grad.iter_mut().enumerate() {
            *g += c * input[padding.fold(2 * xp + i, n)];
        }
    }
}

fn gather_column(plane: &[f64], width: usize, x: usize, buf: &mut [f64]) {
    for (y, b) in buf.iter_mut().enumerate() {
        *b = plane[y * width + x];
    }
}

fn write_column(plane: &mut [f64], width: usize, x: usize, buf: &[f64]) {
    for (y, b) in buf.iter().enumerate() {
        plane[y * width + x] = *b;
    }
}

fn require_even(map: &FeatureMap) -> Result<()> {
    if map.height() % 2 != 0 || map.width() % 2 != 0 {
        return Err(Error::OddDimensions {
            height: map.height(),
            width: map.width(),
        });
    }
    Ok(())
}

/// Horizontal stride-2 analysis of every row with one set of taps.
/// Input `C x H x W`, output buffer `C x H x W/2`.
fn horizontal_analysis(
    map: &FeatureMap,
    taps: &[f64],
    padding: PaddingMode,
    out: &mut [f64],
    macs: &mut u64,
) {
    let (c, h, w) = map.shape();
    let half = w / 2;
    for ch in 0..c {
        let plane = map.channel(ch);
        for y in 0..h {
            analyze_1d(
                &plane[y * w..(y + 1) * w],
                taps,
                padding,
                &mut out[(ch * h + y) * half..(ch * h + y + 1) * half],
                macs,
            );
        }
    }
}

/// Separable four-subband decomposition (rows first, then columns).
pub fn decompose(
    map: &FeatureMap,
    pair: &WaveletFilterPair,
    padding: PaddingMode,
) -> Result<SubbandSet> {
    decompose_with_macs(map, pair, padding).map(|(s, _)| s)
}

/// [`decompose`] plus the number of multiply-adds actually executed.
pub fn decompose_with_macs(
    map: &FeatureMap,
    pair: &WaveletFilterPair,
    padding: PaddingMode,
) -> Result<(SubbandSet, u64)> {
    require_even(map)?;
    let (c, h, w) = map.shape();
    let (hh_dim, hw_dim) = (h / 2, w / 2);
    let mut macs = 0u64;

    let mut y_low = vec![0.0; c * h * hw_dim];
    let mut y_high = vec![0.0; c * h * hw_dim];
    horizontal_analysis(map, pair.low(), padding, &mut y_low, &mut macs);
    horizontal_analysis(map, pair.high(), padding, &mut y_high, &mut macs);

    let mut bands = [(); 4].map(|_| vec![0.0; c * hh_dim * hw_dim]);
    let mut col_in = vec![0.0; h];
    let mut col_out = vec![0.0; hh_dim];
    for ch in 0..c {
        let plane_l = &y_low[ch * h * hw_dim..(ch + 1) * h * hw_dim];
        let plane_h = &y_high[ch * h * hw_dim..(ch + 1) * h * hw_dim];
        for x in 0..hw_dim {
            // vertical pass over the horizontal low-pass
            gather_column(plane_l, hw_dim, x, &mut col_in);
            for (band, taps) in [(0, pair.low()), (1, pair.high())] {
                analyze_1d(&col_in, taps, padding, &mut col_out, &mut macs);
                let plane = &mut bands[band][ch * hh_dim * hw_dim..(ch + 1) * hh_dim * hw_dim];
                write_column(plane, hw_dim, x, &col_out);
            }
            // vertical pass over the horizontal high-pass
            gather_column(plane_h, hw_dim, x, &mut col_in);
            for (band, taps) in [(2, pair.low()), (3, pair.high())] {
                analyze_1d(&col_in, taps, padding, &mut col_out, &mut macs);
                let plane = &mut bands[band][ch * hh_dim * hw_dim..(ch + 1) * hh_dim * hw_dim];
                write_column(plane, hw_dim, x, &col_out);
            }
        }
    }

    let [ll, lh, hl, hh] = bands;
    let band = |data| FeatureMap::new(c, hh_dim, hw_dim, data);
    let set = SubbandSet::new(band(ll)?, band(lh)?, band(hl)?, band(hh)?)?;
    Ok((set, macs))
}

/// Vertical synthesis stage shared by reconstruction and the tap gradients:
/// `Z_L = Lv^T ll + Hv^T lh` and `Z_H = Lv^T hl + Hv^T hh`, each `C x H x W/2`.
fn vertical_synthesis(
    subbands: &SubbandSet,
    pair: &WaveletFilterPair,
    padding: PaddingMode,
    macs: &mut u64,
) -> (Vec<f64>, Vec<f64>) {
    let c = subbands.channels();
    let (hh_dim, hw_dim) = (subbands.ll().height(), subbands.ll().width());
    let h = subbands.source_height();
    let mut z_low = vec![0.0; c * h * hw_dim];
    let mut z_high = vec![0.0; c * h * hw_dim];
    let mut col_coef = vec![0.0; hh_dim];
    let mut col_out = vec![0.0; h];
    for ch in 0..c {
        for x in 0..hw_dim {
            for (dest, band_low, band_high) in [
                (&mut z_low, subbands.ll(), subbands.lh()),
                (&mut z_high, subbands.hl(), subbands.hh()),
            ] {
                col_out.fill(0.0);
                gather_column(band_low.channel(ch), hw_dim, x, &mut col_coef);
                synthesize_1d(&col_coef, pair.low(), padding, &mut col_out, macs);
                gather_column(band_high.channel(ch), hw_dim, x, &mut col_coef);
                synthesize_1d(&col_coef, pair.high(), padding, &mut col_out, macs);
                write_column(&mut dest[ch * h * hw_dim..(ch + 1) * h * hw_dim], hw_dim, x, &col_out);
            }
        }
    }
    (z_low, z_high)
}

/// Adjoint reconstruction: vertical stage inverted first, then horizontal,
/// all four branches summed. Exact inverse of [`decompose`] for orthonormal
/// pairs under circular padding; approximate otherwise.
pub fn reconstruct(
    subbands: &SubbandSet,
    pair: &WaveletFilterPair,
    padding: PaddingMode,
) -> FeatureMap {
    let mut macs = 0u64;
    let c = subbands.channels();
    let hw_dim = subbands.ll().width();
    let (h, w) = (subbands.source_height(), subbands.source_width());
    let (z_low, z_high) = vertical_synthesis(subbands, pair, padding, &mut macs);

    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            let row = &mut out[(ch * h + y) * w..(ch * h + y + 1) * w];
            let zl_row = &z_low[(ch * h + y) * hw_dim..(ch * h + y + 1) * hw_dim];
            let zh_row = &z_high[(ch * h + y) * hw_dim..(ch * h + y + 1) * hw_dim];
            synthesize_1d(zl_row, pair.low(), padding, row, &mut macs);
            synthesize_1d(zh_row, pair.high(), padding, row, &mut macs);
        }
    }
    FeatureMap::new(c, h, w, out).expect("reconstruction of finite subbands is finite")
}

/// Reference decomposition with stride-2 2-D correlations against the four
/// outer-product kernels. Same result as [`decompose`], `K^2*W*H` MACs per
/// channel instead of `2*K*W*H`.
pub fn decompose_dense2d(
    map: &FeatureMap,
    pair: &WaveletFilterPair,
    padding: PaddingMode,
) -> Result<SubbandSet> {
    decompose_dense2d_with_macs(map, pair, padding).map(|(s, _)| s)
}

/// [`decompose_dense2d`] plus the number of multiply-adds actually executed.
pub fn decompose_dense2d_with_macs(
    map: &FeatureMap,
    pair: &WaveletFilterPair,
    padding: PaddingMode,
) -> Result<(SubbandSet, u64)> {
    require_even(map)?;
    let (c, h, w) = map.shape();
    let (hh_dim, hw_dim) = (h / 2, w / 2);
    let k = pair.taps();
    let mut macs = 0u64;

    // horizontal taps vary fastest: kernel[j*k + i] = vertical[j] * horizontal[i]
    let outer = |horizontal: &[f64], vertical: &[f64]| -> Vec<f64> {
        vertical
            .iter()
            .flat_map(|vj| horizontal.iter().map(move |hi| vj * hi))
            .collect()
    };
    let kernels = [
        outer(pair.low(), pair.low()),
        outer(pair.low(), pair.high()),
        outer(pair.high(), pair.low()),
        outer(pair.high(), pair.high()),
    ];

    let mut bands = [(); 4].map(|_| vec![0.0; c * hh_dim * hw_dim]);
    for ch in 0..c {
        let plane = map.channel(ch);
        for (band, kernel) in bands.iter_mut().zip(&kernels) {
            let out_plane = &mut band[ch * hh_dim * hw_dim..(ch + 1) * hh_dim * hw_dim];
            for yp in 0..hh_dim {
                for xp in 0..hw_dim {
                    let mut acc = 0.0;
                    for j in 0..k {
                        let y = padding.fold(2 * yp + j, h);
                        for i in 0..k {
                            let x = padding.fold(2 * xp + i, w);
                            acc += kernel[j * k + i] * plane[y * w + x];
                        }
                    }
                    out_plane[yp * hw_dim + xp] = acc;
                }
            }
            macs += (k * k * hh_dim * hw_dim) as u64;
        }
    }

    let [ll, lh, hl, hh] = bands;
    let band = |data| FeatureMap::new(c, hh_dim, hw_dim, data);
    let set = SubbandSet::new(band(ll)?, band(lh)?, band(hl)?, band(hh)?)?;
    Ok((set, macs))
}

fn check_subband_shape(map: &FeatureMap, upstream: &SubbandSet) -> Result<()> {
    let expected = (map.channels(), map.height() / 2, map.width() / 2);
    if upstream.ll().shape() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            actual: upstream.ll().shape(),
        });
    }
    Ok(())
}

/// Gradient of `<upstream, decompose(map)>` with respect to the low and high
/// taps. Each tap acts in both the horizontal and the vertical stage, so the
/// gradient carries a product-rule term from each.
pub fn decompose_filter_jvp(
    map: &FeatureMap,
    pair: &WaveletFilterPair,
    upstream: &SubbandSet,
    padding: PaddingMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    require_even(map)?;
    check_subband_shape(map, upstream)?;
    let (c, h, w) = map.shape();
    let (hh_dim, hw_dim) = (h / 2, w / 2);
    let k = pair.taps();
    let mut macs = 0u64;

    let mut y_low = vec![0.0; c * h * hw_dim];
    let mut y_high = vec![0.0; c * h * hw_dim];
    horizontal_analysis(map, pair.low(), padding, &mut y_low, &mut macs);
    horizontal_analysis(map, pair.high(), padding, &mut y_high, &mut macs);

    let mut g_low = vec![0.0; k];
    let mut g_high = vec![0.0; k];

    // vertical-stage tap gradients, plus the vertical adjoint that turns the
    // subband cotangents into cotangents of the horizontal intermediates
    let mut ybar_low = vec![0.0; c * h * hw_dim];
    let mut ybar_high = vec![0.0; c * h * hw_dim];
    let mut col_in = vec![0.0; h];
    let mut col_cot = vec![0.0; hh_dim];
    let mut col_bar = vec![0.0; h];
    for ch in 0..c {
        let plane_range = ch * h * hw_dim..(ch + 1) * h * hw_dim;
        for x in 0..hw_dim {
            for (intermediate, band_low, band_high, ybar) in [
                (&y_low, upstream.ll(), upstream.lh(), &mut ybar_low),
                (&y_high, upstream.hl(), upstream.hh(), &mut ybar_high),
            ] {
                gather_column(&intermediate[plane_range.clone()], hw_dim, x, &mut col_in);
                col_bar.fill(0.0);
                gather_column(band_low.channel(ch), hw_dim, x, &mut col_cot);
                tap_grad_1d(&col_cot, &col_in, padding, &mut g_low);
                synthesize_1d(&col_cot, pair.low(), padding, &mut col_bar, &mut macs);
                gather_column(band_high.channel(ch), hw_dim, x, &mut col_cot);
                tap_grad_1d(&col_cot, &col_in, padding, &mut g_high);
                synthesize_1d(&col_cot, pair.high(), padding, &mut col_bar, &mut macs);
                write_column(&mut ybar[plane_range.clone()], hw_dim, x, &col_bar);
            }
        }
    }

    // horizontal-stage tap gradients against the source rows
    for ch in 0..c {
        let plane = map.channel(ch);
        for y in 0..h {
            let row = &plane[y * w..(y + 1) * w];
            let bar_range = (ch * h + y) * hw_dim..(ch * h + y + 1) * hw_dim;
            tap_grad_1d(&ybar_low[bar_range.clone()], row, padding, &mut g_low);
            tap_grad_1d(&ybar_high[bar_range], row, padding, &mut g_high);
        }
    }
    Ok((g_low, g_high))
}

/// Gradient of `<upstream, reconstruct(subbands)>` with respect to the low
/// and high taps. Mirror of [`decompose_filter_jvp`] for the synthesis
/// direction.
pub fn reconstruct_filter_jvp(
    subbands: &SubbandSet,
    pair: &WaveletFilterPair,
    upstream: &FeatureMap,
    padding: PaddingMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let expected = (
        subbands.channels(),
        subbands.source_height(),
        subbands.source_width(),
    );
    if upstream.shape() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            actual: upstream.shape(),
        });
    }
    let (c, h, w) = upstream.shape();
    let hw_dim = w / 2;
    let k = pair.taps();
    let mut macs = 0u64;

    let mut g_low = vec![0.0; k];
    let mut g_high = vec![0.0; k];

    // horizontal synthesis term: cotangent rows are the vertical-stage
    // outputs, inputs are the upstream rows
    let (z_low, z_high) = vertical_synthesis(subbands, pair, padding, &mut macs);
    for ch in 0..c {
        let plane = upstream.channel(ch);
        for y in 0..h {
            let row = &plane[y * w..(y + 1) * w];
            let z_range = (ch * h + y) * hw_dim..(ch * h + y + 1) * hw_dim;
            tap_grad_1d(&z_low[z_range.clone()], row, padding, &mut g_low);
            tap_grad_1d(&z_high[z_range], row, padding, &mut g_high);
        }
    }

    // vertical synthesis term: cotangent columns are the subbands, inputs are
    // the horizontal analyses of the upstream
    let mut u_low = vec![0.0; c * h * hw_dim];
    let mut u_high = vec![0.0; c * h * hw_dim];
    horizontal_analysis(upstream, pair.low(), padding, &mut u_low, &mut macs);
    horizontal_analysis(upstream, pair.high(), padding, &mut u_high, &mut macs);
    let mut col_in = vec![0.0; h];
    let mut col_cot = vec![0.0; subbands.ll().height()];
    for ch in 0..c {
        let plane_range = ch * h * hw_dim..(ch + 1) * h * hw_dim;
        for x in 0..hw_dim {
            for (intermediate, band_low, band_high) in [
                (&u_low, subbands.ll(), subbands.lh()),
                (&u_high, subbands.hl(), subbands.hh()),
            ] {
                gather_column(&intermediate[plane_range.clone()], hw_dim, x, &mut col_in);
                gather_column(band_low.channel(ch), hw_dim, x, &mut col_cot);
                tap_grad_1d(&col_cot, &col_in, padding, &mut g_low);
                gather_column(band_high.channel(ch), hw_dim, x, &mut col_cot);
                tap_grad_1d(&col_cot, &col_in, padding, &mut g_high);
            }
        }
    }
    Ok((g_low, g_high))
}
