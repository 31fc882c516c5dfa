//! The six batch subcommands. Each command function takes its parsed
//! arguments and returns a process exit code: 0 on success, 1 when `check`
//! finds violated constraints, errors map to 2 in `main`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ldw_core::attention::{apply_attention, channel_energy, se_gate, standardize_energies};
use ldw_core::filters::{
    constraint_residuals, loss_high, loss_low, loss_reverse, loss_sym, LossWeights,
    WaveletFilterPair,
};
use ldw_core::training::{train_filters, TrainConfig};
use ldw_core::transform::{
    decompose, decompose_dense2d, flop_report, reconstruct, PaddingMode, SubbandSet,
};
use ldw_core::{AttentionParams, FeatureMap};

use crate::container::{self, Dtype, NamedTensor};
use crate::pgm;

#[derive(Debug, Parser)]
#[command(
    name = "ldw",
    version,
    about = "Learnable discrete-wavelet pooling toolbox"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose a map into the LL/LH/HL/HH subbands
    Decompose(DecomposeArgs),
    /// Rebuild a map from its four subbands
    Reconstruct(ReconstructArgs),
    /// Report constraint residuals and losses of a filter file
    Check(CheckArgs),
    /// Learn filter taps on an image directory
    Train(TrainArgs),
    /// Compare the separable and dense decomposition paths
    Bench(BenchArgs),
    /// Gate channels by their energies
    Attention(AttentionArgs),
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Decompose(args) => cmd_decompose(args),
        Command::Reconstruct(args) => cmd_reconstruct(args),
        Command::Check(args) => cmd_check(args),
        Command::Train(args) => cmd_train(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Attention(args) => cmd_attention(args),
    }
}

fn parse_on_off(value: &str) -> Result<bool, String> {
    match value {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected on or off, got {other:?}")),
    }
}

fn parse_weights(value: &str) -> Result<LossWeights, String> {
    let parts: Vec<&str> = value.split(',').collect();
    if parts.len() != 4 {
        return Err(format!("expected four comma-separated weights, got {value:?}"));
    }
    let mut parsed = [0.0; 4];
    for (slot, part) in parsed.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("bad weight {part:?}: {e}"))?;
    }
    LossWeights::new(parsed[0], parsed[1], parsed[2], parsed[3]).map_err(|e| e.to_string())
}

fn parse_size(value: &str) -> Result<(usize, usize), String> {
    let (h, w) = value
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {value:?}"))?;
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("bad size {s:?}: {e}"));
    Ok((parse(h)?, parse(w)?))
}

fn read_filters(path: &Path) -> Result<WaveletFilterPair> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read filter file {}", path.display()))?;
    WaveletFilterPair::from_text(&text)
        .with_context(|| format!("malformed filter file {}", path.display()))
}

/// Container with a single tensor, or a PGM image mapped to one channel in
/// `[0, 1]`; chosen by sniffing the leading magic bytes.
fn read_input_map(path: &Path) -> Result<FeatureMap> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    if bytes.starts_with(&container::MAGIC) {
        let tensors =
            container::decode(&bytes).with_context(|| format!("malformed container {}", path.display()))?;
        if tensors.len() != 1 {
            bail!(
                "{} holds {} tensors, expected exactly one",
                path.display(),
                tensors.len()
            );
        }
        Ok(tensors.into_iter().next().unwrap().map)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        pgm::decode(&bytes)
            .with_context(|| format!("malformed pgm {}", path.display()))?
            .to_map()
    } else {
        bail!("{} is neither a tensor container nor a pgm image", path.display());
    }
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Input map: single-tensor container or PGM image
    #[arg(long)]
    pub input: PathBuf,
    /// Filter pair in the text format
    #[arg(long)]
    pub filters: PathBuf,
    /// Output container with tensors LL, LH, HL, HH
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "circular")]
    pub padding: PaddingMode,
}

pub fn cmd_decompose(args: &DecomposeArgs) -> Result<i32> {
    let pair = read_filters(&args.filters)?;
    let map = read_input_map(&args.input)?;
    let subbands = decompose(&map, &pair, args.padding)?;
    let tensors: Vec<NamedTensor> = ["LL", "LH", "HL", "HH"]
        .iter()
        .zip(subbands.bands())
        .map(|(name, band)| NamedTensor::new(*name, band.clone()))
        .collect();
    container::write_file(&args.output, &tensors, Dtype::F64)?;
    Ok(0)
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Container holding the LL, LH, HL, HH tensors
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub filters: PathBuf,
    /// Output container (or PGM with --as-pgm)
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "circular")]
    pub padding: PaddingMode,
    /// Clamp to [0, 1] and quantize to an 8-bit PGM
    #[arg(long)]
    pub as_pgm: bool,
}

pub fn cmd_reconstruct(args: &ReconstructArgs) -> Result<i32> {
    let pair = read_filters(&args.filters)?;
    let tensors = container::read_file(&args.input)?;
    let find = |name: &str| -> Result<FeatureMap> {
        tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.map.clone())
            .with_context(|| format!("container is missing subband {name:?}"))
    };
    let subbands = SubbandSet::new(find("LL")?, find("LH")?, find("HL")?, find("HH")?)?;
    let map = reconstruct(&subbands, &pair, args.padding);
    if args.as_pgm {
        let pixels = pgm::map_to_pixels(&map)?;
        pgm::write_file(&args.output, map.width(), map.height(), &pixels)?;
    } else {
        let tensor = NamedTensor::new("reconstructed", map);
        container::write_file(&args.output, &[tensor], Dtype::F64)?;
    }
    Ok(0)
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub filters: PathBuf,
    /// Largest residual magnitude that still passes
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

pub fn cmd_check(args: &CheckArgs) -> Result<i32> {
    let pair = read_filters(&args.filters)?;
    let residuals = constraint_residuals(&pair);
    println!("taps\t{}", pair.taps());
    println!("residual_low_energy\t{}", residuals.low_energy);
    println!("residual_low_sum\t{}", residuals.low_sum);
    println!("residual_high_sum\t{}", residuals.high_sum);
    println!("residual_high_energy\t{}", residuals.high_energy);
    println!("loss_low\t{}", loss_low(&pair));
    println!("loss_high\t{}", loss_high(&pair));
    println!("loss_reverse\t{}", loss_reverse(&pair));
    println!("loss_sym\t{}", loss_sym(&pair));
    if residuals.max_abs() < args.tolerance {
        Ok(0)
    } else {
        eprintln!(
            "constraint residuals exceed {} (max {})",
            args.tolerance,
            residuals.max_abs()
        );
        Ok(1)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of training images (PGM or container files)
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub taps: usize,
    #[arg(long, default_value_t = 400)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    /// Start from a constrained random pair (on) or raw uniform draws (off)
    #[arg(long, default_value = "on", value_parser = parse_on_off, action = clap::ArgAction::Set)]
    pub pretrain: bool,
    /// Weights for the low, high, reverse and symmetry terms
    #[arg(long, default_value = "1,1,1,1", value_parser = parse_weights)]
    pub wavelet_weights: LossWeights,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 1.0)]
    pub task_weight: f64,
    /// Multiply the learning rate by 0.1 every 100 epochs
    #[arg(long)]
    pub lr_step_decay: bool,
    /// Where to write the learned filter file
    #[arg(long)]
    pub out: PathBuf,
    /// Optional tab-separated per-epoch log
    #[arg(long)]
    pub log: Option<PathBuf>,
}

/// Every PGM in the directory becomes one image; every container contributes
/// all of its tensors. Files are visited in name order, other files are
/// skipped.
fn load_image_dir(dir: &Path) -> Result<Vec<FeatureMap>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read image directory {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut images = Vec::new();
    for path in paths {
        let bytes =
            std::fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
        if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
            images.push(
                pgm::decode(&bytes)
                    .with_context(|| format!("malformed pgm {}", path.display()))?
                    .to_map()?,
            );
        } else if bytes.starts_with(&container::MAGIC) {
            let tensors = container::decode(&bytes)
                .with_context(|| format!("malformed container {}", path.display()))?;
            images.extend(tensors.into_iter().map(|t| t.map));
        }
    }
    if images.is_empty() {
        bail!("no PGM or container images found in {}", dir.display());
    }
    Ok(images)
}

pub fn cmd_train(args: &TrainArgs) -> Result<i32> {
    let images = load_image_dir(&args.images)?;
    let config = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        weight_decay: args.weight_decay,
        wavelet_weights: args.wavelet_weights,
        task_weight: args.task_weight,
        seed: args.seed,
        pretrain: args.pretrain,
        lr_step_decay: args.lr_step_decay,
        ..TrainConfig::default()
    };
    let report = train_filters(&images, args.taps, &config)?;
    std::fs::write(&args.out, report.pair.to_text())
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    if let Some(log) = &args.log {
        std::fs::write(log, report.to_log())
            .with_context(|| format!("cannot write {}", log.display()))?;
    }
    let last = report.final_record();
    eprintln!(
        "trained {} epochs on {} images: task {:.6e}, wavelet {:.6e}, total {:.6e}",
        args.epochs,
        images.len(),
        last.task_loss,
        last.wavelet_loss,
        last.total_loss
    );
    Ok(0)
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 4)]
    pub taps: usize,
    /// Map size as HxW
    #[arg(long, default_value = "256x256", value_parser = parse_size)]
    pub size: (usize, usize),
    #[arg(long, default_value_t = 3)]
    pub channels: usize,
    /// Timed runs per path; the median is reported
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
}

fn median_seconds(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let (height, width) = args.size;
    if args.iters == 0 {
        bail!("--iters must be positive");
    }
    let report = flop_report(args.taps, args.channels, height, width)?;
    let pair = WaveletFilterPair::random_constrained(args.taps, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let data = (0..args.channels * height * width)
        .map(|_| rng.random_range(0.0..=1.0))
        .collect();
    let map = FeatureMap::new(args.channels, height, width, data)?;

    // both paths must agree before their timings mean anything
    let separable = decompose(&map, &pair, PaddingMode::Circular)?;
    let dense = decompose_dense2d(&map, &pair, PaddingMode::Circular)?;
    let max_diff = separable
        .bands()
        .iter()
        .zip(dense.bands())
        .flat_map(|(a, b)| a.data().iter().zip(b.data()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if max_diff > 1e-10 {
        bail!("separable and dense outputs disagree by {max_diff}");
    }

    let time = |f: &dyn Fn() -> ()| -> Vec<f64> {
        (0..args.iters)
            .map(|_| {
                let start = Instant::now();
                f();
                start.elapsed().as_secs_f64()
            })
            .collect()
    };
    let sep_median = median_seconds(time(&|| {
        decompose(&map, &pair, PaddingMode::Circular).unwrap();
    }));
    let dense_median = median_seconds(time(&|| {
        decompose_dense2d(&map, &pair, PaddingMode::Circular).unwrap();
    }));

    println!(
        "taps\t{}\nchannels\t{}\nsize\t{}x{}",
        args.taps, args.channels, height, width
    );
    println!("separable_macs\t{}", report.separable_macs);
    println!("dense_macs\t{}", report.dense_macs);
    println!("mac_ratio\t{}", report.ratio);
    println!("max_output_diff\t{max_diff}");
    println!("separable_median_s\t{sep_median:.6}");
    println!("dense_median_s\t{dense_median:.6}");
    println!("measured_speedup\t{:.3}", dense_median / sep_median);
    Ok(0)
}

#[derive(Debug, Args)]
pub struct AttentionArgs {
    /// Input map: single-tensor container or PGM image
    #[arg(long)]
    pub input: PathBuf,
    /// Container with the w1, b1, w2, b2 tensors
    #[arg(long)]
    pub params: PathBuf,
    /// Output container with the gated map
    #[arg(long)]
    pub output: PathBuf,
    /// Channel-normalize before computing energies
    #[arg(long, default_value = "off", value_parser = parse_on_off, action = clap::ArgAction::Set)]
    pub normalize: bool,
}

/// Attention parameters as four named tensors: `w1` is `1 x (C/r) x C`,
/// `w2` is `1 x C x (C/r)`, the biases are `1 x 1 x len`.
pub fn params_to_tensors(params: &AttentionParams) -> Vec<NamedTensor> {
    let (c, hidden) = (params.channels(), params.hidden());
    let tensor = |name: &str, h: usize, w: usize, data: &[f64]| {
        NamedTensor::new(
            name,
            FeatureMap::new(1, h, w, data.to_vec()).expect("validated params"),
        )
    };
    vec![
        tensor("w1", hidden, c, params.w1()),
        tensor("b1", 1, hidden, params.b1()),
        tensor("w2", c, hidden, params.w2()),
        tensor("b2", 1, c, params.b2()),
    ]
}

pub fn tensors_to_params(tensors: &[NamedTensor]) -> Result<AttentionParams> {
    let find = |name: &str| -> Result<&FeatureMap> {
        tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| &t.map)
            .with_context(|| format!("params container is missing tensor {name:?}"))
    };
    let w1 = find("w1")?;
    let channels = w1.width();
    let hidden = w1.height();
    if hidden == 0 || channels % hidden != 0 {
        bail!("w1 shape {}x{} does not define a reduction", hidden, channels);
    }
    Ok(AttentionParams::new(
        channels,
        channels / hidden,
        w1.data().to_vec(),
        find("b1")?.data().to_vec(),
        find("w2")?.data().to_vec(),
        find("b2")?.data().to_vec(),
    )?)
}

pub fn cmd_attention(args: &AttentionArgs) -> Result<i32> {
    let map = read_input_map(&args.input)?;
    let params = tensors_to_params(&container::read_file(&args.params)?)?;
    if params.channels() != map.channels() {
        bail!(
            "params expect {} channels, map has {}",
            params.channels(),
            map.channels()
        );
    }
    let energies = channel_energy(&map, args.normalize);
    // raw energies scale with H*W; the gate sees them standardized
    let gates = se_gate(&standardize_energies(&energies), &params)?;
    let gated = apply_attention(&map, &gates)?;
    container::write_file(
        &args.output,
        &[NamedTensor::new("gated", gated)],
        Dtype::F64,
    )?;
    for (c, (e, g)) in energies.iter().zip(&gates).enumerate() {
        println!("{c}\t{e}\t{g}");
    }
    Ok(0)
}
