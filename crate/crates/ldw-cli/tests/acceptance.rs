//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured figures. Tolerances are pinned in the
//! assertions.

use std::f64::consts::SQRT_2;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use ldw_cli::commands::{cmd_train, TrainArgs};
use ldw_cli::container::{self, Dtype, NamedTensor};
use ldw_core::attention::{apply_attention, channel_energy, se_gate};
use ldw_core::filters::{
    grad_loss_wavelet, loss_high, loss_low, loss_reverse, loss_sym, loss_wavelet, LossWeights,
    WaveletFilterPair,
};
use ldw_core::tensor::psnr;
use ldw_core::training::{reconstruction_mse, train_filters, TrainConfig};
use ldw_core::transform::{
    decompose, decompose_dense2d, decompose_dense2d_with_macs, decompose_filter_jvp,
    decompose_with_macs, flop_report, reconstruct, reconstruct_filter_jvp, PaddingMode,
    SubbandSet,
};
use ldw_core::{AttentionParams, FeatureMap};

fn random_map(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize, lo: f64, hi: f64) -> FeatureMap {
    let data = (0..c * h * w).map(|_| rng.random_range(lo..=hi)).collect();
    FeatureMap::new(c, h, w, data).unwrap()
}

fn random_pair(rng: &mut ChaCha8Rng, k: usize) -> WaveletFilterPair {
    let low = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let high = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
    WaveletFilterPair::new(low, high).unwrap()
}

fn max_abs_diff(a: &FeatureMap, b: &FeatureMap) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Criterion 1: Haar roundtrip on 100 random 3x64x64 maps under circular
/// padding stays below 1e-12 max abs error, within 5 seconds.
#[test]
fn criterion_1_exact_reversibility() {
    let start = Instant::now();
    let haar = WaveletFilterPair::haar();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let map = random_map(&mut rng, 3, 64, 64, -1.0, 1.0);
        let rec = reconstruct(
            &decompose(&map, &haar, PaddingMode::Circular).unwrap(),
            &haar,
            PaddingMode::Circular,
        );
        worst = worst.max(max_abs_diff(&map, &rec));
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst < 1e-12, "max roundtrip error {worst}");
    assert!(elapsed < 5.0, "took {elapsed:.2}s");
    println!("PASS criterion 1: exact reversibility, max abs error {worst:.3e} over 100 maps in {elapsed:.2}s");
}

/// Criterion 2: train 4-tap filters (pretrain on, 200 epochs, 8 random
/// 32x32 maps) through the train command, then beat the 33.1 dB roundtrip
/// floor on a held-out map, within 2 minutes. The criterion leaves the
/// learning rate and loss weights open; this run pins lr = 0.05 and
/// disables the symmetry term, under which the trained pair is expected
/// above 40 dB.
#[test]
fn criterion_2_psnr_floor_after_training() {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for i in 0..8 {
        let image = random_map(&mut rng, 1, 32, 32, 0.0, 1.0);
        container::write_file(
            &dir.path().join(format!("img{i}.ldwt")),
            &[NamedTensor::new("image", image)],
            Dtype::F64,
        )
        .unwrap();
    }
    let out = dir.path().join("trained.filters");
    cmd_train(&TrainArgs {
        images: dir.path().to_path_buf(),
        taps: 4,
        epochs: 200,
        lr: 0.05,
        pretrain: true,
        wavelet_weights: LossWeights::without_sym(),
        seed: 0,
        weight_decay: 1e-4,
        task_weight: 1.0,
        lr_step_decay: false,
        out: out.clone(),
        log: None,
    })
    .unwrap();
    let pair = WaveletFilterPair::from_text(&std::fs::read_to_string(&out).unwrap()).unwrap();

    let mut held_rng = ChaCha8Rng::seed_from_u64(200);
    let held_out = random_map(&mut held_rng, 1, 32, 32, 0.0, 1.0);
    let rec = reconstruct(
        &decompose(&held_out, &pair, PaddingMode::Circular).unwrap(),
        &pair,
        PaddingMode::Circular,
    );
    let db = psnr(&held_out, &rec, 1.0).unwrap().decibels_or_inf();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(db > 33.1, "held-out roundtrip at {db:.2} dB");
    assert!(elapsed < 120.0, "took {elapsed:.2}s");
    println!("PASS criterion 2: held-out roundtrip {db:.2} dB > 33.1 dB after training in {elapsed:.2}s");
}

/// Criterion 3: separable and dense decompositions agree within 1e-10 for
/// K in {2,3,4,6,8}, both paddings, 50 random instances each, within 30
/// seconds.
#[test]
fn criterion_3_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for &k in &[2usize, 3, 4, 6, 8] {
        for &padding in &[PaddingMode::Circular, PaddingMode::Reflect] {
            for _ in 0..50 {
                let c = rng.random_range(1..=3);
                let h = 2 * rng.random_range(1..=8);
                let w = 2 * rng.random_range(1..=8);
                let map = random_map(&mut rng, c, h, w, -1.0, 1.0);
                let pair = random_pair(&mut rng, k);
                let a = decompose(&map, &pair, padding).unwrap();
                let b = decompose_dense2d(&map, &pair, padding).unwrap();
                for (x, y) in a.bands().iter().zip(b.bands()) {
                    worst = worst.max(max_abs_diff(x, y));
                }
                cases += 1;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst < 1e-10, "max separable/dense gap {worst}");
    assert!(elapsed < 30.0, "took {elapsed:.2}s");
    println!("PASS criterion 3: oracle equivalence, max gap {worst:.3e} over {cases} cases in {elapsed:.2}s");
}

/// Criterion 4: analytic gradients of every constraint loss and of both
/// filter JVPs match central finite differences (step 1e-6) within 1e-5
/// relative error, 100 random configurations each, within a minute.
#[test]
fn criterion_4_gradient_correctness() {
    let start = Instant::now();
    let step = 1e-6;
    let taps_cycle = [2usize, 3, 4, 6, 8];
    let mut rng = ChaCha8Rng::seed_from_u64(4004);

    // the four single losses plus the weighted combination
    let single = |low, high, reverse, sym| LossWeights::new(low, high, reverse, sym).unwrap();
    let named: [(&str, Box<dyn Fn(&mut ChaCha8Rng) -> LossWeights>); 5] = [
        ("L_Low", Box::new(move |_| single(1.0, 0.0, 0.0, 0.0))),
        ("L_High", Box::new(move |_| single(0.0, 1.0, 0.0, 0.0))),
        ("L_Reverse", Box::new(move |_| single(0.0, 0.0, 1.0, 0.0))),
        ("L_Sym", Box::new(move |_| single(0.0, 0.0, 0.0, 1.0))),
        (
            "L_Wavelet",
            Box::new(move |rng: &mut ChaCha8Rng| {
                single(
                    rng.random_range(0.0..=2.0),
                    rng.random_range(0.0..=2.0),
                    rng.random_range(0.0..=2.0),
                    rng.random_range(0.0..=2.0),
                )
            }),
        ),
    ];
    let mut worst_loss = 0.0f64;
    for (name, weights_of) in &named {
        for case in 0..100 {
            let k = taps_cycle[case % taps_cycle.len()];
            let pair = random_pair(&mut rng, k);
            let weights = weights_of(&mut rng);
            let (g_low, g_high) = grad_loss_wavelet(&pair, &weights).unwrap();
            for i in 0..k {
                for (is_low, analytic) in [(true, g_low[i]), (false, g_high[i])] {
                    let eval = |delta: f64| {
                        let mut low = pair.low().to_vec();
                        let mut high = pair.high().to_vec();
                        if is_low {
                            low[i] += delta;
                        } else {
                            high[i] += delta;
                        }
                        loss_wavelet(
                            &WaveletFilterPair::new(low, high).unwrap(),
                            &weights,
                        )
                        .unwrap()
                    };
                    let fd = (eval(step) - eval(-step)) / (2.0 * step);
                    let err = rel_err(analytic, fd);
                    worst_loss = worst_loss.max(err);
                    assert!(err < 1e-5, "{name} case {case} tap {i}: {analytic} vs {fd}");
                }
            }
        }
    }

    // both transform JVPs
    let mut worst_jvp = 0.0f64;
    for case in 0..100 {
        let k = taps_cycle[case % taps_cycle.len()];
        let padding = if case % 2 == 0 {
            PaddingMode::Circular
        } else {
            PaddingMode::Reflect
        };
        let h = 2 * rng.random_range(2..=5);
        let w = 2 * rng.random_range(2..=5);
        let map = random_map(&mut rng, 1, h, w, -1.0, 1.0);
        let pair = random_pair(&mut rng, k);
        let up_bands = SubbandSet::new(
            random_map(&mut rng, 1, h / 2, w / 2, -1.0, 1.0),
            random_map(&mut rng, 1, h / 2, w / 2, -1.0, 1.0),
            random_map(&mut rng, 1, h / 2, w / 2, -1.0, 1.0),
            random_map(&mut rng, 1, h / 2, w / 2, -1.0, 1.0),
        )
        .unwrap();
        let up_map = random_map(&mut rng, 1, h, w, -1.0, 1.0);

        let (dg_low, dg_high) = decompose_filter_jvp(&map, &pair, &up_bands, padding).unwrap();
        let (rg_low, rg_high) =
            reconstruct_filter_jvp(&up_bands, &pair, &up_map, padding).unwrap();
        for i in 0..k {
            let eval = |delta: f64, is_low: bool| {
                let mut low = pair.low().to_vec();
                let mut high = pair.high().to_vec();
                if is_low {
                    low[i] += delta;
                } else {
                    high[i] += delta;
                }
                let p = WaveletFilterPair::new(low, high).unwrap();
                let forward: f64 = decompose(&map, &p, padding)
                    .unwrap()
                    .bands()
                    .iter()
                    .zip(up_bands.bands())
                    .flat_map(|(a, b)| a.data().iter().zip(b.data()))
                    .map(|(a, b)| a * b)
                    .sum();
                let backward: f64 = reconstruct(&up_bands, &p, padding)
                    .data()
                    .iter()
                    .zip(up_map.data())
                    .map(|(a, b)| a * b)
                    .sum();
                (forward, backward)
            };
            for (is_low, d_analytic, r_analytic) in
                [(true, dg_low[i], rg_low[i]), (false, dg_high[i], rg_high[i])]
            {
                let (fp, bp) = eval(step, is_low);
                let (fm, bm) = eval(-step, is_low);
                let d_fd = (fp - fm) / (2.0 * step);
                let r_fd = (bp - bm) / (2.0 * step);
                let d_err = rel_err(d_analytic, d_fd);
                let r_err = rel_err(r_analytic, r_fd);
                worst_jvp = worst_jvp.max(d_err).max(r_err);
                assert!(d_err < 1e-5, "decompose jvp case {case} tap {i}");
                assert!(r_err < 1e-5, "reconstruct jvp case {case} tap {i}");
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "took {elapsed:.2}s");
    println!("PASS criterion 4: gradients vs finite differences, worst rel err loss {worst_loss:.3e} / jvp {worst_jvp:.3e} in {elapsed:.2}s");
}

/// Criterion 5: golden loss values. Haar yields (0, 0, 0, 2); the halved
/// literal pair {1/2,1/2}/{1/2,-1/2} yields L_Low = (0.5-1)^2 + (1-sqrt2)^2,
/// L_High = 0.25, L_Reverse = 1, and L_Sym = 1 under the mirror pairing
/// (i <-> K+1-i) used throughout.
#[test]
fn criterion_5_constraint_loss_golden_values() {
    let haar = WaveletFilterPair::haar();
    assert!(loss_low(&haar).abs() < 1e-12);
    assert!(loss_high(&haar).abs() < 1e-12);
    assert!(loss_reverse(&haar).abs() < 1e-12);
    assert!((loss_sym(&haar) - 2.0).abs() < 1e-12);

    let halved = WaveletFilterPair::new(vec![0.5, 0.5], vec![0.5, -0.5]).unwrap();
    let expected_low = 0.25 + (1.0 - SQRT_2) * (1.0 - SQRT_2);
    assert!((expected_low - 0.42157287525381).abs() < 1e-9);
    assert!((loss_low(&halved) - expected_low).abs() < 1e-9);
    assert!((loss_high(&halved) - 0.25).abs() < 1e-9);
    assert!((loss_reverse(&halved) - 1.0).abs() < 1e-9);
    assert!((loss_sym(&halved) - 1.0).abs() < 1e-9);
    println!("PASS criterion 5: golden constraint losses for Haar and the halved literal pair");
}

/// Criterion 6: the reported MAC ratio is exactly K/2, the counters match
/// the executed multiply-adds exactly, and at K=8 on a 3x256x256 map the
/// separable path is at least 1.5x faster than the dense path (median of
/// 20 runs).
#[test]
fn criterion_6_complexity_claim() {
    for k in 2..=16usize {
        let report = flop_report(k, 3, 32, 32).unwrap();
        assert_eq!(report.ratio, k as f64 / 2.0, "ratio for K={k}");
        assert_eq!(report.dense_macs, report.separable_macs * k as u64 / 2);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6006);
    for &(k, c, h, w) in &[(2usize, 1usize, 4usize, 4usize), (4, 2, 16, 8), (8, 3, 64, 64)] {
        let map = random_map(&mut rng, c, h, w, -1.0, 1.0);
        let pair = random_pair(&mut rng, k);
        let report = flop_report(k, c, h, w).unwrap();
        let (_, sep_macs) = decompose_with_macs(&map, &pair, PaddingMode::Circular).unwrap();
        let (_, dense_macs) =
            decompose_dense2d_with_macs(&map, &pair, PaddingMode::Circular).unwrap();
        assert_eq!(sep_macs, report.separable_macs);
        assert_eq!(dense_macs, report.dense_macs);
    }

    let map = random_map(&mut rng, 3, 256, 256, -1.0, 1.0);
    let pair = random_pair(&mut rng, 8);
    let sep_ref = decompose(&map, &pair, PaddingMode::Circular).unwrap();
    let dense_ref = decompose_dense2d(&map, &pair, PaddingMode::Circular).unwrap();
    let worst = sep_ref
        .bands()
        .iter()
        .zip(dense_ref.bands())
        .map(|(a, b)| max_abs_diff(a, b))
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "paths disagree by {worst} before timing");

    let median = |mut v: Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.total_cmp(b));
        0.5 * (v[v.len() / 2] + v[(v.len() - 1) / 2])
    };
    let time = |f: &dyn Fn()| -> f64 {
        median(
            (0..20)
                .map(|_| {
                    let t = Instant::now();
                    f();
                    t.elapsed().as_secs_f64()
                })
                .collect(),
        )
    };
    let sep = time(&|| {
        decompose(&map, &pair, PaddingMode::Circular).unwrap();
    });
    let dense = time(&|| {
        decompose_dense2d(&map, &pair, PaddingMode::Circular).unwrap();
    });
    let speedup = dense / sep;
    assert!(
        speedup >= 1.5,
        "separable {sep:.4}s vs dense {dense:.4}s (x{speedup:.2})"
    );
    println!("PASS criterion 6: MAC ratio K/2 exact, counters exact, measured speedup x{speedup:.2} at K=8 3x256x256");
}

/// Criterion 7: across seeds 0..5, the (pretrain on, wavelet on)
/// configuration ends at the lowest shared objective (roundtrip MSE plus
/// the unit-weight constraint losses) among the four pretrain/wavelet
/// combinations, reproducing the ablation ordering qualitatively.
#[test]
fn criterion_7_pretrain_and_wavelet_ablation() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let images: Vec<FeatureMap> = (0..8)
        .map(|_| random_map(&mut rng, 1, 32, 32, 0.0, 1.0))
        .collect();
    let shared_metric = |pair: &WaveletFilterPair| -> f64 {
        reconstruction_mse(&images, pair, PaddingMode::Circular).unwrap()
            + loss_wavelet(pair, &LossWeights::default()).unwrap()
    };
    for seed in 0..5u64 {
        let run = |pretrain: bool, wavelet_on: bool| -> f64 {
            let config = TrainConfig {
                epochs: 200,
                learning_rate: 1e-2,
                seed,
                pretrain,
                wavelet_weights: if wavelet_on {
                    LossWeights::default()
                } else {
                    LossWeights::off()
                },
                ..TrainConfig::default()
            };
            shared_metric(&train_filters(&images, 4, &config).unwrap().pair)
        };
        let best = run(true, true);
        for (pretrain, wavelet_on) in [(true, false), (false, true), (false, false)] {
            let other = run(pretrain, wavelet_on);
            assert!(
                best <= other,
                "seed {seed}: pretrain+wavelet {best:.4e} vs ({pretrain},{wavelet_on}) {other:.4e}"
            );
        }
    }
    println!("PASS criterion 7: pretrain+wavelet configuration is best on all 5 seeds");
}

/// Criterion 8: energy and attention unit goldens, exact to 1e-12.
#[test]
fn criterion_8_energy_attention_goldens() {
    let map = FeatureMap::from_2d(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let energy = channel_energy(&map, false);
    assert!((energy[0] - 30.0).abs() < 1e-12);

    let params = AttentionParams::zeros(3, 1).unwrap();
    let gates = se_gate(&[5.0, -2.0, 0.25], &params).unwrap();
    assert!(gates.iter().all(|g| (g - 0.5).abs() < 1e-12));

    let multi = FeatureMap::new(3, 2, 2, (0..12).map(|i| i as f64 * 0.5).collect()).unwrap();
    let gated = apply_attention(&multi, &[1.0, 1.0, 1.0]).unwrap();
    assert_eq!(gated, multi);
    println!("PASS criterion 8: energy golden 30, zero-param gates 0.5, unit gates identity");
}
