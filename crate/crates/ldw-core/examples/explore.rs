use ldw_core::training::{train_filters, reconstruction_mse, TrainConfig};
use ldw_core::filters::{loss_wavelet, LossWeights};
use ldw_core::tensor::{psnr, FeatureMap};
use ldw_core::transform::{decompose, reconstruct, PaddingMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn images(seed: u64, count: usize, h: usize, w: usize) -> Vec<FeatureMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| {
        let data = (0..h * w).map(|_| rng.random_range(0.0..=1.0)).collect();
        FeatureMap::from_2d(h, w, data).unwrap()
    }).collect()
}

fn main() {
    let train_set = images(100, 8, 32, 32);
    let held_out = &images(200, 1, 32, 32)[0];

    println!("=== criterion 2 exploration: K=4 pretrain on, 200 epochs ===");
    for (wname, weights) in [("sym-on", LossWeights::default()), ("sym-off", LossWeights::without_sym())] {
        for lr in [1e-4, 1e-3, 1e-2, 2e-2, 5e-2] {
            let mut config = TrainConfig::default();
            config.epochs = 200;
            config.learning_rate = lr;
            config.wavelet_weights = weights;
            config.seed = 0;
            let report = train_filters(&train_set, 4, &config).unwrap();
            let rec = reconstruct(&decompose(held_out, &report.pair, PaddingMode::Circular).unwrap(), &report.pair, PaddingMode::Circular);
            let p = psnr(held_out, &rec, 1.0).unwrap().decibels_or_inf();
            let f = report.final_record();
            println!("{wname} lr={lr:<7} wavelet={:<12.3e} task={:<12.3e} total={:<12.3e} heldout_psnr={:.2} dB", f.wavelet_loss, f.task_loss, f.total_loss, p);
        }
    }

    println!("\n=== criterion 7 exploration: 4 configs x 5 seeds, shared metric = task + unit-weight wavelet ===");
    for epochs in [200usize] {
        for lr in [1e-2, 2e-2] {
            println!("-- epochs={epochs} lr={lr}");
            for seed in 0..5u64 {
                let mut vals = Vec::new();
                for (name, pretrain, wavelet_on) in [("on/on", true, true), ("on/off", true, false), ("off/on", false, true), ("off/off", false, false)] {
                    let mut config = TrainConfig::default();
                    config.epochs = epochs;
                    config.learning_rate = lr;
                    config.seed = seed;
                    config.pretrain = pretrain;
                    config.wavelet_weights = if wavelet_on { LossWeights::default() } else { LossWeights::off() };
                    let report = train_filters(&train_set, 4, &config).unwrap();
                    let task = reconstruction_mse(&train_set, &report.pair, PaddingMode::Circular).unwrap();
                    let shared = task + loss_wavelet(&report.pair, &LossWeights::default()).unwrap();
                    vals.push((name, shared));
                }
                let best = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
                let winner_ok = vals[0].1 <= best + 1e-12;
                print!("seed {seed}: ");
                for (n, v) in &vals { print!("{n}={v:.4e} "); }
                println!(" -> on/on best: {winner_ok}");
            }
        }
    }
}
