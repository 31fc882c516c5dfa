//! Randomized invariants of the library surface.

use proptest::prelude::*;

use ldw_core::attention::{channel_energy, se_gate};
use ldw_core::filters::{
    constraint_residuals, loss_high, loss_low, loss_reverse, loss_sym, loss_wavelet, LossWeights,
    WaveletFilterPair,
};
use ldw_core::tensor::psnr;
use ldw_core::transform::{decompose, reconstruct, PaddingMode};
use ldw_core::{AttentionParams, FeatureMap};

fn map_strategy(c: usize, h: usize, w: usize) -> impl Strategy<Value = FeatureMap> {
    prop::collection::vec(-100.0..100.0f64, c * h * w)
        .prop_map(move |data| FeatureMap::new(c, h, w, data).unwrap())
}

fn pair_strategy(k: usize) -> impl Strategy<Value = WaveletFilterPair> {
    (
        prop::collection::vec(-3.0..3.0f64, k),
        prop::collection::vec(-3.0..3.0f64, k),
    )
        .prop_map(|(low, high)| WaveletFilterPair::new(low, high).unwrap())
}

proptest! {
    #[test]
    fn pool_outputs_stay_inside_the_input_range(map in map_strategy(2, 4, 6)) {
        let lo = map.data().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = map.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let avg = map.avg_pool_2x2().unwrap();
        prop_assert!(avg.data().iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
        let max = map.max_pool_2x2().unwrap();
        // every max-pool output is literally one of the input values
        prop_assert!(max.data().iter().all(|v| map.data().contains(v)));
    }

    #[test]
    fn pooling_commutes_with_channel_permutation(map in map_strategy(3, 2, 4)) {
        let (c, h, w) = map.shape();
        let perm = [2usize, 0, 1];
        let permuted_data: Vec<f64> = perm
            .iter()
            .flat_map(|&src| map.channel(src).iter().copied())
            .collect();
        let permuted = FeatureMap::new(c, h, w, permuted_data).unwrap();
        for (pool, pool_p) in [
            (map.avg_pool_2x2().unwrap(), permuted.avg_pool_2x2().unwrap()),
            (map.max_pool_2x2().unwrap(), permuted.max_pool_2x2().unwrap()),
        ] {
            for (dst, &src) in perm.iter().enumerate() {
                prop_assert_eq!(pool_p.channel(dst), pool.channel(src));
            }
        }
    }

    #[test]
    fn psnr_is_symmetric(
        a in map_strategy(1, 2, 2),
        b in map_strategy(1, 2, 2),
        peak in 0.1..10.0f64,
    ) {
        let ab = psnr(&a, &b, peak).unwrap();
        let ba = psnr(&b, &a, peak).unwrap();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn constraint_losses_are_non_negative(pair in pair_strategy(5)) {
        prop_assert!(loss_low(&pair) >= 0.0);
        prop_assert!(loss_high(&pair) >= 0.0);
        prop_assert!(loss_reverse(&pair) >= 0.0);
        prop_assert!(loss_sym(&pair) >= 0.0);
        prop_assert!(loss_wavelet(&pair, &LossWeights::default()).unwrap() >= 0.0);
    }

    #[test]
    fn random_constrained_lands_on_the_manifold(seed in any::<u64>(), k in 2usize..=16) {
        let pair = WaveletFilterPair::random_constrained(k, seed).unwrap();
        prop_assert!(constraint_residuals(&pair).max_abs() < 1e-8);
    }

    #[test]
    fn haar_roundtrip_is_exact_on_random_maps(map in map_strategy(1, 8, 8)) {
        let haar = WaveletFilterPair::haar();
        let rec = reconstruct(
            &decompose(&map, &haar, PaddingMode::Circular).unwrap(),
            &haar,
            PaddingMode::Circular,
        );
        for (x, y) in map.data().iter().zip(rec.data()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn gates_are_strictly_inside_the_unit_interval(
        energies in prop::collection::vec(-1e9..1e9f64, 4),
        seed in any::<u64>(),
    ) {
        let params = AttentionParams::random(4, 2, seed).unwrap();
        let gates = se_gate(&energies, &params).unwrap();
        prop_assert!(gates.iter().all(|g| *g > 0.0 && *g < 1.0));
    }

    #[test]
    fn channel_energy_is_permutation_equivariant(map in map_strategy(3, 2, 3)) {
        let (c, h, w) = map.shape();
        let perm = [1usize, 2, 0];
        let permuted_data: Vec<f64> = perm
            .iter()
            .flat_map(|&src| map.channel(src).iter().copied())
            .collect();
        let permuted = FeatureMap::new(c, h, w, permuted_data).unwrap();
        let e = channel_energy(&map, false);
        let ep = channel_energy(&permuted, false);
        for (dst, &src) in perm.iter().enumerate() {
            prop_assert_eq!(ep[dst], e[src]);
        }
        // spatial shuffle within a channel leaves the energy unchanged
        let mut reversed_data = Vec::new();
        for ch in 0..c {
            reversed_data.extend(map.channel(ch).iter().rev());
        }
        let reversed = FeatureMap::new(c, h, w, reversed_data).unwrap();
        let er = channel_energy(&reversed, false);
        for (x, y) in e.iter().zip(&er) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }
}
