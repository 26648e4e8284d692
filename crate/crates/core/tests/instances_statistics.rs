//! Generators checked against their stated distributions.

use mixprice_core::instances::{
    continuous_ml_revenue, gaussian_grid, parking_instance, random_instance, synthetic_profiles, ParkingParams,
    RANDOM_BETA_RANGE,
};
use mixprice_core::PriceVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn random_family_draws_follow_their_ranges() {
    let (mut betas, mut qs) = (Vec::new(), Vec::new());
    let mut seed = 0;
    while betas.len() < 100_000 {
        let inst = random_instance(seed, 3, 7).unwrap();
        for &i in inst.priced_alternatives() {
            for l in 0..7 {
                betas.push(inst.price_coef(i, 0, l));
                qs.push(inst.exo_utility(i, 0, l));
            }
        }
        seed += 1;
    }
    let (lo, hi) = RANDOM_BETA_RANGE;
    assert!(betas.iter().all(|b| (lo..=hi).contains(b)));
    let mean_q = qs.iter().sum::<f64>() / qs.len() as f64;
    assert!(mean_q.abs() <= 0.05, "{mean_q}");
    assert!(qs.iter().all(|q| (-5.0..=5.0).contains(q)));
}

/// Cell weights against frequencies of 10^6 samples that land in the grid
/// box.
#[test]
fn grid_weights_match_sampled_cell_frequencies() {
    let params = ParkingParams::default();
    let n = 4;
    let grid = gaussian_grid(&params, n).unwrap();
    let [[c00, c01], [_, c11]] = params.taste_cov;
    let l00 = c00.sqrt();
    let l10 = c01 / l00;
    let l11 = (c11 - l10 * l10).sqrt();
    let [x0, x1, y0, y1] = params.grid_box;
    let mut counts = vec![0usize; n * n];
    let mut inside = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1_000_000 {
        let z0: f64 = StandardNormal.sample(&mut rng);
        let z1: f64 = StandardNormal.sample(&mut rng);
        let s = [
            params.taste_mean[0] + l00 * z0,
            params.taste_mean[1] + l10 * z0 + l11 * z1,
        ];
        if !(x0..x1).contains(&s[0]) || !(y0..y1).contains(&s[1]) {
            continue;
        }
        let a = (((s[0] - x0) / (x1 - x0)) * n as f64) as usize;
        let b = (((s[1] - y0) / (y1 - y0)) * n as f64) as usize;
        counts[a.min(n - 1) * n + b.min(n - 1)] += 1;
        inside += 1;
    }
    for (k, g) in grid.iter().enumerate() {
        let freq = counts[k] as f64 / inside as f64;
        assert!((g.weight - freq).abs() <= 0.01, "cell {k}: weight {} vs frequency {freq}", g.weight);
    }
}

#[test]
fn monte_carlo_error_shrinks_like_one_over_root_samples() {
    let params = ParkingParams::default();
    let profiles = synthetic_profiles(5, 4);
    let p = PriceVector(vec![0.6, 0.8]);
    let small = continuous_ml_revenue(&params, &profiles, &p, 1_000, 1).unwrap();
    let large = continuous_ml_revenue(&params, &profiles, &p, 100_000, 1).unwrap();
    let ratio = small.std_error / large.std_error;
    assert!((7.0..14.0).contains(&ratio), "standard-error ratio {ratio}");
    assert!((small.mean - large.mean).abs() <= 4.0 * small.std_error);
}

#[test]
fn parking_instances_are_reproducible_and_sized() {
    let a = parking_instance(4, 6, 3).unwrap();
    assert_eq!(a, parking_instance(4, 6, 3).unwrap());
    assert_ne!(a, parking_instance(5, 6, 3).unwrap());
    assert_eq!((a.customers(), a.classes(), a.num_priced()), (6, 9, 2));
    assert_eq!(parking_instance(4, 6, 1).unwrap().classes(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generated_instances_are_valid(seed in any::<u64>(), products in 1usize..6, segments in 1usize..9, n_grid in 1usize..6) {
        prop_assert!(random_instance(seed, products, segments).is_ok());
        prop_assert!(parking_instance(seed, 3, n_grid).is_ok());
    }
}
