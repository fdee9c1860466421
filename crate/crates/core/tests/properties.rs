use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use oa_reduce::evolve::{
    counter_based_crossover, map_of_ones_crossover, random_balanced_mask, run_ga, swap_mutation, GaConfig,
};
use oa_reduce::fitness::{deviation_vector, minkowski_fitness, FitnessConfig, FitnessEvaluator};
use oa_reduce::oa::{
    column_subsets, is_orthogonal_array, parity_check_array, parse, remove_rows, replicate_and_shuffle, serialize,
    tuple_counts, OrthogonalArray,
};
use oa_reduce::oracle::{binomial, exhaustive_search, OracleOptions};
use oa_reduce::RemovalMask;

fn multiset<'a>(rows: impl Iterator<Item = &'a [u8]>) -> BTreeMap<Vec<u8>, usize> {
    let mut m = BTreeMap::new();
    for r in rows {
        *m.entry(r.to_vec()).or_insert(0) += 1;
    }
    m
}

/// Random binary array of `rows x cols` at strength `t`.
fn arb_array() -> impl Strategy<Value = OrthogonalArray> {
    (1usize..=5, 1usize..=24).prop_flat_map(|(cols, rows)| {
        (1..=cols, prop::collection::vec(prop::collection::vec(0u8..2, cols), rows))
            .prop_map(move |(t, data)| OrthogonalArray::new(&data, cols, 2, t).unwrap())
    })
}

/// A replicated parity-check instance with a random valid mask.
fn arb_instance() -> impl Strategy<Value = (OrthogonalArray, usize, RemovalMask)> {
    (1usize..=3, 2usize..=3, any::<u64>(), any::<u64>()).prop_flat_map(|(t, lambda, seed, mask_seed)| {
        (1..lambda).prop_map(move |target| {
            let arr = replicate_and_shuffle(&parity_check_array(t).unwrap(), lambda, seed).unwrap();
            let p = arr.n_rows() - target * (1 << t);
            let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
            let mask = random_balanced_mask(arr.n_rows(), p, &mut rng).unwrap();
            (arr, target, mask)
        })
    })
}

/// Squared-deviation reference: for every column subset, every tuple value,
/// loop over kept rows and count matches.
fn reference_l2(arr: &OrthogonalArray, mask: &RemovalMask, target: usize) -> f64 {
    let t = arr.strength();
    let mut sum = 0i64;
    for cols in column_subsets(arr.n_cols(), t) {
        for v in 0..1usize << t {
            let mut hits = 0i64;
            for (i, row) in arr.rows().enumerate() {
                if mask.get(i) {
                    continue;
                }
                let matches = cols.iter().enumerate().all(|(d, &c)| row[c] as usize == (v >> (t - 1 - d)) & 1);
                hits += matches as i64;
            }
            let d = hits - target as i64;
            sum += d * d;
        }
    }
    (sum as f64).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tuple_counts_sum_to_row_count(arr in arb_array()) {
        for cols in column_subsets(arr.n_cols(), arr.strength()) {
            let table = tuple_counts(&arr, &cols).unwrap();
            prop_assert_eq!(table.counts.iter().sum::<usize>(), arr.n_rows());
        }
    }

    #[test]
    fn text_round_trip(arr in arb_array()) {
        prop_assert_eq!(parse(&serialize(&arr)).unwrap(), arr);
    }

    #[test]
    fn replication_preserves_oa_property(arr in arb_array(), m in 1usize..4, seed: u64) {
        let rep = replicate_and_shuffle(&arr, m, seed).unwrap();
        prop_assert_eq!(rep.n_rows(), m * arr.n_rows());
        prop_assert_eq!(is_orthogonal_array(&rep), is_orthogonal_array(&arr));
        let mut expected = multiset(arr.rows());
        expected.values_mut().for_each(|c| *c *= m);
        prop_assert_eq!(multiset(rep.rows()), expected);
    }

    #[test]
    fn parity_replicas_are_oas(t in 1usize..=6, m in 1usize..=4, seed: u64) {
        let rep = replicate_and_shuffle(&parity_check_array(t).unwrap(), m, seed).unwrap();
        prop_assert!(is_orthogonal_array(&rep));
        prop_assert_eq!(rep.params().unwrap().index, m);
    }

    #[test]
    fn removal_partitions_the_rows((arr, _target, mask) in arb_instance()) {
        let kept = remove_rows(&arr, &mask).unwrap();
        let mut union = multiset(kept.rows());
        for (i, r) in arr.rows().enumerate() {
            if mask.get(i) {
                *union.entry(r.to_vec()).or_insert(0) += 1;
            }
        }
        prop_assert_eq!(union, multiset(arr.rows()));
    }

    #[test]
    fn zero_fitness_iff_oa((arr, target, mask) in arb_instance()) {
        let f = minkowski_fitness(&arr, &mask, target, 2.0).unwrap();
        prop_assert!(f.value() >= 0.0);
        prop_assert_eq!(f.is_optimal(), is_orthogonal_array(&remove_rows(&arr, &mask).unwrap()));
    }

    #[test]
    fn deviation_blocks_sum_to_zero((arr, target, mask) in arb_instance()) {
        let dev = deviation_vector(&arr, &mask, target).unwrap();
        for block in dev.blocks() {
            prop_assert_eq!(block.iter().sum::<i64>(), 0);
        }
    }

    #[test]
    fn euclidean_matches_reference((arr, target, mask) in arb_instance()) {
        let f = minkowski_fitness(&arr, &mask, target, 2.0).unwrap().value();
        prop_assert_eq!(f, reference_l2(&arr, &mask, target));
        let eval = FitnessEvaluator::new(&arr, target, FitnessConfig::default()).unwrap();
        prop_assert_eq!(eval.evaluate(&mask), f);
    }

    #[test]
    fn fitness_is_permutation_invariant((arr, target, mask) in arb_instance(), seed: u64) {
        let mut perm: Vec<usize> = (0..arr.n_rows()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let f = minkowski_fitness(&arr, &mask, target, 2.0).unwrap();
        let g = minkowski_fitness(&arr.permuted(&perm), &mask.permuted(&perm), target, 2.0).unwrap();
        prop_assert_eq!(f, g);
    }

    #[test]
    fn fitness_ignores_column_subset_order((arr, target, mask) in arb_instance(), seed: u64) {
        let dev = deviation_vector(&arr, &mask, target).unwrap();
        let mut blocks: Vec<&[i64]> = dev.blocks().collect();
        blocks.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let reordered: Vec<i64> = blocks.concat();
        let f = minkowski_fitness(&arr, &mask, target, 2.0).unwrap().value();
        prop_assert_eq!(oa_reduce::fitness::minkowski_norm(&reordered, 2.0), f);
    }

    #[test]
    fn operators_preserve_weight(n in 2usize..80, frac in 0.0f64..1.0, seed: u64) {
        let p = 1 + ((n - 2) as f64 * frac) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_balanced_mask(n, p, &mut rng).unwrap();
        let b = random_balanced_mask(n, p, &mut rng).unwrap();
        prop_assert_eq!(a.weight(), p);

        let child = map_of_ones_crossover(&a, &b, &mut rng).unwrap();
        prop_assert_eq!(child.weight(), p);
        prop_assert!(child.ones().iter().all(|&i| a.get(i) || b.get(i)));

        let child = counter_based_crossover(&a, &b, &mut rng).unwrap();
        prop_assert_eq!(child.weight(), p);

        let mutant = swap_mutation(&a, &mut rng).unwrap();
        prop_assert_eq!(mutant.weight(), p);
        prop_assert_eq!(mutant.hamming_distance(&a), 2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ga_respects_budget_and_oracle(seed: u64, instance_seed: u64, budget in 20usize..400) {
        let arr = replicate_and_shuffle(&parity_check_array(3).unwrap(), 2, instance_seed).unwrap();
        let cfg = GaConfig { population_size: 20, evaluation_budget: budget, seed, record_trace: true, ..GaConfig::default() };
        let rep = run_ga(&arr, 1, &cfg).unwrap();
        prop_assert!(rep.evaluations_used <= budget);
        if !rep.success {
            prop_assert_eq!(rep.evaluations_used, budget);
        }
        prop_assert_eq!(rep.best_mask.weight(), 8);
        let trace = rep.fitness_trace.unwrap();
        prop_assert!(trace.windows(2).all(|w| w[1].best_fitness <= w[0].best_fitness));
        prop_assert_eq!(minkowski_fitness(&arr, &rep.best_mask, 1, 2.0).unwrap().value(), rep.best_fitness);
    }
}

#[test]
fn oracle_histogram_covers_the_space() {
    for (t, lambda, target) in [(2, 2, 1), (2, 3, 1), (2, 3, 2), (3, 2, 1), (1, 4, 2)] {
        let arr = replicate_and_shuffle(&parity_check_array(t).unwrap(), lambda, 9).unwrap();
        let rep = exhaustive_search(&arr, target, &OracleOptions::default()).unwrap();
        let n = arr.n_rows() as u64;
        let p = (arr.n_rows() - target * (1 << t)) as u64;
        assert_eq!(rep.masks_enumerated, binomial(n, p).unwrap());
        assert_eq!(rep.fitness_histogram.iter().map(|b| b.count).sum::<u64>(), rep.masks_enumerated);
        assert_eq!(rep.min_fitness, 0.0);
        for m in &rep.optimal_masks {
            assert!(minkowski_fitness(&arr, m, target, 2.0).unwrap().is_optimal());
        }
    }
}

#[test]
fn oracle_optimum_count_matches_row_choice_count() {
    // each distinct row keeps λ′ of its λ copies: C(λ, λ′)^(2^t) optima
    for (t, lambda, target) in [(2, 2, 1), (2, 3, 1), (2, 3, 2), (3, 2, 1), (2, 4, 2)] {
        let arr = replicate_and_shuffle(&parity_check_array(t).unwrap(), lambda, 1).unwrap();
        let rep = exhaustive_search(&arr, target, &OracleOptions::default()).unwrap();
        let expected = binomial(lambda as u64, target as u64).unwrap().pow(1 << t);
        assert_eq!(rep.optimal_count, expected, "t={t} λ={lambda} λ′={target}");
    }
}

#[test]
fn oracle_does_not_depend_on_row_order() {
    let base = replicate_and_shuffle(&parity_check_array(2).unwrap(), 3, 0).unwrap();
    let a = exhaustive_search(&base, 1, &OracleOptions::default()).unwrap();
    for seed in 1..4 {
        let other = replicate_and_shuffle(&base, 1, seed).unwrap();
        let b = exhaustive_search(&other, 1, &OracleOptions::default()).unwrap();
        assert_eq!(a.min_fitness, b.min_fitness);
        assert_eq!(a.optimal_count, b.optimal_count);
        assert_eq!(a.fitness_histogram, b.fitness_histogram);
    }
}

#[test]
fn oracle_is_thread_count_independent() {
    let arr = replicate_and_shuffle(&parity_check_array(3).unwrap(), 2, 77).unwrap();
    let run =
        |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                exhaustive_search(&arr, 1, &OracleOptions { listing_cap: 50, ..Default::default() }).unwrap()
            })
        };
    assert_eq!(run(1), run(4));
}
