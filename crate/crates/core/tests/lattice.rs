mod common;

use common::{chi_square_uniform, four_paths, histogram, total_variation, Problem, CHI2_CRIT_001};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tokopt::lattice::Segmentation;

fn problem(seed: u64, integer: bool) -> Problem {
    Problem::random(&mut ChaCha8Rng::seed_from_u64(seed), 10, integer)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn viterbi_is_the_best_enumerated_path(seed in any::<u64>(), integer in any::<bool>()) {
        let p = problem(seed, integer);
        let ranked = p.ranked();
        prop_assert_eq!(p.lattice().viterbi_best(), ranked[0].clone());
    }

    #[test]
    fn nbest_is_a_prefix_of_the_ranking(seed in any::<u64>(), integer in any::<bool>(), k in 1usize..=8) {
        let p = problem(seed, integer);
        let ranked = p.ranked();
        let got = p.lattice().nbest(k);
        prop_assert_eq!(&got[..], &ranked[..k.min(ranked.len())]);
    }

    #[test]
    fn nbest_scores_do_not_increase(seed in any::<u64>()) {
        let p = problem(seed, false);
        let scored = p.lattice().nbest_scored(8);
        for w in scored.windows(2) {
            prop_assert!(w[0].1 >= w[1].1);
        }
        for (seg, score) in &scored {
            prop_assert_eq!(p.lattice().path_score(seg), Some(*score));
        }
    }

    #[test]
    fn every_path_covers_the_sentence(seed in any::<u64>()) {
        let p = problem(seed, true);
        let n = p.chars.len();
        for seg in p.lattice().all_paths() {
            prop_assert_eq!(seg.char_len(), n);
            prop_assert!(Segmentation::from_spans(seg.spans().to_vec(), n).is_ok());
        }
        prop_assert_eq!(p.lattice().all_paths().len(), p.all_paths().len());
    }

    #[test]
    fn log_partition_matches_enumeration(seed in any::<u64>(), alpha in 0.0f64..2.0) {
        let p = problem(seed, false);
        let paths = p.all_paths();
        let max = paths.iter().map(|(_, s)| alpha * s).fold(f64::NEG_INFINITY, f64::max);
        let z = max + paths.iter().map(|(_, s)| (alpha * s - max).exp()).sum::<f64>().ln();
        prop_assert!((p.lattice().log_partition(alpha) - z).abs() < 1e-9);
    }
}

#[test]
fn thousand_lattices_agree_with_brute_force() {
    for seed in 0..1000u64 {
        let p = problem(seed, seed % 2 == 0);
        let ranked = p.ranked();
        let lattice = p.lattice();
        assert_eq!(lattice.viterbi_best(), ranked[0], "seed {seed}");
        let k = 1 + (seed as usize % 8);
        assert_eq!(lattice.nbest(k), ranked[..k.min(ranked.len())].to_vec(), "seed {seed}");
    }
}

#[test]
fn sampling_matches_path_posterior() {
    let (p, segs, probs) = four_paths();
    assert_eq!(segs.len(), 4);
    let counts = histogram(&p, &segs, 1.0, 20_000, 7);
    assert!(total_variation(&counts, &probs) < 0.02, "{counts:?} vs {probs:?}");
}

#[test]
fn zero_temperature_sampling_is_uniform() {
    let (p, segs, _) = four_paths();
    let counts = histogram(&p, &segs, 0.0, 20_000, 8);
    assert!(chi_square_uniform(&counts) < CHI2_CRIT_001[2], "{counts:?}");
}
