//! Property tests for the reward algebra: bounds, monotonicity, the
//! push-pull behavior of the mean/min mix, and the length decay's shape.

use cvtg_core::metrics::OcrOutput;
use cvtg_core::reward::{base_reward, noise_penalty, ocr_reward, RewardConfig};
use proptest::prelude::*;

fn score_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 1..8)
}

proptest! {
    #[test]
    fn base_reward_bounded_by_min_and_mean(scores in score_vec(), lambda in 0.0f64..=1.0) {
        let r = base_reward(&scores, lambda).unwrap();
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r >= min - 1e-12);
        prop_assert!(r <= mean + 1e-12);
        prop_assert!(mean <= max + 1e-12);
    }

    #[test]
    fn base_reward_monotone_in_each_score(
        scores in score_vec(),
        lambda in 0.0f64..=1.0,
        idx in any::<prop::sample::Index>(),
        bump in 0.0f64..=1.0,
    ) {
        let before = base_reward(&scores, lambda).unwrap();
        let mut bumped = scores.clone();
        let i = idx.index(bumped.len());
        bumped[i] = (bumped[i] + bump).min(1.0);
        let after = base_reward(&bumped, lambda).unwrap();
        prop_assert!(after >= before - 1e-12);
    }

    #[test]
    fn base_reward_strictly_tracks_the_minimum(
        scores in prop::collection::vec(0.2f64..=1.0, 1..8),
        lambda in 0.05f64..=1.0,
    ) {
        // Raising the unique minimum strictly raises the reward.
        let mut raised = scores.clone();
        let (arg_min, _) = raised
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.total_cmp(b))
            .unwrap();
        raised[arg_min] = (raised[arg_min] + 0.1).min(1.0);
        prop_assume!(raised[arg_min] > scores[arg_min]);
        let before = base_reward(&scores, lambda).unwrap();
        let after = base_reward(&raised, lambda).unwrap();
        prop_assert!(after > before);
    }

    #[test]
    fn zeroing_a_positive_score_strictly_hurts(
        scores in prop::collection::vec(0.1f64..=1.0, 1..8),
        lambda in 0.05f64..=1.0,
        idx in any::<prop::sample::Index>(),
    ) {
        let before = base_reward(&scores, lambda).unwrap();
        let mut cut = scores.clone();
        let i = idx.index(cut.len());
        cut[i] = 0.0;
        let after = base_reward(&cut, lambda).unwrap();
        prop_assert!(after < before);
    }

    #[test]
    fn noise_penalty_shape(l_target in 1usize..400, delta in 1.0f64..3.0) {
        // Flat at 1.0 through the tolerance zone, then strictly decreasing
        // toward zero.
        let boundary = (delta * l_target as f64).floor() as usize;
        let mut last = f64::INFINITY;
        for l_pred in [0, boundary / 2, boundary] {
            let p = noise_penalty(l_pred, l_target, delta).unwrap();
            prop_assert_eq!(p, 1.0);
        }
        for l_pred in [boundary + 1, boundary * 2 + 2, boundary * 10 + 10, boundary * 100 + 100] {
            let p = noise_penalty(l_pred, l_target, delta).unwrap();
            prop_assert!(p <= last);
            prop_assert!(p > 0.0 && p <= 1.0);
            last = p;
        }
        let huge = noise_penalty(l_target * 100_000, l_target, delta).unwrap();
        prop_assert!(huge < 1e-4);
    }
}

#[test]
fn reward_is_permutation_invariant_over_targets() {
    let ocr = OcrOutput::from_texts(["open late", "sale today", "gibberish"]);
    let config = RewardConfig::default();
    let forward = ocr_reward(&["sale", "open", "late"], &ocr, &config).unwrap();
    let backward = ocr_reward(&["late", "open", "sale"], &ocr, &config).unwrap();
    assert_eq!(forward.r_ocr, backward.r_ocr);
    assert_eq!(forward.r_base, backward.r_base);
    assert_eq!(forward.l_target, backward.l_target);
}
