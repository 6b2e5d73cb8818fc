use battbayes_core::app::split::train_count;
use battbayes_core::app::{split, SplitError, SplitMode};
use proptest::prelude::*;

fn fades(n: usize) -> impl Strategy<Value = Vec<(usize, f64)>> {
    prop::collection::vec(0.0..100.0f64, n).prop_map(|f| f.into_iter().enumerate().collect())
}

fn mode() -> impl Strategy<Value = SplitMode> {
    prop_oneof![Just(SplitMode::Random), Just(SplitMode::Sequential)]
}

proptest! {
    #[test]
    fn partition_is_disjoint_and_exhaustive(
        items in (2usize..120).prop_flat_map(fades),
        ratio in 0.05..0.95f64,
        mode in mode(),
        seed in any::<u64>(),
    ) {
        let n = items.len();
        match split(&items, ratio, mode, seed, |x| x.1) {
            Ok((train, test)) => {
                prop_assert_eq!(train.len(), train_count(n, ratio));
                let mut ids: Vec<usize> = train.iter().chain(&test).map(|x| x.0).collect();
                ids.sort_unstable();
                prop_assert_eq!(ids, (0..n).collect::<Vec<_>>());
                if mode == SplitMode::Sequential {
                    let max_train = train.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
                    let min_test = test.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
                    prop_assert!(max_train <= min_test);
                }
            }
            Err(SplitError::TooFewPoints { .. }) => {
                let k = train_count(n, ratio);
                prop_assert!(k == 0 || k == n);
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn random_split_is_seed_deterministic(items in fades(40), seed in any::<u64>()) {
        let a = split(&items, 0.7, SplitMode::Random, seed, |x| x.1).unwrap();
        let b = split(&items, 0.7, SplitMode::Random, seed, |x| x.1).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn invalid_ratios_are_rejected(items in fades(10), ratio in prop_oneof![-5.0..=0.0f64, 1.0..5.0f64]) {
        prop_assert!(matches!(
            split(&items, ratio, SplitMode::Random, 0, |x| x.1),
            Err(SplitError::InvalidRatio(_))
        ));
    }
}

#[test]
fn split_counts_for_82_points() {
    assert_eq!(train_count(82, 0.85), 70);
    assert_eq!(train_count(82, 0.70), 57);
    assert_eq!(train_count(82, 0.55), 45);
    assert_eq!(train_count(82, 0.40), 33);
}

#[test]
fn sequential_example() {
    let items = [(0, 3.0), (1, 1.0), (2, 4.0), (3, 2.0)];
    let (train, test) = split(&items, 0.5, SplitMode::Sequential, 0, |x| x.1).unwrap();
    assert_eq!(train, vec![(1, 1.0), (3, 2.0)]);
    assert_eq!(test, vec![(0, 3.0), (2, 4.0)]);
}
