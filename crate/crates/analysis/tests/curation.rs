use carewatch_analysis::{
    change_points, coverage, default_penalty, fill, impute, penalized_cost, segment, Grid, ImputePolicy, SlotState,
};
use carewatch_core::{DeviceKind, DeviceSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn sensor() -> DeviceSpec {
    DeviceSpec::new("temp-stove", DeviceKind::Temperature)
}

/// Integer-valued smooth signal, as a sensor quantizing to whole units.
fn smooth(k: usize) -> f64 {
    (2000.0 + 800.0 * (k as f64 / 40.0).sin() + 300.0 * (k as f64 / 7.0).cos()).round()
}

/// Exact linear interpolation in integer arithmetic, rounded once.
fn oracle(l: f64, r: f64, i: usize, n: usize) -> f64 {
    let num = l as i128 * (n - i) as i128 + r as i128 * i as i128;
    num as f64 / n as f64
}

#[test]
fn deleted_samples_reimpute_to_exact_linear_interpolation() {
    let grid = Grid { first: 0, interval: 300, len: 288 };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let k = rng.random_range(1..=6usize);
        let at = rng.random_range(1..288 - k);
        let samples: Vec<(i64, f64)> =
            (0..288).filter(|j| !(at..at + k).contains(j)).map(|j| (j as i64 * 300, smooth(j))).collect();
        let s = impute(&samples, grid, ImputePolicy::default());
        let (l, r) = (smooth(at - 1), smooth(at + k));
        for j in 0..k {
            let slot = s.slots[at + j];
            assert_eq!(slot.state, SlotState::Imputed);
            assert_eq!(slot.value, Some(oracle(l, r, j + 1, k + 1)), "k={k} at={at} j={j}");
        }
        assert_eq!(s.count(SlotState::Original), 288 - k);
    }
}

#[test]
fn seven_missing_samples_exceed_thirty_minutes() {
    let grid = Grid { first: 0, interval: 300, len: 20 };
    let samples: Vec<(i64, f64)> = (0..20).filter(|j| !(5..12).contains(j)).map(|j| (j * 300, 1.0)).collect();
    let s = impute(&samples, grid, ImputePolicy::default());
    assert_eq!((s.count(SlotState::Missing), s.count(SlotState::Imputed)), (7, 0));
}

#[test]
fn six_hour_gap_and_clean_series() {
    let grid = Grid { first: 0, interval: 300, len: 288 };
    let full: Vec<(i64, f64)> = (0..288).map(|j| (j * 300, smooth(j as usize))).collect();
    let s = impute(&full, grid, ImputePolicy::default());
    assert_eq!(s.valued().collect::<Vec<_>>(), full);
    assert_eq!(s.count(SlotState::Original), 288);

    let holed: Vec<_> = full.iter().copied().filter(|(t, _)| !(6 * 3600..12 * 3600).contains(t)).collect();
    let s = impute(&holed, grid, ImputePolicy::default());
    assert_eq!(s.count(SlotState::Missing), 72);
    assert_eq!(s.count(SlotState::Imputed), 0);
}

#[test]
fn dropout_interval_recovered_as_one_gap() {
    let range = (0, 86_400);
    let offset = 137;
    let ts: Vec<i64> = (0..288).map(|k| offset + k * 300).filter(|t| !(6 * 3600..12 * 3600).contains(t)).collect();
    let c = coverage(&ts, &sensor(), range);
    assert_eq!(c.gaps.len(), 1);
    let g = &c.gaps[0];
    assert!((g.start - 6 * 3600).abs() <= 300 && (g.end - 12 * 3600).abs() <= 300, "{g:?}");
    assert_eq!(c.expected, c.observed + c.missed());
}

proptest! {
    #[test]
    fn imputation_is_idempotent(keep in prop::collection::vec(any::<bool>(), 2..200), gap_s in 0i64..7200) {
        let len = keep.len();
        let grid = Grid { first: 1000, interval: 300, len };
        let samples: Vec<(i64, f64)> = keep
            .iter()
            .enumerate()
            .filter(|(_, k)| **k)
            .map(|(j, _)| (1000 + j as i64 * 300, smooth(j)))
            .collect();
        let policy = ImputePolicy { small_gap_s: gap_s };
        let once = impute(&samples, grid, policy);
        prop_assert_eq!(fill(once.clone(), policy), once.clone());
        // Every slot is accounted for exactly once.
        prop_assert_eq!(
            once.count(SlotState::Original) + once.count(SlotState::Imputed) + once.count(SlotState::Missing),
            len
        );
        prop_assert_eq!(once.count(SlotState::Original), samples.len());
    }

    #[test]
    fn coverage_conserves_slots(keep in prop::collection::vec(any::<bool>(), 288), offset in 0i64..300) {
        let ts: Vec<i64> =
            keep.iter().enumerate().filter(|(_, k)| **k).map(|(j, _)| offset + j as i64 * 300).collect();
        let c = coverage(&ts, &sensor(), (0, 86_400));
        prop_assert_eq!(c.expected, 288);
        prop_assert_eq!(c.expected, c.observed + c.missed());
        for g in &c.gaps {
            prop_assert!(g.end > g.start);
            prop_assert!(g.expected_samples_missed >= 2);
        }
        for w in c.gaps.windows(2) {
            prop_assert!(w[0].end < w[1].start);
        }
    }

    #[test]
    fn lower_penalty_never_removes_change_points(counts in prop::collection::vec(0u64..20, 2..80)) {
        let mut last: Option<Vec<usize>> = None;
        for beta in [40.0, 20.0, 10.0, 5.0, 2.0, 1.0, 0.5, 0.0] {
            let cps = change_points(&counts, beta);
            if let Some(prev) = &last {
                prop_assert!(prev.iter().all(|c| cps.contains(c)), "beta {}: {:?} -> {:?}", beta, prev, cps);
            }
            last = Some(cps);
        }
    }
}

/// Minimum penalized cost over every segmentation, by enumerating split
/// subsets.
fn exhaustive(counts: &[u64], beta: f64) -> f64 {
    let n = counts.len();
    (0u32..1 << (n - 1))
        .map(|mask| {
            let cps: Vec<usize> = (1..n).filter(|k| mask & (1 << (k - 1)) != 0).collect();
            penalized_cost(counts, &cps, beta)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn small_instances_match_exhaustive_search_within_the_penalty() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut exact = 0;
    let trials = 400;
    for _ in 0..trials {
        let n = rng.random_range(2..=12usize);
        let split = rng.random_range(1..n);
        let (a, b) = (rng.random_range(0.5..8.0), rng.random_range(0.5..8.0));
        let counts: Vec<u64> =
            (0..n).map(|i| Poisson::new(if i < split { a } else { b }).unwrap().sample(&mut rng) as u64).collect();
        let beta = default_penalty(n);
        let best = exhaustive(&counts, beta);
        let got = penalized_cost(&counts, &change_points(&counts, beta), beta);
        assert!(got >= best - 1e-9);
        assert!(got <= best + beta + 1e-9, "{counts:?}: {got} vs {best}");
        exact += usize::from((got - best).abs() < 1e-9);
    }
    println!("binary segmentation optimal on {exact}/{trials} instances");
}

#[test]
fn examples_from_synthetic_streams() {
    // Step 1 -> 10 events per bin at bin 50 of 100.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut events = Vec::new();
    for bin in 0..100i64 {
        let rate = if bin < 50 { 1.0 } else { 10.0 };
        for _ in 0..Poisson::new(rate).unwrap().sample(&mut rng) as u64 {
            events.push(bin * 300 + rng.random_range(0..300));
        }
    }
    let segs = segment(&events, (0, 30_000), 300, None);
    assert!(segs.iter().any(|s| (48..=52).contains(&s.bins.0)), "{segs:?}");
    assert_eq!(segs.first().unwrap().bins.0, 0);
    assert_eq!(segs.last().unwrap().bins.1, 100);

    // Empty bins only.
    assert_eq!(segment(&[], (0, 30_000), 300, None).len(), 1);
}
