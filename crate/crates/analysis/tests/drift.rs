mod common;

use std::collections::BTreeMap;

use carewatch_analysis::{
    analyze, attribute, fit_baseline, render_summary, score_window, Direction, Feature, FeatureSeries, ScaleRule,
    ThresholdError, Thresholds,
};
use carewatch_homesim::HomeTemplate;
use chrono::{Days, NaiveDate};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

/// Poisson daily counts; each feature's rate moves from `before` to `after`
/// on day `at`.
fn synthetic(seed: u64, len: usize, at: usize, rates: &[(Feature, f64, f64)]) -> FeatureSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = rates
        .iter()
        .map(|(f, before, after)| {
            let col = (0..len)
                .map(|i| {
                    let rate = if i < at { *before } else { *after };
                    Some(Poisson::new(rate).unwrap().sample(&mut rng).round())
                })
                .collect();
            (f.clone(), col)
        })
        .collect();
    FeatureSeries { subject: "s".into(), start: date("2025-01-01"), len, columns }
}

fn map(series: &FeatureSeries, g: impl Fn(f64) -> f64) -> FeatureSeries {
    let mut out = series.clone();
    for col in out.columns.values_mut() {
        for v in col.iter_mut().flatten() {
            *v = g(*v);
        }
    }
    out
}

type Key = (Feature, NaiveDate, NaiveDate, Direction, u32);

fn keys(series: &FeatureSeries, th: &Thresholds) -> Vec<(Key, f64, f64)> {
    analyze(series, th)
        .unwrap()
        .reports
        .into_iter()
        .map(|r| ((r.feature, r.start, r.end, r.direction, r.persistence), r.effect_size, r.p_value))
        .collect()
}

fn mixed_rates(shift: f64) -> Vec<(Feature, f64, f64)> {
    vec![
        (Feature::FridgeOpenings, 4.0, 4.0 + shift),
        (Feature::Steps, 40.0, (40.0 - 4.0 * shift).max(1.0)),
        (Feature::ShowerEvents, 0.7, 0.7),
        (Feature::MedicineAccesses, 2.0, 2.0 + shift / 2.0),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reports_are_scale_and_shift_equivariant(
        seed in any::<u64>(),
        shift in 0.0f64..6.0,
        k in -3i32..=3,
        offset in -50i32..50,
    ) {
        let s = synthetic(seed, 90 + 84, 100, &mixed_rates(shift));
        let c = 2f64.powi(k);
        let t = map(&s, |v| c * v + f64::from(offset));
        prop_assert_eq!(keys(&s, &Thresholds::default()), keys(&t, &Thresholds::default()));
    }

    #[test]
    fn negation_flips_direction_only(seed in any::<u64>(), shift in 0.0f64..6.0) {
        let s = synthetic(seed, 90 + 84, 100, &mixed_rates(shift));
        let flipped: Vec<_> = keys(&map(&s, |v| -v), &Thresholds::default())
            .into_iter()
            .map(|((f, a, b, d, k), e, p)| {
                let d = if d == Direction::Increase { Direction::Decrease } else { Direction::Increase };
                ((f, a, b, d, k), -e, p)
            })
            .collect();
        prop_assert_eq!(keys(&s, &Thresholds::default()), flipped);
    }

    #[test]
    fn more_persistence_never_adds_reports(seed in any::<u64>(), shift in 0.0f64..6.0, k in 1u32..6) {
        let s = synthetic(seed, 90 + 112, 100, &mixed_rates(shift));
        let lo = analyze(&s, &Thresholds { persistence: k, ..Thresholds::default() }).unwrap();
        let hi = analyze(&s, &Thresholds { persistence: k + 1, ..Thresholds::default() }).unwrap();
        prop_assert!(hi.reports.len() <= lo.reports.len());
        for r in &hi.reports {
            prop_assert!(
                lo.reports.iter().any(|q| q.feature == r.feature && q.start == r.start && q.end == r.end),
                "{} {}..{}", r.feature, r.start, r.end
            );
        }
    }
}

#[test]
fn stationary_window_is_not_flagged() {
    let s = synthetic(3, 90, 90, &[(Feature::FridgeOpenings, 4.0, 4.0)]);
    let th = Thresholds::default();
    let model = fit_baseline(&s, (s.start, s.date(89)), &th);
    let b = &model.features[&Feature::FridgeOpenings];
    // The reference itself, replayed as a window.
    let window: Vec<Option<f64>> = b.reference.iter().map(|v| Some(*v)).collect();
    let score = score_window(b, &window[..28], &th).unwrap();
    assert!(score.p_value > th.alpha, "{score:?}");
    let score = score_window(b, &window, &th).unwrap();
    assert_eq!(score.effect, 0.0);
    assert!((score.p_value - 1.0).abs() < 1e-12);

    let sparse: Vec<Option<f64>> = (0..28).map(|i| (i % 3 == 0).then_some(4.0)).collect();
    assert!(score_window(b, &sparse, &th).is_err());
}

#[test]
fn baseline_scale_rules() {
    let th = Thresholds::default();
    let column = |f: &dyn Fn(usize) -> f64| FeatureSeries {
        subject: "s".into(),
        start: date("2025-01-01"),
        len: 90,
        columns: BTreeMap::from([(Feature::MedicineAccesses, (0..90).map(|i| Some(f(i))).collect())]),
    };
    let fit =
        |s: &FeatureSeries| fit_baseline(s, (s.start, s.date(89)), &th).features[&Feature::MedicineAccesses].clone();

    let b = fit(&column(&|i| (i % 5) as f64));
    assert_eq!((b.rule, b.median), (ScaleRule::Mad, 2.0));
    assert!((b.scale - 1.4826).abs() < 1e-12);

    // Mostly 2 with occasional 3 and 0: MAD is zero, the fallback is the
    // smallest non-zero deviation.
    let b = fit(&column(&|i| match i % 10 {
        0 => 3.0,
        5 => 0.0,
        _ => 2.0,
    }));
    assert_eq!((b.rule, b.scale), (ScaleRule::SmallestDeviation, 1.0));
    assert_eq!(b.effect(&[2.0, 2.0, 0.0, 0.0, 0.0]), -2.0);

    let b = fit(&column(&|_| 2.0));
    assert_eq!(b.rule, ScaleRule::QuasiConstant);
    assert_eq!(b.effect(&[2.0; 28]), 0.0);
    assert_eq!(b.effect(&[1.0, 1.0, 1.0, 2.0]), -1.0);
}

#[test]
fn invalid_thresholds_are_rejected() {
    let s = synthetic(1, 120, 120, &[(Feature::FridgeOpenings, 4.0, 4.0)]);
    let bad = [
        (Thresholds { alpha: 0.0, ..Default::default() }, ThresholdError::Alpha(0.0)),
        (Thresholds { min_effect: -1.0, ..Default::default() }, ThresholdError::Effect(-1.0)),
        (
            Thresholds { persistence: 0, ..Default::default() },
            ThresholdError::TooSmall { field: "persistence", min: 1 },
        ),
        (
            Thresholds { min_window_valued: 1.5, ..Default::default() },
            ThresholdError::Fraction { field: "min_window_valued", value: 1.5 },
        ),
    ];
    for (th, err) in bad {
        assert_eq!(analyze(&s, &th).unwrap_err(), err);
    }
}

#[test]
fn shifted_feature_is_reported_with_its_medians() {
    let s = synthetic(8, 90 + 84, 100, &[(Feature::FridgeOpenings, 8.0, 2.0), (Feature::Steps, 40.0, 40.0)]);
    let res = analyze(&s, &Thresholds::default()).unwrap();
    let fridge: Vec<_> = res.reports.iter().filter(|r| r.feature == Feature::FridgeOpenings).collect();
    assert_eq!(fridge.len(), 1, "{:?}", res.reports);
    let r = fridge[0];
    assert_eq!(r.direction, Direction::Decrease);
    assert!(r.persistence >= 3 && r.p_value <= 0.01 && r.effect_size <= -1.0);
    assert!(r.explanation.contains(&r.reference_median.to_string()), "{}", r.explanation);
    assert!(r.explanation.contains(&r.window_median.to_string()), "{}", r.explanation);
    if res.reports.len() == 1 {
        assert_eq!(r.contributors.len(), 1);
        assert_eq!(r.contributors[0].score, 1.0);
    }
    let text = render_summary(&res);
    assert!(text.contains("fridge-openings decreased"), "{text}");
}

#[test]
fn attribution_credits_the_moving_feature() {
    let s = synthetic(21, 90 + 56, 90, &[(Feature::FridgeOpenings, 8.0, 2.0), (Feature::PantryOpenings, 4.0, 4.0)]);
    let th = Thresholds::default();
    let model = fit_baseline(&s, (s.start, s.date(89)), &th);
    let group = [Feature::FridgeOpenings, Feature::PantryOpenings];
    let a = attribute(&model, &s, &group, (s.date(90), s.date(145)));
    assert_eq!(a[0].feature, Feature::FridgeOpenings);
    assert!(a[0].score > 0.9, "{a:?}");
    assert!((a.iter().map(|x| x.score).sum::<f64>() - 1.0).abs() < 1e-12);

    let single = attribute(&model, &s, &group[..1], (s.date(90), s.date(145)));
    assert_eq!(single[0].score, 1.0);
}

#[test]
fn analysis_is_reproducible() {
    let start = date("2025-01-01");
    let r = run("h-repro", &HomeTemplate::default(), &[("lunch-shift", 100)], start);
    let home = r.home.clone();
    let json = || {
        let fv = features(&home, &r, start, start + Days::new(160), 17);
        serde_json::to_string(&analyze(&FeatureSeries::from_vectors("s", &fv), &Thresholds::default()).unwrap())
            .unwrap()
    };
    assert_eq!(json(), json());
}

#[test]
fn eating_out_at_lunch_lowers_lunch_cooking() {
    // Reference of 90 days, a 14-day ramp, then the first window fully past it.
    let start = date("2025-01-01");
    let onset = 90;
    let th = Thresholds::default();
    let hits: Vec<bool> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let r = run("h-lunch", &HomeTemplate::default(), &[("lunch-shift", onset)], start);
            let home = r.home.clone();
            let fv = features(&home, &r, start, start + Days::new(onset + 14 + 27), seed);
            let s = FeatureSeries::from_vectors("s", &fv);
            let model = fit_baseline(&s, (s.start, s.date(89)), &th);
            let b = &model.features[&Feature::LunchCookingPeaks];
            let col = &s.columns[&Feature::LunchCookingPeaks];
            let at = (onset + 14) as usize;
            let score = score_window(b, &col[at..at + 28], &th).unwrap();
            score.p_value < 0.01 && score.effect < 0.0
        })
        .collect();
    let n = hits.iter().filter(|h| **h).count();
    println!("lunch cooking decrease detected in {n}/100 seeds");
    assert!(n >= 90, "{n}/100");
}
