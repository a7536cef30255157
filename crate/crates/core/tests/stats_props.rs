use dgfdist_core::stats::{a12, factor, mann_whitney_u, summarize, RunTte, StatsError, EXACT_LIMIT};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Twice the U statistic of `x`, by pairwise comparison.
fn u2(x: &[f64], y: &[f64]) -> i64 {
    x.iter()
        .flat_map(|a| y.iter().map(move |b| if a > b { 2 } else if a == b { 1 } else { 0 }))
        .sum()
}

/// Two-sided p by visiting every split of the pooled sample.
fn enumerated_p(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (m, total) = (x.len(), pooled.len());
    let mn = (x.len() * y.len()) as i64;
    let observed = (u2(x, y) - mn).abs();
    let (mut hits, mut all) = (0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let pick = |inside: bool| -> Vec<f64> {
            (0..total).filter(|&i| (mask >> i & 1 == 1) == inside).map(|i| pooled[i]).collect()
        };
        let (a, b) = (pick(true), pick(false));
        all += 1;
        if (u2(&a, &b) - mn).abs() >= observed {
            hits += 1;
        }
    }
    hits as f64 / all as f64
}

fn small_sample() -> impl Strategy<Value = Vec<f64>> {
    // few distinct values so ties are common
    prop::collection::vec((0u8..8).prop_map(f64::from), 1..7)
}

proptest! {
    #[test]
    fn a12_is_complementary(x in small_sample(), y in small_sample()) {
        let s = a12(&x, &y).unwrap() + a12(&y, &x).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn a12_ignores_monotone_transforms(x in small_sample(), y in small_sample()) {
        let f = |v: &Vec<f64>| v.iter().map(|t| (t + 1.0).powi(3) * 7.0 + 2.0).collect::<Vec<_>>();
        prop_assert!((a12(&f(&x), &f(&y)).unwrap() - a12(&x, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn a12_matches_pair_counting(x in small_sample(), y in small_sample()) {
        let want = u2(&x, &y) as f64 / 2.0 / (x.len() * y.len()) as f64;
        prop_assert!((a12(&x, &y).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn exact_p_matches_enumeration(x in small_sample(), y in small_sample()) {
        let mw = mann_whitney_u(&x, &y).unwrap();
        prop_assert!(mw.exact);
        prop_assert!((mw.p_value - enumerated_p(&x, &y)).abs() < 1e-12);
        prop_assert!((mw.u - u2(&x, &y) as f64 / 2.0).abs() < 1e-12);
        let flipped = mann_whitney_u(&y, &x).unwrap();
        prop_assert!((mw.p_value - flipped.p_value).abs() < 1e-12);
    }
}

#[test]
fn large_samples_use_the_normal_approximation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<f64> = (0..14).map(|i| f64::from(i % 9)).collect();
    let y: Vec<f64> = (0..14).map(|i| f64::from(i % 9 + 2)).collect();
    let mw = mann_whitney_u(&x, &y).unwrap();
    assert!(!mw.exact, "C(28, 14) exceeds {EXACT_LIMIT}");
    // permutation estimate of the same two-sided p
    let mut pooled: Vec<f64> = x.iter().chain(&y).copied().collect();
    let observed = (u2(&x, &y) - 196).abs();
    let draws = 20_000;
    let mut hits = 0;
    for _ in 0..draws {
        pooled.shuffle(&mut rng);
        let (a, b) = pooled.split_at(14);
        if (u2(a, b) - 196).abs() >= observed {
            hits += 1;
        }
    }
    let estimate = f64::from(hits) / f64::from(draws);
    assert!((mw.p_value - estimate).abs() < 0.02, "{} vs {estimate}", mw.p_value);
}

#[test]
fn constant_pooled_sample_is_not_significant() {
    let mw = mann_whitney_u(&[5.0; 20], &[5.0; 20]).unwrap();
    assert_eq!(mw.p_value, 1.0);
}

#[test]
fn baseline_against_itself() {
    let runs: Vec<RunTte> = [120.0, 340.0, 90.0, 1000.0]
        .into_iter()
        .map(|tte| RunTte {
            tte,
            reproduced: tte < 1000.0,
        })
        .collect();
    let s = summarize(&runs, &runs).unwrap();
    assert_eq!(s.factor, 1.0);
    assert_eq!(s.a12, 0.5);
    assert_eq!(s.p_value, 1.0);
    assert!(!s.significant);
    assert_eq!(s.runs_reproduced, 3);
    assert_eq!(s.mu_tte_reproduced, Some((120.0 + 340.0 + 90.0) / 3.0));
}

#[test]
fn faster_configuration_scores_above_half() {
    let slow: Vec<RunTte> = (0..10).map(|i| RunTte { tte: 500.0 + f64::from(i), reproduced: true }).collect();
    let fast: Vec<RunTte> = (0..10).map(|i| RunTte { tte: 100.0 + f64::from(i), reproduced: true }).collect();
    let s = summarize(&slow, &fast).unwrap();
    assert!(s.factor > 4.0);
    assert_eq!(s.a12, 1.0);
    assert!(s.significant);
}

#[test]
fn factor_needs_a_positive_other_mean() {
    assert_eq!(factor(10.0, 0.0), Err(StatsError::ZeroMean));
}
