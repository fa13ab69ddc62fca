//! Checks against independent brute-force evaluations written here from the
//! definitions, sharing no code with the library.

use tvor_core::baseline::{myers_index, run_chi2_baseline};
use tvor_core::edtv::{f2_exact, f2_exact_fraction, f_exact, f_oracle, probabilities_dtv, DEFAULT_ORACLE_LIMIT};
use tvor_core::{DistributionSpec, Histogram};

/// Visits every sequence of `size` draws over `bins` bins and yields the bin
/// counts together with the sequence's bin indices.
fn for_each_sequence(bins: usize, size: usize, mut f: impl FnMut(&[usize], &[u64])) {
    let mut seq = vec![0usize; size];
    loop {
        let mut counts = vec![0u64; bins];
        for &b in &seq {
            counts[b] += 1;
        }
        f(&seq, &counts);
        let mut i = 0;
        loop {
            if i == size {
                return;
            }
            seq[i] += 1;
            if seq[i] < bins {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
    }
}

fn dtv_of(counts: &[u64]) -> u64 {
    counts.windows(2).map(|w| w[0].abs_diff(w[1])).sum()
}

/// Mean DTV over all `bins^size` equally likely sequences, as an exact ratio.
fn brute_force_uniform(bins: usize, size: usize) -> (u128, u128) {
    let mut total: u128 = 0;
    let mut count: u128 = 0;
    for_each_sequence(bins, size, |_, counts| {
        total += dtv_of(counts) as u128;
        count += 1;
    });
    (total, count)
}

#[test]
fn double_sum_matches_sequence_enumeration() {
    for bins in 2..=5 {
        for size in 0..=7 {
            if (bins as u64).pow(size as u32) > 200_000 {
                continue;
            }
            let (num, den) = brute_force_uniform(bins, size);
            let truth = num as f64 / den as f64;
            let exact = f_exact(bins, size as u64).unwrap();
            let oracle = f_oracle(bins, size as u64, None, DEFAULT_ORACLE_LIMIT).unwrap();
            let scale = truth.max(1e-300);
            assert!((exact - truth).abs() / scale < 1e-12, "n={bins} N={size}: {exact} vs {truth}");
            assert!((oracle - truth).abs() / scale < 1e-12, "oracle n={bins} N={size}");
        }
    }
}

#[test]
fn two_bin_fraction_matches_enumeration() {
    for size in 1..=16 {
        let (num, den) = brute_force_uniform(2, size);
        let (a, b) = f2_exact_fraction(size as u64);
        // a/b == num/den
        assert_eq!(a * den, b * num, "N={size}");
        assert!((f2_exact(size as u64) - num as f64 / den as f64).abs() < 1e-12);
    }
}

#[test]
fn weighted_enumeration_matches_oracle() {
    let probs = [0.1, 0.5, 0.15, 0.25];
    for size in 1..=6 {
        let mut expect = 0.0;
        for_each_sequence(probs.len(), size, |seq, counts| {
            let p: f64 = seq.iter().map(|&b| probs[b]).product();
            expect += p * dtv_of(counts) as f64;
        });
        let got = f_oracle(probs.len(), size as u64, Some(&probs), DEFAULT_ORACLE_LIMIT).unwrap();
        assert!((got - expect).abs() < 1e-12, "N={size}: {got} vs {expect}");
    }
}

#[test]
fn triangular_probabilities_from_the_cdf() {
    // CDF of the triangular law on [0,1] with mode 1/2
    let cdf = |x: f64| if x <= 0.5 { 2.0 * x * x } else { 1.0 - 2.0 * (1.0 - x) * (1.0 - x) };
    for n in 2..=30 {
        let probs: Vec<f64> = (0..n)
            .map(|i| cdf((i + 1) as f64 / n as f64) - cdf(i as f64 / n as f64))
            .collect();
        let by_hand: f64 = probs.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let spec = DistributionSpec::triangular(0.0, 0.5, 1.0, n).unwrap();
        let lib = tvor_core::edtv::theoretical_dtv(&spec).unwrap();
        assert!((lib - by_hand).abs() < 1e-12, "n={n}");
        assert!((probabilities_dtv(&probs).unwrap() - by_hand).abs() < 1e-15);
    }
}

fn chi2_by_hand(hists: &[Vec<u64>], i: usize, eps: f64) -> f64 {
    let bins = hists[0].len();
    let grand: u64 = hists.iter().flatten().sum();
    let own: u64 = hists[i].iter().sum();
    let mut chi = 0.0;
    for j in 0..bins {
        let others: u64 = hists.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, h)| h[j]).sum();
        let e = others as f64 / (grand - own) as f64 * own as f64 + eps;
        chi += (hists[i][j] as f64 - e).powi(2) / e;
    }
    chi
}

#[test]
fn chi2_matches_direct_evaluation() {
    let raw = vec![vec![12, 7, 3, 0], vec![4, 4, 9, 1], vec![30, 2, 2, 8], vec![0, 0, 5, 5]];
    let hists: Vec<Histogram> = raw.iter().map(|c| Histogram::new(c.clone()).unwrap()).collect();
    for eps in [1e-6, 0.5] {
        let reports = run_chi2_baseline(&hists, eps).unwrap();
        for (i, r) in reports.iter().enumerate() {
            let hand = chi2_by_hand(&raw, i, eps);
            assert!((r.chi2 - hand).abs() <= 1e-9 * hand.max(1.0), "i={i}: {} vs {hand}", r.chi2);
        }
    }
}

#[test]
fn myers_matches_textbook_age_layout() {
    // Ages 10..=89 in the classical layout: the first sum runs over ages
    // 10..=79 and the second over 20..=89 (ages ending in d only).
    let ages: Vec<i64> = (0..800).map(|i| 10 + (i * 37 + i / 7) % 80).collect();
    let count = |lo: i64, hi: i64, d: i64| ages.iter().filter(|&&a| a >= lo && a <= hi && a % 10 == d).count() as f64;
    let blended: Vec<f64> = (0..10)
        .map(|d| (d + 1) as f64 * count(10, 79, d) + (9 - d) as f64 * count(20, 89, d))
        .collect();
    let total: f64 = blended.iter().sum();
    let textbook = 0.5 * blended.iter().map(|b| (100.0 * b / total - 10.0).abs()).sum::<f64>();
    let got = myers_index(&ages, Some((10, 89))).unwrap();
    assert!((got - textbook).abs() < 1e-12, "{got} vs {textbook}");
}
