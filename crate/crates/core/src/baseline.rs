//! Comparison scorers: leave-one-out Pearson chi-squared, Whipple's index and
//! Myers' blended index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvorError};
use crate::hist::{dtv, ensure_shared_bins, Histogram};
use crate::model::{label_of, rank_descending, ScoreMethod, ScoreReport};
use crate::numeric::compensated_sum;

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Report {
    pub label: String,
    pub chi2: f64,
    pub rank: usize,
}

/// Chi-squared of one histogram against the bin shares of all the others.
///
/// `column_sums` and `grand_total` are taken over the whole set, including `h`.
pub fn leave_one_out_chi2(h: &Histogram, column_sums: &[u64], grand_total: u64, epsilon: f64) -> Result<f64> {
    let size = h.total();
    let rest = grand_total - size;
    if rest == 0 {
        return Err(TvorError::LeaveOneOutEmpty);
    }
    let scale = size as f64 / rest as f64;
    Ok(compensated_sum(h.counts().iter().zip(column_sums).map(|(&o, &b)| {
        let expected = (b - o) as f64 * scale + epsilon;
        let diff = o as f64 - expected;
        diff * diff / expected
    })))
}

/// Scores every histogram against the pooled remainder of the set.
pub fn run_chi2_baseline(hists: &[Histogram], epsilon: f64) -> Result<Vec<Chi2Report>> {
    if hists.len() < 2 {
        return Err(TvorError::TooFewHistograms {
            required: 2,
            found: hists.len(),
        });
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(TvorError::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let bins = ensure_shared_bins(hists)?;
    let mut column_sums = vec![0u64; bins];
    for h in hists {
        for (s, &c) in column_sums.iter_mut().zip(h.counts()) {
            *s += c;
        }
    }
    let grand_total: u64 = column_sums.iter().sum();
    let scores = hists
        .par_iter()
        .map(|h| leave_one_out_chi2(h, &column_sums, grand_total, epsilon))
        .collect::<Result<Vec<_>>>()?;
    let ranks = rank_descending(&scores);
    Ok(hists
        .iter()
        .enumerate()
        .map(|(i, h)| Chi2Report {
            label: label_of(h, i),
            chi2: scores[i],
            rank: ranks[i],
        })
        .collect())
}

/// Chi-squared reports in the common score schema.
pub fn chi2_score_reports(hists: &[Histogram], reports: &[Chi2Report]) -> Vec<ScoreReport> {
    hists
        .iter()
        .zip(reports)
        .map(|(h, r)| ScoreReport {
            label: r.label.clone(),
            size: h.total(),
            dtv: dtv(h),
            predicted: None,
            score: r.chi2,
            rank: r.rank,
            method: ScoreMethod::Chi2,
        })
        .collect()
}

fn in_range(values: &[i64], range: Option<(i64, i64)>) -> Result<Vec<i64>> {
    match range {
        None => Ok(values.to_vec()),
        Some((lo, hi)) if lo > hi => Err(TvorError::InvalidParameter(format!(
            "empty range [{lo}, {hi}]"
        ))),
        Some((lo, hi)) => Ok(values.iter().copied().filter(|v| (lo..=hi).contains(v)).collect()),
    }
}

/// `500 * share of values ending in 0 or 5`, restricted to `range` if given.
///
/// 100 means no preference for those digits, 500 means every value has one.
pub fn whipple_index(values: &[i64], range: Option<(i64, i64)>) -> Result<f64> {
    let kept = in_range(values, range)?;
    if kept.is_empty() {
        return Err(TvorError::NoValuesInRange);
    }
    let heaped = kept.iter().filter(|v| v.rem_euclid(5) == 0).count();
    Ok(500.0 * heaped as f64 / kept.len() as f64)
}

/// Myers' blended index.
///
/// Decades run from the one holding the smallest value (or `range.0`) to the
/// one holding the largest (or `range.1`). With `D` decades, the first sum
/// counts terminal digit `d` over the lowest `D - 1` decades and the second
/// over the highest `D - 1`; they are blended with weights `d + 1` and
/// `9 - d`. The result is half the summed absolute deviation of each digit's
/// percentage share from 10, between 0 and 90.
pub fn myers_index(values: &[i64], range: Option<(i64, i64)>) -> Result<f64> {
    let kept = in_range(values, range)?;
    if kept.is_empty() {
        return Err(TvorError::NoValuesInRange);
    }
    let (lo, hi) = match range {
        Some(r) => r,
        None => (*kept.iter().min().unwrap(), *kept.iter().max().unwrap()),
    };
    let base = lo.div_euclid(10);
    let top = hi.div_euclid(10);
    let decades = (top - base + 1) as usize;
    if decades < 2 {
        return Err(TvorError::InsufficientSpan(format!(
            "values {lo}..={hi} cover a single decade; at least two are needed"
        )));
    }
    let mut grid = vec![[0u64; 10]; decades];
    for v in kept {
        grid[(v.div_euclid(10) - base) as usize][v.rem_euclid(10) as usize] += 1;
    }
    let blended: Vec<f64> = (0..10)
        .map(|d| {
            let first: u64 = grid[..decades - 1].iter().map(|row| row[d]).sum();
            let second: u64 = grid[1..].iter().map(|row| row[d]).sum();
            (d + 1) as f64 * first as f64 + (9 - d) as f64 * second as f64
        })
        .collect();
    let total = compensated_sum(blended.iter().copied());
    if total == 0.0 {
        return Err(TvorError::InsufficientSpan("blended counts are all zero".into()));
    }
    Ok(0.5 * compensated_sum(blended.iter().map(|b| (100.0 * b / total - 10.0).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(c: &[u64]) -> Histogram {
        Histogram::new(c.to_vec()).unwrap()
    }

    #[test]
    fn identical_histograms_score_near_zero() {
        let r = run_chi2_baseline(&[h(&[10, 20, 30]), h(&[10, 20, 30])], DEFAULT_EPSILON).unwrap();
        assert!(r.iter().all(|x| x.chi2 < 1e-3 && x.chi2 >= 0.0));
        assert_eq!(r[0].rank, 0);
        assert_eq!(r[1].rank, 1);
    }

    #[test]
    fn disjoint_pair_by_hand() {
        let eps = DEFAULT_EPSILON;
        let r = run_chi2_baseline(&[h(&[10, 0]), h(&[0, 10])], eps).unwrap();
        let hand = (10.0 - eps).powi(2) / eps + (10.0 + eps).powi(2) / (10.0 + eps);
        assert!((r[0].chi2 - hand).abs() / hand < 1e-12);
        assert!((r[0].chi2 - 1e8).abs() / 1e8 < 1e-3);
    }

    #[test]
    fn whole_data_rejected() {
        assert_eq!(
            run_chi2_baseline(&[h(&[10, 5]), h(&[0, 0])], DEFAULT_EPSILON),
            Err(TvorError::LeaveOneOutEmpty)
        );
        assert!(run_chi2_baseline(&[h(&[1])], DEFAULT_EPSILON).is_err());
        assert!(run_chi2_baseline(&[h(&[1, 2]), h(&[2, 1])], 0.0).is_err());
    }

    #[test]
    fn whipple_extremes() {
        let heaped: Vec<i64> = (0..40).map(|i| 1850 + 5 * i).collect();
        assert_eq!(whipple_index(&heaped, None).unwrap(), 500.0);
        let flat: Vec<i64> = (1850..1950).collect();
        assert_eq!(whipple_index(&flat, None).unwrap(), 100.0);
        assert_eq!(whipple_index(&flat, Some((1900, 1909))).unwrap(), 100.0);
        assert_eq!(whipple_index(&[1, 2], Some((5, 9))), Err(TvorError::NoValuesInRange));
        assert_eq!(whipple_index(&[-5, -3], None).unwrap(), 250.0);
    }

    #[test]
    fn myers_extremes() {
        let flat: Vec<i64> = (1850..1950).collect();
        assert!(myers_index(&flat, None).unwrap().abs() < 1e-12);
        let one_digit: Vec<i64> = (0..10).map(|i| 1853 + 10 * i).collect();
        assert!((myers_index(&one_digit, None).unwrap() - 90.0).abs() < 1e-12);
        assert!(matches!(
            myers_index(&[1901, 1905], None),
            Err(TvorError::InsufficientSpan(_))
        ));
    }

    #[test]
    fn myers_small_corpus_by_hand() {
        // decades 0..=2; digits chosen so the blend is easy to follow
        let values = [0, 0, 1, 5, 5, 5, 10, 12, 15, 15, 20, 21, 22, 25, 25, 27, 3, 13, 23, 9];
        // first sum (decades 0,1), second sum (decades 1,2), per digit 0..9
        let first = [3, 1, 1, 2, 0, 5, 0, 0, 0, 1];
        let second = [2, 1, 2, 2, 0, 4, 0, 1, 0, 0];
        let blended: Vec<f64> = (0..10)
            .map(|d| ((d + 1) * first[d] + (9 - d) * second[d]) as f64)
            .collect();
        let total: f64 = blended.iter().sum();
        let hand = 0.5 * blended.iter().map(|b| (100.0 * b / total - 10.0).abs()).sum::<f64>();
        assert!((myers_index(&values, None).unwrap() - hand).abs() < 1e-12);
    }
}
