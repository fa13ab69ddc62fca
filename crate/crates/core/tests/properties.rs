use proptest::prelude::*;
use tvor_core::baseline::{myers_index, run_chi2_baseline, whipple_index};
use tvor_core::edtv::{f2_exact, f2_exact_fraction, probabilities_dtv};
use tvor_core::hist::{apply_heaping, subsample};
use tvor_core::model::{
    fit_model, rank_descending, score_d1, score_d2, DtvModel, McRow, McTable,
};
use tvor_core::{circular_dtv, dtv, Histogram, RngSeed};

fn counts(max_bins: usize) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0u64..50, 1..max_bins)
}

proptest! {
    #[test]
    fn dtv_bounded_and_reversal_invariant(c in counts(30)) {
        let h = Histogram::new(c.clone()).unwrap();
        prop_assert!(dtv(&h) <= 2 * h.total());
        let mut r = c;
        r.reverse();
        prop_assert_eq!(dtv(&Histogram::new(r).unwrap()), dtv(&h));
    }

    #[test]
    fn circular_dtv_even_rotation_invariant(c in prop::collection::vec(0u64..50, 2..30), k in 0usize..30) {
        let h = Histogram::new(c.clone()).unwrap();
        let cd = circular_dtv(&h).unwrap();
        prop_assert!(cd >= dtv(&h));
        prop_assert_eq!(cd % 2, 0);
        let mut rot = c;
        let len = rot.len();
        rot.rotate_left(k % len);
        prop_assert_eq!(circular_dtv(&Histogram::new(rot).unwrap()).unwrap(), cd);
    }

    #[test]
    fn heaping_conserves_and_feeds_targets(
        c in counts(40),
        fraction in 0.0f64..=1.0,
        period in 1usize..8,
        seed in any::<u64>(),
    ) {
        let h = Histogram::new(c).unwrap();
        let out = apply_heaping(&h, fraction, period, RngSeed::new(seed, 0)).unwrap();
        prop_assert_eq!(out.total(), h.total());
        prop_assert_eq!(out.bins(), h.bins());
        for i in (period - 1..h.bins()).step_by(period) {
            prop_assert!(out.counts()[i] >= h.counts()[i]);
        }
    }

    #[test]
    fn subsample_is_a_sub_multiset(c in counts(20), frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let h = Histogram::new(c).unwrap();
        let size = (frac * h.total() as f64).floor() as u64;
        let s = subsample(&h, size, RngSeed::new(seed, 0)).unwrap();
        prop_assert_eq!(s.total(), size);
        prop_assert!(s.counts().iter().zip(h.counts()).all(|(a, b)| a <= b));
        prop_assert!(subsample(&h, h.total() + 1, RngSeed::new(seed, 0)).is_err());
    }

    #[test]
    fn theoretical_dtv_reversal_invariant(w in prop::collection::vec(0.01f64..1.0, 2..20)) {
        let total: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / total).collect();
        let mut r = p.clone();
        r.reverse();
        let a = probabilities_dtv(&p).unwrap();
        let b = probabilities_dtv(&r).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn two_bin_float_matches_fraction(size in 1u64..10_000) {
        let (num, den) = f2_exact_fraction(size);
        // ratio of big integers via their leading digits
        let shift = num.bits().max(den.bits()).saturating_sub(60);
        let ratio = (&num >> shift).to_string().parse::<f64>().unwrap()
            / (&den >> shift).to_string().parse::<f64>().unwrap();
        prop_assert!((f2_exact(size) - ratio).abs() / ratio < 1e-12);
    }

    #[test]
    fn d1_reorder_invariant_and_lipschitz(
        c in prop::collection::vec(prop::collection::vec(0u64..40, 6), 2..8),
        a in -0.5f64..2.0,
        b in -3.0f64..3.0,
        delta in 0.0f64..50.0,
    ) {
        let model = DtvModel::new(a, b);
        let hists: Vec<Histogram> = c.into_iter().map(|v| Histogram::new(v).unwrap()).collect();
        let forward: Vec<Option<f64>> = hists.iter().map(|h| score_d1(h, &model).ok()).collect();
        let backward: Vec<Option<f64>> = hists.iter().rev().map(|h| score_d1(h, &model).ok()).collect();
        let mut backward = backward;
        backward.reverse();
        prop_assert_eq!(&forward, &backward);
        for h in hists.iter().filter(|h| h.total() > 0) {
            let base = model.normalized_deviation(h.total(), dtv(h) as f64).unwrap();
            let moved = model.normalized_deviation(h.total(), dtv(h) as f64 + delta).unwrap();
            prop_assert!((moved - base).abs() <= delta / (h.total() as f64).sqrt() + 1e-12);
        }
    }

    #[test]
    fn d1_scales_by_sqrt2_under_doubling(c in prop::collection::vec(0u64..40, 2..12), a in 0.0f64..2.0) {
        let h = Histogram::new(c).unwrap();
        prop_assume!(h.total() > 0);
        let model = DtvModel::new(a, 0.0);
        let one = score_d1(&h, &model).unwrap();
        let two = score_d1(&h.scaled(2), &model).unwrap();
        prop_assert!((two - std::f64::consts::SQRT_2 * one).abs() < 1e-9 * (1.0 + one));
    }

    #[test]
    fn ranks_invariant_under_positive_scaling(s in prop::collection::vec(-100.0f64..100.0, 1..40), k in 0.001f64..1000.0) {
        let scaled: Vec<f64> = s.iter().map(|x| x * k).collect();
        prop_assert_eq!(rank_descending(&s), rank_descending(&scaled));
    }

    #[test]
    fn d2_of_table_mean_is_zero(c in prop::collection::vec(0u64..40, 2..12), std in 0.01f64..10.0) {
        let h = Histogram::new(c).unwrap();
        let mut table = McTable::default();
        table.rows.insert(h.total(), McRow { mean: dtv(&h) as f64, std, trials: 10 });
        prop_assert_eq!(score_d2(&h, &table, false).unwrap(), 0.0);
    }

    #[test]
    fn fit_recovers_random_curves(
        a in -2.0f64..5.0,
        b in -10.0f64..10.0,
        mut sizes in prop::collection::btree_set(1u64..100_000, 2..15),
    ) {
        let pts: Vec<(u64, f64)> = std::mem::take(&mut sizes)
            .into_iter()
            .map(|n| (n, a * n as f64 + b * (n as f64).sqrt()))
            .collect();
        let m = fit_model(&pts).unwrap();
        prop_assert!((m.a - a).abs() < 1e-7 && (m.b - b).abs() < 1e-6, "{} {}", m.a, m.b);
    }

    #[test]
    fn chi2_permutation_invariant(
        c in prop::collection::vec(prop::collection::vec(1u64..40, 5), 3..8),
        k in 0usize..8,
    ) {
        let hists: Vec<Histogram> = c.iter().map(|v| Histogram::new(v.clone()).unwrap()).collect();
        let mut rotated = hists.clone();
        let len = rotated.len();
        rotated.rotate_left(k % len);
        let a = run_chi2_baseline(&hists, 1e-6).unwrap();
        let b = run_chi2_baseline(&rotated, 1e-6).unwrap();
        for (i, r) in a.iter().enumerate() {
            let j = (i + len - k % len) % len;
            prop_assert!((r.chi2 - b[j].chi2).abs() <= 1e-9 * r.chi2.max(1.0));
        }
    }

    #[test]
    fn indices_permutation_and_decade_shift_invariant(
        mut v in prop::collection::vec(1800i64..2000, 20..200),
        shift in -5i64..5,
        seed in any::<u64>(),
    ) {
        let w0 = whipple_index(&v, None).unwrap();
        let m0 = myers_index(&v, None).ok();
        let shifted: Vec<i64> = v.iter().map(|x| x + 10 * shift).collect();
        prop_assert_eq!(whipple_index(&shifted, None).unwrap(), w0);
        let ms = myers_index(&shifted, None).ok();
        prop_assert_eq!(ms.is_some(), m0.is_some());
        if let (Some(a), Some(b)) = (m0, ms) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let len = v.len();
        v.rotate_left((seed % len as u64) as usize);
        v.swap(0, len - 1);
        prop_assert_eq!(whipple_index(&v, None).unwrap(), w0);
        if let (Some(a), Ok(b)) = (m0, myers_index(&v, None)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
