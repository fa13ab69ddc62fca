use rand::Rng;
use tvor_core::experiments::{
    mean_outlier_rank, run_census_pipeline, run_experiment, CensusOptions, ExperimentConfig, Method,
    ModelSource,
};
use tvor_core::model::{run_tvor, TvorOptions};
use tvor_core::{DistributionSpec, RngSeed};

fn config(methods: Vec<Method>, trials: usize) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        r#"
inlier = "normal(sigma=0.9, c=5, n=10)"
outlier = "normal(sigma=3, c=5, n=10)"
inlier_count = 40
outlier_count = 4
size_min = 50
size_max = 2000
trials = {trials}
seed = 11
methods = [{}]
"#,
        methods.iter().map(|m| format!("\"{m}\"")).collect::<Vec<_>>().join(", ")
    ))
    .unwrap()
}

#[test]
fn random_scorer_sits_at_the_null() {
    let result = run_experiment(&config(vec![Method::Random], 2000)).unwrap();
    let r = &result.methods[0];
    assert_eq!(result.random_null, 21.5);
    assert!((r.mean_rank - result.random_null).abs() < 4.0 * r.std_error, "{r:?}");
}

#[test]
fn mean_ranks_within_bounds_and_reproducible() {
    let cfg = config(vec![Method::Tvor, Method::TvorRansac, Method::Chi2, Method::Random], 40);
    let a = run_experiment(&cfg).unwrap();
    let worst = (a.total - 1) as f64 - a.ideal;
    for m in &a.methods {
        assert!(m.mean_rank >= a.ideal && m.mean_rank <= worst, "{m:?}");
    }
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = one.install(|| run_experiment(&cfg)).unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let c = four.install(|| run_experiment(&cfg)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn outlier_rank_extremes() {
    assert_eq!(mean_outlier_rank(&[9.0, 8.0, 1.0, 0.0], &[true, true, false, false]), 0.5);
    assert_eq!(mean_outlier_rank(&[9.0, 8.0, 1.0, 0.0], &[false, false, true, true]), 2.5);
}

#[test]
fn scores_follow_their_histograms_under_reordering() {
    let spec = DistributionSpec::uniform(12).unwrap();
    let hists: Vec<_> = (0..30u64)
        .map(|i| spec.sample(100 + 37 * i, RngSeed::new(3, i)).unwrap())
        .collect();
    let forward = run_tvor(&hists, &TvorOptions::default()).unwrap();
    let mut reversed = hists.clone();
    reversed.reverse();
    let backward = run_tvor(&reversed, &TvorOptions::default()).unwrap();
    for (i, r) in forward.reports.iter().enumerate() {
        let s = &backward.reports[hists.len() - 1 - i];
        assert!((r.score - s.score).abs() <= 1e-9 * (1.0 + r.score), "{i}");
    }
}

fn std_dev(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

#[test]
fn census_score_spread_is_stable_across_sizes() {
    // birth years with a smooth hump, list sizes from 30 to 30000
    let mut rng = RngSeed::new(21, 0).rng();
    let lists: Vec<(String, Vec<i64>)> = (0..200)
        .map(|i| {
            let size = (30.0 * 1000f64.powf(i as f64 / 199.0)).round() as usize;
            let values = (0..size)
                .map(|_| {
                    let u: f64 = rng.random::<f64>() + rng.random::<f64>() + rng.random::<f64>();
                    1900 + (u / 3.0 * 80.0) as i64
                })
                .collect();
            (format!("list{i:03}"), values)
        })
        .collect();
    let reference: Vec<i64> = lists.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let options = CensusOptions {
        model_source: ModelSource::McFromReference,
        reference: Some(reference),
        mc_trials: 300,
        mc_grid: 25,
        seed: 5,
        ..CensusOptions::default()
    };
    let result = run_census_pipeline(&lists, &options).unwrap();
    for scores in [result.d1.clone(), result.d2.clone().unwrap()] {
        let mut by_size: Vec<(u64, f64)> = scores.iter().map(|r| (r.size, r.score)).collect();
        by_size.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let decile = by_size.len() / 10;
        let low: Vec<f64> = by_size[..decile].iter().map(|p| p.1).collect();
        let high: Vec<f64> = by_size[by_size.len() - decile..].iter().map(|p| p.1).collect();
        let (a, b) = (std_dev(&low), std_dev(&high));
        let ratio = a.max(b) / a.min(b);
        assert!(ratio < 3.0, "spread ratio {ratio} ({a} vs {b})");
    }
}
