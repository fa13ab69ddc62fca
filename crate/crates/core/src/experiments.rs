//! Seeded experiment harness: synthetic outlier experiments scored by mean
//! outlier rank, the census pipeline, and group-partition analysis.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{run_chi2_baseline, DEFAULT_EPSILON};
use crate::distribution::DistributionSpec;
use crate::error::{Result, TvorError};
use crate::hist::{apply_heaping_with, histogram_from_values, HeapingSource, Histogram};
use crate::model::{
    build_mc_table, fit_model_from_table, rank_descending, run_mc_scores, run_tvor, score_with_model,
    DtvModel, McSource, McTable, RansacParams, ScoreReport, TvorOptions,
};
use crate::numeric::mean_and_std;
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Tvor,
    TvorRansac,
    Chi2,
    /// Uniformly random scores; calibrates the null.
    Random,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Tvor => "tvor",
            Method::TvorRansac => "tvor-ransac",
            Method::Chi2 => "chi2",
            Method::Random => "random",
        })
    }
}

impl FromStr for Method {
    type Err = TvorError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tvor" => Ok(Method::Tvor),
            "tvor-ransac" | "ransac" => Ok(Method::TvorRansac),
            "chi2" | "baseline" => Ok(Method::Chi2),
            "random" => Ok(Method::Random),
            other => Err(TvorError::Parse(format!(
                "unknown method `{other}` (expected tvor, tvor-ransac, chi2 or random)"
            ))),
        }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Tvor, Method::TvorRansac, Method::Chi2, Method::Random]
}

fn default_trials() -> usize {
    1000
}

fn default_inlier_count() -> usize {
    100
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_period() -> usize {
    5
}

/// Experiment description, read from a flat TOML file.
///
/// Distributions use the text syntax of [`DistributionSpec`], e.g.
/// `normal(sigma=0.9, c=5, n=10)`. When `heaping_fraction` is set the
/// outliers are inlier-distribution samples passed through heaping and
/// `outlier` may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub inlier: String,
    #[serde(default = "default_inlier_count")]
    pub inlier_count: usize,
    #[serde(default)]
    pub outlier: Option<String>,
    pub outlier_count: usize,
    pub size_min: u64,
    pub size_max: u64,
    /// Overrides the bin count of both distributions.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub heaping_fraction: Option<f64>,
    #[serde(default = "default_period")]
    pub heaping_period: usize,
    #[serde(default)]
    pub heaping_source: HeapingSource,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub ransac_threshold: Option<f64>,
    #[serde(default)]
    pub ransac_iterations: Option<usize>,
    /// Bin counts to sweep; each point overrides `n`.
    #[serde(default)]
    pub sweep_n: Vec<usize>,
    /// Heaping fractions to sweep.
    #[serde(default)]
    pub sweep_heaping_fraction: Vec<f64>,
    /// Outlier counts to sweep.
    #[serde(default)]
    pub sweep_outlier_count: Vec<usize>,
}

impl ExperimentConfig {
    /// Minimal distribution-outlier configuration.
    pub fn distribution(inlier: &str, outlier: &str, outlier_count: usize) -> Self {
        Self {
            inlier: inlier.to_owned(),
            inlier_count: default_inlier_count(),
            outlier: Some(outlier.to_owned()),
            outlier_count,
            size_min: 500,
            size_max: 1000,
            n: None,
            heaping_fraction: None,
            heaping_period: default_period(),
            heaping_source: HeapingSource::default(),
            trials: default_trials(),
            seed: 0,
            methods: default_methods(),
            epsilon: DEFAULT_EPSILON,
            ransac_threshold: None,
            ransac_iterations: None,
            sweep_n: Vec::new(),
            sweep_heaping_fraction: Vec::new(),
            sweep_outlier_count: Vec::new(),
        }
    }

    /// Minimal heaping configuration.
    pub fn heaping(inlier: &str, outlier_count: usize, fraction: f64, period: usize) -> Self {
        Self {
            outlier: None,
            heaping_fraction: Some(fraction),
            heaping_period: period,
            ..Self::distribution(inlier, inlier, outlier_count)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| TvorError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.inlier_count == 0 || self.outlier_count == 0 {
            return Err(TvorError::InvalidParameter("inlier and outlier counts must be at least 1".into()));
        }
        if self.size_min == 0 || self.size_min > self.size_max {
            return Err(TvorError::InvalidParameter(format!(
                "size range [{}, {}] must be non-empty and positive",
                self.size_min, self.size_max
            )));
        }
        if self.trials == 0 {
            return Err(TvorError::InvalidParameter("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(TvorError::InvalidParameter("no methods to compare".into()));
        }
        if let Some(f) = self.heaping_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(TvorError::InvalidParameter(format!("heaping fraction {f} outside [0, 1]")));
            }
            if self.heaping_period == 0 {
                return Err(TvorError::InvalidParameter("heaping period must be positive".into()));
            }
        } else if self.outlier.is_none() {
            return Err(TvorError::InvalidParameter(
                "either `outlier` or `heaping_fraction` is required".into(),
            ));
        }
        let (inlier, outlier) = self.specs()?;
        let (ni, no) = (inlier.bins()?, outlier.bins()?);
        if ni != no {
            return Err(TvorError::BinMismatch {
                expected: ni,
                found: no,
                context: Some("inlier and outlier distributions".into()),
            });
        }
        if inlier.binning != outlier.binning {
            return Err(TvorError::InvalidParameter(
                "inlier and outlier distributions must use the same binning".into(),
            ));
        }
        Ok(())
    }

    /// Inlier and outlier distributions with the `n` override applied.
    pub fn specs(&self) -> Result<(DistributionSpec, DistributionSpec)> {
        let inlier: DistributionSpec = self.inlier.parse()?;
        let outlier: DistributionSpec = match (&self.outlier, self.heaping_fraction) {
            (Some(text), None) => text.parse()?,
            _ => inlier.clone(),
        };
        match self.n {
            Some(n) => Ok((inlier.with_bins(n)?, outlier.with_bins(n)?)),
            None => Ok((inlier, outlier)),
        }
    }

    pub fn total(&self) -> usize {
        self.inlier_count + self.outlier_count
    }

    fn ransac(&self) -> RansacParams {
        let mut p = RansacParams::default();
        if let Some(t) = self.ransac_threshold {
            p.threshold = t;
        }
        if let Some(i) = self.ransac_iterations {
            p.iterations = i;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMeanRank {
    pub method: Method,
    pub mean_rank: f64,
    /// Standard error of the mean over trials.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRankResult {
    pub methods: Vec<MethodMeanRank>,
    /// `(K - 1) / 2` for `K` outliers.
    pub ideal: f64,
    /// `(M - 1) / 2` for `M` histograms in total.
    pub random_null: f64,
    pub trials: usize,
    pub outliers: usize,
    pub total: usize,
}

impl MeanRankResult {
    pub fn mean_rank(&self, method: Method) -> Option<f64> {
        self.methods.iter().find(|m| m.method == method).map(|m| m.mean_rank)
    }
}

/// Mean 0-based rank of the histograms flagged in `is_outlier`.
pub fn mean_outlier_rank(scores: &[f64], is_outlier: &[bool]) -> f64 {
    let ranks = rank_descending(scores);
    let picked: Vec<f64> = ranks
        .iter()
        .zip(is_outlier)
        .filter(|(_, &o)| o)
        .map(|(&r, _)| r as f64)
        .collect();
    picked.iter().sum::<f64>() / picked.len() as f64
}

/// Scores of one method over a set, in input order.
pub fn method_scores(method: Method, hists: &[Histogram], cfg: &ExperimentConfig, seed: RngSeed) -> Result<Vec<f64>> {
    Ok(match method {
        Method::Tvor | Method::TvorRansac => {
            let options = TvorOptions {
                ransac: (method == Method::TvorRansac).then(|| cfg.ransac()),
                augment: None,
                seed: seed.derive(&[1]).base,
            };
            run_tvor(hists, &options)?.reports.into_iter().map(|r| r.score).collect()
        }
        Method::Chi2 => run_chi2_baseline(hists, cfg.epsilon)?
            .into_iter()
            .map(|r| r.chi2)
            .collect(),
        Method::Random => {
            let mut rng = seed.derive(&[2]).rng();
            (0..hists.len()).map(|_| rng.random::<f64>()).collect()
        }
    })
}

fn draw_size<R: Rng + ?Sized>(cfg: &ExperimentConfig, rng: &mut R) -> u64 {
    rng.random_range(cfg.size_min..=cfg.size_max)
}

/// The pooled inlier and outlier histograms of one trial.
pub fn generate_trial(cfg: &ExperimentConfig, trial: usize) -> Result<(Vec<Histogram>, Vec<bool>)> {
    let (inlier, outlier) = cfg.specs()?;
    let seed = RngSeed::new(cfg.seed, 0).derive(&[trial as u64]);
    let mut hists = Vec::with_capacity(cfg.total());
    let mut flags = Vec::with_capacity(cfg.total());
    for k in 0..cfg.total() {
        let is_outlier = k >= cfg.inlier_count;
        let mut rng = seed.derive(&[0, k as u64]).rng();
        let size = draw_size(cfg, &mut rng);
        let spec = if is_outlier { &outlier } else { &inlier };
        let mut h = spec.sample_with(size, &mut rng)?;
        if is_outlier {
            if let Some(fraction) = cfg.heaping_fraction {
                let heap_seed = seed.derive(&[3, k as u64]);
                h = apply_heaping_with(&h, fraction, cfg.heaping_period, cfg.heaping_source, heap_seed)?;
            }
        }
        hists.push(h.with_label(format!("{}{k}", if is_outlier { "out" } else { "in" })));
        flags.push(is_outlier);
    }
    Ok((hists, flags))
}

/// Mean outlier rank per method over `cfg.trials` seeded trials.
///
/// Every method scores the identical generated set in a trial. Trial `t`
/// draws from streams derived from `(seed, t)` only, so the result does not
/// depend on the number of threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MeanRankResult> {
    cfg.validate()?;
    let per_trial = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let (hists, flags) = generate_trial(cfg, t)?;
            let seed = RngSeed::new(cfg.seed, 1).derive(&[t as u64]);
            cfg.methods
                .iter()
                .map(|&m| Ok(mean_outlier_rank(&method_scores(m, &hists, cfg, seed)?, &flags)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let values: Vec<f64> = per_trial.iter().map(|row| row[i]).collect();
            let (mean, std) = mean_and_std(&values);
            MethodMeanRank {
                method,
                mean_rank: mean,
                std_error: if values.len() > 1 { std / (values.len() as f64).sqrt() } else { 0.0 },
            }
        })
        .collect();
    Ok(MeanRankResult {
        methods,
        ideal: (cfg.outlier_count as f64 - 1.0) / 2.0,
        random_null: (cfg.total() as f64 - 1.0) / 2.0,
        trials: cfg.trials,
        outliers: cfg.outlier_count,
        total: cfg.total(),
    })
}

/// Outliers drawn from a different distribution.
pub fn run_distribution_experiment(cfg: &ExperimentConfig) -> Result<MeanRankResult> {
    if cfg.heaping_fraction.is_some() {
        return Err(TvorError::InvalidParameter(
            "distribution experiments take an outlier distribution, not heaping".into(),
        ));
    }
    run_experiment(cfg)
}

/// Outliers are heaped samples of the inlier distribution.
pub fn run_heaping_experiment(cfg: &ExperimentConfig) -> Result<MeanRankResult> {
    if cfg.heaping_fraction.is_none() {
        return Err(TvorError::InvalidParameter("heaping experiments need `heaping_fraction`".into()));
    }
    run_experiment(cfg)
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub outliers: usize,
    pub heaping_fraction: Option<f64>,
    pub method: Method,
    pub mean_rank: f64,
    pub std_error: f64,
    pub ideal: f64,
    pub random_null: f64,
}

/// Runs the cross product of the sweep lists (an empty list keeps the
/// configured value).
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let ns: Vec<Option<usize>> = if cfg.sweep_n.is_empty() {
        vec![cfg.n]
    } else {
        cfg.sweep_n.iter().map(|&n| Some(n)).collect()
    };
    let fractions: Vec<Option<f64>> = if cfg.sweep_heaping_fraction.is_empty() {
        vec![cfg.heaping_fraction]
    } else {
        cfg.sweep_heaping_fraction.iter().map(|&f| Some(f)).collect()
    };
    let counts: Vec<usize> = if cfg.sweep_outlier_count.is_empty() {
        vec![cfg.outlier_count]
    } else {
        cfg.sweep_outlier_count.clone()
    };
    let mut rows = Vec::new();
    for &n in &ns {
        for &fraction in &fractions {
            for &count in &counts {
                let point = ExperimentConfig {
                    n,
                    heaping_fraction: fraction,
                    outlier_count: count,
                    ..cfg.clone()
                };
                let result = run_experiment(&point)?;
                let bins = point.specs()?.0.bins()?;
                for m in &result.methods {
                    rows.push(SweepRow {
                        n: bins,
                        outliers: count,
                        heaping_fraction: fraction,
                        method: m.method,
                        mean_rank: m.mean_rank,
                        std_error: m.std_error,
                        ideal: result.ideal,
                        random_null: result.random_null,
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSource {
    /// Fit `a N + b sqrt(N)` on the lists themselves.
    #[default]
    FitOnLists,
    /// Fit on Monte Carlo means of subsamples of the reference.
    McFromReference,
}

impl FromStr for ModelSource {
    type Err = TvorError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fit-on-lists" | "lists" => Ok(ModelSource::FitOnLists),
            "mc-from-reference" | "reference" => Ok(ModelSource::McFromReference),
            other => Err(TvorError::Parse(format!("unknown model source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusOptions {
    pub model_source: ModelSource,
    pub ransac: Option<RansacParams>,
    /// Values of a large reference population, used for `d''`.
    pub reference: Option<Vec<i64>>,
    pub mc_trials: usize,
    /// Points on the log-spaced size grid of the Monte Carlo table.
    pub mc_grid: usize,
    pub extrapolate: bool,
    pub seed: u64,
}

impl Default for CensusOptions {
    fn default() -> Self {
        Self {
            model_source: ModelSource::FitOnLists,
            ransac: None,
            reference: None,
            mc_trials: 1000,
            mc_grid: 40,
            extrapolate: false,
            seed: 0,
        }
    }
}

/// `(N, dtv, predicted)` scatter row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub label: String,
    #[serde(rename = "N")]
    pub size: u64,
    pub dtv: u64,
    pub predicted: f64,
}

/// Count of scores in `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusResult {
    /// Year range covered by the bins.
    pub range: (i64, i64),
    pub histograms: Vec<Histogram>,
    pub model: DtvModel,
    pub d1: Vec<ScoreReport>,
    pub d2: Option<Vec<ScoreReport>>,
    pub mc_table: Option<McTable>,
    pub plot_rows: Vec<PlotRow>,
    pub score_distribution: Vec<ScoreBin>,
}

/// `count` roughly log-spaced integers from `lo` to `hi` inclusive.
pub fn log_spaced_sizes(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    if lo >= hi || count < 2 {
        return vec![lo.max(1)];
    }
    let (a, b) = ((lo.max(1) as f64).ln(), (hi as f64).ln());
    let mut sizes: Vec<u64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as u64)
        .collect();
    sizes[0] = lo.max(1);
    sizes[count - 1] = hi;
    sizes.dedup();
    sizes
}

/// Histogram of scores with `bins` equal-width bins from 0 to the maximum.
pub fn score_distribution(scores: &[f64], bins: usize) -> Vec<ScoreBin> {
    let max = scores.iter().copied().fold(0.0, f64::max);
    if bins == 0 || scores.is_empty() {
        return Vec::new();
    }
    let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
    let mut out: Vec<ScoreBin> = (0..bins)
        .map(|i| ScoreBin {
            lo: i as f64 * width,
            hi: (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &s in scores {
        let idx = ((s / width) as usize).min(bins - 1);
        out[idx].count += 1;
    }
    out
}

/// Builds one per-year histogram per list over the common year range and
/// scores them.
///
/// Empty lists are skipped with a warning. The range spans all lists and the
/// reference, if any.
pub fn run_census_pipeline(lists: &[(String, Vec<i64>)], options: &CensusOptions) -> Result<CensusResult> {
    let kept: Vec<&(String, Vec<i64>)> = lists
        .iter()
        .filter(|(label, values)| {
            if values.is_empty() {
                log::warn!("skipping empty list {label}");
            }
            !values.is_empty()
        })
        .collect();
    if kept.len() < 2 {
        return Err(TvorError::TooFewHistograms {
            required: 2,
            found: kept.len(),
        });
    }
    let all = kept
        .iter()
        .flat_map(|(_, v)| v.iter())
        .chain(options.reference.iter().flatten());
    let (lo, hi) = all.fold((i64::MAX, i64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let histograms = kept
        .iter()
        .map(|(label, values)| Ok(histogram_from_values(values, lo, hi)?.with_label(label.clone())))
        .collect::<Result<Vec<_>>>()?;

    let mc_table = match &options.reference {
        Some(reference) => {
            let pool = histogram_from_values(reference, lo, hi)?.with_label("reference");
            let min = histograms.iter().map(Histogram::total).min().unwrap();
            let max = histograms.iter().map(Histogram::total).max().unwrap().min(pool.total());
            let sizes = log_spaced_sizes(min.min(max), max, options.mc_grid);
            Some(build_mc_table(
                &McSource::Pooled(pool),
                &sizes,
                options.mc_trials,
                RngSeed::new(options.seed, 7),
            )?)
        }
        None => None,
    };

    let (model, d1) = match options.model_source {
        ModelSource::FitOnLists => {
            let run = run_tvor(
                &histograms,
                &TvorOptions {
                    ransac: options.ransac,
                    augment: None,
                    seed: options.seed,
                },
            )?;
            (run.model, run.reports)
        }
        ModelSource::McFromReference => {
            let table = mc_table.as_ref().ok_or_else(|| {
                TvorError::InvalidParameter("a reference population is needed for the Monte Carlo model".into())
            })?;
            let model = fit_model_from_table(table)?;
            let reports = score_with_model(&histograms, &model)?;
            (model, reports)
        }
    };
    let d2 = match &mc_table {
        Some(table) => Some(run_mc_scores(&histograms, table, options.extrapolate)?),
        None => None,
    };
    let plot_rows = d1
        .iter()
        .map(|r| PlotRow {
            label: r.label.clone(),
            size: r.size,
            dtv: r.dtv,
            predicted: r.predicted.unwrap_or(f64::NAN),
        })
        .collect();
    let scores: Vec<f64> = d1.iter().map(|r| r.score).collect();
    Ok(CensusResult {
        range: (lo, hi),
        histograms,
        model,
        d1,
        d2,
        mc_table,
        plot_rows,
        score_distribution: score_distribution(&scores, 20),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionResult {
    /// Reports of the added group histograms.
    pub groups: Vec<ScoreReport>,
    /// Reports over the extended set, in input order followed by the groups.
    pub all: Vec<ScoreReport>,
    pub model: DtvModel,
}

/// Splits `records` by group, appends the per-group histograms to
/// `comparison` and re-scores the extended set.
///
/// `lo` is the value of the first bin of the comparison histograms. Groups
/// without values are skipped.
pub fn run_partition_analysis(
    comparison: &[Histogram],
    lo: i64,
    records: &[(i64, String)],
    options: &TvorOptions,
) -> Result<PartitionResult> {
    if comparison.is_empty() {
        return Err(TvorError::TooFewHistograms { required: 1, found: 0 });
    }
    let bins = crate::hist::ensure_shared_bins(comparison)?;
    let hi = lo + bins as i64 - 1;
    let mut groups: Vec<(String, Vec<i64>)> = Vec::new();
    for (value, group) in records {
        match groups.iter_mut().find(|(g, _)| g == group) {
            Some((_, values)) => values.push(*value),
            None => groups.push((group.clone(), vec![*value])),
        }
    }
    let mut extended = comparison.to_vec();
    for (group, values) in &groups {
        if values.is_empty() {
            log::warn!("skipping empty group {group}");
            continue;
        }
        extended.push(histogram_from_values(values, lo, hi)?.with_label(group.clone()));
    }
    if extended.len() == comparison.len() {
        return Err(TvorError::InvalidParameter("no group has any values".into()));
    }
    let run = run_tvor(&extended, options)?;
    Ok(PartitionResult {
        groups: run.reports[comparison.len()..].to_vec(),
        all: run.reports,
        model: run.model,
    })
}
