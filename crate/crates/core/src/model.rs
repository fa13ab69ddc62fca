//! The outlier model: fit `m(N) = a N + b sqrt(N)` to (size, DTV) pairs and
//! score each histogram by its size-normalised deviation from the fit.
//!
//! Two scores are provided:
//!
//! * `d' = |DTV - m(N)| / sqrt(N)` against a fitted [`DtvModel`];
//! * `d'' = |DTV - mean_N| / std_N` against a Monte Carlo [`McTable`].
//!
//! The model is read as `m = a N + b sqrt(N)` everywhere, so the deviation is
//! `DTV - (a N + b sqrt(N))`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::DistributionSpec;
use crate::error::{Result, TvorError};
use crate::hist::{dtv, ensure_shared_bins, subsample_with, Histogram};
use crate::numeric::{compensated_sum, mean_and_std};
use crate::rng::RngSeed;

/// Rows whose standard deviation falls below this are refused for `d''`.
pub const MIN_SIGMA: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    LeastSquares,
    Ransac,
    MonteCarlo,
}

/// Coefficients of `m(N) = a N + b sqrt(N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtvModel {
    pub a: f64,
    pub b: f64,
    pub fit_kind: FitKind,
    /// Root mean square of `(DTV - m) / sqrt(N)` over the fitted points.
    pub residual_scale: f64,
    #[serde(skip)]
    pub inlier_mask: Option<Vec<bool>>,
}

impl DtvModel {
    pub fn new(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            fit_kind: FitKind::LeastSquares,
            residual_scale: 0.0,
            inlier_mask: None,
        }
    }

    pub fn predict(&self, size: u64) -> f64 {
        let n = size as f64;
        self.a * n + self.b * n.sqrt()
    }

    /// `|dtv - m(N)| / sqrt(N)`.
    pub fn normalized_deviation(&self, size: u64, dtv: f64) -> Result<f64> {
        if size == 0 {
            return Err(TvorError::EmptyHistogram);
        }
        Ok((dtv - self.predict(size)).abs() / (size as f64).sqrt())
    }

    /// Sizes within `[min, max]` of the points where the prediction is negative.
    pub fn negative_predictions(&self, points: &[(u64, f64)]) -> Vec<u64> {
        points
            .iter()
            .map(|&(n, _)| n)
            .filter(|&n| self.predict(n) < 0.0)
            .collect()
    }

    pub fn inlier_count(&self) -> Option<usize> {
        self.inlier_mask
            .as_ref()
            .map(|m| m.iter().filter(|&&x| x).count())
    }
}

fn distinct_positive_sizes(points: &[(u64, f64)]) -> usize {
    let mut sizes: Vec<u64> = points.iter().map(|p| p.0).filter(|&n| n > 0).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes.len()
}

/// Ordinary least squares over the basis `{N, sqrt(N)}` with no intercept.
pub fn fit_model(points: &[(u64, f64)]) -> Result<DtvModel> {
    let distinct = distinct_positive_sizes(points);
    if distinct < 2 {
        return Err(TvorError::RankDeficient(distinct));
    }
    if let Some(bad) = points.iter().find(|p| !p.1.is_finite()) {
        return Err(TvorError::InvalidParameter(format!(
            "non-finite DTV {} at size {}",
            bad.1, bad.0
        )));
    }
    // scale both columns to unit maximum before forming the normal equations
    let max_n = points.iter().map(|p| p.0).max().unwrap_or(1) as f64;
    let s1 = max_n;
    let s2 = max_n.sqrt();
    let u = |n: u64| n as f64 / s1;
    let v = |n: u64| (n as f64).sqrt() / s2;
    let g11 = compensated_sum(points.iter().map(|p| u(p.0) * u(p.0)));
    let g12 = compensated_sum(points.iter().map(|p| u(p.0) * v(p.0)));
    let g22 = compensated_sum(points.iter().map(|p| v(p.0) * v(p.0)));
    let r1 = compensated_sum(points.iter().map(|p| u(p.0) * p.1));
    let r2 = compensated_sum(points.iter().map(|p| v(p.0) * p.1));
    let det = g11 * g22 - g12 * g12;
    if !(det > 1e-14 * g11 * g22) {
        return Err(TvorError::RankDeficient(distinct));
    }
    let alpha = (r1 * g22 - r2 * g12) / det;
    let beta = (g11 * r2 - g12 * r1) / det;
    let mut model = DtvModel::new(alpha / s1, beta / s2);
    model.residual_scale = residual_scale(&model, points.iter().copied());
    Ok(model)
}

fn residual_scale(model: &DtvModel, points: impl Iterator<Item = (u64, f64)>) -> f64 {
    let sq: Vec<f64> = points
        .filter(|p| p.0 > 0)
        .map(|(n, d)| {
            let r = (d - model.predict(n)) / (n as f64).sqrt();
            r * r
        })
        .collect();
    if sq.is_empty() {
        return 0.0;
    }
    let len = sq.len() as f64;
    (compensated_sum(sq) / len).sqrt()
}

/// Fits a model to the Monte Carlo means of a table.
pub fn fit_model_from_table(table: &McTable) -> Result<DtvModel> {
    let points: Vec<(u64, f64)> = table.rows.iter().map(|(&n, r)| (n, r.mean)).collect();
    let mut model = fit_model(&points)?;
    model.fit_kind = FitKind::MonteCarlo;
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    /// Inlier threshold on `|DTV - m| / sqrt(N)`.
    pub threshold: f64,
    pub iterations: usize,
    /// Minimum consensus size; `None` means `max(10, 20% of points)`,
    /// capped at the number of points.
    pub min_points: Option<usize>,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            threshold: 2.0,
            iterations: 500,
            min_points: None,
        }
    }
}

impl RansacParams {
    pub fn resolved_min_points(&self, total: usize) -> usize {
        self.min_points
            .unwrap_or_else(|| 10.max((total as f64 * 0.2).ceil() as usize))
            .min(total)
    }
}

/// Exact fit through two points with different sizes.
fn fit_two(p: (u64, f64), q: (u64, f64)) -> Option<DtvModel> {
    let (n1, n2) = (p.0 as f64, q.0 as f64);
    let (r1, r2) = (n1.sqrt(), n2.sqrt());
    let det = n1 * r2 - n2 * r1;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let a = (p.1 * r2 - q.1 * r1) / det;
    let b = (n1 * q.1 - n2 * p.1) / det;
    Some(DtvModel::new(a, b))
}

fn consensus(model: &DtvModel, points: &[(u64, f64)], threshold: f64) -> Vec<bool> {
    points
        .iter()
        .map(|&(n, d)| n > 0 && (d - model.predict(n)).abs() / (n as f64).sqrt() <= threshold)
        .collect()
}

/// RANSAC over minimal two-point samples, followed by a least-squares refit
/// on the largest consensus set.
///
/// The returned mask marks points within `threshold` of the refitted model.
pub fn fit_model_ransac(
    points: &[(u64, f64)],
    params: &RansacParams,
    seed: RngSeed,
) -> Result<DtvModel> {
    if !(params.threshold > 0.0) {
        return Err(TvorError::InvalidParameter("RANSAC threshold must be positive".into()));
    }
    if params.iterations == 0 {
        return Err(TvorError::InvalidParameter("RANSAC needs at least one iteration".into()));
    }
    let distinct = distinct_positive_sizes(points);
    if distinct < 2 {
        return Err(TvorError::RankDeficient(distinct));
    }
    let usable: Vec<usize> = (0..points.len()).filter(|&i| points[i].0 > 0).collect();
    let min_points = params.resolved_min_points(points.len());
    let mut rng = seed.rng();
    let mut best: Option<(usize, Vec<bool>)> = None;
    for _ in 0..params.iterations {
        let i = usable[rng.random_range(0..usable.len())];
        let mut j = i;
        for _ in 0..64 {
            let cand = usable[rng.random_range(0..usable.len())];
            if points[cand].0 != points[i].0 {
                j = cand;
                break;
            }
        }
        let Some(candidate) = (j != i).then(|| fit_two(points[i], points[j])).flatten() else {
            continue;
        };
        let mask = consensus(&candidate, points, params.threshold);
        let count = mask.iter().filter(|&&x| x).count();
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            best = Some((count, mask));
        }
    }
    let (count, mask) = best.unwrap_or((0, vec![false; points.len()]));
    if count < min_points.max(2) {
        return Err(TvorError::NoConsensus {
            found: count,
            required: min_points.max(2),
        });
    }
    let chosen: Vec<(u64, f64)> = points
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|(p, _)| *p)
        .collect();
    let mut model = fit_model(&chosen)?;
    let final_mask = consensus(&model, points, params.threshold);
    let final_count = final_mask.iter().filter(|&&x| x).count();
    if final_count < min_points.max(2) {
        return Err(TvorError::NoConsensus {
            found: final_count,
            required: min_points.max(2),
        });
    }
    let inliers = points.iter().zip(&final_mask).filter(|(_, &m)| m).map(|(p, _)| *p);
    model.residual_scale = residual_scale(&model, inliers);
    model.fit_kind = FitKind::Ransac;
    model.inlier_mask = Some(final_mask);
    Ok(model)
}

/// `d' = |DTV - (a N + b sqrt(N))| / sqrt(N)`.
pub fn score_d1(h: &Histogram, model: &DtvModel) -> Result<f64> {
    model.normalized_deviation(h.total(), dtv(h) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMethod {
    TvorD1,
    McD2,
    Chi2,
    Whipple,
    Myers,
}

impl fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreMethod::TvorD1 => "tvor-d1",
            ScoreMethod::McD2 => "mc-d2",
            ScoreMethod::Chi2 => "chi2",
            ScoreMethod::Whipple => "whipple",
            ScoreMethod::Myers => "myers",
        })
    }
}

/// Per-histogram scoring record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub label: String,
    #[serde(rename = "N")]
    pub size: u64,
    pub dtv: u64,
    pub predicted: Option<f64>,
    pub score: f64,
    pub rank: usize,
    pub method: ScoreMethod,
}

/// 0-based ranks in descending score order; ties keep input order.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let key = |x: f64| if x.is_nan() { f64::NEG_INFINITY } else { x };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| key(scores[j]).total_cmp(&key(scores[i])));
    let mut ranks = vec![0; scores.len()];
    for (rank, idx) in order.into_iter().enumerate() {
        ranks[idx] = rank;
    }
    ranks
}

pub(crate) fn label_of(h: &Histogram, index: usize) -> String {
    h.label().map(str::to_owned).unwrap_or_else(|| index.to_string())
}

/// Extra fitting points obtained by subsampling the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    /// Subsamples drawn per input histogram.
    pub per_histogram: usize,
    /// Subsample sizes are uniform in `[min_fraction * N, N]`.
    pub min_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TvorOptions {
    pub ransac: Option<RansacParams>,
    pub augment: Option<Augmentation>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvorRun {
    pub model: DtvModel,
    pub reports: Vec<ScoreReport>,
    /// The (size, DTV) pairs the model was fitted on.
    pub fit_points: Vec<(u64, f64)>,
}

/// Sizes and DTVs of a set of histograms.
pub fn size_dtv_points(hists: &[Histogram]) -> Vec<(u64, f64)> {
    hists.iter().map(|h| (h.total(), dtv(h) as f64)).collect()
}

fn augmented_points(hists: &[Histogram], aug: &Augmentation, seed: RngSeed) -> Result<Vec<(u64, f64)>> {
    if !(0.0..=1.0).contains(&aug.min_fraction) {
        return Err(TvorError::InvalidParameter("augmentation fraction outside [0, 1]".into()));
    }
    let mut out = Vec::with_capacity(hists.len() * aug.per_histogram);
    for (i, h) in hists.iter().enumerate() {
        let total = h.total();
        for k in 0..aug.per_histogram {
            let mut rng = seed.derive(&[0xa9, i as u64, k as u64]).rng();
            let lo = (aug.min_fraction * total as f64).ceil() as u64;
            let size = if lo >= total { total } else { rng.random_range(lo..=total) };
            let s = subsample_with(h, size, &mut rng)?;
            out.push((size, dtv(&s) as f64));
        }
    }
    Ok(out)
}

/// Scores every histogram with `d'` against a model fitted on all of them
/// (or on the RANSAC consensus set).
pub fn run_tvor(hists: &[Histogram], options: &TvorOptions) -> Result<TvorRun> {
    if hists.len() < 2 {
        return Err(TvorError::TooFewHistograms {
            required: 2,
            found: hists.len(),
        });
    }
    ensure_shared_bins(hists)?;
    if let Some(h) = hists.iter().find(|h| h.total() == 0) {
        log::warn!("histogram {:?} is empty", h.label());
        return Err(TvorError::EmptyHistogram);
    }
    let points = size_dtv_points(hists);
    let mut fit_points = points.clone();
    if let Some(aug) = &options.augment {
        fit_points.extend(augmented_points(hists, aug, RngSeed::new(options.seed, 1))?);
    }
    let model = match &options.ransac {
        Some(params) => fit_model_ransac(&fit_points, params, RngSeed::new(options.seed, 0))?,
        None => fit_model(&fit_points)?,
    };
    let negative = model.negative_predictions(&points);
    if !negative.is_empty() {
        log::warn!(
            "model predicts negative DTV for {} input sizes (a={}, b={})",
            negative.len(),
            model.a,
            model.b
        );
    }
    let reports = score_with_model(hists, &model)?;
    Ok(TvorRun {
        model,
        reports,
        fit_points,
    })
}

/// `d'` reports for a fixed model.
pub fn score_with_model(hists: &[Histogram], model: &DtvModel) -> Result<Vec<ScoreReport>> {
    let scores = hists
        .iter()
        .map(|h| score_d1(h, model))
        .collect::<Result<Vec<_>>>()?;
    let ranks = rank_descending(&scores);
    Ok(hists
        .iter()
        .enumerate()
        .map(|(i, h)| ScoreReport {
            label: label_of(h, i),
            size: h.total(),
            dtv: dtv(h),
            predicted: Some(model.predict(h.total())),
            score: scores[i],
            rank: ranks[i],
            method: ScoreMethod::TvorD1,
        })
        .collect())
}

/// Monte Carlo statistics of the DTV at one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

/// Lookup from sample size to Monte Carlo mean and standard deviation of DTV.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct McTable {
    pub rows: BTreeMap<u64, McRow>,
    pub source: String,
    pub base_seed: u64,
}

/// Where Monte Carlo samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum McSource {
    /// Fresh i.i.d. samples from a distribution.
    Spec(DistributionSpec),
    /// Subsamples without replacement from a pooled histogram.
    Pooled(Histogram),
}

impl fmt::Display for McSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            McSource::Spec(s) => write!(f, "spec:{s}"),
            McSource::Pooled(h) => write!(
                f,
                "pooled:{}(N={})",
                h.label().unwrap_or("histogram"),
                h.total()
            ),
        }
    }
}

/// DTV of `trials` independent samples of each size.
///
/// Trial `t` of size `N` uses the stream derived from `(N, t)`, so the table
/// does not depend on scheduling or thread count.
pub fn build_mc_table(source: &McSource, sizes: &[u64], trials: usize, seed: RngSeed) -> Result<McTable> {
    if trials < 2 {
        return Err(TvorError::InvalidParameter(format!(
            "Monte Carlo tables need at least 2 trials, got {trials}"
        )));
    }
    if let McSource::Pooled(h) = source {
        if let Some(&too_big) = sizes.iter().find(|&&s| s > h.total()) {
            return Err(TvorError::SubsampleTooLarge {
                requested: too_big,
                available: h.total(),
            });
        }
    }
    if let McSource::Spec(spec) = source {
        spec.validate()?;
    }
    let mut table = McTable {
        rows: BTreeMap::new(),
        source: source.to_string(),
        base_seed: seed.base,
    };
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    for size in sizes {
        let dtvs = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed.derive(&[size, t as u64]).rng();
                let h = match source {
                    McSource::Spec(spec) => spec.sample_with(size, &mut rng)?,
                    McSource::Pooled(pool) => subsample_with(pool, size, &mut rng)?,
                };
                Ok(dtv(&h) as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        let (mean, std) = mean_and_std(&dtvs);
        table.rows.insert(size, McRow { mean, std, trials });
    }
    Ok(table)
}

impl McTable {
    pub fn size_range(&self) -> Option<(u64, u64)> {
        Some((*self.rows.keys().next()?, *self.rows.keys().next_back()?))
    }

    /// Mean and standard deviation at `size`, interpolated linearly in
    /// `sqrt(N)` between neighbouring rows.
    pub fn lookup(&self, size: u64, extrapolate: bool) -> Result<McRow> {
        if let Some(row) = self.rows.get(&size) {
            return Ok(*row);
        }
        let (lo, hi) = self
            .size_range()
            .ok_or_else(|| TvorError::DegenerateTable("table has no rows".into()))?;
        let below = self.rows.range(..size).next_back();
        let above = self.rows.range(size..).next();
        let (p, q) = match (below, above) {
            (Some(p), Some(q)) => (p, q),
            _ if !extrapolate => return Err(TvorError::OutsideTable { size, lo, hi }),
            (Some(_), None) => {
                let mut it = self.rows.iter().rev();
                let q = it.next().unwrap();
                let p = it.next().ok_or_else(|| TvorError::OutsideTable { size, lo, hi })?;
                (p, q)
            }
            (None, Some(_)) => {
                let mut it = self.rows.iter();
                let p = it.next().unwrap();
                let q = it.next().ok_or_else(|| TvorError::OutsideTable { size, lo, hi })?;
                (p, q)
            }
            (None, None) => unreachable!("table is non-empty"),
        };
        let (sp, sq, s) = ((*p.0 as f64).sqrt(), (*q.0 as f64).sqrt(), (size as f64).sqrt());
        let t = (s - sp) / (sq - sp);
        Ok(McRow {
            mean: p.1.mean + t * (q.1.mean - p.1.mean),
            std: p.1.std + t * (q.1.std - p.1.std),
            trials: p.1.trials.min(q.1.trials),
        })
    }
}

/// `d'' = |DTV - mean_N| / std_N`.
pub fn score_d2(h: &Histogram, table: &McTable, extrapolate: bool) -> Result<f64> {
    let size = h.total();
    let row = table.lookup(size, extrapolate)?;
    if !(row.std >= MIN_SIGMA) {
        return Err(TvorError::DegenerateSigma {
            size,
            sigma: row.std,
            min: MIN_SIGMA,
        });
    }
    Ok((dtv(h) as f64 - row.mean).abs() / row.std)
}

/// `d''` reports for a set of histograms.
pub fn run_mc_scores(hists: &[Histogram], table: &McTable, extrapolate: bool) -> Result<Vec<ScoreReport>> {
    let mut scores = Vec::with_capacity(hists.len());
    let mut predicted = Vec::with_capacity(hists.len());
    for h in hists {
        scores.push(score_d2(h, table, extrapolate)?);
        predicted.push(table.lookup(h.total(), extrapolate)?.mean);
    }
    let ranks = rank_descending(&scores);
    Ok(hists
        .iter()
        .enumerate()
        .map(|(i, h)| ScoreReport {
            label: label_of(h, i),
            size: h.total(),
            dtv: dtv(h),
            predicted: Some(predicted[i]),
            score: scores[i],
            rank: ranks[i],
            method: ScoreMethod::McD2,
        })
        .collect())
}

/// Through-origin fit of `std_N ~ s sqrt(N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StderrModel {
    pub scale: f64,
    /// Largest `|std_N - s sqrt(N)| / std_N` over the rows.
    pub max_rel_residual: f64,
}

pub fn fit_stderr_model(table: &McTable) -> Result<StderrModel> {
    let rows: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|(&n, _)| n > 0)
        .map(|(&n, r)| (n as f64, r.std))
        .collect();
    if rows.len() < 2 {
        return Err(TvorError::DegenerateTable(format!(
            "need at least 2 rows with positive size, found {}",
            rows.len()
        )));
    }
    let num = compensated_sum(rows.iter().map(|(n, s)| s * n.sqrt()));
    let den = compensated_sum(rows.iter().map(|(n, _)| *n));
    let scale = num / den;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(TvorError::DegenerateTable("standard deviations are all zero".into()));
    }
    let max_rel_residual = rows
        .iter()
        .map(|(n, s)| {
            if *s > 0.0 {
                (s - scale * n.sqrt()).abs() / s
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    Ok(StderrModel {
        scale,
        max_rel_residual,
    })
}

impl FromStr for FitKind {
    type Err = TvorError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "least-squares" | "ols" => Ok(FitKind::LeastSquares),
            "ransac" => Ok(FitKind::Ransac),
            "monte-carlo" => Ok(FitKind::MonteCarlo),
            other => Err(TvorError::Parse(format!("unknown fit kind `{other}`"))),
        }
    }
}
