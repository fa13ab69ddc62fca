//! Named theoretical distributions, their binning, and sampling.
//!
//! A [`DistributionSpec`] pairs a distribution with a binning rule and yields
//! bin probabilities `p_1..p_n` that sum to one. Continuous distributions are
//! binned over `n` equal-width bins on `[lo, hi]`; integer-valued ones put
//! each value `k >= 0` in bin `k`. Out-of-range values are clamped to the
//! nearest end bin by default.
//!
//! Specs have a compact text form, e.g. `normal(sigma=0.9, c=5, n=10)` or
//! `beta(alpha=2, beta=3, n=100)`; see [`DistributionSpec::from_str`].

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Geometric, Normal, Poisson, Triangular, Uniform};
use serde::{Deserialize, Serialize};
use statrs::distribution::{
    Beta as BetaLaw, Binomial as BinomialLaw, ContinuousCDF, Discrete, DiscreteCDF,
    Normal as NormalLaw, Poisson as PoissonLaw,
};

use crate::error::{Result, TvorError};
use crate::hist::Histogram;
use crate::numeric::compensated_sum;
use crate::rng::RngSeed;

/// Upper quantile at which unbounded integer supports are truncated.
pub const DEFAULT_TAIL_QUANTILE: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistributionKind {
    Uniform,
    /// Continuous triangular law on `[low, high]` with the given mode.
    Triangular { low: f64, mode: f64, high: f64 },
    /// `p_i` proportional to `i^2` over bins `i = 1..n`.
    Square,
    /// `p_i` proportional to `sqrt(i)` over bins `i = 1..n`.
    SquareRoot,
    /// Failures before the first success, `P(k) = p (1-p)^k`.
    Geometric { p: f64 },
    Poisson { lambda: f64 },
    Binomial { trials: u64, p: f64 },
    Normal { mean: f64, sigma: f64 },
    /// Beta law on `[0, 1]`.
    Beta { alpha: f64, beta: f64 },
    /// Explicit bin probabilities.
    Explicit { probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Binning {
    /// `bins` equal-width bins over `[lo, hi]`.
    Interval { bins: usize, lo: f64, hi: f64 },
    /// One bin per integer value starting at zero; `None` lets the
    /// distribution choose (quantile truncation or natural support).
    Integer { bins: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutOfRange {
    /// Replace by the nearest end of the range.
    #[default]
    Clamp,
    /// Drop and redraw, i.e. condition on the range.
    Discard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub binning: Binning,
    #[serde(default)]
    pub out_of_range: OutOfRange,
}

impl DistributionSpec {
    pub fn new(kind: DistributionKind, binning: Binning) -> Result<Self> {
        let spec = Self {
            kind,
            binning,
            out_of_range: OutOfRange::Clamp,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_out_of_range(mut self, mode: OutOfRange) -> Self {
        self.out_of_range = mode;
        self
    }

    pub fn uniform(bins: usize) -> Result<Self> {
        Self::new(DistributionKind::Uniform, Binning::Integer { bins: Some(bins) })
    }

    /// `N(mean, sigma^2)` with `bins` equal bins on `[-c, c]`.
    pub fn normal(mean: f64, sigma: f64, c: f64, bins: usize) -> Result<Self> {
        Self::new(
            DistributionKind::Normal { mean, sigma },
            Binning::Interval { bins, lo: -c, hi: c },
        )
    }

    pub fn beta(alpha: f64, beta: f64, bins: usize) -> Result<Self> {
        Self::new(
            DistributionKind::Beta { alpha, beta },
            Binning::Interval { bins, lo: 0.0, hi: 1.0 },
        )
    }

    pub fn triangular(low: f64, mode: f64, high: f64, bins: usize) -> Result<Self> {
        Self::new(
            DistributionKind::Triangular { low, mode, high },
            Binning::Interval {
                bins,
                lo: low,
                hi: high,
            },
        )
    }

    pub fn geometric(p: f64) -> Result<Self> {
        Self::new(DistributionKind::Geometric { p }, Binning::Integer { bins: None })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        Self::new(DistributionKind::Poisson { lambda }, Binning::Integer { bins: None })
    }

    pub fn binomial(trials: u64, p: f64) -> Result<Self> {
        Self::new(DistributionKind::Binomial { trials, p }, Binning::Integer { bins: None })
    }

    pub fn square(bins: usize) -> Result<Self> {
        Self::new(DistributionKind::Square, Binning::Integer { bins: Some(bins) })
    }

    pub fn square_root(bins: usize) -> Result<Self> {
        Self::new(DistributionKind::SquareRoot, Binning::Integer { bins: Some(bins) })
    }

    pub fn explicit(probs: Vec<f64>) -> Result<Self> {
        let bins = probs.len();
        Self::new(
            DistributionKind::Explicit { probs },
            Binning::Integer { bins: Some(bins) },
        )
    }

    fn is_continuous(&self) -> bool {
        matches!(
            self.kind,
            DistributionKind::Triangular { .. }
                | DistributionKind::Normal { .. }
                | DistributionKind::Beta { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TvorError::InvalidParameter(m));
        if let Binning::Interval { bins, lo, hi } = self.binning {
            if bins == 0 {
                return bad("binning needs at least one bin".into());
            }
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("binning interval [{lo}, {hi}] is empty or not finite"));
            }
        }
        if let Binning::Integer { bins: Some(0) } = self.binning {
            return bad("binning needs at least one bin".into());
        }
        if self.is_continuous() && !matches!(self.binning, Binning::Interval { .. }) {
            return bad("continuous distributions need interval binning".into());
        }
        match &self.kind {
            DistributionKind::Uniform | DistributionKind::Square | DistributionKind::SquareRoot => {
                if let Binning::Integer { bins: None } = self.binning {
                    return bad("number of bins required".into());
                }
            }
            DistributionKind::Triangular { low, mode, high } => {
                if !(low < high && low <= mode && mode <= high) {
                    return bad(format!("triangular needs low <= mode <= high, low < high; got {low}, {mode}, {high}"));
                }
            }
            DistributionKind::Geometric { p } => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return bad(format!("geometric p={p} outside (0, 1]"));
                }
            }
            DistributionKind::Poisson { lambda } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return bad(format!("poisson lambda={lambda} must be positive"));
                }
            }
            DistributionKind::Binomial { p, .. } => {
                if !(0.0..=1.0).contains(p) {
                    return bad(format!("binomial p={p} outside [0, 1]"));
                }
            }
            DistributionKind::Normal { mean, sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite() && mean.is_finite()) {
                    return bad(format!("normal sigma={sigma} must be positive"));
                }
            }
            DistributionKind::Beta { alpha, beta } => {
                if !(*alpha > 0.0 && *beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
                    return bad(format!("beta parameters ({alpha}, {beta}) must be positive"));
                }
            }
            DistributionKind::Explicit { probs } => {
                if probs.is_empty() {
                    return bad("explicit probabilities are empty".into());
                }
                if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return bad("explicit probabilities must be finite and non-negative".into());
                }
                let s: f64 = probs.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return bad(format!("explicit probabilities sum to {s}, not 1"));
                }
                if let Binning::Interval { bins, .. } | Binning::Integer { bins: Some(bins) } =
                    self.binning
                {
                    if bins != probs.len() {
                        return bad(format!(
                            "explicit probabilities have {} entries but binning has {bins} bins",
                            probs.len()
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Same law with a different bin count.
    pub fn with_bins(mut self, bins: usize) -> Result<Self> {
        match &mut self.binning {
            Binning::Interval { bins: b, .. } => *b = bins,
            Binning::Integer { bins: b } => *b = Some(bins),
        }
        self.validate()?;
        Ok(self)
    }

    /// Number of bins `n` the spec produces.
    pub fn bins(&self) -> Result<usize> {
        self.validate()?;
        Ok(match (&self.binning, &self.kind) {
            (Binning::Interval { bins, .. }, _) => *bins,
            (Binning::Integer { bins: Some(b) }, _) => *b,
            (Binning::Integer { bins: None }, DistributionKind::Geometric { p }) => {
                geometric_bins(*p, DEFAULT_TAIL_QUANTILE)
            }
            (Binning::Integer { bins: None }, DistributionKind::Poisson { lambda }) => {
                poisson_bins(*lambda, DEFAULT_TAIL_QUANTILE)
            }
            (Binning::Integer { bins: None }, DistributionKind::Binomial { trials, .. }) => {
                *trials as usize + 1
            }
            (Binning::Integer { bins: None }, DistributionKind::Explicit { probs }) => probs.len(),
            _ => unreachable!("validate rejects remaining combinations"),
        })
    }

    /// Bin probabilities; non-negative and summing to one.
    pub fn bin_probabilities(&self) -> Result<Vec<f64>> {
        let n = self.bins()?;
        let clamp = self.out_of_range == OutOfRange::Clamp;
        let raw = match (&self.kind, &self.binning) {
            (DistributionKind::Uniform, _) => vec![1.0; n],
            (DistributionKind::Square, _) => (1..=n).map(|i| (i * i) as f64).collect(),
            (DistributionKind::SquareRoot, _) => (1..=n).map(|i| (i as f64).sqrt()).collect(),
            (DistributionKind::Explicit { probs }, _) => probs.clone(),
            (kind, Binning::Interval { lo, hi, .. }) => {
                let law = ContinuousLaw::from_kind(kind)?;
                interval_masses(&law, n, *lo, *hi, clamp)
            }
            (kind, Binning::Integer { .. }) => integer_masses(kind, n, clamp)?,
        };
        let total = compensated_sum(raw.iter().copied());
        if !(total > 0.0) {
            return Err(TvorError::InvalidParameter(
                "distribution puts no mass inside the binning range".into(),
            ));
        }
        Ok(raw.into_iter().map(|p| (p / total).max(0.0)).collect())
    }

    /// Draws `size` values i.i.d. and bins them.
    pub fn sample(&self, size: u64, seed: RngSeed) -> Result<Histogram> {
        let mut rng = seed.rng();
        self.sample_with(size, &mut rng)
    }

    pub(crate) fn sample_with<R: Rng + ?Sized>(&self, size: u64, rng: &mut R) -> Result<Histogram> {
        let n = self.bins()?;
        let mut counts = vec![0u64; n];
        let sampler = Sampler::new(self, n)?;
        let clamp = self.out_of_range == OutOfRange::Clamp;
        let mut drawn = 0u64;
        let mut attempts = 0u64;
        let max_attempts = size.saturating_mul(1000).max(10_000);
        while drawn < size {
            attempts += 1;
            if attempts > max_attempts {
                return Err(TvorError::InvalidParameter(
                    "too many out-of-range draws while discarding".into(),
                ));
            }
            if let Some(bin) = sampler.draw_bin(rng, clamp) {
                counts[bin] += 1;
                drawn += 1;
            }
        }
        Histogram::new(counts)
    }
}

/// Draws `size` values from `spec` and bins them.
pub fn sample(spec: &DistributionSpec, size: u64, seed: RngSeed) -> Result<Histogram> {
    spec.sample(size, seed)
}

fn geometric_bins(p: f64, quantile: f64) -> usize {
    if p >= 1.0 {
        return 1;
    }
    // smallest k with 1 - (1-p)^(k+1) >= quantile
    let k = ((1.0 - quantile).ln() / (1.0 - p).ln() - 1.0).ceil().max(0.0);
    k as usize + 1
}

fn poisson_bins(lambda: f64, quantile: f64) -> usize {
    let mut pmf = (-lambda).exp();
    let mut cdf = pmf;
    let mut k = 0usize;
    // pmf underflows for very large lambda; fall back to statrs' cdf
    if pmf == 0.0 {
        let law = PoissonLaw::new(lambda).expect("validated");
        let mut k = lambda as u64;
        while law.cdf(k) < quantile {
            k += 1;
        }
        return k as usize + 1;
    }
    while cdf < quantile {
        k += 1;
        pmf *= lambda / k as f64;
        cdf += pmf;
    }
    k + 1
}

enum ContinuousLaw {
    Normal(NormalLaw),
    Beta(BetaLaw),
    Triangular { low: f64, mode: f64, high: f64 },
}

impl ContinuousLaw {
    fn from_kind(kind: &DistributionKind) -> Result<Self> {
        let err = |e: String| TvorError::InvalidParameter(e);
        Ok(match *kind {
            DistributionKind::Normal { mean, sigma } => {
                ContinuousLaw::Normal(NormalLaw::new(mean, sigma).map_err(|e| err(e.to_string()))?)
            }
            DistributionKind::Beta { alpha, beta } => {
                ContinuousLaw::Beta(BetaLaw::new(alpha, beta).map_err(|e| err(e.to_string()))?)
            }
            DistributionKind::Triangular { low, mode, high } => {
                ContinuousLaw::Triangular { low, mode, high }
            }
            _ => return Err(err("not a continuous distribution".into())),
        })
    }

    fn cdf(&self, x: f64) -> f64 {
        match self {
            ContinuousLaw::Normal(d) => d.cdf(x),
            ContinuousLaw::Beta(d) => d.cdf(x.clamp(0.0, 1.0)),
            ContinuousLaw::Triangular { low, mode, high } => triangular_cdf(x, *low, *mode, *high),
        }
    }

    fn sf(&self, x: f64) -> f64 {
        match self {
            ContinuousLaw::Normal(d) => d.sf(x),
            ContinuousLaw::Beta(d) => d.sf(x.clamp(0.0, 1.0)),
            ContinuousLaw::Triangular { .. } => 1.0 - self.cdf(x),
        }
    }

    /// Mass of `(a, b]`, taken from whichever tail is more accurate.
    fn mass(&self, a: f64, b: f64) -> f64 {
        let (fa, fb) = (self.cdf(a), self.cdf(b));
        if fa > 0.5 {
            (self.sf(a) - self.sf(b)).max(0.0)
        } else {
            (fb - fa).max(0.0)
        }
    }
}

fn triangular_cdf(x: f64, low: f64, mode: f64, high: f64) -> f64 {
    if x <= low {
        0.0
    } else if x >= high {
        1.0
    } else if x <= mode {
        (x - low) * (x - low) / ((high - low) * (mode - low))
    } else {
        1.0 - (high - x) * (high - x) / ((high - low) * (high - mode))
    }
}

fn bin_edge(i: usize, n: usize, lo: f64, hi: f64) -> f64 {
    if i == n {
        hi
    } else {
        lo + (hi - lo) * i as f64 / n as f64
    }
}

fn interval_masses(law: &ContinuousLaw, n: usize, lo: f64, hi: f64, clamp: bool) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let a = bin_edge(i, n, lo, hi);
            let b = bin_edge(i + 1, n, lo, hi);
            let mut m = law.mass(a, b);
            if clamp {
                if i == 0 {
                    m += law.cdf(lo);
                }
                if i + 1 == n {
                    m += law.sf(hi);
                }
            }
            m
        })
        .collect()
}

fn integer_masses(kind: &DistributionKind, n: usize, clamp: bool) -> Result<Vec<f64>> {
    let err = |e: String| TvorError::InvalidParameter(e);
    let (pmf, tail): (Box<dyn Fn(u64) -> f64>, Box<dyn Fn(u64) -> f64>) = match *kind {
        DistributionKind::Geometric { p } => (
            Box::new(move |k| p * (1.0 - p).powf(k as f64)),
            // P(X >= k)
            Box::new(move |k| (1.0 - p).powf(k as f64)),
        ),
        DistributionKind::Poisson { lambda } => {
            let d = PoissonLaw::new(lambda).map_err(|e| err(e.to_string()))?;
            let d2 = d;
            (
                Box::new(move |k| d.pmf(k)),
                Box::new(move |k| if k == 0 { 1.0 } else { d2.sf(k - 1) }),
            )
        }
        DistributionKind::Binomial { trials, p } => {
            let d = BinomialLaw::new(p, trials).map_err(|e| err(e.to_string()))?;
            let d2 = d;
            (
                Box::new(move |k| d.pmf(k)),
                Box::new(move |k| if k == 0 { 1.0 } else { d2.sf(k - 1) }),
            )
        }
        _ => return Err(err("not an integer-valued distribution".into())),
    };
    Ok((0..n as u64)
        .map(|k| {
            if clamp && k + 1 == n as u64 {
                tail(k)
            } else {
                pmf(k)
            }
        })
        .collect())
}

enum Sampler {
    Value {
        law: ValueLaw,
        bins: usize,
        lo: f64,
        hi: f64,
    },
    Integer {
        law: IntegerLaw,
        bins: usize,
    },
    Categorical(WeightedIndex<f64>),
    UniformBins(usize),
}

enum ValueLaw {
    Normal(Normal<f64>),
    Beta(Beta<f64>),
    Triangular(Triangular<f64>),
    Uniform(Uniform<f64>),
}

enum IntegerLaw {
    Geometric(Geometric),
    Poisson(Poisson<f64>),
    Binomial(Binomial),
}

impl Sampler {
    fn new(spec: &DistributionSpec, n: usize) -> Result<Self> {
        let err = |e: String| TvorError::InvalidParameter(e);
        Ok(match (&spec.kind, &spec.binning) {
            (DistributionKind::Uniform, Binning::Interval { lo, hi, .. }) => Sampler::Value {
                law: ValueLaw::Uniform(Uniform::new_inclusive(*lo, *hi).map_err(|e| err(e.to_string()))?),
                bins: n,
                lo: *lo,
                hi: *hi,
            },
            (DistributionKind::Uniform, _) => Sampler::UniformBins(n),
            (DistributionKind::Square | DistributionKind::SquareRoot | DistributionKind::Explicit { .. }, _) => {
                let p = spec.bin_probabilities()?;
                Sampler::Categorical(WeightedIndex::new(p).map_err(|e| err(e.to_string()))?)
            }
            (kind, Binning::Interval { lo, hi, .. }) => {
                let law = match *kind {
                    DistributionKind::Normal { mean, sigma } => {
                        ValueLaw::Normal(Normal::new(mean, sigma).map_err(|e| err(e.to_string()))?)
                    }
                    DistributionKind::Beta { alpha, beta } => {
                        ValueLaw::Beta(Beta::new(alpha, beta).map_err(|e| err(e.to_string()))?)
                    }
                    DistributionKind::Triangular { low, mode, high } => ValueLaw::Triangular(
                        Triangular::new(low, high, mode).map_err(|e| err(e.to_string()))?,
                    ),
                    _ => return Err(err("unsupported continuous kind".into())),
                };
                Sampler::Value {
                    law,
                    bins: n,
                    lo: *lo,
                    hi: *hi,
                }
            }
            (kind, Binning::Integer { .. }) => {
                let law = match *kind {
                    DistributionKind::Geometric { p } => {
                        IntegerLaw::Geometric(Geometric::new(p).map_err(|e| err(e.to_string()))?)
                    }
                    DistributionKind::Poisson { lambda } => {
                        IntegerLaw::Poisson(Poisson::new(lambda).map_err(|e| err(e.to_string()))?)
                    }
                    DistributionKind::Binomial { trials, p } => {
                        IntegerLaw::Binomial(Binomial::new(trials, p).map_err(|e| err(e.to_string()))?)
                    }
                    _ => return Err(err("unsupported integer kind".into())),
                };
                Sampler::Integer { law, bins: n }
            }
        })
    }

    fn draw_bin<R: Rng + ?Sized>(&self, rng: &mut R, clamp: bool) -> Option<usize> {
        match self {
            Sampler::Value { law, bins, lo, hi } => {
                let x = match law {
                    ValueLaw::Normal(d) => d.sample(rng),
                    ValueLaw::Beta(d) => d.sample(rng),
                    ValueLaw::Triangular(d) => d.sample(rng),
                    ValueLaw::Uniform(d) => d.sample(rng),
                };
                bin_of_value(x, *bins, *lo, *hi, clamp)
            }
            Sampler::Integer { law, bins } => {
                let k = match law {
                    IntegerLaw::Geometric(d) => d.sample(rng),
                    IntegerLaw::Poisson(d) => d.sample(rng) as u64,
                    IntegerLaw::Binomial(d) => d.sample(rng),
                };
                if (k as usize) < *bins {
                    Some(k as usize)
                } else if clamp {
                    Some(bins - 1)
                } else {
                    None
                }
            }
            Sampler::Categorical(w) => Some(w.sample(rng)),
            Sampler::UniformBins(n) => Some(rng.random_range(0..*n)),
        }
    }
}

/// Bin index of `x` for `bins` equal bins on `[lo, hi]`; the upper edge
/// belongs to the last bin.
pub fn bin_of_value(x: f64, bins: usize, lo: f64, hi: f64, clamp: bool) -> Option<usize> {
    if x.is_nan() {
        return None;
    }
    if x < lo {
        return clamp.then_some(0);
    }
    if x > hi {
        return clamp.then_some(bins - 1);
    }
    let idx = ((x - lo) / (hi - lo) * bins as f64).floor() as usize;
    Some(idx.min(bins - 1))
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        let name = match &self.kind {
            DistributionKind::Uniform => "uniform",
            DistributionKind::Triangular { low, mode, high } => {
                parts.push(format!("low={low}"));
                parts.push(format!("mode={mode}"));
                parts.push(format!("high={high}"));
                "triangular"
            }
            DistributionKind::Square => "square",
            DistributionKind::SquareRoot => "square-root",
            DistributionKind::Geometric { p } => {
                parts.push(format!("p={p}"));
                "geometric"
            }
            DistributionKind::Poisson { lambda } => {
                parts.push(format!("lambda={lambda}"));
                "poisson"
            }
            DistributionKind::Binomial { trials, p } => {
                parts.push(format!("trials={trials}"));
                parts.push(format!("p={p}"));
                "binomial"
            }
            DistributionKind::Normal { mean, sigma } => {
                parts.push(format!("mean={mean}"));
                parts.push(format!("sigma={sigma}"));
                "normal"
            }
            DistributionKind::Beta { alpha, beta } => {
                parts.push(format!("alpha={alpha}"));
                parts.push(format!("beta={beta}"));
                "beta"
            }
            DistributionKind::Explicit { probs } => {
                let p: Vec<String> = probs.iter().map(|p| p.to_string()).collect();
                parts.push(format!("p={}", p.join(";")));
                "explicit"
            }
        };
        match self.binning {
            Binning::Interval { bins, lo, hi } => {
                parts.push(format!("lo={lo}"));
                parts.push(format!("hi={hi}"));
                parts.push(format!("n={bins}"));
            }
            Binning::Integer { bins: Some(b) } => {
                if !matches!(self.kind, DistributionKind::Explicit { .. }) {
                    parts.push(format!("n={b}"));
                }
            }
            Binning::Integer { bins: None } => {}
        }
        if self.out_of_range == OutOfRange::Discard {
            parts.push("out=discard".into());
        }
        write!(f, "{name}({})", parts.join(", "))
    }
}

impl FromStr for DistributionSpec {
    type Err = TvorError;

    /// Parses `kind(key=value, ...)`.
    ///
    /// Keys: `n` (bins), `lo`/`hi` or `c` (interval `[-c, c]`), `out`
    /// (`clamp` | `discard`), and per kind: `mean`, `sigma` (normal);
    /// `alpha`, `beta` (beta); `low`, `mode`, `high` (triangular); `p`
    /// (geometric, binomial); `lambda` (poisson); `trials` (binomial);
    /// `p=0.2;0.3;0.5` (explicit).
    fn from_str(s: &str) -> Result<Self> {
        let perr = |m: String| TvorError::Parse(format!("distribution `{s}`: {m}"));
        let s_trim = s.trim();
        let (name, body) = match s_trim.find('(') {
            Some(i) => {
                if !s_trim.ends_with(')') {
                    return Err(perr("missing closing parenthesis".into()));
                }
                (&s_trim[..i], &s_trim[i + 1..s_trim.len() - 1])
            }
            None => (s_trim, ""),
        };
        let name = name.trim().to_ascii_lowercase();
        let mut kv: Vec<(String, String)> = Vec::new();
        for item in body.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| perr(format!("expected key=value, got `{item}`")))?;
            kv.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let mut used = vec![false; kv.len()];
        let mut get = |key: &str| -> Option<String> {
            kv.iter().enumerate().find(|(_, (k, _))| k == key).map(|(i, (_, v))| {
                used[i] = true;
                v.clone()
            })
        };
        let num = |v: Option<String>, key: &str| -> Result<Option<f64>> {
            v.map(|v| v.parse::<f64>().map_err(|_| perr(format!("`{key}` is not a number: {v}"))))
                .transpose()
        };
        let int = |v: Option<String>, key: &str| -> Result<Option<u64>> {
            v.map(|v| v.parse::<u64>().map_err(|_| perr(format!("`{key}` is not an integer: {v}"))))
                .transpose()
        };
        let bins = int(get("n"), "n")?.map(|b| b as usize);
        let c = num(get("c"), "c")?;
        let lo = num(get("lo"), "lo")?;
        let hi = num(get("hi"), "hi")?;
        let out = match get("out").as_deref() {
            None | Some("clamp") => OutOfRange::Clamp,
            Some("discard") => OutOfRange::Discard,
            Some(o) => return Err(perr(format!("unknown out-of-range mode `{o}`"))),
        };
        let interval = |default: Option<(f64, f64)>| -> Result<Binning> {
            let bins = bins.ok_or_else(|| perr("`n` (number of bins) is required".into()))?;
            let (lo, hi) = match (lo, hi, c) {
                (Some(l), Some(h), None) => (l, h),
                (None, None, Some(c)) => (-c, c),
                (None, None, None) => {
                    default.ok_or_else(|| perr("binning interval required: give `c` or `lo` and `hi`".into()))?
                }
                _ => return Err(perr("give either `c` or both `lo` and `hi`".into())),
            };
            Ok(Binning::Interval { bins, lo, hi })
        };
        let req = |v: Option<f64>, key: &str| v.ok_or_else(|| perr(format!("`{key}` is required")));
        let (kind, binning) = match name.as_str() {
            "uniform" => {
                let binning = if lo.is_some() || hi.is_some() || c.is_some() {
                    interval(None)?
                } else {
                    Binning::Integer { bins: Some(bins.ok_or_else(|| perr("`n` is required".into()))?) }
                };
                (DistributionKind::Uniform, binning)
            }
            "square" | "quadratic" => (
                DistributionKind::Square,
                Binning::Integer { bins: Some(bins.ok_or_else(|| perr("`n` is required".into()))?) },
            ),
            "square-root" | "sqrt" | "squareroot" => (
                DistributionKind::SquareRoot,
                Binning::Integer { bins: Some(bins.ok_or_else(|| perr("`n` is required".into()))?) },
            ),
            "triangular" => {
                let low = num(get("low"), "low")?.unwrap_or(0.0);
                let high = num(get("high"), "high")?.unwrap_or(1.0);
                let mode = num(get("mode"), "mode")?.unwrap_or((low + high) / 2.0);
                (DistributionKind::Triangular { low, mode, high }, interval(Some((low, high)))?)
            }
            "normal" => {
                let mean = num(get("mean"), "mean")?.unwrap_or(0.0);
                let sigma = req(num(get("sigma"), "sigma")?, "sigma")?;
                (DistributionKind::Normal { mean, sigma }, interval(None)?)
            }
            "beta" => {
                let alpha = req(num(get("alpha"), "alpha")?, "alpha")?;
                let beta = req(num(get("beta"), "beta")?, "beta")?;
                (DistributionKind::Beta { alpha, beta }, interval(Some((0.0, 1.0)))?)
            }
            "geometric" => {
                let p = req(num(get("p"), "p")?, "p")?;
                (DistributionKind::Geometric { p }, Binning::Integer { bins })
            }
            "poisson" => {
                let lambda = req(num(get("lambda"), "lambda")?, "lambda")?;
                (DistributionKind::Poisson { lambda }, Binning::Integer { bins })
            }
            "binomial" => {
                let trials = int(get("trials"), "trials")?
                    .ok_or_else(|| perr("`trials` is required".into()))?;
                let p = num(get("p"), "p")?.unwrap_or(0.5);
                (DistributionKind::Binomial { trials, p }, Binning::Integer { bins })
            }
            "explicit" => {
                let raw = get("p").ok_or_else(|| perr("`p` is required".into()))?;
                let probs = raw
                    .split(';')
                    .map(|x| x.trim().parse::<f64>().map_err(|_| perr(format!("bad probability `{x}`"))))
                    .collect::<Result<Vec<_>>>()?;
                let n = probs.len();
                (DistributionKind::Explicit { probs }, Binning::Integer { bins: Some(n) })
            }
            other => return Err(perr(format!("unknown distribution kind `{other}`"))),
        };
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(perr(format!("unknown key `{}`", kv[i].0)));
        }
        Ok(DistributionSpec::new(kind, binning)?.with_out_of_range(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum(p: &[f64]) -> f64 {
        compensated_sum(p.iter().copied())
    }

    #[test]
    fn probabilities_sum_to_one() {
        let specs = [
            DistributionSpec::uniform(7).unwrap(),
            DistributionSpec::normal(0.0, 1.0, 5.0, 10).unwrap(),
            DistributionSpec::normal(0.0, 0.5, 10.0, 33).unwrap(),
            DistributionSpec::beta(2.0, 3.0, 100).unwrap(),
            DistributionSpec::beta(7.0, 1.0, 30).unwrap(),
            DistributionSpec::triangular(0.0, 0.5, 1.0, 9).unwrap(),
            DistributionSpec::geometric(0.3).unwrap(),
            DistributionSpec::poisson(4.5).unwrap(),
            DistributionSpec::binomial(20, 0.5).unwrap(),
            DistributionSpec::square(12).unwrap(),
            DistributionSpec::square_root(12).unwrap(),
            DistributionSpec::normal(0.0, 1.0, 2.0, 10)
                .unwrap()
                .with_out_of_range(OutOfRange::Discard),
        ];
        for s in &specs {
            let p = s.bin_probabilities().unwrap();
            assert!((sum(&p) - 1.0).abs() < 1e-12, "{s}: {}", sum(&p));
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn triangular_bins_match_closed_form() {
        let p = DistributionSpec::triangular(0.0, 0.5, 1.0, 4)
            .unwrap()
            .bin_probabilities()
            .unwrap();
        let expect = [0.125, 0.375, 0.375, 0.125];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn clamped_normal_tails_land_in_end_bins() {
        let spec = DistributionSpec::normal(0.0, 1.0, 1.0, 2).unwrap();
        let p = spec.bin_probabilities().unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn geometric_truncation_reaches_quantile() {
        let spec = DistributionSpec::geometric(0.3).unwrap();
        let n = spec.bins().unwrap();
        // (1-p)^(n-1) is the tail absorbed by the last bin
        assert!(0.7f64.powi(n as i32) <= 1e-12);
        assert!(0.7f64.powi(n as i32 - 1) > 1e-12);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(DistributionSpec::normal(0.0, 0.0, 5.0, 10).is_err());
        assert!(DistributionSpec::normal(0.0, -1.0, 5.0, 10).is_err());
        assert!(DistributionSpec::beta(0.0, 1.0, 10).is_err());
        assert!(DistributionSpec::geometric(0.0).is_err());
        assert!(DistributionSpec::poisson(-1.0).is_err());
        assert!(DistributionSpec::explicit(vec![0.5, 0.6]).is_err());
        assert!(DistributionSpec::explicit(vec![]).is_err());
        assert!(DistributionSpec::triangular(0.0, 2.0, 1.0, 4).is_err());
        assert!(DistributionSpec::normal(0.0, 1.0, 5.0, 0).is_err());
    }

    #[test]
    fn zero_size_sample_is_empty() {
        let spec = DistributionSpec::normal(0.0, 1.0, 5.0, 10).unwrap();
        let h = spec.sample(0, RngSeed::new(1, 0)).unwrap();
        assert_eq!(h.counts(), &[0; 10]);
    }

    #[test]
    fn sample_is_reproducible() {
        let spec = DistributionSpec::beta(2.0, 3.0, 100).unwrap();
        let a = spec.sample(700, RngSeed::new(5, 2)).unwrap();
        let b = spec.sample(700, RngSeed::new(5, 2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total(), 700);
    }

    #[test]
    fn discard_conditions_on_range() {
        let spec = DistributionSpec::normal(0.0, 1.0, 0.5, 4)
            .unwrap()
            .with_out_of_range(OutOfRange::Discard);
        let h = spec.sample(2000, RngSeed::new(3, 0)).unwrap();
        assert_eq!(h.total(), 2000);
        // clamping would pile ~31% of mass into each end bin
        let end = h.counts()[0] as f64 / 2000.0;
        assert!(end < 0.3, "end bin share {end}");
    }

    #[test]
    fn bin_of_value_edges() {
        assert_eq!(bin_of_value(-5.0, 10, -5.0, 5.0, true), Some(0));
        assert_eq!(bin_of_value(5.0, 10, -5.0, 5.0, true), Some(9));
        assert_eq!(bin_of_value(-7.0, 10, -5.0, 5.0, true), Some(0));
        assert_eq!(bin_of_value(7.0, 10, -5.0, 5.0, false), None);
        assert_eq!(bin_of_value(0.0, 10, -5.0, 5.0, true), Some(5));
    }

    #[test]
    fn text_form_round_trips() {
        for text in [
            "normal(sigma=0.9, c=5, n=10)",
            "beta(alpha=2, beta=3, n=100)",
            "triangular(low=0, mode=0.5, high=1, n=20)",
            "geometric(p=0.3)",
            "poisson(lambda=3.5, n=15)",
            "binomial(trials=10, p=0.5)",
            "explicit(p=0.25;0.5;0.25)",
            "uniform(n=4)",
            "square-root(n=9)",
            "normal(sigma=1, lo=-2, hi=3, n=7, out=discard)",
        ] {
            let spec: DistributionSpec = text.parse().unwrap();
            let again: DistributionSpec = spec.to_string().parse().unwrap();
            assert_eq!(spec, again, "{text}");
        }
    }

    #[test]
    fn text_form_errors() {
        assert!("normal(c=5, n=10)".parse::<DistributionSpec>().is_err());
        assert!("normal(sigma=1, n=10)".parse::<DistributionSpec>().is_err());
        assert!("weibull(k=1)".parse::<DistributionSpec>().is_err());
        assert!("beta(alpha=2, beta=3, n=10, bogus=1)".parse::<DistributionSpec>().is_err());
        assert!("normal(sigma=1, c=5, n=10".parse::<DistributionSpec>().is_err());
    }
}
