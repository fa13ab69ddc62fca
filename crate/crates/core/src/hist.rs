//! Histograms over shared bins and their discrete total variation.

use rand::Rng;
use rand_distr::{Distribution, Hypergeometric};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Result, TvorError};
use crate::rng::RngSeed;

/// Ordered, non-negative bin counts with an optional label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Histogram {
    counts: Vec<u64>,
    label: Option<String>,
}

impl Histogram {
    /// Builds a histogram; at least one bin is required.
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(TvorError::TooFewBins(0, 1));
        }
        Ok(Self {
            counts,
            label: None,
        })
    }

    pub fn zeros(bins: usize) -> Result<Self> {
        Self::new(vec![0; bins])
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn set_label(&mut self, label: Option<String>) {
        self.label = label;
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn counts_mut(&mut self) -> &mut [u64] {
        &mut self.counts
    }

    pub fn into_counts(self) -> Vec<u64> {
        self.counts
    }

    /// Number of bins `n`.
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Sample size `N`, the total of all counts.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn dtv(&self) -> u64 {
        dtv(self)
    }

    /// The histogram with every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Histogram {
        Histogram {
            counts: self.counts.iter().map(|c| c * factor).collect(),
            label: self.label.clone(),
        }
    }
}

/// One bin per integer in `[lo, hi]`; values outside the range are an error.
pub fn histogram_from_values(values: &[i64], lo: i64, hi: i64) -> Result<Histogram> {
    if hi < lo {
        return Err(TvorError::InvalidParameter(format!("empty value range [{lo}, {hi}]")));
    }
    let bins = usize::try_from(hi - lo + 1)
        .map_err(|_| TvorError::InvalidParameter("value range too wide".into()))?;
    let mut counts = vec![0u64; bins];
    for &v in values {
        if v < lo || v > hi {
            return Err(TvorError::InvalidParameter(format!(
                "value {v} outside [{lo}, {hi}]"
            )));
        }
        counts[(v - lo) as usize] += 1;
    }
    Histogram::new(counts)
}

/// Discrete total variation: sum of absolute differences of adjacent bins.
pub fn dtv(h: &Histogram) -> u64 {
    h.counts.windows(2).map(|w| w[0].abs_diff(w[1])).sum()
}

/// DTV plus the wrap-around term between the last and first bin.
pub fn circular_dtv(h: &Histogram) -> Result<u64> {
    let n = h.bins();
    if n < 2 {
        return Err(TvorError::TooFewBins(n, 2));
    }
    Ok(dtv(h) + h.counts[0].abs_diff(h.counts[n - 1]))
}

/// Checks that every histogram has the same number of bins.
pub fn ensure_shared_bins(hists: &[Histogram]) -> Result<usize> {
    let Some(first) = hists.first() else {
        return Err(TvorError::TooFewHistograms {
            required: 1,
            found: 0,
        });
    };
    let n = first.bins();
    for h in hists {
        if h.bins() != n {
            return Err(TvorError::BinMismatch {
                expected: n,
                found: h.bins(),
                context: h.label().map(str::to_owned),
            });
        }
    }
    Ok(n)
}

/// Draws `size` items without replacement from the multiset described by `h`.
///
/// Bins are visited in order and each receives a hypergeometric share of the
/// remaining draws, which is the exact joint law of sampling without
/// replacement.
pub fn subsample(h: &Histogram, size: u64, seed: RngSeed) -> Result<Histogram> {
    let mut rng = seed.rng();
    subsample_with(h, size, &mut rng)
}

pub(crate) fn subsample_with<R: Rng + ?Sized>(
    h: &Histogram,
    size: u64,
    rng: &mut R,
) -> Result<Histogram> {
    let total = h.total();
    if size > total {
        return Err(TvorError::SubsampleTooLarge {
            requested: size,
            available: total,
        });
    }
    let mut out = vec![0u64; h.bins()];
    let mut remaining_pop = total;
    let mut remaining_draws = size;
    for (slot, &count) in out.iter_mut().zip(&h.counts) {
        if remaining_draws == 0 {
            break;
        }
        let taken = if count == 0 {
            0
        } else if count == remaining_pop {
            remaining_draws
        } else if remaining_draws == remaining_pop {
            count
        } else {
            match Hypergeometric::new(remaining_pop, count, remaining_draws) {
                Ok(d) => d.sample(rng),
                Err(_) => hypergeometric_from_mode(remaining_pop, count, remaining_draws, rng),
            }
        };
        *slot = taken;
        remaining_pop -= count;
        remaining_draws -= taken;
    }
    Ok(Histogram {
        counts: out,
        label: h.label.clone(),
    })
}

/// Number of marked items among `draws` taken without replacement from
/// `population` items of which `marked` are marked.
///
/// Inverse transform that walks outwards from the mode, with the mode
/// probability computed in log space so that large populations stay finite.
fn hypergeometric_from_mode<R: Rng + ?Sized>(population: u64, marked: u64, draws: u64, rng: &mut R) -> u64 {
    let (n, k, d) = (population as f64, marked as f64, draws as f64);
    let lo = draws.saturating_sub(population - marked);
    let hi = marked.min(draws);
    let mode = ((((d + 1.0) * (k + 1.0)) / (n + 2.0)).floor() as u64).clamp(lo, hi);
    let ln_p = ln_binomial(marked, mode) + ln_binomial(population - marked, draws - mode)
        - ln_binomial(population, draws);
    let p_mode = ln_p.exp();
    let mut u: f64 = rng.random::<f64>() - p_mode;
    if u <= 0.0 {
        return mode;
    }
    let (mut down, mut p_down) = (mode, p_mode);
    let (mut up, mut p_up) = (mode, p_mode);
    loop {
        let mut moved = false;
        if down > lo {
            let x = down as f64;
            p_down *= x * (n - k - d + x) / ((k - x + 1.0) * (d - x + 1.0));
            down -= 1;
            u -= p_down;
            if u <= 0.0 {
                return down;
            }
            moved = true;
        }
        if up < hi {
            let x = up as f64;
            p_up *= (k - x) * (d - x) / ((x + 1.0) * (n - k - d + x + 1.0));
            up += 1;
            u -= p_up;
            if u <= 0.0 {
                return up;
            }
            moved = true;
        }
        if !moved {
            return mode;
        }
    }
}

/// How the source of each heaping move is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeapingSource {
    /// A uniformly random item, i.e. a bin with probability proportional to its count.
    #[default]
    Items,
    /// A uniformly random non-empty bin.
    Bins,
}

/// Moves `floor(fraction * N)` random items to the nearest bin whose 1-based
/// ordinal is a multiple of `period` (ties go to the lower ordinal).
///
/// Items drawn from a bin that is already a target stay put.
pub fn apply_heaping(
    h: &Histogram,
    fraction: f64,
    period: usize,
    seed: RngSeed,
) -> Result<Histogram> {
    apply_heaping_with(h, fraction, period, HeapingSource::Items, seed)
}

pub fn apply_heaping_with(
    h: &Histogram,
    fraction: f64,
    period: usize,
    source: HeapingSource,
    seed: RngSeed,
) -> Result<Histogram> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(TvorError::InvalidParameter(format!(
            "heaping fraction {fraction} outside [0, 1]"
        )));
    }
    if period == 0 {
        return Err(TvorError::InvalidParameter("heaping period must be >= 1".into()));
    }
    let mut out = h.clone();
    let total = h.total();
    if total == 0 {
        return Ok(out);
    }
    let moves = (fraction * total as f64).floor() as u64;
    let targets: Vec<Option<usize>> = (0..h.bins())
        .map(|i| nearest_target(i, h.bins(), period))
        .collect();
    let mut rng = seed.rng();
    for _ in 0..moves {
        let from = match source {
            HeapingSource::Items => {
                let mut pick = rng.random_range(0..total);
                let mut idx = 0;
                while pick >= out.counts[idx] {
                    pick -= out.counts[idx];
                    idx += 1;
                }
                idx
            }
            HeapingSource::Bins => {
                let nonempty = out.counts.iter().filter(|&&c| c > 0).count();
                let k = rng.random_range(0..nonempty);
                out.counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .nth(k)
                    .map(|(i, _)| i)
                    .expect("k < number of non-empty bins")
            }
        };
        if let Some(to) = targets[from] {
            if to != from {
                out.counts[from] -= 1;
                out.counts[to] += 1;
            }
        }
    }
    Ok(out)
}

/// Nearest 0-based index whose 1-based ordinal is divisible by `period`.
fn nearest_target(index: usize, bins: usize, period: usize) -> Option<usize> {
    let ordinal = index + 1;
    let lower = ordinal / period * period;
    let upper = lower + period;
    let lower_ok = lower >= 1;
    let upper_ok = upper <= bins;
    let chosen = match (lower_ok, upper_ok) {
        (true, true) => {
            if ordinal - lower <= upper - ordinal {
                lower
            } else {
                upper
            }
        }
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => return None,
    };
    Some(chosen - 1)
}
