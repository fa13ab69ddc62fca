//! Expected discrete total variation of multinomial histograms.
//!
//! `F(n, N)` is the expected DTV of a histogram with `n` bins filled by `N`
//! independent draws that are uniform over the bins. This module evaluates it
//! exactly (closed form for two bins, a double sum over multinomial
//! coefficients otherwise), asymptotically, and by brute-force enumeration,
//! together with bounds and the theoretical DTV of named distributions.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::distribution::{DistributionKind, DistributionSpec};
use crate::error::{Result, TvorError};
use crate::numeric::{compensated_sum, ln_factorial_table};

/// Default cap on the number of outcomes the oracle will enumerate.
pub const DEFAULT_ORACLE_LIMIT: u64 = 1_000_000;

/// Above this sample size the uniform oracle accumulates in floating point
/// instead of exact integers.
const EXACT_ORACLE_MAX_SIZE: u64 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdtvMethod {
    ClosedForm2,
    Exact,
    Asymptotic,
    Circular,
    Oracle,
    MonteCarlo,
}

impl fmt::Display for EdtvMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdtvMethod::ClosedForm2 => "closed2",
            EdtvMethod::Exact => "exact",
            EdtvMethod::Asymptotic => "asymptotic",
            EdtvMethod::Circular => "circular",
            EdtvMethod::Oracle => "oracle",
            EdtvMethod::MonteCarlo => "monte-carlo",
        })
    }
}

impl FromStr for EdtvMethod {
    type Err = TvorError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "closed2" | "closed-form-2" => EdtvMethod::ClosedForm2,
            "exact" => EdtvMethod::Exact,
            "asymptotic" => EdtvMethod::Asymptotic,
            "circular" => EdtvMethod::Circular,
            "oracle" => EdtvMethod::Oracle,
            "monte-carlo" | "mc" => EdtvMethod::MonteCarlo,
            other => return Err(TvorError::Parse(format!("unknown method `{other}`"))),
        })
    }
}

/// An expected DTV value together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedDtv {
    pub bins: usize,
    pub size: u64,
    pub value: f64,
    pub method: EdtvMethod,
}

/// Evaluates `F(n, N)` (or its circular variant) with the chosen method.
///
/// Monte Carlo estimation lives in [`crate::model::build_mc_table`].
pub fn expected_dtv(bins: usize, size: u64, method: EdtvMethod) -> Result<ExpectedDtv> {
    let value = match method {
        EdtvMethod::ClosedForm2 => {
            if bins != 2 {
                return Err(TvorError::InvalidParameter(
                    "the two-bin closed form needs n = 2".into(),
                ));
            }
            f2_exact(size)
        }
        EdtvMethod::Exact => f_exact(bins, size)?,
        EdtvMethod::Asymptotic => f_asymptotic(bins, size)?,
        EdtvMethod::Circular => f_circular(bins, size)?,
        EdtvMethod::Oracle => f_oracle(bins, size, None, DEFAULT_ORACLE_LIMIT)?,
        EdtvMethod::MonteCarlo => {
            return Err(TvorError::InvalidParameter(
                "use a Monte Carlo table for simulated expectations".into(),
            ))
        }
    };
    Ok(ExpectedDtv {
        bins,
        size,
        value,
        method,
    })
}

fn require_bins(bins: usize) -> Result<()> {
    if bins < 2 {
        Err(TvorError::TooFewBins(bins, 2))
    } else {
        Ok(())
    }
}

/// `F(2, N) = 2^(1-N) * floor((N+1)/2) * C(N, floor(N/2))`, in log space.
///
/// For odd `N` this equals the value at `N + 1`, so both are evaluated from
/// the even form `2^(1-m) * (m/2) * C(m, m/2)` and agree bit for bit.
pub fn f2_exact(size: u64) -> f64 {
    if size == 0 {
        return 0.0;
    }
    let r = (size + size % 2) / 2;
    2.0 * r as f64 * central_binomial_ratio(r)
}

/// `C(2r, r) / 4^r`, accurate to a few ulps for every `r`.
fn central_binomial_ratio(r: u64) -> f64 {
    if r < 32 {
        return (1..=r).fold(1.0, |acc, i| acc * (2 * i - 1) as f64 / (2 * i) as f64);
    }
    let x = 1.0 / r as f64;
    let x2 = x * x;
    let tail = x * (-1.0 / 8.0 + x2 * (1.0 / 192.0 + x2 * (-1.0 / 640.0 + x2 * 17.0 / 14336.0)));
    tail.exp() / (std::f64::consts::PI * r as f64).sqrt()
}

/// `F(2, N)` as an exact fraction `(numerator, denominator)`.
pub fn f2_exact_fraction(size: u64) -> (BigUint, BigUint) {
    if size == 0 {
        return (BigUint::zero(), BigUint::one());
    }
    let half_up = BigUint::from((size + 1) / 2);
    let numerator = half_up * binomial_big(size, size / 2);
    (numerator, BigUint::one() << (size - 1))
}

fn binomial_big(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= BigUint::from(n - i);
        acc /= BigUint::from(i + 1);
    }
    acc
}

/// Exact expected DTV for `n >= 2` uniform bins and sample size `N`.
///
/// For `n >= 3` this is
/// `2(n-1) sum_{k1<k2, k1+k2<=N} C(N; k1, k2, N-k1-k2) (n-2)^(N-k1-k2) (k2-k1) / n^N`,
/// evaluated term by term in log space. The outer index is split across
/// threads; partial sums are combined in a fixed order with compensation, so
/// the result does not depend on the thread count.
pub fn f_exact(bins: usize, size: u64) -> Result<f64> {
    require_bins(bins)?;
    if bins == 2 {
        return Ok(f2_exact(size));
    }
    if size == 0 {
        return Ok(0.0);
    }
    let lnf = ln_factorial_table(size);
    let n = bins as f64;
    let ln_rest = (n - 2.0).ln();
    let ln_scale = lnf[size as usize] - size as f64 * n.ln() + (2.0 * (n - 1.0)).ln();
    let partials: Vec<f64> = (0..=size / 2)
        .into_par_iter()
        .map(|k1| {
            let mut acc = crate::numeric::CompensatedSum::new();
            let mut k2 = k1 + 1;
            while k1 + k2 <= size {
                let rest = size - k1 - k2;
                let ln_term = ln_scale - lnf[k1 as usize] - lnf[k2 as usize] - lnf[rest as usize]
                    + rest as f64 * ln_rest
                    + ((k2 - k1) as f64).ln();
                acc.add(ln_term.exp());
                k2 += 1;
            }
            acc.value()
        })
        .collect();
    Ok(compensated_sum(partials))
}

/// `2(n-1) / sqrt(n pi) * sqrt(N)`.
pub fn f_asymptotic(bins: usize, size: u64) -> Result<f64> {
    require_bins(bins)?;
    let n = bins as f64;
    Ok(2.0 * (n - 1.0) / (n * std::f64::consts::PI).sqrt() * (size as f64).sqrt())
}

/// Expected circular DTV, `n / (n-1) * F(n, N)`.
pub fn f_circular(bins: usize, size: u64) -> Result<f64> {
    require_bins(bins)?;
    Ok(bins as f64 / (bins as f64 - 1.0) * f_exact(bins, size)?)
}

/// Upper bound `(n-1) sqrt(2N/n)` on the expected DTV of uniform histograms.
pub fn jensen_upper_bound(bins: usize, size: u64) -> Result<f64> {
    require_bins(bins)?;
    let n = bins as f64;
    Ok((n - 1.0) * (2.0 * size as f64 / n).sqrt())
}

/// Number of histograms with `n` bins and `N` items, `C(N+n-1, n-1)`.
pub fn outcome_count(bins: usize, size: u64) -> f64 {
    if bins == 0 {
        return 0.0;
    }
    ln_binomial(size + bins as u64 - 1, bins as u64 - 1).exp().round()
}

/// Expected DTV by enumerating every histogram with `n` bins and `N` items.
///
/// Outcomes are visited in lexicographic order and weighted by their exact
/// multinomial probability. With uniform bins and moderate `N` the weights are
/// accumulated as exact integers over the common denominator `n^N`; otherwise
/// each weight is formed in log space and summed with compensation.
pub fn f_oracle(bins: usize, size: u64, probs: Option<&[f64]>, limit: u64) -> Result<f64> {
    if bins == 0 {
        return Err(TvorError::TooFewBins(0, 1));
    }
    if let Some(p) = probs {
        if p.len() != bins {
            return Err(TvorError::BinMismatch {
                expected: bins,
                found: p.len(),
                context: Some("oracle probabilities".into()),
            });
        }
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(TvorError::InvalidParameter(
                "oracle probabilities must be finite and non-negative".into(),
            ));
        }
    }
    let outcomes = outcome_count(bins, size);
    if outcomes > limit as f64 {
        return Err(TvorError::OracleExplosion { outcomes, limit });
    }
    match probs {
        None if size <= EXACT_ORACLE_MAX_SIZE => Ok(oracle_exact_uniform(bins, size)),
        None => {
            let p = vec![1.0 / bins as f64; bins];
            Ok(oracle_float(&p, size))
        }
        Some(p) => Ok(oracle_float(p, size)),
    }
}

/// Calls `visit` for every composition of `size` into `bins` parts, in
/// lexicographic order.
fn for_each_composition(bins: usize, size: u64, mut visit: impl FnMut(&[u64])) {
    let mut parts = vec![0u64; bins];
    parts[bins - 1] = size;
    loop {
        visit(&parts);
        // next composition: find the rightmost non-last position that can grow
        let mut i = bins - 1;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            let tail: u64 = parts[i + 1..].iter().sum();
            if tail > 0 {
                parts[i] += 1;
                for p in parts[i + 1..].iter_mut() {
                    *p = 0;
                }
                parts[bins - 1] = tail - 1;
                break;
            }
        }
    }
}

fn composition_dtv(parts: &[u64]) -> u64 {
    parts.windows(2).map(|w| w[0].abs_diff(w[1])).sum()
}

fn oracle_exact_uniform(bins: usize, size: u64) -> f64 {
    let mut factorials = vec![BigUint::one()];
    for k in 1..=size {
        let next = factorials.last().unwrap() * BigUint::from(k);
        factorials.push(next);
    }
    let mut numerator = BigUint::zero();
    for_each_composition(bins, size, |parts| {
        let d = composition_dtv(parts);
        if d == 0 {
            return;
        }
        let mut denom = BigUint::one();
        for &k in parts {
            if k > 1 {
                denom *= &factorials[k as usize];
            }
        }
        let coef = &factorials[size as usize] / denom;
        numerator += coef * BigUint::from(d);
    });
    let denominator = BigUint::from(bins).pow(size as u32);
    ratio_to_f64(&numerator, &denominator)
}

fn oracle_float(probs: &[f64], size: u64) -> f64 {
    let lnf = ln_factorial_table(size);
    let ln_p: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    let mut acc = crate::numeric::CompensatedSum::new();
    for_each_composition(probs.len(), size, |parts| {
        let d = composition_dtv(parts);
        if d == 0 {
            return;
        }
        let mut ln_w = lnf[size as usize];
        for (&k, &lp) in parts.iter().zip(&ln_p) {
            if k > 0 {
                if lp == f64::NEG_INFINITY {
                    return;
                }
                ln_w += k as f64 * lp - lnf[k as usize];
            }
        }
        acc.add(ln_w.exp() * d as f64);
    });
    acc.value()
}

/// Correctly scaled conversion of an exact ratio to the nearest-ish f64.
fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = (den.bits() as i64 - num.bits() as i64 + 80).max(0) as u64;
    let q = (num << shift) / den;
    let mantissa = q.to_f64().unwrap_or(f64::INFINITY);
    mantissa * 2f64.powi(-(shift as i32))
}

/// `sum |p_{i+1} - p_i|` over the spec's bin probabilities.
pub fn theoretical_dtv(spec: &DistributionSpec) -> Result<f64> {
    let p = spec.bin_probabilities()?;
    probabilities_dtv(&p)
}

/// DTV of an explicit probability vector.
pub fn probabilities_dtv(p: &[f64]) -> Result<f64> {
    if p.len() < 2 {
        return Err(TvorError::TooFewBins(p.len(), 2));
    }
    Ok(compensated_sum(p.windows(2).map(|w| (w[1] - w[0]).abs())))
}

/// Distributions with a known closed-form (approximate) theoretical DTV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClosedForm {
    Uniform,
    /// Exact: `(4n-8)/n^2` for even `n`, `(4n-6)/n^2` for odd `n`.
    Triangular,
    /// `~ 3/n`.
    Square,
    /// `~ 3/(2n)`.
    SquareRoot,
    /// Exactly `p` on the untruncated support.
    Geometric { p: f64 },
    /// `~ 2 lambda^floor(lambda) e^-lambda / floor(lambda)!`, for `lambda > 1`.
    Poisson { lambda: f64 },
    /// Symmetric binomial `B(n, 1/2)`: `~ sqrt(8 / (pi n))` with `n` the trials.
    Binomial,
    /// `N(0, sigma^2)` on `[-c, c]`: `~ 2c / (n sigma) * sqrt(2/pi)`.
    Normal { sigma: f64, c: f64 },
}

impl ClosedForm {
    /// Closed form matching a spec, with the bin count it implies.
    pub fn from_spec(spec: &DistributionSpec) -> Result<(ClosedForm, usize)> {
        let n = spec.bins()?;
        let form = match &spec.kind {
            DistributionKind::Uniform => ClosedForm::Uniform,
            DistributionKind::Triangular { .. } => ClosedForm::Triangular,
            DistributionKind::Square => ClosedForm::Square,
            DistributionKind::SquareRoot => ClosedForm::SquareRoot,
            DistributionKind::Geometric { p } => ClosedForm::Geometric { p: *p },
            DistributionKind::Poisson { lambda } => ClosedForm::Poisson { lambda: *lambda },
            DistributionKind::Binomial { trials, .. } => return Ok((ClosedForm::Binomial, *trials as usize)),
            DistributionKind::Normal { sigma, .. } => match spec.binning {
                crate::distribution::Binning::Interval { lo, hi, .. } => ClosedForm::Normal {
                    sigma: *sigma,
                    c: (hi - lo) / 2.0,
                },
                _ => unreachable!("validated"),
            },
            other => {
                return Err(TvorError::InvalidParameter(format!(
                    "no closed-form DTV for {other:?}"
                )))
            }
        };
        Ok((form, n))
    }
}

impl FromStr for ClosedForm {
    type Err = TvorError;

    /// Accepts the same `kind(key=value, ...)` syntax as distribution specs,
    /// without binning keys: `normal(sigma=1, c=5)`, `geometric(p=0.3)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, body) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], &s[i + 1..s.len() - 1]),
            Some(_) => return Err(TvorError::Parse(format!("`{s}`: missing closing parenthesis"))),
            None => (s, ""),
        };
        let mut params = std::collections::BTreeMap::new();
        for item in body.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| TvorError::Parse(format!("expected key=value, got `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| TvorError::Parse(format!("`{k}` is not a number")))?;
            params.insert(k.trim().to_ascii_lowercase(), v);
        }
        let get = |k: &str| {
            params
                .get(k)
                .copied()
                .ok_or_else(|| TvorError::Parse(format!("`{name}` needs `{k}`")))
        };
        Ok(match name.trim().to_ascii_lowercase().as_str() {
            "uniform" => ClosedForm::Uniform,
            "triangular" => ClosedForm::Triangular,
            "square" | "quadratic" => ClosedForm::Square,
            "square-root" | "sqrt" | "squareroot" => ClosedForm::SquareRoot,
            "geometric" => ClosedForm::Geometric { p: get("p")? },
            "poisson" => ClosedForm::Poisson { lambda: get("lambda")? },
            "binomial" => ClosedForm::Binomial,
            "normal" => ClosedForm::Normal {
                sigma: get("sigma")?,
                c: get("c")?,
            },
            other => return Err(TvorError::Parse(format!("unknown closed-form kind `{other}`"))),
        })
    }
}

/// Closed-form theoretical DTV for `n` bins (trials, for the binomial).
pub fn closed_form_dtv(form: ClosedForm, bins: usize) -> Result<f64> {
    if bins == 0 {
        return Err(TvorError::TooFewBins(0, 1));
    }
    let n = bins as f64;
    Ok(match form {
        ClosedForm::Uniform => 0.0,
        ClosedForm::Triangular => {
            if bins % 2 == 0 {
                (4.0 * n - 8.0) / (n * n)
            } else {
                (4.0 * n - 6.0) / (n * n)
            }
        }
        ClosedForm::Square => 3.0 / n,
        ClosedForm::SquareRoot => 3.0 / (2.0 * n),
        ClosedForm::Geometric { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(TvorError::InvalidParameter(format!("geometric p={p} outside (0, 1]")));
            }
            p
        }
        ClosedForm::Poisson { lambda } => {
            if !(lambda > 1.0 && lambda.is_finite()) {
                return Err(TvorError::InvalidParameter(format!(
                    "poisson closed form needs lambda > 1, got {lambda}"
                )));
            }
            let m = lambda.floor();
            2.0 * (m * lambda.ln() - lambda - ln_factorial(m as u64)).exp()
        }
        ClosedForm::Binomial => (8.0 / (std::f64::consts::PI * n)).sqrt(),
        ClosedForm::Normal { sigma, c } => {
            if !(sigma > 0.0 && c > 0.0) {
                return Err(TvorError::InvalidParameter("normal needs sigma > 0 and c > 0".into()));
            }
            2.0 * c / (n * sigma) * (2.0 / std::f64::consts::PI).sqrt()
        }
    })
}

/// `||D||_V * N + 2 sqrt(n-1) sqrt(N)`: expected DTV bound for any binned law.
pub fn nonuniform_upper_bound(spec: &DistributionSpec, size: u64) -> Result<f64> {
    let p = spec.bin_probabilities()?;
    let tdtv = probabilities_dtv(&p)?;
    let n = p.len() as f64;
    let size = size as f64;
    Ok(tdtv * size + 2.0 * (n - 1.0).sqrt() * size.sqrt())
}

/// One row of the exact-versus-asymptotic comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxRow {
    pub n: usize,
    #[serde(rename = "N")]
    pub size: u64,
    pub exact: f64,
    pub asymptotic: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

/// Exact and asymptotic `F(n, N)` over a grid, with their discrepancy.
pub fn approximation_error_grid(bins: &[usize], sizes: &[u64]) -> Result<Vec<ApproxRow>> {
    let mut rows = Vec::with_capacity(bins.len() * sizes.len());
    for &n in bins {
        for &size in sizes {
            let exact = f_exact(n, size)?;
            let asymptotic = f_asymptotic(n, size)?;
            let abs_err = (asymptotic - exact).abs();
            let rel_err = if exact > 0.0 { abs_err / exact } else { f64::NAN };
            rows.push(ApproxRow {
                n,
                size,
                exact,
                asymptotic,
                abs_err,
                rel_err,
            });
        }
    }
    Ok(rows)
}

/// `F(2, x)` for real `x >= 0`, linear between neighbouring integers.
pub fn f2_interpolated(x: f64) -> f64 {
    let lo = x.floor().max(0.0);
    let t = x - lo;
    let a = f2_exact(lo as u64);
    if t == 0.0 {
        return a;
    }
    a + t * (f2_exact(lo as u64 + 1) - a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBinComparison {
    pub n: usize,
    #[serde(rename = "N")]
    pub size: u64,
    pub exact: f64,
    /// `(n-1) F(2, 2N/n)`.
    pub two_bin_form: f64,
    pub rel_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub two_bin: Vec<TwoBinComparison>,
    /// `(n, N)` where `F(n, N+1) > F(n, N)` failed (`>=` for `n = 2`).
    pub monotonicity_violations: Vec<(usize, u64)>,
    /// `(n, N)` where `F(n, N+1) + F(n, N-1) < 2 F(n, N)` failed.
    pub concavity_violations: Vec<(usize, u64)>,
    /// Bin counts for which concavity is not expected (`n = 2`).
    pub concavity_skipped: Vec<usize>,
    pub checked_points: usize,
}

impl HypothesisReport {
    pub fn max_rel_deviation(&self) -> f64 {
        self.two_bin
            .iter()
            .map(|r| r.rel_deviation)
            .fold(0.0, f64::max)
    }
}

/// Numerically checks the two-bin approximation `F(n,N) ~ (n-1) F(2, 2N/n)`
/// and that `N -> F(n, N)` is increasing and, for `n >= 3`, strictly concave.
///
/// `sizes` is treated as a set of consecutive points: monotonicity is checked
/// between `N` and `N+1`, concavity at `N` using `N-1` and `N+1`.
pub fn hypothesis_checks(bins: &[usize], sizes: &[u64]) -> Result<HypothesisReport> {
    let mut report = HypothesisReport::default();
    for &n in bins {
        require_bins(n)?;
        if n == 2 {
            report.concavity_skipped.push(n);
        }
        for &size in sizes {
            let exact = f_exact(n, size)?;
            let two_bin_form = (n as f64 - 1.0) * f2_interpolated(2.0 * size as f64 / n as f64);
            let rel_deviation = if exact > 0.0 {
                (exact - two_bin_form).abs() / exact
            } else {
                0.0
            };
            report.two_bin.push(TwoBinComparison {
                n,
                size,
                exact,
                two_bin_form,
                rel_deviation,
            });
            let next = f_exact(n, size + 1)?;
            let increasing = if n == 2 { next >= exact } else { next > exact };
            if !increasing {
                report.monotonicity_violations.push((n, size));
            }
            if n >= 3 && size >= 1 {
                let prev = f_exact(n, size - 1)?;
                if !(next + prev < 2.0 * exact) {
                    report.concavity_violations.push((n, size));
                }
            }
            report.checked_points += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f2_small_values() {
        assert_eq!(f2_exact(0), 0.0);
        assert!((f2_exact(1) - 1.0).abs() < 1e-15);
        // N = 2: outcomes (2,0),(1,1),(0,2) with DTV 2,0,2 and weights 1/4,1/2,1/4
        assert!((f2_exact(2) - 1.0).abs() < 1e-15);
        assert!((f2_exact(3) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn f2_fraction_matches_float() {
        for size in 0..60 {
            let (num, den) = f2_exact_fraction(size);
            let v = ratio_to_f64(&num, &den);
            assert!((v - f2_exact(size)).abs() <= 1e-12 * v.max(1.0), "N={size}");
        }
    }

    #[test]
    fn f_exact_rejects_single_bin() {
        assert_eq!(f_exact(1, 10), Err(TvorError::TooFewBins(1, 2)));
        assert!(f_circular(1, 10).is_err());
    }

    #[test]
    fn f_exact_three_bins_one_ball() {
        assert!((f_exact(3, 1).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        assert!((f_circular(3, 1).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn asymptotic_two_bins() {
        let v = f_asymptotic(2, 100).unwrap();
        assert!((v - (2.0 / std::f64::consts::PI).sqrt() * 10.0).abs() < 1e-12);
    }

    #[test]
    fn jensen_examples() {
        assert!((jensen_upper_bound(2, 100).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(jensen_upper_bound(2, 0).unwrap(), 0.0);
        assert!((jensen_upper_bound(4, 100).unwrap() - 3.0 * 50f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn compositions_are_lexicographic_and_complete() {
        let mut seen = Vec::new();
        for_each_composition(3, 2, |p| seen.push(p.to_vec()));
        assert_eq!(
            seen,
            vec![
                vec![0, 0, 2],
                vec![0, 1, 1],
                vec![0, 2, 0],
                vec![1, 0, 1],
                vec![1, 1, 0],
                vec![2, 0, 0]
            ]
        );
        let mut count = 0;
        for_each_composition(4, 6, |_| count += 1);
        assert_eq!(count as f64, outcome_count(4, 6));
        let mut single = Vec::new();
        for_each_composition(1, 5, |p| single.push(p.to_vec()));
        assert_eq!(single, vec![vec![5]]);
    }

    #[test]
    fn oracle_guard_refuses_with_count() {
        let err = f_oracle(10, 100, None, DEFAULT_ORACLE_LIMIT).unwrap_err();
        match err {
            TvorError::OracleExplosion { outcomes, limit } => {
                assert!(outcomes > 1e12);
                assert_eq!(limit, DEFAULT_ORACLE_LIMIT);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn oracle_float_path_matches_exact_path() {
        let exact = f_oracle(4, 9, None, DEFAULT_ORACLE_LIMIT).unwrap();
        let float = oracle_float(&[0.25; 4], 9);
        assert!((exact - float).abs() < 1e-12 * exact);
    }

    #[test]
    fn closed_forms() {
        assert!((closed_form_dtv(ClosedForm::Square, 100).unwrap() - 0.03).abs() < 1e-15);
        assert!((closed_form_dtv(ClosedForm::SquareRoot, 100).unwrap() - 0.015).abs() < 1e-15);
        let normal = closed_form_dtv(ClosedForm::Normal { sigma: 1.0, c: 5.0 }, 50).unwrap();
        assert!((normal - 0.159_577).abs() < 1e-5);
        assert_eq!(closed_form_dtv(ClosedForm::Triangular, 4).unwrap(), 0.5);
        assert!(closed_form_dtv(ClosedForm::Poisson { lambda: 0.5 }, 10).is_err());
        assert!("weibull(k=2)".parse::<ClosedForm>().is_err());
        assert_eq!(
            "normal(sigma=1, c=5)".parse::<ClosedForm>().unwrap(),
            ClosedForm::Normal { sigma: 1.0, c: 5.0 }
        );
    }

    #[test]
    fn closed_form_rejects_beta() {
        let spec = DistributionSpec::beta(2.0, 3.0, 10).unwrap();
        assert!(ClosedForm::from_spec(&spec).is_err());
    }

    #[test]
    fn interpolated_two_bin_at_integers() {
        assert_eq!(f2_interpolated(7.0), f2_exact(7));
        let mid = f2_interpolated(7.5);
        assert!((mid - 0.5 * (f2_exact(7) + f2_exact(8))).abs() < 1e-14);
    }
}
