//! Poisson and binomial kernels plus a seeded binomial sampler.
//!
//! Probability masses are evaluated in log space through the saddle-point
//! decomposition of Loader (2000): the log-gamma function is split into its
//! Stirling approximation and the Stirling error `stirlerr`, and the
//! deviance term `bd0` is computed without cancellation. This keeps the
//! masses accurate to a few ulps for Poisson means and binomial trial counts
//! in the millions, where a naive `ln Γ` difference loses most of its digits.
//!
//! Cumulative sums run outward from the requested point toward the thin
//! tail, so every partial sum adds terms of decreasing magnitude.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Relative size below which a tail term no longer changes a partial sum.
const SUM_CUTOFF: f64 = 1e-18;

/// `ln n!` for small n, from the exactly representable factorial.
fn ln_factorial_small(n: u64) -> f64 {
    debug_assert!(n <= 20);
    (1..=n).map(|k| k as f64).product::<f64>().ln()
}

/// Error of Stirling's approximation to `ln n!`:
/// `ln n! - (n + 1/2) ln n + n - ln sqrt(2 pi)`.
pub(crate) fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;

    debug_assert!(n >= 1);
    let x = n as f64;
    if n <= 15 {
        return ln_factorial_small(n) - (x + 0.5) * x.ln() + x - LN_SQRT_2PI;
    }
    let xx = x * x;
    if n > 500 {
        (S0 - S1 / xx) / x
    } else if n > 80 {
        (S0 - (S1 - S2 / xx) / xx) / x
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / xx) / xx) / xx) / x
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / xx) / xx) / xx) / xx) / x
    }
}

/// Deviance term `x ln(x/np) + np - x`, evaluated by series near `x = np`.
pub(crate) fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let v2 = v * v;
        let mut ej = 2.0 * x * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

fn check_mean(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(domain(format!("Poisson mean must be finite and >= 0, got {lambda}")))
    }
}

fn check_prob(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(domain(format!("probability must lie in [0, 1], got {p}")))
    }
}

/// Natural log of the Poisson mass at `r`; `-inf` where the mass is zero.
pub fn ln_poisson_pmf(r: u64, lambda: f64) -> Result<f64> {
    check_mean(lambda)?;
    Ok(ln_poisson_raw(r, lambda))
}

fn ln_poisson_raw(r: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if r == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if r == 0 {
        return -lambda;
    }
    let x = r as f64;
    -stirlerr(r) - bd0(x, lambda) - 0.5 * (LN_2PI + x.ln())
}

fn poisson_raw(r: u64, lambda: f64) -> f64 {
    ln_poisson_raw(r, lambda).exp()
}

/// `P(X = r)` for `X ~ Poisson(lambda)`.
pub fn poisson_pmf(r: u64, lambda: f64) -> Result<f64> {
    check_mean(lambda)?;
    Ok(poisson_raw(r, lambda))
}

/// `P(X <= r)` for `X ~ Poisson(lambda)`.
pub fn poisson_cdf(r: u64, lambda: f64) -> Result<f64> {
    check_mean(lambda)?;
    if lambda == 0.0 {
        return Ok(1.0);
    }
    if (r as f64) < lambda {
        Ok(poisson_lower_sum(r, lambda))
    } else {
        Ok(1.0 - poisson_upper_sum(r + 1, lambda))
    }
}

/// `P(X > r)` for `X ~ Poisson(lambda)`, accurate in the far upper tail.
pub fn poisson_sf(r: u64, lambda: f64) -> Result<f64> {
    check_mean(lambda)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    if (r as f64) < lambda {
        Ok(1.0 - poisson_lower_sum(r, lambda))
    } else {
        Ok(poisson_upper_sum(r + 1, lambda))
    }
}

/// `sum_{k=0}^{r} pmf(k)`, for `r < lambda` so terms shrink walking down.
fn poisson_lower_sum(r: u64, lambda: f64) -> f64 {
    let mut term = poisson_raw(r, lambda);
    let mut sum = term;
    let mut k = r;
    while k > 0 && term > sum * SUM_CUTOFF {
        term *= k as f64 / lambda;
        k -= 1;
        sum += term;
    }
    sum
}

/// `sum_{k>=from} pmf(k)`, for `from > lambda` so terms shrink walking up.
fn poisson_upper_sum(from: u64, lambda: f64) -> f64 {
    let mut term = poisson_raw(from, lambda);
    let mut sum = term;
    let mut k = from;
    while term > sum * SUM_CUTOFF {
        k += 1;
        term *= lambda / k as f64;
        sum += term;
    }
    sum
}

/// Upper summation limit for Poisson sums: past it the neglected mass is
/// below 1e-12 for every mean.
pub fn poisson_tail_bound(lambda: f64) -> u64 {
    (lambda + 12.0 * lambda.sqrt() + 20.0).ceil() as u64
}

fn check_trials(r: u64, n: u64, p: f64) -> Result<()> {
    check_prob(p)?;
    if r > n {
        return Err(domain(format!("successes {r} exceed trials {n}")));
    }
    Ok(())
}

/// Natural log of the binomial mass `C(n, r) p^r (1-p)^(n-r)`.
pub fn ln_binomial_pmf(r: u64, n: u64, p: f64) -> Result<f64> {
    check_trials(r, n, p)?;
    Ok(ln_binomial_raw(r, n, p))
}

fn ln_binomial_raw(r: u64, n: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    if p == 0.0 {
        return if r == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if r == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if r == 0 {
        if n == 0 {
            return 0.0;
        }
        return if p < 0.1 { -bd0(nf, nf * q) - nf * p } else { nf * q.ln() };
    }
    if r == n {
        return if q < 0.1 { -bd0(nf, nf * p) - nf * q } else { nf * p.ln() };
    }
    let x = r as f64;
    let lc = stirlerr(n) - stirlerr(r) - stirlerr(n - r) - bd0(x, nf * p) - bd0(nf - x, nf * q);
    let lf = LN_2PI + x.ln() + (-x / nf).ln_1p();
    lc - 0.5 * lf
}

fn binomial_raw(r: u64, n: u64, p: f64) -> f64 {
    ln_binomial_raw(r, n, p).exp()
}

/// `P(X = r)` for `X ~ Binomial(n, p)`.
pub fn binomial_pmf(r: u64, n: u64, p: f64) -> Result<f64> {
    check_trials(r, n, p)?;
    Ok(binomial_raw(r, n, p))
}

/// `P(X <= r)` for `X ~ Binomial(n, p)`. `r >= n` gives 1.
pub fn binomial_cdf(r: u64, n: u64, p: f64) -> Result<f64> {
    check_prob(p)?;
    if r >= n {
        return Ok(1.0);
    }
    if (r as f64) < n as f64 * p {
        Ok(binomial_lower_sum(r, n, p))
    } else {
        Ok(1.0 - binomial_upper_sum(r + 1, n, p))
    }
}

/// `P(X > r)` for `X ~ Binomial(n, p)`.
pub fn binomial_sf(r: u64, n: u64, p: f64) -> Result<f64> {
    check_prob(p)?;
    if r >= n {
        return Ok(0.0);
    }
    if (r as f64) < n as f64 * p {
        Ok(1.0 - binomial_lower_sum(r, n, p))
    } else {
        Ok(binomial_upper_sum(r + 1, n, p))
    }
}

fn binomial_lower_sum(r: u64, n: u64, p: f64) -> f64 {
    // r < np implies 0 < p, and r < n.
    let odds = (1.0 - p) / p;
    let mut term = binomial_raw(r, n, p);
    let mut sum = term;
    let mut k = r;
    while k > 0 && term > sum * SUM_CUTOFF {
        term *= k as f64 / (n - k + 1) as f64 * odds;
        k -= 1;
        sum += term;
    }
    sum
}

fn binomial_upper_sum(from: u64, n: u64, p: f64) -> f64 {
    if p == 0.0 {
        return 0.0;
    }
    let odds = p / (1.0 - p);
    let mut term = binomial_raw(from, n, p);
    let mut sum = term;
    let mut k = from;
    while k < n && term > sum * SUM_CUTOFF {
        term *= (n - k) as f64 / (k + 1) as f64 * odds;
        k += 1;
        sum += term;
    }
    sum
}

/// Draws a `Binomial(n, p)` count from the caller's stream.
pub fn sample_binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> Result<u64> {
    check_prob(p)?;
    if n == 0 || p == 0.0 {
        return Ok(0);
    }
    if p == 1.0 {
        return Ok(n);
    }
    let dist = Binomial::new(n, p).map_err(|e| domain(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// A validated Poisson or binomial count distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CountDistribution {
    Poisson { lambda: f64 },
    Binomial { n: u64, p: f64 },
}

impl CountDistribution {
    pub fn poisson(lambda: f64) -> Result<Self> {
        check_mean(lambda)?;
        Ok(Self::Poisson { lambda })
    }

    pub fn binomial(n: u64, p: f64) -> Result<Self> {
        check_prob(p)?;
        Ok(Self::Binomial { n, p })
    }

    pub fn pmf(&self, r: u64) -> f64 {
        match *self {
            Self::Poisson { lambda } => poisson_raw(r, lambda),
            Self::Binomial { n, p } if r <= n => binomial_raw(r, n, p),
            Self::Binomial { .. } => 0.0,
        }
    }

    pub fn cdf(&self, r: u64) -> f64 {
        // Parameters were validated on construction.
        match *self {
            Self::Poisson { lambda } => poisson_cdf(r, lambda).unwrap_or(f64::NAN),
            Self::Binomial { n, p } => binomial_cdf(r, n, p).unwrap_or(f64::NAN),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Poisson { lambda } => lambda,
            Self::Binomial { n, p } => n as f64 * p,
        }
    }

    /// Largest count worth summing to: the binomial support end, or the
    /// Poisson truncation point.
    pub fn support_bound(&self) -> u64 {
        match *self {
            Self::Poisson { lambda } => poisson_tail_bound(lambda),
            Self::Binomial { n, .. } => n,
        }
    }
}
