//! Cheat-proof switch rates.
//!
//! When the majority restaurant holds `M + Δ + 1` agents, each of them moves
//! with probability `p`. The rate is fixed by making a majority agent
//! indifferent between staying and switching. In the large-`M` limit the
//! number of movers is Poisson with mean `λ = p (M + Δ + 1)` and the
//! condition reduces to
//!
//! ```text
//! f(λ) = 2 Σ_{r<Δ} Pois(r; λ) − 1 + Pois(Δ; λ) = 0
//! ```
//!
//! `f` is strictly decreasing, `f'(λ) = −(Pois(Δ−1; λ) + Pois(Δ; λ))`, so a
//! bracketing bisection finds its single root. At finite `M` the same
//! balance is written with binomial sums over the `M + Δ` other majority
//! agents and solved for `p` directly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dist::{binomial_cdf, binomial_sf, poisson_cdf, poisson_pmf};
use crate::error::{domain, Error, Result};

/// Residual tolerance used when none is given.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Limit of `λ(Δ) − Δ` for large Δ.
pub const ASYMPTOTE_GAP: f64 = 1.0 / 6.0;

const MAX_BISECTIONS: usize = 400;

/// Residual of the Poisson-limit indifference condition at `(lambda, delta)`.
pub fn indifference_residual(lambda: f64, delta: u64) -> Result<f64> {
    if delta == 0 {
        return Err(domain("the indifference condition has no solution at delta = 0"));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    let below = poisson_cdf(delta - 1, lambda)?;
    let at = poisson_pmf(delta, lambda)?;
    Ok(2.0 * below - 1.0 + at)
}

/// Bisection for a root of a decreasing function on `[lo, hi]`.
///
/// Stops when the residual is within `tolerance` or the bracket can no longer
/// be split. Returns `None` when the endpoints do not straddle zero.
fn bisect_decreasing<F>(mut lo: f64, mut hi: f64, tolerance: f64, f: F) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo.abs() <= tolerance {
        return Ok(Some(lo));
    }
    if f_hi.abs() <= tolerance {
        return Ok(Some(hi));
    }
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Ok(None);
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid.abs() <= tolerance {
            return Ok(Some(mid));
        }
        if f_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    let res = f(mid)?;
    if res.abs() <= tolerance {
        Ok(Some(mid))
    } else {
        Err(Error::Numeric(format!("bracket collapsed at {mid} with residual {res:e} above tolerance {tolerance:e}")))
    }
}

fn check_tolerance(tolerance: f64) -> Result<()> {
    if tolerance.is_finite() && tolerance > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("tolerance must be positive, got {tolerance}")))
    }
}

/// Poisson-limit cheat-proof mean number of switchers for excess `delta`.
pub fn solve_lambda(delta: u64, tolerance: f64) -> Result<f64> {
    if delta == 0 {
        return Err(domain("no cheat-proof lambda exists at delta = 0"));
    }
    check_tolerance(tolerance)?;
    let d = delta as f64;
    let f = |lam| indifference_residual(lam, delta);
    if let Some(root) = bisect_decreasing(d, d + 1.0, tolerance, f)? {
        return Ok(root);
    }
    bisect_decreasing(0.5 * d, d + 2.0, tolerance, f)?
        .ok_or_else(|| Error::Numeric(format!("no sign change of the indifference residual for delta = {delta}")))
}

/// `solve_lambda(delta) − delta`.
pub fn lambda_gap(delta: u64) -> Result<f64> {
    Ok(solve_lambda(delta, DEFAULT_TOLERANCE)? - delta as f64)
}

/// Balance of Bob's two payoffs at finite `M`: losing-if-switch mass minus
/// winning-if-stay mass, over the `M + Δ` other majority agents.
pub fn finite_residual(p: f64, delta: u64, m: u64) -> Result<f64> {
    if delta == 0 {
        return Err(domain("delta must be at least 1"));
    }
    let trials = m + delta;
    let switch_wins = binomial_cdf(delta - 1, trials, p)?;
    let stay_wins = binomial_sf(delta, trials, p)?;
    Ok(switch_wins - stay_wins)
}

/// Exact per-agent switch probability at finite `M`.
pub fn solve_p_finite(delta: u64, m: u64, tolerance: f64) -> Result<f64> {
    if delta == 0 || m == 0 {
        return Err(domain(format!("need delta >= 1 and M >= 1, got delta={delta} M={m}")));
    }
    if delta > m {
        return Err(domain(format!("delta {delta} exceeds M {m}")));
    }
    check_tolerance(tolerance)?;
    let f = |p| finite_residual(p, delta, m);
    bisect_decreasing(0.0, 1.0, tolerance, f)?
        .filter(|p| *p > 0.0 && *p < 1.0)
        .ok_or_else(|| Error::Numeric(format!("no root in (0, 1) for delta={delta} M={m}")))
}

/// Solved λ(Δ) for `1..=delta_max`, with the `Δ + 1/6` asymptote beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaTable {
    entries: BTreeMap<u64, f64>,
    tolerance: f64,
    delta_max: u64,
    asymptote_gap: f64,
}

impl LambdaTable {
    pub fn build(delta_max: u64, tolerance: f64) -> Result<Self> {
        let entries = (1..=delta_max).map(|d| solve_lambda(d, tolerance).map(|lam| (d, lam))).collect::<Result<_>>()?;
        Ok(Self { entries, tolerance, delta_max, asymptote_gap: ASYMPTOTE_GAP })
    }

    /// Table sized for a population of `n`: `ceil(3 sqrt(n)) + 10` rows.
    pub fn for_population(n: usize, tolerance: f64) -> Result<Self> {
        Self::build(default_delta_max(n), tolerance)
    }

    pub fn lambda(&self, delta: u64) -> Option<f64> {
        match self.entries.get(&delta) {
            Some(&lam) => Some(lam),
            None if delta > self.delta_max => Some(delta as f64 + self.asymptote_gap),
            None => None,
        }
    }

    pub fn entries(&self) -> &BTreeMap<u64, f64> {
        &self.entries
    }

    pub fn delta_max(&self) -> u64 {
        self.delta_max
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn asymptote_gap(&self) -> f64 {
        self.asymptote_gap
    }
}

pub fn default_delta_max(n: usize) -> u64 {
    (3.0 * (n as f64).sqrt()).ceil() as u64 + 10
}
