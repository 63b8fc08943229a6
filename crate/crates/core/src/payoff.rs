//! Next-day expected payoffs for minority ("Alice") and majority ("Bob")
//! agents, the no-cheat check, and the marginal-state (Δ = 0) analysis.
//!
//! With `r` Poisson(λ) majority agents moving:
//!
//! * Alice wins by staying iff `r <= Δ`, by switching iff `r >= Δ + 2`;
//! * Bob wins by staying iff at least `Δ + 1` others move, by switching iff
//!   at most `Δ − 1` others move.

use serde::{Deserialize, Serialize};

use crate::dist::{poisson_cdf, poisson_pmf, poisson_sf, poisson_tail_bound};
use crate::error::{domain, Error, Result};
use crate::solver::{solve_lambda, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffQuadruple {
    pub alice_stay: f64,
    pub alice_switch: f64,
    pub bob_stay: f64,
    pub bob_switch: f64,
}

impl PayoffQuadruple {
    pub fn bob_margin(&self) -> f64 {
        self.bob_stay - self.bob_switch
    }

    pub fn alice_margin(&self) -> f64 {
        self.alice_stay - self.alice_switch
    }
}

fn check(delta: u64, lambda: f64) -> Result<()> {
    if delta == 0 {
        return Err(domain("payoffs are defined for delta >= 1"));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

pub fn expected_payoffs(delta: u64, lambda: f64) -> Result<PayoffQuadruple> {
    check(delta, lambda)?;
    Ok(PayoffQuadruple {
        alice_stay: poisson_cdf(delta, lambda)?,
        alice_switch: poisson_sf(delta + 1, lambda)?,
        bob_stay: poisson_sf(delta, lambda)?,
        bob_switch: poisson_cdf(delta - 1, lambda)?,
    })
}

/// Outcome of [`verify_no_cheat`], with signed margins (stay − switch).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoCheatReport {
    pub holds: bool,
    pub bob_margin: f64,
    pub alice_margin: f64,
}

/// Bob must be indifferent and Alice must not prefer switching.
pub fn verify_no_cheat(delta: u64, lambda: f64, tol: f64) -> Result<NoCheatReport> {
    let q = expected_payoffs(delta, lambda)?;
    let bob_margin = q.bob_margin();
    let alice_margin = q.alice_margin();
    Ok(NoCheatReport { holds: bob_margin.abs() < tol && alice_margin >= -tol, bob_margin, alice_margin })
}

/// Probabilities entering the two no-cheat conditions at the marginal state,
/// for independent Poisson movers `r_a` (out of A, mean `lambda_a`) and
/// `r_b` (out of B, mean `lambda_b`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossProbabilities {
    /// `P(r_a < r_b − 2)`
    pub a_below_b_minus2: f64,
    /// `P(r_a >= r_b)`
    pub a_at_least_b: f64,
    /// `P(r_a < r_b − 1)`
    pub a_below_b_minus1: f64,
    /// `P(r_a >= r_b + 1)`
    pub a_above_b: f64,
}

impl CrossProbabilities {
    /// Alice's condition, as LHS − RHS.
    pub fn alice_residual(&self) -> f64 {
        self.a_below_b_minus2 - self.a_at_least_b
    }

    /// Bob's condition, as LHS − RHS.
    pub fn bob_residual(&self) -> f64 {
        self.a_below_b_minus1 - self.a_above_b
    }
}

fn check_mean(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("Poisson mean must be positive, got {lambda}")))
    }
}

/// Single sum over `r_b` with the `r_a` sum closed by a Poisson CDF.
pub fn delta0_cross_probs(lambda_a: f64, lambda_b: f64) -> Result<CrossProbabilities> {
    check_mean(lambda_a)?;
    check_mean(lambda_b)?;
    let mut out =
        CrossProbabilities { a_below_b_minus2: 0.0, a_at_least_b: 0.0, a_below_b_minus1: 0.0, a_above_b: 0.0 };
    for rb in 0..=poisson_tail_bound(lambda_b) {
        let w = poisson_pmf(rb, lambda_b)?;
        if w == 0.0 {
            continue;
        }
        if rb >= 3 {
            out.a_below_b_minus2 += w * poisson_cdf(rb - 3, lambda_a)?;
        }
        if rb >= 2 {
            out.a_below_b_minus1 += w * poisson_cdf(rb - 2, lambda_a)?;
        }
        out.a_at_least_b += w * if rb == 0 { 1.0 } else { poisson_sf(rb - 1, lambda_a)? };
        out.a_above_b += w * poisson_sf(rb, lambda_a)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub alice_residual: f64,
    pub bob_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    pub points: Vec<GridPoint>,
    /// Grid points where both residuals were below `tol` at once.
    pub joint_roots: usize,
    /// Grid points where an expected strict ordering failed.
    pub ordering_violations: usize,
    /// `min over grid of max(|alice_residual|, |bob_residual|)`.
    pub min_joint_residual: f64,
    pub argmin: (f64, f64),
}

impl InfeasibilityReport {
    pub fn infeasible(&self, tol: f64) -> bool {
        self.joint_roots == 0 && self.ordering_violations == 0 && self.min_joint_residual > tol
    }
}

/// Evaluates both marginal-state conditions over `grid`.
///
/// At every point `P(r_a < r_b − 2) < P(r_a < r_b − 1)` and
/// `P(r_a >= r_b) > P(r_a >= r_b + 1)` must hold strictly, which forces the
/// Alice residual strictly below the Bob residual.
pub fn infeasibility_scan(grid: &[(f64, f64)], tol: f64) -> Result<InfeasibilityReport> {
    if grid.is_empty() {
        return Err(domain("empty grid"));
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut joint_roots = 0;
    let mut ordering_violations = 0;
    let mut min_joint_residual = f64::INFINITY;
    let mut argmin = grid[0];
    for &(la, lb) in grid {
        if !(la > 0.0 && la <= 20.0 && lb > 0.0 && lb <= 20.0) {
            return Err(domain(format!("grid point ({la}, {lb}) outside (0, 20]^2")));
        }
        let c = delta0_cross_probs(la, lb)?;
        let (ra, rb) = (c.alice_residual(), c.bob_residual());
        if ra.abs() < tol && rb.abs() < tol {
            joint_roots += 1;
        }
        if !(c.a_below_b_minus2 < c.a_below_b_minus1 && c.a_at_least_b > c.a_above_b && ra < rb) {
            ordering_violations += 1;
        }
        let joint = ra.abs().max(rb.abs());
        if joint < min_joint_residual {
            min_joint_residual = joint;
            argmin = (la, lb);
        }
        points.push(GridPoint { lambda_a: la, lambda_b: lb, alice_residual: ra, bob_residual: rb });
    }
    Ok(InfeasibilityReport { points, joint_roots, ordering_violations, min_joint_residual, argmin })
}

/// `count` log-spaced values in `(lo, hi]`, the last one equal to `hi`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln();
    (1..=count).map(|i| lo * (ratio * i as f64 / count as f64).exp()).collect()
}

/// Square grid of log-spaced means on `(lo, hi]^2`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<(f64, f64)> {
    let axis = log_spaced(lo, hi, count);
    axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).collect()
}

/// The `lambda_b` at which Bob's marginal-state condition holds, for a
/// given `lambda_a`. Bob's residual rises from `−(1 − e^{−λa})` at
/// `lambda_b → 0` toward 1, so the root is bracketed by doubling.
pub fn bob_indifference_curve(lambda_a: f64, tol: f64) -> Result<f64> {
    check_mean(lambda_a)?;
    let f = |lb: f64| delta0_cross_probs(lambda_a, lb).map(|c| c.bob_residual());
    let mut lo = 1e-9;
    let mut hi = lambda_a.max(1.0);
    while f(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::Numeric(format!("no Bob root bracket for lambda_a = {lambda_a}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if v.abs() <= tol || hi - lo <= f64::EPSILON * hi {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffRow {
    pub delta: u64,
    pub lambda: f64,
    pub alice_stay: f64,
    pub alice_switch: f64,
    pub bob_stay: f64,
    pub bob_switch: f64,
}

/// Payoffs at the solved λ(Δ) for `Δ = 1..=delta_max`.
pub fn payoff_curve(delta_max: u64) -> Result<Vec<PayoffRow>> {
    if delta_max == 0 {
        return Err(domain("delta_max must be at least 1"));
    }
    (1..=delta_max)
        .map(|delta| {
            let lambda = solve_lambda(delta, DEFAULT_TOLERANCE)?;
            let q = expected_payoffs(delta, lambda)?;
            Ok(PayoffRow {
                delta,
                lambda,
                alice_stay: q.alice_stay,
                alice_switch: q.alice_switch,
                bob_stay: q.bob_stay,
                bob_switch: q.bob_switch,
            })
        })
        .collect()
}
