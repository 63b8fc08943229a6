//! Observables over trajectories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{excess_of, ChoiceMatrix, Trajectory};
use crate::error::{Error, Result};

/// `(4/N) · mean_t (r_t − N/2)^2` with `r_t` the attendance at A; equals 1
/// for agents choosing at random.
pub fn inefficiency_eta(deltas: &[i64], n: usize) -> Result<f64> {
    if deltas.is_empty() {
        return Err(Error::Usage("inefficiency of an empty trajectory".into()));
    }
    // r − N/2 = (M − Δ) − (2M + 1)/2 = −(Δ + 1/2)
    let sum: f64 = deltas.iter().map(|&d| (d as f64 + 0.5).powi(2)).sum();
    Ok(4.0 / n as f64 * sum / deltas.len() as f64)
}

/// Normalized frequency of each signed Δ.
pub fn delta_histogram(deltas: &[i64]) -> Result<BTreeMap<i64, f64>> {
    if deltas.is_empty() {
        return Err(Error::Usage("histogram of an empty trajectory".into()));
    }
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for &d in deltas {
        *counts.entry(d).or_default() += 1;
    }
    let total = deltas.len() as f64;
    Ok(counts.into_iter().map(|(d, c)| (d, c as f64 / total)).collect())
}

/// `⟨S(t) S(t+τ)⟩` averaged over all available `t`, for `τ = 0..=tau_max`.
pub fn s_autocorrelation(s: &[i8], tau_max: usize) -> Result<Vec<f64>> {
    if s.len() <= tau_max {
        return Err(Error::Usage(format!("series of length {} too short for lag {tau_max}", s.len())));
    }
    Ok((0..=tau_max)
        .map(|tau| {
            let pairs = s.len() - tau;
            let sum: i64 = s[..pairs].iter().zip(&s[tau..]).map(|(&a, &b)| i64::from(a * b)).sum();
            sum as f64 / pairs as f64
        })
        .collect())
}

/// Decay rate `K` of `exp(−K τ)` from a least-squares line through
/// `ln |c(τ)|` over `τ = 1..=3`. `None` if any of those lags is zero.
pub fn fit_decay_rate(acf: &[f64]) -> Option<f64> {
    if acf.len() < 4 {
        return None;
    }
    let pts: Vec<(f64, f64)> = (1..=3).map(|t| (t as f64, acf[t].abs())).collect();
    if pts.iter().any(|&(_, c)| c <= 0.0) {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

/// `C(τ) = (1/N) Σ_i ⟨A_i(t) A_i(t+τ)⟩` with `A_i = ±1`, for the given lags.
///
/// Agreement between two days is `N − 2·hamming`, so each pair of rows
/// costs one XOR/popcount pass over the packed bits.
pub fn c_autocorrelation_at(matrix: &ChoiceMatrix, lags: &[usize]) -> Result<Vec<f64>> {
    let days = matrix.days();
    let n = matrix.n() as f64;
    lags.iter()
        .map(|&tau| {
            if days <= tau {
                return Err(Error::Usage(format!("{days} recorded days too few for lag {tau}")));
            }
            let pairs = days - tau;
            let mismatches: u64 = (0..pairs)
                .map(|t| {
                    matrix
                        .row(t)
                        .iter()
                        .zip(matrix.row(t + tau))
                        .map(|(a, b)| u64::from((a ^ b).count_ones()))
                        .sum::<u64>()
                })
                .sum();
            Ok(1.0 - 2.0 * mismatches as f64 / (n * pairs as f64))
        })
        .collect()
}

pub fn c_autocorrelation(matrix: Option<&ChoiceMatrix>, tau_max: usize) -> Result<Vec<f64>> {
    let matrix = matrix
        .ok_or_else(|| Error::Usage("choice autocorrelation needs a run recorded with per-agent choices".into()))?;
    let lags: Vec<usize> = (0..=tau_max).collect();
    c_autocorrelation_at(matrix, &lags)
}

/// Lengths of reset episodes: for each reset day `d`, the first day `t > d`
/// back in the marginal state gives an episode of `t − d` days. Episodes
/// still open at the end of the trajectory are dropped.
pub fn reset_episodes(traj: &Trajectory) -> Vec<u64> {
    let excess: Vec<u64> = traj.deltas.iter().map(|&d| excess_of(d)).collect();
    traj.reset_days
        .iter()
        .filter_map(|&d| {
            let d = d as usize;
            excess.get(d + 1..)?.iter().position(|&e| e == 0).map(|k| (k + 1) as u64)
        })
        .collect()
}

/// `|Δ|` on each first post-reset day.
pub fn post_reset_magnitudes(traj: &Trajectory) -> Vec<u64> {
    traj.reset_days.iter().filter_map(|&d| traj.deltas.get(d as usize + 1).map(|x| x.unsigned_abs())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStats {
    pub episodes: usize,
    pub mean: f64,
    pub median: f64,
    pub max: u64,
}

pub fn convergence_time(traj: &Trajectory) -> Result<ConvergenceStats> {
    if traj.reset_days.is_empty() {
        return Err(Error::Usage("trajectory contains no reset".into()));
    }
    let mut eps = reset_episodes(traj);
    if eps.is_empty() {
        return Err(Error::Usage("no reset episode completed within the trajectory".into()));
    }
    eps.sort_unstable();
    let as_f: Vec<f64> = eps.iter().map(|&e| e as f64).collect();
    Ok(ConvergenceStats {
        episodes: eps.len(),
        mean: mean(&as_f),
        median: median_sorted(&as_f),
        max: *eps.last().expect("nonempty"),
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median of an ascending slice.
pub fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    median_sorted(&v)
}

/// Sample mean and its standard error.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, (var / xs.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub eta: f64,
    pub delta_hist: BTreeMap<i64, f64>,
    pub s_autocorr: Vec<f64>,
    pub decay_rate: Option<f64>,
    pub c_autocorr: Option<Vec<f64>>,
    pub convergence: Option<ConvergenceStats>,
    pub resets: usize,
    pub steps_used: usize,
    pub burn_in: usize,
}

impl StatsSummary {
    /// Observables over days `burn_in..` of `traj`. `C(τ)` is included only
    /// when choices were recorded.
    pub fn compute(traj: &Trajectory, tau_max: usize, burn_in: usize) -> Result<Self> {
        if burn_in >= traj.len() {
            return Err(Error::Usage(format!("burn-in {burn_in} leaves no data of {}", traj.len())));
        }
        let deltas = &traj.deltas[burn_in..];
        let s = &traj.minority_side[burn_in..];
        let s_autocorr = s_autocorrelation(s, tau_max.min(s.len() - 1))?;
        let c_autocorr = match &traj.choices {
            Some(cm) if cm.days() > tau_max => Some(c_autocorrelation(Some(cm), tau_max)?),
            _ => None,
        };
        Ok(Self {
            eta: inefficiency_eta(deltas, traj.n)?,
            delta_hist: delta_histogram(deltas)?,
            decay_rate: fit_decay_rate(&s_autocorr),
            s_autocorr,
            c_autocorr,
            convergence: convergence_time(traj).ok(),
            resets: traj.reset_days.len(),
            steps_used: deltas.len(),
            burn_in,
        })
    }
}
