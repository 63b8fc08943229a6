//! A cheat-proof probabilistic win-stay/lose-shift strategy for the minority
//! game.
//!
//! Agents that lost yesterday switch with a probability chosen so that no
//! single agent gains by deviating; when the attendance split is as even as
//! possible, the whole population reshuffles with a small probability. The
//! crate provides
//!
//! * [`dist`]: Poisson/binomial kernels and a seeded binomial sampler,
//! * [`solver`]: the indifference condition and its roots λ(Δ), p(Δ, M),
//! * [`payoff`]: next-day payoffs, no-cheat checks and the Δ = 0 analysis,
//! * [`engine`]: the N-agent simulator,
//! * [`stats`]: inefficiency, histograms, autocorrelations, reset episodes,
//! * [`kpr`]: the cyclic strategy for the Kolkata Paise Restaurant problem.

pub mod dist;
pub mod engine;
pub mod error;
pub mod kpr;
pub mod payoff;
pub mod rng;
pub mod solver;
pub mod stats;

pub use engine::{
    init_population, run, ChoiceMatrix, Classification, Dynamics, LambdaSource, Mode, PopulationState, Side,
    Simulation, StepEvent, StrategyConfig, Trajectory,
};
pub use error::{Error, Result};
pub use kpr::{kpr_run, kpr_step, KprRun, KprState};
pub use payoff::{CrossProbabilities, InfeasibilityReport, NoCheatReport, PayoffQuadruple, PayoffRow};
pub use rng::{stream_rng, SimRng};
pub use solver::{lambda_gap, solve_lambda, solve_p_finite, LambdaTable};
pub use stats::{ConvergenceStats, StatsSummary};
