//! N-agent dynamics of the win-stay/lose-shift strategy.
//!
//! Each day every agent picks restaurant A or B. With `N = 2M + 1` agents
//! and `M − Δ` of them at A, the majority holds `M + 1 + e` agents where the
//! excess `e` is `Δ` for `Δ >= 0` and `|Δ| − 1` otherwise. The next day:
//!
//! * `e >= 1`: minority agents stay; each majority agent switches with
//!   probability `λ(e) / (M + e + 1)`.
//! * `e = 0`: the marginal state is held for `wait_t` days, then every agent
//!   switches with probability `reset_prefactor · M^(ε − 1)` (a reset).
//!
//! Switchers are drawn as one binomial count per side and then assigned to
//! uniformly chosen agents of that side, which costs O(movers) per day while
//! keeping per-agent identities for choice autocorrelations.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::sample_binomial;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, SimRng};
use crate::solver::{default_delta_max, solve_p_finite, LambdaTable, ASYMPTOTE_GAP, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    fn index(self) -> usize {
        match self {
            Side::A => 0,
            Side::B => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Strategy,
    /// Every agent re-draws uniformly each day.
    Baseline,
}

/// Where the per-agent switch probability comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaSource {
    /// `λ(e) / (M + e + 1)` with the large-M λ(e).
    #[default]
    PoissonLimit,
    /// Exact binomial indifference root `p(e, M)`.
    FiniteM,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub n: usize,
    pub epsilon: f64,
    pub wait_t: u32,
    pub reset_prefactor: f64,
    pub lambda_source: LambdaSource,
    /// Largest excess with a solved λ; `None` means `ceil(3 sqrt N) + 10`.
    pub delta_max: Option<u64>,
    pub tolerance: f64,
    pub seed: u64,
    pub mode: Mode,
}

impl StrategyConfig {
    pub fn new(n: usize, epsilon: f64, seed: u64) -> Self {
        Self {
            n,
            epsilon,
            wait_t: 0,
            reset_prefactor: 0.5,
            lambda_source: LambdaSource::PoissonLimit,
            delta_max: None,
            tolerance: DEFAULT_TOLERANCE,
            seed,
            mode: Mode::Strategy,
        }
    }

    pub fn with_wait(mut self, wait_t: u32) -> Self {
        self.wait_t = wait_t;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn m(&self) -> usize {
        self.n / 2
    }

    pub fn reset_probability(&self) -> f64 {
        self.reset_prefactor * (self.m() as f64).powf(self.epsilon - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_population(self.n)?;
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if !(self.reset_prefactor.is_finite() && self.reset_prefactor > 0.0) {
            return Err(Error::Config(format!("reset_prefactor must be positive, got {}", self.reset_prefactor)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.mode == Mode::Strategy {
            let q = self.reset_probability();
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::Config(format!(
                    "reset probability {q} outside (0, 1] for N={} epsilon={}",
                    self.n, self.epsilon
                )));
            }
        }
        Ok(())
    }
}

fn check_population(n: usize) -> Result<()> {
    if n.is_multiple_of(2) {
        return Err(Error::Config(format!("N must be odd, got {n}")));
    }
    if n > u32::MAX as usize {
        return Err(Error::Config(format!("N={n} too large")));
    }
    Ok(())
}

/// Majority side, its excess over `M + 1`, and the signed offset Δ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub majority: Side,
    pub majority_count: usize,
    pub excess: u64,
    pub delta: i64,
}

/// Excess `e` of a signed offset: `Δ` if `Δ >= 0`, else `|Δ| − 1`.
pub fn excess_of(delta: i64) -> u64 {
    if delta >= 0 {
        delta as u64
    } else {
        delta.unsigned_abs() - 1
    }
}

/// Choices of all agents on one day, with per-side membership lists so a
/// uniformly random member of either side can be picked in O(1).
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    choices: Vec<Side>,
    members: [Vec<u32>; 2],
    slot: Vec<u32>,
    day: u64,
    wait_counter: u32,
}

impl PopulationState {
    pub fn from_choices(choices: Vec<Side>) -> Result<Self> {
        check_population(choices.len())?;
        let mut members = [Vec::new(), Vec::new()];
        let mut slot = vec![0; choices.len()];
        for (i, side) in choices.iter().enumerate() {
            let list = &mut members[side.index()];
            slot[i] = list.len() as u32;
            list.push(i as u32);
        }
        Ok(Self { choices, members, slot, day: 0, wait_counter: 0 })
    }

    /// Population with `attendance_a` agents at A: agents `0..attendance_a`.
    pub fn with_attendance(n: usize, attendance_a: usize) -> Result<Self> {
        if attendance_a > n {
            return Err(Error::Config(format!("attendance {attendance_a} exceeds N={n}")));
        }
        Self::from_choices((0..n).map(|i| if i < attendance_a { Side::A } else { Side::B }).collect())
    }

    pub fn n(&self) -> usize {
        self.choices.len()
    }

    pub fn m(&self) -> usize {
        self.n() / 2
    }

    pub fn choices(&self) -> &[Side] {
        &self.choices
    }

    pub fn day(&self) -> u64 {
        self.day
    }

    pub fn wait_counter(&self) -> u32 {
        self.wait_counter
    }

    pub fn attendance(&self, side: Side) -> usize {
        self.members[side.index()].len()
    }

    pub fn attendance_a(&self) -> usize {
        self.attendance(Side::A)
    }

    pub fn delta(&self) -> i64 {
        self.m() as i64 - self.attendance_a() as i64
    }

    pub fn classify(&self) -> Classification {
        let delta = self.delta();
        let majority = if delta >= 0 { Side::B } else { Side::A };
        Classification { majority, majority_count: self.attendance(majority), excess: excess_of(delta), delta }
    }

    /// +1 if A is the minority restaurant, −1 otherwise.
    pub fn minority_sign(&self) -> i8 {
        if self.attendance_a() <= self.m() {
            1
        } else {
            -1
        }
    }

    /// Same population with every label exchanged.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.choices {
            *c = c.other();
        }
        out.members.swap(0, 1);
        out
    }

    fn flip(&mut self, agent: u32) {
        let from = self.choices[agent as usize];
        let list = &mut self.members[from.index()];
        let pos = self.slot[agent as usize] as usize;
        list.swap_remove(pos);
        if let Some(&moved) = list.get(pos) {
            self.slot[moved as usize] = pos as u32;
        }
        let to = from.other();
        let dest = &mut self.members[to.index()];
        self.slot[agent as usize] = dest.len() as u32;
        dest.push(agent);
        self.choices[agent as usize] = to;
    }

    /// `count` distinct uniformly chosen members of `side`.
    fn pick<R: Rng + ?Sized>(&self, side: Side, count: usize, rng: &mut R) -> Vec<u32> {
        let list = &self.members[side.index()];
        index::sample(rng, list.len(), count).into_iter().map(|i| list[i]).collect()
    }

    fn redraw<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.n();
        let mut word = 0u64;
        for i in 0..n {
            if i % 64 == 0 {
                word = rng.random();
            }
            self.choices[i] = if word & 1 == 1 { Side::A } else { Side::B };
            word >>= 1;
        }
        let rebuilt = Self::from_choices(std::mem::take(&mut self.choices)).expect("N already validated");
        self.choices = rebuilt.choices;
        self.members = rebuilt.members;
        self.slot = rebuilt.slot;
    }
}

/// Day 0: every agent independently picks A or B with probability 1/2.
pub fn init_population<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PopulationState> {
    check_population(n)?;
    let mut state = PopulationState::from_choices(vec![Side::B; n])?;
    state.redraw(rng);
    Ok(state)
}

/// What happened on one update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepEvent {
    /// `switchers` majority agents moved.
    Moved {
        switchers: usize,
    },
    /// Marginal state held for another day.
    Waited,
    Reset {
        flipped: usize,
    },
    /// Baseline mode re-draw.
    Redrawn,
}

/// Precomputed switch and reset probabilities for one configuration.
#[derive(Debug, Clone)]
pub struct Dynamics {
    config: StrategyConfig,
    m: usize,
    reset_probability: f64,
    /// Per-agent switch probability, indexed by excess; entry 0 unused.
    switch: Vec<f64>,
    table: Option<LambdaTable>,
}

impl Dynamics {
    pub fn new(config: &StrategyConfig) -> Result<Self> {
        config.validate()?;
        let m = config.m();
        let delta_max = config.delta_max.unwrap_or_else(|| default_delta_max(config.n));
        let mut switch = vec![0.0];
        let mut table = None;
        if config.mode == Mode::Strategy {
            match config.lambda_source {
                LambdaSource::PoissonLimit => {
                    let t = LambdaTable::build(delta_max, config.tolerance)?;
                    for e in 1..=delta_max.min(m as u64) {
                        let lam = t.lambda(e).expect("within table");
                        switch.push(lam / (m as u64 + e + 1) as f64);
                    }
                    table = Some(t);
                }
                LambdaSource::FiniteM => {
                    for e in 1..=delta_max.min(m as u64) {
                        switch.push(solve_p_finite(e, m as u64, config.tolerance)?);
                    }
                }
            }
        }
        Ok(Self { config: config.clone(), m, reset_probability: config.reset_probability(), switch, table })
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.config
    }

    pub fn lambda_table(&self) -> Option<&LambdaTable> {
        self.table.as_ref()
    }

    pub fn reset_probability(&self) -> f64 {
        self.reset_probability
    }

    /// Probability that one majority agent switches at excess `e >= 1`.
    pub fn switch_probability(&self, excess: u64) -> f64 {
        match self.switch.get(excess as usize) {
            Some(&p) if excess > 0 => p,
            _ => (excess as f64 + ASYMPTOTE_GAP) / (self.m as u64 + excess + 1) as f64,
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &mut PopulationState, rng: &mut R) -> Result<StepEvent> {
        if state.n() != self.config.n {
            return Err(Error::Config(format!(
                "state has {} agents, configuration expects {}",
                state.n(),
                self.config.n
            )));
        }
        state.day += 1;
        if self.config.mode == Mode::Baseline {
            state.redraw(rng);
            return Ok(StepEvent::Redrawn);
        }
        let class = state.classify();
        if class.excess >= 1 {
            state.wait_counter = 0;
            let p = self.switch_probability(class.excess);
            let k = sample_binomial(class.majority_count as u64, p, rng)? as usize;
            for agent in state.pick(class.majority, k, rng) {
                state.flip(agent);
            }
            return Ok(StepEvent::Moved { switchers: k });
        }
        if state.wait_counter < self.config.wait_t {
            state.wait_counter += 1;
            return Ok(StepEvent::Waited);
        }
        state.wait_counter = 0;
        // Majority side first, so a label-mirrored population consumes the
        // stream identically.
        let q = self.reset_probability;
        let mut movers = Vec::new();
        for side in [class.majority, class.majority.other()] {
            let k = sample_binomial(state.attendance(side) as u64, q, rng)? as usize;
            movers.extend(state.pick(side, k, rng));
        }
        for &agent in &movers {
            state.flip(agent);
        }
        Ok(StepEvent::Reset { flipped: movers.len() })
    }
}

/// Convenience wrapper for a single update.
pub fn step<R: Rng + ?Sized>(state: &mut PopulationState, dynamics: &Dynamics, rng: &mut R) -> Result<StepEvent> {
    dynamics.step(state, rng)
}

/// Per-agent choices over time, one bit per agent (set = restaurant A).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl ChoiceMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, words: n.div_ceil(64), bits: Vec::new() }
    }

    pub fn push(&mut self, choices: &[Side]) {
        debug_assert_eq!(choices.len(), self.n);
        let start = self.bits.len();
        self.bits.resize(start + self.words, 0);
        for (i, c) in choices.iter().enumerate() {
            if *c == Side::A {
                self.bits[start + i / 64] |= 1 << (i % 64);
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn days(&self) -> usize {
        self.bits.len().checked_div(self.words).unwrap_or(0)
    }

    pub fn get(&self, day: usize, agent: usize) -> Side {
        if self.row(day)[agent / 64] >> (agent % 64) & 1 == 1 {
            Side::A
        } else {
            Side::B
        }
    }

    pub fn row(&self, day: usize) -> &[u64] {
        &self.bits[day * self.words..(day + 1) * self.words]
    }
}

/// Record of one run, indexed by day `t = 0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n: usize,
    /// Signed offset Δ(t).
    pub deltas: Vec<i64>,
    /// S(t): +1 when A is the minority, −1 when B is.
    pub minority_side: Vec<i8>,
    /// Days whose marginal state triggered a reset; day `t + 1` is the
    /// first post-reset state.
    pub reset_days: Vec<u64>,
    pub choices: Option<ChoiceMatrix>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn m(&self) -> usize {
        self.n / 2
    }

    pub fn attendance_a(&self, t: usize) -> i64 {
        self.m() as i64 - self.deltas[t]
    }

    pub fn excess(&self, t: usize) -> u64 {
        excess_of(self.deltas[t])
    }
}

/// A configuration, its live state and its private random stream.
#[derive(Debug, Clone)]
pub struct Simulation {
    dynamics: Dynamics,
    state: PopulationState,
    rng: SimRng,
}

impl Simulation {
    /// Fresh population drawn from stream 0 of the configured seed.
    pub fn new(config: &StrategyConfig) -> Result<Self> {
        Self::on_stream(config, 0)
    }

    pub fn on_stream(config: &StrategyConfig, stream: u64) -> Result<Self> {
        let dynamics = Dynamics::new(config)?;
        let mut rng = stream_rng(config.seed, stream);
        let state = init_population(config.n, &mut rng)?;
        Ok(Self { dynamics, state, rng })
    }

    /// Starts from a given state, with a stream that has drawn nothing yet.
    pub fn from_state(config: &StrategyConfig, state: PopulationState) -> Result<Self> {
        let dynamics = Dynamics::new(config)?;
        if state.n() != config.n {
            return Err(Error::Config(format!("state has {} agents, N={}", state.n(), config.n)));
        }
        Ok(Self { dynamics, state, rng: stream_rng(config.seed, 0) })
    }

    pub fn state(&self) -> &PopulationState {
        &self.state
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn step(&mut self) -> Result<StepEvent> {
        self.dynamics.step(&mut self.state, &mut self.rng)
    }

    /// Records the current day, steps, and repeats `steps` times.
    pub fn run(&mut self, steps: usize, record_choices: bool) -> Result<Trajectory> {
        let n = self.state.n();
        let mut traj = Trajectory {
            n,
            deltas: Vec::with_capacity(steps),
            minority_side: Vec::with_capacity(steps),
            reset_days: Vec::new(),
            choices: record_choices.then(|| ChoiceMatrix::new(n)),
        };
        for t in 0..steps {
            traj.deltas.push(self.state.delta());
            traj.minority_side.push(self.state.minority_sign());
            if let Some(cm) = traj.choices.as_mut() {
                cm.push(self.state.choices());
            }
            if let StepEvent::Reset { .. } = self.step()? {
                traj.reset_days.push(t as u64);
            }
        }
        Ok(traj)
    }
}

/// Runs `steps` days from a fresh population.
pub fn run(config: &StrategyConfig, steps: usize, record_choices: bool) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::Config("steps must be at least 1".into()));
    }
    Simulation::new(config)?.run(steps, record_choices)
}
