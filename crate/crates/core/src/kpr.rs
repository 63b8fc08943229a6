//! Kolkata Paise Restaurant variant: `N` agents, `N` ranked restaurants that
//! each serve one customer a day.
//!
//! An agent served at rank `k` goes to rank `k − 1` the next day (rank 1
//! wraps to rank `N`). An unserved agent picks one of the restaurants that
//! had no customer, say rank `k'`, and goes to `k' − 1`. When several agents
//! arrive at one restaurant, the one served at rank `k + 1` the day before
//! wins; otherwise the winner is drawn uniformly.
//!
//! Once the agents occupy distinct restaurants (the cyclic state) everyone
//! is served every day and each agent cycles through all ranks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ranks are 1-based.
pub type Rank = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KprState {
    n: usize,
    positions: Vec<Rank>,
    /// Agent served at each restaurant today, indexed by `rank − 1`.
    served: Vec<Option<u32>>,
    /// Rank at which each agent was served the previous day.
    prev_served_rank: Vec<Option<Rank>>,
    day: u64,
}

impl KprState {
    /// Day 0 at the given positions, nobody holding priority.
    pub fn new<R: Rng + ?Sized>(positions: Vec<Rank>, rng: &mut R) -> Result<Self> {
        let n = positions.len();
        Self::with_history(positions, vec![None; n], rng)
    }

    /// Day 0 with each agent's previous-day service rank given.
    pub fn with_history<R: Rng + ?Sized>(
        positions: Vec<Rank>,
        prev_served_rank: Vec<Option<Rank>>,
        rng: &mut R,
    ) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::Config("KPR needs at least one agent".into()));
        }
        if prev_served_rank.len() != n {
            return Err(Error::Config("history length differs from agent count".into()));
        }
        let in_range = |r: &Rank| (1..=n as Rank).contains(r);
        if !positions.iter().all(in_range) || !prev_served_rank.iter().flatten().all(in_range) {
            return Err(Error::Config(format!("ranks must lie in 1..={n}")));
        }
        let mut state = Self { n, positions, served: vec![None; n], prev_served_rank, day: 0 };
        state.resolve_service(rng)?;
        Ok(state)
    }

    /// Day 0 with i.i.d. uniform positions.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let positions = (0..n).map(|_| rng.random_range(1..=n as Rank)).collect();
        Self::new(positions, rng)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn day(&self) -> u64 {
        self.day
    }

    pub fn positions(&self) -> &[Rank] {
        &self.positions
    }

    /// Agent served at `rank` today.
    pub fn served_at(&self, rank: Rank) -> Option<u32> {
        self.served[rank as usize - 1]
    }

    /// Rank at which `agent` is served today, if any.
    pub fn served_rank(&self, agent: usize) -> Option<Rank> {
        let k = self.positions[agent];
        (self.served_at(k) == Some(agent as u32)).then_some(k)
    }

    pub fn last_served_rank(&self) -> &[Option<Rank>] {
        &self.prev_served_rank
    }

    pub fn served_count(&self) -> usize {
        self.served.iter().flatten().count()
    }

    pub fn utilization(&self) -> f64 {
        self.served_count() as f64 / self.n as f64
    }

    /// Whether the agents occupy pairwise distinct restaurants.
    pub fn is_cyclic(&self) -> bool {
        self.served_count() == self.n
    }

    fn down(&self, k: Rank) -> Rank {
        if k == 1 {
            self.n as Rank
        } else {
            k - 1
        }
    }

    fn up(&self, k: Rank) -> Rank {
        if k as usize == self.n {
            1
        } else {
            k + 1
        }
    }

    fn resolve_service<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let mut arrivals: Vec<Vec<u32>> = vec![Vec::new(); self.n];
        for (agent, &k) in self.positions.iter().enumerate() {
            arrivals[k as usize - 1].push(agent as u32);
        }
        for (idx, group) in arrivals.iter().enumerate() {
            let k = idx as Rank + 1;
            self.served[idx] = match group.len() {
                0 => None,
                1 => Some(group[0]),
                _ => {
                    let from_above = self.up(k);
                    let mut priority = group.iter().filter(|&&a| self.prev_served_rank[a as usize] == Some(from_above));
                    match (priority.next(), priority.next()) {
                        (Some(&a), None) => Some(a),
                        (Some(_), Some(_)) => {
                            return Err(Error::Invariant(format!(
                                "two arrivals at rank {k} were both served at rank {from_above}"
                            )))
                        }
                        _ => Some(group[rng.random_range(0..group.len())]),
                    }
                }
            };
        }
        Ok(())
    }

    /// Advances one day: everyone moves, then today's service is resolved.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let empty: Vec<Rank> = (1..=self.n as Rank).filter(|&k| self.served[k as usize - 1].is_none()).collect();
        let served_rank: Vec<Option<Rank>> = (0..self.n).map(|a| self.served_rank(a)).collect();
        let mut next = Vec::with_capacity(self.n);
        for rank in &served_rank {
            let target = match rank {
                Some(k) => *k,
                None => {
                    if empty.is_empty() {
                        return Err(Error::Invariant("an agent went unserved although no restaurant was empty".into()));
                    }
                    empty[rng.random_range(0..empty.len())]
                }
            };
            next.push(self.down(target));
        }
        self.positions = next;
        self.prev_served_rank = served_rank;
        self.day += 1;
        self.resolve_service(rng)
    }
}

/// Single step, for symmetry with the minority-game engine.
pub fn kpr_step<R: Rng + ?Sized>(state: &mut KprState, rng: &mut R) -> Result<()> {
    state.step(rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KprRun {
    /// First day on which positions form a permutation.
    pub convergence_day: Option<u64>,
    /// Fraction of agents served, for days `0..=` the last simulated day.
    pub utilization: Vec<f64>,
}

/// Runs from uniform random positions until the cyclic state or `max_steps`.
pub fn kpr_run<R: Rng + ?Sized>(n: usize, max_steps: u64, rng: &mut R) -> Result<(KprRun, KprState)> {
    let mut state = KprState::random(n, rng)?;
    let mut utilization = vec![state.utilization()];
    let mut convergence_day = state.is_cyclic().then_some(0);
    while convergence_day.is_none() && state.day() < max_steps {
        state.step(rng)?;
        utilization.push(state.utilization());
        if state.is_cyclic() {
            convergence_day = Some(state.day());
        }
    }
    Ok((KprRun { convergence_day, utilization }, state))
}
