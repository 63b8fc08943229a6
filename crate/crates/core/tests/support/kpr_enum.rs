//! Exact convergence-day distribution of the KPR strategy, by enumerating
//! every random choice. Shared by test targets.

use std::collections::BTreeMap;

/// Exact probability of every convergence day, enumerating each random
/// choice of the strategy. Independent of the simulator's data structures.
struct Enumerator {
    n: usize,
    max_day: u64,
    dist: BTreeMap<u64, f64>,
    truncated: f64,
}

impl Enumerator {
    fn new(n: usize, max_day: u64) -> Self {
        Self { n, max_day, dist: BTreeMap::new(), truncated: 0.0 }
    }

    /// `pos`: 0-based ranks; `prev`: 0-based rank served yesterday.
    fn day(&mut self, pos: Vec<usize>, prev: Vec<Option<usize>>, day: u64, prob: f64) {
        let n = self.n;
        let mut distinct = pos.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() == n {
            *self.dist.entry(day).or_default() += prob;
            return;
        }
        if day == self.max_day {
            self.truncated += prob;
            return;
        }
        // Each contested restaurant independently picks a winner.
        let mut options: Vec<Vec<usize>> = Vec::new();
        for k in 0..n {
            let arrivals: Vec<usize> = (0..n).filter(|&a| pos[a] == k).collect();
            if arrivals.is_empty() {
                continue;
            }
            let above = (k + 1) % n;
            let priority: Vec<usize> = arrivals.iter().copied().filter(|&a| prev[a] == Some(above)).collect();
            options.push(if priority.len() == 1 { priority } else { arrivals });
        }
        for winners in cartesian(&options) {
            let p_service = prob / options.iter().map(|o| o.len() as f64).product::<f64>();
            let served: Vec<bool> = (0..n).map(|a| winners.contains(&a)).collect();
            let empty: Vec<usize> = (0..n).filter(|k| !pos.contains(k)).collect();
            let unserved: Vec<usize> = (0..n).filter(|&a| !served[a]).collect();
            let picks = cartesian(&vec![empty.clone(); unserved.len()]);
            let p_pick = p_service / (empty.len() as f64).powi(unserved.len() as i32);
            for pick in picks {
                let mut next = vec![0; n];
                let mut next_prev = vec![None; n];
                for a in 0..n {
                    if served[a] {
                        next[a] = (pos[a] + n - 1) % n;
                        next_prev[a] = Some(pos[a]);
                    }
                }
                for (j, &a) in unserved.iter().enumerate() {
                    next[a] = (pick[j] + n - 1) % n;
                }
                self.day(next, next_prev, day + 1, p_pick);
            }
        }
    }
}

fn cartesian(options: &[Vec<usize>]) -> Vec<Vec<usize>> {
    options.iter().fold(vec![vec![]], |acc, opts| {
        acc.iter()
            .flat_map(|prefix| {
                opts.iter().map(move |&o| {
                    let mut v = prefix.clone();
                    v.push(o);
                    v
                })
            })
            .collect()
    })
}

pub fn exact_distribution(n: usize, max_day: u64) -> (BTreeMap<u64, f64>, f64) {
    let mut e = Enumerator::new(n, max_day);
    let starts = cartesian(&vec![(0..n).collect::<Vec<_>>(); n]);
    let p0 = 1.0 / starts.len() as f64;
    for start in starts {
        e.day(start, vec![None; n], 0, p0);
    }
    (e.dist, e.truncated)
}
