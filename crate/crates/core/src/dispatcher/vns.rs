use super::{apply_move, improves, moves, neighborhood_best, EpochContext, Operator, WorkingSolution};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Stops the descent at whichever limit is hit first. One iteration is one
/// full neighbourhood scan.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Budget {
    pub deadline: Option<Instant>,
    pub iterations: Option<usize>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn iterations(n: usize) -> Self {
        Self {
            deadline: None,
            iterations: Some(n),
        }
    }

    fn exhausted(&self, scans: usize) -> bool {
        self.iterations.is_some_and(|n| scans >= n) || self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub operator: Operator,
    pub cost_before: f64,
    pub cost_after: f64,
    /// A random kick rather than an improving move.
    pub disturbance: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VnsOutcome {
    pub solution: WorkingSolution,
    pub scans: usize,
    pub trace: Vec<TraceEntry>,
    /// True when the last descent ended in a local optimum rather than on
    /// the budget.
    pub local_optimum: bool,
}

/// Best-improvement descent cycling relocate-bridge, block-exchange and
/// relocate-block, restarting from the first operator after each accepted
/// move. With `disturbance = Some((seed, rounds))` a local optimum is
/// kicked by a random feasible block relocation up to `rounds` times and
/// the best solution seen is returned.
pub fn vns(
    ctx: &EpochContext<'_>,
    solution: WorkingSolution,
    budget: Budget,
    disturbance: Option<(u64, usize)>,
) -> VnsOutcome {
    let mut current = solution;
    let mut best = current.clone();
    let mut scans = 0;
    let mut trace = Vec::new();
    let mut rng = disturbance.map(|(seed, _)| ChaCha8Rng::seed_from_u64(seed));
    let mut kicks_left = disturbance.map_or(0, |(_, r)| r);
    let mut local_optimum;
    loop {
        let mut k = 0;
        local_optimum = true;
        while k < Operator::ALL.len() {
            if budget.exhausted(scans) {
                local_optimum = false;
                break;
            }
            let op = Operator::ALL[k];
            scans += 1;
            match neighborhood_best(ctx, &current, op) {
                Some(n) if improves(n.solution.total(), current.total()) => {
                    trace.push(TraceEntry {
                        operator: op,
                        cost_before: current.total(),
                        cost_after: n.solution.total(),
                        disturbance: false,
                    });
                    current = n.solution;
                    k = 0;
                }
                _ => k += 1,
            }
        }
        if improves(current.total(), best.total()) {
            best = current.clone();
        }
        if !local_optimum || kicks_left == 0 {
            break;
        }
        kicks_left -= 1;
        let rng = rng.as_mut().expect("kicks imply a seed");
        let mut candidates = moves(Operator::RelocateBlock, &current.routes, ctx.inst);
        candidates.shuffle(rng);
        let kicked = candidates.iter().find_map(|mv| {
            let changed = apply_move(&current.routes, mv);
            if !changed.iter().all(|(_, r)| r.is_feasible(ctx.inst).unwrap_or(false)) {
                return None;
            }
            let mut next = current.routes.clone();
            for (v, r) in changed {
                next[v] = r;
            }
            ctx.solution(next).ok()
        });
        let Some(kicked) = kicked else { break };
        trace.push(TraceEntry {
            operator: Operator::RelocateBlock,
            cost_before: current.total(),
            cost_after: kicked.total(),
            disturbance: true,
        });
        current = kicked;
    }
    local_optimum &= best == current;
    VnsOutcome {
        solution: best,
        scans,
        trace,
        local_optimum,
    }
}
