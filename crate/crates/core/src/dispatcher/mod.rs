//! Cost-function-approximation dispatcher: rebuild the previous plan,
//! insert new orders by cheapest insertion (urgent ones first), then
//! descend with three block/bridge neighbourhoods under the perturbed
//! reward.

mod construct;
mod neighborhood;
mod vns;

pub use construct::{cheapest_insertion, classify_and_order, insertion_candidates, reconstruct, UrgencyPartition};
pub use neighborhood::{apply_move, moves, neighborhood_best, Move, Neighbor, Operator};
pub use vns::{vns, Budget, TraceEntry, VnsOutcome};

use crate::evaluator::{self, CostMode, EvalError, Timeline, VehiclePlan, VehicleStart};
use crate::feasibility::Route;
use crate::model::{CostBreakdown, Instance, Multipliers, OrderId, Seconds};
use crate::par::ExecMode;
use crate::sdp::{Action, Dispatcher, State};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("order {0} has no feasible insertion")]
    NoFeasibleInsertion(OrderId),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Everything needed to price candidate routes at one update point.
#[derive(Clone, Debug)]
pub struct EpochContext<'a> {
    pub inst: &'a Instance,
    pub now: Seconds,
    pub epoch_end: Seconds,
    pub starts: Vec<VehicleStart>,
    pub multipliers: Multipliers,
    pub exec: ExecMode,
}

impl<'a> EpochContext<'a> {
    pub fn new(inst: &'a Instance, state: &State, multipliers: Multipliers, exec: ExecMode) -> Self {
        Self {
            inst,
            now: state.time,
            epoch_end: state.epoch_end(inst),
            starts: state.vehicles.iter().map(|v| v.start()).collect(),
            multipliers,
            exec,
        }
    }

    fn plan(&self, i: usize, route: &Route) -> VehiclePlan {
        VehiclePlan {
            vehicle: route.vehicle,
            start: self.starts[i],
            stops: route.stops(self.inst),
        }
    }

    pub fn plans(&self, routes: &[Route]) -> Vec<VehiclePlan> {
        routes.iter().enumerate().map(|(i, r)| self.plan(i, r)).collect()
    }

    pub fn evaluate(&self, routes: &[Route]) -> Result<(Timeline, CostBreakdown), EvalError> {
        let plans = self.plans(routes);
        evaluator::evaluate(
            self.inst,
            self.now,
            &plans,
            &self.multipliers,
            CostMode::Perturbed,
            Some(self.epoch_end),
        )
    }

    /// Perturbed cost of `routes` with some routes swapped for `changed`.
    pub fn cost_with(&self, routes: &[Route], changed: &[(usize, Route)]) -> Result<CostBreakdown, EvalError> {
        let plans: Vec<VehiclePlan> = routes
            .iter()
            .enumerate()
            .map(|(i, r)| match changed.iter().find(|(j, _)| *j == i) {
                Some((_, c)) => self.plan(i, c),
                None => self.plan(i, r),
            })
            .collect();
        let timeline = evaluator::simulate(self.inst, self.now, &plans)?;
        evaluator::cost_terms(
            self.inst,
            &plans,
            &timeline,
            &self.multipliers,
            CostMode::Perturbed,
            Some(self.epoch_end),
        )
    }

    pub fn solution(&self, routes: Vec<Route>) -> Result<WorkingSolution, EvalError> {
        let cost = self.cost_with(&routes, &[])?;
        Ok(WorkingSolution { routes, cost })
    }
}

/// Routes for every vehicle plus their perturbed cost.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkingSolution {
    pub routes: Vec<Route>,
    pub cost: CostBreakdown,
}

impl WorkingSolution {
    pub fn total(&self) -> f64 {
        self.cost.weighted_total
    }
}

/// Strictly lower by more than rounding noise.
pub fn improves(candidate: f64, incumbent: f64) -> bool {
    candidate < incumbent - 1e-9 * incumbent.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatcherConfig {
    /// Overrides the instance weights when set.
    pub multipliers: Option<Multipliers>,
    pub urgency_threshold: Option<Seconds>,
    pub vns_budget_seconds: Option<f64>,
    pub vns_budget_iterations: Option<usize>,
    pub seed: u64,
    pub disturbance_enabled: bool,
    pub disturbance_rounds: usize,
    pub exec: ExecMode,
}

impl Default for DispatcherConfig {
    fn default() -> Self {
        Self {
            multipliers: None,
            urgency_threshold: None,
            vns_budget_seconds: None,
            vns_budget_iterations: None,
            seed: 0,
            disturbance_enabled: false,
            disturbance_rounds: 3,
            exec: ExecMode::default(),
        }
    }
}

impl DispatcherConfig {
    pub fn uses_wall_clock(&self) -> bool {
        self.vns_budget_seconds.is_some()
    }
}

/// Counters for one decision.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionStats {
    pub epoch: usize,
    pub inserted: usize,
    pub urgent: usize,
    pub scans: usize,
    pub accepted: usize,
    pub cost_before_vns: f64,
    pub cost_after_vns: f64,
    pub trace: Vec<TraceEntry>,
}

/// One full decision: reconstruct, insert, improve, time.
pub fn decide(inst: &Instance, state: &State, config: &DispatcherConfig) -> Result<(Action, DecisionStats), DispatchError> {
    let started = Instant::now();
    let deadline = config
        .vns_budget_seconds
        .map(|s| started + Duration::from_secs_f64(s.max(0.0)));
    let multipliers = config.multipliers.unwrap_or(inst.params.multipliers);
    let ctx = EpochContext::new(inst, state, multipliers, config.exec);
    let threshold = config.urgency_threshold.unwrap_or(inst.params.urgency_threshold);

    let routes = reconstruct(state);
    let partition = classify_and_order(inst, state, &routes, threshold);
    let mut solution = ctx.solution(routes)?;
    let mut stats = DecisionStats {
        epoch: state.epoch,
        urgent: partition.urgent.len(),
        ..Default::default()
    };
    for &o in partition.urgent.iter().chain(&partition.non_urgent) {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        solution = cheapest_insertion(&ctx, &solution, o)?;
        stats.inserted += 1;
    }

    stats.cost_before_vns = solution.total();
    let budget = Budget {
        deadline,
        iterations: config.vns_budget_iterations,
    };
    let disturbance = config
        .disturbance_enabled
        .then_some((config.seed ^ state.epoch as u64, config.disturbance_rounds));
    let outcome = vns(&ctx, solution, budget, disturbance);
    stats.scans = outcome.scans;
    stats.accepted = outcome.trace.iter().filter(|t| !t.disturbance).count();
    stats.cost_after_vns = outcome.solution.total();
    stats.trace = outcome.trace;

    let (timeline, _) = ctx.evaluate(&outcome.solution.routes)?;
    let plans = ctx.plans(&outcome.solution.routes);
    Ok((Action::from_timeline(&plans, &timeline), stats))
}

/// The dispatcher as a [`Dispatcher`] callback, keeping per-epoch stats.
#[derive(Clone, Debug, Default)]
pub struct CfaVns {
    pub config: DispatcherConfig,
    pub stats: Vec<DecisionStats>,
}

impl CfaVns {
    pub fn new(config: DispatcherConfig) -> Self {
        Self {
            config,
            stats: Vec::new(),
        }
    }
}

impl Dispatcher for CfaVns {
    fn decide(&mut self, inst: &Instance, state: &State) -> Result<Action, String> {
        let (action, stats) = decide(inst, state, &self.config).map_err(|e| e.to_string())?;
        self.stats.push(stats);
        Ok(action)
    }
}
