//! Epoch-based decision process: order release, vehicle states, action
//! validation, the transition to the next update point and the episode
//! loop that drives a [`Dispatcher`].

use crate::evaluator::{self, CostMode, EvalError, Stop, Timeline, VehiclePlan, VehicleStart, VisitTimes};
use crate::feasibility::{DestinationLock, FeasibilityError, Node, Route};
use crate::model::{CostBreakdown, FactoryId, Instance, OrderId, Seconds, VehicleId};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use thiserror::Error;

/// A vehicle standing at a factory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Current {
    pub factory: FactoryId,
    pub arrival: Seconds,
    pub service_start: Seconds,
    /// Earliest departure.
    pub departure: Seconds,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedVisit {
    pub factory: FactoryId,
    pub arrival: Seconds,
    pub waiting: Seconds,
    pub departure: Seconds,
    pub deliveries: Vec<OrderId>,
    pub pickups: Vec<OrderId>,
}

impl PlannedVisit {
    pub fn from_stop(stop: &Stop, times: &VisitTimes) -> Self {
        Self {
            factory: stop.factory,
            arrival: times.arrival,
            waiting: times.waiting,
            departure: times.departure,
            deliveries: stop.deliveries.clone(),
            pickups: stop.pickups.clone(),
        }
    }

    pub fn stop(&self) -> Stop {
        Stop {
            factory: self.factory,
            deliveries: self.deliveries.clone(),
            pickups: self.pickups.clone(),
        }
    }

    fn times(&self) -> VisitTimes {
        VisitTimes {
            arrival: self.arrival,
            waiting: self.waiting,
            departure: self.departure,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleStatus {
    pub vehicle: VehicleId,
    /// `None` while driving to `plan[0]`.
    pub current: Option<Current>,
    /// Loaded orders, oldest first.
    pub carried: Vec<OrderId>,
    pub plan: Vec<PlannedVisit>,
}

impl VehicleStatus {
    pub fn in_transit(&self) -> bool {
        self.current.is_none()
    }

    /// Destination lock of an in-transit vehicle.
    pub fn lock(&self) -> Option<DestinationLock> {
        match (&self.current, self.plan.first()) {
            (None, Some(first)) => Some(DestinationLock {
                factory: first.factory,
                deliveries: first.deliveries.clone(),
            }),
            _ => None,
        }
    }

    pub fn start(&self) -> VehicleStart {
        match (&self.current, self.plan.first()) {
            (Some(c), _) => VehicleStart::Docked {
                factory: c.factory,
                ready: c.departure,
            },
            (None, Some(first)) => VehicleStart::InTransit {
                destination: first.factory,
                arrival: first.arrival,
            },
            (None, None) => unreachable!("in-transit vehicle without a destination"),
        }
    }

    /// Node-sequence view of the current plan.
    pub fn route(&self) -> Route {
        route_of(self, &self.plan)
    }
}

fn route_of(status: &VehicleStatus, visits: &[PlannedVisit]) -> Route {
    let mut nodes = Vec::new();
    for v in visits {
        nodes.extend(v.deliveries.iter().map(|&o| Node::Delivery(o)));
        nodes.extend(v.pickups.iter().map(|&o| Node::Pickup(o)));
    }
    Route {
        vehicle: status.vehicle,
        carried: status.carried.clone(),
        lock: status.lock(),
        nodes,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub epoch: usize,
    pub time: Seconds,
    pub vehicles: Vec<VehicleStatus>,
    /// Released orders not yet picked up, ascending.
    pub unprocessed: Vec<OrderId>,
    /// Orders released during the previous epoch.
    pub revealed: Vec<OrderId>,
}

impl State {
    pub fn initial(inst: &Instance) -> Self {
        let revealed = reveal(inst, 0);
        Self {
            epoch: 0,
            time: 0,
            vehicles: inst
                .vehicles
                .iter()
                .map(|v| VehicleStatus {
                    vehicle: v.id,
                    current: Some(Current {
                        factory: v.initial_factory,
                        arrival: 0,
                        service_start: 0,
                        departure: 0,
                    }),
                    carried: Vec::new(),
                    plan: Vec::new(),
                })
                .collect(),
            unprocessed: revealed.clone(),
            revealed,
        }
    }

    pub fn epoch_end(&self, inst: &Instance) -> Seconds {
        self.time + inst.params.epoch_length
    }

    /// Vehicles still queueing for a port at the update point.
    pub fn waiting_vehicles(&self) -> usize {
        self.vehicles
            .iter()
            .filter(|v| v.current.is_some_and(|c| c.service_start > self.time))
            .count()
    }

    /// Simulation input for the given per-vehicle stops.
    pub fn plans_for(&self, stops: Vec<Vec<Stop>>) -> Vec<VehiclePlan> {
        self.vehicles
            .iter()
            .zip(stops)
            .map(|(v, stops)| VehiclePlan {
                vehicle: v.vehicle,
                start: v.start(),
                stops,
            })
            .collect()
    }
}

/// Per-vehicle visit lists chosen at an update point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub plans: Vec<Vec<PlannedVisit>>,
}

impl Action {
    /// Keeps every vehicle's current plan.
    pub fn carry_over(state: &State) -> Self {
        Self {
            plans: state.vehicles.iter().map(|v| v.plan.clone()).collect(),
        }
    }

    /// Times `stops` by a joint simulation from the state.
    pub fn from_stops(inst: &Instance, state: &State, stops: Vec<Vec<Stop>>) -> Result<Self, EvalError> {
        let plans = state.plans_for(stops);
        let timeline = evaluator::simulate(inst, state.time, &plans)?;
        Ok(Self::from_timeline(&plans, &timeline))
    }

    pub fn from_timeline(plans: &[VehiclePlan], timeline: &Timeline) -> Self {
        Self {
            plans: plans
                .iter()
                .zip(&timeline.visits)
                .map(|(p, times)| p.stops.iter().zip(times).map(|(s, t)| PlannedVisit::from_stop(s, t)).collect())
                .collect(),
        }
    }

    pub fn stops(&self) -> Vec<Vec<Stop>> {
        self.plans.iter().map(|p| p.iter().map(PlannedVisit::stop).collect()).collect()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("actions serialize");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Shape,
    UnknownReference,
    FactoryMismatch,
    OrderConsistency,
    PickupBeforeDelivery,
    Compatibility,
    Unprocessed,
    Lifo,
    Capacity,
    DestinationLock,
    Timing,
    Unserved,
    Release,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Shape => "shape",
            ViolationKind::UnknownReference => "unknown reference",
            ViolationKind::FactoryMismatch => "factory mismatch",
            ViolationKind::OrderConsistency => "order consistency",
            ViolationKind::PickupBeforeDelivery => "pickup before delivery",
            ViolationKind::Compatibility => "compatibility",
            ViolationKind::Unprocessed => "unprocessed",
            ViolationKind::Lifo => "lifo",
            ViolationKind::Capacity => "capacity",
            ViolationKind::DestinationLock => "destination lock",
            ViolationKind::Timing => "timing",
            ViolationKind::Unserved => "unserved",
            ViolationKind::Release => "release",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub vehicle: Option<VehicleId>,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.vehicle {
            Some(v) => write!(f, "vehicle {v}: {}: {}", self.kind, self.detail),
            None => write!(f, "{}: {}", self.kind, self.detail),
        }
    }
}

fn violation(vehicle: Option<VehicleId>, kind: ViolationKind, detail: impl Into<String>) -> Violation {
    Violation {
        vehicle,
        kind,
        detail: detail.into(),
    }
}

fn feasibility_violation(v: VehicleId, e: FeasibilityError) -> Violation {
    let kind = match e {
        FeasibilityError::DeliveryBeforePickup(_) => ViolationKind::PickupBeforeDelivery,
        _ => ViolationKind::OrderConsistency,
    };
    violation(Some(v), kind, e.to_string())
}

/// Orders released in epoch `k`: `(τ_{k-1}, τ_k]`, or everything up to 0 for `k = 0`.
pub fn reveal(inst: &Instance, k: usize) -> Vec<OrderId> {
    let delta = inst.params.epoch_length;
    let hi = k as Seconds * delta;
    let upper = inst.orders.partition_point(|o| o.release_time <= hi);
    let lower = if k == 0 {
        0
    } else {
        inst.orders.partition_point(|o| o.release_time <= hi - delta)
    };
    (lower..upper).map(OrderId).collect()
}

/// All violations of `action` in `state`; empty means valid.
pub fn validate_action(inst: &Instance, state: &State, action: &Action) -> Vec<Violation> {
    let mut out = Vec::new();
    if action.plans.len() != state.vehicles.len() {
        out.push(violation(
            None,
            ViolationKind::Shape,
            format!("{} plans for {} vehicles", action.plans.len(), state.vehicles.len()),
        ));
        return out;
    }

    let mut references_ok = true;
    let mut owner: HashMap<OrderId, VehicleId> = HashMap::new();
    for (status, visits) in state.vehicles.iter().zip(&action.plans) {
        let v = status.vehicle;
        let mut ok = true;
        for (j, visit) in visits.iter().enumerate() {
            if visit.factory.0 >= inst.factories.len() {
                out.push(violation(Some(v), ViolationKind::UnknownReference, format!("visit {j}: unknown factory {}", visit.factory)));
                ok = false;
                continue;
            }
            for (&o, pickup) in visit.deliveries.iter().map(|o| (o, false)).chain(visit.pickups.iter().map(|o| (o, true))) {
                if o.0 >= inst.orders.len() {
                    out.push(violation(Some(v), ViolationKind::UnknownReference, format!("visit {j}: unknown order {o}")));
                    ok = false;
                    continue;
                }
                let order = inst.order(o);
                let expected = if pickup { order.pickup_factory } else { order.delivery_factory };
                if expected != visit.factory {
                    out.push(violation(
                        Some(v),
                        ViolationKind::FactoryMismatch,
                        format!("visit {j}: order {} handled at {} instead of {}", order.name, inst.factory(visit.factory).name, inst.factory(expected).name),
                    ));
                }
            }
        }
        references_ok &= ok;
        if !ok {
            continue;
        }

        for &o in status.carried.iter().chain(visits.iter().flat_map(|x| &x.pickups)) {
            if let Some(&w) = owner.get(&o) {
                if w != v {
                    out.push(violation(
                        Some(v),
                        ViolationKind::Compatibility,
                        format!("order {} also served by vehicle {w}", inst.order(o).name),
                    ));
                }
            } else {
                owner.insert(o, v);
            }
        }
        for o in visits.iter().flat_map(|x| &x.pickups) {
            if state.unprocessed.binary_search(o).is_err() {
                out.push(violation(
                    Some(v),
                    ViolationKind::Unprocessed,
                    format!("order {} is not available for pickup", inst.order(*o).name),
                ));
            }
        }

        if let Some(lock) = status.lock() {
            let kept = visits
                .first()
                .is_some_and(|first| first.factory == lock.factory && first.deliveries == lock.deliveries);
            if !kept {
                out.push(violation(
                    Some(v),
                    ViolationKind::DestinationLock,
                    format!("destination {} and its deliveries must be kept", inst.factory(lock.factory).name),
                ));
            }
        }

        let route = route_of(status, visits);
        match route.lifo_ok() {
            Err(e) => out.push(feasibility_violation(v, e)),
            Ok(lifo) => {
                if !lifo {
                    out.push(violation(Some(v), ViolationKind::Lifo, "unloading order breaks LIFO"));
                }
                if !route.capacity_ok(inst, inst.params.capacity).unwrap_or(false) {
                    out.push(violation(Some(v), ViolationKind::Capacity, "load exceeds capacity"));
                }
            }
        }
    }

    let destination_intact = !out.iter().any(|x| x.kind == ViolationKind::DestinationLock);
    if references_ok && destination_intact {
        let plans = state.plans_for(action.stops());
        match evaluator::simulate(inst, state.time, &plans) {
            Ok(timeline) => {
                for ((status, visits), times) in state.vehicles.iter().zip(&action.plans).zip(&timeline.visits) {
                    if let Some(j) = visits.iter().zip(times).position(|(v, t)| v.times() != *t) {
                        out.push(violation(
                            Some(status.vehicle),
                            ViolationKind::Timing,
                            format!("visit {j}: declared times differ from the simulation"),
                        ));
                    }
                }
            }
            Err(e) => out.push(violation(None, ViolationKind::UnknownReference, e.to_string())),
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("epoch {epoch}: invalid action: {}", summarize(.violations))]
    InvalidAction { epoch: usize, violations: Vec<Violation> },
    #[error("epoch {epoch}: dispatcher failed: {message}")]
    Dispatcher { epoch: usize, message: String },
    #[error("episode did not finish within {0} epochs")]
    EpochLimit(usize),
    #[error("realized solution is infeasible: {}", summarize(.0))]
    InfeasibleSolution(Vec<Violation>),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn summarize(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// A visit that has been reached. `departure` becomes final once the
/// vehicle actually leaves; until then it is the earliest departure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizedVisit {
    pub factory: FactoryId,
    pub arrival: Seconds,
    pub waiting: Seconds,
    pub service_end: Seconds,
    pub departure: Seconds,
    pub deliveries: Vec<OrderId>,
    pub pickups: Vec<OrderId>,
}

/// What happened to one vehicle during an epoch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleProgress {
    pub vehicle: VehicleId,
    /// When it left the factory it stood at at the start of the epoch.
    pub left_at: Option<Seconds>,
    pub reached: Vec<RealizedVisit>,
}

#[derive(Clone, Debug)]
pub struct Step {
    pub next: State,
    pub timeline: Timeline,
    pub progress: Vec<VehicleProgress>,
}

/// Advances `state` by one epoch under `action`.
pub fn transition(inst: &Instance, state: &State, action: &Action) -> Result<Step, SdpError> {
    let violations = validate_action(inst, state, action);
    if !violations.is_empty() {
        return Err(SdpError::InvalidAction {
            epoch: state.epoch,
            violations,
        });
    }
    let plans = state.plans_for(action.stops());
    let timeline = evaluator::simulate(inst, state.time, &plans)?;
    let next_time = state.epoch_end(inst);

    let mut vehicles = Vec::with_capacity(state.vehicles.len());
    let mut progress = Vec::with_capacity(state.vehicles.len());
    let mut picked = Vec::new();

    for (i, status) in state.vehicles.iter().enumerate() {
        let visits: Vec<PlannedVisit> = plans[i]
            .stops
            .iter()
            .zip(&timeline.visits[i])
            .map(|(s, t)| PlannedVisit::from_stop(s, t))
            .collect();
        let reached = visits.iter().take_while(|v| v.arrival <= next_time).count();

        let left_at = match (status.current, timeline.start_departures[i]) {
            (Some(_), Some(t)) if !visits.is_empty() && t <= next_time => Some(t),
            _ => None,
        };

        let mut carried = status.carried.clone();
        for v in &visits[..reached] {
            carried.retain(|o| !v.deliveries.contains(o));
            carried.extend_from_slice(&v.pickups);
            picked.extend_from_slice(&v.pickups);
        }
        let rest = visits[reached..].to_vec();

        let current = if reached > 0 {
            let last = &visits[reached - 1];
            let here = Current {
                factory: last.factory,
                arrival: last.arrival,
                service_start: last.arrival + last.waiting,
                departure: last.departure,
            };
            if last.departure > next_time {
                Some(here)
            } else if rest.is_empty() {
                Some(Current {
                    departure: next_time,
                    ..here
                })
            } else {
                None
            }
        } else {
            match status.current {
                Some(c) if c.departure > next_time => Some(c),
                Some(c) if rest.is_empty() => Some(Current {
                    departure: next_time,
                    ..c
                }),
                Some(_) => None,
                None => None,
            }
        };

        progress.push(VehicleProgress {
            vehicle: status.vehicle,
            left_at,
            reached: visits[..reached]
                .iter()
                .map(|v| RealizedVisit {
                    factory: v.factory,
                    arrival: v.arrival,
                    waiting: v.waiting,
                    service_end: v.departure,
                    departure: v.departure,
                    deliveries: v.deliveries.clone(),
                    pickups: v.pickups.clone(),
                })
                .collect(),
        });
        vehicles.push(VehicleStatus {
            vehicle: status.vehicle,
            current,
            carried,
            plan: rest,
        });
    }

    picked.sort_unstable();
    let revealed = reveal(inst, state.epoch + 1);
    let mut unprocessed: Vec<OrderId> = state
        .unprocessed
        .iter()
        .copied()
        .filter(|o| picked.binary_search(o).is_err())
        .chain(revealed.iter().copied())
        .collect();
    unprocessed.sort_unstable();
    unprocessed.dedup();

    Ok(Step {
        next: State {
            epoch: state.epoch + 1,
            time: next_time,
            vehicles,
            unprocessed,
            revealed,
        },
        timeline,
        progress,
    })
}

/// Policy interface: one action per update point.
pub trait Dispatcher {
    fn decide(&mut self, inst: &Instance, state: &State) -> Result<Action, String>;
}

/// Leaves every plan untouched and never assigns anything.
pub struct IdleDispatcher;

impl Dispatcher for IdleDispatcher {
    fn decide(&mut self, _inst: &Instance, state: &State) -> Result<Action, String> {
        Ok(Action::carry_over(state))
    }
}

/// Plays back logged actions in order.
pub struct ReplayDispatcher {
    actions: std::vec::IntoIter<Action>,
}

impl ReplayDispatcher {
    pub fn new(actions: Vec<Action>) -> Self {
        Self {
            actions: actions.into_iter(),
        }
    }

    pub fn from_log(log: &[EpochRecord]) -> Self {
        Self::new(log.iter().map(|r| r.action.clone()).collect())
    }
}

impl Dispatcher for ReplayDispatcher {
    fn decide(&mut self, _inst: &Instance, state: &State) -> Result<Action, String> {
        self.actions
            .next()
            .ok_or_else(|| format!("no logged action for epoch {}", state.epoch))
    }
}

/// The full realized route of one vehicle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizedRoute {
    pub vehicle: VehicleId,
    pub initial_factory: FactoryId,
    pub initial_departure: Option<Seconds>,
    pub visits: Vec<RealizedVisit>,
}

impl RealizedRoute {
    fn apply(&mut self, p: &VehicleProgress) {
        if let Some(t) = p.left_at {
            match self.visits.last_mut() {
                Some(last) => last.departure = t,
                None => self.initial_departure = Some(t),
            }
        }
        self.visits.extend(p.reached.iter().cloned());
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleSummary {
    pub vehicle: String,
    pub current_factory: Option<String>,
    pub earliest_departure: Option<Seconds>,
    pub carried: Vec<String>,
    pub destination: Option<String>,
}

/// One line of the episode log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub time: Seconds,
    pub revealed: Vec<String>,
    pub unprocessed: usize,
    pub vehicles: Vec<VehicleSummary>,
    pub waiting_vehicles: usize,
    pub mean_committed_time: f64,
    pub action_digest: String,
    pub action: Action,
}

fn summarize_state(inst: &Instance, state: &State) -> Vec<VehicleSummary> {
    let names = |os: &[OrderId]| os.iter().map(|&o| inst.order(o).name.clone()).collect();
    state
        .vehicles
        .iter()
        .map(|v| VehicleSummary {
            vehicle: inst.vehicles[v.vehicle.0].name.clone(),
            current_factory: v.current.map(|c| inst.factory(c.factory).name.clone()),
            earliest_departure: v.current.map(|c| c.departure),
            carried: names(&v.carried),
            destination: v.plan.first().map(|p| inst.factory(p.factory).name.clone()),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeOptions {
    pub max_epochs: usize,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self { max_epochs: 100_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub routes: Vec<RealizedRoute>,
    pub cost: CostBreakdown,
    pub epochs: usize,
    pub log: Vec<EpochRecord>,
}

/// Runs the decision process until every order has been delivered, then
/// checks the realized solution and prices it with the true objective.
pub fn run_episode(
    inst: &Instance,
    dispatcher: &mut dyn Dispatcher,
    options: EpisodeOptions,
) -> Result<EpisodeResult, SdpError> {
    let mut state = State::initial(inst);
    let mut routes: Vec<RealizedRoute> = inst
        .vehicles
        .iter()
        .map(|v| RealizedRoute {
            vehicle: v.id,
            initial_factory: v.initial_factory,
            initial_departure: None,
            visits: Vec::new(),
        })
        .collect();
    let mut delivered = 0usize;
    let mut log = Vec::new();

    while delivered < inst.orders.len() {
        if state.epoch >= options.max_epochs {
            return Err(SdpError::EpochLimit(options.max_epochs));
        }
        let action = dispatcher
            .decide(inst, &state)
            .map_err(|message| SdpError::Dispatcher {
                epoch: state.epoch,
                message,
            })?;
        let step = transition(inst, &state, &action)?;

        let plans = state.plans_for(action.stops());
        let committed: Seconds = plans
            .iter()
            .enumerate()
            .map(|(i, p)| step.timeline.committed_time(p, i, state.time))
            .sum();
        let mean_committed = if plans.is_empty() {
            0.0
        } else {
            committed as f64 / plans.len() as f64
        };
        log.push(EpochRecord {
            epoch: state.epoch,
            time: state.time,
            revealed: state.revealed.iter().map(|&o| inst.order(o).name.clone()).collect(),
            unprocessed: state.unprocessed.len(),
            vehicles: summarize_state(inst, &state),
            waiting_vehicles: state.waiting_vehicles(),
            mean_committed_time: mean_committed,
            action_digest: action.digest(),
            action,
        });

        for (route, p) in routes.iter_mut().zip(&step.progress) {
            route.apply(p);
            delivered += p.reached.iter().map(|v| v.deliveries.len()).sum::<usize>();
        }
        state = step.next;
    }

    let problems = verify_solution(inst, &routes);
    if !problems.is_empty() {
        return Err(SdpError::InfeasibleSolution(problems));
    }
    let cost = solution_cost(inst, &routes)?;
    Ok(EpisodeResult {
        routes,
        cost,
        epochs: state.epoch,
        log,
    })
}

/// Simulation-shaped view of realized routes.
pub fn realized_plans(routes: &[RealizedRoute]) -> (Vec<VehiclePlan>, Timeline) {
    let plans = routes
        .iter()
        .map(|r| VehiclePlan {
            vehicle: r.vehicle,
            start: VehicleStart::Docked {
                factory: r.initial_factory,
                ready: r.initial_departure.unwrap_or(0),
            },
            stops: r
                .visits
                .iter()
                .map(|v| Stop {
                    factory: v.factory,
                    deliveries: v.deliveries.clone(),
                    pickups: v.pickups.clone(),
                })
                .collect(),
        })
        .collect();
    let timeline = Timeline {
        start_time: 0,
        start_departures: routes.iter().map(|r| r.initial_departure).collect(),
        visits: routes
            .iter()
            .map(|r| {
                r.visits
                    .iter()
                    .map(|v| VisitTimes {
                        arrival: v.arrival,
                        waiting: v.waiting,
                        departure: v.departure,
                    })
                    .collect()
            })
            .collect(),
    };
    (plans, timeline)
}

/// True-objective cost of realized routes.
pub fn solution_cost(inst: &Instance, routes: &[RealizedRoute]) -> Result<CostBreakdown, EvalError> {
    let (plans, timeline) = realized_plans(routes);
    evaluator::cost_terms(inst, &plans, &timeline, &inst.params.multipliers, CostMode::TrueObjective, None)
}

/// Checks a complete solution: every order served once by one vehicle,
/// pickup before delivery, LIFO, capacity, travel and service timing, and
/// no pickup before release.
pub fn verify_solution(inst: &Instance, routes: &[RealizedRoute]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut served_by: Vec<Option<VehicleId>> = vec![None; inst.orders.len()];
    for r in routes {
        let v = Some(r.vehicle);
        let mut nodes = Vec::new();
        for (j, visit) in r.visits.iter().enumerate() {
            nodes.extend(visit.deliveries.iter().map(|&o| Node::Delivery(o)));
            nodes.extend(visit.pickups.iter().map(|&o| Node::Pickup(o)));
            for &o in &visit.pickups {
                match served_by[o.0] {
                    Some(w) => out.push(violation(v, ViolationKind::Compatibility, format!("order {} also picked up by vehicle {w}", inst.order(o).name))),
                    None => served_by[o.0] = Some(r.vehicle),
                }
                if visit.arrival < inst.order(o).release_time {
                    out.push(violation(v, ViolationKind::Release, format!("visit {j}: order {} loaded before release", inst.order(o).name)));
                }
            }
            let (prev_factory, prev_departure) = if j == 0 {
                (r.initial_factory, r.initial_departure)
            } else {
                (r.visits[j - 1].factory, Some(r.visits[j - 1].departure))
            };
            let expected = prev_departure.map(|t| t + inst.travel.travel(prev_factory, visit.factory));
            if expected != Some(visit.arrival) {
                out.push(violation(v, ViolationKind::Timing, format!("visit {j}: arrival {} does not follow from the previous departure", visit.arrival)));
            }
            let service = inst.service_time(&visit.deliveries, &visit.pickups);
            if visit.arrival + visit.waiting + service > visit.departure || visit.waiting < 0 {
                out.push(violation(v, ViolationKind::Timing, format!("visit {j}: departs before service ends")));
            }
        }
        let route = Route {
            vehicle: r.vehicle,
            carried: Vec::new(),
            lock: None,
            nodes,
        };
        match route.lifo_ok() {
            Err(e) => out.push(feasibility_violation(r.vehicle, e)),
            Ok(false) => out.push(violation(v, ViolationKind::Lifo, "unloading order breaks LIFO")),
            Ok(true) => {
                if !route.capacity_ok(inst, inst.params.capacity).unwrap_or(false) {
                    out.push(violation(v, ViolationKind::Capacity, "load exceeds capacity"));
                }
            }
        }
    }
    for (i, s) in served_by.iter().enumerate() {
        if s.is_none() {
            out.push(violation(None, ViolationKind::Unserved, format!("order {} never served", inst.orders[i].name)));
        }
    }
    out
}

/// Writes one JSON object per epoch.
pub fn write_episode_log(out: &mut impl Write, log: &[EpochRecord]) -> std::io::Result<()> {
    for r in log {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_episode_log(text: &str) -> Result<Vec<EpochRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::tests::{worked_example, MIN};

    fn stop(f: usize, d: &[usize], p: &[usize]) -> Stop {
        Stop {
            factory: FactoryId(f),
            deliveries: d.iter().map(|&o| OrderId(o)).collect(),
            pickups: p.iter().map(|&o| OrderId(o)).collect(),
        }
    }

    /// The worked example's state at τ = 40 min: in transit to f3 carrying o2.
    fn state_at_forty(inst: &Instance) -> State {
        let plan = vec![stop(3, &[2], &[]), stop(4, &[], &[3]), stop(5, &[3], &[])];
        let status = VehicleStatus {
            vehicle: VehicleId(0),
            current: None,
            carried: vec![OrderId(2)],
            plan: vec![],
        };
        let mut state = State {
            epoch: 4,
            time: 40 * MIN,
            vehicles: vec![status],
            unprocessed: vec![OrderId(3), OrderId(4)],
            revealed: vec![OrderId(4)],
        };
        // seed the destination so the simulation knows the arrival time
        state.vehicles[0].plan = vec![PlannedVisit {
            factory: FactoryId(3),
            arrival: 50 * MIN,
            waiting: 0,
            departure: 0,
            deliveries: vec![OrderId(2)],
            pickups: vec![],
        }];
        let action = Action::from_stops(inst, &state, vec![plan]).unwrap();
        state.vehicles[0].plan = action.plans[0].clone();
        state
    }

    fn minutes(plan: &[PlannedVisit]) -> Vec<(usize, Seconds, Seconds)> {
        plan.iter().map(|v| (v.factory.0, v.arrival / MIN, v.departure / MIN)).collect()
    }

    #[test]
    fn worked_example_transition() {
        let inst = worked_example();
        let state = state_at_forty(&inst);
        assert_eq!(minutes(&state.vehicles[0].plan), vec![(3, 50, 53), (4, 64, 67), (5, 78, 81)]);

        let action = Action::from_stops(
            &inst,
            &state,
            vec![vec![stop(3, &[2], &[]), stop(6, &[], &[4]), stop(4, &[], &[3]), stop(5, &[3, 4], &[])]],
        )
        .unwrap();
        assert!(validate_action(&inst, &state, &action).is_empty());
        assert_eq!(minutes(&action.plans[0]), vec![(3, 50, 53), (6, 64, 67), (4, 78, 81), (5, 92, 96)]);

        let step = transition(&inst, &state, &action).unwrap();
        let next = &step.next.vehicles[0];
        assert_eq!(step.next.time, 50 * MIN);
        let cur = next.current.unwrap();
        assert_eq!((cur.factory, cur.departure), (FactoryId(3), 53 * MIN));
        assert!(next.carried.is_empty());
        assert_eq!(minutes(&next.plan), vec![(6, 64, 67), (4, 78, 81), (5, 92, 96)]);
        assert_eq!(step.next.unprocessed, vec![OrderId(3), OrderId(4)]);
        assert!(step.next.revealed.is_empty());
        assert_eq!(step.progress[0].reached.len(), 1);
    }

    #[test]
    fn reveal_boundaries() {
        let inst = worked_example();
        // o1, o2 at 300 s; o3 at 1500 s; o4 at 2100 s; epochs of 600 s
        assert_eq!(reveal(&inst, 0), vec![OrderId(0)]);
        assert_eq!(reveal(&inst, 1), vec![OrderId(1), OrderId(2)]);
        assert!(reveal(&inst, 2).is_empty());
        assert_eq!(reveal(&inst, 3), vec![OrderId(3)]);
        // release exactly at τ_4 = 2400? o4 is at 2100, inside (1800, 2400]
        assert_eq!(reveal(&inst, 4), vec![OrderId(4)]);
        let mut shifted = inst.clone();
        shifted.orders[4].release_time = 2400;
        assert_eq!(reveal(&shifted, 4), vec![OrderId(4)]);
        assert!(reveal(&shifted, 5).is_empty());
    }

    #[test]
    fn parked_vehicle_stays_parked() {
        let inst = worked_example();
        let state = State::initial(&inst);
        let action = Action::carry_over(&state);
        let step = transition(&inst, &state, &action).unwrap();
        let c = step.next.vehicles[0].current.unwrap();
        assert_eq!((c.factory, c.departure), (FactoryId(0), 600));
    }

    #[test]
    fn docked_in_service_keeps_current() {
        let inst = worked_example();
        let mut state = State::initial(&inst);
        state.vehicles[0].current = Some(Current {
            factory: FactoryId(1),
            arrival: 0,
            service_start: 0,
            departure: 700,
        });
        let action = Action::from_stops(&inst, &state, vec![vec![stop(2, &[], &[])]]).unwrap();
        let step = transition(&inst, &state, &action).unwrap();
        let next = &step.next.vehicles[0];
        assert_eq!(next.current.unwrap().departure, 700);
        assert_eq!(next.plan.len(), 1);
        assert_eq!(step.progress[0].left_at, None);
    }

    #[test]
    fn finished_vehicle_with_plan_is_in_transit() {
        let inst = worked_example();
        let state = State::initial(&inst);
        let action = Action::from_stops(&inst, &state, vec![vec![stop(1, &[], &[])]]).unwrap();
        let step = transition(&inst, &state, &action).unwrap();
        let next = &step.next.vehicles[0];
        assert!(next.current.is_none());
        assert_eq!(next.plan[0].arrival, 11 * MIN);
        assert_eq!(step.progress[0].left_at, Some(0));
    }

    #[test]
    fn violations_are_reported() {
        let inst = worked_example();
        let state = state_at_forty(&inst);

        let visit = |s: Stop| PlannedVisit {
            factory: s.factory,
            arrival: 0,
            waiting: 0,
            departure: 0,
            deliveries: s.deliveries,
            pickups: s.pickups,
        };
        let moved = Action {
            plans: vec![vec![visit(stop(2, &[], &[])), visit(stop(3, &[2], &[]))]],
        };
        let kinds: Vec<_> = validate_action(&inst, &state, &moved).iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::DestinationLock));

        let mut two = inst.clone();
        two.vehicles.push(crate::model::Vehicle {
            id: VehicleId(1),
            name: "w".into(),
            initial_factory: FactoryId(0),
        });
        let state2 = State {
            unprocessed: vec![OrderId(3)],
            ..State::initial(&two)
        };
        let both = Action::from_stops(
            &two,
            &state2,
            vec![vec![stop(4, &[], &[3]), stop(5, &[3], &[])], vec![stop(4, &[], &[3]), stop(5, &[3], &[])]],
        )
        .unwrap();
        let kinds: Vec<_> = validate_action(&two, &state2, &both).iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::Compatibility));

        let mut tampered = Action::from_stops(&two, &state2, vec![vec![stop(4, &[], &[3]), stop(5, &[3], &[])], vec![]]).unwrap();
        assert!(validate_action(&two, &state2, &tampered).is_empty());
        tampered.plans[0][1].arrival += 1;
        let kinds: Vec<_> = validate_action(&two, &state2, &tampered).iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![ViolationKind::Timing]);

        let early = Action::from_stops(&two, &state2, vec![vec![stop(1, &[], &[1]), stop(2, &[1], &[])], vec![]]).unwrap();
        let kinds: Vec<_> = validate_action(&two, &state2, &early).iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![ViolationKind::Unprocessed]);

        let backwards = Action::from_stops(&two, &state2, vec![vec![stop(5, &[3], &[]), stop(4, &[], &[3])], vec![]]).unwrap();
        let kinds: Vec<_> = validate_action(&two, &state2, &backwards).iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![ViolationKind::PickupBeforeDelivery]);
    }

    #[test]
    fn empty_instance_terminates_immediately() {
        let mut inst = worked_example();
        inst.orders.clear();
        let r = run_episode(&inst, &mut IdleDispatcher, EpisodeOptions::default()).unwrap();
        assert_eq!(r.epochs, 0);
        assert_eq!(r.cost.weighted_total, 0.0);
    }

    #[test]
    fn idle_dispatcher_hits_epoch_limit() {
        let inst = worked_example();
        let err = run_episode(&inst, &mut IdleDispatcher, EpisodeOptions { max_epochs: 5 }).unwrap_err();
        assert!(matches!(err, SdpError::EpochLimit(5)));
    }

    #[test]
    fn digest_is_stable() {
        let inst = worked_example();
        let state = state_at_forty(&inst);
        let a = Action::carry_over(&state);
        assert_eq!(a.digest(), a.clone().digest());
        assert_eq!(a.digest().len(), 64);
    }
}
