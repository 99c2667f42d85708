//! Joint event-driven simulation of every vehicle's planned stops and the
//! cost terms derived from the resulting timeline.
//!
//! Vehicles always leave as soon as service ends. Events at the same
//! instant are processed departures first, then by vehicle rank, so a port
//! freed at `t` can be taken by an arrival at `t`.

use crate::docking::{DockingError, ReservationList};
use crate::model::{CostBreakdown, FactoryId, Instance, Multipliers, OrderId, Seconds, VehicleId};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::io::Write;
use thiserror::Error;

/// One factory visit: unload `deliveries` (in order) then load `pickups`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stop {
    pub factory: FactoryId,
    pub deliveries: Vec<OrderId>,
    pub pickups: Vec<OrderId>,
}

/// Where a vehicle is when the simulation starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VehicleStart {
    /// At `factory`, free to leave at `ready` (or immediately if that has passed).
    Docked { factory: FactoryId, ready: Seconds },
    /// Driving to the first stop, reaching it at `arrival`.
    InTransit { destination: FactoryId, arrival: Seconds },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehiclePlan {
    pub vehicle: VehicleId,
    pub start: VehicleStart,
    pub stops: Vec<Stop>,
}

/// Simulated times of one stop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitTimes {
    pub arrival: Seconds,
    pub waiting: Seconds,
    pub departure: Seconds,
}

/// Per vehicle, per stop simulated times, parallel to the plans' stops.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub start_time: Seconds,
    /// Moment each vehicle leaves its starting factory (`None` if it never does
    /// or starts in transit).
    pub start_departures: Vec<Option<Seconds>>,
    pub visits: Vec<Vec<VisitTimes>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieBreak {
    #[default]
    VehicleId,
    /// Vehicles ranked by a seeded random permutation.
    Seeded(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostMode {
    /// Distance and tardiness only; split orders charged once at their latest fragment.
    TrueObjective,
    /// All four terms; every fragment charged on its own.
    Perturbed,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("vehicle {vehicle}: unknown factory {factory}")]
    UnknownFactory { vehicle: VehicleId, factory: FactoryId },
    #[error("vehicle {vehicle}: unknown order {order}")]
    UnknownOrder { vehicle: VehicleId, order: OrderId },
    #[error("vehicle {0} is in transit without a destination stop")]
    MissingDestination(VehicleId),
    #[error("vehicle {0} is in transit to a factory other than its first stop")]
    DestinationMismatch(VehicleId),
    #[error("plan for vehicle {0} is listed twice or out of range")]
    BadVehicle(VehicleId),
    #[error("perturbed cost needs the end of the epoch")]
    MissingEpochEnd,
    #[error(transparent)]
    Docking(#[from] DockingError),
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Departure,
    Arrival,
}

fn check_plan(inst: &Instance, plan: &VehiclePlan) -> Result<(), EvalError> {
    let v = plan.vehicle;
    let factory_ok = |f: FactoryId| {
        if f.0 < inst.factories.len() {
            Ok(())
        } else {
            Err(EvalError::UnknownFactory { vehicle: v, factory: f })
        }
    };
    match plan.start {
        VehicleStart::Docked { factory, .. } => factory_ok(factory)?,
        VehicleStart::InTransit { destination, .. } => {
            factory_ok(destination)?;
            match plan.stops.first() {
                None => return Err(EvalError::MissingDestination(v)),
                Some(s) if s.factory != destination => return Err(EvalError::DestinationMismatch(v)),
                _ => {}
            }
        }
    }
    for s in &plan.stops {
        factory_ok(s.factory)?;
        if let Some(&o) = s.deliveries.iter().chain(&s.pickups).find(|o| o.0 >= inst.orders.len()) {
            return Err(EvalError::UnknownOrder { vehicle: v, order: o });
        }
    }
    Ok(())
}

fn vehicle_ranks(plans: &[VehiclePlan], tie: TieBreak) -> Vec<usize> {
    match tie {
        TieBreak::VehicleId => plans.iter().map(|p| p.vehicle.0).collect(),
        TieBreak::Seeded(seed) => {
            let mut perm: Vec<usize> = (0..plans.len()).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut by_vehicle: Vec<usize> = (0..plans.len()).collect();
            by_vehicle.sort_by_key(|&i| plans[i].vehicle);
            let mut rank = vec![0; plans.len()];
            for (pos, &i) in by_vehicle.iter().enumerate() {
                rank[i] = perm[pos];
            }
            rank
        }
    }
}

/// Simulates all plans jointly from `now` with the default tie-break.
pub fn simulate(inst: &Instance, now: Seconds, plans: &[VehiclePlan]) -> Result<Timeline, EvalError> {
    simulate_with(inst, now, plans, TieBreak::VehicleId)
}

pub fn simulate_with(
    inst: &Instance,
    now: Seconds,
    plans: &[VehiclePlan],
    tie: TieBreak,
) -> Result<Timeline, EvalError> {
    let mut seen = vec![false; inst.vehicles.len().max(plans.len())];
    for p in plans {
        check_plan(inst, p)?;
        match seen.get_mut(p.vehicle.0) {
            Some(s) if !*s => *s = true,
            _ => return Err(EvalError::BadVehicle(p.vehicle)),
        }
    }
    let rank = vehicle_ranks(plans, tie);

    let mut lists: HashMap<FactoryId, ReservationList> = HashMap::new();

    // (time, kind, rank, plan index)
    let mut queue: BinaryHeap<Reverse<(Seconds, EventKind, usize, usize)>> = BinaryHeap::new();
    let mut visits: Vec<Vec<VisitTimes>> = plans.iter().map(|p| Vec::with_capacity(p.stops.len())).collect();
    let mut start_departures = vec![None; plans.len()];

    for (i, p) in plans.iter().enumerate() {
        match p.start {
            VehicleStart::Docked { factory, ready } => {
                if ready > now {
                    lists
                        .entry(factory)
                        .or_insert_with(|| ReservationList::new(inst.factory(factory).port_count))
                        .occupy(p.vehicle, ready);
                }
                if ready > now || !p.stops.is_empty() {
                    queue.push(Reverse((ready.max(now), EventKind::Departure, rank[i], i)));
                }
            }
            VehicleStart::InTransit { arrival, .. } => {
                queue.push(Reverse((arrival, EventKind::Arrival, rank[i], i)));
            }
        }
    }

    while let Some(Reverse((t, kind, _, i))) = queue.pop() {
        let plan = &plans[i];
        let done = visits[i].len();
        match kind {
            EventKind::Departure => {
                let here = if done == 0 {
                    start_departures[i] = Some(t);
                    match plan.start {
                        VehicleStart::Docked { factory, .. } => factory,
                        VehicleStart::InTransit { .. } => unreachable!("transit starts with an arrival"),
                    }
                } else {
                    plan.stops[done - 1].factory
                };
                if let Some(list) = lists.get_mut(&here) {
                    list.release_if_present(plan.vehicle);
                }
                if let Some(next) = plan.stops.get(done) {
                    let arrival = t + inst.travel.travel(here, next.factory);
                    queue.push(Reverse((arrival, EventKind::Arrival, rank[i], i)));
                }
            }
            EventKind::Arrival => {
                let stop = &plan.stops[done];
                let service = inst.service_time(&stop.deliveries, &stop.pickups);
                let admission = lists
                    .entry(stop.factory)
                    .or_insert_with(|| ReservationList::new(inst.factory(stop.factory).port_count))
                    .enqueue(plan.vehicle, t, service)?;
                visits[i].push(VisitTimes {
                    arrival: t,
                    waiting: admission.waiting,
                    departure: admission.departure,
                });
                queue.push(Reverse((admission.departure, EventKind::Departure, rank[i], i)));
            }
        }
    }

    Ok(Timeline {
        start_time: now,
        start_departures,
        visits,
    })
}

impl Timeline {
    /// Time until the next decision can change anything for plan `i`.
    pub fn committed_time(&self, plan: &VehiclePlan, i: usize, now: Seconds) -> Seconds {
        match plan.start {
            VehicleStart::Docked { ready, .. } => (ready - now).max(0),
            VehicleStart::InTransit { .. } => self.visits[i]
                .first()
                .map_or(0, |v| (v.departure - now).max(0)),
        }
    }
}

/// Objective terms of a simulated set of plans. `epoch_end` is the next
/// update point and decides which empty-plan vehicles count as idle.
pub fn cost_terms(
    inst: &Instance,
    plans: &[VehiclePlan],
    timeline: &Timeline,
    multipliers: &Multipliers,
    mode: CostMode,
    epoch_end: Option<Seconds>,
) -> Result<CostBreakdown, EvalError> {
    let weights = match mode {
        CostMode::TrueObjective => multipliers.true_objective(),
        CostMode::Perturbed => {
            if epoch_end.is_none() {
                return Err(EvalError::MissingEpochEnd);
            }
            *multipliers
        }
    };

    let mut distance = 0.0;
    let mut waiting = 0i64;
    let mut idle = 0usize;
    let mut tardiness = 0i64;
    let mut latest_by_parent: HashMap<&str, Seconds> = HashMap::new();

    for (i, plan) in plans.iter().enumerate() {
        let mut prev = match plan.start {
            VehicleStart::Docked { factory, .. } => Some(factory),
            VehicleStart::InTransit { .. } => None,
        };
        for (stop, times) in plan.stops.iter().zip(&timeline.visits[i]) {
            if let Some(p) = prev {
                distance += inst.travel.dist(p, stop.factory);
            }
            prev = Some(stop.factory);
            waiting += times.waiting;
            for &o in &stop.deliveries {
                let order = inst.order(o);
                let late = (times.arrival - order.due_time).max(0);
                match (mode, &order.parent) {
                    (CostMode::TrueObjective, Some(parent)) => {
                        let e = latest_by_parent.entry(parent.as_str()).or_insert(0);
                        *e = (*e).max(late);
                    }
                    _ => tardiness += late,
                }
            }
        }
        if let (Some(end), VehicleStart::Docked { ready, .. }) = (epoch_end, plan.start) {
            if plan.stops.is_empty() && ready < end {
                idle += 1;
            }
        }
    }
    tardiness += latest_by_parent.values().sum::<Seconds>();

    Ok(CostBreakdown::new(
        distance,
        tardiness as f64,
        waiting as f64,
        idle as f64,
        &weights,
    ))
}

/// Simulates and prices in one go.
pub fn evaluate(
    inst: &Instance,
    now: Seconds,
    plans: &[VehiclePlan],
    multipliers: &Multipliers,
    mode: CostMode,
    epoch_end: Option<Seconds>,
) -> Result<(Timeline, CostBreakdown), EvalError> {
    let timeline = simulate(inst, now, plans)?;
    let cost = cost_terms(inst, plans, &timeline, multipliers, mode, epoch_end)?;
    Ok((timeline, cost))
}

/// Flat, self-describing record of one simulated visit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub vehicle: String,
    pub seq: usize,
    pub factory: String,
    pub arrival: Seconds,
    pub waiting: Seconds,
    pub departure: Seconds,
    pub deliveries: Vec<String>,
    pub pickups: Vec<String>,
}

pub fn visit_records(inst: &Instance, plans: &[VehiclePlan], timeline: &Timeline) -> Vec<VisitRecord> {
    let names = |os: &[OrderId]| os.iter().map(|&o| inst.order(o).name.clone()).collect();
    plans
        .iter()
        .zip(&timeline.visits)
        .flat_map(|(plan, times)| {
            plan.stops.iter().zip(times).enumerate().map(move |(j, (s, t))| VisitRecord {
                vehicle: inst.vehicles[plan.vehicle.0].name.clone(),
                seq: j + 1,
                factory: inst.factory(s.factory).name.clone(),
                arrival: t.arrival,
                waiting: t.waiting,
                departure: t.departure,
                deliveries: names(&s.deliveries),
                pickups: names(&s.pickups),
            })
        })
        .collect()
}

/// Writes one JSON object per visit.
pub fn write_timeline_jsonl(
    out: &mut impl Write,
    inst: &Instance,
    plans: &[VehiclePlan],
    timeline: &Timeline,
) -> std::io::Result<()> {
    for r in visit_records(inst, plans, timeline) {
        serde_json::to_writer(&mut *out, &r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
