use super::{DispatchError, EpochContext, WorkingSolution};
use crate::feasibility::Route;
use crate::model::{estimated_delay, Instance, OrderId, Seconds};
use crate::par;
use crate::sdp::State;
use std::collections::HashSet;

/// Routes carried over from the state's plans.
pub fn reconstruct(state: &State) -> Vec<Route> {
    state.vehicles.iter().map(|v| v.route()).collect()
}

/// Unassigned released orders in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UrgencyPartition {
    pub urgent: Vec<OrderId>,
    pub non_urgent: Vec<OrderId>,
}

/// Splits unassigned orders by estimated delay against `threshold`, then
/// within each class groups by pickup factory (ascending id) and puts the
/// larger estimated delay first.
pub fn classify_and_order(inst: &Instance, state: &State, routes: &[Route], threshold: Seconds) -> UrgencyPartition {
    let assigned: HashSet<OrderId> = routes.iter().flat_map(|r| r.pickups()).collect();
    let mut keyed: Vec<(bool, usize, Seconds, OrderId)> = state
        .unprocessed
        .iter()
        .filter(|o| !assigned.contains(o))
        .map(|&o| {
            let order = inst.order(o);
            let ed = estimated_delay(order, state.time, &inst.travel, inst.params.dock_approach_time);
            (ed > threshold, order.pickup_factory.0, -ed, o)
        })
        .collect();
    keyed.sort_unstable();
    let mut p = UrgencyPartition::default();
    for (non_urgent, _, _, o) in keyed {
        if non_urgent {
            p.non_urgent.push(o);
        } else {
            p.urgent.push(o);
        }
    }
    p
}

/// Every (vehicle, pickup gap, delivery gap) the route shapes allow, in
/// canonical order.
pub fn insertion_candidates(routes: &[Route]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (v, r) in routes.iter().enumerate() {
        let n = r.len();
        for p in r.locked_len()..=n {
            for d in p + 1..=n + 1 {
                out.push((v, p, d));
            }
        }
    }
    out
}

/// Inserts `order` where the perturbed cost of the whole solution is lowest.
pub fn cheapest_insertion(
    ctx: &EpochContext<'_>,
    solution: &WorkingSolution,
    order: OrderId,
) -> Result<WorkingSolution, DispatchError> {
    let routes = &solution.routes;
    let candidates = insertion_candidates(routes);
    let best = par::argmin_by(&candidates, ctx.exec, |&(v, p, d)| {
        let r = routes[v].with_inserted(order, p, d);
        if !r.is_feasible(ctx.inst).ok()? {
            return None;
        }
        ctx.cost_with(routes, &[(v, r)]).ok().map(|c| c.weighted_total)
    });
    let (i, _) = best.ok_or(DispatchError::NoFeasibleInsertion(order))?;
    let (v, p, d) = candidates[i];
    let mut next = routes.clone();
    next[v] = routes[v].with_inserted(order, p, d);
    Ok(ctx.solution(next)?)
}
