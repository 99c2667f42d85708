//! Brute-force oracles and random fixtures shared by the integration tests.
#![allow(dead_code)]

use dpdp_core::dispatcher::EpochContext;
use dpdp_core::evaluator::{self, CostMode, VehiclePlan};
use dpdp_core::feasibility::{Node, Route};
use dpdp_core::model::{
    Factory, FactoryId, Instance, Order, OrderId, Params, Quantity, Seconds, TravelModel, Vehicle, VehicleId,
};
use rand::Rng;
use std::collections::HashSet;

/// Stack simulation: carried orders are loaded bottom first, every
/// delivery must unload the top of the stack.
pub fn stack_lifo(carried: &[OrderId], nodes: &[Node]) -> bool {
    let mut stack: Vec<OrderId> = carried.to_vec();
    for n in nodes {
        match *n {
            Node::Pickup(o) => stack.push(o),
            Node::Delivery(o) => {
                if stack.pop() != Some(o) {
                    return false;
                }
            }
        }
    }
    true
}

pub fn load_ok(inst: &Instance, route: &Route) -> bool {
    let cap = inst.params.capacity.quarters() as i64;
    let mut load: i64 = route.carried.iter().map(|&o| inst.order(o).quantity.quarters() as i64).sum();
    if load > cap {
        return false;
    }
    for n in &route.nodes {
        let q = inst.order(n.order()).quantity.quarters() as i64;
        load += if matches!(n, Node::Pickup(_)) { q } else { -q };
        if load > cap {
            return false;
        }
    }
    true
}

/// The route keeps its locked deliveries in front.
pub fn lock_kept(route: &Route) -> bool {
    match &route.lock {
        None => true,
        Some(l) => {
            route.nodes.len() >= l.deliveries.len()
                && l.deliveries.iter().zip(&route.nodes).all(|(&o, &n)| n == Node::Delivery(o))
        }
    }
}

pub fn feasible(inst: &Instance, route: &Route) -> bool {
    lock_kept(route) && stack_lifo(&route.carried, &route.nodes) && load_ok(inst, route)
}

/// Perturbed cost of `routes` straight from the evaluator.
pub fn perturbed(ctx: &EpochContext<'_>, routes: &[Route]) -> f64 {
    let plans: Vec<VehiclePlan> = routes
        .iter()
        .enumerate()
        .map(|(i, r)| VehiclePlan {
            vehicle: r.vehicle,
            start: ctx.starts[i],
            stops: r.stops(ctx.inst),
        })
        .collect();
    evaluator::evaluate(ctx.inst, ctx.now, &plans, &ctx.multipliers, CostMode::Perturbed, Some(ctx.epoch_end))
        .unwrap()
        .1
        .weighted_total
}

fn with_nodes(route: &Route, nodes: Vec<Node>) -> Route {
    Route {
        vehicle: route.vehicle,
        carried: route.carried.clone(),
        lock: route.lock.clone(),
        nodes,
    }
}

/// Every solution reachable by inserting `order` anywhere, feasible or not.
pub fn all_insertions(routes: &[Route], order: OrderId) -> Vec<Vec<Route>> {
    let mut out = Vec::new();
    for (v, r) in routes.iter().enumerate() {
        let n = r.nodes.len();
        for p in 0..=n {
            for d in p..=n {
                let mut nodes = r.nodes.clone();
                nodes.insert(d, Node::Delivery(order));
                nodes.insert(p, Node::Pickup(order));
                let mut next = routes.to_vec();
                next[v] = with_nodes(r, nodes);
                out.push(next);
            }
        }
    }
    out
}

/// (start, end) of every pickup and its delivery.
pub fn block_spans(route: &Route) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, n) in route.nodes.iter().enumerate() {
        if let Node::Pickup(o) = *n {
            let j = route.nodes.iter().position(|m| *m == Node::Delivery(o)).unwrap();
            out.push((i, j));
        }
    }
    out
}

fn is_bridge(inst: &Instance, r: &Route, ps: usize, ds: usize, len: usize) -> bool {
    if len == 0 || ps + len > ds || ds + len > r.nodes.len() {
        return false;
    }
    let pf = r.nodes[ps].factory(inst);
    let df = r.nodes[ds].factory(inst);
    (0..len).all(|k| {
        let p = r.nodes[ps + k];
        let d = r.nodes[ds + len - 1 - k];
        matches!(p, Node::Pickup(_))
            && d == Node::Delivery(p.order())
            && p.factory(inst) == pf
            && d.factory(inst) == df
    })
}

/// Bridges not properly contained in another bridge, as (pickup start,
/// delivery start, len).
pub fn maximal_bridge_spans(inst: &Instance, r: &Route) -> Vec<(usize, usize, usize)> {
    let n = r.nodes.len();
    let mut all = Vec::new();
    for ps in 0..n {
        for ds in ps..n {
            for len in 1..=n {
                if is_bridge(inst, r, ps, ds, len) {
                    all.push((ps, ds, len));
                }
            }
        }
    }
    let contains = |big: &(usize, usize, usize), small: &(usize, usize, usize)| {
        big != small
            && big.0 <= small.0
            && small.0 + small.2 <= big.0 + big.2
            && big.1 <= small.1
            && small.1 + small.2 <= big.1 + big.2
    };
    all.iter().filter(|b| !all.iter().any(|c| contains(c, b))).copied().collect()
}

/// Full candidate set of one operator, as solutions, excluding the input.
pub fn brute_neighbors(inst: &Instance, routes: &[Route], operator: &str) -> Vec<Vec<Route>> {
    let mut out: Vec<Vec<Route>> = Vec::new();
    let relocate = |out: &mut Vec<Vec<Route>>, from: usize, taken: &HashSet<usize>, seg: Vec<Node>| {
        let src = &routes[from];
        let rest: Vec<Node> = src.nodes.iter().enumerate().filter(|(i, _)| !taken.contains(i)).map(|(_, &n)| n).collect();
        for to in 0..routes.len() {
            let base = if to == from { rest.clone() } else { routes[to].nodes.clone() };
            for gap in 0..=base.len() {
                let mut nodes = base.clone();
                nodes.splice(gap..gap, seg.iter().copied());
                let mut next = routes.to_vec();
                if to != from {
                    next[from] = with_nodes(src, rest.clone());
                }
                next[to] = with_nodes(&routes[to], nodes);
                out.push(next);
            }
        }
    };
    match operator {
        "relocate-block" => {
            for (from, r) in routes.iter().enumerate() {
                for (s, e) in block_spans(r) {
                    relocate(&mut out, from, &(s..=e).collect(), r.nodes[s..=e].to_vec());
                }
            }
        }
        "relocate-bridge" => {
            for (from, r) in routes.iter().enumerate() {
                for (ps, ds, len) in maximal_bridge_spans(inst, r) {
                    let taken: HashSet<usize> = (ps..ps + len).chain(ds..ds + len).collect();
                    let mut seg = r.nodes[ps..ps + len].to_vec();
                    seg.extend_from_slice(&r.nodes[ds..ds + len]);
                    relocate(&mut out, from, &taken, seg);
                }
            }
        }
        "block-exchange" => {
            let blocks: Vec<(usize, (usize, usize))> = routes
                .iter()
                .enumerate()
                .flat_map(|(v, r)| block_spans(r).into_iter().map(move |b| (v, b)))
                .collect();
            for (i, &(ra, a)) in blocks.iter().enumerate() {
                for &(rb, b) in &blocks[i + 1..] {
                    if ra == rb && a.0 <= b.1 && b.0 <= a.1 {
                        continue;
                    }
                    let seg_a = routes[ra].nodes[a.0..=a.1].to_vec();
                    let seg_b = routes[rb].nodes[b.0..=b.1].to_vec();
                    let mut next = routes.to_vec();
                    if ra == rb {
                        let (x, y, sx, sy) = if a.0 < b.0 { (a, b, seg_a, seg_b) } else { (b, a, seg_b, seg_a) };
                        let n = &routes[ra].nodes;
                        let mut nodes = n[..x.0].to_vec();
                        nodes.extend(sy);
                        nodes.extend_from_slice(&n[x.1 + 1..y.0]);
                        nodes.extend(sx);
                        nodes.extend_from_slice(&n[y.1 + 1..]);
                        next[ra] = with_nodes(&routes[ra], nodes);
                    } else {
                        let mut na = routes[ra].nodes[..a.0].to_vec();
                        na.extend(seg_b);
                        na.extend_from_slice(&routes[ra].nodes[a.1 + 1..]);
                        let mut nb = routes[rb].nodes[..b.0].to_vec();
                        nb.extend(seg_a);
                        nb.extend_from_slice(&routes[rb].nodes[b.1 + 1..]);
                        next[ra] = with_nodes(&routes[ra], na);
                        next[rb] = with_nodes(&routes[rb], nb);
                    }
                    out.push(next);
                }
            }
        }
        _ => panic!("unknown operator {operator}"),
    }
    out.retain(|s| s.as_slice() != routes);
    out
}

/// Least perturbed cost over the feasible members of `candidates`.
pub fn best_cost(ctx: &EpochContext<'_>, candidates: &[Vec<Route>]) -> Option<f64> {
    candidates
        .iter()
        .filter(|s| s.iter().all(|r| feasible(ctx.inst, r)))
        .map(|s| perturbed(ctx, s))
        .min_by(f64::total_cmp)
}

/// Factories on a small grid, `ports` each, travel 10 minutes per unit of
/// Manhattan distance. Vehicles start at random factories.
pub fn random_instance(rng: &mut impl Rng, factories: usize, vehicles: usize, orders: usize, ports: usize) -> Instance {
    let pos: Vec<(i64, i64)> = (0..factories).map(|_| (rng.gen_range(0..4), rng.gen_range(0..4))).collect();
    let mut dist = Vec::new();
    let mut time = Vec::new();
    for i in 0..factories {
        for j in 0..factories {
            let d = if i == j { 0 } else { ((pos[i].0 - pos[j].0).abs() + (pos[i].1 - pos[j].1).abs()).max(1) };
            dist.push(d as f64 * 7.5);
            time.push(d * 600);
        }
    }
    let fs = (0..factories)
        .map(|i| Factory {
            id: FactoryId(i),
            name: format!("f{i}"),
            port_count: ports,
        })
        .collect();
    let vs = (0..vehicles)
        .map(|i| Vehicle {
            id: VehicleId(i),
            name: format!("v{i}"),
            initial_factory: FactoryId(rng.gen_range(0..factories)),
        })
        .collect();
    let os = (0..orders)
        .map(|i| {
            let p = rng.gen_range(0..factories);
            let mut d = rng.gen_range(0..factories - 1);
            if d >= p {
                d += 1;
            }
            let release: Seconds = rng.gen_range(0..4) * 600;
            Order {
                id: OrderId(i),
                name: format!("o{i}"),
                pickup_factory: FactoryId(p),
                delivery_factory: FactoryId(d),
                release_time: release,
                due_time: release + rng.gen_range(3600..14_400),
                quantity: Quantity::from_quarters(rng.gen_range(4..=40)),
                load_time: rng.gen_range(1..=4) * 30,
                unload_time: rng.gen_range(1..=4) * 30,
                parent: None,
                items: vec![],
            }
        })
        .collect();
    let travel = TravelModel::new(factories, dist, time).unwrap();
    Instance::new("random", fs, travel, vs, os, Params::defaults(vehicles)).unwrap()
}

/// Random LIFO- and capacity-feasible assignment of every order.
pub fn random_solution(rng: &mut impl Rng, inst: &Instance, routes: &[Route], orders: &[OrderId]) -> Vec<Route> {
    let mut routes = routes.to_vec();
    for &o in orders {
        let options: Vec<Vec<Route>> = all_insertions(&routes, o)
            .into_iter()
            .filter(|s| s.iter().all(|r| feasible(inst, r)))
            .collect();
        routes = options[rng.gen_range(0..options.len())].clone();
    }
    routes
}

/// All LIFO-feasible solutions that serve `orders` with `vehicles` empty
/// routes.
pub fn all_solutions(inst: &Instance, vehicles: usize, orders: &[OrderId]) -> Vec<Vec<Route>> {
    let mut frontier = vec![(0..vehicles).map(|v| Route::empty(VehicleId(v))).collect::<Vec<_>>()];
    for &o in orders {
        let mut next = Vec::new();
        let mut seen = HashSet::new();
        for s in &frontier {
            for c in all_insertions(s, o) {
                let key: Vec<Vec<Node>> = c.iter().map(|r| r.nodes.clone()).collect();
                if c.iter().all(|r| feasible(inst, r)) && seen.insert(key) {
                    next.push(c);
                }
            }
        }
        frontier = next;
    }
    frontier
}
