//! Node-sequence view of a vehicle's plan, the structural feasibility
//! predicates (LIFO, capacity, destination lock) and the block / bridge
//! decompositions used by the neighbourhood operators.

use crate::evaluator::Stop;
use crate::model::{FactoryId, Instance, OrderId, Quantity, VehicleId};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Node {
    Pickup(OrderId),
    Delivery(OrderId),
}

impl Node {
    #[inline]
    pub fn order(self) -> OrderId {
        match self {
            Node::Pickup(o) | Node::Delivery(o) => o,
        }
    }

    #[inline]
    pub fn is_pickup(self) -> bool {
        matches!(self, Node::Pickup(_))
    }

    #[inline]
    pub fn factory(self, inst: &Instance) -> FactoryId {
        match self {
            Node::Pickup(o) => inst.order(o).pickup_factory,
            Node::Delivery(o) => inst.order(o).delivery_factory,
        }
    }
}

/// Destination of an in-transit vehicle together with the deliveries it
/// is committed to make there. Routes holding a lock must start with
/// exactly these delivery nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DestinationLock {
    pub factory: FactoryId,
    pub deliveries: Vec<OrderId>,
}

/// A vehicle route: the head holds the carried orders (in loading order),
/// `nodes` the inner pickup/delivery nodes. The terminal node is implicit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub vehicle: VehicleId,
    pub carried: Vec<OrderId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock: Option<DestinationLock>,
    pub nodes: Vec<Node>,
}

/// Consecutive nodes `start..=end` opening with an order's pickup and
/// closing with its delivery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Block {
    pub start: usize,
    pub end: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &Block) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Pickup span `pickup_start..pickup_start+len` at one factory paired in
/// reverse with delivery span `delivery_start..delivery_start+len` at one
/// factory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bridge {
    pub pickup_start: usize,
    pub delivery_start: usize,
    pub len: usize,
}

impl Bridge {
    pub fn pickup_span(&self) -> std::ops::Range<usize> {
        self.pickup_start..self.pickup_start + self.len
    }

    pub fn delivery_span(&self) -> std::ops::Range<usize> {
        self.delivery_start..self.delivery_start + self.len
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeasibilityError {
    #[error("order {0} appears more than once as a pickup or delivery")]
    DuplicateNode(OrderId),
    #[error("order {0} is delivered but neither carried nor picked up")]
    DeliveryWithoutPickup(OrderId),
    #[error("order {0} is picked up but never delivered")]
    MissingDelivery(OrderId),
    #[error("order {0} is delivered before it is picked up")]
    DeliveryBeforePickup(OrderId),
    #[error("carried order {0} has a pickup node")]
    CarriedPickedUp(OrderId),
    #[error("order {0} is already part of the route")]
    OrderAlreadyInRoute(OrderId),
    #[error("insertion gaps ({pickup}, {delivery}) invalid for a route of {len} nodes")]
    GapOutOfRange {
        pickup: usize,
        delivery: usize,
        len: usize,
    },
}

struct Positions {
    /// (order, pickup position, delivery position) in the concatenated
    /// carried-then-nodes list, sorted by pickup position.
    intervals: Vec<(OrderId, usize, usize)>,
}

impl Route {
    pub fn empty(vehicle: VehicleId) -> Self {
        Self {
            vehicle,
            carried: Vec::new(),
            lock: None,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.lock.is_none()
    }

    /// Number of leading nodes fixed by the destination lock.
    pub fn locked_len(&self) -> usize {
        self.lock.as_ref().map_or(0, |l| l.deliveries.len())
    }

    pub fn contains(&self, order: OrderId) -> bool {
        self.carried.contains(&order) || self.nodes.iter().any(|n| n.order() == order)
    }

    /// Orders picked up along the route.
    pub fn pickups(&self) -> impl Iterator<Item = OrderId> + '_ {
        self.nodes.iter().filter(|n| n.is_pickup()).map(|n| n.order())
    }

    fn positions(&self) -> Result<Positions, FeasibilityError> {
        let c = self.carried.len();
        let mut entries: Vec<(OrderId, bool, usize)> = Vec::with_capacity(c + self.nodes.len());
        entries.extend(self.carried.iter().enumerate().map(|(i, &o)| (o, true, i)));
        entries.extend(
            self.nodes
                .iter()
                .enumerate()
                .map(|(i, n)| (n.order(), n.is_pickup(), c + i)),
        );
        entries.sort_unstable_by_key(|&(o, _, pos)| (o, pos));

        let mut intervals = Vec::with_capacity(entries.len() / 2 + 1);
        let mut i = 0;
        while i < entries.len() {
            let (order, first_is_load, first) = entries[i];
            if i + 1 >= entries.len() || entries[i + 1].0 != order {
                return Err(if first_is_load {
                    FeasibilityError::MissingDelivery(order)
                } else {
                    FeasibilityError::DeliveryWithoutPickup(order)
                });
            }
            if i + 2 < entries.len() && entries[i + 2].0 == order {
                return Err(if first < c && entries[i + 1].1 {
                    FeasibilityError::CarriedPickedUp(order)
                } else {
                    FeasibilityError::DuplicateNode(order)
                });
            }
            let (_, second_is_load, second) = entries[i + 1];
            match (first_is_load, second_is_load) {
                (true, false) => intervals.push((order, first, second)),
                (false, true) => return Err(FeasibilityError::DeliveryBeforePickup(order)),
                (true, true) => {
                    return Err(if first < c {
                        FeasibilityError::CarriedPickedUp(order)
                    } else {
                        FeasibilityError::DuplicateNode(order)
                    })
                }
                (false, false) => return Err(FeasibilityError::DuplicateNode(order)),
            }
            i += 2;
        }
        intervals.sort_unstable_by_key(|&(_, p, _)| p);
        Ok(Positions { intervals })
    }

    /// Checks that every order forms exactly one matched pickup/delivery
    /// pair (carried orders: delivery only).
    pub fn check_consistency(&self) -> Result<(), FeasibilityError> {
        self.positions().map(|_| ())
    }

    /// LIFO over the carried list followed by the node sequence: for any two
    /// orders, the one loaded first is either unloaded before the other is
    /// loaded or after the other is unloaded.
    pub fn lifo_ok(&self) -> Result<bool, FeasibilityError> {
        let pos = self.positions()?;
        let mut open: Vec<usize> = Vec::new();
        for &(_, start, end) in &pos.intervals {
            while open.last().is_some_and(|&top_end| top_end <= start) {
                open.pop();
            }
            if open.last().is_some_and(|&top_end| top_end < end) {
                return Ok(false);
            }
            open.push(end);
        }
        Ok(true)
    }

    /// Running load (carried, +q per pickup, -q per delivery) never exceeds
    /// `capacity`.
    pub fn capacity_ok(&self, inst: &Instance, capacity: Quantity) -> Result<bool, FeasibilityError> {
        self.check_consistency()?;
        Ok(self.capacity_within(inst, capacity))
    }

    fn capacity_within(&self, inst: &Instance, capacity: Quantity) -> bool {
        let mut load: u32 = self.carried.iter().map(|&o| inst.order(o).quantity.quarters()).sum();
        if load > capacity.quarters() {
            return false;
        }
        for n in &self.nodes {
            let q = inst.order(n.order()).quantity.quarters();
            if n.is_pickup() {
                load += q;
                if load > capacity.quarters() {
                    return false;
                }
            } else {
                load -= q;
            }
        }
        true
    }

    /// The route starts with exactly the locked deliveries, if any.
    pub fn lock_ok(&self) -> bool {
        match &self.lock {
            None => true,
            Some(lock) => {
                self.nodes.len() >= lock.deliveries.len()
                    && lock
                        .deliveries
                        .iter()
                        .zip(&self.nodes)
                        .all(|(&d, &n)| n == Node::Delivery(d))
            }
        }
    }

    /// LIFO, capacity and destination lock together.
    pub fn is_feasible(&self, inst: &Instance) -> Result<bool, FeasibilityError> {
        Ok(self.lock_ok() && self.lifo_ok()? && self.capacity_within(inst, inst.params.capacity))
    }

    /// Every (pickup, matching delivery) pair. Carried orders have no
    /// pickup node and so no block.
    pub fn blocks(&self) -> Result<Vec<Block>, FeasibilityError> {
        let c = self.carried.len();
        let pos = self.positions()?;
        let mut blocks: Vec<Block> = pos
            .intervals
            .iter()
            .filter(|&&(_, p, _)| p >= c)
            .map(|&(_, p, d)| Block { start: p - c, end: d - c })
            .collect();
        blocks.sort_unstable();
        Ok(blocks)
    }

    /// Delivery position for each pickup node.
    fn delivery_index(&self) -> Result<Vec<Option<usize>>, FeasibilityError> {
        let mut idx = vec![None; self.nodes.len()];
        for b in self.blocks()? {
            idx[b.start] = Some(b.end);
        }
        Ok(idx)
    }

    fn is_bridge(&self, inst: &Instance, matches: &[Option<usize>], start: usize, len: usize) -> bool {
        if len == 0 || start + len > self.nodes.len() {
            return false;
        }
        let Some(last) = matches[start + len - 1] else {
            return false;
        };
        let pickup_factory = self.nodes[start].factory(inst);
        let delivery_factory = self.nodes[last].factory(inst);
        (0..len).all(|j| {
            let p = start + j;
            matches[p] == Some(last + (len - 1 - j))
                && self.nodes[p].factory(inst) == pickup_factory
                && self.nodes[last + (len - 1 - j)].factory(inst) == delivery_factory
        })
    }

    /// All bridges that cannot be extended by a predecessor/successor pair
    /// on either side.
    pub fn maximal_bridges(&self, inst: &Instance) -> Result<Vec<Bridge>, FeasibilityError> {
        let matches = self.delivery_index()?;
        let n = self.nodes.len();
        let mut bridges = Vec::new();
        for start in 0..n {
            for len in 1..=n - start {
                if !self.is_bridge(inst, &matches, start, len) {
                    // a longer pickup span starting here needs this one to be a bridge too
                    break;
                }
                let extends_outward = start > 0 && self.is_bridge(inst, &matches, start - 1, len + 1);
                let extends_inward = self.is_bridge(inst, &matches, start, len + 1);
                if !extends_outward && !extends_inward {
                    let last = matches[start + len - 1].expect("bridge pickups are matched");
                    bridges.push(Bridge {
                        pickup_start: start,
                        delivery_start: last,
                        len,
                    });
                }
            }
        }
        Ok(bridges)
    }

    /// Inserts `order`'s pickup at `pickup_gap` and then its delivery at
    /// `delivery_gap` of the already-extended route. `Ok(None)` means the
    /// result is structurally infeasible.
    pub fn insert_order(
        &self,
        inst: &Instance,
        order: OrderId,
        pickup_gap: usize,
        delivery_gap: usize,
    ) -> Result<Option<Route>, FeasibilityError> {
        if self.contains(order) {
            return Err(FeasibilityError::OrderAlreadyInRoute(order));
        }
        let len = self.nodes.len();
        if pickup_gap > len || delivery_gap <= pickup_gap || delivery_gap > len + 1 {
            return Err(FeasibilityError::GapOutOfRange {
                pickup: pickup_gap,
                delivery: delivery_gap,
                len,
            });
        }
        if pickup_gap < self.locked_len() {
            return Ok(None);
        }
        let candidate = self.with_inserted(order, pickup_gap, delivery_gap);
        Ok(candidate.is_feasible(inst)?.then_some(candidate))
    }

    /// Unchecked insertion used by the candidate enumerators.
    pub(crate) fn with_inserted(&self, order: OrderId, pickup_gap: usize, delivery_gap: usize) -> Route {
        let mut nodes = Vec::with_capacity(self.nodes.len() + 2);
        nodes.extend_from_slice(&self.nodes[..pickup_gap]);
        nodes.push(Node::Pickup(order));
        nodes.extend_from_slice(&self.nodes[pickup_gap..delivery_gap - 1]);
        nodes.push(Node::Delivery(order));
        nodes.extend_from_slice(&self.nodes[delivery_gap - 1..]);
        Route {
            nodes,
            ..self.clone_head()
        }
    }

    pub(crate) fn clone_head(&self) -> Route {
        Route {
            vehicle: self.vehicle,
            carried: self.carried.clone(),
            lock: self.lock.clone(),
            nodes: Vec::new(),
        }
    }

    /// Drops both nodes of a non-carried order.
    pub fn remove_order(&self, order: OrderId) -> Route {
        Route {
            nodes: self.nodes.iter().copied().filter(|n| n.order() != order).collect(),
            ..self.clone_head()
        }
    }

    /// Groups nodes into factory stops. Consecutive nodes at one factory
    /// share a stop as long as the stop unloads before it loads. A locked
    /// route always opens with its destination stop, which takes the locked
    /// deliveries and any pickups at that factory directly after them.
    pub fn stops(&self, inst: &Instance) -> Vec<Stop> {
        let mut stops = Vec::new();
        let mut rest = &self.nodes[..];
        if let Some(lock) = &self.lock {
            let mut stop = Stop {
                factory: lock.factory,
                deliveries: lock.deliveries.clone(),
                pickups: Vec::new(),
            };
            rest = &rest[lock.deliveries.len().min(rest.len())..];
            while let Some((&n, tail)) = rest.split_first() {
                if !n.is_pickup() || n.factory(inst) != lock.factory {
                    break;
                }
                stop.pickups.push(n.order());
                rest = tail;
            }
            stops.push(stop);
        }
        let mut current: Option<Stop> = None;
        for &n in rest {
            let f = n.factory(inst);
            let joins = current
                .as_ref()
                .is_some_and(|s| s.factory == f && (n.is_pickup() || s.pickups.is_empty()));
            if !joins {
                stops.extend(current.take());
                current = Some(Stop {
                    factory: f,
                    deliveries: Vec::new(),
                    pickups: Vec::new(),
                });
            }
            let stop = current.as_mut().expect("stop opened above");
            match n {
                Node::Pickup(o) => stop.pickups.push(o),
                Node::Delivery(o) => stop.deliveries.push(o),
            }
        }
        stops.extend(current);
        stops
    }

    /// Rebuilds a route from stops (deliveries before pickups in each).
    pub fn from_stops(
        vehicle: VehicleId,
        carried: Vec<OrderId>,
        lock: Option<DestinationLock>,
        stops: &[Stop],
    ) -> Route {
        let mut nodes = Vec::new();
        for s in stops {
            nodes.extend(s.deliveries.iter().map(|&o| Node::Delivery(o)));
            nodes.extend(s.pickups.iter().map(|&o| Node::Pickup(o)));
        }
        Route {
            vehicle,
            carried,
            lock,
            nodes,
        }
    }

    /// One line per node: `<seq> <kind> <order-id> <factory-id>`. The head
    /// lists the carried orders comma-separated, the terminal uses `-`.
    pub fn dump(&self, inst: &Instance) -> String {
        let mut out = String::new();
        let carried = if self.carried.is_empty() {
            "-".to_string()
        } else {
            self.carried
                .iter()
                .map(|&o| inst.order(o).name.as_str())
                .collect::<Vec<_>>()
                .join(",")
        };
        let head_factory = self
            .lock
            .as_ref()
            .map_or("-".to_string(), |l| inst.factory(l.factory).name.clone());
        let _ = writeln!(out, "0 head {carried} {head_factory}");
        for (i, n) in self.nodes.iter().enumerate() {
            let kind = if n.is_pickup() { "pickup" } else { "delivery" };
            let _ = writeln!(
                out,
                "{} {kind} {} {}",
                i + 1,
                inst.order(n.order()).name,
                inst.factory(n.factory(inst)).name
            );
        }
        let _ = writeln!(out, "{} terminal - -", self.nodes.len() + 1);
        out
    }
}
