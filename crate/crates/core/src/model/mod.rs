//! Domain types shared by every other module: factories, orders, vehicles,
//! the travel model, instance parameters and the cost breakdown.
//!
//! Times are integer seconds, distances are `f64`, and quantities are stored
//! as integer quarter-units so capacity checks are exact.

mod quantity;
pub mod schema;

pub use quantity::Quantity;

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Integer seconds since the start of the operating horizon.
pub type Seconds = i64;

macro_rules! index_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

index_type!(
    /// Position of a factory in [`Instance::factories`].
    FactoryId
);
index_type!(
    /// Position of an order in [`Instance::orders`] (after splitting).
    OrderId
);
index_type!(
    /// Position of a vehicle in [`Instance::vehicles`].
    VehicleId
);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("order {order}: item of size {size} exceeds vehicle capacity {capacity}")]
    ItemTooLarge {
        order: String,
        size: Quantity,
        capacity: Quantity,
    },
    #[error("order {order}: quantity {quantity} exceeds capacity {capacity} and no item list is available for splitting")]
    UnsplittableOrder {
        order: String,
        quantity: Quantity,
        capacity: Quantity,
    },
}

impl ModelError {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factory {
    pub id: FactoryId,
    pub name: String,
    /// Number of docking ports that can serve vehicles simultaneously.
    pub port_count: usize,
}

/// Dense distance and travel-time matrices over all factory pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct TravelModel {
    size: usize,
    dist: Vec<f64>,
    travel: Vec<Seconds>,
}

impl TravelModel {
    /// Builds a model from row-major matrices of `size * size` entries.
    pub fn new(size: usize, dist: Vec<f64>, travel: Vec<Seconds>) -> Result<Self, ModelError> {
        if dist.len() != size * size {
            return Err(ModelError::schema(
                "travel.distance",
                format!("expected {} entries, found {}", size * size, dist.len()),
            ));
        }
        if travel.len() != size * size {
            return Err(ModelError::schema(
                "travel.time",
                format!("expected {} entries, found {}", size * size, travel.len()),
            ));
        }
        for i in 0..size {
            for j in 0..size {
                let d = dist[i * size + j];
                let t = travel[i * size + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(ModelError::schema(
                        format!("travel.distance[{i}][{j}]"),
                        "distance must be finite and nonnegative",
                    ));
                }
                if t < 0 {
                    return Err(ModelError::schema(
                        format!("travel.time[{i}][{j}]"),
                        "travel time must be nonnegative",
                    ));
                }
                if i == j && (d != 0.0 || t != 0) {
                    return Err(ModelError::schema(
                        format!("travel[{i}][{i}]"),
                        "diagonal entries must be zero",
                    ));
                }
            }
        }
        Ok(Self { size, dist, travel })
    }

    /// Every distinct pair gets the same distance and travel time.
    pub fn uniform(size: usize, dist: f64, travel: Seconds) -> Self {
        let mut d = vec![dist; size * size];
        let mut t = vec![travel; size * size];
        for i in 0..size {
            d[i * size + i] = 0.0;
            t[i * size + i] = 0;
        }
        Self {
            size,
            dist: d,
            travel: t,
        }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn dist(&self, from: FactoryId, to: FactoryId) -> f64 {
        self.dist[from.0 * self.size + to.0]
    }

    #[inline]
    pub fn travel(&self, from: FactoryId, to: FactoryId) -> Seconds {
        self.travel[from.0 * self.size + to.0]
    }

    pub fn distance_rows(&self) -> Vec<Vec<f64>> {
        self.dist.chunks(self.size).map(<[f64]>::to_vec).collect()
    }

    pub fn time_rows(&self) -> Vec<Vec<Seconds>> {
        self.travel.chunks(self.size).map(<[Seconds]>::to_vec).collect()
    }
}

/// The three item kinds of the benchmark data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Box,
    SmallPallet,
    StandardPallet,
}

impl ItemKind {
    pub const ALL: [ItemKind; 3] = [ItemKind::Box, ItemKind::SmallPallet, ItemKind::StandardPallet];

    pub fn item(self) -> Item {
        match self {
            ItemKind::Box => Item::new(Quantity::from_quarters(1), 15),
            ItemKind::SmallPallet => Item::new(Quantity::from_quarters(2), 30),
            ItemKind::StandardPallet => Item::new(Quantity::from_quarters(4), 60),
        }
    }
}

/// A single indivisible piece of an order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub size: Quantity,
    pub load_time: Seconds,
    pub unload_time: Seconds,
}

impl Item {
    /// Item with identical loading and unloading durations.
    pub fn new(size: Quantity, handling: Seconds) -> Self {
        Self {
            size,
            load_time: handling,
            unload_time: handling,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: OrderId,
    pub name: String,
    pub pickup_factory: FactoryId,
    pub delivery_factory: FactoryId,
    pub release_time: Seconds,
    pub due_time: Seconds,
    pub quantity: Quantity,
    pub load_time: Seconds,
    pub unload_time: Seconds,
    /// Name of the original order when this is a split fragment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<Item>,
}

impl Order {
    /// Name of the order tardiness is reported against.
    pub fn scoring_name(&self) -> &str {
        self.parent.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: VehicleId,
    pub name: String,
    pub initial_factory: FactoryId,
}

/// Objective weights: distance, tardiness, waiting, idle vehicles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

impl Multipliers {
    /// Tardiness weight: 10000 per hour of delay.
    pub const TARDINESS_PER_SECOND: f64 = 10_000.0 / 3600.0;

    /// Tuned defaults for a fleet of `vehicle_count` vehicles.
    pub fn defaults(vehicle_count: usize) -> Self {
        let lambda2 = Self::TARDINESS_PER_SECOND;
        Self {
            lambda1: 1.0 / vehicle_count.max(1) as f64,
            lambda2,
            lambda3: 0.5 * lambda2,
            lambda4: 5.0,
        }
    }

    /// Same weights with the penalty terms switched off.
    pub fn true_objective(self) -> Self {
        Self {
            lambda3: 0.0,
            lambda4: 0.0,
            ..self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub capacity: Quantity,
    pub dock_approach_time: Seconds,
    pub epoch_length: Seconds,
    pub multipliers: Multipliers,
    pub urgency_threshold: Seconds,
}

impl Params {
    pub const DEFAULT_CAPACITY: Quantity = Quantity::from_quarters(60);
    pub const DEFAULT_DOCK_APPROACH: Seconds = 1800;
    pub const DEFAULT_EPOCH: Seconds = 600;
    pub const DEFAULT_URGENCY: Seconds = 3600;

    pub fn defaults(vehicle_count: usize) -> Self {
        Self {
            capacity: Self::DEFAULT_CAPACITY,
            dock_approach_time: Self::DEFAULT_DOCK_APPROACH,
            epoch_length: Self::DEFAULT_EPOCH,
            multipliers: Multipliers::defaults(vehicle_count),
            urgency_threshold: Self::DEFAULT_URGENCY,
        }
    }
}

/// The static world an episode runs on.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub name: String,
    pub factories: Vec<Factory>,
    pub travel: TravelModel,
    pub vehicles: Vec<Vehicle>,
    /// Sorted by release time; `orders[i].id == OrderId(i)`.
    pub orders: Vec<Order>,
    pub params: Params,
}

impl Instance {
    /// Assembles an instance, splitting oversized orders and re-indexing
    /// everything by release time.
    pub fn new(
        name: impl Into<String>,
        factories: Vec<Factory>,
        travel: TravelModel,
        vehicles: Vec<Vehicle>,
        orders: Vec<Order>,
        params: Params,
    ) -> Result<Self, ModelError> {
        let n = factories.len();
        if travel.size() != n {
            return Err(ModelError::schema(
                "travel",
                format!("matrix size {} does not match {} factories", travel.size(), n),
            ));
        }
        for (i, f) in factories.iter().enumerate() {
            if f.id.0 != i {
                return Err(ModelError::schema(format!("factories[{i}]"), "id out of sequence"));
            }
            if f.port_count == 0 {
                return Err(ModelError::schema(
                    format!("factories[{i}].ports"),
                    "at least one docking port is required",
                ));
            }
        }
        for (i, v) in vehicles.iter().enumerate() {
            if v.id.0 != i {
                return Err(ModelError::schema(format!("vehicles[{i}]"), "id out of sequence"));
            }
            if v.initial_factory.0 >= n {
                return Err(ModelError::schema(
                    format!("vehicles[{i}].initial_factory"),
                    "unknown factory",
                ));
            }
        }
        let m = &params.multipliers;
        if !(m.lambda1 > 0.0 && m.lambda2 > 0.0) {
            return Err(ModelError::schema("params", "lambda1 and lambda2 must be positive"));
        }
        if !(m.lambda3 >= 0.0 && m.lambda4 >= 0.0) {
            return Err(ModelError::schema("params", "lambda3 and lambda4 must be nonnegative"));
        }
        if params.capacity.is_zero() {
            return Err(ModelError::schema("params.capacity", "capacity must be positive"));
        }
        if params.epoch_length <= 0 {
            return Err(ModelError::schema("params.epoch_length", "epoch length must be positive"));
        }
        if params.dock_approach_time < 0 {
            return Err(ModelError::schema(
                "params.dock_approach_time",
                "dock approach time must be nonnegative",
            ));
        }

        let mut split = Vec::with_capacity(orders.len());
        for (i, o) in orders.into_iter().enumerate() {
            let path = format!("orders[{i}]");
            if o.pickup_factory.0 >= n {
                return Err(ModelError::schema(format!("{path}.pickup_factory"), "unknown factory"));
            }
            if o.delivery_factory.0 >= n {
                return Err(ModelError::schema(format!("{path}.delivery_factory"), "unknown factory"));
            }
            if o.release_time >= o.due_time {
                return Err(ModelError::schema(path, "release time must precede due time"));
            }
            if o.quantity.is_zero() {
                return Err(ModelError::schema(format!("{path}.quantity"), "quantity must be positive"));
            }
            if o.load_time < 0 || o.unload_time < 0 {
                return Err(ModelError::schema(path, "handling times must be nonnegative"));
            }
            split.extend(split_order(&o, params.capacity)?);
        }
        split.sort_by_key(|o| o.release_time);
        for (i, o) in split.iter_mut().enumerate() {
            o.id = OrderId(i);
        }

        Ok(Self {
            name: name.into(),
            factories,
            travel,
            vehicles,
            orders: split,
            params,
        })
    }

    #[inline]
    pub fn order(&self, id: OrderId) -> &Order {
        &self.orders[id.0]
    }

    #[inline]
    pub fn factory(&self, id: FactoryId) -> &Factory {
        &self.factories[id.0]
    }

    pub fn service_time(&self, deliveries: &[OrderId], pickups: &[OrderId]) -> Seconds {
        service_time(
            deliveries.iter().map(|&o| self.order(o)),
            pickups.iter().map(|&o| self.order(o)),
            self.params.dock_approach_time,
        )
    }
}

/// Per-term objective values and their weighted sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Total distance travelled.
    pub distance: f64,
    /// Total tardiness in seconds.
    pub tardiness_seconds: f64,
    /// Total time spent waiting for a docking port, in seconds.
    pub waiting_seconds: f64,
    /// Vehicles with no plan that are available before the next update.
    pub idle_vehicle_count: f64,
    pub weighted_total: f64,
}

impl CostBreakdown {
    pub fn new(
        distance: f64,
        tardiness_seconds: f64,
        waiting_seconds: f64,
        idle_vehicle_count: f64,
        m: &Multipliers,
    ) -> Self {
        Self {
            distance,
            tardiness_seconds,
            waiting_seconds,
            idle_vehicle_count,
            weighted_total: m.lambda1 * distance
                + m.lambda2 * tardiness_seconds
                + m.lambda3 * waiting_seconds
                + m.lambda4 * idle_vehicle_count,
        }
    }
}

/// Dock approach plus all unloading and loading durations at one stop.
pub fn service_time<'a>(
    deliveries: impl IntoIterator<Item = &'a Order>,
    pickups: impl IntoIterator<Item = &'a Order>,
    dock_approach_time: Seconds,
) -> Seconds {
    dock_approach_time
        + deliveries.into_iter().map(|o| o.unload_time).sum::<Seconds>()
        + pickups.into_iter().map(|o| o.load_time).sum::<Seconds>()
}

/// Slack left for `order` at time `now` after subtracting the quickest
/// possible service (dock, load, direct travel). Negative means late even
/// if dispatched immediately.
pub fn estimated_delay(
    order: &Order,
    now: Seconds,
    travel: &TravelModel,
    dock_approach_time: Seconds,
) -> Seconds {
    (order.due_time - now)
        - (dock_approach_time
            + order.load_time
            + travel.travel(order.pickup_factory, order.delivery_factory))
}

/// Splits an order whose quantity exceeds `capacity` into fragments by
/// first-fit over its items sorted by non-increasing size.
pub fn split_order(order: &Order, capacity: Quantity) -> Result<Vec<Order>, ModelError> {
    if order.quantity <= capacity {
        return Ok(vec![order.clone()]);
    }
    if order.items.is_empty() {
        return Err(ModelError::UnsplittableOrder {
            order: order.name.clone(),
            quantity: order.quantity,
            capacity,
        });
    }
    let mut items = order.items.clone();
    items.sort_by_key(|i| std::cmp::Reverse(i.size));

    let mut bins: Vec<(Quantity, Vec<Item>)> = Vec::new();
    for item in items {
        if item.size > capacity {
            return Err(ModelError::ItemTooLarge {
                order: order.name.clone(),
                size: item.size,
                capacity,
            });
        }
        match bins.iter_mut().find(|(load, _)| *load + item.size <= capacity) {
            Some((load, content)) => {
                *load = *load + item.size;
                content.push(item);
            }
            None => bins.push((item.size, vec![item])),
        }
    }

    Ok(bins
        .into_iter()
        .enumerate()
        .map(|(i, (load, content))| Order {
            id: order.id,
            name: format!("{}#{}", order.name, i + 1),
            pickup_factory: order.pickup_factory,
            delivery_factory: order.delivery_factory,
            release_time: order.release_time,
            due_time: order.due_time,
            quantity: load,
            load_time: content.iter().map(|it| it.load_time).sum(),
            unload_time: content.iter().map(|it| it.unload_time).sum(),
            parent: Some(order.name.clone()),
            items: content,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order_with_items(items: Vec<Item>) -> Order {
        let quantity = items.iter().map(|i| i.size).sum();
        Order {
            id: OrderId(0),
            name: "big".into(),
            pickup_factory: FactoryId(0),
            delivery_factory: FactoryId(1),
            release_time: 0,
            due_time: 14_400,
            quantity,
            load_time: items.iter().map(|i| i.load_time).sum(),
            unload_time: items.iter().map(|i| i.unload_time).sum(),
            parent: None,
            items,
        }
    }

    fn simple_order(load: Seconds, unload: Seconds) -> Order {
        Order {
            load_time: load,
            unload_time: unload,
            ..order_with_items(vec![ItemKind::Box.item()])
        }
    }

    #[test]
    fn service_time_examples() {
        let o = simple_order(60, 60);
        assert_eq!(service_time([], [&o, &o], 120), 240);
        assert_eq!(service_time([], [], 1800), 1800);
        let boxed = simple_order(15, 15);
        let std_pallet = simple_order(60, 60);
        let small = simple_order(30, 30);
        assert_eq!(service_time([&boxed, &std_pallet], [&small], 1800), 1905);
    }

    #[test]
    fn estimated_delay_examples() {
        let travel = TravelModel::uniform(2, 1.0, 3600);
        let mut o = simple_order(60, 60);
        o.due_time = 14_400;
        assert_eq!(estimated_delay(&o, 0, &travel, 1800), 8940);

        o.due_time = 1800 + 60 + 3600;
        assert_eq!(estimated_delay(&o, 0, &travel, 1800), 0);

        let travel = TravelModel::uniform(2, 1.0, 1200);
        o.load_time = 600;
        o.due_time = 3000;
        assert_eq!(estimated_delay(&o, 0, &travel, 1800), -600);
    }

    #[test]
    fn split_twenty_pallets() {
        let items = vec![ItemKind::StandardPallet.item(); 20];
        let parts = split_order(&order_with_items(items), Quantity::from_units(15)).unwrap();
        let q: Vec<_> = parts.iter().map(|p| p.quantity).collect();
        assert_eq!(q, vec![Quantity::from_units(15), Quantity::from_units(5)]);
        assert!(parts.iter().all(|p| p.parent.as_deref() == Some("big")));
        assert_eq!(parts[0].load_time, 15 * 60);
    }

    #[test]
    fn split_keeps_small_order() {
        let mut items = vec![ItemKind::StandardPallet.item(); 14];
        items.extend(vec![ItemKind::SmallPallet.item(); 1]);
        items.extend(vec![ItemKind::Box.item(); 1]);
        let order = order_with_items(items);
        assert_eq!(order.quantity, "14.75".parse().unwrap());
        let parts = split_order(&order, Quantity::from_units(15)).unwrap();
        assert_eq!(parts, vec![order]);
    }

    #[test]
    fn split_mixed_first_fit_trace() {
        let mut items = vec![ItemKind::SmallPallet.item(); 12];
        items.extend(vec![ItemKind::StandardPallet.item(); 10]);
        let parts = split_order(&order_with_items(items), Quantity::from_units(15)).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].quantity, Quantity::from_units(15));
        assert_eq!(parts[0].items.iter().filter(|i| i.size == Quantity::from_units(1)).count(), 10);
        assert_eq!(parts[1].quantity, Quantity::from_units(1));
        assert_eq!(parts[1].items.len(), 2);
    }

    #[test]
    fn split_rejects_oversized_item() {
        let items = vec![Item::new(Quantity::from_units(16), 60), ItemKind::Box.item()];
        let err = split_order(&order_with_items(items), Quantity::from_units(15)).unwrap_err();
        assert!(matches!(err, ModelError::ItemTooLarge { .. }));
    }
}
