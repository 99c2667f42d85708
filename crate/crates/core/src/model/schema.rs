//! Canonical JSON instance format.
//!
//! ```json
//! {
//!   "name": "example",
//!   "factories": [{ "id": "f0", "ports": 6 }, { "id": "f1", "ports": 6 }],
//!   "travel": {
//!     "distance": [[0.0, 12.5], [12.5, 0.0]],
//!     "time": [[0, 900], [900, 0]]
//!   },
//!   "vehicles": [{ "id": "v0", "initial_factory": "f0" }],
//!   "orders": [{
//!     "id": "o1", "pickup_factory": "f0", "delivery_factory": "f1",
//!     "release_time": 0, "due_time": 14400,
//!     "items": [{ "kind": "standard_pallet", "count": 3 }]
//!   }],
//!   "params": { "capacity": "15", "dock_approach_time": 1800, "epoch_length": 600 }
//! }
//! ```
//!
//! Matrices are row-major in factory order. An order gives either `items`
//! (quantity and handling times are derived) or explicit `quantity`,
//! `load_time` and `unload_time`. Every `params` key is optional.

use super::{
    Factory, FactoryId, Instance, Item, ItemKind, ModelError, Multipliers, Order, OrderId, Params,
    Quantity, Seconds, TravelModel, Vehicle, VehicleId,
};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub factories: Vec<FactoryDoc>,
    pub travel: TravelDoc,
    pub vehicles: Vec<VehicleDoc>,
    pub orders: Vec<OrderDoc>,
    #[serde(default)]
    pub params: ParamsDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactoryDoc {
    pub id: String,
    pub ports: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TravelDoc {
    pub distance: Vec<Vec<f64>>,
    pub time: Vec<Vec<Seconds>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleDoc {
    pub id: String,
    pub initial_factory: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemDoc {
    pub kind: ItemKind,
    pub count: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderDoc {
    pub id: String,
    pub pickup_factory: String,
    pub delivery_factory: String,
    pub release_time: Seconds,
    pub due_time: Seconds,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<ItemDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_time: Option<Seconds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unload_time: Option<Seconds>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dock_approach_time: Option<Seconds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_length: Option<Seconds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda4: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub urgency_threshold: Option<Seconds>,
}

impl ParamsDoc {
    pub fn resolve(&self, vehicle_count: usize) -> Params {
        let d = Params::defaults(vehicle_count);
        let m = d.multipliers;
        Params {
            capacity: self.capacity.unwrap_or(d.capacity),
            dock_approach_time: self.dock_approach_time.unwrap_or(d.dock_approach_time),
            epoch_length: self.epoch_length.unwrap_or(d.epoch_length),
            multipliers: Multipliers {
                lambda1: self.lambda1.unwrap_or(m.lambda1),
                lambda2: self.lambda2.unwrap_or(m.lambda2),
                lambda3: self.lambda3.unwrap_or(m.lambda3),
                lambda4: self.lambda4.unwrap_or(m.lambda4),
            },
            urgency_threshold: self.urgency_threshold.unwrap_or(d.urgency_threshold),
        }
    }
}

/// Hook for foreign on-disk formats (for example a competition dump).
pub trait InstanceAdapter {
    fn to_doc(&self, path: &Path) -> Result<InstanceDoc, ModelError>;
}

impl InstanceDoc {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| {
            ModelError::schema(format!("line {} column {}", e.line(), e.column()), e.to_string())
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance documents always serialize")
    }

    /// Validates the document and builds the instance (splitting oversized
    /// orders).
    pub fn build(&self) -> Result<Instance, ModelError> {
        let mut factory_index = HashMap::new();
        let factories = self
            .factories
            .iter()
            .enumerate()
            .map(|(i, f)| {
                if factory_index.insert(f.id.clone(), FactoryId(i)).is_some() {
                    return Err(ModelError::schema(format!("factories[{i}].id"), "duplicate id"));
                }
                Ok(Factory {
                    id: FactoryId(i),
                    name: f.id.clone(),
                    port_count: f.ports,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let n = factories.len();
        let lookup = |path: String, id: &str| {
            factory_index
                .get(id)
                .copied()
                .ok_or_else(|| ModelError::schema(path, format!("unknown factory {id:?}")))
        };

        let travel = self.travel_model(n)?;

        let vehicles = self
            .vehicles
            .iter()
            .enumerate()
            .map(|(i, v)| {
                Ok(Vehicle {
                    id: VehicleId(i),
                    name: v.id.clone(),
                    initial_factory: lookup(format!("vehicles[{i}].initial_factory"), &v.initial_factory)?,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;

        let mut seen = HashMap::new();
        let mut orders = Vec::with_capacity(self.orders.len());
        for (i, o) in self.orders.iter().enumerate() {
            let path = format!("orders[{i}]");
            if seen.insert(o.id.clone(), i).is_some() {
                return Err(ModelError::schema(format!("{path}.id"), "duplicate id"));
            }
            let items: Vec<Item> = o
                .items
                .iter()
                .flat_map(|it| std::iter::repeat_n(it.kind.item(), it.count as usize))
                .collect();
            let (quantity, load_time, unload_time) = if items.is_empty() {
                match (o.quantity, o.load_time, o.unload_time) {
                    (Some(q), Some(l), Some(u)) => (q, l, u),
                    _ => {
                        return Err(ModelError::schema(
                            path,
                            "either items or quantity, load_time and unload_time are required",
                        ))
                    }
                }
            } else {
                if o.quantity.is_some() || o.load_time.is_some() || o.unload_time.is_some() {
                    return Err(ModelError::schema(
                        path,
                        "items and explicit quantity/handling times are mutually exclusive",
                    ));
                }
                (
                    items.iter().map(|it| it.size).sum(),
                    items.iter().map(|it| it.load_time).sum(),
                    items.iter().map(|it| it.unload_time).sum(),
                )
            };
            orders.push(Order {
                id: OrderId(i),
                name: o.id.clone(),
                pickup_factory: lookup(format!("{path}.pickup_factory"), &o.pickup_factory)?,
                delivery_factory: lookup(format!("{path}.delivery_factory"), &o.delivery_factory)?,
                release_time: o.release_time,
                due_time: o.due_time,
                quantity,
                load_time,
                unload_time,
                parent: None,
                items,
            });
        }

        Instance::new(
            self.name.clone().unwrap_or_else(|| "instance".into()),
            factories,
            travel,
            vehicles,
            orders,
            self.params.resolve(self.vehicles.len()),
        )
    }

    fn travel_model(&self, n: usize) -> Result<TravelModel, ModelError> {
        fn flatten<T: Copy>(rows: &[Vec<T>], n: usize, name: &str) -> Result<Vec<T>, ModelError> {
            if rows.len() != n {
                return Err(ModelError::schema(
                    format!("travel.{name}"),
                    format!("expected {n} rows, found {}", rows.len()),
                ));
            }
            let mut flat = Vec::with_capacity(n * n);
            for (r, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(ModelError::schema(
                        format!("travel.{name}[{r}]"),
                        format!("expected {n} entries, found {}", row.len()),
                    ));
                }
                flat.extend_from_slice(row);
            }
            Ok(flat)
        }
        TravelModel::new(
            n,
            flatten(&self.travel.distance, n, "distance")?,
            flatten(&self.travel.time, n, "time")?,
        )
    }
}

/// Reads and validates a canonical instance file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::schema(path.display().to_string(), e.to_string()))?;
    InstanceDoc::from_json(&text)
        .and_then(|doc| doc.build())
        .map_err(|e| match e {
            ModelError::Schema { path: p, message } => ModelError::Schema {
                path: format!("{}: {p}", path.display()),
                message,
            },
            other => other,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal() -> InstanceDoc {
        InstanceDoc {
            name: Some("minimal".into()),
            factories: vec![
                FactoryDoc { id: "a".into(), ports: 1 },
                FactoryDoc { id: "b".into(), ports: 2 },
            ],
            travel: TravelDoc {
                distance: vec![vec![0.0, 10.0], vec![10.0, 0.0]],
                time: vec![vec![0, 600], vec![600, 0]],
            },
            vehicles: vec![VehicleDoc { id: "v".into(), initial_factory: "a".into() }],
            orders: vec![OrderDoc {
                id: "o1".into(),
                pickup_factory: "a".into(),
                delivery_factory: "b".into(),
                release_time: 0,
                due_time: 14_400,
                items: vec![ItemDoc { kind: ItemKind::Box, count: 2 }],
                quantity: None,
                load_time: None,
                unload_time: None,
            }],
            params: ParamsDoc::default(),
        }
    }

    #[test]
    fn minimal_fixture_builds() {
        let inst = minimal().build().unwrap();
        assert_eq!(inst.orders.len(), 1);
        assert_eq!(inst.orders[0].quantity, "0.5".parse().unwrap());
        assert_eq!(inst.orders[0].load_time, 30);
        assert_eq!(inst.params.multipliers.lambda1, 1.0);
        assert_eq!(inst.params.capacity, Quantity::from_units(15));
    }

    #[test]
    fn oversized_order_is_split_on_load() {
        let mut doc = minimal();
        doc.orders[0].items = vec![ItemDoc { kind: ItemKind::StandardPallet, count: 20 }];
        let inst = doc.build().unwrap();
        assert_eq!(inst.orders.len(), 2);
        assert_eq!(inst.orders[0].parent.as_deref(), Some("o1"));
    }

    #[test]
    fn malformed_row_is_named() {
        let mut doc = minimal();
        doc.travel.time[1] = vec![600];
        let err = doc.build().unwrap_err().to_string();
        assert!(err.contains("travel.time[1]"), "{err}");
    }

    #[test]
    fn unknown_factory_is_named() {
        let mut doc = minimal();
        doc.orders[0].delivery_factory = "zz".into();
        let err = doc.build().unwrap_err().to_string();
        assert!(err.contains("orders[0].delivery_factory"), "{err}");
    }

    #[test]
    fn json_roundtrip() {
        let doc = minimal();
        let back = InstanceDoc::from_json(&doc.to_json_pretty()).unwrap();
        assert_eq!(back, doc);
        assert!(doc.to_json_pretty().contains("\"ports\": 1"));
    }
}
