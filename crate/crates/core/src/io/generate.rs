//! Synthetic instances: factories scattered uniformly over a square,
//! straight-line distances, constant speed.

use crate::model::schema::{FactoryDoc, InstanceDoc, ItemDoc, OrderDoc, ParamsDoc, TravelDoc, VehicleDoc};
use crate::model::{Instance, ItemKind, ModelError, Seconds};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Every order must be delivered within this many seconds of release.
pub const ORDER_WINDOW: Seconds = 14_400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReleaseModel {
    Uniform,
    /// Orders cluster around `bursts` random instants, each spread
    /// uniformly over `spread` seconds.
    Bursty { bursts: usize, spread: Seconds },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub name: String,
    pub factory_count: usize,
    pub port_count: usize,
    pub vehicle_count: usize,
    pub order_count: usize,
    /// Orders released at time zero; the rest follow `releases`.
    #[serde(default)]
    pub initial_orders: usize,
    pub horizon: Seconds,
    pub area_km: f64,
    pub speed_kmh: f64,
    pub releases: ReleaseModel,
    /// Relative weights of box, small pallet and standard pallet.
    pub item_mix: [f64; 3],
    pub max_items: u32,
    /// When set, pickups are drawn from the first `n` factories only.
    #[serde(default)]
    pub pickup_factories: Option<usize>,
    #[serde(default)]
    pub params: ParamsDoc,
    pub seed: u64,
}

/// Order and vehicle counts of the eight benchmark groups.
pub const GROUP_SIZES: [(usize, usize); 8] = [
    (50, 5),
    (100, 5),
    (300, 20),
    (500, 20),
    (1000, 50),
    (2000, 50),
    (3000, 100),
    (4000, 100),
];

impl GeneratorSpec {
    /// Benchmark-shaped instance for group `g` in `1..=8`.
    pub fn group(g: usize, seed: u64) -> Option<Self> {
        let &(orders, vehicles) = GROUP_SIZES.get(g.checked_sub(1)?)?;
        Some(Self {
            name: format!("group{g}-s{seed}"),
            factory_count: 153,
            port_count: 6,
            vehicle_count: vehicles,
            order_count: orders,
            initial_orders: 0,
            horizon: 86_400,
            area_km: 60.0,
            speed_kmh: 40.0,
            releases: ReleaseModel::Uniform,
            item_mix: [0.5, 0.3, 0.2],
            max_items: 12,
            pickup_factories: None,
            params: ParamsDoc::default(),
            seed,
        })
    }

    /// Few single-port factories share most pickups among many vehicles.
    pub fn congested(seed: u64) -> Self {
        Self {
            name: format!("congested-s{seed}"),
            factory_count: 8,
            port_count: 1,
            vehicle_count: 10,
            order_count: 40,
            initial_orders: 10,
            horizon: 4 * 3600,
            area_km: 20.0,
            speed_kmh: 40.0,
            releases: ReleaseModel::Bursty { bursts: 3, spread: 1200 },
            item_mix: [0.5, 0.3, 0.2],
            max_items: 8,
            pickup_factories: Some(3),
            params: ParamsDoc::default(),
            seed,
        }
    }

    /// One initial order per vehicle, all picked up at a few factories,
    /// then a steady stream.
    pub fn sparse(seed: u64) -> Self {
        Self {
            name: format!("sparse-s{seed}"),
            factory_count: 20,
            port_count: 6,
            vehicle_count: 10,
            order_count: 60,
            initial_orders: 10,
            horizon: 4 * 3600,
            area_km: 60.0,
            speed_kmh: 40.0,
            releases: ReleaseModel::Uniform,
            item_mix: [0.5, 0.3, 0.2],
            max_items: 12,
            pickup_factories: Some(3),
            params: ParamsDoc::default(),
            seed,
        }
    }

    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "congested" => Some(Self::congested(seed)),
            "sparse" => Some(Self::sparse(seed)),
            _ => {
                let g = name.strip_prefix("group")?.parse().ok()?;
                Self::group(g, seed)
            }
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |field: &str, msg: &str| Err(ModelError::schema(format!("spec.{field}"), msg));
        if self.factory_count < 2 {
            return bad("factory_count", "at least two factories are required");
        }
        if self.port_count == 0 {
            return bad("port_count", "at least one port is required");
        }
        if self.vehicle_count == 0 {
            return bad("vehicle_count", "at least one vehicle is required");
        }
        if self.horizon <= 0 {
            return bad("horizon", "must be positive");
        }
        if self.initial_orders > self.order_count {
            return bad("initial_orders", "exceeds order_count");
        }
        if !(self.area_km > 0.0 && self.speed_kmh > 0.0) {
            return bad("area_km", "area and speed must be positive");
        }
        if self.max_items == 0 {
            return bad("max_items", "must be positive");
        }
        if WeightedIndex::new(self.item_mix).is_err() {
            return bad("item_mix", "weights must be nonnegative with a positive sum");
        }
        if let ReleaseModel::Bursty { bursts, spread } = self.releases {
            if bursts == 0 || spread < 0 {
                return bad("releases", "need at least one burst and a nonnegative spread");
            }
        }
        if self.pickup_factories.is_some_and(|n| n == 0 || n > self.factory_count) {
            return bad("pickup_factories", "out of range");
        }
        Ok(())
    }

    /// Deterministic in the spec.
    pub fn document(&self) -> Result<InstanceDoc, ModelError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.factory_count;
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen::<f64>() * self.area_km, rng.gen::<f64>() * self.area_km))
            .collect();
        let mut distance = vec![vec![0.0; n]; n];
        let mut time = vec![vec![0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let d = (points[i].0 - points[j].0).hypot(points[i].1 - points[j].1);
                    // kilometres to the metre
                    distance[i][j] = (d * 1000.0).round() / 1000.0;
                    time[i][j] = (d / self.speed_kmh * 3600.0).round() as Seconds;
                }
            }
        }
        let fid = |i: usize| format!("f{i}");

        let vehicles = (0..self.vehicle_count)
            .map(|i| VehicleDoc {
                id: format!("v{i}"),
                initial_factory: fid(rng.gen_range(0..n)),
            })
            .collect();

        let centers: Vec<Seconds> = match self.releases {
            ReleaseModel::Uniform => Vec::new(),
            ReleaseModel::Bursty { bursts, .. } => (0..bursts).map(|_| rng.gen_range(0..self.horizon)).collect(),
        };
        let mix = WeightedIndex::new(self.item_mix).expect("validated");
        let pickup_pool = self.pickup_factories.unwrap_or(n);
        let mut orders = Vec::with_capacity(self.order_count);
        for i in 0..self.order_count {
            let release = if i < self.initial_orders {
                0
            } else {
                match self.releases {
                    ReleaseModel::Uniform => rng.gen_range(0..self.horizon),
                    ReleaseModel::Bursty { spread, .. } => {
                        let c = centers[rng.gen_range(0..centers.len())];
                        (c + rng.gen_range(0..=spread)).min(self.horizon - 1)
                    }
                }
            };
            let pickup = rng.gen_range(0..pickup_pool);
            let mut delivery = rng.gen_range(0..n - 1);
            if delivery >= pickup {
                delivery += 1;
            }
            let mut counts = [0u32; 3];
            for _ in 0..rng.gen_range(1..=self.max_items) {
                counts[mix.sample(&mut rng)] += 1;
            }
            let items = ItemKind::ALL
                .iter()
                .zip(counts)
                .filter(|&(_, c)| c > 0)
                .map(|(&kind, count)| ItemDoc { kind, count })
                .collect();
            orders.push(OrderDoc {
                id: format!("o{i}"),
                pickup_factory: fid(pickup),
                delivery_factory: fid(delivery),
                release_time: release,
                due_time: release + ORDER_WINDOW,
                items,
                quantity: None,
                load_time: None,
                unload_time: None,
            });
        }

        Ok(InstanceDoc {
            name: Some(self.name.clone()),
            factories: (0..n)
                .map(|i| FactoryDoc {
                    id: fid(i),
                    ports: self.port_count,
                })
                .collect(),
            travel: TravelDoc { distance, time },
            vehicles,
            orders,
            params: self.params.clone(),
        })
    }

    pub fn generate(&self) -> Result<Instance, ModelError> {
        self.document()?.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_one_counts() {
        let spec = GeneratorSpec::group(1, 3).unwrap();
        let doc = spec.document().unwrap();
        assert_eq!((doc.orders.len(), doc.vehicles.len()), (50, 5));
        let inst = doc.build().unwrap();
        assert!(inst.orders.len() >= 50);
        assert!(inst.orders.iter().all(|o| o.due_time - o.release_time == ORDER_WINDOW));
        assert!(GeneratorSpec::group(9, 0).is_none());
        assert!(GeneratorSpec::group(0, 0).is_none());
    }

    #[test]
    fn same_seed_same_instance() {
        for name in ["group2", "congested", "sparse"] {
            let a = GeneratorSpec::preset(name, 11).unwrap().document().unwrap();
            let b = GeneratorSpec::preset(name, 11).unwrap().document().unwrap();
            assert_eq!(a, b);
            let c = GeneratorSpec::preset(name, 12).unwrap().document().unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn congested_shape() {
        let spec = GeneratorSpec::congested(0);
        let inst = spec.generate().unwrap();
        assert!(inst.factories.iter().all(|f| f.port_count == 1));
        assert_eq!(inst.vehicles.len(), 10);
        assert!(inst.orders.iter().all(|o| o.pickup_factory.0 < 3));
        assert!(inst.orders.iter().filter(|o| o.release_time == 0).count() >= 10);
    }

    #[test]
    fn handling_times_follow_items() {
        let doc = GeneratorSpec::sparse(5).document().unwrap();
        let inst = doc.build().unwrap();
        for o in inst.orders.iter().filter(|o| o.parent.is_none()) {
            let load: Seconds = o.items.iter().map(|i| i.load_time).sum();
            assert_eq!(o.load_time, load);
            assert!(o.items.iter().all(|i| [15, 30, 60].contains(&i.load_time)));
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = GeneratorSpec::sparse(0);
        s.item_mix = [0.0; 3];
        assert!(s.document().is_err());
        let mut s = GeneratorSpec::sparse(0);
        s.initial_orders = 100;
        assert!(s.document().is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = GeneratorSpec::congested(4);
        let text = serde_json::to_string(&s).unwrap();
        let back: GeneratorSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
