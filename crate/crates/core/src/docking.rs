//! First-come-first-served docking queue of a single factory.
//!
//! The list holds every vehicle currently at the factory (in service or
//! waiting for a port) keyed by its earliest departure time. A newcomer
//! starts service once enough earlier departures have freed a port.

use crate::model::{Seconds, VehicleId};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DockingError {
    #[error("arrival at {arrival} precedes the last processed event at {clock}")]
    NonMonotoneClock { arrival: Seconds, clock: Seconds },
    #[error("vehicle {0} is not in the reservation list")]
    VehicleAbsent(VehicleId),
}

/// Outcome of one arrival.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Admission {
    pub waiting: Seconds,
    pub departure: Seconds,
}

#[derive(Clone, Debug)]
pub struct ReservationList {
    port_count: usize,
    /// Sorted by (departure, vehicle).
    entries: Vec<(Seconds, VehicleId)>,
    clock: Seconds,
}

impl ReservationList {
    pub fn new(port_count: usize) -> Self {
        assert!(port_count >= 1, "a factory needs at least one docking port");
        Self {
            port_count,
            entries: Vec::new(),
            clock: Seconds::MIN,
        }
    }

    pub fn port_count(&self) -> usize {
        self.port_count
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Seconds, VehicleId)] {
        &self.entries
    }

    fn insert(&mut self, departure: Seconds, vehicle: VehicleId) {
        let at = self.entries.partition_point(|&e| e < (departure, vehicle));
        self.entries.insert(at, (departure, vehicle));
    }

    /// Registers a vehicle that is already docked (or queued) with a known
    /// earliest departure, without moving the clock.
    pub fn occupy(&mut self, vehicle: VehicleId, departure: Seconds) {
        self.insert(departure, vehicle);
    }

    /// Admits a vehicle arriving at `arrival` that needs `service` seconds
    /// at a port.
    pub fn enqueue(
        &mut self,
        vehicle: VehicleId,
        arrival: Seconds,
        service: Seconds,
    ) -> Result<Admission, DockingError> {
        if arrival < self.clock {
            return Err(DockingError::NonMonotoneClock {
                arrival,
                clock: self.clock,
            });
        }
        self.clock = arrival;
        let k = self.entries.len();
        let start = if k < self.port_count {
            arrival
        } else {
            arrival.max(self.entries[k - self.port_count].0)
        };
        let departure = start + service;
        self.insert(departure, vehicle);
        Ok(Admission {
            waiting: start - arrival,
            departure,
        })
    }

    pub fn release(&mut self, vehicle: VehicleId) -> Result<(), DockingError> {
        let at = self
            .entries
            .iter()
            .position(|&(_, v)| v == vehicle)
            .ok_or(DockingError::VehicleAbsent(vehicle))?;
        self.entries.remove(at);
        Ok(())
    }

    /// Removes a vehicle if present.
    pub fn release_if_present(&mut self, vehicle: VehicleId) -> bool {
        self.release(vehicle).is_ok()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force port simulator stepping one second at a time. Arrivals
    /// are served in (arrival, vehicle) order by whichever port is free.
    pub(crate) fn stepped_departures(ports: usize, arrivals: &[(Seconds, Seconds)]) -> Vec<Seconds> {
        let mut order: Vec<usize> = (0..arrivals.len()).collect();
        order.sort_by_key(|&i| (arrivals[i].0, i));
        let mut busy_until = vec![Seconds::MIN; ports];
        let mut departures = vec![0; arrivals.len()];
        let mut queue = order.into_iter().peekable();
        let mut t = 0;
        while queue.peek().is_some() {
            while let Some(&i) = queue.peek() {
                if arrivals[i].0 > t {
                    break;
                }
                let Some(port) = busy_until.iter().position(|&b| b <= t) else {
                    break;
                };
                busy_until[port] = t + arrivals[i].1;
                departures[i] = busy_until[port];
                queue.next();
            }
            t += 1;
        }
        departures
    }

    /// Drives the reservation list the way the event simulation does:
    /// releases due at or before an arrival are processed first.
    pub(crate) fn list_departures(ports: usize, arrivals: &[(Seconds, Seconds)]) -> Vec<Seconds> {
        let mut order: Vec<usize> = (0..arrivals.len()).collect();
        order.sort_by_key(|&i| (arrivals[i].0, i));
        let mut list = ReservationList::new(ports);
        let mut departures = vec![0; arrivals.len()];
        for i in order {
            let (t, s) = arrivals[i];
            let due: Vec<VehicleId> = list
                .entries()
                .iter()
                .filter(|&&(d, _)| d <= t)
                .map(|&(_, v)| v)
                .collect();
            for v in due {
                list.release(v).unwrap();
            }
            departures[i] = list.enqueue(VehicleId(i), t, s).unwrap().departure;
        }
        departures
    }

    #[test]
    fn empty_list_serves_immediately() {
        let mut l = ReservationList::new(6);
        assert_eq!(
            l.enqueue(VehicleId(0), 21, 4).unwrap(),
            Admission { waiting: 0, departure: 25 }
        );
        let mut l = ReservationList::new(1);
        assert_eq!(l.enqueue(VehicleId(0), 100, 1800).unwrap().departure, 1900);
    }

    #[test]
    fn two_port_handoff() {
        let arrivals = [(0, 4), (1, 4), (2, 4), (3, 4)];
        assert_eq!(list_departures(2, &arrivals), vec![4, 5, 8, 9]);
        assert_eq!(stepped_departures(2, &arrivals), vec![4, 5, 8, 9]);
    }

    #[test]
    fn third_arrival_waits_for_first_port() {
        let mut l = ReservationList::new(2);
        l.enqueue(VehicleId(1), 0, 10).unwrap();
        l.enqueue(VehicleId(2), 1, 5).unwrap();
        let a = l.enqueue(VehicleId(3), 2, 3).unwrap();
        assert_eq!(a, Admission { waiting: 4, departure: 9 });
        let b = l.enqueue(VehicleId(4), 3, 3).unwrap();
        assert_eq!(b, Admission { waiting: 6, departure: 12 });
    }

    #[test]
    fn release_keeps_order() {
        let mut l = ReservationList::new(3);
        l.occupy(VehicleId(0), 10);
        l.occupy(VehicleId(1), 20);
        l.occupy(VehicleId(2), 30);
        l.release(VehicleId(1)).unwrap();
        assert_eq!(l.entries(), &[(10, VehicleId(0)), (30, VehicleId(2))]);
        l.release(VehicleId(0)).unwrap();
        l.release(VehicleId(2)).unwrap();
        assert!(l.is_empty());
        assert_eq!(l.release(VehicleId(2)), Err(DockingError::VehicleAbsent(VehicleId(2))));
    }

    #[test]
    fn release_then_enqueue_at_same_instant() {
        let mut l = ReservationList::new(1);
        l.enqueue(VehicleId(0), 0, 5).unwrap();
        l.release(VehicleId(0)).unwrap();
        assert_eq!(l.enqueue(VehicleId(1), 5, 2).unwrap(), Admission { waiting: 0, departure: 7 });
    }

    #[test]
    fn clock_must_not_go_back() {
        let mut l = ReservationList::new(1);
        l.enqueue(VehicleId(0), 10, 5).unwrap();
        assert!(matches!(
            l.enqueue(VehicleId(1), 9, 5),
            Err(DockingError::NonMonotoneClock { .. })
        ));
    }

    proptest! {
        #[test]
        fn matches_stepped_simulator(
            ports in 1usize..=3,
            arrivals in prop::collection::vec((0i64..40, 1i64..12), 1..=8),
        ) {
            prop_assert_eq!(list_departures(ports, &arrivals), stepped_departures(ports, &arrivals));
        }

        #[test]
        fn never_more_than_c_in_service(
            ports in 1usize..=3,
            arrivals in prop::collection::vec((0i64..40, 1i64..12), 1..=8),
        ) {
            let dep = list_departures(ports, &arrivals);
            let starts: Vec<_> = dep.iter().zip(&arrivals).map(|(d, (_, s))| d - s).collect();
            for t in 0..100 {
                let busy = starts.iter().zip(&dep).filter(|(&s, &d)| s <= t && t < d).count();
                prop_assert!(busy <= ports);
            }
            for (i, &(a, _)) in arrivals.iter().enumerate() {
                prop_assert!(starts[i] >= a);
                let present = (0..arrivals.len())
                    .filter(|&j| (arrivals[j].0, j) < (a, i) && dep[j] > a)
                    .count();
                if present < ports {
                    prop_assert_eq!(starts[i], a);
                }
            }
            let mut by_arrival: Vec<usize> = (0..arrivals.len()).collect();
            by_arrival.sort_by_key(|&i| (arrivals[i].0, i));
            prop_assert!(by_arrival.windows(2).all(|w| starts[w[0]] <= starts[w[1]]));
        }
    }
}
