//! Data-parallel helpers with a sequential twin. Results never depend on
//! the mode: reductions break ties by input position.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    Sequential,
    /// Uses rayon when the `parallel` feature is on, otherwise sequential.
    #[default]
    Parallel,
}

impl ExecMode {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

fn better(a: (usize, f64), b: (usize, f64)) -> (usize, f64) {
    match a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)) {
        Ordering::Greater => b,
        _ => a,
    }
}

/// Position and value of the smallest `Some` cost; lowest position wins ties.
pub fn argmin_by<T, F>(items: &[T], mode: ExecMode, cost: F) -> Option<(usize, f64)>
where
    T: Sync,
    F: Fn(&T) -> Option<f64> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return items
            .par_iter()
            .enumerate()
            .filter_map(|(i, x)| cost(x).map(|c| (i, c)))
            .reduce_with(better);
    }
    let _ = mode;
    items
        .iter()
        .enumerate()
        .filter_map(|(i, x)| cost(x).map(|c| (i, c)))
        .reduce(better)
}

/// Order-preserving map.
pub fn map<T, R, F>(items: &[T], mode: ExecMode, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}
