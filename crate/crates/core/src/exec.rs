//! Serial / data-parallel execution switch.
//!
//! Results are always collected in input order, so a parallel run is
//! bit-identical to a serial one as long as the per-item closure is pure.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this build can actually fan out work.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect();
        }
        items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
    }
}
