//! Execution policy for the embarrassingly parallel loops in this crate
//! (seeded trials, candidate searches, batches of simulations).
//!
//! With the `parallel` feature the [`Exec::Parallel`] policy runs on the
//! rayon pool; without it every policy runs sequentially. Results are always
//! returned in index order so reports do not depend on scheduling.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this policy actually fans out to threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Evaluates `f(i)` for every `i` in `0..n` and returns the results in order.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Returns the smallest index `i < n` whose evaluation yields `Some`, with its value.
///
/// The parallel variant evaluates candidates concurrently but still reports the
/// lowest successful index, so the answer matches the sequential scan.
pub fn find_first<T, F>(exec: Exec, n: usize, f: F) -> Option<(usize, T)>
where
    T: Send,
    F: Fn(usize) -> Option<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .filter_map(|i| f(i).map(|v| (i, v)))
            .min_by_key(|(i, _)| *i);
    }
    let _ = exec;
    (0..n).find_map(|i| f(i).map(|v| (i, v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let a = map_indexed(Exec::Sequential, 100, |i| i * i);
        let b = map_indexed(Exec::Parallel, 100, |i| i * i);
        assert_eq!(a, b);
        let f = |i: usize| if i % 7 == 3 { Some(i) } else { None };
        assert_eq!(find_first(Exec::Sequential, 50, f), Some((3, 3)));
        assert_eq!(find_first(Exec::Parallel, 50, f), Some((3, 3)));
        assert_eq!(find_first(Exec::Parallel, 3, f), None);
    }
}
