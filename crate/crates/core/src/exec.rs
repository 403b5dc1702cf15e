//! Data-parallel helpers with a sequential fallback.
//!
//! Every hot loop in the crate (configuration enumeration, propagation
//! scoring, per-file parsing) goes through these helpers, so the same code
//! path runs on rayon when the `parallel` feature is enabled and on a plain
//! iterator otherwise. Results are always returned in input order.

use std::ops::Range;

/// How a data-parallel loop is executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Execution {
    /// Use the rayon thread pool (falls back to sequential without the
    /// `parallel` feature).
    Parallel,
    Sequential,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// True when this mode will actually fan out onto worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

pub(crate) fn map<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

pub(crate) fn filter_range<F>(exec: Execution, range: Range<u64>, pred: F) -> Vec<u64>
where
    F: Fn(u64) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return range.into_par_iter().filter(|&i| pred(i)).collect();
    }
    let _ = exec;
    range.filter(|&i| pred(i)).collect()
}

pub(crate) fn count_range<F>(exec: Execution, range: Range<u64>, pred: F) -> u64
where
    F: Fn(u64) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return range.into_par_iter().filter(|&i| pred(i)).count() as u64;
    }
    let _ = exec;
    range.filter(|&i| pred(i)).count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let items: Vec<u32> = (0..1000).collect();
        let a = map(Execution::Parallel, &items, |x| x * 3);
        let b = map(Execution::Sequential, &items, |x| x * 3);
        assert_eq!(a, b);
        let fa = filter_range(Execution::Parallel, 0..5000, |i| i % 7 == 3);
        let fb = filter_range(Execution::Sequential, 0..5000, |i| i % 7 == 3);
        assert_eq!(fa, fb);
        assert_eq!(
            count_range(Execution::Parallel, 0..5000, |i| i % 7 == 3),
            fa.len() as u64
        );
    }
}
