//! Trial-level execution policy.
//!
//! Without the `parallel` feature both policies run sequentially. Results are
//! always returned in trial order, so the two policies agree exactly.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `f(0), …, f(n−1)` in order.
pub fn map_trials<T, F>(exec: Execution, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// The lowest trial index for which `f` returns `Some`.
pub fn find_first<T, F>(exec: Execution, n: u64, f: F) -> Option<(u64, T)>
where
    T: Send,
    F: Fn(u64) -> Option<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().filter_map(|i| f(i).map(|t| (i, t))).find_first(|_| true);
    }
    let _ = exec;
    (0..n).find_map(|i| f(i).map(|t| (i, t)))
}
