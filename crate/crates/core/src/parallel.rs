//! Order-preserving map over a slice, parallel when the `parallel` feature is
//! enabled and more than one worker is requested.

use crate::error::Result;
#[cfg(feature = "parallel")]
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Work-stealing pool with this many threads.
    Parallel(usize),
}

impl Execution {
    pub fn from_workers(workers: usize) -> Self {
        if workers > 1 {
            Execution::Parallel(workers)
        } else {
            Execution::Sequential
        }
    }

    /// Whether this build can actually run in parallel.
    pub fn available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Applies `f` to every item; results come back in input order whatever the
/// execution mode.
pub fn map_ordered<T, R, F>(items: &[T], execution: Execution, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match execution {
        Execution::Sequential => Ok(items.iter().map(f).collect()),
        #[cfg(feature = "parallel")]
        Execution::Parallel(workers) => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::ThreadPool(e.to_string()))?;
            Ok(pool.install(|| items.par_iter().map(f).collect()))
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel(_) => Ok(items.iter().map(f).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map_ordered(&items, Execution::Sequential, |x| x * x).unwrap();
        let par = map_ordered(&items, Execution::Parallel(4), |x| x * x).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq[999], 998_001);
        assert_eq!(Execution::from_workers(1), Execution::Sequential);
    }
}
