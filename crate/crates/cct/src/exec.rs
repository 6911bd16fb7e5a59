//! Execution strategy for data-parallel loops.
//!
//! Every parallel loop in this crate maps independent work items to a `Vec`
//! in item order and reduces sequentially afterwards, so the sequential and
//! rayon paths produce bit-identical results.

/// How data-parallel loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    /// Plain sequential iteration. Always available; used as the reference
    /// path in benchmarks and determinism tests.
    Sequential,
    /// Rayon work-stealing iteration.
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Parallelism {
    /// The default strategy for this build: parallel when the `parallel`
    /// feature is enabled, sequential otherwise.
    pub fn auto() -> Self {
        #[cfg(feature = "parallel")]
        {
            Parallelism::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Parallelism::Sequential
        }
    }
}

impl Default for Parallelism {
    fn default() -> Self {
        Parallelism::auto()
    }
}

/// Maps `f` over `0..n`, returning results in index order.
pub(crate) fn map_indexed<R, F>(par: Parallelism, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match par {
        Parallelism::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
    }
}
