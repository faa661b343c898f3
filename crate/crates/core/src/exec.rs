//! Data-parallel execution with a sequential fallback.
//!
//! Every Monte Carlo loop in the crate goes through [`Execution`]. Work items
//! carry their own RNG substream, so both variants return identical results;
//! only the wall-clock time differs. Without the `parallel` feature the
//! `Parallel` variant runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
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
    /// Maps `op` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], op: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(op).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(op).collect(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => items.iter().map(op).collect(),
        }
    }

    /// Maps `op` over `0..len`, preserving order.
    pub fn map_range<R, F>(self, len: usize, op: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..len).map(op).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..len).into_par_iter().map(op).collect(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => (0..len).map(op).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_variants_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map(&items, |x| x * x);
        let par = Execution::Parallel.map(&items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(
            Execution::Sequential.map_range(17, |i| i + 1),
            Execution::Parallel.map_range(17, |i| i + 1)
        );
    }
}
