//! Data-parallel fan-out for independent work items.
//!
//! Every batch in this crate (channel realizations, grid candidates, seeds)
//! is embarrassingly parallel and collected back in input order, so results
//! are identical whichever strategy runs them. With the `parallel` feature
//! disabled, [`Execution::Parallel`] silently runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this strategy will actually use the thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Applies `f` to `0..n`, returning outputs in index order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Applies `f` to each item, returning outputs in input order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_strategies_preserve_order() {
        let seq = Execution::Sequential.map_range(1000, |i| i * i);
        let par = Execution::Parallel.map_range(1000, |i| i * i);
        assert_eq!(seq, par);
        let words = ["a", "bb", "ccc"];
        assert_eq!(Execution::Parallel.map(&words, |w| w.len()), vec![1, 2, 3]);
    }
}
