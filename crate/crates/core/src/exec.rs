//! Execution backends for the data-parallel loops.
//!
//! Every parallel loop in the crate is expressed as a map over a fixed number
//! of work blocks followed by a pairwise tree reduction over the block results
//! in index order. The block partition never depends on the worker count, so a
//! sequential run and a parallel run with any number of threads produce
//! bit-identical floating-point results.

use serde::{Deserialize, Serialize};

/// Number of Monte Carlo replicas handled by one work block.
pub const REPLICA_BLOCK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Backend {
    Sequential,
    /// Rayon thread pool. `None` uses the global pool; `Some(w)` builds a
    /// dedicated pool with `w` threads. Without the `parallel` feature this
    /// runs sequentially.
    #[default]
    Parallel,
    Workers(usize),
}

impl Backend {
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers {
            Some(1) => Backend::Sequential,
            Some(w) => Backend::Workers(w),
            None => Backend::Parallel,
        }
    }

    pub fn is_parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// Evaluates `f(0..count)` and returns the results in index order.
    pub fn map<T, F>(self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Backend::Sequential => (0..count).map(f).collect(),
            #[cfg(feature = "parallel")]
            Backend::Parallel => {
                use rayon::prelude::*;
                (0..count).into_par_iter().map(f).collect()
            }
            #[cfg(feature = "parallel")]
            Backend::Workers(w) => {
                use rayon::prelude::*;
                match rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build() {
                    Ok(pool) => pool.install(|| (0..count).into_par_iter().map(f).collect()),
                    Err(_) => (0..count).map(f).collect(),
                }
            }
            #[cfg(not(feature = "parallel"))]
            Backend::Parallel | Backend::Workers(_) => (0..count).map(f).collect(),
        }
    }

    /// Maps over work blocks and folds the block results with [`tree_reduce`].
    pub fn map_reduce<T, F, R>(self, blocks: usize, f: F, merge: R) -> Option<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
        R: Fn(T, T) -> T,
    {
        tree_reduce(self.map(blocks, f), merge)
    }
}

/// Pairwise reduction with a fixed shape: neighbours (0,1), (2,3), ... are
/// merged level by level until one value remains.
pub fn tree_reduce<T, R>(mut items: Vec<T>, merge: R) -> Option<T>
where
    R: Fn(T, T) -> T,
{
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut iter = items.into_iter();
        while let Some(a) = iter.next() {
            match iter.next() {
                Some(b) => next.push(merge(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

/// Splits `total` items into blocks of `block` and returns `(start, len)`.
pub(crate) fn block_range(index: usize, block: usize, total: usize) -> (usize, usize) {
    let start = index * block;
    (start, block.min(total - start))
}

pub(crate) fn block_count(total: usize, block: usize) -> usize {
    total.div_ceil(block)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_reduce_shape_is_fixed() {
        let items: Vec<String> = (0..5).map(|i| i.to_string()).collect();
        let out = tree_reduce(items, |a, b| format!("({a}{b})")).unwrap();
        assert_eq!(out, "(((01)(23))4)");
        assert!(tree_reduce(Vec::<u8>::new(), |a, _| a).is_none());
    }

    #[test]
    fn backends_agree_bitwise() {
        let f = |i: usize| (0..1000).map(|k| ((i * 1000 + k) as f64).sqrt()).sum::<f64>();
        let seq = Backend::Sequential.map_reduce(37, f, |a, b| a + b).unwrap();
        let par = Backend::Parallel.map_reduce(37, f, |a, b| a + b).unwrap();
        let w3 = Backend::Workers(3).map_reduce(37, f, |a, b| a + b).unwrap();
        assert_eq!(seq.to_bits(), par.to_bits());
        assert_eq!(seq.to_bits(), w3.to_bits());
    }

    #[test]
    fn blocks_cover_total() {
        let total = 10_001;
        let n = block_count(total, 2048);
        let covered: usize = (0..n).map(|i| block_range(i, 2048, total).1).sum();
        assert_eq!(covered, total);
    }
}
