//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these fan out over rayon's current
//! thread pool; without it they compile to plain iterator loops. Both paths
//! preserve element order, so callers observe identical results either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Order-preserving map over `0..n`.
#[cfg(feature = "parallel")]
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Fold `f` over a slice and reduce with `max` on the results.
///
/// Used by collision queries, where the reduction is associative and
/// commutative, so the parallel schedule cannot change the outcome.
#[cfg(feature = "parallel")]
pub fn max_map<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    items
        .par_iter()
        .map(f)
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

#[cfg(not(feature = "parallel"))]
pub fn max_map<T, F>(items: &[T], f: F) -> f64
where
    F: Fn(&T) -> f64,
{
    items.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
}
