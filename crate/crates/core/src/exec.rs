//! Trial fan-out helpers.
//!
//! Experiments map a closure over trial (or grid) indices and reduce the
//! results in index order. With the `parallel` feature (default) the map runs
//! on the rayon thread pool; without it the same call is a plain sequential
//! loop. Results are collected into an index-ordered `Vec` either way, so the
//! subsequent reduction is identical no matter how the work was scheduled.

/// Maps `f` over `0..n` and returns the results in index order, using the
/// rayon pool when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n` and returns the results in index order, using the
/// rayon pool when the `parallel` feature is enabled.
#[cfg(not(feature = "parallel"))]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Always-sequential variant of [`indexed_map`]. The benchmark suite uses it
/// as the baseline against the parallel path.
pub fn indexed_map_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
