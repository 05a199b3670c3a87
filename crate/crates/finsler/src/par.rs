//! Data-parallel helpers with a sequential fallback.
//!
//! Batch work (audit samples, direction fans, winding-class sweeps) goes
//! through these shims. With the `parallel` feature (default) they run on
//! the rayon pool; without it the same call sites run sequentially.
//! Results are collected in input order either way, so outputs do not
//! depend on the feature or the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub(crate) fn map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Send + Sync,
{
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}
