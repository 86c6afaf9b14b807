//! Data-parallel helpers with a sequential fallback.
//!
//! Corpus work (per-file extraction, batch prediction, per-file evaluation)
//! is embarrassingly parallel; with the `parallel` feature enabled these
//! helpers fan out over rayon, otherwise they run sequentially. Both paths
//! preserve input order, so results are deterministic either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when the `parallel` feature is on.
pub fn map_ordered<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Sequential map, always. Kept public so benchmarks can compare the two
/// paths within one build.
pub fn map_ordered_seq<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}
