//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper returns results in input order, so output never depends on
//! the schedule. Building without the `parallel` feature swaps rayon for
//! plain iterators.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Applies `f` to each mutable chunk.
pub fn for_each_mut<T, F>(chunks: &mut [&mut [T]], f: F)
where
    T: Send,
    F: Fn(&mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        chunks.par_iter_mut().for_each(|c| f(c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        chunks.iter_mut().for_each(|c| f(c));
    }
}

/// Sorts a slice, in parallel when available.
pub fn sort_by<T, F>(v: &mut [T], cmp: F)
where
    T: Send,
    F: Fn(&T, &T) -> std::cmp::Ordering + Sync,
{
    #[cfg(feature = "parallel")]
    {
        v.par_sort_by(cmp);
    }
    #[cfg(not(feature = "parallel"))]
    {
        v.sort_by(cmp);
    }
}

/// True when this build distributes work over threads.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
