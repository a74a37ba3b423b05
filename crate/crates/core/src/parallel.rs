//! Data-parallel helpers. With the `parallel` feature these run on rayon's
//! global pool; without it they fall back to plain sequential iteration.

/// Whether this build was compiled with rayon support.
pub const ENABLED: bool = cfg!(feature = "parallel");

/// Order-preserving map over a slice.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential reference for [`map_slice`]; always available for benches.
pub fn map_slice_sequential<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}
