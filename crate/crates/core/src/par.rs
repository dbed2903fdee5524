//! Data-parallel helpers with a sequential fallback.
//!
//! Each helper hands out disjoint work items. Work items never share
//! accumulators, so the floating-point result of every item is independent of
//! scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`, in parallel when enabled. Output order is index order.
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

/// Runs `f(index, slice)` over disjoint mutable slices.
pub(crate) fn for_each_slice<F>(slices: Vec<&mut [f64]>, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        slices
            .into_par_iter()
            .enumerate()
            .for_each(|(i, s)| f(i, s));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, s) in slices.into_iter().enumerate() {
            f(i, s);
        }
    }
}

/// Splits a packed lower-triangular buffer into its `n` row slices.
pub(crate) fn packed_rows_mut(data: &mut [f64], n: usize) -> Vec<&mut [f64]> {
    let mut rows = Vec::with_capacity(n);
    let mut rest = data;
    for i in 0..n {
        let (row, tail) = rest.split_at_mut(i + 1);
        rows.push(row);
        rest = tail;
    }
    rows
}
