//! Execution modes for the particle phases.
//!
//! Work over particles is split into a fixed number of contiguous slabs
//! (independent of the thread count), each processed by a pure function of
//! its own range; partial results are combined in slab order. Scheduling
//! therefore never changes any floating-point result: `Parallel` and
//! `Sequential` are bit-identical, and `Parallel` on k threads is
//! bit-identical to `Parallel` on one.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed slab count for particle partitioning. Bounds the memory used by
/// private deposition grids while leaving enough slabs to occupy every core.
pub(crate) const SLAB_COUNT: usize = 64;

/// How the data-parallel particle phases run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    /// Single-threaded loops.
    Sequential,
    /// Rayon-parallel loops over fixed slabs. Without the `parallel`
    /// feature this falls back to sequential execution (same results).
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Contiguous ranges covering 0..n in at most [`SLAB_COUNT`] slabs.
pub(crate) fn slab_ranges(n: usize) -> Vec<Range<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let slabs = SLAB_COUNT.min(n);
    let size = n.div_ceil(slabs);
    (0..n.div_ceil(size))
        .map(|s| s * size..((s + 1) * size).min(n))
        .collect()
}

/// Map a pure function over slab ranges, returning results in slab order.
pub(crate) fn map_slabs<T, F>(mode: ExecMode, ranges: &[Range<usize>], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel {
        return ranges.par_iter().map(|r| f(r.clone())).collect();
    }
    let _ = mode;
    ranges.iter().map(|r| f(r.clone())).collect()
}

/// Run a function over aligned mutable chunks of two equally long slices,
/// chunked by the same slab size. `f(start_index, chunk_a, chunk_b)`.
pub(crate) fn for_each_slab_pair_mut<A, B, F>(
    mode: ExecMode,
    a: &mut [A],
    b: &mut [B],
    f: F,
) where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Sync,
{
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return;
    }
    let size = a.len().div_ceil(SLAB_COUNT.min(a.len()));
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel {
        a.par_chunks_mut(size)
            .zip(b.par_chunks_mut(size))
            .enumerate()
            .for_each(|(s, (ca, cb))| f(s * size, ca, cb));
        return;
    }
    let _ = mode;
    for (s, (ca, cb)) in a.chunks_mut(size).zip(b.chunks_mut(size)).enumerate() {
        f(s * size, ca, cb);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slabs_cover_range_exactly_once() {
        for n in [0usize, 1, 5, 63, 64, 65, 1000, 4096] {
            let ranges = slab_ranges(n);
            let mut seen = vec![false; n];
            for r in &ranges {
                for i in r.clone() {
                    assert!(!seen[i]);
                    seen[i] = true;
                }
            }
            assert!(seen.iter().all(|&s| s), "n = {n}");
            assert!(ranges.len() <= SLAB_COUNT);
        }
    }

    #[test]
    fn map_slabs_preserves_order() {
        let ranges = slab_ranges(1000);
        let seq = map_slabs(ExecMode::Sequential, &ranges, |r| r.start);
        let par = map_slabs(ExecMode::Parallel, &ranges, |r| r.start);
        assert_eq!(seq, par);
        let mut sorted = seq.clone();
        sorted.sort_unstable();
        assert_eq!(seq, sorted);
    }

    #[test]
    fn slab_pair_iteration_covers_all_elements() {
        let n = 777;
        let mut a = vec![0u32; n];
        let mut b = vec![0u32; n];
        for_each_slab_pair_mut(ExecMode::Parallel, &mut a, &mut b, |start, ca, cb| {
            for (k, (x, y)) in ca.iter_mut().zip(cb.iter_mut()).enumerate() {
                *x = (start + k) as u32;
                *y = 1;
            }
        });
        assert!(a.iter().enumerate().all(|(i, &x)| x == i as u32));
        assert!(b.iter().all(|&y| y == 1));
    }
}
