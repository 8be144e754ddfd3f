//! Deterministic execution helpers.
//!
//! Work is split into fixed-size blocks whose partial results are combined
//! by a pairwise reduction tree that depends only on the problem size, so
//! the parallel and sequential paths produce bit-identical results for any
//! thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Items summed per block. Fixed: the reduction shape must not depend on
/// the worker count.
const BLOCK: u64 = 4096;

/// Sum `values` with a balanced pairwise tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

fn block_ranges(count: u64) -> impl Iterator<Item = (u64, u64)> {
    let blocks = count.div_ceil(BLOCK);
    (0..blocks).map(move |b| (b * BLOCK, ((b + 1) * BLOCK).min(count)))
}

fn block_sum<F: Fn(u64) -> f64>(range: (u64, u64), term: &F) -> f64 {
    let mut acc = 0.0;
    for i in range.0..range.1 {
        acc += term(i);
    }
    acc
}

/// Sequential evaluation of `sum_{i=0}^{count-1} term(i)`.
pub fn sum_terms_sequential<F>(count: u64, term: F) -> f64
where
    F: Fn(u64) -> f64 + Sync,
{
    let partials: Vec<f64> = block_ranges(count).map(|r| block_sum(r, &term)).collect();
    pairwise_sum(&partials)
}

/// Parallel evaluation; bit-identical to [`sum_terms_sequential`].
#[cfg(feature = "parallel")]
pub fn sum_terms_parallel<F>(count: u64, term: F) -> f64
where
    F: Fn(u64) -> f64 + Sync,
{
    if count <= BLOCK {
        // Single block: skip the rayon dispatch, same reduction shape.
        return sum_terms_sequential(count, term);
    }
    let ranges: Vec<(u64, u64)> = block_ranges(count).collect();
    let partials: Vec<f64> = ranges.par_iter().map(|&r| block_sum(r, &term)).collect();
    pairwise_sum(&partials)
}

/// Feature-dispatched entry point used by the library internals.
pub(crate) fn sum_terms<F>(count: u64, term: F) -> f64
where
    F: Fn(u64) -> f64 + Sync,
{
    #[cfg(feature = "parallel")]
    {
        sum_terms_parallel(count, term)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sum_terms_sequential(count, term)
    }
}

/// Order-preserving map over `items`, parallel when the feature is enabled.
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
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

/// Order-preserving sequential map; the fallback path of [`map_ordered`].
pub fn map_ordered_sequential<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Derive an independent RNG seed from a base seed and a task index
/// (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_small_inputs() {
        let xs: Vec<f64> = (1..=7).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 28.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn sequential_sum_spans_block_boundaries() {
        // count > BLOCK exercises multi-block reduction; closed form checks it.
        let count = 3 * 4096 + 17;
        let s = sum_terms_sequential(count, |i| i as f64);
        let n = count as f64;
        assert_eq!(s, n * (n - 1.0) / 2.0);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_sum_is_bit_identical_to_sequential() {
        let term = |i: u64| ((i as f64) * 0.718_281_828).sin() / (1.0 + i as f64);
        for count in [0u64, 1, 4095, 4096, 4097, 100_000] {
            let seq = sum_terms_sequential(count, term);
            let par = sum_terms_parallel(count, term);
            assert_eq!(seq.to_bits(), par.to_bits(), "count {count}");
        }
    }

    #[test]
    fn map_ordered_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let out = map_ordered(&items, |&i| i * 2);
        let out_seq = map_ordered_sequential(&items, |&i| i * 2);
        assert_eq!(out, out_seq);
    }

    #[test]
    fn derived_seeds_differ_by_index() {
        let a = derive_seed(7, 0);
        let b = derive_seed(7, 1);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(7, 0));
    }
}
