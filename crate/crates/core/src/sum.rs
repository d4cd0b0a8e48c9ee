//! Deterministic summation.

use rayon::prelude::*;

const BLOCK: usize = 64;
const CHUNK: usize = 8192;

/// Pairwise sum with a fixed split order.
pub fn ordered_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    ordered_sum(&xs[..mid]) + ordered_sum(&xs[mid..])
}

/// Parallel map-and-sum over `0..n` whose result does not depend on the thread count.
pub fn par_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let partial: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let vals: Vec<f64> = (lo..hi).map(&f).collect();
            ordered_sum(&vals)
        })
        .collect();
    ordered_sum(&partial)
}
