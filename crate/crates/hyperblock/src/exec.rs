//! Deterministic execution helpers.
//!
//! Parallelism here is pure map-reduce over immutable snapshots. Reductions
//! happen in a fixed order (per-chunk partials combined in chunk order), so
//! every result is bit-identical for any worker count, and identical to the
//! sequential fallback built with `--no-default-features`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed chunk length for node/edge range reductions. Partials are combined
/// in chunk order, never in scheduling order.
pub const CHUNK: usize = 1024;

/// Map `f` over `0..n` and collect results in index order.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
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

/// Reduce `0..n` by computing a per-chunk partial with `f` (sequential inside
/// a chunk) and combining the partials in chunk order with `merge`.
pub fn chunked_reduce<T, F, M>(n: usize, identity: T, f: F, merge: M) -> T
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
    M: Fn(T, T) -> T,
{
    let ranges: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(CHUNK.max(1))
        .map(|start| start..(start + CHUNK).min(n))
        .collect();
    #[cfg(feature = "parallel")]
    let partials: Vec<T> = ranges.into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<T> = ranges.into_iter().map(f).collect();
    partials.into_iter().fold(identity, merge)
}

/// Sum `f(i)` over `0..n` with Neumaier compensation inside each chunk and
/// fixed-order combination across chunks.
pub fn chunked_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    chunked_reduce(
        n,
        0.0,
        |range| {
            let mut acc = Accumulator::new();
            for i in range {
                acc.add(f(i));
            }
            acc.total()
        },
        |a, b| a + b,
    )
}

/// Neumaier (improved Kahan) compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self { sum: 0.0, comp: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a term list whose order is not canonical.
///
/// Terms indexed by group labels or configurations permute when group labels
/// are permuted; summing them in storage order would then round differently.
/// Sorting by the IEEE total order first makes the result a function of the
/// term *multiset*, so label-permutation equivariance holds exactly in
/// floating point. Used at every group-indexed reduction site.
pub fn stable_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(|a, b| a.total_cmp(b));
    let mut acc = Accumulator::new();
    for &t in terms.iter() {
        acc.add(t);
    }
    acc.total()
}

/// Product of up to a handful of factors in value order, for the same
/// reason as [`stable_sum`]: grouping must depend on the factor multiset,
/// not on label order.
#[inline]
pub fn stable_prod(factors: &mut [f64]) -> f64 {
    factors.sort_unstable_by(|a, b| a.total_cmp(b));
    factors.iter().product()
}
