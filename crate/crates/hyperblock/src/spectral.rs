//! Spectral initializers: hypergraph Laplacian embedding with soft k-means,
//! and absolute spectral clustering on the size-2 slice.
//!
//! The hypergraph operator is pinned as the symmetrically normalized
//! co-occurrence matrix: `A_ij` counts the hyperedges containing both `i`
//! and `j`, `L = D^{-1/2} A D^{-1/2}` with degree-zero rows left zero. Its
//! `Q` leading eigenvectors (algebraic order) give the embedding; the
//! absolute variant instead keeps the `Q` eigenvalues of the normalized
//! size-2 adjacency that are largest in magnitude, which also captures
//! disassortative structure.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{self, stable_sum};
use crate::hypergraph::Hypergraph;
use crate::vem::VariationalState;

/// Row-normalized spectral embedding: `n x Q`, every row unit-norm or
/// exactly zero (isolated nodes).
#[derive(Debug, Clone)]
pub struct Embedding {
    data: Vec<f64>,
    n: usize,
    q: usize,
}

impl Embedding {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    /// Build from raw rows, unit-normalizing each; rows with negligible norm
    /// become exactly zero.
    pub fn from_rows(data: Vec<f64>, n: usize, q: usize) -> Self {
        let mut out = Self { data, n, q };
        for i in 0..n {
            let row = &mut out.data[i * q..(i + 1) * q];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for v in row.iter_mut() {
                    *v /= norm;
                }
            } else {
                row.fill(0.0);
            }
        }
        out
    }
}

/// Symmetrically normalize a nonnegative matrix by its row sums, leaving
/// zero-degree rows and columns zero.
fn normalize_symmetric(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let dinv: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = a.row(i).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = dinv[i] * a[(i, j)] * dinv[j];
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Leading `k` eigenpairs of a symmetric matrix, ordered by eigenvalue
/// (descending), or by magnitude when `by_abs` is set. Eigenvector signs are
/// fixed so the entry of largest magnitude is positive.
pub fn leading_eigenpairs(
    a: &DMatrix<f64>,
    k: usize,
    by_abs: bool,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = a.nrows();
    if n == 0 || k == 0 {
        return Ok(Vec::new());
    }
    let eigen = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 100_000)
        .ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (vi, vj) = (eigen.eigenvalues[i], eigen.eigenvalues[j]);
        let (ki, kj) = if by_abs {
            (vi.abs(), vj.abs())
        } else {
            (vi, vj)
        };
        kj.total_cmp(&ki).then(i.cmp(&j))
    });
    let mut out = Vec::with_capacity(k.min(n));
    for &idx in order.iter().take(k) {
        let mut v: Vec<f64> = eigen.eigenvectors.column(idx).iter().copied().collect();
        // Deterministic sign: largest-magnitude entry positive.
        let mut pivot = 0;
        for (j, &x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = j;
            }
        }
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        out.push((eigen.eigenvalues[idx], v));
    }
    Ok(out)
}

/// Hypergraph Laplacian embedding: leading `Q` eigenvectors of the
/// normalized co-occurrence operator, rows unit-normalized. Isolated nodes
/// get zero rows. When `Q > n` the missing columns are zero.
pub fn hyper_laplacian_embedding(h: &Hypergraph, q: usize) -> Result<Embedding> {
    let n = h.n();
    let lap = normalize_symmetric(&h.cooccurrence());
    let pairs = leading_eigenpairs(&lap, q.min(n), false)?;
    let degrees = h.degree_sequence();
    let mut data = vec![0.0; n * q];
    for (col, (_, vector)) in pairs.iter().enumerate() {
        for i in 0..n {
            if degrees[i] > 0 {
                data[i * q + col] = vector[i];
            }
        }
    }
    Ok(Embedding::from_rows(data, n, q))
}

/// Plain k-means state used by both initializers.
struct KMeansFit {
    centroids: Vec<f64>,
    labels: Vec<usize>,
    inertia: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_single(points: &[f64], n: usize, d: usize, k: usize, seed: u64) -> KMeansFit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row = |i: usize| &points[i * d..(i + 1) * d];
    // k-means++ seeding.
    let mut centroids = vec![0.0; k * d];
    let first = rng.random_range(0..n);
    centroids[0..d].copy_from_slice(row(first));
    let mut dist2: Vec<f64> = (0..n).map(|i| squared_distance(row(i), &centroids[0..d])).collect();
    for c in 1..k {
        let total: f64 = dist2.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in dist2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let start = c * d;
        centroids[start..start + d].copy_from_slice(row(chosen));
        for (i, slot) in dist2.iter_mut().enumerate() {
            let dd = squared_distance(row(i), &centroids[start..start + d]);
            if dd < *slot {
                *slot = dd;
            }
        }
    }
    // Lloyd iterations.
    let mut labels = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dd = squared_distance(row(i), &centroids[c * d..(c + 1) * d]);
                if dd < best_d {
                    best_d = dd;
                    best = c;
                }
            }
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for j in 0..d {
                sums[labels[i] * d + j] += row(i)[j];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    centroids[c * d + j] = sums[c * d + j] / counts[c] as f64;
                }
            } else {
                // Reseed an empty cluster at the point farthest from its
                // centroid (lowest index on ties).
                let mut far = 0;
                let mut far_d = -1.0;
                for i in 0..n {
                    let dd = squared_distance(row(i), &centroids[labels[i] * d..(labels[i] + 1) * d]);
                    if dd > far_d {
                        far_d = dd;
                        far = i;
                    }
                }
                centroids[c * d..(c + 1) * d].copy_from_slice(row(far));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let inertia: f64 = (0..n)
        .map(|i| squared_distance(row(i), &centroids[labels[i] * d..(labels[i] + 1) * d]))
        .sum();
    KMeansFit {
        centroids,
        labels,
        inertia,
    }
}

/// Restarted k-means: per-restart derived seeds, best inertia wins, ties to
/// the lowest restart index.
fn kmeans(points: &[f64], n: usize, d: usize, k: usize, restarts: usize, seed: u64) -> KMeansFit {
    assert!(restarts >= 1);
    let fits = exec::map_collect(restarts, |r| {
        let derived = seed.wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        kmeans_single(points, n, d, k, derived)
    });
    let mut best = 0;
    for (i, fit) in fits.iter().enumerate() {
        if fit.inertia < fits[best].inertia {
            best = i;
        }
    }
    fits.into_iter().nth(best).expect("restarts >= 1")
}

/// Soft k-means on embedding rows: responsibilities from a Gaussian kernel
/// around the best restart's centroids, bandwidth the mean within-cluster
/// squared distance (floored at 1e-8). Zero embedding rows get uniform
/// responsibilities.
pub fn soft_kmeans(x: &Embedding, q: usize, restarts: usize, seed: u64) -> VariationalState {
    let n = x.n();
    if n == 0 {
        return VariationalState::uniform(0, q);
    }
    let d = x.q();
    let points: Vec<f64> = (0..n).flat_map(|i| x.row(i).iter().copied()).collect();
    let fit = kmeans(&points, n, d, q, restarts, seed);
    let bandwidth = (fit.inertia / n as f64).max(1e-8);
    let mut data = vec![0.0; n * q];
    let mut scratch = Vec::with_capacity(q);
    for i in 0..n {
        let row = &mut data[i * q..(i + 1) * q];
        if x.row(i).iter().all(|&v| v == 0.0) {
            row.fill(1.0 / q as f64);
            continue;
        }
        for (c, v) in row.iter_mut().enumerate() {
            let dd = squared_distance(x.row(i), &fit.centroids[c * d..(c + 1) * d]);
            *v = (-dd / bandwidth).exp();
        }
        scratch.clear();
        scratch.extend_from_slice(row);
        let total = stable_sum(&mut scratch);
        if total > 0.0 {
            row.iter_mut().for_each(|v| *v /= total);
        } else {
            row.fill(1.0 / q as f64);
        }
    }
    VariationalState::new(data, n, q).expect("soft k-means rows are stochastic")
}

/// Laplacian embedding followed by soft k-means.
pub fn soft_spectral_init(
    h: &Hypergraph,
    q: usize,
    restarts: usize,
    seed: u64,
) -> Result<VariationalState> {
    let x = hyper_laplacian_embedding(h, q)?;
    Ok(soft_kmeans(&x, q, restarts, seed))
}

/// Absolute spectral clustering of the size-2 slice: eigenvectors of the
/// normalized adjacency with the `Q` largest |eigenvalues|, hard k-means,
/// then the one-hot assignment mixed with uniform (0.9 / 0.1) so the
/// M-step-first fit can move off it. Nodes isolated in the slice get
/// uniform rows.
pub fn absolute_spectral_init(
    h: &Hypergraph,
    q: usize,
    restarts: usize,
    seed: u64,
) -> Result<VariationalState> {
    let n = h.n();
    if n == 0 {
        return Ok(VariationalState::uniform(0, q));
    }
    let a2 = h.size2_adjacency();
    let slice_degree: Vec<f64> = (0..n).map(|i| a2.row(i).iter().sum()).collect();
    if slice_degree.iter().all(|&d| d == 0.0) {
        return Ok(VariationalState::uniform(n, q));
    }
    let normalized = normalize_symmetric(&a2);
    let pairs = leading_eigenpairs(&normalized, q.min(n), true)?;
    let d = pairs.len().max(1);
    let mut points = vec![0.0; n * d];
    for (col, (_, vector)) in pairs.iter().enumerate() {
        for i in 0..n {
            points[i * d + col] = vector[i];
        }
    }
    let fit = kmeans(&points, n, d, q, restarts, seed);
    let uniform = 0.1 / q as f64;
    let mut data = vec![0.0; n * q];
    for i in 0..n {
        let row = &mut data[i * q..(i + 1) * q];
        if slice_degree[i] == 0.0 {
            row.fill(1.0 / q as f64);
        } else {
            row.fill(uniform);
            row[fit.labels[i]] += 0.9;
        }
    }
    Ok(VariationalState::new(data, n, q).expect("mixed one-hot rows are stochastic"))
}
