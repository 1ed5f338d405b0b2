//! Exact sums of responsibility products over tuples of distinct nodes.
//!
//! The inference equations keep asking for quantities of the shape
//! `T_c = sum over ordered tuples (i_1, ..., i_m) of pairwise-distinct nodes
//! of tau[i_1][c_1] * ... * tau[i_m][c_m]` for a sorted group configuration
//! `c`. Nested loops cost `O(n^m)`. The distinctness constraint factorizes by
//! inclusion-exclusion over set partitions of the positions: each partition
//! contributes `prod_blocks (-1)^(k-1) (k-1)! P_block`, where `P_B` is the
//! power sum `sum_i prod_{j in B} tau[i][g_j]`. After an `O(n)` power-sum
//! pass, every configuration costs `O(1)`, and leaving one node out is a
//! subtraction, not a rescan.
//!
//! Closed forms are hard-coded for `m <= 4`; larger orders fall back to the
//! naive enumeration (callers in this crate never exceed 4).

use crate::error::{Error, Result};
use crate::exec;
use crate::simplex::{ConfigMultiset, ConfigTable};

/// Largest tuple order with a factorized closed form.
pub const MAX_FACTORIZED_M: usize = 4;

/// Borrowed view of an `n x Q` responsibility matrix, row-major.
#[derive(Debug, Clone, Copy)]
pub struct TauView<'a> {
    pub data: &'a [f64],
    pub n: usize,
    pub q: usize,
}

impl<'a> TauView<'a> {
    pub fn new(data: &'a [f64], n: usize, q: usize) -> Self {
        debug_assert_eq!(data.len(), n * q);
        Self { data, n, q }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }
}

// Internal indexing of power-sum tables by sorted 0-based label tuples
// (colex closed forms). Self-consistent; unrelated to the public
// lexicographic configuration ranks in `simplex`.
#[inline]
fn rank2(a: usize, b: usize) -> usize {
    a + b * (b + 1) / 2
}

#[inline]
fn rank3(a: usize, b: usize, c: usize) -> usize {
    a + b * (b + 1) / 2 + (c + 2) * (c + 1) * c / 6
}

#[inline]
fn rank4(a: usize, b: usize, c: usize, d: usize) -> usize {
    a + b * (b + 1) / 2 + (c + 2) * (c + 1) * c / 6 + (d + 3) * (d + 2) * (d + 1) * d / 24
}

#[inline]
fn sort2(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Power sums of a responsibility snapshot up to a given block order.
///
/// `P_B` for a block of labels is stored once per sorted label multiset;
/// lookups sort their (at most four) arguments inline.
#[derive(Debug, Clone)]
pub struct PowerSums {
    q: usize,
    order: usize,
    p1: Vec<f64>,
    p2: Vec<f64>,
    p3: Vec<f64>,
    p4: Vec<f64>,
}

impl PowerSums {
    /// Accumulate power sums over all rows. Chunked over nodes with partials
    /// merged in chunk order, so the result is identical for any worker count.
    pub fn new(tau: TauView<'_>, order: usize) -> Self {
        let q = tau.q;
        exec::chunked_reduce(
            tau.n,
            Self::zeroed(q, order),
            |range| {
                let mut acc = Self::zeroed(q, order);
                for i in range {
                    acc.accumulate(tau.row(i));
                }
                acc
            },
            |mut a, b| {
                a.merge(&b);
                a
            },
        )
    }

    fn merge(&mut self, other: &Self) {
        for (x, y) in self.p1.iter_mut().zip(&other.p1) {
            *x += *y;
        }
        for (x, y) in self.p2.iter_mut().zip(&other.p2) {
            *x += *y;
        }
        for (x, y) in self.p3.iter_mut().zip(&other.p3) {
            *x += *y;
        }
        for (x, y) in self.p4.iter_mut().zip(&other.p4) {
            *x += *y;
        }
    }

    /// Power sums of a handful of explicit rows (used per hyperedge).
    pub fn from_rows(rows: &[&[f64]], q: usize, order: usize) -> Self {
        let mut out = Self::zeroed(q, order);
        for row in rows {
            out.accumulate(row);
        }
        out
    }

    /// All-zero power sums, ready for [`PowerSums::accumulate`]. Lets hot
    /// loops reuse one scratch instead of reallocating per hyperedge.
    pub fn zeroed(q: usize, order: usize) -> Self {
        assert!((1..=MAX_FACTORIZED_M).contains(&order));
        let sizes = Self::sizes(q, order);
        Self {
            q,
            order,
            p1: vec![0.0; sizes.0],
            p2: vec![0.0; sizes.1],
            p3: vec![0.0; sizes.2],
            p4: vec![0.0; sizes.3],
        }
    }

    pub fn reset(&mut self) {
        self.p1.fill(0.0);
        self.p2.fill(0.0);
        self.p3.fill(0.0);
        self.p4.fill(0.0);
    }

    /// Add one responsibility row to every power sum. Each entry's factor
    /// product is evaluated in value order (`stable_prod`), so the tables
    /// are exact functions of the row multisets and group relabeling
    /// permutes them without any roundoff drift.
    pub fn accumulate(&mut self, row: &[f64]) {
        let q = self.q;
        let order = self.order;
        for a in 0..q {
            self.p1[a] += row[a];
            if order < 2 {
                continue;
            }
            for b in a..q {
                self.p2[rank2(a, b)] += exec::stable_prod(&mut [row[a], row[b]]);
                if order < 3 {
                    continue;
                }
                for c in b..q {
                    self.p3[rank3(a, b, c)] += exec::stable_prod(&mut [row[a], row[b], row[c]]);
                    if order < 4 {
                        continue;
                    }
                    for d in c..q {
                        self.p4[rank4(a, b, c, d)] +=
                            exec::stable_prod(&mut [row[a], row[b], row[c], row[d]]);
                    }
                }
            }
        }
    }

    fn sizes(q: usize, order: usize) -> (usize, usize, usize, usize) {
        let c2 = q * (q + 1) / 2;
        let c3 = q * (q + 1) * (q + 2) / 6;
        let c4 = q * (q + 1) * (q + 2) * (q + 3) / 24;
        (
            q,
            if order >= 2 { c2 } else { 0 },
            if order >= 3 { c3 } else { 0 },
            if order >= 4 { c4 } else { 0 },
        )
    }

    pub fn q_count(&self) -> usize {
        self.q
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    fn p(&self, labels: &[usize]) -> f64 {
        match *labels {
            [a] => self.p1[a],
            [a, b] => {
                let (a, b) = sort2(a, b);
                self.p2[rank2(a, b)]
            }
            [a, b, c] => {
                let (a, b) = sort2(a, b);
                let (b, c) = sort2(b, c);
                let (a, b) = sort2(a, b);
                self.p3[rank3(a, b, c)]
            }
            [a, b, c, d] => {
                let mut v = [a, b, c, d];
                v.sort_unstable();
                self.p4[rank4(v[0], v[1], v[2], v[3])]
            }
            _ => unreachable!("block order beyond {MAX_FACTORIZED_M}"),
        }
    }

    #[inline]
    fn p_minus(&self, labels: &[usize], row: &[f64]) -> f64 {
        let mut factors = [1.0f64; MAX_FACTORIZED_M];
        for (slot, &g) in factors.iter_mut().zip(labels.iter()) {
            *slot = row[g];
        }
        self.p(labels) - exec::stable_prod(&mut factors[..labels.len()])
    }

    /// `T_c` for 0-based position labels `g` (`m = g.len() <= 4`): the sum
    /// over ordered tuples of pairwise-distinct nodes of the per-position
    /// responsibility products.
    pub fn tuple_sum(&self, g: &[usize]) -> f64 {
        tuple_sum_from(g, |labels| self.p(labels))
    }

    /// Same as [`Self::tuple_sum`] but over tuples avoiding the node whose
    /// responsibility row is `row`. Pure subtraction: no rescan of the data.
    pub fn tuple_sum_minus(&self, g: &[usize], row: &[f64]) -> f64 {
        tuple_sum_from(g, |labels| self.p_minus(labels, row))
    }
}

/// Inclusion-exclusion over set partitions of the positions, Moebius weight
/// `(-1)^(k-1) (k-1)!` per block of size `k`. Per-partition products and the
/// final reduction are value-ordered, so the result depends only on the
/// power-sum multiset — group relabeling is exact.
fn tuple_sum_from(g: &[usize], p: impl Fn(&[usize]) -> f64) -> f64 {
    match *g {
        [a] => p(&[a]),
        [a, b] => {
            let terms = &mut [exec::stable_prod(&mut [p(&[a]), p(&[b])]), -p(&[a, b])];
            exec::stable_sum(terms)
        }
        [a, b, c] => {
            let terms = &mut [
                exec::stable_prod(&mut [p(&[a]), p(&[b]), p(&[c])]),
                -exec::stable_prod(&mut [p(&[a]), p(&[b, c])]),
                -exec::stable_prod(&mut [p(&[b]), p(&[a, c])]),
                -exec::stable_prod(&mut [p(&[c]), p(&[a, b])]),
                2.0 * p(&[a, b, c]),
            ];
            exec::stable_sum(terms)
        }
        [a, b, c, d] => {
            let (sa, sb, sc, sd) = (p(&[a]), p(&[b]), p(&[c]), p(&[d]));
            let terms = &mut [
                exec::stable_prod(&mut [sa, sb, sc, sd]),
                -exec::stable_prod(&mut [p(&[a, b]), sc, sd]),
                -exec::stable_prod(&mut [p(&[a, c]), sb, sd]),
                -exec::stable_prod(&mut [p(&[a, d]), sb, sc]),
                -exec::stable_prod(&mut [p(&[b, c]), sa, sd]),
                -exec::stable_prod(&mut [p(&[b, d]), sa, sc]),
                -exec::stable_prod(&mut [p(&[c, d]), sa, sb]),
                exec::stable_prod(&mut [p(&[a, b]), p(&[c, d])]),
                exec::stable_prod(&mut [p(&[a, c]), p(&[b, d])]),
                exec::stable_prod(&mut [p(&[a, d]), p(&[b, c])]),
                2.0 * exec::stable_prod(&mut [p(&[a, b, c]), sd]),
                2.0 * exec::stable_prod(&mut [p(&[a, b, d]), sc]),
                2.0 * exec::stable_prod(&mut [p(&[a, c, d]), sb]),
                2.0 * exec::stable_prod(&mut [p(&[b, c, d]), sa]),
                -6.0 * p(&[a, b, c, d]),
            ];
            exec::stable_sum(terms)
        }
        _ => unreachable!(),
    }
}

fn labels0(c: &ConfigMultiset) -> Vec<usize> {
    c.labels().iter().map(|&q| q - 1).collect()
}

/// Reference `T_c` by nested iteration over ordered tuples of distinct
/// nodes. `O(n^m)`; the oracle the factorized path is tested against.
pub fn tuple_sum_naive(tau: TauView<'_>, c: &ConfigMultiset) -> f64 {
    let g = labels0(c);
    let mut used = vec![false; tau.n];
    fn recurse(tau: &TauView<'_>, g: &[usize], depth: usize, prod: f64, used: &mut [bool]) -> f64 {
        if depth == g.len() {
            return prod;
        }
        let mut acc = 0.0;
        for i in 0..tau.n {
            if !used[i] {
                used[i] = true;
                acc += recurse(tau, g, depth + 1, prod * tau.row(i)[g[depth]], used);
                used[i] = false;
            }
        }
        acc
    }
    recurse(&tau, &g, 0, 1.0, &mut used)
}

/// Factorized `T_c`, equal to [`tuple_sum_naive`] up to roundoff, at `O(n)`
/// cost per configuration.
pub fn tuple_sum_factorized(tau: TauView<'_>, c: &ConfigMultiset) -> Result<f64> {
    let m = c.size();
    if m > MAX_FACTORIZED_M {
        return Err(Error::UnsupportedM {
            m,
            max: MAX_FACTORIZED_M,
        });
    }
    let power = PowerSums::new(tau, m);
    Ok(power.tuple_sum(&labels0(c)))
}

/// `T_c` over tuples that avoid `node`.
pub fn leave_one_out(tau: TauView<'_>, c: &ConfigMultiset, node: usize) -> Result<f64> {
    let m = c.size();
    if m > MAX_FACTORIZED_M {
        return Err(Error::UnsupportedM {
            m,
            max: MAX_FACTORIZED_M,
        });
    }
    let power = PowerSums::new(tau, m);
    Ok(power.tuple_sum_minus(&labels0(c), tau.row(node)))
}

/// Tuple sums for every configuration of one tensor order, plus leave-one-out
/// queries against the retained power sums.
#[derive(Debug, Clone)]
pub struct TupleSumTable {
    labels: Vec<Vec<usize>>,
    values: Vec<f64>,
    power: PowerSums,
}

impl TupleSumTable {
    pub fn compute(tau: TauView<'_>, table: &ConfigTable) -> Result<Self> {
        if table.m > MAX_FACTORIZED_M {
            return Err(Error::UnsupportedM {
                m: table.m,
                max: MAX_FACTORIZED_M,
            });
        }
        let power = PowerSums::new(tau, table.m);
        let labels = table.labels0.clone();
        let values = labels.iter().map(|g| power.tuple_sum(g)).collect();
        Ok(Self {
            labels,
            values,
            power,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, rank: usize) -> f64 {
        self.values[rank]
    }

    /// `T_c` over tuples avoiding the node with responsibility row `row`.
    pub fn leave_one_out(&self, rank: usize, row: &[f64]) -> f64 {
        self.power.tuple_sum_minus(&self.labels[rank], row)
    }
}

/// Per-subset assignment weights of one hyperedge: for each sorted
/// configuration `c`, the sum over ordered group assignments of the edge's
/// nodes whose sorted labels equal `c` of the responsibility products. The
/// tuple-sum identity `a_c = T_c(rows of e) / prod m_k!` keeps this exactly
/// label-equivariant.
pub fn assignment_weights(rows: &[&[f64]], table: &ConfigTable) -> Vec<f64> {
    debug_assert_eq!(rows.len(), table.m);
    let power = PowerSums::from_rows(rows, table.q_count, table.m);
    let mut out = Vec::with_capacity(table.len());
    assignment_weights_into(&power, table, &mut out);
    out
}

/// [`assignment_weights`] against caller-held power sums (already
/// accumulated over the edge's rows), appending into a reusable buffer.
pub fn assignment_weights_into(power: &PowerSums, table: &ConfigTable, out: &mut Vec<f64>) {
    out.clear();
    out.extend(
        table
            .labels0
            .iter()
            .zip(table.multiplicity.iter())
            .map(|(g, mult)| power.tuple_sum(g) / mult),
    );
}
