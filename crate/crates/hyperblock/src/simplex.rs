//! Bijective ranking between sorted group multisets and flat tensor indices.
//!
//! A symmetric connectivity tensor of order `m` over `Q` groups has one free
//! entry per sorted configuration `q1 <= ... <= qm`. Shifting to the strictly
//! increasing sequence `l_k = q_k + k - 1` turns configurations into
//! `m`-subsets of `{1, ..., Q+m-1}`, ranked here onto `0..C(Q+m-1, m)` in
//! lexicographic order. Ranks are 0-based; group labels are 1-based.

use crate::error::{Error, Result};

/// Binomial coefficient `C(n, k)` in u64, or an overflow error.
pub fn binomial(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or(Error::Overflow { n, k })?;
        acc /= (i + 1) as u128;
    }
    u64::try_from(acc).map_err(|_| Error::Overflow { n, k })
}

/// `C(n, k)` as f64 (exact for small arguments, used in likelihood formulas).
pub fn binomial_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Number of sorted group configurations of size `m` over `Q` groups,
/// `C(Q+m-1, m)`.
pub fn multiset_count(q: usize, m: usize) -> Result<u64> {
    binomial((q + m - 1) as u64, m as u64)
}

/// A sorted multiset of group labels `1 <= q1 <= ... <= qm <= Q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConfigMultiset {
    labels: Vec<usize>,
    q_count: usize,
}

impl ConfigMultiset {
    pub fn new(labels: Vec<usize>, q_count: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidConfig("empty configuration".into()));
        }
        for w in labels.windows(2) {
            if w[0] > w[1] {
                return Err(Error::InvalidConfig(format!(
                    "labels not sorted: {labels:?}"
                )));
            }
        }
        if labels[0] < 1 || *labels.last().unwrap() > q_count {
            return Err(Error::InvalidConfig(format!(
                "labels {labels:?} outside 1..={q_count}"
            )));
        }
        Ok(Self { labels, q_count })
    }

    /// Build from an unsorted label sequence.
    pub fn from_unsorted(labels: &[usize], q_count: usize) -> Result<Self> {
        let mut sorted = labels.to_vec();
        sorted.sort_unstable();
        Self::new(sorted, q_count)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn q_count(&self) -> usize {
        self.q_count
    }

    /// All labels equal (the "within-group" configurations of the
    /// affiliation submodels).
    pub fn is_constant(&self) -> bool {
        self.labels.windows(2).all(|w| w[0] == w[1])
    }

    /// Product of factorials of label multiplicities. This is the number of
    /// ordered node tuples of a fixed node set that realize the sorted label
    /// sequence, the factor relating tuple sums to per-subset assignment
    /// weights.
    pub fn multiplicity_factor(&self) -> f64 {
        let mut acc = 1.0;
        let mut run = 1u64;
        for k in 1..self.labels.len() {
            if self.labels[k] == self.labels[k - 1] {
                run += 1;
                acc *= run as f64;
            } else {
                run = 1;
            }
        }
        acc
    }
}

/// Rank of a sorted configuration in `0..multiset_count(Q, m)`, strictly
/// increasing in lexicographic order of the configuration. The shifted
/// combination `l` lives in `{1, ..., Q+m-1}`; its lexicographic rank counts
/// the combinations it dominates.
pub fn multiset_rank(config: &ConfigMultiset) -> u64 {
    let m = config.size() as u64;
    let n = (config.q_count() + config.size() - 1) as u64;
    let mut rank = binomial(n, m).expect("rank overflow") - 1;
    for (k, &q) in config.labels().iter().enumerate() {
        let l = (q + k) as u64; // shifted, strictly increasing
        rank -= binomial(n - l, m - k as u64).expect("rank term overflow");
    }
    rank
}

/// Inverse of [`multiset_rank`].
pub fn multiset_unrank(index: u64, q_count: usize, m: usize) -> Result<ConfigMultiset> {
    let count = multiset_count(q_count, m)?;
    if index >= count {
        return Err(Error::IndexOutOfRange {
            index,
            count,
            q: q_count,
            m,
        });
    }
    let n = (q_count + m - 1) as u64;
    let mut rest = index;
    let mut labels = Vec::with_capacity(m);
    let mut prev = 0u64;
    for k in 1..=m {
        // Smallest admissible l_k whose suffix block covers `rest`.
        let mut v = prev + 1;
        loop {
            let block = binomial(n - v, (m - k) as u64)?;
            if rest < block {
                break;
            }
            rest -= block;
            v += 1;
        }
        labels.push((v as usize + 1) - k); // un-shift
        prev = v;
    }
    ConfigMultiset::new(labels, q_count)
}

/// All sorted configurations of size `m` over `Q` groups, in rank order.
pub fn enumerate_configs(q_count: usize, m: usize) -> Vec<ConfigMultiset> {
    let mut out = Vec::new();
    let mut current = vec![1usize; m];
    loop {
        out.push(ConfigMultiset::new(current.clone(), q_count).unwrap());
        // Next multiset in lexicographic order.
        let mut k = m;
        while k > 0 && current[k - 1] == q_count {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        current[k - 1] += 1;
        let v = current[k - 1];
        for slot in current.iter_mut().skip(k) {
            *slot = v;
        }
    }
    out
}

/// Precomputed configuration table for one tensor order.
///
/// Keeps the configurations in rank order together with the quantities the
/// inference loops need over and over: multiplicity factors, the constant
/// flags, and the rank of `sort(q :: w)` for every group `q` and every rank
/// `w` of the next-smaller order (the merge table used by the VE step).
#[derive(Debug, Clone)]
pub struct ConfigTable {
    pub q_count: usize,
    pub m: usize,
    pub configs: Vec<ConfigMultiset>,
    /// 0-based labels per rank (the indexing the sum engine works in).
    pub labels0: Vec<Vec<usize>>,
    pub multiplicity: Vec<f64>,
    pub constant: Vec<bool>,
    /// `merged[q - 1][w_rank]` = rank (at order `m`) of the sorted merge of
    /// label `q` with the order `m-1` configuration of rank `w_rank`.
    /// Empty when `m == 1`.
    pub merged: Vec<Vec<usize>>,
}

impl ConfigTable {
    pub fn new(q_count: usize, m: usize) -> Self {
        let configs = enumerate_configs(q_count, m);
        let labels0 = configs
            .iter()
            .map(|c| c.labels().iter().map(|&q| q - 1).collect())
            .collect();
        let multiplicity = configs.iter().map(|c| c.multiplicity_factor()).collect();
        let constant = configs.iter().map(|c| c.is_constant()).collect();
        let merged = if m >= 2 {
            let smaller = enumerate_configs(q_count, m - 1);
            (1..=q_count)
                .map(|q| {
                    smaller
                        .iter()
                        .map(|w| {
                            let mut labels = w.labels().to_vec();
                            labels.push(q);
                            labels.sort_unstable();
                            let merged_cfg = ConfigMultiset::new(labels, q_count).unwrap();
                            multiset_rank(&merged_cfg) as usize
                        })
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        Self {
            q_count,
            m,
            configs,
            labels0,
            multiplicity,
            constant,
            merged,
        }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// Rank of the constant configuration `(q, ..., q)`.
    pub fn constant_rank(&self, q: usize) -> usize {
        let cfg = ConfigMultiset::new(vec![q; self.m], self.q_count).unwrap();
        multiset_rank(&cfg) as usize
    }
}
