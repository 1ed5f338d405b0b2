//! Model parameters, affiliation submodels, the generative sampler, and
//! exact likelihoods.
//!
//! Connectivity is one fully symmetric tensor per hyperedge size, stored
//! flat in multiset-rank order (see [`crate::simplex`]). The affiliation
//! submodels constrain each tensor to two values: `alpha` on constant
//! configurations, `beta` elsewhere — per size, or shared across sizes.
//!
//! [`HsbmParams::exact_loglik_small`] is the brute-force reference: it sums
//! the complete-data likelihood over every latent assignment, clamp-free, in
//! log space. Everything else clamps probabilities to `[PROB_EPS, 1-PROB_EPS]`
//! before taking logs.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Accumulator;
use crate::hypergraph::Hypergraph;
use crate::simplex::{binomial_f64, multiset_count, ConfigMultiset, ConfigTable};
use crate::PROB_EPS;

/// Connectivity submodel of the per-size tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Submodel {
    /// Unconstrained symmetric tensors.
    Full,
    /// Per-size affiliation: `alpha[m-2]` on constant configurations of size
    /// `m`, `beta[m-2]` on mixed ones.
    AffM { alpha: Vec<f64>, beta: Vec<f64> },
    /// Affiliation shared across sizes.
    Aff { alpha: f64, beta: f64 },
}

/// Which submodel family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubmodelKind {
    Full,
    AffM,
    Aff,
}

impl Submodel {
    pub fn kind(&self) -> SubmodelKind {
        match self {
            Submodel::Full => SubmodelKind::Full,
            Submodel::AffM { .. } => SubmodelKind::AffM,
            Submodel::Aff { .. } => SubmodelKind::Aff,
        }
    }
}

impl std::fmt::Display for SubmodelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SubmodelKind::Full => "full",
            SubmodelKind::AffM => "affm",
            SubmodelKind::Aff => "aff",
        };
        f.write_str(s)
    }
}

/// Latent group assignment, one 1-based group id per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentAssignment {
    z: Vec<usize>,
}

impl LatentAssignment {
    pub fn new(z: Vec<usize>, q: usize) -> Result<Self> {
        if z.iter().any(|&g| g < 1 || g > q) {
            return Err(Error::InvalidConfig(format!("group ids outside 1..={q}")));
        }
        Ok(Self { z })
    }

    pub fn groups(&self) -> &[usize] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn group_counts(&self, q: usize) -> Vec<usize> {
        let mut counts = vec![0usize; q];
        for &g in &self.z {
            counts[g - 1] += 1;
        }
        counts
    }
}

/// HSBM parameters: group proportions and per-size symmetric connectivity
/// tensors, flat in multiset-rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct HsbmParams {
    q: usize,
    m_max: usize,
    pi: Vec<f64>,
    b: Vec<Vec<f64>>,
    submodel: Submodel,
}

/// Expand affiliation values to a flat tensor of order `m`: `alpha` on the
/// `Q` constant configurations, `beta` elsewhere.
pub fn expand_affiliation(alpha: f64, beta: f64, q: usize, m: usize) -> Vec<f64> {
    let table = ConfigTable::new(q, m);
    table
        .constant
        .iter()
        .map(|&is_const| if is_const { alpha } else { beta })
        .collect()
}

fn validate_pi(pi: &[f64]) -> Result<()> {
    if pi.is_empty() {
        return Err(Error::InvalidConfig("pi must be non-empty".into()));
    }
    if pi.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::InvalidConfig("pi entries outside [0,1]".into()));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("pi sums to {total}, not 1")));
    }
    Ok(())
}

fn validate_probs(values: &[f64]) -> Result<()> {
    if values.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::InvalidConfig("probability outside [0,1]".into()));
    }
    Ok(())
}

impl HsbmParams {
    /// Full model from explicit flat tensors (index `m - 2`).
    pub fn full(pi: Vec<f64>, b: Vec<Vec<f64>>) -> Result<Self> {
        validate_pi(&pi)?;
        let q = pi.len();
        let m_max = b.len() + 1;
        if m_max < 2 {
            return Err(Error::InvalidConfig("need tensors for sizes 2..=M".into()));
        }
        for (idx, tensor) in b.iter().enumerate() {
            let m = idx + 2;
            let want = multiset_count(q, m)? as usize;
            if tensor.len() != want {
                return Err(Error::DimensionMismatch(format!(
                    "tensor for m={m} has {} entries, expected {want}",
                    tensor.len()
                )));
            }
            validate_probs(tensor)?;
        }
        Ok(Self {
            q,
            m_max,
            pi,
            b,
            submodel: Submodel::Full,
        })
    }

    /// Per-size affiliation submodel; `alpha[m-2]`, `beta[m-2]` for each size.
    pub fn affiliation_per_size(pi: Vec<f64>, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        validate_pi(&pi)?;
        if alpha.len() != beta.len() || alpha.is_empty() {
            return Err(Error::DimensionMismatch(
                "alpha and beta need one entry per size 2..=M".into(),
            ));
        }
        validate_probs(&alpha)?;
        validate_probs(&beta)?;
        let q = pi.len();
        let b = alpha
            .iter()
            .zip(beta.iter())
            .enumerate()
            .map(|(idx, (&a, &bt))| expand_affiliation(a, bt, q, idx + 2))
            .collect();
        Ok(Self {
            q,
            m_max: alpha.len() + 1,
            pi,
            b,
            submodel: Submodel::AffM { alpha, beta },
        })
    }

    /// Shared affiliation submodel across sizes `2..=m_max`.
    pub fn affiliation(pi: Vec<f64>, alpha: f64, beta: f64, m_max: usize) -> Result<Self> {
        validate_pi(&pi)?;
        validate_probs(&[alpha, beta])?;
        if m_max < 2 {
            return Err(Error::InvalidConfig("m_max must be at least 2".into()));
        }
        let q = pi.len();
        let b = (2..=m_max)
            .map(|m| expand_affiliation(alpha, beta, q, m))
            .collect();
        Ok(Self {
            q,
            m_max,
            pi,
            b,
            submodel: Submodel::Aff { alpha, beta },
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn submodel(&self) -> &Submodel {
        &self.submodel
    }

    /// Flat tensor for size `m` (rank order).
    pub fn tensor(&self, m: usize) -> &[f64] {
        &self.b[m - 2]
    }

    pub fn prob_by_rank(&self, m: usize, rank: usize) -> f64 {
        self.b[m - 2][rank]
    }

    /// Connection probability of an (unordered) group configuration; the
    /// lookup sorts, so any permutation of `config` gives the same value.
    pub fn get_prob(&self, config: &[usize]) -> Result<f64> {
        let m = config.len();
        if !(2..=self.m_max).contains(&m) {
            return Err(Error::InvalidConfig(format!(
                "configuration size {m} outside 2..={}",
                self.m_max
            )));
        }
        let cfg = ConfigMultiset::from_unsorted(config, self.q)?;
        let rank = crate::simplex::multiset_rank(&cfg) as usize;
        Ok(self.b[m - 2][rank])
    }

    /// All free parameters as one vector (`pi` then tensors by size): the
    /// quantity whose max-change drives the VEM stopping rule.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.pi.clone();
        for tensor in &self.b {
            out.extend_from_slice(tensor);
        }
        out
    }

    /// Apply a group relabeling: group `g` becomes `perm[g-1]` (1-based).
    /// Returns parameters with `pi` and tensors permuted accordingly.
    pub fn permute_groups(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.q {
            return Err(Error::DimensionMismatch("permutation length != Q".into()));
        }
        let mut seen = vec![false; self.q];
        for &p in perm {
            if p < 1 || p > self.q || seen[p - 1] {
                return Err(Error::InvalidConfig("not a permutation".into()));
            }
            seen[p - 1] = true;
        }
        let mut pi = vec![0.0; self.q];
        for g in 0..self.q {
            pi[perm[g] - 1] = self.pi[g];
        }
        let mut b = Vec::with_capacity(self.b.len());
        for (idx, tensor) in self.b.iter().enumerate() {
            let m = idx + 2;
            let table = ConfigTable::new(self.q, m);
            let mut out = vec![0.0; tensor.len()];
            for (rank, cfg) in table.configs.iter().enumerate() {
                let mapped: Vec<usize> = cfg.labels().iter().map(|&g| perm[g - 1]).collect();
                let mapped_cfg = ConfigMultiset::from_unsorted(&mapped, self.q)?;
                out[crate::simplex::multiset_rank(&mapped_cfg) as usize] = tensor[rank];
            }
            b.push(out);
        }
        let submodel = self.submodel.clone();
        Ok(Self {
            q: self.q,
            m_max: self.m_max,
            pi,
            b,
            submodel,
        })
    }

    /// Sample a hypergraph and its latent assignment. One seeded stream:
    /// groups first, then every `m`-subset in lexicographic order for
    /// `m = 2..=M`, so output is bit-reproducible given the seed.
    pub fn sample(&self, n: usize, seed: u64) -> (Hypergraph, LatentAssignment) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cum = Vec::with_capacity(self.q);
        let mut acc = 0.0;
        for &p in &self.pi {
            acc += p;
            cum.push(acc);
        }
        let z: Vec<usize> = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                cum.iter().position(|&c| u < c).unwrap_or(self.q - 1) + 1
            })
            .collect();
        let mut edges: Vec<Vec<usize>> = Vec::new();
        for m in 2..=self.m_max.min(n) {
            let mut subset: Vec<usize> = (0..m).collect();
            loop {
                let labels: Vec<usize> = subset.iter().map(|&i| z[i]).collect();
                let cfg = ConfigMultiset::from_unsorted(&labels, self.q).unwrap();
                let rank = crate::simplex::multiset_rank(&cfg) as usize;
                let p = self.b[m - 2][rank];
                let u: f64 = rng.random();
                if u < p {
                    edges.push(subset.clone());
                }
                // Advance to the next m-subset in lexicographic order.
                let mut k = m;
                while k > 0 && subset[k - 1] == n - m + k - 1 {
                    k -= 1;
                }
                if k == 0 {
                    break;
                }
                subset[k - 1] += 1;
                for j in k..m {
                    subset[j] = subset[j - 1] + 1;
                }
            }
        }
        let h = Hypergraph::new(n, edges)
            .expect("sampled subsets are canonical")
            .with_m_max(self.m_max);
        (h, LatentAssignment { z })
    }

    /// Complete-data log-likelihood `log P(Y, Z)` at a hard assignment, with
    /// probabilities clamped for numerical safety. Cost is
    /// `O(#configs + #edges)` per size: absent-edge mass is counted through
    /// group counts rather than enumerated.
    pub fn complete_loglik(&self, h: &Hypergraph, z: &LatentAssignment) -> f64 {
        self.complete_loglik_inner(h, z, true)
    }

    fn complete_loglik_inner(&self, h: &Hypergraph, z: &LatentAssignment, clamp: bool) -> f64 {
        assert_eq!(z.len(), h.n(), "assignment length must match node count");
        assert!(
            h.m_max() <= self.m_max,
            "hypergraph has sizes beyond the model's M"
        );
        // Bernoulli parameters are clamped two-sided; pi only needs the
        // log-0 guard from below (pi = 1 is a legitimate exact value).
        let log = |p: f64| -> f64 {
            if clamp {
                p.clamp(PROB_EPS, 1.0 - PROB_EPS).ln()
            } else {
                p.ln()
            }
        };
        let log_pi = |p: f64| -> f64 {
            if clamp {
                p.max(PROB_EPS).ln()
            } else {
                p.ln()
            }
        };
        let mut acc = Accumulator::new();
        for &g in z.groups() {
            acc.add(log_pi(self.pi[g - 1]));
        }
        let counts = z.group_counts(self.q);
        for m in 2..=self.m_max {
            let table = ConfigTable::new(self.q, m);
            // Absent-edge bulk: the number of m-subsets realizing a
            // configuration is a product of per-group binomials.
            for (rank, cfg) in table.configs.iter().enumerate() {
                let mut subsets = 1.0;
                let labels = cfg.labels();
                let mut k = 0;
                while k < labels.len() {
                    let g = labels[k];
                    let mut mult = 0;
                    while k < labels.len() && labels[k] == g {
                        mult += 1;
                        k += 1;
                    }
                    subsets *= binomial_f64(counts[g - 1], mult);
                }
                if subsets > 0.0 {
                    acc.add(subsets * log(1.0 - self.b[m - 2][rank]));
                }
            }
            // Present edges swap log(1-B) for log B.
            for e in h.edges().iter().filter(|e| e.len() == m) {
                let labels: Vec<usize> = e.iter().map(|&i| z.groups()[i]).collect();
                let cfg = ConfigMultiset::from_unsorted(&labels, self.q).unwrap();
                let rank = crate::simplex::multiset_rank(&cfg) as usize;
                let b = self.b[m - 2][rank];
                acc.add(log(b) - log(1.0 - b));
            }
        }
        acc.total()
    }

    /// Exact marginal log-likelihood by brute force over all `Q^n` latent
    /// assignments, clamp-free, with max-shifted log-sum-exp. Guarded to
    /// `Q^n <= 1e7`.
    pub fn exact_loglik_small(&self, h: &Hypergraph) -> Result<f64> {
        let n = h.n();
        let size = (self.q as f64).powi(n as i32);
        const LIMIT: f64 = 1e7;
        if size > LIMIT {
            return Err(Error::TooLarge { size, limit: LIMIT });
        }
        let mut z = vec![1usize; n];
        let mut max_seen = f64::NEG_INFINITY;
        let mut scaled_sum = 0.0f64;
        loop {
            let assignment = LatentAssignment { z: z.clone() };
            let lp = self.complete_loglik_inner(h, &assignment, false);
            if lp > f64::NEG_INFINITY {
                if lp > max_seen {
                    scaled_sum = scaled_sum * (max_seen - lp).exp() + 1.0;
                    max_seen = lp;
                } else {
                    scaled_sum += (lp - max_seen).exp();
                }
            }
            // Odometer over assignments.
            let mut k = n;
            while k > 0 && z[k - 1] == self.q {
                z[k - 1] = 1;
                k -= 1;
            }
            if k == 0 {
                break;
            }
            z[k - 1] += 1;
        }
        if max_seen == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(max_seen + scaled_sum.ln())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut tensors = BTreeMap::new();
        for (idx, tensor) in self.b.iter().enumerate() {
            let m = idx + 2;
            let table = ConfigTable::new(self.q, m);
            let configs: Vec<Vec<usize>> =
                table.configs.iter().map(|c| c.labels().to_vec()).collect();
            tensors.insert(
                m.to_string(),
                serde_json::json!({ "configs": configs, "values": tensor }),
            );
        }
        serde_json::json!({
            "Q": self.q,
            "M": self.m_max,
            "pi": self.pi,
            "submodel": self.submodel,
            "B": tensors,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let q = value["Q"]
            .as_u64()
            .ok_or_else(|| Error::Invalid("missing Q".into()))? as usize;
        let m_max = value["M"]
            .as_u64()
            .ok_or_else(|| Error::Invalid("missing M".into()))? as usize;
        let pi: Vec<f64> = serde_json::from_value(value["pi"].clone())?;
        let submodel: Submodel = serde_json::from_value(value["submodel"].clone())?;
        let mut b = Vec::with_capacity(m_max.saturating_sub(1));
        for m in 2..=m_max {
            let entry = &value["B"][m.to_string()];
            let configs: Vec<Vec<usize>> = serde_json::from_value(entry["configs"].clone())?;
            let values: Vec<f64> = serde_json::from_value(entry["values"].clone())?;
            let table = ConfigTable::new(q, m);
            let want: Vec<Vec<usize>> =
                table.configs.iter().map(|c| c.labels().to_vec()).collect();
            if configs != want {
                return Err(Error::Invalid(format!(
                    "tensor configs for m={m} are not in rank order"
                )));
            }
            if values.len() != want.len() {
                return Err(Error::DimensionMismatch(format!(
                    "tensor for m={m} has {} values, expected {}",
                    values.len(),
                    want.len()
                )));
            }
            b.push(values);
        }
        validate_pi(&pi)?;
        let mut params = Self::full(pi, b)?;
        params.submodel = submodel;
        Ok(params)
    }
}
