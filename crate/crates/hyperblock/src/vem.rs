//! Variational EM: ELBO evaluation, the VE fixed point, closed-form M steps
//! (full and affiliation), initialization orchestration and stopping logic.
//!
//! The factorized variational family puts independent categorical
//! distributions `tau_i` on the latent groups. One outer iteration runs the
//! M step (parameters from the current `tau`) and then iterates the VE fixed
//! point (Jacobi sweeps: every row updated from the previous snapshot, which
//! parallelizes and needs no sweep order). The fixed point comes with no
//! existence or uniqueness guarantee, so the inner loop monitors the ELBO
//! and returns the best iterate seen, the incoming state included — the
//! outer ELBO trace is therefore non-decreasing. Work per sweep is linear
//! in the number of nodes and observed hyperedges: the absent-hyperedge
//! bulk goes through the leave-one-out tuple sums of [`crate::sums`]
//! instead of any subset enumeration.
//!
//! Per-subset weighting: each unordered node subset contributes once per
//! *ordered* group assignment (`Q^m` terms), equivalently the ordered-tuple /
//! sorted-configuration sums divided by the multiplicity factor. This is the
//! convention under which the ELBO provably lower-bounds the marginal
//! log-likelihood; the tests certify it against
//! [`HsbmParams::exact_loglik_small`].
//!
//! Group-indexed reductions go through [`crate::exec::stable_sum`], so
//! relabeling the groups of an initializer permutes every downstream
//! quantity exactly, with bit-identical ELBOs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, stable_sum};
use crate::hypergraph::Hypergraph;
use crate::metrics::IclScore;
use crate::model::{HsbmParams, SubmodelKind};
use crate::simplex::ConfigTable;
use crate::sums::{self, PowerSums, TauView, TupleSumTable};
use crate::{PROB_EPS, TAU_FLOOR};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Row-stochastic responsibility matrix (`n x Q`, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    data: Vec<f64>,
    n: usize,
    q: usize,
}

impl VariationalState {
    pub fn new(data: Vec<f64>, n: usize, q: usize) -> Result<Self> {
        if data.len() != n * q {
            return Err(Error::DimensionMismatch(format!(
                "tau has {} entries, expected {n} x {q}",
                data.len()
            )));
        }
        for i in 0..n {
            let row = &data[i * q..(i + 1) * q];
            if row.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("negative tau in row {i}")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("tau row {i} sums to {total}")));
            }
        }
        Ok(Self { data, n, q })
    }

    pub(crate) fn from_raw(data: Vec<f64>, n: usize, q: usize) -> Self {
        debug_assert_eq!(data.len(), n * q);
        Self { data, n, q }
    }

    pub fn uniform(n: usize, q: usize) -> Self {
        Self::from_raw(vec![1.0 / q as f64; n * q], n, q)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn view(&self) -> TauView<'_> {
        TauView::new(&self.data, self.n, self.q)
    }

    /// Hard assignment per node (1-based), ties toward the lowest group.
    pub fn hard_labels(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for q in 1..self.q {
                    if row[q] > row[best] {
                        best = q;
                    }
                }
                best + 1
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Relabel groups: column `g` moves to `perm[g-1]` (1-based).
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.q {
            return Err(Error::DimensionMismatch("permutation length != Q".into()));
        }
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.n {
            for g in 0..self.q {
                data[i * self.q + (perm[g] - 1)] = self.data[i * self.q + g];
            }
        }
        Ok(Self::from_raw(data, self.n, self.q))
    }
}

/// Floor a row at `TAU_FLOOR` and renormalize with order-stable summation.
pub(crate) fn floor_row(row: &mut [f64], scratch: &mut Vec<f64>) {
    for v in row.iter_mut() {
        if !v.is_finite() || *v < TAU_FLOOR {
            *v = TAU_FLOOR;
        }
    }
    scratch.clear();
    scratch.extend_from_slice(row);
    let total = stable_sum(scratch);
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Initialization strategy for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitStrategy {
    Random,
    /// Hypergraph Laplacian embedding plus soft k-means.
    #[serde(rename = "spectral")]
    SoftSpectral,
    /// Absolute spectral clustering of the size-2 slice.
    #[serde(rename = "absolute")]
    AbsoluteSpectral,
    /// Run all three, keep the best ELBO.
    All,
}

impl std::fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            InitStrategy::Random => "random",
            InitStrategy::SoftSpectral => "spectral",
            InitStrategy::AbsoluteSpectral => "absolute",
            InitStrategy::All => "all",
        };
        f.write_str(s)
    }
}

/// Fit hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    /// Tolerance for the fixed point and the outer stopping rule.
    pub epsilon: f64,
    /// Cap on fixed-point iterations per VE step.
    pub u_max: usize,
    /// Cap on outer VEM iterations.
    pub t_max: usize,
    pub init: InitStrategy,
    pub submodel: SubmodelKind,
    pub seed: u64,
    pub kmeans_restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            u_max: 50,
            t_max: 50,
            init: InitStrategy::Random,
            submodel: SubmodelKind::Full,
            seed: 0,
            kmeans_restarts: 100,
        }
    }
}

/// Result of one VEM run.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: HsbmParams,
    pub tau: VariationalState,
    /// `argmax_q tau_iq`, 1-based, ties toward the lowest group.
    pub labels: Vec<usize>,
    /// ELBO after each outer iteration; the last entry is
    /// `elbo(params, tau)` of the returned pair.
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
    pub reason: String,
    pub icl: Option<IclScore>,
    pub seed: u64,
    pub init: InitStrategy,
    /// Degenerate tensor entries flagged by the last M step (empty effective
    /// configurations pinned at the probability floor).
    pub degenerate: usize,
}

/// Outcome of the fixed-point VE step.
#[derive(Debug, Clone)]
pub struct VeOutcome {
    pub state: VariationalState,
    pub iterations: usize,
    pub converged: bool,
    /// How far the first sweep moved `tau` — the quantity the outer stopping
    /// rule inspects.
    pub first_delta: f64,
    /// `elbo(params, state)` — the monitored objective at the returned state.
    pub elbo: f64,
}

/// M-step output: optimal parameters plus the count of degenerate entries.
#[derive(Debug, Clone)]
pub struct MStepResult {
    pub params: HsbmParams,
    pub degenerate: usize,
}

/// Precomputed per-fit structures shared by the inference loops.
struct Workspace {
    q: usize,
    m_max: usize,
    /// Configuration tables for orders `1..=m_max` (index `m - 1`).
    tables: Vec<ConfigTable>,
    incidence: Vec<Vec<usize>>,
}

impl Workspace {
    fn new(h: &Hypergraph, q: usize, m_max: usize) -> Self {
        let tables = (1..=m_max).map(|m| ConfigTable::new(q, m)).collect();
        Self {
            q,
            m_max,
            tables,
            incidence: h.incidence_lists(),
        }
    }

    fn table(&self, m: usize) -> &ConfigTable {
        &self.tables[m - 1]
    }
}

fn log_tensors(params: &HsbmParams) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut log_b = Vec::new();
    let mut log_1mb = Vec::new();
    for m in 2..=params.m_max() {
        let clamped: Vec<f64> = params
            .tensor(m)
            .iter()
            .map(|&b| b.clamp(PROB_EPS, 1.0 - PROB_EPS))
            .collect();
        log_b.push(clamped.iter().map(|&b| b.ln()).collect());
        log_1mb.push(clamped.iter().map(|&b| (1.0 - b).ln()).collect());
    }
    (log_b, log_1mb)
}

/// Evidence lower bound `J(theta, tau)`: the entropy-regularized expected
/// complete log-likelihood, each (node subset, ordered group assignment)
/// pair weighted once. Sparse evaluation: observed-edge corrections plus the
/// all-subsets `log(1-B)` bulk via tuple sums.
pub fn elbo(params: &HsbmParams, tau: &VariationalState, h: &Hypergraph) -> f64 {
    let ws = Workspace::new(h, tau.q(), params.m_max());
    elbo_with(&ws, params, tau, h)
}

fn elbo_with(ws: &Workspace, params: &HsbmParams, tau: &VariationalState, h: &Hypergraph) -> f64 {
    assert_eq!(params.q(), tau.q());
    assert!(h.m_max() <= params.m_max());
    let (log_b, log_1mb) = log_tensors(params);
    let q = tau.q();
    let pi_log: Vec<f64> = params.pi().iter().map(|&p| p.max(PROB_EPS).ln()).collect();

    // Prior + entropy term, rows reduced stably.
    let prior_entropy = exec::chunked_reduce(
        tau.n(),
        0.0,
        |range| {
            let mut scratch = Vec::with_capacity(q);
            let mut acc = exec::Accumulator::new();
            for i in range {
                scratch.clear();
                for (g, &t) in tau.row(i).iter().enumerate() {
                    if t > 0.0 {
                        scratch.push(t * (pi_log[g] - t.ln()));
                    }
                }
                acc.add(stable_sum(&mut scratch));
            }
            acc.total()
        },
        |a, b| a + b,
    );

    let mut total = prior_entropy;
    for m in 2..=params.m_max() {
        let table = ws.table(m);
        // Bulk: every subset contributes log(1-B) with its total assignment
        // weight T_c / mult(c).
        let sums_table = TupleSumTable::compute(tau.view(), table).expect("m <= 4 by contract");
        let mut bulk_terms: Vec<f64> = (0..table.len())
            .map(|r| sums_table.value(r) / table.multiplicity[r] * log_1mb[m - 2][r])
            .collect();
        total += stable_sum(&mut bulk_terms);
        // Observed edges upgrade log(1-B) to log B.
        total += exec::chunked_reduce(
            h.edge_count(),
            0.0,
            |range| {
                let mut power = PowerSums::zeroed(q, m);
                let mut weights: Vec<f64> = Vec::with_capacity(table.len());
                let mut terms: Vec<f64> = Vec::with_capacity(table.len());
                let mut acc = exec::Accumulator::new();
                for e_idx in range {
                    let e = &h.edges()[e_idx];
                    if e.len() != m {
                        continue;
                    }
                    power.reset();
                    for &i in e {
                        power.accumulate(tau.row(i));
                    }
                    sums::assignment_weights_into(&power, table, &mut weights);
                    terms.clear();
                    terms.extend(
                        weights
                            .iter()
                            .enumerate()
                            .map(|(r, &w)| w * (log_b[m - 2][r] - log_1mb[m - 2][r])),
                    );
                    acc.add(stable_sum(&mut terms));
                }
                acc.total()
            },
            |a, b| a + b,
        );
    }
    total
}

/// Dense reference ELBO: enumerates every subset and every ordered group
/// assignment. Exponential cost; the oracle the sparse path is checked
/// against on small instances.
pub fn elbo_naive(params: &HsbmParams, tau: &VariationalState, h: &Hypergraph) -> f64 {
    assert_eq!(params.q(), tau.q());
    let q = tau.q();
    let n = tau.n();
    let pi_log: Vec<f64> = params.pi().iter().map(|&p| p.max(PROB_EPS).ln()).collect();
    let mut total = 0.0;
    for i in 0..n {
        for (g, &t) in tau.row(i).iter().enumerate() {
            if t > 0.0 {
                total += t * (pi_log[g] - t.ln());
            }
        }
    }
    for m in 2..=params.m_max() {
        if n < m {
            continue;
        }
        let mut subset: Vec<usize> = (0..m).collect();
        loop {
            let y = h.contains_edge(&subset);
            let mut assignment = vec![0usize; m];
            loop {
                let weight: f64 = subset
                    .iter()
                    .zip(assignment.iter())
                    .map(|(&i, &g)| tau.row(i)[g])
                    .product();
                let labels: Vec<usize> = assignment.iter().map(|&g| g + 1).collect();
                let b = params
                    .get_prob(&labels)
                    .unwrap()
                    .clamp(PROB_EPS, 1.0 - PROB_EPS);
                total += weight * if y { b.ln() } else { (1.0 - b).ln() };
                let mut k = m;
                while k > 0 && assignment[k - 1] == q - 1 {
                    assignment[k - 1] = 0;
                    k -= 1;
                }
                if k == 0 {
                    break;
                }
                assignment[k - 1] += 1;
            }
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
    total
}

/// One Jacobi sweep of the fixed-point update: every row of `tau` recomputed
/// from the previous snapshot, log-domain, row-normalized by max shift.
fn ve_update(
    ws: &Workspace,
    params: &HsbmParams,
    tau: &VariationalState,
    h: &Hypergraph,
) -> VariationalState {
    let q = ws.q;
    let n = tau.n();
    let (log_b, log_1mb) = log_tensors(params);
    let pi_log: Vec<f64> = params.pi().iter().map(|&p| p.max(PROB_EPS).ln()).collect();
    // Tuple-sum tables over the current snapshot for tuple orders 1..M
    // (the all-subsets bulk), queried leave-one-out by deflation.
    let loo_tables: Vec<TupleSumTable> = (1..ws.m_max)
        .map(|order| TupleSumTable::compute(tau.view(), ws.table(order)).expect("order <= 3"))
        .collect();

    let rows = exec::map_collect(n, |i| {
        let row_i = tau.row(i);
        let mut out = vec![0.0f64; q];
        // Per-order leave-one-out assignment masses, shared across q.
        let mut bulk: Vec<Vec<f64>> = Vec::with_capacity(ws.m_max - 1);
        for order in 1..ws.m_max {
            let table = ws.table(order);
            let loo = &loo_tables[order - 1];
            bulk.push(
                (0..table.len())
                    .map(|r| loo.leave_one_out(r, row_i) / table.multiplicity[r])
                    .collect(),
            );
        }
        // Per incident edge: assignment weights of the edge minus node i.
        let mut edge_weights: Vec<(usize, Vec<f64>)> = Vec::with_capacity(ws.incidence[i].len());
        for &e_idx in &ws.incidence[i] {
            let e = &h.edges()[e_idx];
            let order = e.len() - 1;
            let table = ws.table(order);
            let mut power = PowerSums::zeroed(q, order);
            for &j in e.iter().filter(|&&j| j != i) {
                power.accumulate(tau.row(j));
            }
            let mut w = Vec::with_capacity(table.len());
            sums::assignment_weights_into(&power, table, &mut w);
            edge_weights.push((e.len(), w));
        }
        let mut terms: Vec<f64> = Vec::new();
        for g in 0..q {
            terms.clear();
            for order in 1..ws.m_max {
                let merged = &ws.table(order + 1).merged[g];
                for (r, &mass) in bulk[order - 1].iter().enumerate() {
                    terms.push(mass * log_1mb[order - 1][merged[r]]);
                }
            }
            for (size, w) in &edge_weights {
                let merged = &ws.table(*size).merged[g];
                for (r, &weight) in w.iter().enumerate() {
                    let rank = merged[r];
                    terms.push(weight * (log_b[size - 2][rank] - log_1mb[size - 2][rank]));
                }
            }
            out[g] = pi_log[g] + stable_sum(&mut terms);
        }
        // Max-shifted exponentiation, then floor and renormalize.
        let bmax = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for v in out.iter_mut() {
            *v = (*v - bmax).exp();
        }
        let mut scratch = out.clone();
        let total = stable_sum(&mut scratch);
        for v in out.iter_mut() {
            *v /= total;
        }
        floor_row(&mut out, &mut scratch);
        out
    });
    let mut data = Vec::with_capacity(n * q);
    for row in rows {
        data.extend_from_slice(&row);
    }
    VariationalState::from_raw(data, n, q)
}

/// Iterate the VE fixed point from `tau0` until a sweep moves no entry by
/// more than `cfg.epsilon`, or `cfg.u_max` sweeps. Non-convergence is
/// reported, not fatal: the fixed point has no existence or uniqueness
/// guarantee.
///
/// The loop is monitored: the ELBO is evaluated at every iterate (including
/// `tau0` as the baseline) and the best one is returned, so a VE step never
/// hands back responsibilities worse than it received. Convergence is
/// claimed only when the returned iterate is itself epsilon-stationary —
/// the sweep did converge and the best iterate is the final one or its
/// immediate predecessor (whose image moved by at most epsilon).
pub fn ve_fixed_point(
    params: &HsbmParams,
    tau0: &VariationalState,
    h: &Hypergraph,
    cfg: &FitConfig,
) -> VeOutcome {
    let ws = Workspace::new(h, tau0.q(), params.m_max());
    ve_fixed_point_with(&ws, params, tau0, h, cfg)
}

fn ve_fixed_point_with(
    ws: &Workspace,
    params: &HsbmParams,
    tau0: &VariationalState,
    h: &Hypergraph,
    cfg: &FitConfig,
) -> VeOutcome {
    let mut current = tau0.clone();
    let mut best = tau0.clone();
    let mut best_elbo = elbo_with(ws, params, tau0, h);
    let mut best_index = 0usize;
    let mut first_delta = 0.0;
    let mut iterations = 0;
    let mut stationary_at = None;
    for u in 1..=cfg.u_max {
        let next = ve_update(ws, params, &current, h);
        let delta = next.max_abs_diff(&current);
        if u == 1 {
            first_delta = delta;
        }
        current = next;
        iterations = u;
        let j = elbo_with(ws, params, &current, h);
        if j >= best_elbo {
            best_elbo = j;
            best = current.clone();
            best_index = u;
        }
        if delta <= cfg.epsilon {
            // Both the final iterate and its predecessor are
            // epsilon-stationary (the predecessor's image moved <= epsilon).
            stationary_at = Some(u);
            break;
        }
    }
    let converged = matches!(stationary_at, Some(u) if best_index + 1 >= u);
    VeOutcome {
        state: best,
        iterations,
        converged,
        first_delta,
        elbo: best_elbo,
    }
}

/// Per-size masses driving the M step: observed (edge-weighted) and total
/// assignment weight per configuration rank.
struct MStepMasses {
    observed: Vec<Vec<f64>>,
    total: Vec<Vec<f64>>,
}

fn m_step_masses(ws: &Workspace, tau: &VariationalState, h: &Hypergraph) -> MStepMasses {
    let q = ws.q;
    let mut observed = Vec::with_capacity(ws.m_max - 1);
    let mut total = Vec::with_capacity(ws.m_max - 1);
    for m in 2..=ws.m_max {
        let table = ws.table(m);
        let sums_table = TupleSumTable::compute(tau.view(), table).expect("m <= 4 by contract");
        let denom: Vec<f64> = (0..table.len())
            .map(|r| sums_table.value(r) / table.multiplicity[r])
            .collect();
        let numer = exec::chunked_reduce(
            h.edge_count(),
            vec![0.0; table.len()],
            |range| {
                let mut acc = vec![0.0; table.len()];
                let mut power = PowerSums::zeroed(q, m);
                let mut weights: Vec<f64> = Vec::with_capacity(table.len());
                for e_idx in range {
                    let e = &h.edges()[e_idx];
                    if e.len() != m {
                        continue;
                    }
                    power.reset();
                    for &i in e {
                        power.accumulate(tau.row(i));
                    }
                    sums::assignment_weights_into(&power, table, &mut weights);
                    for (a, &w) in acc.iter_mut().zip(weights.iter()) {
                        *a += w;
                    }
                }
                acc
            },
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b.iter()) {
                    *x += *y;
                }
                a
            },
        );
        observed.push(numer);
        total.push(denom);
    }
    MStepMasses { observed, total }
}

fn pi_estimate(tau: &VariationalState) -> Vec<f64> {
    let n = tau.n();
    (0..tau.q())
        .map(|g| exec::chunked_sum(n, |i| tau.row(i)[g]) / n as f64)
        .collect()
}

const DENOM_FLOOR: f64 = 1e-300;

/// Closed-form M step of the full model: `pi` from column means, each tensor
/// entry the ratio of observed to total assignment mass, clamped to
/// `[PROB_EPS, 1-PROB_EPS]`. Empty effective configurations (denominator
/// below 1e-300) are pinned at the floor and counted as degenerate.
pub fn m_step_full(tau: &VariationalState, h: &Hypergraph) -> MStepResult {
    let ws = Workspace::new(h, tau.q(), h.m_max());
    m_step_full_with(&ws, tau, h)
}

fn m_step_full_with(ws: &Workspace, tau: &VariationalState, h: &Hypergraph) -> MStepResult {
    let masses = m_step_masses(ws, tau, h);
    let mut degenerate = 0usize;
    let mut tensors = Vec::with_capacity(ws.m_max - 1);
    for m in 2..=ws.m_max {
        let numer = &masses.observed[m - 2];
        let denom = &masses.total[m - 2];
        let tensor: Vec<f64> = numer
            .iter()
            .zip(denom.iter())
            .map(|(&num, &den)| {
                if den < DENOM_FLOOR {
                    degenerate += 1;
                    PROB_EPS
                } else {
                    (num / den).clamp(PROB_EPS, 1.0 - PROB_EPS)
                }
            })
            .collect();
        tensors.push(tensor);
    }
    let params = HsbmParams::full(pi_estimate(tau), tensors).expect("m-step output is valid");
    MStepResult { params, degenerate }
}

/// Closed-form M step under the affiliation submodels: alpha pools the
/// constant configurations, beta the mixed ones; the shared variant pools
/// across sizes as well.
pub fn m_step_affiliation(
    tau: &VariationalState,
    h: &Hypergraph,
    variant: SubmodelKind,
) -> MStepResult {
    let ws = Workspace::new(h, tau.q(), h.m_max());
    m_step_affiliation_with(&ws, tau, h, variant)
}

fn m_step_affiliation_with(
    ws: &Workspace,
    tau: &VariationalState,
    h: &Hypergraph,
    variant: SubmodelKind,
) -> MStepResult {
    assert!(matches!(variant, SubmodelKind::AffM | SubmodelKind::Aff));
    let masses = m_step_masses(ws, tau, h);
    let mut degenerate = 0usize;
    // Per-size pooled masses: (alpha_num, alpha_den, beta_num, beta_den).
    let mut pooled = Vec::with_capacity(ws.m_max - 1);
    for m in 2..=ws.m_max {
        let table = ws.table(m);
        let mut a_num = Vec::new();
        let mut a_den = Vec::new();
        let mut b_num = Vec::new();
        let mut b_den = Vec::new();
        for r in 0..table.len() {
            if table.constant[r] {
                a_num.push(masses.observed[m - 2][r]);
                a_den.push(masses.total[m - 2][r]);
            } else {
                b_num.push(masses.observed[m - 2][r]);
                b_den.push(masses.total[m - 2][r]);
            }
        }
        pooled.push((
            stable_sum(&mut a_num),
            stable_sum(&mut a_den),
            stable_sum(&mut b_num),
            stable_sum(&mut b_den),
        ));
    }
    let ratio = |num: f64, den: f64, degenerate: &mut usize| -> f64 {
        if den < DENOM_FLOOR {
            *degenerate += 1;
            PROB_EPS
        } else {
            (num / den).clamp(PROB_EPS, 1.0 - PROB_EPS)
        }
    };
    let pi = pi_estimate(tau);
    let params = match variant {
        SubmodelKind::AffM => {
            let mut alpha = Vec::with_capacity(pooled.len());
            let mut beta = Vec::with_capacity(pooled.len());
            for &(an, ad, bn, bd) in &pooled {
                alpha.push(ratio(an, ad, &mut degenerate));
                beta.push(ratio(bn, bd, &mut degenerate));
            }
            HsbmParams::affiliation_per_size(pi, alpha, beta).expect("m-step output is valid")
        }
        SubmodelKind::Aff => {
            let an: f64 = pooled.iter().map(|p| p.0).sum();
            let ad: f64 = pooled.iter().map(|p| p.1).sum();
            let bn: f64 = pooled.iter().map(|p| p.2).sum();
            let bd: f64 = pooled.iter().map(|p| p.3).sum();
            let alpha = ratio(an, ad, &mut degenerate);
            let beta = ratio(bn, bd, &mut degenerate);
            HsbmParams::affiliation(pi, alpha, beta, ws.m_max).expect("m-step output is valid")
        }
        SubmodelKind::Full => unreachable!(),
    };
    MStepResult { params, degenerate }
}

fn m_step_dispatch(
    ws: &Workspace,
    tau: &VariationalState,
    h: &Hypergraph,
    kind: SubmodelKind,
) -> MStepResult {
    match kind {
        SubmodelKind::Full => m_step_full_with(ws, tau, h),
        SubmodelKind::AffM | SubmodelKind::Aff => m_step_affiliation_with(ws, tau, h, kind),
    }
}

/// Random initializer: rows drawn uniformly from `(0,1)` and normalized.
pub fn init_random(n: usize, q: usize, seed: u64) -> VariationalState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; n * q];
    for i in 0..n {
        let row = &mut data[i * q..(i + 1) * q];
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = rng.random::<f64>();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    VariationalState::from_raw(data, n, q)
}

/// Run the VEM alternation from an explicit initial `tau`. Starts with an M
/// step (initializers only provide responsibilities); stops when the
/// relative ELBO change, the parameter change, and the first VE sweep
/// movement all fall below `epsilon`, or after `t_max` outer iterations.
pub fn fit_from_initial(
    h: &Hypergraph,
    q: usize,
    tau0: VariationalState,
    cfg: &FitConfig,
    init: InitStrategy,
) -> Result<FitResult> {
    if q < 1 {
        return Err(Error::InvalidConfig("Q must be at least 1".into()));
    }
    let ws = Workspace::new(h, q, h.m_max());
    let mut tau = tau0;
    let mut elbo_trace = Vec::new();
    let mut prev_theta: Option<Vec<f64>> = None;
    let mut prev_elbo: Option<f64> = None;
    let mut converged = false;
    let mut reason = String::from("max iterations reached");
    let mut params = None;
    let mut degenerate = 0usize;
    for _t in 1..=cfg.t_max {
        let m_step = m_step_dispatch(&ws, &tau, h, cfg.submodel);
        degenerate = m_step.degenerate;
        let theta = m_step.params.flatten();
        let ve = ve_fixed_point_with(&ws, &m_step.params, &tau, h, cfg);
        tau = ve.state;
        // The monitored VE step never returns responsibilities worse than it
        // received, and the M step is an exact maximizer, so this trace is
        // non-decreasing.
        let j = ve.elbo;
        elbo_trace.push(j);
        params = Some(m_step.params);
        if let (Some(pj), Some(pt)) = (prev_elbo, prev_theta.as_ref()) {
            let rel = (pj - j).abs() / j.abs().max(f64::MIN_POSITIVE);
            let dtheta = theta
                .iter()
                .zip(pt.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if rel <= cfg.epsilon && dtheta <= cfg.epsilon && ve.first_delta <= cfg.epsilon {
                converged = true;
                reason = String::from("converged");
                break;
            }
        }
        prev_elbo = Some(j);
        prev_theta = Some(theta);
    }
    let params = params.expect("t_max >= 1 guarantees one iteration");
    let labels = tau.hard_labels();
    Ok(FitResult {
        params,
        labels,
        elbo_trace,
        converged,
        reason,
        icl: None,
        seed: cfg.seed,
        init,
        degenerate,
        tau,
    })
}

fn initial_state(
    h: &Hypergraph,
    q: usize,
    cfg: &FitConfig,
    strategy: InitStrategy,
) -> Result<VariationalState> {
    match strategy {
        InitStrategy::Random => Ok(init_random(h.n(), q, cfg.seed)),
        InitStrategy::SoftSpectral => {
            crate::spectral::soft_spectral_init(h, q, cfg.kmeans_restarts, cfg.seed)
        }
        InitStrategy::AbsoluteSpectral => {
            crate::spectral::absolute_spectral_init(h, q, cfg.kmeans_restarts, cfg.seed)
        }
        InitStrategy::All => unreachable!("expanded by fit"),
    }
}

/// Fit a `Q`-group model. With `init = All`, all three initializations run
/// and the best final ELBO wins (exact ties go to the later strategy in the
/// order random, spectral, absolute).
pub fn fit(h: &Hypergraph, q: usize, cfg: &FitConfig) -> Result<FitResult> {
    let strategies: &[InitStrategy] = match cfg.init {
        InitStrategy::All => &[
            InitStrategy::Random,
            InitStrategy::SoftSpectral,
            InitStrategy::AbsoluteSpectral,
        ],
        other => return fit_single(h, q, cfg, other),
    };
    let mut best: Option<FitResult> = None;
    for &strategy in strategies {
        let candidate = fit_single(h, q, cfg, strategy)?;
        let replace = match &best {
            None => true,
            Some(current) => candidate.final_elbo() >= current.final_elbo(),
        };
        if replace {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one strategy"))
}

fn fit_single(
    h: &Hypergraph,
    q: usize,
    cfg: &FitConfig,
    strategy: InitStrategy,
) -> Result<FitResult> {
    let tau0 = initial_state(h, q, cfg, strategy)?;
    fit_from_initial(h, q, tau0, cfg, strategy)
}

impl FitResult {
    pub fn final_elbo(&self) -> f64 {
        *self.elbo_trace.last().expect("trace is never empty")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "Q": self.params.q(),
            "M": self.params.m_max(),
            "submodel": self.params.submodel(),
            "pi": self.params.pi(),
            "B": self.params.to_json()["B"],
            "n": self.tau.n(),
            "tau": self.tau.data(),
            "labels": self.labels,
            "elbo_trace": self.elbo_trace,
            "icl": self.icl,
            "converged": self.converged,
            "reason": self.reason,
            "seed": self.seed,
            "init": self.init,
            "degenerate": self.degenerate,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let params = HsbmParams::from_json(value)?;
        let n = value["n"]
            .as_u64()
            .ok_or_else(|| Error::Invalid("missing n".into()))? as usize;
        let tau_data: Vec<f64> = serde_json::from_value(value["tau"].clone())?;
        let tau = VariationalState::new(tau_data, n, params.q())?;
        let labels: Vec<usize> = serde_json::from_value(value["labels"].clone())?;
        let elbo_trace: Vec<f64> = serde_json::from_value(value["elbo_trace"].clone())?;
        let icl = if value["icl"].is_null() {
            None
        } else {
            Some(serde_json::from_value(value["icl"].clone())?)
        };
        Ok(FitResult {
            params,
            tau,
            labels,
            elbo_trace,
            converged: value["converged"].as_bool().unwrap_or(false),
            reason: value["reason"].as_str().unwrap_or("").to_string(),
            icl,
            seed: value["seed"].as_u64().unwrap_or(0),
            init: serde_json::from_value(value["init"].clone()).unwrap_or(InitStrategy::Random),
            degenerate: value["degenerate"].as_u64().unwrap_or(0) as usize,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LatentAssignment, Submodel};
    use crate::simplex::multiset_count;

    fn random_params(q: usize, m_max: usize, seed: u64) -> HsbmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pi: Vec<f64> = (0..q).map(|_| rng.random::<f64>() + 0.1).collect();
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
        let b = (2..=m_max)
            .map(|m| {
                (0..multiset_count(q, m).unwrap())
                    .map(|_| rng.random::<f64>() * 0.8 + 0.1)
                    .collect()
            })
            .collect();
        HsbmParams::full(pi, b).unwrap()
    }

    #[test]
    fn init_random_properties() {
        let s = init_random(20, 4, 9);
        for i in 0..20 {
            let total: f64 = s.row(i).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert_eq!(s, init_random(20, 4, 9));
        assert_ne!(s, init_random(20, 4, 10));
        let ones = init_random(6, 1, 3);
        assert!(ones.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn hard_labels_break_ties_low() {
        let s = VariationalState::from_raw(vec![0.5, 0.5, 0.2, 0.8], 2, 2);
        assert_eq!(s.hard_labels(), vec![1, 2]);
    }

    #[test]
    fn state_validation() {
        assert!(VariationalState::new(vec![0.5, 0.5, 0.9, 0.1], 2, 2).is_ok());
        assert!(VariationalState::new(vec![0.5, 0.6], 1, 2).is_err());
        assert!(VariationalState::new(vec![-0.1, 1.1], 1, 2).is_err());
        assert!(VariationalState::new(vec![0.5], 1, 2).is_err());
    }

    #[test]
    fn elbo_sparse_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for case in 0..50 {
            let q = rng.random_range(1..=3);
            let n = rng.random_range(3..=10);
            let params = random_params(q, 3, 100 + case);
            let (h, _) = params.sample(n, 200 + case);
            let tau = init_random(n, q, 300 + case);
            let sparse = elbo(&params, &tau, &h);
            let dense = elbo_naive(&params, &tau, &h);
            assert!(
                (sparse - dense).abs() <= 1e-9 * dense.abs().max(1.0),
                "case {case}: {sparse} vs {dense}"
            );
        }
    }

    #[test]
    fn elbo_q1_reduces_to_complete_loglik() {
        let params = random_params(1, 3, 5);
        let (h, z) = params.sample(7, 6);
        let tau = VariationalState::uniform(7, 1);
        let j = elbo(&params, &tau, &h);
        let want = params.complete_loglik(&h, &z);
        assert!((j - want).abs() < 1e-9);
    }

    #[test]
    fn elbo_bounded_by_exact_loglik() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for case in 0..30 {
            let n = rng.random_range(3..=8);
            let params = random_params(2, 3, 400 + case);
            let (h, _) = params.sample(n, 500 + case);
            let tau = init_random(n, 2, 600 + case);
            let j = elbo(&params, &tau, &h);
            let ll = params.exact_loglik_small(&h).unwrap();
            assert!(j <= ll + 1e-9, "case {case}: ELBO {j} > loglik {ll}");
        }
    }

    /// Direct evaluation of the fixed-point update, nested loops throughout.
    fn ve_update_naive(
        params: &HsbmParams,
        tau: &VariationalState,
        h: &Hypergraph,
    ) -> VariationalState {
        let n = tau.n();
        let q = tau.q();
        let mut data = vec![0.0; n * q];
        for i in 0..n {
            let mut logs = vec![0.0f64; q];
            for (g, log_slot) in logs.iter_mut().enumerate() {
                let mut acc = params.pi()[g].max(PROB_EPS).ln();
                for m_prime in 2..=params.m_max() {
                    let order = m_prime - 1;
                    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                    if others.len() < order {
                        continue;
                    }
                    let mut subset: Vec<usize> = (0..order).collect();
                    loop {
                        let nodes: Vec<usize> = subset.iter().map(|&k| others[k]).collect();
                        let mut edge: Vec<usize> = nodes.clone();
                        edge.push(i);
                        edge.sort_unstable();
                        let y = h.contains_edge(&edge);
                        let mut assignment = vec![0usize; order];
                        loop {
                            let weight: f64 = nodes
                                .iter()
                                .zip(assignment.iter())
                                .map(|(&j, &w)| tau.row(j)[w])
                                .product();
                            let mut labels: Vec<usize> =
                                assignment.iter().map(|&w| w + 1).collect();
                            labels.push(g + 1);
                            let b = params
                                .get_prob(&labels)
                                .unwrap()
                                .clamp(PROB_EPS, 1.0 - PROB_EPS);
                            acc += weight * if y { b.ln() } else { (1.0 - b).ln() };
                            let mut k = order;
                            while k > 0 && assignment[k - 1] == q - 1 {
                                assignment[k - 1] = 0;
                                k -= 1;
                            }
                            if k == 0 {
                                break;
                            }
                            assignment[k - 1] += 1;
                        }
                        let mut k = order;
                        while k > 0 && subset[k - 1] == others.len() - order + k - 1 {
                            k -= 1;
                        }
                        if k == 0 {
                            break;
                        }
                        subset[k - 1] += 1;
                        for j in k..order {
                            subset[j] = subset[j - 1] + 1;
                        }
                    }
                }
                *log_slot = acc;
            }
            let bmax = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut row: Vec<f64> = logs.iter().map(|&l| (l - bmax).exp()).collect();
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
            let mut scratch = Vec::new();
            floor_row(&mut row, &mut scratch);
            data[i * q..(i + 1) * q].copy_from_slice(&row);
        }
        VariationalState::from_raw(data, n, q)
    }

    #[test]
    fn ve_update_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for case in 0..10 {
            let q = rng.random_range(1..=3);
            let n = rng.random_range(4..=7);
            let params = random_params(q, 3, 700 + case);
            let (h, _) = params.sample(n, 800 + case);
            let tau = init_random(n, q, 900 + case);
            let ws = Workspace::new(&h, q, params.m_max());
            let fast = ve_update(&ws, &params, &tau, &h);
            let slow = ve_update_naive(&params, &tau, &h);
            assert!(
                fast.max_abs_diff(&slow) < 1e-9,
                "case {case}: diff {}",
                fast.max_abs_diff(&slow)
            );
        }
    }

    #[test]
    fn ve_q1_is_immediate() {
        let params = random_params(1, 2, 3);
        let (h, _) = params.sample(6, 4);
        let tau0 = VariationalState::uniform(6, 1);
        let cfg = FitConfig::default();
        let out = ve_fixed_point(&params, &tau0, &h, &cfg);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert!(out.state.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn ve_converged_state_is_stationary() {
        let params = random_params(2, 3, 41);
        let (h, _) = params.sample(12, 42);
        let tau0 = init_random(12, 2, 43);
        let cfg = FitConfig::default();
        let out = ve_fixed_point(&params, &tau0, &h, &cfg);
        assert!(out.converged);
        let ws = Workspace::new(&h, 2, params.m_max());
        let once_more = ve_update(&ws, &params, &out.state, &h);
        assert!(once_more.max_abs_diff(&out.state) <= cfg.epsilon);
    }

    #[test]
    fn m_step_uniform_tau_gives_edge_frequencies() {
        let params = random_params(2, 3, 51);
        let (h, _) = params.sample(10, 52);
        let tau = VariationalState::uniform(10, 2);
        let result = m_step_full(&tau, &h);
        assert_eq!(result.degenerate, 0);
        for (g, &p) in result.params.pi().iter().enumerate() {
            assert!((p - 0.5).abs() < 1e-12, "pi[{g}] = {p}");
        }
        let hist = h.size_histogram();
        for m in [2usize, 3] {
            let density = hist[m] as f64 / crate::simplex::binomial_f64(10, m);
            for r in 0..multiset_count(2, m).unwrap() as usize {
                let b = result.params.prob_by_rank(m, r);
                assert!(
                    (b - density).abs() < 1e-9,
                    "m={m} r={r}: {b} vs density {density}"
                );
            }
        }
    }

    #[test]
    fn m_step_one_hot_counts_config_frequencies() {
        let z = LatentAssignment::new(vec![1, 1, 1, 2, 2, 2], 2).unwrap();
        let h = Hypergraph::new(
            6,
            vec![vec![0, 1], vec![0, 2], vec![3, 4], vec![0, 3], vec![1, 4]],
        )
        .unwrap();
        let mut data = vec![0.0; 12];
        for (i, &g) in z.groups().iter().enumerate() {
            data[i * 2 + (g - 1)] = 1.0;
        }
        let tau = VariationalState::from_raw(data, 6, 2);
        let result = m_step_full(&tau, &h);
        // Config (1,1): 2 of C(3,2)=3 pairs present; (1,2): 2 of 9; (2,2): 1 of 3.
        assert!((result.params.get_prob(&[1, 1]).unwrap() - 2.0 / 3.0).abs() < 1e-9);
        assert!((result.params.get_prob(&[1, 2]).unwrap() - 2.0 / 9.0).abs() < 1e-9);
        assert!((result.params.get_prob(&[2, 2]).unwrap() - 1.0 / 3.0).abs() < 1e-9);
    }

    fn perturb(params: &HsbmParams, rng: &mut ChaCha8Rng) -> HsbmParams {
        let mut pi: Vec<f64> = params
            .pi()
            .iter()
            .map(|&p| (p * (1.0 + 0.2 * (rng.random::<f64>() - 0.5))).max(1e-6))
            .collect();
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
        let b = (2..=params.m_max())
            .map(|m| {
                params
                    .tensor(m)
                    .iter()
                    .map(|&v| {
                        (v * (1.0 + 0.3 * (rng.random::<f64>() - 0.5)))
                            .clamp(PROB_EPS, 1.0 - PROB_EPS)
                    })
                    .collect()
            })
            .collect();
        HsbmParams::full(pi, b).unwrap()
    }

    #[test]
    fn m_step_maximizes_elbo() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for case in 0..5 {
            let n = 8;
            let gen = random_params(2, 3, 1000 + case);
            let (h, _) = gen.sample(n, 1100 + case);
            let tau = init_random(n, 2, 1200 + case);
            let fitted = m_step_full(&tau, &h).params;
            let best = elbo(&fitted, &tau, &h);
            for _ in 0..40 {
                let perturbed = perturb(&fitted, &mut rng);
                let j = elbo(&perturbed, &tau, &h);
                assert!(j <= best + 1e-9, "case {case}: {j} > {best}");
            }
        }
    }

    #[test]
    fn affiliation_m_step_within_cluster_edges() {
        // Hard clustering, all edges inside one group: alpha large, beta at
        // the probability floor.
        let h = Hypergraph::new(6, vec![vec![0, 1], vec![1, 2], vec![0, 1, 2]]).unwrap();
        let mut data = vec![0.0; 12];
        for i in 0..6 {
            let g = usize::from(i >= 3);
            data[i * 2 + g] = 1.0;
        }
        let tau = VariationalState::from_raw(data, 6, 2);
        let result = m_step_affiliation(&tau, &h, SubmodelKind::AffM);
        match result.params.submodel() {
            Submodel::AffM { alpha, beta } => {
                assert!(alpha[0] > 0.1);
                assert_eq!(beta[0], PROB_EPS);
                assert!(alpha[1] > 0.0);
            }
            other => panic!("unexpected submodel {other:?}"),
        }
    }

    #[test]
    fn affiliation_q1_has_empty_beta_pool() {
        let h = Hypergraph::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let tau = VariationalState::uniform(4, 1);
        let result = m_step_affiliation(&tau, &h, SubmodelKind::AffM);
        assert!(result.degenerate > 0);
        match result.params.submodel() {
            Submodel::AffM { alpha, beta } => {
                assert!((alpha[0] - 2.0 / 6.0).abs() < 1e-9); // edge density
                assert_eq!(beta[0], PROB_EPS);
            }
            other => panic!("unexpected submodel {other:?}"),
        }
    }

    #[test]
    fn affiliation_matches_pooled_full_masses() {
        let params = random_params(2, 3, 71);
        let (h, _) = params.sample(6, 72);
        let tau = init_random(6, 2, 73);
        let ws = Workspace::new(&h, 2, 3);
        let masses = m_step_masses(&ws, &tau, &h);
        let aff = m_step_affiliation(&tau, &h, SubmodelKind::AffM);
        for m in 2..=3usize {
            let table = ws.table(m);
            let (mut an, mut ad, mut bn, mut bd) = (0.0, 0.0, 0.0, 0.0);
            for r in 0..table.len() {
                if table.constant[r] {
                    an += masses.observed[m - 2][r];
                    ad += masses.total[m - 2][r];
                } else {
                    bn += masses.observed[m - 2][r];
                    bd += masses.total[m - 2][r];
                }
            }
            match aff.params.submodel() {
                Submodel::AffM { alpha, beta } => {
                    assert!((alpha[m - 2] - an / ad).abs() < 1e-12);
                    assert!((beta[m - 2] - bn / bd).abs() < 1e-12);
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn aff_m_step_maximizes_within_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..3 {
            let gen = random_params(2, 3, 1300 + case);
            let (h, _) = gen.sample(8, 1400 + case);
            let tau = init_random(8, 2, 1500 + case);
            for kind in [SubmodelKind::AffM, SubmodelKind::Aff] {
                let fitted = m_step_affiliation(&tau, &h, kind).params;
                let best = elbo(&fitted, &tau, &h);
                for _ in 0..30 {
                    let mut jitter = |v: f64| {
                        (v * (1.0 + 0.3 * (rng.random::<f64>() - 0.5)))
                            .clamp(PROB_EPS, 1.0 - PROB_EPS)
                    };
                    let perturbed = match fitted.submodel() {
                        Submodel::AffM { alpha, beta } => {
                            let a: Vec<f64> = alpha.iter().map(|&v| jitter(v)).collect();
                            let b: Vec<f64> = beta.iter().map(|&v| jitter(v)).collect();
                            HsbmParams::affiliation_per_size(fitted.pi().to_vec(), a, b).unwrap()
                        }
                        Submodel::Aff { alpha, beta } => HsbmParams::affiliation(
                            fitted.pi().to_vec(),
                            jitter(*alpha),
                            jitter(*beta),
                            fitted.m_max(),
                        )
                        .unwrap(),
                        _ => unreachable!(),
                    };
                    let j = elbo(&perturbed, &tau, &h);
                    assert!(j <= best + 1e-9, "case {case} {kind:?}: {j} > {best}");
                }
            }
        }
    }

    #[test]
    fn fit_q1_converges_fast() {
        let params = random_params(1, 3, 81);
        let (h, _) = params.sample(8, 82);
        let cfg = FitConfig::default();
        let result = fit(&h, 1, &cfg).unwrap();
        assert!(result.converged);
        assert!(result.elbo_trace.len() <= 2);
        let hist = h.size_histogram();
        for m in [2usize, 3] {
            let density = hist[m] as f64 / crate::simplex::binomial_f64(8, m);
            assert!((result.params.prob_by_rank(m, 0) - density).abs() < 1e-9);
        }
    }

    #[test]
    fn fit_trace_monotone_on_small_instances() {
        for seed in 0..5u64 {
            let gen = HsbmParams::affiliation_per_size(
                vec![0.6, 0.4],
                vec![0.7, 0.039],
                vec![0.25, 0.012],
            )
            .unwrap();
            let (h, _) = gen.sample(25, seed);
            let cfg = FitConfig {
                seed,
                ..FitConfig::default()
            };
            let result = fit(&h, 2, &cfg).unwrap();
            for w in result.elbo_trace.windows(2) {
                assert!(
                    w[1] >= w[0] - 1e-8,
                    "seed {seed}: trace decreased {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn fit_json_roundtrip() {
        let gen = random_params(2, 3, 91);
        let (h, _) = gen.sample(10, 92);
        let cfg = FitConfig {
            seed: 5,
            ..FitConfig::default()
        };
        let result = fit(&h, 2, &cfg).unwrap();
        let json = result.to_json();
        let back = FitResult::from_json(&json).unwrap();
        assert_eq!(back.params, result.params);
        assert_eq!(back.labels, result.labels);
        assert_eq!(back.elbo_trace, result.elbo_trace);
        assert_eq!(back.converged, result.converged);
        assert_eq!(back.seed, result.seed);
        assert_eq!(back.init, result.init);
    }
}
