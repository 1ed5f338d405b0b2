//! Model selection (ICL), the group-count sweep, and evaluation metrics:
//! adjusted Rand index, mean squared relative parameter error, and
//! detectability thresholds.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::hypergraph::Hypergraph;
use crate::model::{HsbmParams, LatentAssignment, SubmodelKind};
use crate::simplex::{binomial_f64, multiset_count};
use crate::vem::{self, FitConfig, FitResult};

/// Integrated classification likelihood of one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclScore {
    pub q: usize,
    pub variant: SubmodelKind,
    /// Complete-data log-likelihood at the hard labels.
    pub loglik_complete: f64,
    pub penalty: f64,
    /// `loglik_complete - penalty`.
    pub value: f64,
}

/// Dimension penalty of the ICL criterion. The full model pays half a log of
/// the subset count per free tensor entry; the affiliation variants use the
/// flat per-size penalties.
pub fn icl_penalty(q: usize, n: usize, m_max: usize, variant: SubmodelKind) -> f64 {
    let base = 0.5 * (q as f64 - 1.0) * (n as f64).ln();
    let log_counts: f64 = (2..=m_max).map(|m| binomial_f64(n, m).ln()).sum();
    match variant {
        SubmodelKind::Full => {
            let tensor_part: f64 = (2..=m_max)
                .map(|m| multiset_count(q, m).expect("small counts") as f64 * binomial_f64(n, m).ln())
                .sum();
            base + 0.5 * tensor_part
        }
        SubmodelKind::AffM => base + (m_max as f64 - 1.0) * log_counts,
        SubmodelKind::Aff => base + log_counts,
    }
}

/// Score a fitted model: complete-data log-likelihood at the hard labels
/// minus the dimension penalty of the given variant.
pub fn icl(fit: &FitResult, h: &Hypergraph, variant: SubmodelKind) -> IclScore {
    let q = fit.params.q();
    let z = LatentAssignment::new(fit.labels.clone(), q).expect("labels are in range");
    let loglik_complete = fit.params.complete_loglik(h, &z);
    let penalty = icl_penalty(q, h.n(), fit.params.m_max(), variant);
    IclScore {
        q,
        variant,
        loglik_complete,
        penalty,
        value: loglik_complete - penalty,
    }
}

/// Outcome of a group-count sweep.
#[derive(Debug)]
pub struct Selection {
    pub best_q: usize,
    /// One fit per candidate `q`, in sweep order, each with its ICL filled.
    pub runs: Vec<FitResult>,
}

/// Fit every `q` in the range (independently seeded as `seed + q`, fanned
/// out across workers) and keep the ICL argmax; ties go to the smaller `q`.
pub fn select_q(
    h: &Hypergraph,
    q_min: usize,
    q_max: usize,
    cfg: &FitConfig,
) -> Result<Selection> {
    if q_min < 1 || q_min > q_max {
        return Err(Error::Invalid(format!("bad group range {q_min}..={q_max}")));
    }
    let candidates: Vec<usize> = (q_min..=q_max).collect();
    let fits = exec::map_collect(candidates.len(), |idx| {
        let q = candidates[idx];
        let per_q = FitConfig {
            seed: cfg.seed.wrapping_add(q as u64),
            ..cfg.clone()
        };
        vem::fit(h, q, &per_q).map(|mut fit| {
            fit.icl = Some(icl(&fit, h, cfg.submodel));
            fit
        })
    });
    let mut runs = Vec::with_capacity(fits.len());
    for fit in fits {
        runs.push(fit?);
    }
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        let value = run.icl.as_ref().unwrap().value;
        if value > runs[best].icl.as_ref().unwrap().value {
            best = i;
        }
    }
    Ok(Selection {
        best_q: candidates[best],
        runs,
    })
}

/// Adjusted Rand index (permutation-model chance correction) between two
/// label sequences. 1 exactly when the partitions coincide; invariant to
/// relabeling either side. Degenerate case (both partitions trivial, zero
/// chance-corrected spread): 1 if the partitions are equal, else 0.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let n = a.len();
    if n == 0 {
        return Ok(1.0);
    }
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b.iter()) {
        *cells.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let comb2 = |v: u64| -> f64 { v as f64 * (v as f64 - 1.0) / 2.0 };
    let index: f64 = cells.values().map(|&v| comb2(v)).sum();
    let sum_rows: f64 = rows.values().map(|&v| comb2(v)).sum();
    let sum_cols: f64 = cols.values().map(|&v| comb2(v)).sum();
    let total = comb2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index - expected).abs() < 1e-12 {
        // Both partitions trivial (all singletons or one block each).
        let same = canonical_form(a) == canonical_form(b);
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max_index - expected))
}

fn canonical_form(labels: &[usize]) -> Vec<usize> {
    let mut map: HashMap<usize, usize> = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn permutations(q: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (1..=q).collect();
    loop {
        out.push(current.clone());
        // Next lexicographic permutation.
        let Some(i) = (0..q.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
            break;
        };
        let j = (i + 1..q).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    out
}

/// Group relabeling of `est` that best matches `truth`: the permutation
/// maximizing label agreement, lexicographically smallest on ties.
/// Exhaustive over the symmetric group; limited to `Q <= 8`.
pub fn align_groups(est: &[usize], truth: &[usize], q: usize) -> Result<Vec<usize>> {
    if est.len() != truth.len() {
        return Err(Error::LengthMismatch {
            a: est.len(),
            b: truth.len(),
        });
    }
    if q > 8 {
        return Err(Error::Invalid(format!(
            "exhaustive alignment limited to Q <= 8, got {q}"
        )));
    }
    let mut best: Option<(usize, Vec<usize>)> = None;
    for perm in permutations(q) {
        let agreement = est
            .iter()
            .zip(truth.iter())
            .filter(|&(&e, &t)| perm[e - 1] == t)
            .count();
        if best.as_ref().map(|(a, _)| agreement > *a).unwrap_or(true) {
            best = Some((agreement, perm));
        }
    }
    Ok(best.expect("q >= 1").1)
}

/// Mean squared relative error between estimated and true parameters after
/// group alignment: the `Q - 1` free proportions plus every tensor entry,
/// each as a squared relative deviation.
pub fn msre(
    est_params: &HsbmParams,
    est_labels: &[usize],
    true_params: &HsbmParams,
    true_labels: &[usize],
) -> Result<f64> {
    if est_params.q() != true_params.q() || est_params.m_max() != true_params.m_max() {
        return Err(Error::DimensionMismatch(format!(
            "est (Q={}, M={}) vs truth (Q={}, M={})",
            est_params.q(),
            est_params.m_max(),
            true_params.q(),
            true_params.m_max()
        )));
    }
    let q = est_params.q();
    let perm = align_groups(est_labels, true_labels, q)?;
    let aligned = est_params.permute_groups(&perm)?;
    let mut total = 0.0;
    for g in 0..q.saturating_sub(1) {
        let t = true_params.pi()[g];
        let rel = (aligned.pi()[g] - t) / t;
        total += rel * rel;
    }
    for m in 2..=est_params.m_max() {
        let est_tensor = aligned.tensor(m);
        let true_tensor = true_params.tensor(m);
        for (e, t) in est_tensor.iter().zip(true_tensor.iter()) {
            let rel = (e - t) / t;
            total += rel * rel;
        }
    }
    Ok(total)
}

/// Detectability thresholds of the affiliation model at one hyperedge size:
/// the uniform-proportions threshold and its non-uniform counterpart, both
/// to be compared against 1 by the caller.
pub fn ks_thresholds(pi: &[f64], alpha: f64, beta: f64, m: usize) -> (f64, f64) {
    assert!(m >= 2);
    if alpha == beta {
        return (0.0, 0.0);
    }
    let q = pi.len() as f64;
    let qm1 = q.powi(m as i32 - 1);
    let gap = (alpha - beta) * (alpha - beta);
    let uniform = (m as f64 - 1.0) * gap / (qm1 * (alpha + (qm1 - 1.0) * beta));
    let s: f64 = pi.iter().map(|&p| p.powi(m as i32)).sum();
    let nonuniform = (m as f64 - 1.0) * s * s * gap / (s * alpha + (1.0 - s) * beta);
    (uniform, nonuniform)
}

/// CSV table of a group sweep: `q,variant,loglik,penalty,icl`.
pub fn icl_table_csv(scores: &[IclScore]) -> String {
    let mut out = String::from("q,variant,loglik,penalty,icl\n");
    for s in scores {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.q, s.variant, s.loglik_complete, s.penalty, s.value
        ));
    }
    out
}

/// One evaluation record: seed, size, setting tag, ARI and optional MSRE.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub seed: u64,
    pub n: usize,
    pub setting: String,
    pub ari: f64,
    pub msre: Option<f64>,
}

/// CSV table of evaluation records: `seed,n,setting,ari,msre`.
pub fn metrics_table_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("seed,n,setting,ari,msre\n");
    for r in rows {
        let msre = r.msre.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.seed, r.n, r.setting, r.ari, msre
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vem::InitStrategy;

    #[test]
    fn penalty_q1_full() {
        // The (q-1) term vanishes; each tensor has a single entry.
        let p = icl_penalty(1, 50, 3, SubmodelKind::Full);
        let want = 0.5 * (binomial_f64(50, 2).ln() + binomial_f64(50, 3).ln());
        assert!((p - want).abs() < 1e-12);
    }

    #[test]
    fn penalty_full_arithmetic_n50_q3() {
        let p = icl_penalty(3, 50, 3, SubmodelKind::Full);
        let second = 0.5 * (6.0 * binomial_f64(50, 2).ln() + 10.0 * binomial_f64(50, 3).ln());
        let want = 0.5 * 2.0 * 50f64.ln() + second;
        assert!((p - want).abs() < 1e-10);
    }

    #[test]
    fn penalty_variant_ordering() {
        // For q >= 3 the full penalty dominates the affiliation ones; the
        // shared variant is always the cheapest. (At q = 2, M = 3 the full
        // model is in fact cheaper than the per-size affiliation penalty as
        // printed: 1.5 log C(n,2) + 2 log C(n,3) vs 2 log C(n,2) + 2 log C(n,3).)
        for n in [10usize, 50, 200] {
            for q in 3..=6usize {
                let full = icl_penalty(q, n, 3, SubmodelKind::Full);
                let affm = icl_penalty(q, n, 3, SubmodelKind::AffM);
                let aff = icl_penalty(q, n, 3, SubmodelKind::Aff);
                assert!(full >= affm && affm >= aff, "n={n} q={q}");
            }
            let full2 = icl_penalty(2, n, 3, SubmodelKind::Full);
            let affm2 = icl_penalty(2, n, 3, SubmodelKind::AffM);
            assert!(full2 < affm2, "printed penalties invert at q=2 (n={n})");
        }
    }

    #[test]
    fn penalty_monotone_in_q() {
        for q in 1..6usize {
            assert!(
                icl_penalty(q + 1, 40, 3, SubmodelKind::Full)
                    > icl_penalty(q, 40, 3, SubmodelKind::Full)
            );
        }
    }

    #[test]
    fn select_single_q_returns_it() {
        let gen = HsbmParams::affiliation_per_size(vec![0.6, 0.4], vec![0.7], vec![0.2]).unwrap();
        let (h, _) = gen.sample(15, 3);
        let cfg = FitConfig::default();
        let sel = select_q(&h, 2, 2, &cfg).unwrap();
        assert_eq!(sel.best_q, 2);
        assert_eq!(sel.runs.len(), 1);
        assert!(sel.runs[0].icl.is_some());
    }

    #[test]
    fn select_empty_hypergraph_picks_q1() {
        let h = Hypergraph::empty(12).with_m_max(3);
        let cfg = FitConfig {
            init: InitStrategy::Random,
            ..FitConfig::default()
        };
        let sel = select_q(&h, 1, 3, &cfg).unwrap();
        assert_eq!(sel.best_q, 1);
    }

    #[test]
    fn select_rejects_empty_range() {
        let h = Hypergraph::empty(5);
        assert!(select_q(&h, 3, 2, &FitConfig::default()).is_err());
        assert!(select_q(&h, 0, 2, &FitConfig::default()).is_err());
    }

    #[test]
    fn ari_reference_values() {
        assert_eq!(ari(&[1, 1, 2, 2], &[1, 1, 2, 2]).unwrap(), 1.0);
        // Relabeling either argument changes nothing.
        assert_eq!(ari(&[1, 1, 2, 2], &[2, 2, 1, 1]).unwrap(), 1.0);
        // Crossed pairs: direct contingency evaluation gives -1/2
        // (pair counts a=0, b=2, c=2, d=2).
        let v = ari(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap();
        assert!((v - (-0.5)).abs() < 1e-12, "{v}");
        assert!(matches!(
            ari(&[1, 2], &[1, 2, 3]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn ari_symmetry_and_degenerate_cases() {
        let a = [1, 1, 2, 3, 3, 3];
        let b = [2, 1, 1, 3, 3, 1];
        assert!((ari(&a, &b).unwrap() - ari(&b, &a).unwrap()).abs() < 1e-15);
        // Trivial partitions: equal -> 1, different -> 0.
        assert_eq!(ari(&[1, 1, 1], &[2, 2, 2]).unwrap(), 1.0);
        assert_eq!(ari(&[1, 2, 3], &[3, 1, 2]).unwrap(), 1.0);
        assert_eq!(ari(&[1, 1, 1], &[1, 2, 3]).unwrap(), 0.0);
    }

    #[test]
    fn ari_is_one_only_for_identical_partitions() {
        let a = [1, 1, 2, 2, 3];
        let b = [1, 2, 2, 3, 3];
        assert!(ari(&a, &b).unwrap() < 1.0);
    }

    #[test]
    fn alignment_maximizes_agreement() {
        let est = [2, 2, 1, 1, 3];
        let truth = [1, 1, 2, 2, 3];
        let perm = align_groups(&est, &truth, 3).unwrap();
        assert_eq!(perm, vec![2, 1, 3]);
    }

    #[test]
    fn msre_basic_cases() {
        let truth = HsbmParams::affiliation_per_size(vec![0.6, 0.4], vec![0.7], vec![0.2]).unwrap();
        let labels = vec![1, 1, 1, 2, 2];
        assert_eq!(msre(&truth, &labels, &truth, &labels).unwrap(), 0.0);

        // Swapped groups align back to zero error.
        let swapped = truth.permute_groups(&[2, 1]).unwrap();
        let swapped_labels: Vec<usize> = labels.iter().map(|&l| 3 - l).collect();
        let v = msre(&swapped, &swapped_labels, &truth, &labels).unwrap();
        assert!(v < 1e-24, "{v}");

        // One perturbed entry contributes its squared relative deviation.
        let delta = 0.05;
        let perturbed = HsbmParams::full(
            vec![0.6, 0.4],
            vec![vec![0.7 * (1.0 + delta), 0.2, 0.7]],
        )
        .unwrap();
        let base = HsbmParams::full(vec![0.6, 0.4], vec![vec![0.7, 0.2, 0.7]]).unwrap();
        let v = msre(&perturbed, &labels, &base, &labels).unwrap();
        assert!((v - delta * delta).abs() < 1e-12, "{v}");

        let other_q = HsbmParams::affiliation(vec![1.0], 0.5, 0.5, 2).unwrap();
        assert!(msre(&other_q, &[1, 1], &truth, &[1, 1]).is_err());
    }

    #[test]
    fn msre_invariant_under_joint_permutation() {
        let truth =
            HsbmParams::full(vec![0.5, 0.3, 0.2], vec![vec![0.7, 0.2, 0.1, 0.6, 0.3, 0.5]])
                .unwrap();
        let est =
            HsbmParams::full(vec![0.45, 0.35, 0.2], vec![vec![0.65, 0.25, 0.1, 0.55, 0.3, 0.45]])
                .unwrap();
        let labels_t = vec![1, 1, 2, 2, 3, 3];
        let labels_e = vec![1, 1, 2, 3, 3, 3];
        let base = msre(&est, &labels_e, &truth, &labels_t).unwrap();
        let perm = vec![3, 1, 2];
        let est_p = est.permute_groups(&perm).unwrap();
        let labels_e_p: Vec<usize> = labels_e.iter().map(|&l| perm[l - 1]).collect();
        let v = msre(&est_p, &labels_e_p, &truth, &labels_t).unwrap();
        assert!((v - base).abs() < 1e-12);
    }

    #[test]
    fn ks_threshold_values() {
        // Two-group community setting at its base size.
        let beta2 = 0.7 / 1.2 * (0.52 / 0.48);
        let (ks2, _) = ks_thresholds(&[0.6, 0.4], 0.7, beta2, 2);
        assert!((ks2 - 1.73865e-3).abs() / 1.73865e-3 < 1e-4, "{ks2}");
        // Two-group disassortative setting.
        let (ks2b, _) = ks_thresholds(&[0.6, 0.4], 0.3, 0.65, 2);
        assert!((ks2b - 6.447368e-2).abs() / 6.447368e-2 < 1e-6, "{ks2b}");
        // No signal.
        assert_eq!(ks_thresholds(&[0.5, 0.5], 0.4, 0.4, 3), (0.0, 0.0));
    }

    #[test]
    fn ks_threshold_homogeneity() {
        let pi = [0.4, 0.3, 0.3];
        let (u1, n1) = ks_thresholds(&pi, 0.02, 0.005, 3);
        let (u2, n2) = ks_thresholds(&pi, 0.04, 0.01, 3);
        assert!((u2 / u1 - 2.0).abs() < 1e-12);
        assert!((n2 / n1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn csv_emitters() {
        let scores = vec![IclScore {
            q: 2,
            variant: SubmodelKind::Full,
            loglik_complete: -10.5,
            penalty: 3.25,
            value: -13.75,
        }];
        let csv = icl_table_csv(&scores);
        assert!(csv.starts_with("q,variant,loglik,penalty,icl\n"));
        assert!(csv.contains("2,full,-10.5,3.25,-13.75"));

        let rows = vec![MetricsRow {
            seed: 7,
            n: 50,
            setting: "A2".into(),
            ari: 0.93,
            msre: None,
        }];
        let csv = metrics_table_csv(&rows);
        assert!(csv.contains("7,50,A2,0.93,\n"));
    }
}
