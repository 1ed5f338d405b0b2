//! Synthetic data factories: the sparse scenario presets parametrized by a
//! within/between hyperedge ratio, and the line-clustering construction that
//! turns planar points into a 3-uniform hypergraph through a collinearity
//! kernel.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::model::HsbmParams;
use crate::simplex::binomial_f64;

/// A sparse two-size scenario: proportions, a base rate `alpha0` and the
/// constant within/between ratio `rho`. Size-2 rates scale as `1/n` and
/// size-3 rates as `1/n^2`, so hyperedge counts grow linearly with `n` and
/// the ratio of expected within-group to between-groups hyperedges stays at
/// `rho` for both sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub pi: Vec<f64>,
    pub alpha0: f64,
    pub rho: f64,
    pub m_max: usize,
}

/// Size-dependent rates derived from a [`Scenario`] at a given node count.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    /// Within-group rate per size (index `m - 2`).
    pub alpha: Vec<f64>,
    /// Between-groups rate per size.
    pub beta: Vec<f64>,
    /// Expected number of size-`m` hyperedges.
    pub expected_edges: Vec<f64>,
}

/// The five scenario presets: communities (`rho > 1`) with two or three
/// groups at two sparsity levels, and disassortative settings (`rho < 1`).
pub fn make_scenario(name: &str) -> Result<Scenario> {
    let (pi, alpha0, rho): (Vec<f64>, f64, f64) = match name {
        "A2" => (vec![0.6, 0.4], 0.70, 1.20),
        "A3" => (vec![0.4, 0.3, 0.3], 0.30, 1.70),
        // "A3p" spares shell users the quote.
        "A3'" | "A3p" => (vec![0.4, 0.3, 0.3], 0.70, 1.20),
        "B2" => (vec![0.6, 0.4], 0.30, 0.50),
        "B3" => (vec![0.4, 0.3, 0.3], 0.40, 0.25),
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    Ok(Scenario {
        name: name.replace("A3p", "A3'"),
        pi,
        alpha0,
        rho,
        m_max: 3,
    })
}

impl Scenario {
    fn pi_power(&self, m: i32) -> f64 {
        self.pi.iter().map(|&p| p.powi(m)).sum()
    }

    /// Base between-groups rate: chosen so the size-2 within/between ratio
    /// equals `rho`.
    pub fn beta0(&self) -> f64 {
        let s2 = self.pi_power(2);
        self.alpha0 / self.rho * s2 / (1.0 - s2)
    }

    /// Size-3 boost keeping the size-3 ratio at the same `rho`.
    pub fn size3_factor(&self) -> f64 {
        let s2 = self.pi_power(2);
        let s3 = self.pi_power(3);
        s2 / (1.0 - s2) * (1.0 - s3) / s3
    }

    /// Rates and expected hyperedge counts at `n` nodes.
    pub fn params(&self, n: usize) -> Result<ScenarioParams> {
        assert!(n >= 3);
        let beta0 = self.beta0();
        let c = self.size3_factor();
        let nf = n as f64;
        let alpha = vec![
            self.alpha0 * 50.0 / nf,
            c * self.alpha0 * 50.0 / (nf * nf),
        ];
        let beta = vec![beta0 * 50.0 / nf, beta0 * 50.0 / (nf * nf)];
        for &v in alpha.iter().chain(beta.iter()) {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidScenario(format!(
                    "{} at n={n}: rate {v} outside [0,1]",
                    self.name
                )));
            }
        }
        let expected_edges = (2..=self.m_max)
            .map(|m| {
                let s = self.pi_power(m as i32);
                binomial_f64(n, m) * (alpha[m - 2] * s + beta[m - 2] * (1.0 - s))
            })
            .collect();
        Ok(ScenarioParams {
            alpha,
            beta,
            expected_edges,
        })
    }

    /// Per-size affiliation model at `n` nodes, ready to sample.
    pub fn model(&self, n: usize) -> Result<HsbmParams> {
        let p = self.params(n)?;
        HsbmParams::affiliation_per_size(self.pi.clone(), p.alpha, p.beta)
    }
}

/// Planar points with line/noise labels. Points on line `l` carry label `l`
/// (0-based); pure-noise points carry label `num_lines`.
#[derive(Debug, Clone)]
pub struct LineDataset {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    /// Endpoints of each generating line segment.
    pub lines: Vec<([f64; 2], [f64; 2])>,
}

impl LineDataset {
    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    /// Label value assigned to noise points.
    pub fn noise_label(&self) -> usize {
        self.lines.len()
    }
}

fn boundary_point(rng: &mut ChaCha8Rng) -> [f64; 2] {
    let t: f64 = rng.random::<f64>() * 4.0;
    let frac = t.fract();
    match t as usize {
        0 => [-0.5 + frac, -0.5],
        1 => [0.5, -0.5 + frac],
        2 => [0.5 - frac, 0.5],
        _ => [-0.5, 0.5 - frac],
    }
}

/// Generate equally sized point clouds along random lines in the unit
/// square, plus uniform noise points. Each line runs between two points
/// drawn uniformly on the square's boundary; on-line points are uniform
/// along the segment, perturbed by isotropic Gaussian noise of the given
/// standard deviation and clipped back into the square.
pub fn gen_line_points(
    num_lines: usize,
    pts_per_line: usize,
    noise_pts: usize,
    noise_sd: f64,
    seed: u64,
) -> LineDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lines: Vec<([f64; 2], [f64; 2])> = (0..num_lines)
        .map(|_| (boundary_point(&mut rng), boundary_point(&mut rng)))
        .collect();
    let mut points = Vec::with_capacity(num_lines * pts_per_line + noise_pts);
    let mut labels = Vec::with_capacity(points.capacity());
    for (l, (a, b)) in lines.iter().enumerate() {
        for _ in 0..pts_per_line {
            let u: f64 = rng.random();
            let gx: f64 = rng.sample(StandardNormal);
            let gy: f64 = rng.sample(StandardNormal);
            let x = (a[0] + u * (b[0] - a[0]) + noise_sd * gx).clamp(-0.5, 0.5);
            let y = (a[1] + u * (b[1] - a[1]) + noise_sd * gy).clamp(-0.5, 0.5);
            points.push([x, y]);
            labels.push(l);
        }
    }
    for _ in 0..noise_pts {
        let x: f64 = rng.random::<f64>() - 0.5;
        let y: f64 = rng.random::<f64>() - 0.5;
        points.push([x, y]);
        labels.push(num_lines);
    }
    LineDataset {
        points,
        labels,
        lines,
    }
}

/// Mean orthogonal distance of three points to their total-least-squares
/// line (the principal axis of the triplet's scatter, through the
/// centroid). Exactly collinear or coincident triplets give 0.
pub fn line_dissimilarity(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    let cx = (p[0] + q[0] + r[0]) / 3.0;
    let cy = (p[1] + q[1] + r[1]) / 3.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for t in [p, q, r] {
        let dx = t[0] - cx;
        let dy = t[1] - cy;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // Principal direction of the 2x2 scatter.
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (nx, ny) = (-theta.sin(), theta.cos());
    let mut total = 0.0;
    for t in [p, q, r] {
        total += ((t[0] - cx) * nx + (t[1] - cy) * ny).abs();
    }
    total / 3.0
}

/// Knobs of the line-hypergraph construction.
#[derive(Debug, Clone)]
pub struct LineHypergraphConfig {
    /// Gaussian kernel bandwidth on the squared dissimilarity.
    pub sigma2: f64,
    /// Kernel acceptance threshold.
    pub eps: f64,
    /// Signal-to-noise hyperedge ratio enforced by acceptance quotas.
    pub snr: f64,
    pub target_edges: usize,
    /// Cap on sampled triplets before giving up.
    pub budget: usize,
    pub seed: u64,
}

impl LineHypergraphConfig {
    pub fn new(target_edges: usize, seed: u64) -> Self {
        Self {
            sigma2: 0.04,
            eps: 0.999,
            snr: 2.0,
            target_edges,
            budget: 20_000_000,
            seed,
        }
    }
}

/// Line hypergraph plus bookkeeping.
#[derive(Debug, Clone)]
pub struct LineHypergraph {
    pub hypergraph: Hypergraph,
    pub signal_edges: usize,
    pub noise_edges: usize,
    /// Degree-zero points, flagged for exclusion from clustering.
    pub isolated: Vec<usize>,
}

/// Rejection-sample point triplets; a triplet whose collinearity kernel
/// exceeds the threshold becomes a hyperedge, classed as signal when all
/// three points share one line label. Acceptance quotas hold the
/// signal/noise ratio at `snr` until `target_edges` distinct hyperedges are
/// collected; running out of budget is an error carrying the achieved
/// counts.
pub fn build_line_hypergraph(
    ds: &LineDataset,
    cfg: &LineHypergraphConfig,
) -> Result<LineHypergraph> {
    let n = ds.points.len();
    assert!(n >= 3, "need at least three points");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d2_threshold = -cfg.sigma2 * cfg.eps.ln();
    let signal_target =
        ((cfg.target_edges as f64) * cfg.snr / (cfg.snr + 1.0)).round() as usize;
    let noise_target = cfg.target_edges - signal_target;
    let mut accepted: BTreeSet<[usize; 3]> = BTreeSet::new();
    let mut signal = 0usize;
    let mut noise = 0usize;
    let noise_label = ds.noise_label();
    for _ in 0..cfg.budget {
        if signal + noise >= cfg.target_edges {
            break;
        }
        let mut triple = [0usize; 3];
        triple[0] = rng.random_range(0..n);
        loop {
            triple[1] = rng.random_range(0..n);
            if triple[1] != triple[0] {
                break;
            }
        }
        loop {
            triple[2] = rng.random_range(0..n);
            if triple[2] != triple[0] && triple[2] != triple[1] {
                break;
            }
        }
        triple.sort_unstable();
        if accepted.contains(&triple) {
            continue;
        }
        let d = line_dissimilarity(
            ds.points[triple[0]],
            ds.points[triple[1]],
            ds.points[triple[2]],
        );
        if d * d >= d2_threshold {
            continue;
        }
        let l0 = ds.labels[triple[0]];
        let is_signal =
            l0 != noise_label && ds.labels[triple[1]] == l0 && ds.labels[triple[2]] == l0;
        if is_signal {
            if signal < signal_target {
                accepted.insert(triple);
                signal += 1;
            }
        } else if noise < noise_target {
            accepted.insert(triple);
            noise += 1;
        }
    }
    if signal + noise < cfg.target_edges {
        return Err(Error::BudgetExhausted {
            signal,
            noise,
            target: cfg.target_edges,
        });
    }
    let edges: Vec<Vec<usize>> = accepted.iter().map(|t| t.to_vec()).collect();
    let hypergraph = Hypergraph::new(n, edges)?;
    let degrees = hypergraph.degree_sequence();
    let isolated = (0..n).filter(|&i| degrees[i] == 0).collect();
    Ok(LineHypergraph {
        hypergraph,
        signal_edges: signal,
        noise_edges: noise,
        isolated,
    })
}
