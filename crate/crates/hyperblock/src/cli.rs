//! Command-line front end: sampling, fitting, model selection, the line
//! pipeline, bipartite ingestion, thresholds and metrics.
//!
//! Every randomized subcommand is deterministic given `--seed`, and every
//! output file embeds the run manifest (subcommand, arguments, seed,
//! artifact version) — as a `manifest` field in JSON outputs, as a leading
//! `# manifest: ...` comment in text and CSV outputs. Re-running with the
//! same flags reproduces outputs byte for byte.
//!
//! Exit status: 0 on success, 2 on usage errors, 1 on runtime errors.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::{self, BipartiteRecord, Hypergraph};
use crate::metrics::{self, MetricsRow};
use crate::model::{HsbmParams, LatentAssignment, SubmodelKind};
use crate::synth::{self, LineHypergraphConfig};
use crate::vem::{self, FitConfig, InitStrategy};

#[derive(Debug, Parser)]
#[command(
    name = "hyperblock",
    version,
    about = "Stochastic blockmodels for simple hypergraphs"
)]
struct Cli {
    /// Significant digits for numbers printed to stdout.
    #[arg(long, global = true, default_value_t = 6)]
    precision: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a hypergraph from a scenario preset.
    Sample(SampleArgs),
    /// Fit a Q-group model to a hypergraph file.
    Fit(FitArgs),
    /// Sweep a group-count range and pick the ICL argmax.
    Select(SelectArgs),
    /// Generate the line-clustering dataset and its 3-uniform hypergraph.
    Lines(LinesArgs),
    /// Build a simple hypergraph from a bipartite paper,author CSV.
    Ingest(IngestArgs),
    /// Print detectability thresholds of a scenario at a given size.
    Ks(KsArgs),
    /// Evaluate a fit against ground truth (ARI, optionally MSRE).
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Scenario preset: A2, A3, A3' (alias A3p), B2, B3.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Hypergraph output (text format).
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth group CSV (`node,group`).
    #[arg(long)]
    truth: PathBuf,
    /// Optional true-parameter JSON output.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitTuning {
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 50)]
    umax: usize,
    #[arg(long, default_value_t = 50)]
    tmax: usize,
    #[arg(long, default_value_t = 100)]
    kmeans_restarts: usize,
    /// random | spectral | absolute | all.
    #[arg(long, default_value = "random")]
    init: String,
}

impl FitTuning {
    fn config(&self, submodel: SubmodelKind, seed: u64) -> Result<FitConfig> {
        Ok(FitConfig {
            epsilon: self.epsilon,
            u_max: self.umax,
            t_max: self.tmax,
            init: parse_init(&self.init)?,
            submodel,
            seed,
            kmeans_restarts: self.kmeans_restarts,
        })
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Hypergraph input (text format).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    q: usize,
    /// full | affm | aff.
    #[arg(long, default_value = "full")]
    submodel: String,
    #[command(flatten)]
    tuning: FitTuning,
    /// Model size cap M (default: largest observed hyperedge).
    #[arg(long)]
    mcap: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    qmin: usize,
    #[arg(long)]
    qmax: usize,
    /// full | affm | aff.
    #[arg(long, default_value = "full")]
    variant: String,
    #[command(flatten)]
    tuning: FitTuning,
    #[arg(long)]
    mcap: Option<usize>,
    #[arg(long)]
    seed: u64,
    /// Per-q ICL table (CSV).
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON output of the winning fit.
    #[arg(long)]
    fit_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LinesArgs {
    #[arg(long)]
    lines: usize,
    /// Points per line.
    #[arg(long)]
    points: usize,
    /// Uniform noise points.
    #[arg(long)]
    noise: usize,
    #[arg(long, default_value_t = 0.01)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0.04)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.999)]
    eps: f64,
    #[arg(long, default_value_t = 2.0)]
    snr: f64,
    /// Hyperedges to collect (defaults: 1071 for 2 lines, 588 for 3).
    #[arg(long)]
    target_edges: Option<usize>,
    #[arg(long)]
    seed: u64,
    /// Output prefix: writes <prefix>_points.csv, <prefix>_hypergraph.txt,
    /// <prefix>_labels.csv.
    #[arg(long)]
    out_prefix: String,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Bipartite CSV with header `paper,author`, one row per incidence.
    #[arg(long)]
    bipartite: PathBuf,
    /// Papers with more distinct authors than this are dropped.
    #[arg(long)]
    mcap: usize,
    /// Keep only the largest connected component.
    #[arg(long)]
    main_component: bool,
    #[arg(long)]
    out: PathBuf,
    /// Author id mapping CSV (`external_id,internal_id`).
    #[arg(long)]
    map: PathBuf,
}

#[derive(Debug, Args)]
struct KsArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    n: usize,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Fit JSON produced by `fit` or `select --fit-out`.
    #[arg(long)]
    fit: PathBuf,
    /// Ground-truth CSV (`node,group`).
    #[arg(long)]
    truth: PathBuf,
    /// True-parameter JSON (enables MSRE).
    #[arg(long)]
    true_params: Option<PathBuf>,
    /// Setting tag echoed into the metrics table.
    #[arg(long, default_value = "-")]
    setting: String,
    /// Optional metrics CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Provenance block embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub artifact: String,
    pub subcommand: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
}

impl RunManifest {
    fn new(subcommand: &str, argv: &[String], seed: Option<u64>) -> Self {
        Self {
            artifact: format!("hyperblock {}", env!("CARGO_PKG_VERSION")),
            subcommand: subcommand.to_string(),
            args: argv.to_vec(),
            seed,
        }
    }

    fn comment(&self) -> String {
        format!(
            "# manifest: {}\n",
            serde_json::to_string(self).expect("manifest serializes")
        )
    }

    fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("manifest serializes")
    }
}

/// Entry point used by the binary. Parses `argv`, runs, returns the exit
/// status (0 ok, 2 usage, 1 runtime).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let raw: Vec<String> = argv
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let cli = match Cli::try_parse_from(raw.iter()) {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; everything else is a
            // usage error (clap's own convention, exit code 2).
            let _ = err.print();
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    match dispatch(cli, &raw[1..]) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

/// Cap the worker pool from `HYPERBLOCK_THREADS` (0 or unset = automatic).
fn configure_threads() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(value) = std::env::var("HYPERBLOCK_THREADS") {
            if let Ok(threads) = value.trim().parse::<usize>() {
                if threads > 0 {
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(threads)
                        .build_global();
                }
            }
        }
    }
}

fn parse_init(s: &str) -> Result<InitStrategy> {
    match s {
        "random" => Ok(InitStrategy::Random),
        "spectral" => Ok(InitStrategy::SoftSpectral),
        "absolute" => Ok(InitStrategy::AbsoluteSpectral),
        "all" => Ok(InitStrategy::All),
        other => Err(Error::Invalid(format!(
            "unknown init {other:?} (expected random|spectral|absolute|all)"
        ))),
    }
}

fn parse_submodel(s: &str) -> Result<SubmodelKind> {
    match s {
        "full" => Ok(SubmodelKind::Full),
        "affm" => Ok(SubmodelKind::AffM),
        "aff" => Ok(SubmodelKind::Aff),
        other => Err(Error::Invalid(format!(
            "unknown submodel {other:?} (expected full|affm|aff)"
        ))),
    }
}

fn fmt_sig(x: f64, digits: usize) -> String {
    format!("{:.*e}", digits.saturating_sub(1), x)
}

fn read_hypergraph(path: &Path, mcap: Option<usize>) -> Result<Hypergraph> {
    let text = fs::read_to_string(path)?;
    let parsed = hypergraph::parse_hyperedge_text(&text)?;
    let mut h = parsed.hypergraph;
    if let Some(m) = mcap {
        if m < h.m_max() {
            return Err(Error::Invalid(format!(
                "mcap {m} below largest observed hyperedge size {}",
                h.m_max()
            )));
        }
        h = h.with_m_max(m);
    }
    Ok(h)
}

fn read_truth_csv(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("node,") {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.and_then(|t| t.trim().parse().ok()).ok_or(Error::Parse {
                line: lineno + 1,
                msg: format!("bad truth row {line:?}"),
            })
        };
        let node = parse(parts.next())?;
        let group = parse(parts.next())?;
        rows.push((node, group));
    }
    rows.sort_unstable();
    Ok(rows.into_iter().map(|(_, g)| g).collect())
}

fn dispatch(cli: Cli, argv: &[String]) -> Result<()> {
    let precision = cli.precision;
    match cli.command {
        Command::Sample(args) => {
            let manifest = RunManifest::new("sample", argv, Some(args.seed));
            let scenario = synth::make_scenario(&args.scenario)?;
            let model = scenario.model(args.n)?;
            let (h, z) = model.sample(args.n, args.seed);
            let mut text = manifest.comment();
            text.push_str(&hypergraph::write_hyperedge_text(&h));
            fs::write(&args.out, text)?;

            let mut truth = manifest.comment();
            truth.push_str("node,group\n");
            for (i, &g) in z.groups().iter().enumerate() {
                truth.push_str(&format!("{i},{g}\n"));
            }
            fs::write(&args.truth, truth)?;

            if let Some(path) = &args.params {
                let mut doc = model.to_json();
                doc["manifest"] = manifest.json();
                fs::write(path, serde_json::to_string_pretty(&doc)?)?;
            }
            println!(
                "sampled {} nodes, {} hyperedges ({})",
                h.n(),
                h.edge_count(),
                scenario.name
            );
            Ok(())
        }
        Command::Fit(args) => {
            let manifest = RunManifest::new("fit", argv, Some(args.seed));
            let submodel = parse_submodel(&args.submodel)?;
            let cfg = args.tuning.config(submodel, args.seed)?;
            let h = read_hypergraph(&args.input, args.mcap)?;
            let mut result = vem::fit(&h, args.q, &cfg)?;
            result.icl = Some(metrics::icl(&result, &h, submodel));
            let mut doc = result.to_json();
            doc["manifest"] = manifest.json();
            fs::write(&args.out, serde_json::to_string_pretty(&doc)?)?;
            println!(
                "fit Q={} elbo={} converged={} ({})",
                args.q,
                fmt_sig(result.final_elbo(), precision),
                result.converged,
                result.reason
            );
            Ok(())
        }
        Command::Select(args) => {
            let manifest = RunManifest::new("select", argv, Some(args.seed));
            let variant = parse_submodel(&args.variant)?;
            let cfg = args.tuning.config(variant, args.seed)?;
            let h = read_hypergraph(&args.input, args.mcap)?;
            let selection = metrics::select_q(&h, args.qmin, args.qmax, &cfg)?;
            let scores: Vec<_> = selection
                .runs
                .iter()
                .map(|r| r.icl.clone().expect("sweep fills icl"))
                .collect();
            let mut csv = manifest.comment();
            csv.push_str(&metrics::icl_table_csv(&scores));
            fs::write(&args.out, csv)?;
            if let Some(path) = &args.fit_out {
                let best = selection
                    .runs
                    .iter()
                    .find(|r| r.params.q() == selection.best_q)
                    .expect("winner is among the runs");
                let mut doc = best.to_json();
                doc["manifest"] = manifest.json();
                fs::write(path, serde_json::to_string_pretty(&doc)?)?;
            }
            println!("selected q={}", selection.best_q);
            Ok(())
        }
        Command::Lines(args) => {
            let manifest = RunManifest::new("lines", argv, Some(args.seed));
            let target = match args.target_edges {
                Some(t) => t,
                None => match args.lines {
                    2 => 1071,
                    3 => 588,
                    other => {
                        return Err(Error::Invalid(format!(
                            "no default edge target for {other} lines; pass --target-edges"
                        )))
                    }
                },
            };
            let ds = synth::gen_line_points(
                args.lines,
                args.points,
                args.noise,
                args.noise_sd,
                args.seed,
            );
            let mut line_cfg = LineHypergraphConfig::new(target, args.seed.wrapping_add(1));
            line_cfg.sigma2 = args.sigma2;
            line_cfg.eps = args.eps;
            line_cfg.snr = args.snr;
            let built = synth::build_line_hypergraph(&ds, &line_cfg)?;

            let mut points_csv = manifest.comment();
            points_csv.push_str("x,y,label\n");
            for (p, l) in ds.points.iter().zip(ds.labels.iter()) {
                points_csv.push_str(&format!("{},{},{l}\n", p[0], p[1]));
            }
            fs::write(format!("{}_points.csv", args.out_prefix), points_csv)?;

            let mut text = manifest.comment();
            text.push_str(&hypergraph::write_hyperedge_text(&built.hypergraph));
            fs::write(format!("{}_hypergraph.txt", args.out_prefix), text)?;

            let mut labels_csv = manifest.comment();
            labels_csv.push_str("node,label\n");
            for (i, l) in ds.labels.iter().enumerate() {
                labels_csv.push_str(&format!("{i},{l}\n"));
            }
            fs::write(format!("{}_labels.csv", args.out_prefix), labels_csv)?;
            println!(
                "built {} hyperedges ({} signal, {} noise), {} isolated points",
                built.hypergraph.edge_count(),
                built.signal_edges,
                built.noise_edges,
                built.isolated.len()
            );
            Ok(())
        }
        Command::Ingest(args) => {
            let manifest = RunManifest::new("ingest", argv, None);
            let records = read_bipartite_csv(&args.bipartite)?;
            let ingested = hypergraph::ingest_bipartite(&records, args.mcap)?;
            let (h, kept): (Hypergraph, Vec<usize>) = if args.main_component {
                ingested.hypergraph.largest_component()
            } else {
                let n = ingested.hypergraph.n();
                (ingested.hypergraph.clone(), (0..n).collect())
            };
            let mut text = manifest.comment();
            text.push_str(&hypergraph::write_hyperedge_text(&h));
            fs::write(&args.out, text)?;

            let mut map_csv = manifest.comment();
            map_csv.push_str("external_id,internal_id\n");
            for (new_id, &old_id) in kept.iter().enumerate() {
                map_csv.push_str(&format!("{},{new_id}\n", ingested.author_ids[old_id]));
            }
            fs::write(&args.map, map_csv)?;
            let hist = h.size_histogram();
            let shares: Vec<String> = (2..=h.m_max())
                .map(|m| format!("m={m}: {}", hist[m]))
                .collect();
            println!(
                "ingested {} authors, {} hyperedges ({}); dropped {} oversize, {} single-author, {} duplicate",
                h.n(),
                h.edge_count(),
                shares.join(", "),
                ingested.dropped_oversize,
                ingested.dropped_single,
                ingested.duplicates
            );
            Ok(())
        }
        Command::Ks(args) => {
            let scenario = synth::make_scenario(&args.scenario)?;
            let params = scenario.params(args.n)?;
            for m in 2..=scenario.m_max {
                let (uniform, nonuniform) = metrics::ks_thresholds(
                    &scenario.pi,
                    params.alpha[m - 2],
                    params.beta[m - 2],
                    m,
                );
                println!("KS_{m} = {}", fmt_sig(uniform, precision));
                println!("KS~_{m} = {}", fmt_sig(nonuniform, precision));
            }
            Ok(())
        }
        Command::Metrics(args) => {
            let manifest = RunManifest::new("metrics", argv, None);
            let fit_doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&args.fit)?)?;
            let fit = vem::FitResult::from_json(&fit_doc)?;
            let truth = read_truth_csv(&args.truth)?;
            if truth.len() != fit.labels.len() {
                return Err(Error::LengthMismatch {
                    a: fit.labels.len(),
                    b: truth.len(),
                });
            }
            let ari = metrics::ari(&fit.labels, &truth)?;
            let msre = match &args.true_params {
                Some(path) => {
                    let doc: serde_json::Value =
                        serde_json::from_str(&fs::read_to_string(path)?)?;
                    let true_params = HsbmParams::from_json(&doc)?;
                    LatentAssignment::new(truth.clone(), true_params.q())?;
                    Some(metrics::msre(
                        &fit.params,
                        &fit.labels,
                        &true_params,
                        &truth,
                    )?)
                }
                None => None,
            };
            println!("ari = {}", fmt_sig(ari, precision));
            if let Some(v) = msre {
                println!("msre = {}", fmt_sig(v, precision));
            }
            if let Some(path) = &args.out {
                let row = MetricsRow {
                    seed: fit.seed,
                    n: fit.labels.len(),
                    setting: args.setting.clone(),
                    ari,
                    msre,
                };
                let mut csv = manifest.comment();
                csv.push_str(&metrics::metrics_table_csv(&[row]));
                fs::write(path, csv)?;
            }
            Ok(())
        }
    }
}

fn read_bipartite_csv(path: &Path) -> Result<Vec<BipartiteRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Invalid(format!("bad CSV header: {e}")))?;
        if headers.len() < 2 || headers[0].trim() != "paper" || headers[1].trim() != "author" {
            return Err(Error::Invalid(format!(
                "expected header paper,author, found {headers:?}"
            )));
        }
    }
    let mut order: Vec<String> = Vec::new();
    let mut by_paper: HashMap<String, Vec<String>> = HashMap::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: idx + 2,
            msg: e.to_string(),
        })?;
        if record.len() < 2 {
            return Err(Error::Parse {
                line: idx + 2,
                msg: "expected two fields".into(),
            });
        }
        let paper = record[0].trim().to_string();
        let author = record[1].trim().to_string();
        by_paper
            .entry(paper.clone())
            .or_insert_with(|| {
                order.push(paper.clone());
                Vec::new()
            })
            .push(author);
    }
    if order.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(order
        .into_iter()
        .map(|paper| {
            let author_ids = by_paper.remove(&paper).expect("inserted above");
            BipartiteRecord {
                paper_id: paper,
                author_ids,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(1.738654321e-3, 6), "1.73865e-3");
        assert_eq!(fmt_sig(0.5, 3), "5.00e-1");
    }

    #[test]
    fn init_and_submodel_parsing() {
        assert_eq!(parse_init("spectral").unwrap(), InitStrategy::SoftSpectral);
        assert!(parse_init("bogus").is_err());
        assert_eq!(parse_submodel("aff").unwrap(), SubmodelKind::Aff);
        assert!(parse_submodel("bogus").is_err());
    }

    #[test]
    fn truth_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        fs::write(&path, "# manifest: {}\nnode,group\n1,2\n0,1\n2,1\n").unwrap();
        assert_eq!(read_truth_csv(&path).unwrap(), vec![1, 2, 1]);
    }

    #[test]
    fn bipartite_csv_grouping() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("authors.csv");
        fs::write(
            &path,
            "paper,author\nP1,alice\nP2,bob\nP1,carol\nP2,alice\n",
        )
        .unwrap();
        let records = read_bipartite_csv(&path).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].paper_id, "P1");
        assert_eq!(records[0].author_ids, vec!["alice", "carol"]);
        assert_eq!(records[1].author_ids, vec!["bob", "alice"]);

        fs::write(&path, "wrong,header\nx,y\n").unwrap();
        assert!(read_bipartite_csv(&path).is_err());
    }
}
