//! `fspr` command line: rank, compare, bench, synth.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fspr::error::Error;
use fspr::exact::{exact_fspr, DEFAULT_DENSE_CAP};
use fspr::gmres::{fair_gmres, protected_mass, KrylovConfig};
use fspr::graph::Group;
use fspr::io::{self, BenchRow, Dataset, OutputFormat, ScoreRecord};
use fspr::meanfield::{
    class_means_to_scores, closed_form_pipeline, estimate_jump, meanfield_iterate,
    MF_ITERATE_MAX, MF_ITERATE_TOL,
};
use fspr::metrics;
use fspr::score::{FairnessSpec, ScoreVector, SolverReport};
use fspr::synth::{generate_with_meta, SynthSpec};
use fspr::{partition_degree_classes, GroupAssignment};

#[derive(Parser)]
#[command(
    name = "fspr",
    version,
    about = "Fairness-sensitive PageRank: solvers, comparisons, and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank nodes with one solver; writes a score file and a run report.
    Rank(RankArgs),
    /// Compare two score files; writes metrics and figure-ready curves.
    Compare(CompareArgs),
    /// Time solvers across synthetic graphs; writes a runtime table.
    Bench(BenchArgs),
    /// Generate a synthetic two-group graph as edge and label files.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Exact,
    Gmres,
    Meanfield,
    MeanfieldIterative,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Gmres => "gmres",
            Method::Meanfield => "meanfield",
            Method::MeanfieldIterative => "meanfield-iterative",
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Edge list: one `source<TAB>target` per line, `#` comments ignored.
    #[arg(long, requires = "labels", conflicts_with = "synth")]
    edges: Option<PathBuf>,
    /// Label file: `node_id<TAB>{0|1}` per line, 1 = protected.
    #[arg(long, requires = "edges")]
    labels: Option<PathBuf>,
    /// Synthetic graph spec, e.g. `n=1000,phi=0.3,in=powerlaw(2.5,1,31),out=poisson(8)`.
    #[arg(long, conflicts_with_all = ["edges", "labels"])]
    synth: Option<String>,
    /// Merge duplicate edges instead of rejecting the input.
    #[arg(long)]
    dedup: bool,
    /// Seed for synthetic graphs; a `seed=` inside the spec wins.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl InputArgs {
    fn load(&self) -> Result<Dataset, Error> {
        if let Some(spec_text) = &self.synth {
            let spec = parse_synth(spec_text, self.seed)?;
            let (graph, groups, _) = generate_with_meta(&spec)?;
            let node_ids = (0..graph.node_count() as u64).collect();
            Ok(Dataset {
                graph,
                groups,
                node_ids,
            })
        } else {
            match (&self.edges, &self.labels) {
                (Some(edges), Some(labels)) => io::load_dataset(edges, labels, self.dedup),
                _ => Err(Error::InvalidParameter(
                    "provide either --edges with --labels, or --synth".into(),
                )),
            }
        }
    }
}

fn parse_synth(text: &str, fallback_seed: u64) -> Result<SynthSpec, Error> {
    let mut spec: SynthSpec = text.parse()?;
    if !text.contains("seed=") {
        spec.seed = fallback_seed;
    }
    Ok(spec)
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Solver to run.
    #[arg(long, value_enum)]
    method: Method,
    /// Teleport probability.
    #[arg(long, default_value_t = 0.15)]
    nu: f64,
    /// Protected-mass target in (0, 1); defaults to the protected fraction.
    #[arg(long)]
    target: Option<f64>,
    /// Solver tolerance (GMRES relative residual or mean-field L1 change).
    #[arg(long)]
    tol: Option<f64>,
    /// GMRES restart dimension.
    #[arg(long, default_value_t = 50)]
    restart: usize,
    /// Node cap for the dense exact method.
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    dense_cap: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Output format for scores and reports.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct CompareArgs {
    /// Baseline score file (CSV or JSON, as written by `rank`).
    #[arg(long)]
    baseline: PathBuf,
    /// Approximate score file to evaluate against the baseline.
    #[arg(long)]
    approx: PathBuf,
    /// Label file covering every scored node.
    #[arg(long)]
    labels: PathBuf,
    /// Teleport probability used for the closed-form overlays.
    #[arg(long, default_value_t = 0.15)]
    nu: f64,
    /// Protected-mass target; defaults to the protected fraction.
    #[arg(long)]
    target: Option<f64>,
    /// Multiplicative factor for the logarithmic in-degree bins.
    #[arg(long, default_value_t = 1.05)]
    factor: f64,
    /// Top-K sizes for the overlap metric.
    #[arg(long, value_delimiter = ',', default_values_t = vec![10, 50, 100, 200])]
    topk: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct BenchArgs {
    /// Synthetic graph specs, one per flag occurrence.
    #[arg(long = "synth", required = true)]
    synth: Vec<String>,
    /// Methods to time.
    #[arg(long, value_enum, value_delimiter = ',',
          default_values_t = vec![Method::Exact, Method::Gmres, Method::Meanfield])]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 0.15)]
    nu: f64,
    #[arg(long)]
    target: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 50)]
    restart: usize,
    /// Above this node count the exact method is recorded as CAP.
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    dense_cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthetic graph spec.
    #[arg(long)]
    synth: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rank(args) => cmd_rank(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Exit codes: 2 parse/input error, 3 infeasible target, 4 dense cap,
/// 5 no convergence, 1 anything else.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. }
        | Error::Io(_)
        | Error::InvalidParameter(_)
        | Error::MissingLabel { .. }
        | Error::DuplicateEdge { .. }
        | Error::NodeOutOfRange { .. }
        | Error::EmptyGraph => 2,
        Error::Infeasible { .. } => 3,
        Error::GraphTooLargeForDense { .. } => 4,
        Error::NoConvergence { .. } => 5,
        _ => 1,
    }
}

fn fairness_spec(nu: f64, target: Option<f64>) -> Result<FairnessSpec, Error> {
    let spec = FairnessSpec::new(nu)?;
    match target {
        Some(t) => spec.with_target(t),
        None => Ok(spec),
    }
}

fn krylov_config(restart: usize, tol: Option<f64>) -> KrylovConfig {
    KrylovConfig {
        restart_dim: restart,
        tol: tol.unwrap_or(KrylovConfig::default().tol),
        ..KrylovConfig::default()
    }
}

/// Runs one solver, returning scores plus a report with the protected mass
/// filled in.
fn run_method(
    method: Method,
    dataset: &Dataset,
    spec: &FairnessSpec,
    krylov: &KrylovConfig,
    mf_tol: f64,
    dense_cap: usize,
) -> Result<(ScoreVector, SolverReport), Error> {
    let graph = &dataset.graph;
    let groups: &GroupAssignment = &dataset.groups;
    match method {
        Method::Exact => {
            let (scores, _jump, report) = exact_fspr(graph, groups, spec, dense_cap)?;
            Ok((scores, report))
        }
        Method::Gmres => {
            let (scores, _jump, report) = fair_gmres(graph, groups, spec, krylov)?;
            Ok((scores, report))
        }
        Method::Meanfield => {
            let start = Instant::now();
            let scores = closed_form_pipeline(graph, groups.labels(), spec)?;
            let mass = protected_mass(&scores, groups);
            Ok((
                scores,
                SolverReport {
                    outer_iterations: 1,
                    inner_iterations_total: 0,
                    final_residual: 0.0,
                    achieved_protected_mass: Some(mass),
                    wall_time_seconds: start.elapsed().as_secs_f64(),
                    matvec_count: 0,
                    residual_history: Vec::new(),
                },
            ))
        }
        Method::MeanfieldIterative => {
            let start = Instant::now();
            let partition = partition_degree_classes(graph, groups)?;
            let jump = estimate_jump(graph, groups)?;
            let (means, iterations) =
                meanfield_iterate(&partition, &jump, spec, mf_tol, MF_ITERATE_MAX)?;
            let scores = class_means_to_scores(&partition, &means)?;
            let mass = protected_mass(&scores, groups);
            Ok((
                scores,
                SolverReport {
                    outer_iterations: iterations,
                    inner_iterations_total: 0,
                    final_residual: 0.0,
                    achieved_protected_mass: Some(mass),
                    wall_time_seconds: start.elapsed().as_secs_f64(),
                    matvec_count: 0,
                    residual_history: Vec::new(),
                },
            ))
        }
    }
}

fn cmd_rank(args: RankArgs) -> Result<(), Error> {
    let format: OutputFormat = args.format.parse()?;
    let dataset = args.input.load()?;
    let spec = fairness_spec(args.nu, args.target)?;
    let krylov = krylov_config(args.restart, args.tol);
    let mf_tol = args.tol.unwrap_or(MF_ITERATE_TOL);

    let (scores, report) = run_method(
        args.method,
        &dataset,
        &spec,
        &krylov,
        mf_tol,
        args.dense_cap,
    )?;

    std::fs::create_dir_all(&args.out)?;
    let records = io::score_records(
        &dataset.graph,
        &dataset.groups,
        Some(&dataset.node_ids),
        &scores,
    );
    let score_path = args.out.join(format!("scores.{}", format.extension()));
    io::write_scores(&score_path, &records, format)?;
    let report_path = args.out.join(format!("report.{}", format.extension()));
    io::write_solver_report(&report_path, args.method.name(), &report, format)?;

    println!(
        "{}: N={} M={} protected_mass={:.6} wall={:.3}s -> {}",
        args.method.name(),
        dataset.graph.node_count(),
        dataset.graph.edge_count(),
        report.achieved_protected_mass.unwrap_or(f64::NAN),
        report.wall_time_seconds,
        score_path.display()
    );
    Ok(())
}

/// Sorted-by-id score columns extracted from a score file.
struct ScoreColumns {
    ids: Vec<u64>,
    k_in: Vec<u32>,
    k_out: Vec<u32>,
    scores: Vec<f64>,
}

fn score_columns(mut records: Vec<ScoreRecord>) -> ScoreColumns {
    records.sort_unstable_by_key(|r| r.node_id);
    ScoreColumns {
        ids: records.iter().map(|r| r.node_id).collect(),
        k_in: records.iter().map(|r| r.k_in).collect(),
        k_out: records.iter().map(|r| r.k_out).collect(),
        scores: records.iter().map(|r| r.score).collect(),
    }
}

fn cmd_compare(args: CompareArgs) -> Result<(), Error> {
    let format: OutputFormat = args.format.parse()?;
    let baseline = score_columns(io::read_scores(&args.baseline)?);
    let approx = score_columns(io::read_scores(&args.approx)?);
    if baseline.ids != approx.ids {
        return Err(Error::NodeSetMismatch);
    }

    let label_pairs = io::read_label_file(&args.labels)?;
    let labels: Vec<Group> = {
        let mut out = Vec::with_capacity(baseline.ids.len());
        for &id in &baseline.ids {
            let pos = label_pairs
                .binary_search_by_key(&id, |&(node, _)| node)
                .map_err(|_| Error::MissingLabel { node: id })?;
            out.push(label_pairs[pos].1);
        }
        out
    };
    let phi =
        labels.iter().filter(|g| g.is_protected()).count() as f64 / labels.len() as f64;
    let target = args.target.unwrap_or(phi);

    let report = metrics::compare(
        &approx.scores,
        &baseline.scores,
        &labels,
        target,
        &args.topk,
    )?;
    let class_points = metrics::class_mean_points(
        &baseline.k_in,
        &baseline.k_out,
        &labels,
        &baseline.scores,
        &approx.scores,
    )?;
    let score_curve = metrics::score_vs_indegree_points(
        &baseline.k_in,
        &labels,
        &baseline.scores,
        args.nu,
        args.factor,
    )?;
    let cv_curve = metrics::cv_vs_indegree_points(
        &baseline.k_in,
        &baseline.k_out,
        &labels,
        &baseline.scores,
        args.nu,
        args.factor,
    )?;

    // Score-vs-in-degree correlation, over raw nodes and over binned means
    // (both views are common; graphs with constant in-degree have neither).
    let mut extras = Vec::new();
    let k_in_f: Vec<f64> = baseline.k_in.iter().map(|&k| k as f64).collect();
    if let Ok(rho) = metrics::pearson(&baseline.scores, &k_in_f) {
        extras.push(("pearson_vs_indegree".to_string(), rho));
    }
    if let Ok(curve) = metrics::log_binned_curve(&baseline.scores, &baseline.k_in, args.factor)
    {
        let mut centers: Vec<f64> = curve.bins.iter().map(|b| b.center).collect();
        let mut means: Vec<f64> = curve.bins.iter().map(|b| b.mean).collect();
        if let Some(zero) = &curve.zero_bin {
            centers.push(0.0);
            means.push(zero.mean);
        }
        if let Ok(rho) = metrics::pearson(&means, &centers) {
            extras.push(("pearson_vs_indegree_binned".to_string(), rho));
        }
    }

    std::fs::create_dir_all(&args.out)?;
    let ext = format.extension();
    io::write_comparison(
        &args.out.join(format!("comparison.{ext}")),
        &report,
        &extras,
        format,
    )?;
    io::write_class_mean_curve(
        &args.out.join(format!("class_means.{ext}")),
        &class_points,
        format,
    )?;
    io::write_degree_curve(
        &args.out.join(format!("score_vs_indegree.{ext}")),
        &score_curve,
        "mean",
        format,
    )?;
    io::write_degree_curve(
        &args.out.join(format!("cv_vs_indegree.{ext}")),
        &cv_curve,
        "cv",
        format,
    )?;

    println!(
        "compare: N={} utility_loss={:.3e} pearson={:.4} kendall_tau={:.4} -> {}",
        baseline.ids.len(),
        report.utility_loss,
        report.pearson,
        report.kendall_tau,
        args.out.display()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    let format: OutputFormat = args.format.parse()?;
    let krylov = krylov_config(args.restart, args.tol);
    let spec = fairness_spec(args.nu, args.target)?;
    let mf_tol = args.tol.unwrap_or(MF_ITERATE_TOL);

    let mut rows = Vec::new();
    for spec_text in &args.synth {
        let synth_spec = parse_synth(spec_text, args.seed)?;
        let (graph, groups, _) = generate_with_meta(&synth_spec)?;
        let dataset = Dataset {
            node_ids: (0..graph.node_count() as u64).collect(),
            graph,
            groups,
        };
        let label = synth_spec.to_string();
        for &method in &args.methods {
            let row = |status: String, wall: Option<f64>| BenchRow {
                label: label.clone(),
                nodes: dataset.graph.node_count(),
                edges: dataset.graph.edge_count(),
                method: method.name().to_string(),
                status,
                wall_time_seconds: wall,
            };
            if method == Method::Exact && dataset.graph.node_count() > args.dense_cap {
                rows.push(row("CAP".into(), None));
                continue;
            }
            let started = Instant::now();
            match run_method(method, &dataset, &spec, &krylov, mf_tol, args.dense_cap) {
                Ok(_) => {
                    let wall = started.elapsed().as_secs_f64();
                    rows.push(row("ok".into(), Some(wall)));
                }
                Err(err) => {
                    // One failing cell must not abort the table.
                    rows.push(row(err.to_string().replace(',', ";"), None));
                }
            }
        }
    }

    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join(format!("bench.{}", format.extension()));
    io::write_bench_table(&path, &rows, format)?;
    for r in &rows {
        let time = r
            .wall_time_seconds
            .map(|t| format!("{t:.4}s"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<28} N={:<9} M={:<10} {:<20} {:<8} {}",
            r.label, r.nodes, r.edges, r.method, r.status, time
        );
    }
    println!("-> {}", path.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let spec = parse_synth(&args.synth, args.seed)?;
    let (graph, groups, meta) = generate_with_meta(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    io::write_edge_list(&args.out.join("edges.tsv"), &graph, None)?;
    io::write_label_file(&args.out.join("labels.tsv"), &groups, None)?;
    io::write_synth_meta(&args.out.join("meta.json"), &meta)?;
    println!(
        "synth: N={} M={} protected={} rewired={} -> {}",
        graph.node_count(),
        graph.edge_count(),
        meta.realized_protected,
        meta.rewired_edges,
        args.out.display()
    );
    Ok(())
}
