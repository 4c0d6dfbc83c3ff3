use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use gridclust::io::{self, HierarchyFile, ModelFile};
use gridclust::optimizer::FitResult;
use gridclust::summary::{self, summarize};
use gridclust::synth::{self, SynthSpec};
use gridclust::{
    agglomerate, build_dendrogram, compute_stats, evaluate, fit, kept_information, PointDataset, SearchConfig,
    SufficientStats,
};

#[derive(Parser)]
#[command(name = "gridclust", version, about = "Parameter-free clustering of curves with data-grid models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a grid model to a `curve_id,x,y` CSV file and write it as JSON.
    Fit(FitArgs),
    /// Coarsen a fitted model down to one cell: merge events, dendrogram
    /// and kept-information series.
    Hierarchy(ModelArgs),
    /// Generate the four-pattern synthetic dataset.
    Synth(SynthArgs),
    /// Per-cluster prototypes and conditional tables (JSON plus TSV).
    Summarize(ModelArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Ranks per initial interval [default: max(2, ceil(sqrt(m)/2))].
    #[arg(long)]
    points_per_interval: Option<usize>,
    #[arg(long, default_value_t = 2)]
    curves_per_cluster: usize,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    input: PathBuf,
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Total number of points.
    #[arg(long)]
    m: usize,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of the coordinate noise.
    #[arg(long, default_value_t = 0.25)]
    noise_std: f64,
    /// Curves per pattern.
    #[arg(long, default_value_t = 10)]
    dist_curves: usize,
    /// Truth sidecar [default: <output stem>.truth.csv].
    #[arg(long)]
    truth: Option<PathBuf>,
}

enum Failure {
    Input(anyhow::Error),
    Invariant(anyhow::Error),
}

trait OrInput<T> {
    fn input(self, context: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrInput<T> for Result<T, E> {
    fn input(self, context: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into().context(context())))
    }
}

fn invariant(holds: bool, message: impl FnOnce() -> String) -> Result<(), Failure> {
    if holds {
        Ok(())
    } else {
        Err(Failure::Invariant(anyhow!(message())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Hierarchy(args) => cmd_hierarchy(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Summarize(args) => cmd_summarize(args),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("GRIDCLUST_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Input(anyhow!("GRIDCLUST_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Invariant(e.into()))
}

fn read_dataset(path: &Path) -> Result<PointDataset, Failure> {
    io::read_points(path).input(|| format!("reading {}", path.display()))
}

fn cmd_fit(args: FitArgs) -> Result<(), Failure> {
    if args.restarts == 0 || args.curves_per_cluster == 0 || args.points_per_interval == Some(0) {
        return Err(Failure::Input(anyhow!("--restarts, --curves-per-cluster and --points-per-interval must be positive")));
    }
    let ds = read_dataset(&args.input)?;
    let config = SearchConfig {
        seed: args.seed,
        vns_restarts: args.restarts,
        initial_points_per_interval: args.points_per_interval,
        initial_curves_per_cluster: args.curves_per_cluster,
        ..SearchConfig::default()
    };
    let result = fit(&ds, &config);
    let check = evaluate(&ds, &compute_stats(&ds, &result.model).map_err(|e| Failure::Invariant(e.into()))?);
    invariant(check == result.criterion, || "fitted criterion does not match a fresh evaluation".into())?;
    let null = evaluate(&ds, &SufficientStats::null(&ds)).total;
    invariant(result.criterion.total <= null + 1e-9, || "fitted model is worse than the null model".into())?;
    io::write_json(&args.output, &ModelFile::from_fit(&ds, &result))
        .input(|| format!("writing {}", args.output.display()))?;
    println!(
        "{} curves, {} points: {} clusters, {} x {} intervals, criterion {:.4} (null {:.4})",
        ds.curves(),
        ds.len(),
        result.model.k_c,
        result.model.k_x(),
        result.model.k_y(),
        result.criterion.total,
        null
    );
    Ok(())
}

fn load_fit(args: &ModelArgs) -> Result<(PointDataset, FitResult), Failure> {
    let ds = read_dataset(&args.input)?;
    let file: ModelFile = io::read_json(&args.model).input(|| format!("reading {}", args.model.display()))?;
    let model = file.to_model(&ds).input(|| format!("matching {} to the dataset", args.model.display()))?;
    let stats = compute_stats(&ds, &model).input(|| "rebuilding the grid".into())?;
    let criterion = evaluate(&ds, &stats);
    invariant((criterion.total - file.criterion.total).abs() <= 1e-9, || {
        format!("stored criterion {} but the grid evaluates to {}", file.criterion.total, criterion.total)
    })?;
    let result = FitResult { model, stats, criterion, initial_criterion: file.initial_criterion, trace: file.trace };
    Ok((ds, result))
}

fn cmd_hierarchy(args: ModelArgs) -> Result<(), Failure> {
    let (ds, result) = load_fit(&args)?;
    let events = agglomerate(&ds, &result);
    let null = evaluate(&ds, &SufficientStats::null(&ds)).total;
    invariant(events.last().is_none_or(|e| e.criterion_after == null), || "merging did not end at the null model".into())?;
    let dendrogram = build_dendrogram(&events, result.model.k_c).map_err(|e| Failure::Invariant(e.into()))?;
    let pareto = kept_information(&result, &events, null);
    let count = events.len();
    io::write_json(&args.output, &HierarchyFile::new(events, &dendrogram, pareto))
        .input(|| format!("writing {}", args.output.display()))?;
    println!("{count} merge events, dendrogram over {} clusters", dendrogram.leaves);
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_synth(args: SynthArgs) -> Result<(), Failure> {
    let spec = SynthSpec { total_points: args.m, curves_per_distribution: args.dist_curves, noise_std: args.noise_std, seed: args.seed };
    let data = synth::generate(&spec).input(|| "invalid synthetic parameters".into())?;
    io::write_points(&args.output, &data.points).input(|| format!("writing {}", args.output.display()))?;
    let truth_path = args.truth.unwrap_or_else(|| sibling(&args.output, ".truth.csv"));
    let truth: Vec<(&str, usize)> = data.dataset.labels().iter().map(String::as_str).zip(data.truth.iter().copied()).collect();
    io::write_truth(&truth_path, &truth).input(|| format!("writing {}", truth_path.display()))?;
    println!("{} points over {} curves", data.dataset.len(), data.dataset.curves());
    Ok(())
}

fn cmd_summarize(args: ModelArgs) -> Result<(), Failure> {
    let (ds, result) = load_fit(&args)?;
    let summaries = summarize(&ds, &result.model);
    for s in &summaries {
        for (jx, col) in s.conditional.iter().enumerate() {
            let total: f64 = col.iter().sum();
            invariant(s.empty_columns[jx] || (total - 1.0).abs() <= 1e-12, || {
                format!("cluster {} column {jx} sums to {total}", s.cluster)
            })?;
        }
    }
    io::write_json(&args.output, &summaries).input(|| format!("writing {}", args.output.display()))?;
    let prototypes = sibling(&args.output, ".prototypes.tsv");
    let conditional = sibling(&args.output, ".conditional.tsv");
    summary::write_prototypes_tsv(&prototypes, &summaries).input(|| format!("writing {}", prototypes.display()))?;
    summary::write_conditional_tsv(&conditional, &summaries).input(|| format!("writing {}", conditional.display()))?;
    println!("{} cluster summaries", summaries.len());
    Ok(())
}
