//! `dsf`: diagnostics, training, analysis and rescaling checks from the shell.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error,
//! 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use dsf_core::analysis::{self, DEFAULT_CLUSTERS};
use dsf_core::io::{self, write_csv, write_json};
use dsf_core::model::{Backbone, DsfConfig, DsfModel, Mode, Variant};
use dsf_core::poly::{rescale_trials, spectrum_grid, BasisKind, RESCALE_CHECK_POINTS};
use dsf_core::spectra::{self, FrequencyBand};
use dsf_core::trainer::{self, SplitMode};
use dsf_core::{Error, ErrorKind};

/// Tolerance `prop1-check` must beat.
const PROP1_TOLERANCE: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "dsf", version, about = "Diverse spectral filtering toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Homophily and local-frequency histograms plus a summary.
    Diagnose(DiagnoseArgs),
    /// Train over a runs × splits grid and export metrics, checkpoint and weights.
    Train(TrainArgs),
    /// Cluster exported node weights and sample centroid filter responses.
    Analyze(AnalyzeArgs),
    /// Randomized check that basis coefficients rescale exactly under λ ↦ ξλ.
    #[command(name = "prop1-check")]
    Prop1Check(Prop1Args),
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    k_hops: usize,
    /// Comma-separated bands among low, mid, high.
    #[arg(long, default_value = "mid")]
    frequencies: String,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// key = value config file; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    backbone: Option<String>,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    splits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "dense")]
    split_mode: String,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Output directory of a `train` invocation.
    #[arg(long)]
    run: PathBuf,
    /// Defaults to the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CLUSTERS)]
    clusters: usize,
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Prop1Args {
    /// gpr (monomial), bern (bernstein) or jacobi.
    #[arg(long, default_value = "gpr")]
    basis: String,
    #[arg(long, default_value_t = 10)]
    order: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fix ξ instead of sampling it.
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    jacobi_a: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    jacobi_b: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Diagnose(a) => diagnose(a),
        Command::Train(a) => train(a),
        Command::Analyze(a) => analyze(a),
        Command::Prop1Check(a) => prop1_check(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            })
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn diagnose(args: DiagnoseArgs) -> Result<ExitCode, Error> {
    let bands = args
        .frequencies
        .split(',')
        .map(|s| s.trim().parse::<FrequencyBand>())
        .collect::<Result<Vec<_>, _>>()?;
    let data: dsf_core::Dataset = io::load_dataset(&args.dataset)?;
    let graph = &data.graph;
    create_dir(&args.out)?;

    let homophily = analysis::homophily_histogram(graph, args.k_hops)?;
    write_csv(
        &args.out.join("homophily.csv"),
        &["node_id", "h"],
        homophily.iter().map(|(i, h)| vec![i.to_string(), h.to_string()]),
    )?;
    let h_values: Vec<f64> = homophily.iter().map(|&(_, h)| h).collect();

    let mut frequency_summaries = Vec::new();
    if !bands.is_empty() {
        let dec = spectra::eigendecompose(&graph.normalized_operators().laplacian)?;
        for band in bands {
            let hist = spectra::frequency_histogram(graph, &dec, band, args.k_hops)?;
            let file = match band {
                FrequencyBand::Mid => "frequency.csv".to_string(),
                other => format!("frequency_{}.csv", other.name()),
            };
            write_csv(
                &args.out.join(&file),
                &["node_id", "local_frequency"],
                hist.values.iter().map(|(i, v)| vec![i.to_string(), v.to_string()]),
            )?;
            let values: Vec<f64> = hist.values.iter().map(|&(_, v)| v).collect();
            frequency_summaries.push(json!({
                "band": band.name(),
                "file": file,
                "eigen_index": hist.eigen_index,
                "lambda_global": hist.lambda_global,
                "defined": values.len(),
                "std": analysis::sample_std(&values),
            }));
        }
    }

    let edge_homophily = graph.edge_homophily().ok();
    let summary = json!({
        "dataset": data.meta.name,
        "num_nodes": graph.num_nodes(),
        "num_edges": graph.num_edges(),
        "num_classes": graph.class_count(),
        "edge_homophily": edge_homophily,
        "k_hops": args.k_hops,
        "local_homophily": {"defined": h_values.len(), "std": analysis::sample_std(&h_values)},
        "frequencies": frequency_summaries,
    });
    write_json(&args.out.join("summary.json"), &summary)?;
    match edge_homophily {
        Some(h) => println!("{}: N={} |E|={} H={h:.4}", data.meta.name, graph.num_nodes(), graph.num_edges()),
        None => println!("{}: N={} |E|=0", data.meta.name, graph.num_nodes()),
    }
    Ok(ExitCode::SUCCESS)
}

fn resolve_config(args: &TrainArgs) -> Result<DsfConfig, Error> {
    let mut config = match &args.config {
        Some(path) => io::load_config(path)?,
        None => DsfConfig::default(),
    };
    if let Some(m) = &args.mode {
        config.mode = m.parse::<Mode>()?;
    }
    if let Some(v) = &args.variant {
        config.variant = v.parse::<Variant>()?;
    }
    if let Some(b) = &args.backbone {
        config.backbone = b.parse::<Backbone>()?;
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        config.set(k.trim(), v.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn train(args: TrainArgs) -> Result<ExitCode, Error> {
    let config = resolve_config(&args)?;
    let split_mode: SplitMode = args.split_mode.parse()?;
    if args.runs == 0 || args.splits == 0 {
        return Err(Error::Config("runs and splits must be positive".into()));
    }
    let data: dsf_core::Dataset = io::load_dataset(&args.dataset)?;
    let graph = &data.graph;
    let model = DsfModel::new(graph, config.clone())?;
    let splits = trainer::make_splits(graph.num_nodes(), split_mode, args.splits, args.seed)?;
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cells = trainer::run_grid(graph, &model, &splits, args.runs, args.seed, threads)?;
    let accs: Vec<f64> = cells.iter().map(|c| c.outcome.test_acc).collect();
    let agg = trainer::aggregate(&accs)?;
    let hash = io::config_hash(&config);

    create_dir(&args.out)?;
    let per_run: Vec<Value> = cells
        .iter()
        .map(|c| {
            json!({
                "run": c.run,
                "split": c.split,
                "seed": c.seed,
                "test_acc": c.outcome.test_acc,
                "val_acc": c.outcome.val_acc,
                "train_acc": c.outcome.train_acc,
                "best_epoch": c.outcome.best_epoch,
                "epochs": c.outcome.epochs_run,
            })
        })
        .collect();
    let metrics = json!({
        "dataset": data.meta.name,
        "backbone": config.backbone.to_string(),
        "mode": config.mode.to_string(),
        "variant": config.variant.to_string(),
        "split_mode": split_mode.to_string(),
        "runs": args.runs,
        "splits": args.splits,
        "seed": args.seed,
        "mean_acc": agg.mean,
        "ci95": agg.ci95,
        "per_run": per_run,
        "config_hash": hash,
    });
    write_json(&args.out.join("metrics.json"), &metrics)?;
    io::write_atomic(&args.out.join("config.txt"), io::render_config(&config).as_bytes())?;

    // Artifacts of the first cell, i.e. run 0 on split 0.
    let first = cells
        .iter()
        .find(|c| c.run == 0 && c.split == 0)
        .expect("grid contains cell (0, 0)");
    let params = &first.outcome.best_params;
    io::write_atomic(
        &args.out.join("checkpoint.json"),
        format!("{}\n", params.to_checkpoint().to_json()?).as_bytes(),
    )?;
    let betas = model.evaluate(params)?.betas;
    let mut header = vec!["node_id".to_string()];
    header.extend((0..betas.cols()).map(|k| format!("beta_{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &args.out.join("betas.csv"),
        &header,
        (0..betas.rows()).map(|i| {
            std::iter::once(i.to_string())
                .chain(betas.row(i).iter().map(|v| v.to_string()))
                .collect()
        }),
    )?;
    println!(
        "{} {}-{}-{}: test accuracy {:.2}% ± {:.2} over {} cells",
        data.meta.name,
        config.variant,
        config.backbone,
        config.mode,
        100.0 * agg.mean,
        100.0 * agg.ci95,
        agg.n
    );
    Ok(ExitCode::SUCCESS)
}

fn analyze(args: AnalyzeArgs) -> Result<ExitCode, Error> {
    let out = args.out.clone().unwrap_or_else(|| args.run.clone());
    let config = io::load_config(&args.run.join("config.txt"))?;
    let (header, rows) = io::read_csv(&args.run.join("betas.csv"))?;
    if header.len() < 2 || header[0] != "node_id" {
        return Err(Error::Parse {
            path: args.run.join("betas.csv"),
            line: 1,
            msg: "expected node_id,beta_0,…".into(),
        });
    }
    let node_ids: Vec<String> = rows.iter().map(|r| format!("{}", r[0] as usize)).collect();
    let values: Vec<Vec<f64>> = rows.iter().map(|r| r[1..].to_vec()).collect();
    let b = dsf_core::Dense::from_rows(&values)?;
    if b.cols() != config.order + 1 {
        return Err(Error::Config(format!(
            "betas.csv has {} orders, config says K = {}",
            b.cols(),
            config.order
        )));
    }
    let clustering = analysis::cluster_weights(&b, args.clusters, args.seed)?;
    let kind: BasisKind<f64> = config.basis();
    let grid = spectrum_grid::<f64>(args.grid);
    let curves = analysis::centroid_curves(&clustering, &kind, &grid);
    let projection = analysis::pca_2d(&b)?;

    create_dir(&out)?;
    write_csv(
        &out.join("clusters.csv"),
        &["node_id", "cluster"],
        node_ids
            .iter()
            .zip(&clustering.assignments)
            .map(|(id, c)| vec![id.clone(), c.to_string()]),
    )?;
    write_csv(
        &out.join("centroid_curves.csv"),
        &["cluster", "lambda", "g"],
        curves.iter().enumerate().flat_map(|(c, curve)| {
            grid.iter()
                .zip(curve)
                .map(move |(l, g)| vec![c.to_string(), l.to_string(), g.to_string()])
        }),
    )?;
    write_csv(
        &out.join("projection.csv"),
        &["node_id", "pc1", "pc2"],
        node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| vec![id.clone(), projection[(i, 0)].to_string(), projection[(i, 1)].to_string()]),
    )?;
    println!(
        "{} clusters, inertia {:.6e}, {} Lloyd iterations",
        clustering.k(),
        clustering.inertia,
        clustering.iterations
    );
    Ok(ExitCode::SUCCESS)
}

fn prop1_check(args: Prop1Args) -> Result<ExitCode, Error> {
    let kind: BasisKind<f64> = match args.basis.to_ascii_lowercase().as_str() {
        "gpr" | "monomial" => BasisKind::Monomial,
        "bern" | "bernstein" => BasisKind::Bernstein,
        "jacobi" => BasisKind::jacobi(args.jacobi_a, args.jacobi_b)?,
        other => return Err(Error::Config(format!("unknown basis {other:?}"))),
    };
    let report = rescale_trials(&kind, args.order, args.trials, args.seed, args.xi)?;
    let pass = report.max_error < PROP1_TOLERANCE;
    println!(
        "{} K={} trials={} grid={} max_error={:e} worst_xi={} {}",
        kind.name(),
        args.order,
        report.trials,
        RESCALE_CHECK_POINTS,
        report.max_error,
        report.worst_xi,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(3) })
}
