//! Command-line front end: evaluate strategies, inspect the strategy
//! matrix, and validate dataset files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uwb_snn::config::PipelineConfig;
use uwb_snn::dataset::parse_files;
use uwb_snn::pipeline::{
    format_metrics_table, run_all_with, strategy_by_id, strategy_table, write_outputs,
    StrategyConfig,
};
use uwb_snn::synthetic::generate_synthetic;
use uwb_snn::{Error, Result};

#[derive(Parser)]
#[command(
    name = "uwb-snn",
    version,
    about = "Spiking-network LOS/NLOS classifier for UWB channel measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate strategies and write manifest, timings, and metrics table
    Run(RunArgs),
    /// Print the ablation strategy matrix
    ListStrategies,
    /// Parse dataset files and report rows, classes, and content hashes
    ValidateDataset(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file; built-in defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Evaluate on the generated separable dataset instead of CSV files
    #[arg(long)]
    synthetic: bool,
    /// Record count for --synthetic (default: eval.synthetic_n)
    #[arg(long)]
    synthetic_n: Option<usize>,
    /// Strategy id to run (1..=10); repeatable. Default: all ten
    #[arg(long = "strategy")]
    strategies: Vec<u8>,
    /// Run seed; repeatable. Default: eval.seeds from the config
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write per-record predictions.csv
    #[arg(long)]
    predictions: bool,
    /// Also write reservoir diagnostics to liquid_stats.json
    #[arg(long)]
    dump_liquid: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// CSV files; default: dataset.paths from --config
    paths: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if !args.seeds.is_empty() {
        cfg.eval.seeds = args.seeds.clone();
    }
    if let Some(n) = args.synthetic_n {
        cfg.eval.synthetic_n = n;
    }
    cfg.validate()?;

    let strategies: Vec<StrategyConfig> = if args.strategies.is_empty() {
        strategy_table().to_vec()
    } else {
        args.strategies
            .iter()
            .map(|&id| strategy_by_id(id))
            .collect::<Result<_>>()?
    };

    let dataset = if args.synthetic {
        generate_synthetic(cfg.eval.synthetic_n, cfg.dataset.split_seed)?
    } else {
        if cfg.dataset.paths.is_empty() {
            return Err(Error::Config(
                "no dataset configured: set [dataset].paths or pass --synthetic".into(),
            ));
        }
        parse_files(&cfg.dataset.paths, &cfg.dataset.schema)?
    };
    eprintln!(
        "dataset: {} records from {} source(s)",
        dataset.samples.len(),
        dataset.files.len()
    );

    let output = run_all_with(
        &cfg,
        &dataset.samples,
        &dataset.files,
        &strategies,
        |run, secs| {
            eprintln!(
                "S{} seed {}: accuracy {:.1}%  f1 {:.3}  ({secs:.1} s)",
                run.strategy_id,
                run.seed,
                100.0 * run.metrics.accuracy,
                run.metrics.f1
            );
        },
    )?;

    write_outputs(&args.out, &output, args.predictions, args.dump_liquid)?;
    print!("{}", format_metrics_table(&output.manifest));
    println!("outputs written to {}", args.out.display());
    Ok(())
}

fn cmd_list_strategies() {
    println!(
        "{:<9} {:<10} {:<10} {:<10}",
        "strategy", "features", "rf_liquid", "cir_liquid"
    );
    for s in strategy_table() {
        let yn = |b: bool| if b { "yes" } else { "no" };
        println!(
            "{:<9} {:<10} {:<10} {:<10}",
            s.name(),
            s.features.label(),
            yn(s.rf_liquid),
            yn(s.cir_liquid)
        );
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let paths = if args.paths.is_empty() {
        cfg.dataset.paths.clone()
    } else {
        args.paths
    };
    if paths.is_empty() {
        return Err(Error::Config(
            "no files to validate: pass paths or a --config with [dataset].paths".into(),
        ));
    }
    let dataset = parse_files(&paths, &cfg.dataset.schema)?;
    for f in &dataset.files {
        println!("{}: {} rows, sha256 {}", f.path.display(), f.rows, f.sha256);
    }
    let nlos = dataset.samples.iter().filter(|s| s.label == 1).count();
    let cir_len = dataset.samples.first().map_or(0, |s| s.cir.len());
    println!(
        "total {} records ({} LOS, {} NLOS), CIR length {}",
        dataset.samples.len(),
        dataset.samples.len() - nlos,
        nlos,
        cir_len
    );
    println!("ok");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::ListStrategies => {
            cmd_list_strategies();
            Ok(())
        }
        Command::ValidateDataset(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
