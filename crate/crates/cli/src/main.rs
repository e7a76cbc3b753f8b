use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use proxyfair::experiment::{emit_plot_data, run_experiment, ExperimentConfig};
use proxyfair::{Error, ErrorFamily};

/// Trains sensitive-attribute proxies, runs fairness-constrained learning
/// over a gamma grid and writes tradeoff tables, Pareto frontiers and plot data.
#[derive(Debug, Parser)]
#[command(name = "proxyfair", version)]
struct Args {
    /// Experiment config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Comma-separated gamma values; overrides the config.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<Grid>,
}

#[derive(Debug, Clone)]
struct Grid(Vec<f64>);

fn parse_grid(text: &str) -> Result<Grid, String> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{}` is not a number", v.trim()))
        })
        .collect::<Result<_, _>>()
        .map(Grid)
}

fn exit_code(family: ErrorFamily) -> u8 {
    match family {
        ErrorFamily::Config => 2,
        ErrorFamily::Data => 3,
        ErrorFamily::Training => 4,
    }
}

fn load(args: &Args) -> Result<(ExperimentConfig, PathBuf), Error> {
    let text =
        std::fs::read_to_string(&args.config).map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    config.resolve_paths(args.config.parent().unwrap_or(Path::new(".")));
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(grid) = &args.grid {
        config.gamma_grid = grid.0.clone();
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set `out`".into()))?;
    config.validate()?;
    Ok((config, out))
}

fn run(args: &Args) -> Result<(), Error> {
    let (config, out) = load(args)?;
    let summary = run_experiment(&config, &out, args.jobs)?;
    let plots = emit_plot_data(&out)?;
    log::info!(
        "{} tradeoff points, {} plot files in {}",
        summary.points.len(),
        plots.len(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PROXYFAIR_LOG", "error")).init();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let family = err.family();
            eprintln!("error[{}]: {}", family.name(), err.to_string().replace('\n', " "));
            ExitCode::from(exit_code(family))
        }
    }
}
