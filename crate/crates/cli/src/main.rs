use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kickent::runner::{
    run_entropy_experiment, run_husimi_analysis, run_rate_sweep, ConfigError, ExperimentConfig, RunError,
    EXIT_FIT_FAILURE,
};

/// Entanglement production in weakly coupled kicked tops and rotors.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact linear entropy against its second-order prediction.
    Entropy(RunArgs),
    /// Normalised production rate Γ/Γ₀ across kick strengths.
    RateSweep(RunArgs),
    /// Reduced density matrices, Husimi grids and their minima.
    Husimi(RunArgs),
    /// Check a configuration and print its hash.
    ValidateConfig(Source),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long, value_parser = ["fig1a", "fig1b", "fig2a", "fig2b", "fig345"])]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides `threads`; default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Also write matplotlib scripts next to the data.
    #[arg(long)]
    plot_scripts: bool,
}

fn load(source: &Source) -> Result<ExperimentConfig, RunError> {
    match (&source.config, &source.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
            Ok(ExperimentConfig::from_toml_str(&text)?)
        }
        (None, Some(name)) => Ok(ExperimentConfig::preset(name)?),
        (None, None) => unreachable!("clap requires one source"),
    }
}

fn prepare(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), RunError> {
    let mut cfg = load(&args.source)?;
    if args.plot_scripts {
        cfg.output.plot_scripts = true;
    }
    if args.threads == Some(0) {
        return Err(ConfigError::Invalid(vec!["--threads must be at least 1".into()]).into());
    }
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    if let Some(dir) = &args.out {
        cfg.output.dir = dir.display().to_string();
    }
    Ok((cfg, out))
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn run(command: Command) -> Result<i32, RunError> {
    match command {
        Command::ValidateConfig(source) => {
            let cfg = load(&source)?;
            println!("ok {}", cfg.sha256());
            Ok(0)
        }
        Command::Entropy(args) => {
            let (cfg, out) = prepare(&args)?;
            let record = run_entropy_experiment(&cfg, args.threads)?;
            for run in &record.runs {
                println!(
                    "k = {:<6} ic = {:<3} S(T) = {:.6e}  S_pt(T) = {:.6e}  max rel. dev. = {}",
                    run.k,
                    run.ic_index,
                    run.exact.values.last().copied().unwrap_or(f64::NAN),
                    run.perturbative.values.last().copied().unwrap_or(f64::NAN),
                    opt(run.max_relative_deviation),
                );
            }
            print_written(&record.write(&out)?);
            warn(&record.header.warnings);
            Ok(if record.fit_failures() > 0 { EXIT_FIT_FAILURE } else { 0 })
        }
        Command::RateSweep(args) => {
            let (cfg, out) = prepare(&args)?;
            let record = run_rate_sweep(&cfg, args.threads)?;
            for row in &record.rows {
                match &row.rate {
                    Some(r) => println!(
                        "k = {:<6} ic = {:<3} Γ/Γ₀ = {:.4}  coth(γ/2) = {:.4}  Γ_pt/Γ₀ = {}  R² = {:.5}",
                        row.k,
                        row.ic_index,
                        r.ratio(),
                        r.ratio_predicted(),
                        opt(r.ratio_perturbative()),
                        r.rate.r2
                    ),
                    None => println!("k = {:<6} ic = {:<3} {:?}", row.k, row.ic_index, row.status),
                }
            }
            print_written(&record.write(&out)?);
            warn(&record.header.warnings);
            Ok(0)
        }
        Command::Husimi(args) => {
            let (cfg, out) = prepare(&args)?;
            let record = run_husimi_analysis(&cfg, args.threads)?;
            for run in &record.runs {
                for (label, part) in [("single", &run.single), ("coupled", &run.coupled)] {
                    println!(
                        "k = {:<6} ic = {:<3} {label:<7} S_lin = {:.4}  zeros = {} (multiplicity {})  positive minima = {}",
                        run.k, run.ic_index, part.linear_entropy, part.minima.zeros, part.minima.zero_multiplicity,
                        part.minima.positive
                    );
                }
            }
            print_written(&record.write(&out)?);
            warn(&record.header.warnings);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
