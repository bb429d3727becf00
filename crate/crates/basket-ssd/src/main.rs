//! Command-line front door: parses design configuration files, runs the
//! sample-size solvers and the simulation engine, and emits reports.

#![allow(clippy::needless_range_loop)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use basket_ssd::config::{self, LoadedConfig};
use basket_ssd::report::{
    render_design_report, render_simulate, render_ssd, render_weights, Format, SimRow,
};
use basket_ssd::{
    sample_size_borrowing, sample_size_no_borrowing, run_study, Error, Model, Result,
};

#[derive(Parser)]
#[command(
    name = "basket-ssd",
    version,
    about = "Sample size determination for randomised basket trials with commensurate-prior borrowing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Design configuration file (JSON)
    config: PathBuf,

    /// Output format: table, json, or csv
    #[arg(long, default_value = "table")]
    format: String,

    /// Write the report to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads for simulation (default: available parallelism);
    /// the BASKET_SSD_THREADS environment variable takes precedence
    #[arg(long)]
    threads: Option<usize>,

    /// Print the parsed configuration back as canonical JSON and exit
    #[arg(long)]
    dump_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve per-subtrial sample sizes
    Ssd {
        #[command(flatten)]
        common: CommonArgs,

        /// Size each subtrial on its own prior, without borrowing
        #[arg(long)]
        no_borrowing: bool,
    },
    /// Print the pairwise weight matrix and the synthesis weights
    Weights {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Estimate operating characteristics by Monte Carlo simulation
    Simulate {
        #[command(flatten)]
        common: CommonArgs,

        /// Analysis model: borrowing, standalone, or both
        #[arg(long, default_value = "borrowing")]
        model: String,

        /// Override the replicate count from the config
        #[arg(long)]
        replicates: Option<u64>,

        /// Override the seed from the config
        #[arg(long)]
        seed: Option<u64>,

        /// Solve sample sizes before simulating, ignoring simulation.n
        #[arg(long)]
        solve_n: bool,
    },
    /// Emit the full design report: parameters, weights, priors, sizes
    Report {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<()> {
    let common = match &command {
        Command::Ssd { common, .. }
        | Command::Weights { common }
        | Command::Simulate { common, .. }
        | Command::Report { common } => common,
    };
    let format: Format = common.format.parse()?;
    configure_threads(common.threads)?;
    let loaded = config::load(&common.config)?;
    if common.dump_config {
        return emit(&config::dump(&loaded.raw), &common.out);
    }
    let text = match &command {
        Command::Ssd { no_borrowing, .. } => {
            let solution = if *no_borrowing {
                sample_size_no_borrowing(&loaded.design, &loaded.spec)?
            } else {
                sample_size_borrowing(&loaded.design, &loaded.spec)?
            };
            render_ssd(&loaded.subtrial_labels(), &solution, format)
        }
        Command::Weights { .. } => {
            render_weights(&loaded.subtrial_labels(), &loaded.design, format)?
        }
        Command::Simulate { model, replicates, seed, solve_n, .. } => {
            let mut loaded = loaded;
            simulate_report(&mut loaded, model, *replicates, *seed, *solve_n, format)?
        }
        Command::Report { .. } => {
            let borrowing = sample_size_borrowing(&loaded.design, &loaded.spec)?;
            let no_borrowing = sample_size_no_borrowing(&loaded.design, &loaded.spec)?;
            render_design_report(
                loaded.label(),
                &loaded.subtrial_labels(),
                &loaded.design,
                &loaded.spec,
                &borrowing,
                &no_borrowing,
                format,
            )?
        }
    };
    emit(&text, &common.out)
}

/// Pins the global worker pool when a thread count is requested, either by
/// BASKET_SSD_THREADS or by --threads. Without either, the default pool
/// uses all available parallelism.
fn configure_threads(flag: Option<usize>) -> Result<()> {
    let threads = match std::env::var("BASKET_SSD_THREADS") {
        Ok(value) => Some(value.parse::<usize>().map_err(|_| {
            Error::Config(format!(
                "BASKET_SSD_THREADS: expected a positive integer, got \"{value}\""
            ))
        })?),
        Err(std::env::VarError::NotPresent) => flag,
        Err(e) => return Err(Error::Config(format!("BASKET_SSD_THREADS: {e}"))),
    };
    if let Some(threads) = threads {
        if threads == 0 {
            return Err(Error::Config("threads: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("threads: {e}")))?;
    }
    Ok(())
}

fn simulate_report(
    loaded: &mut LoadedConfig,
    model: &str,
    replicates: Option<u64>,
    seed: Option<u64>,
    solve_n: bool,
    format: Format,
) -> Result<String> {
    let models = match model {
        "borrowing" => vec![Model::Borrowing],
        "standalone" => vec![Model::StandAlone],
        "both" => vec![Model::Borrowing, Model::StandAlone],
        other => {
            return Err(Error::Config(format!(
                "model: expected \"borrowing\", \"standalone\", or \"both\", got \"{other}\""
            )))
        }
    };
    if let Some(sim) = loaded.sim.as_mut() {
        if let Some(replicates) = replicates {
            sim.replicates = replicates;
        }
        if let Some(seed) = seed {
            sim.seed = seed;
        }
    }
    let configured_n = loaded.sim.as_ref().and_then(|sim| sim.n.clone());
    let n = match (solve_n, configured_n) {
        (false, Some(n)) => n,
        _ => {
            // Planned sizes come from the design itself: the borrowing
            // solve when any run analyses with borrowing, the stand-alone
            // solve otherwise.
            let solution = if models.contains(&Model::Borrowing) {
                sample_size_borrowing(&loaded.design, &loaded.spec)?
            } else {
                sample_size_no_borrowing(&loaded.design, &loaded.spec)?
            };
            solution.n_integer
        }
    };
    let scenario = loaded.scenario(n.clone())?;
    let mut rows = Vec::with_capacity(models.len() * loaded.design.k());
    for model in &models {
        let oc = run_study(&scenario, &loaded.design, &loaded.spec, *model)?;
        for i in 0..loaded.design.k() {
            rows.push(SimRow {
                scenario: loaded.label().to_string(),
                model: model.as_str().to_string(),
                subtrial: i + 1,
                n: n[i],
                rate_efficacious: oc.per_subtrial[i].efficacious,
                rate_futile: oc.per_subtrial[i].futile,
                rate_inconclusive: oc.per_subtrial[i].inconclusive,
                overall_fp: oc.overall_false_positive,
                seed: scenario.seed,
                replicates: scenario.replicates,
            });
        }
    }
    Ok(render_simulate(&rows, format))
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Config(format!("out: cannot write {}: {e}", path.display()))),
    }
}
