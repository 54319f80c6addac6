//! `relaug`: relational feature augmentation from the command line.

mod config;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use relaug_core::corpus::write_dataset;
use relaug_core::jex::bench_join_strategies;
use relaug_core::pex::enumerate_paths;
use relaug_core::pipeline::{run_session, with_thread_pool, RunConfig, RunReport, Session, PATHS_FILE};
use relaug_core::synth::{gen_synthetic, Shape, SynthSpec};
use relaug_core::Corpus;

use config::RunArgs;

#[derive(Parser)]
#[command(name = "relaug", version, about = "Augment a base table with features reached through join paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// All stages: describe, explore, execute, select; writes report.json.
    Run(RunArgs),
    /// Generate or reuse feature descriptions.
    Describe(RunArgs),
    /// Score tables and search join paths.
    Explore(RunArgs),
    /// Materialize the stored paths and consolidate their features.
    Execute(RunArgs),
    /// Rank consolidated features and write augmented.csv.
    Select(RunArgs),
    /// Time both join executors on the stored paths, or on every path up to --max-len.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Timed repetitions per path.
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Ignore paths.json and benchmark every path up to --max-len.
        #[arg(long)]
        all_paths: bool,
    },
    /// Write a seeded synthetic dataset with a planted informative feature.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Chain,
    Star,
}

#[derive(clap::Args)]
struct GenArgs {
    /// Directory to write the dataset into.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "chain")]
    shape: ShapeArg,
    #[arg(long, default_value_t = 4)]
    tables: usize,
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    /// Fraction of the first linked table referenced by the base table.
    #[arg(long, default_value_t = 0.2)]
    selectivity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Table index carrying the informative feature.
    #[arg(long, default_value_t = 2)]
    planted_hop: usize,
}

/// Prints the report; a closed stdout (e.g. piped into `head`) is not an error.
fn print_report(report: &RunReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

/// Opens a session on the configured pool, runs `stage`, prints the report.
fn stage(args: &RunArgs, stage: impl FnOnce(&mut Session) -> Result<()> + Send) -> Result<()> {
    let config = args.resolve()?;
    let report = with_thread_pool(config.threads, move || -> Result<RunReport> {
        let mut session = Session::open(config)?;
        stage(&mut session)?;
        Ok(session.report())
    })??;
    print_report(&report)
}

fn bench(config: RunConfig, reps: usize, all_paths: bool) -> Result<()> {
    let corpus = Corpus::load(&config.dataset_dir)?;
    let stored = config.artifact(PATHS_FILE);
    let paths = if !all_paths && stored.exists() {
        relaug_core::pex::read_paths_json(&stored)?.into_iter().map(|p| p.path).collect()
    } else {
        enumerate_paths(&corpus, config.max_len)
    };
    let report = bench_join_strategies(&corpus, &paths, reps)?;
    std::fs::create_dir_all(&config.out_dir).with_context(|| format!("creating {}", config.out_dir.display()))?;
    report.write_json(&config.artifact("bench.json"))?;
    for s in &report.by_length {
        println!(
            "length {}: {} paths, median speedup {:.2}x (binary {:.1} ms, yannakakis {:.1} ms)",
            s.length, s.paths, s.median_speedup, s.binary_ms, s.yannakakis_ms
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(args) => {
            let config = args.resolve()?;
            let report = with_thread_pool(config.threads, move || -> Result<RunReport> {
                let mut session = Session::open(config)?;
                Ok(run_session(&mut session)?)
            })??;
            print_report(&report)
        }
        Command::Describe(args) => stage(&args, |s| {
            s.describe();
            Ok(())
        }),
        Command::Explore(args) => stage(&args, |s| {
            let d = s.stored_descriptions();
            s.explore(&d)?;
            Ok(())
        }),
        Command::Execute(args) => stage(&args, |s| {
            let p = s.stored_paths()?;
            s.execute(&p)?;
            Ok(())
        }),
        Command::Select(args) => stage(&args, |s| {
            let c = s.stored_consolidated()?;
            let d = s.stored_descriptions();
            s.select(&c, &d)?;
            Ok(())
        }),
        Command::Bench { run, reps, all_paths } => {
            let config = run.resolve()?;
            let threads = config.threads;
            with_thread_pool(threads, move || bench(config, reps, all_paths))?
        }
        Command::Gen(g) => {
            let spec = SynthSpec {
                shape: match g.shape {
                    ShapeArg::Chain => Shape::Chain,
                    ShapeArg::Star => Shape::Star,
                },
                tables: g.tables,
                rows: g.rows,
                selectivity: g.selectivity,
                seed: g.seed,
                planted_hop: g.planted_hop,
            };
            anyhow::ensure!(spec.tables >= 2, "a synthetic dataset needs at least 2 tables");
            let corpus = gen_synthetic(&spec)?;
            write_dataset(&corpus, &g.out)?;
            println!("wrote {} tables to {}", corpus.num_tables(), g.out.display());
            Ok(())
        }
    }
}
