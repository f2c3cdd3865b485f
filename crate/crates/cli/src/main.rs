use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use statsol::observables::{write_structure_csv, write_value_table};
use statsol::par::Exec;
use statsol::{Error, Result};
use statsol_cli::config::{presets, ExperimentConfig};
use statsol_cli::experiment::{
    compare_runs, open_run, run_experiment, structure_functions, value_table_string, wasserstein_between,
    RunOptions,
};

#[derive(Parser)]
#[command(name = "statsol", version, about = "Monte Carlo statistical solutions of 2D incompressible Navier-Stokes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample, evolve and post-process one experiment.
    Run(RunArgs),
    /// Cauchy errors and Wasserstein distances between two stored runs.
    Compare {
        run_a: PathBuf,
        /// Equal or finer resolution, at least as many samples.
        run_b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Structure functions of a stored run.
    Structure {
        run: PathBuf,
        /// Degrees, comma separated; defaults to the run's config.
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        /// Offsets, comma separated; defaults to the run's config.
        #[arg(long, value_delimiter = ',')]
        offsets: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// W1 and W2 distances between two stored runs.
    Wasserstein {
        run_a: PathBuf,
        run_b: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Parse and check a config file, or print a preset.
    ValidateConfig {
        #[arg(required_unless_present_any = ["preset", "list_presets"])]
        config: Option<PathBuf>,
        /// Print the named preset as TOML.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        list_presets: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Overrides the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Validate and build the mesh without writing anything.
    #[arg(long)]
    dry_run: bool,
}

fn load_config(path: Option<&Path>, preset: Option<&str>) -> Result<ExperimentConfig> {
    match (path, preset) {
        (Some(p), _) => ExperimentConfig::load(p),
        (None, Some(name)) => statsol_cli::preset(name),
        (None, None) => Err(Error::Config("give a config file or --preset".into())),
    }
}

fn emit(out: Option<&Path>, rows: &[(String, f64)]) -> Result<()> {
    match out {
        Some(path) => write_value_table(path, rows),
        None => {
            print!("{}", value_table_string(rows));
            Ok(())
        }
    }
}

fn exec(workers: Option<usize>) -> Exec {
    workers.map_or_else(Exec::default, Exec::with_workers)
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(args) => {
            let mut cfg = load_config(args.config.as_deref(), args.preset.as_deref())?;
            if let Some(out) = args.output {
                cfg.experiment.output = out;
            }
            let summary = run_experiment(
                &cfg,
                RunOptions {
                    workers: args.workers,
                    dry_run: args.dry_run,
                },
            )?;
            if args.dry_run {
                println!(
                    "config ok: {} elements, {} samples, output {}",
                    summary.elements,
                    summary.samples,
                    summary.dir.display()
                );
            } else {
                println!("wrote {} files to {}", summary.files.len(), summary.dir.display());
            }
            Ok(())
        }
        Command::Compare { run_a, run_b, out, workers } => {
            let (a, b) = (open_run(&run_a)?, open_run(&run_b)?);
            let report = compare_runs(&a, &b, exec(workers))?;
            emit(out.as_deref(), &report.rows())
        }
        Command::Structure {
            run,
            p,
            offsets,
            out,
            workers,
        } => {
            let r = open_run(&run)?;
            let res = structure_functions(&r.ensemble, &r.config, p.as_deref(), offsets.as_deref(), exec(workers))?;
            match out {
                Some(path) => write_structure_csv(&path, &res),
                None => {
                    println!("r,p,S");
                    for c in &res {
                        for (r, s) in c.offsets.iter().zip(&c.values) {
                            println!("{r:e},{},{s:e}", c.p);
                        }
                    }
                    Ok(())
                }
            }
        }
        Command::Wasserstein {
            run_a,
            run_b,
            grid,
            pairs,
            seed,
            out,
            workers,
        } => {
            let (a, b) = (open_run(&run_a)?, open_run(&run_b)?);
            let mut w = a.config.observables.wasserstein.clone();
            w.eval_grid = grid.unwrap_or(w.eval_grid);
            w.pairs = pairs.unwrap_or(w.pairs);
            w.pair_seed = seed.unwrap_or(w.pair_seed);
            let d = wasserstein_between(&a, &b, &w, exec(workers))?;
            emit(out.as_deref(), &[("w1".to_string(), d.w1), ("w2".to_string(), d.w2)])
        }
        Command::ValidateConfig {
            config,
            preset,
            list_presets,
        } => {
            if list_presets {
                for p in presets() {
                    let tag = if p.long_running { "  (long-running)" } else { "" };
                    println!("{}{tag}", p.name);
                }
                return Ok(());
            }
            let cfg = load_config(config.as_deref(), preset.as_deref())?;
            if preset.is_some() {
                print!("{}", cfg.to_toml_string()?);
            } else {
                println!(
                    "ok: {} ({}), {} steps to T = {}, {} samples",
                    cfg.experiment.name,
                    cfg.experiment.kind.as_str(),
                    cfg.experiment.steps,
                    cfg.experiment.final_time,
                    cfg.experiment.samples
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code().clamp(1, 255) as u8)
        }
    }
}
