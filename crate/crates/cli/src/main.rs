use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use pairsim::dynamics::EvolutionMode;
use pairsim::exec::Execution;
use pairsim_cli::config::{self, ExperimentConfig, Overrides, ReadoutMode};
use pairsim_cli::experiment::{self, Setup};
use pairsim_cli::validation;

#[derive(Parser)]
#[command(name = "pairsim", version, about = "Two-stage Fourier NMR simulation of the spin-analogy pairing model")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true)]
    evolution: Option<Evolution>,

    #[arg(long, global = true)]
    trotter_steps: Option<usize>,

    #[arg(long, global = true)]
    readout: Option<ReadoutMode>,

    /// Fail with exit code 3 on ambiguous level assignments.
    #[arg(long, global = true)]
    strict: bool,

    /// Run the tau sweep on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Evolution {
    Exact,
    Trotter,
}

#[derive(Subcommand)]
enum Command {
    /// Diagonalize the pairing Hamiltonian and write the exact levels.
    Spectrum,
    /// Evolve and record the tracked peaks over the tau grid.
    Sweep,
    /// Second transform and level recovery on a saved sweep.
    Secondft {
        /// Sweep file; defaults to `<out>/sweep.json`.
        #[arg(long)]
        sweep: Option<PathBuf>,
    },
    /// The full protocol.
    Run,
    /// Gap equation against the exact single-excitation splitting.
    Gap,
    /// Invariant suites; the config is optional.
    Validate,
}

enum Failure {
    Aliasing(anyhow::Error),
    Ambiguity(anyhow::Error),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<pairsim::Error>() {
            Some(inner) if inner.is_aliasing() => Failure::Aliasing(e),
            Some(inner) if inner.is_ambiguity() => Failure::Ambiguity(e),
            _ => Failure::Other(e),
        }
    }
}

impl From<pairsim::Error> for Failure {
    fn from(e: pairsim::Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

fn load(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let path = cli.config.as_deref().context("--config is required for this subcommand")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config = config::from_json_str(&text)?;
    overrides(cli).apply(&mut config);
    Ok(config.resolve()?)
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides {
        evolution: cli.evolution.map(|e| match e {
            Evolution::Exact => EvolutionMode::Exact,
            Evolution::Trotter => EvolutionMode::Trotter,
        }),
        trotter_steps: cli.trotter_steps,
        readout: cli.readout,
        strict: cli.strict,
    }
}

fn create_out(out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match &cli.command {
        Command::Spectrum => {
            let config = load(cli)?;
            create_out(&cli.out)?;
            let report = experiment::spectrum(&config)?;
            experiment::write_json(&cli.out.join("spectrum.json"), &report)?;
            for level in &report.levels {
                match level.subspace {
                    Some(n) => emit(&format!("{:>24.16e}  S_{n}", level.energy)),
                    None => emit(&format!("{:>24.16e}", level.energy)),
                }
            }
        }
        Command::Sweep => {
            let config = load(cli)?;
            create_out(&cli.out)?;
            let setup = Setup::new(&config)?;
            let sweep = experiment::sweep(&config, &setup, exec)?;
            if config.readout.mode == ReadoutMode::Fid {
                experiment::write_fid_dumps(&cli.out, &config, &setup, exec)?;
            }
            experiment::write_json(&cli.out.join("sweep.json"), &sweep)?;
            log::info!("{} tau points, {} tracked peaks", sweep.record.tau.len(), sweep.record.tracked_peaks.len());
        }
        Command::Secondft { sweep } => {
            let path = sweep.clone().unwrap_or_else(|| cli.out.join("sweep.json"));
            let saved = experiment::read_sweep(&path).map_err(|e| anyhow::Error::new(e).context(format!("reading {}", path.display())))?;
            let mut config = saved.config;
            overrides(cli).apply(&mut config);
            let config = config.resolve()?;
            let setup = Setup::new(&config)?;
            let analysis = experiment::analyze(&config, &setup, &saved.record)?;
            experiment::write_analysis(&cli.out, &analysis)?;
            print_levels(&analysis.report);
        }
        Command::Run => {
            let config = load(cli)?;
            create_out(&cli.out)?;
            let report = experiment::run_experiment(&config, &cli.out, exec)?;
            print_levels(&report);
        }
        Command::Gap => {
            let config = load(cli)?;
            create_out(&cli.out)?;
            let report = experiment::gap(&config)?;
            experiment::write_json(&cli.out.join("gap.json"), &report)?;
            emit(&serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?);
        }
        Command::Validate => {
            let config = match &cli.config {
                Some(_) => load(cli)?,
                None => ExperimentConfig::minimal(vec![0.8, 1.0, 1.2], 0.3).resolve()?,
            };
            let results = validation::run_validation(&config)?;
            let failed = results.iter().filter(|r| !r.passed).count();
            for r in &results {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                emit(&format!("{tag}  {:<24} {:>12.3e}  (limit {:.1e}; {})", r.name, r.value, r.limit, r.detail));
            }
            emit(&format!("{} passed, {failed} failed", results.len() - failed));
            if failed > 0 {
                return Err(Failure::Other(anyhow::anyhow!("{failed} validation checks failed")));
            }
        }
    }
    Ok(())
}

/// Prints a line, tolerating a closed pipe.
fn emit(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print_levels(report: &experiment::Report) {
    for group in &report.recovered_levels {
        let levels: Vec<String> = group.levels.iter().map(|l| format!("{l:.6}")).collect();
        emit(&format!("S_{}: {}", group.subspace, levels.join(", ")));
        if let Some(gap) = group.gap {
            emit(&format!("S_{} gap: {gap:.6}", group.subspace));
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Aliasing(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Ambiguity(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
