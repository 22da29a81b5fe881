//! Scenario runner for the `risim` library.
//!
//! Exit codes: 0 = success, 1 = partial failures or verification breach,
//! 2 = configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use risim::harness::{self, ApertureMode, VerifyLevel};
use risim::scenario::{CouplingMode, Scenario, SolverChoice};

#[derive(Parser)]
#[command(
    name = "risim",
    about = "RIS-assisted MIMO link simulator over coupled thin-wire impedance networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    ClosedForm,
    GridBaseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum CouplingArg {
    Mca,
    Mcu,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    FixedAperture,
    FixedCount,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(clap::Args)]
struct Overrides {
    /// Override run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override run.realizations.
    #[arg(long)]
    realizations: Option<usize>,
    /// Override run.solver.
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Override run.coupling.
    #[arg(long, value_enum)]
    coupling: Option<CouplingArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo experiment described by a scenario file.
    Run {
        scenario: PathBuf,
        /// Directory for trace.csv, timings.csv, rate_vs_iter.csv, summary.txt.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sweep the RIS inter-distance and emit rate-vs-spacing plot data.
    SweepD {
        scenario: PathBuf,
        /// Comma-separated spacings in wavelengths, e.g. 0.5,0.25,0.125.
        #[arg(long, value_delimiter = ',', required = true)]
        d_list: Vec<f64>,
        #[arg(long, value_enum, default_value = "fixed-aperture")]
        mode: ModeArg,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the oracle cross-check corpus.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: LevelArg,
    },
    /// Assemble the scenario's impedance matrices and write them as a bundle.
    ExportImpedances {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_scenario(path: &PathBuf, overrides: &Overrides) -> Result<Scenario, risim::Error> {
    let mut s = Scenario::parse_file(path)?;
    if let Some(seed) = overrides.seed {
        s.run.seed = seed;
    }
    if let Some(realizations) = overrides.realizations {
        s.run.realizations = realizations;
    }
    if let Some(solver) = overrides.solver {
        s.run.solver = match solver {
            SolverArg::ClosedForm => SolverChoice::ClosedForm,
            SolverArg::GridBaseline => SolverChoice::GridBaseline,
        };
    }
    if let Some(coupling) = overrides.coupling {
        s.run.coupling = match coupling {
            CouplingArg::Mca => CouplingMode::Mca,
            CouplingArg::Mcu => CouplingMode::Mcu,
        };
    }
    Ok(s)
}

const CONFIG_ERROR: u8 = 2;
const PARTIAL_FAILURE: u8 = 1;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, risim::Error> {
    match cli.command {
        Command::Run {
            scenario,
            out_dir,
            overrides,
        } => {
            let s = load_scenario(&scenario, &overrides)?;
            let summary = harness::run_experiment(&s, Some(&out_dir))?;
            println!(
                "{} realizations: mean rate {:.6} bits/s/Hz, median {:.6}, {} converged, {} failed",
                summary.outcomes.len(),
                summary.mean_rate,
                summary.median_rate,
                summary.converged_count,
                summary.failed_count
            );
            println!(
                "assembly {:.3} s, solve {:.3} s; artifacts in {}",
                summary.assembly_seconds,
                summary.solve_seconds,
                out_dir.display()
            );
            Ok(ExitCode::from(summary.exit_code() as u8))
        }
        Command::SweepD {
            scenario,
            d_list,
            mode,
            out,
            overrides,
        } => {
            let s = load_scenario(&scenario, &overrides)?;
            let mode = match mode {
                ModeArg::FixedAperture => ApertureMode::FixedAperture,
                ModeArg::FixedCount => ApertureMode::FixedCount,
            };
            let table = harness::sweep_spacing(&s, &d_list, mode)?;
            let csv = table.to_csv();
            match out {
                Some(path) => {
                    std::fs::write(&path, csv).map_err(risim::Error::io(&path))?;
                    println!("wrote {} rows to {}", table.rows.len(), path.display());
                }
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { level } => {
            let level = match level {
                LevelArg::Quick => VerifyLevel::Quick,
                LevelArg::Full => VerifyLevel::Full,
            };
            let checks = harness::verify(level);
            let mut all_passed = true;
            for check in &checks {
                all_passed &= check.passed;
                println!(
                    "{} {:<20} worst {:.3e} (tolerance {:.1e}, {} samples, worst case: {})",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.report.max_relative_error,
                    check.tolerance,
                    check.report.samples,
                    check.report.worst_case_id
                );
            }
            if all_passed {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(PARTIAL_FAILURE))
            }
        }
        Command::ExportImpedances { scenario, out } => {
            let s = Scenario::parse_file(&scenario)?;
            harness::export_impedances(&s, &out)?;
            println!("wrote impedance bundle to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
