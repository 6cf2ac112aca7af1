use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hom_cli::runner::{self, CacheStatus};
use hom_cli::{CliError, CliResult, Scenario};

#[derive(Parser)]
#[command(
    name = "sim",
    version,
    about = "Two-photon interference dips under spatial phase modulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the coincidence trace(s) of a scenario.
    Run {
        file: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write a matplotlib script next to the data.
        #[arg(long)]
        emit_plot: bool,
    },
    /// Build and cache the kernel tables of a scenario.
    Tabulate { file: PathBuf },
    /// Kernel diagnostics.
    Diag {
        #[command(subcommand)]
        which: Diag,
    },
    /// Cross-check the kernel assembly against direct integration.
    Verify { file: PathBuf },
}

#[derive(Subcommand)]
enum Diag {
    /// rho0 over the [diag] distances, pitches and radii.
    Rho0Sweep {
        file: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// |alpha|^2 on the scenario's pixel grid.
    AlphaMatrix {
        file: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run { file, out, emit_plot } => {
            let s = Scenario::load(&file)?;
            let report = runner::run(&s, &out, emit_plot)?;
            for t in &report.summary.trace {
                println!(
                    "{}: min R_norm {:.4}, visibility {:.4}, envelope center {:.1} fs",
                    t.file, t.min_r_norm, t.visibility, t.envelope_center_fs
                );
            }
        }
        Command::Tabulate { file } => {
            let s = Scenario::load(&file)?;
            for (path, status) in runner::tabulate(&s, &runner::cache_dir())? {
                let what = match status {
                    CacheStatus::Hit => "cache hit",
                    CacheStatus::Built => "built",
                };
                println!("{what}: {}", path.display());
            }
        }
        Command::Diag { which } => {
            let path = match which {
                Diag::Rho0Sweep { file, out } => runner::rho0_sweep(&Scenario::load(&file)?, &out)?,
                Diag::AlphaMatrix { file, out } => runner::alpha_matrix(&Scenario::load(&file)?, &out)?,
            };
            println!("wrote {}", path.display());
        }
        Command::Verify { file } => {
            let v = runner::verify(&Scenario::load(&file)?)?;
            println!(
                "max |dR_norm| {:.3e}, R0 relative difference {:.3e}, tolerance {:.1e}",
                v.max_trace_diff, v.r0_rel_diff, v.tolerance
            );
            if !v.passed() {
                return Err(CliError::Verification("kernels and direct integration disagree".into()));
            }
            println!("ok");
        }
    }
    Ok(())
}
