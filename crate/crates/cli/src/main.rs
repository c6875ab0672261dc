//! Command-line front end for the quadrature-evolution simulator.
//!
//! Exit codes: 0 on success, 2 for config/parameter problems, 3 for
//! numerical failures, 4 for I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qevo_core::sim::{
    default_mode, emit_keyrate_csv, emit_sweep_csv, run_core, run_pipeline, sweep_m,
};
use qevo_core::{Error, SimConfig};

#[derive(Parser)]
#[command(
    name = "qevo",
    version,
    about = "Multicarrier quadrature-evolution simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline once and write the per-run figure CSV files.
    Simulate {
        /// Path to a `key = value` config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the figure files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun the pipeline across recombination widths and write fig_s6.csv.
    Sweep {
        /// Path to a `key = value` config file.
        #[arg(long)]
        config: PathBuf,
        /// Smallest recombination width (inclusive).
        #[arg(long)]
        m_min: usize,
        /// Largest recombination width (inclusive).
        #[arg(long)]
        m_max: usize,
        /// Output directory for fig_s6.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the key-rate report for one config and write keyrate.csv.
    Keyrate {
        /// Path to a `key = value` config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for keyrate.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = SimConfig::from_file(&config)?;
            let report = run_pipeline(&cfg, &out)?;
            println!(
                "mode {} | trials {} | {} ms",
                report.mode, report.trials, report.wallclock_ms
            );
            println!(
                "mean_err {:.6} (se {:.3e}) | trace_ee {:.3} | regressor_var {:.3}",
                report.mean_err, report.err_std_err, report.trace_ee, report.regressor_variance
            );
            if let Some(k) = &report.keyrate {
                println!("rate {:.6} (raw {:.6}, d_ab {:.6}, d_be {:.6})", k.rate, k.rate_raw, k.d_ab, k.d_be);
            }
            for (name, path) in &report.figure_paths {
                println!("wrote {name} -> {}", path.display());
            }
            Ok(())
        }
        Command::Sweep {
            config,
            m_min,
            m_max,
            out,
        } => {
            let cfg = SimConfig::from_file(&config)?;
            let rows = sweep_m(&cfg, m_min, m_max, default_mode())?;
            let path = emit_sweep_csv(&rows, &out)?;
            println!("wrote {} sweep rows -> {}", rows.len(), path.display());
            Ok(())
        }
        Command::Keyrate { config, out } => {
            let cfg = SimConfig::from_file(&config)?;
            let output = run_core(&cfg, default_mode())?;
            let report = output.keyrate.ok_or_else(|| {
                Error::Numerical(format!(
                    "residual {} leaves the key rate undefined",
                    output.stats.mean_err
                ))
            })?;
            let path = emit_keyrate_csv(&report, &out)?;
            println!("rate {:.6} -> {}", report.rate, path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
