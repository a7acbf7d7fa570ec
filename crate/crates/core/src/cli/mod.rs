//! Command-line front end: `run`, `validate`, `sweep` and `tensors`.

pub mod config;
pub mod run;
pub mod sweep;
pub mod validate;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::{Engine, Resolved, Scenario};
pub use run::{run_scenario, CheckOutcome, RunReport};
pub use sweep::{sweep, Axis, SweepRow};
pub use validate::{run_suite, CheckRow, Suite};

use crate::basis::SpectralBasis;
use crate::error::{Error, Result};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_ABORT: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "rhodot", version, about = "Spectral solver for the infinite well with a d(rho)/dt nonlinearity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file and write its trajectory CSV and summary.
    Run {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run a built-in check suite and print `suite,check,status,measured,tolerance` lines.
    Validate {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Run one trajectory per axis value and write `<name>_sweep_<axis>.csv`.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Print the overlap tensors as CSV (`tensor,i1,i2,i3,i4,value`, one-based).
    Tensors {
        #[arg(long)]
        n_modes: usize,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Exit status for an error that escaped a command.
pub fn exit_code_for(err: &Error) -> u8 {
    if err.is_numerical() {
        EXIT_ABORT
    } else {
        EXIT_CONFIG
    }
}

pub fn execute(cli: Cli) -> ExitCode {
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code)
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run { config, out_dir } => {
            let scenario = Scenario::load(&config)?;
            let report = run_scenario(&scenario, &out_dir)?;
            for path in &report.artifacts {
                println!("wrote {}", path.display());
            }
            if let Some(err) = &report.abort {
                eprintln!("error: {err}");
                return Ok(EXIT_ABORT);
            }
            let tr = report.trajectory.as_ref().expect("completed runs carry a trajectory");
            println!("verdict: {}", tr.verdict);
            for c in &report.checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if report.checks_passed() { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Validate { suite } => {
            let rows = run_suite(suite)?;
            println!("{}", validate::CSV_HEADER);
            for r in &rows {
                println!("{}", r.csv_line());
            }
            Ok(if rows.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Sweep {
            config,
            axis,
            values,
            workers,
            out_dir,
        } => {
            if workers == 0 {
                return Err(Error::config("sweep.workers", "must be >= 1"));
            }
            let scenario = Scenario::load(&config)?;
            let rows = sweep(&scenario, axis, &values, workers)?;
            let path = sweep::write_sweep_csv(&out_dir, &scenario.name, axis, &rows)?;
            println!("wrote {}", path.display());
            for r in &rows {
                println!(
                    "{} = {}: {}",
                    r.axis,
                    r.value,
                    r.verdict.as_deref().or(r.error.as_deref()).unwrap_or(r.status)
                );
            }
            Ok(EXIT_OK)
        }
        Command::Tensors { n_modes } => {
            let basis = SpectralBasis::new(n_modes, 0.5)?;
            let stdout = std::io::stdout();
            write_tensors(&basis, &mut stdout.lock())?;
            Ok(EXIT_OK)
        }
    }
}

/// Both tensors as CSV with one-based indices; `i4` is empty for the
/// three-index table.
pub fn write_tensors<W: Write>(basis: &SpectralBasis, w: W) -> Result<()> {
    let n = basis.n_modes();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["tensor", "i1", "i2", "i3", "i4", "value"])?;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    out.write_record([
                        "D4".to_string(),
                        (a + 1).to_string(),
                        (b + 1).to_string(),
                        (c + 1).to_string(),
                        (d + 1).to_string(),
                        format!("{:.16e}", basis.d4(a, b, c, d)),
                    ])?;
                }
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                out.write_record([
                    "D3".to_string(),
                    (a + 1).to_string(),
                    (b + 1).to_string(),
                    (c + 1).to_string(),
                    String::new(),
                    format!("{:.16e}", basis.d3(a, b, c)),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
