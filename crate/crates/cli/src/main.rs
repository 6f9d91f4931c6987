use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "unfoldsim", version, about = "Backbone unfolding trajectories and flow-matching targets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Angular,
    Cartesian,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Binary,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Spline,
    Fd,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the unfolding dynamics on a PDB file, or on every .pdb in a directory.
    Simulate {
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file, or output directory when the input is a directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        /// Overrides UNFOLDSIM_SEED and the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum, default_value = "binary")]
        format: FormatArg,
        #[arg(long)]
        chain: Option<char>,
    },
    /// Dump the six internal angles per residue as CSV (radians).
    Angles {
        pdb: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        chain: Option<char>,
    },
    /// Rebuild backbone atoms from an angles CSV and write a minimal PDB.
    Reconstruct {
        angles: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-state diagnostics of a trajectory.
    Metrics {
        trajectory: PathBuf,
        #[arg(long)]
        collisions: bool,
        #[arg(long)]
        energy: bool,
        #[arg(long)]
        rmsd_against: Option<PathBuf>,
        /// Supplies settings the trajectory file does not store, and metric defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Interpolated state and velocity targets at flow time t, as CSV.
    FmTarget {
        trajectory: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value = "spline")]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a trajectory or PDB file; exits 1 on any violation.
    Validate { path: PathBuf },
    /// Time full simulations of synthetic helices of the given lengths.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        lengths: Vec<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<commands::UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
