use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hilsim::cli;
use hilsim::HilError;

/// Hybrid robot-emulation simulator: run emulation schemes, frequency-domain
/// analysis, and parameter sweeps from JSON scenario configs.
#[derive(Parser)]
#[command(name = "hilsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scheme and write the trace CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Frequency-domain report: transmissivity curves, stability verdicts,
    /// disturbance sensitivities.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Inertia-ratio eigenvalues to analyze (default: from the models).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Run the scenario once per axis value and tabulate the outcomes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of: mass_scale, q_ratio, omega_a, omega_p, k_e, dist_amp.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the packaged case-study scenario configs.
    Casestudy {
        /// Target directory (default: current directory or HILSIM_OUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), HilError> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let summary = cli::cmd_simulate(&config, out.as_deref(), seed)?;
            print!("{summary}");
        }
        Command::Analyze {
            config,
            out,
            values,
        } => {
            let path = cli::cmd_analyze(&config, out.as_deref(), values.as_deref())?;
            println!("analysis written to: {}", path.display());
        }
        Command::Sweep {
            config,
            axis,
            values,
            jobs,
            out,
        } => {
            let (rows, path) = cli::cmd_sweep(&config, &axis, &values, jobs, out.as_deref())?;
            print!("{}", cli::format_sweep_table(&axis, &rows));
            println!("sweep summary written to: {}", path.display());
        }
        Command::Casestudy { out } => {
            let written = cli::cmd_casestudy(out.as_deref())?;
            for path in written {
                println!("wrote {}", path.display());
            }
            println!("run e.g.: hilsim simulate --config casestudy_1dof.json");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
