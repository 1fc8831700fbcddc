use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qlink::bundle::MetricsFile;
use qlink::commands::{self, Bundle, Invocation, Source};
use qlink::config::Overrides;
use qlink::error::{HarnessError, Result, EXIT_OK};
use qlink::exec::default_workers;

/// Simulate state transfer and remote entanglement over a lossy
/// multimode channel.
#[derive(Parser)]
#[command(name = "qlink", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Run configuration file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped run configuration.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Bundle directory (default: output.dir from the config, else qlink-out/<name>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Disable coupler loading of Q1 by the loss switch.
    #[arg(long)]
    no_spurious_loading: bool,
    /// Integrate in the single-excitation subspace.
    #[arg(long)]
    subspace: bool,
}

impl RunArgs {
    fn invocation(&self) -> Invocation {
        let source = match (&self.config, &self.preset) {
            (Some(p), _) => Some(Source::Config(p.clone())),
            (None, Some(n)) => Some(Source::Preset(n.clone())),
            (None, None) => None,
        };
        Invocation {
            source,
            out: self.out.clone(),
            workers: self.workers.unwrap_or_else(default_workers),
            overrides: Overrides {
                seed: self.seed,
                no_spurious_loading: self.no_spurious_loading,
                subspace: self.subspace,
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// State transfer with process tomography.
    Transfer(RunArgs),
    /// Half protocol producing a Bell state.
    Entangle(RunArgs),
    /// Parameter sweep from the [sweep] section.
    Sweep(RunArgs),
    /// Circuit-model tables: mode RLC, effective loads, loaded Q1 T1.
    Circuit(RunArgs),
    /// State or process tomography on a stored measurement file.
    Tomography {
        /// CSV with gate_q1, gate_q2 and p_* or n_* columns.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare two metrics files or bundles.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Tolerance file; without one every metric must match exactly.
        #[arg(long, value_name = "PATH")]
        tolerances: Option<PathBuf>,
    },
    /// Check config, device, tolerance or metrics files.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// List the shipped presets.
    Presets,
}

fn report(bundle: &Bundle) -> Result<()> {
    print_metrics(&bundle.metrics);
    println!("bundle: {}", bundle.dir.display());
    bundle.check_complete()
}

fn print_metrics(m: &MetricsFile) {
    for (k, v) in &m.metrics {
        println!("{k} = {v:?}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Transfer(a) => report(&commands::cmd_transfer(&a.invocation())?),
        Command::Entangle(a) => report(&commands::cmd_entangle(&a.invocation())?),
        Command::Sweep(a) => report(&commands::cmd_sweep(&a.invocation())?),
        Command::Circuit(a) => report(&commands::cmd_circuit(&a.invocation())?),
        Command::Tomography { data, run } => report(&commands::cmd_tomography(&run.invocation(), &data)?),
        Command::Compare { a, b, tolerances } => {
            let r = commands::cmd_compare(&a, &b, tolerances.as_deref())?;
            print!("{}", r.render());
            r.check()
        }
        Command::Validate { paths } => {
            let mut first_err: Option<HarnessError> = None;
            for p in paths {
                match commands::cmd_validate(&p) {
                    Ok(kind) => println!("{}: ok ({kind})", p.display()),
                    Err(e) => {
                        println!("{}: {e}", p.display());
                        first_err.get_or_insert(e);
                    }
                }
            }
            first_err.map_or(Ok(()), Err)
        }
        Command::Presets => {
            for name in qlink::presets::names() {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
