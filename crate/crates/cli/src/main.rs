use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hamq_cli::config::{output_override, RunConfig, SliceSpec};
use hamq_cli::{compare, run, CliError};
use hamq_core::EnvName;

#[derive(Parser)]
#[command(name = "hamq", version, about = "Hamiltonian Q-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on an environment and write convergence, policy and q-table files.
    Run { config: PathBuf },
    /// Join the convergence files of finished runs on the iteration column.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
        /// Write the joined CSV here instead of standard output.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Render the greedy policy of a saved q-table over a two-dimensional slice.
    ExportPolicy {
        qtable: PathBuf,
        /// `i,j` free dimensions, optionally `:k,l,...` grid indices for the rest.
        slice: String,
        #[arg(long, default_value = "cartpole")]
        env: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(&path, text).map_err(|e| CliError::io(&path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config } => {
            let (cfg, source) = RunConfig::load(&config)?;
            let resolved = cfg.resolve(&source, output_override())?;
            let outcome = run::execute(&resolved)?;
            if !outcome.unconverged.is_empty() {
                eprintln!(
                    "warning: completion did not converge in {} of {} iterations",
                    outcome.unconverged.len(),
                    outcome.report.records.len()
                );
            }
            let last = outcome.report.final_record();
            eprintln!(
                "{} {}: sup_error {} frobenius_error {} -> {}",
                resolved.env,
                resolved.mode,
                last.sup_error,
                last.frobenius_error,
                resolved.output_dir.display()
            );
            Ok(())
        }
        Command::Compare { dirs, out } => {
            let joined = compare::compare(&dirs)?;
            if let Some(lengths) = &joined.truncated_from {
                eprintln!(
                    "warning: run lengths {lengths:?} differ; joined on the first {} iterations",
                    joined.rows
                );
            }
            emit(&joined.csv, out)
        }
        Command::ExportPolicy {
            qtable,
            slice,
            env,
            out,
        } => {
            let config_error = |message: String| CliError::Config {
                line: None,
                message,
            };
            let env: EnvName = env
                .parse()
                .map_err(|e: hamq_core::Error| config_error(e.to_string()))?;
            let spec = SliceSpec::parse(&slice).map_err(config_error)?;
            hamq_cli::config::check_slice(&spec, env).map_err(config_error)?;
            emit(&run::export_policy(&qtable, env, &spec)?, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
