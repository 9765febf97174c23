use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use dcgrid_core::config::LabConfig;
use dcgrid_core::grid::VoltagePlantMode;
use dcgrid_core::report::{run_command, Command, LabError, RunContext};
use dcgrid_core::Execution;

/// DC microgrid secondary-control laboratory.
#[derive(Parser, Debug)]
#[command(name = "dcgrid-lab", version, about)]
struct Cli {
    #[arg(value_enum)]
    command: CliCommand,
    /// TOML configuration; omitted keys take the built-in defaults.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Bus-voltage plant used for tuning, sweeps and Bode export.
    #[arg(long, value_enum)]
    mode: Option<CliMode>,
    /// Run batch work on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliCommand {
    Tune,
    Simulate,
    Compare,
    Rootlocus,
    Bode,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliMode {
    AsWritten,
    ClosedInner,
}

impl From<CliCommand> for Command {
    fn from(c: CliCommand) -> Self {
        match c {
            CliCommand::Tune => Command::Tune,
            CliCommand::Simulate => Command::Simulate,
            CliCommand::Compare => Command::Compare,
            CliCommand::Rootlocus => Command::Rootlocus,
            CliCommand::Bode => Command::Bode,
        }
    }
}

impl From<CliMode> for VoltagePlantMode {
    fn from(m: CliMode) -> Self {
        match m {
            CliMode::AsWritten => VoltagePlantMode::AsWritten,
            CliMode::ClosedInner => VoltagePlantMode::ClosedInner,
        }
    }
}

fn run(cli: &Cli) -> Result<(), LabError> {
    let config = LabConfig::load(&cli.config)?;
    let ctx = RunContext {
        config_path: cli.config.display().to_string(),
        out_dir: cli.out.clone(),
        mode: cli.mode.map(Into::into),
        exec: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let output = run_command(cli.command.into(), &config, &ctx)?;
    print!("{}", output.summary);
    for f in &output.files {
        log::info!("wrote {}", f.display());
    }
    match output.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DCGRID_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
