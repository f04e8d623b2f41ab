use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use euler_lab::presets::PRESETS;
use euler_lab_cli::runner::{EXIT_CONFIG, EXIT_NUMERICAL};
use euler_lab_cli::{dispatch, exit_code, parse_config, ExperimentConfig, Outcome, System};

#[derive(Parser)]
#[command(
    name = "euler-lab",
    version,
    about = "Desk-scale experiments on incompressible Euler flows and related models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path of the key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the configuration.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run any configured experiment.
    Run(RunArgs),
    /// Solve for a self-similar profile (`system = selfsim`).
    Selfsim(RunArgs),
    /// Check the coercive-plus-finite-rank decomposition (`system = lemma_check`).
    LemmaCheck(RunArgs),
    /// List the initial-condition presets.
    Presets {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Parse a configuration and print it with defaults filled in.
    Validate(RunArgs),
}

fn load(path: &Path) -> Result<ExperimentConfig, u8> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_CONFIG as u8
    })?;
    parse_config(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_CONFIG as u8
    })
}

fn execute(args: &RunArgs, required: Option<System>) -> u8 {
    let cfg = match load(&args.config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(sys) = required {
        if cfg.system != sys {
            eprintln!(
                "error: this subcommand needs system = {sys}, found {}",
                cfg.system
            );
            return EXIT_CONFIG as u8;
        }
    }
    let dir = args
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    let result = dispatch(&cfg, &dir);
    match &result {
        Ok(summary) => {
            print!("{}", summary.report.render());
            if summary.outcome == Outcome::BlowupDetected {
                eprintln!("completed: blow-up detected");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    u8::try_from(exit_code(&result)).unwrap_or(EXIT_NUMERICAL as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run(a) => execute(a, None),
        Command::Selfsim(a) => execute(a, Some(System::Selfsim)),
        Command::LemmaCheck(a) => execute(a, Some(System::LemmaCheck)),
        Command::Presets { .. } => {
            for p in PRESETS {
                let params: Vec<String> =
                    p.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!(
                    "{:<20} {:<8} [{}] {}",
                    p.name,
                    p.domain,
                    params.join(", "),
                    p.description
                );
            }
            0
        }
        Command::Validate(a) => match load(&a.config) {
            Ok(cfg) => {
                print!("{}", cfg.echo());
                0
            }
            Err(code) => code,
        },
    };
    ExitCode::from(code)
}
