use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wannier_lab_cli::{output_root, read_config, run_experiment, Scenario, OUTPUT_ROOT_VAR};

#[derive(Parser)]
#[command(
    name = "wannier-lab",
    version,
    about = "Run wannier-lab scenarios from TOML configs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a config, run its scenario and write CSVs plus manifest.json.
    Run { config: PathBuf },
    /// Validate a config and print it with defaults filled in.
    Validate { config: PathBuf },
    /// List the available scenarios.
    ListScenarios,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<12} {}", s.name(), s.summary());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match read_config(&config) {
            Ok(v) => {
                for w in &v.warnings {
                    eprintln!("warning: {w}");
                }
                print!("{}", v.config.to_toml());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run { config } => {
            let validated = match read_config(&config) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let root = output_root();
            log::debug!(
                "output root {} (override with {OUTPUT_ROOT_VAR})",
                root.display()
            );
            match run_experiment(&validated, &root) {
                Ok(manifest) => {
                    for a in &manifest.assertions {
                        println!(
                            "{} {}: {}",
                            if a.passed { "PASS" } else { "FAIL" },
                            a.name,
                            a.detail
                        );
                    }
                    println!(
                        "output: {}",
                        root.join(validated.config.output_dir()).display()
                    );
                    if manifest.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
