use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use edlab::catalog::system_names;
use edlab::harness::{k_slope_config, run_experiment, ExperimentConfig, ExperimentReport, SystemConfig};
use edlab::Error;

#[derive(Parser)]
#[command(name = "edlab", version, about = "Ensemble density transport experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more TOML experiment files.
    Run {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
    },
    /// Estimate K for a catalog system.
    K {
        #[arg(long, value_enum)]
        system: SystemArg,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        omega: f64,
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        #[arg(long = "t-max", default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List catalog systems and their parameters.
    ListSystems,
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Circle,
    Baker,
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn print_report(label: &str, report: &ExperimentReport) {
    println!("# {label}");
    print!("{}", report.render());
}

fn config_error(e: &Error) -> ExitCode {
    eprintln!("edlab: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListSystems => {
            for (_, description) in system_names() {
                println!("{description}");
            }
            ExitCode::SUCCESS
        }
        Command::K {
            system,
            omega,
            a,
            t_max,
            seed,
        } => {
            let system = match system {
                SystemArg::Circle => SystemConfig::Circle { omega },
                SystemArg::Baker => SystemConfig::Baker { a },
            };
            let cfg = match k_slope_config(system, t_max, seed) {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            match run_experiment(&cfg) {
                Ok(r) => {
                    print_report(&cfg.system.label(), &r);
                    if r.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAIL)
                    }
                }
                Err(e) => config_error(&e),
            }
        }
        Command::Run { configs } => {
            let mut parsed = Vec::with_capacity(configs.len());
            for path in &configs {
                match ExperimentConfig::from_path(path) {
                    Ok(c) => parsed.push((path, c)),
                    Err(e) => return config_error(&e),
                }
            }
            let mut all_passed = true;
            for (path, cfg) in parsed {
                match run_experiment(&cfg) {
                    Ok(r) => {
                        all_passed &= r.passed();
                        print_report(&path.display().to_string(), &r);
                    }
                    Err(e) => {
                        eprintln!("edlab: {}: {e}", path.display());
                        all_passed = false;
                    }
                }
            }
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
    }
}
