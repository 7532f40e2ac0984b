use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use babble_core::harness::{run_experiment, summarize, ExperimentPlan, HarnessError};
use babble_service::ServiceConfig;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "babble", version, about = "Babbling robot experiments and live sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every episode of an experiment plan and write the results.
    Run {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Recompute a results directory from its episode logs and check the cached tables.
    Summarize { dir: PathBuf },
    /// Serve live sessions over HTTP.
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, default_value = "archive")]
        archive: PathBuf,
        #[arg(long, default_value_t = babble_service::DEFAULT_FEEDBACK_DURATION_MS)]
        feedback_ms: u64,
        #[arg(long, default_value_t = 0)]
        assignment_seed: u64,
    },
}

fn report(result: Result<babble_core::harness::Summary, HarnessError>) -> ExitCode {
    match result {
        Ok(summary) => {
            print!("{}", summary.to_json());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Run { plan } => report(ExperimentPlan::load(&plan).and_then(|p| run_experiment(&p))),
        Command::Summarize { dir } => report(summarize(&dir)),
        Command::Serve {
            port,
            host,
            archive,
            feedback_ms,
            assignment_seed,
        } => {
            let config = ServiceConfig {
                archive_dir: archive,
                feedback_duration_ms: feedback_ms,
                assignment_seed,
                ..ServiceConfig::default()
            };
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(3);
                }
            };
            match runtime.block_on(babble_service::serve(config, SocketAddr::new(host, port))) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(3)
                }
            }
        }
    }
}
