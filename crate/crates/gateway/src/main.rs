use std::io::BufRead;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use itt_gateway::ServerConfig;

#[derive(Parser)]
#[command(
    name = "itt-server",
    version,
    about = "Usage log and single sign-on services"
)]
struct Cli {
    #[command(flatten)]
    config: ServerConfig,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the service (the default).
    Serve,
    /// Store or replace a monitor credential. The secret is read from stdin.
    AddMonitor { client_id: String },
}

fn add_monitor(config: &ServerConfig, client_id: &str) -> Result<(), String> {
    let mut secret = String::new();
    std::io::stdin()
        .lock()
        .read_line(&mut secret)
        .map_err(|e| e.to_string())?;
    let secret = secret.trim_end_matches(['\r', '\n']);
    let state = itt_gateway::prepare(config).map_err(|e| e.to_string())?;
    state
        .identity
        .set_monitor_credential(client_id, secret)
        .map_err(|e| e.to_string())?;
    eprintln!("monitor {client_id} stored");
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("ITT_LOG")
                .unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command.unwrap_or(Command::Serve) {
        Command::Serve => tokio::runtime::Runtime::new()
            .map_err(|e| e.to_string())
            .and_then(|rt| {
                rt.block_on(itt_gateway::serve(cli.config))
                    .map_err(|e| e.to_string())
            }),
        Command::AddMonitor { client_id } => add_monitor(&cli.config, &client_id),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("itt-server: {e}");
            ExitCode::FAILURE
        }
    }
}
