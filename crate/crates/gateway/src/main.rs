use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use flowledger_core::ledger::Ledger;
use flowledger_gateway::state::{Gateway, Options};
use flowledger_gateway::{api, replay, trace};
use tracing::info;

#[derive(Parser)]
#[command(
    name = "flowledger",
    version,
    about = "BPMN interpreter on a simulated ledger"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Ledger snapshot; loaded if present and rewritten after every change.
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Directory for compiled models.
        #[arg(long)]
        repo: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Register a model, replay traces and write a cost report.
    Replay {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Interleave cases in a seeded random order.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn open(
    ledger: Option<PathBuf>,
    repo: Option<PathBuf>,
) -> anyhow::Result<flowledger_gateway::state::Shared> {
    let l = match &ledger {
        Some(p) if p.exists() => {
            Ledger::load(p).with_context(|| format!("loading {}", p.display()))?
        }
        _ => Ledger::default(),
    };
    Gateway::new(
        l,
        Options {
            admin: None,
            snapshot: ledger,
            repository: repo,
        },
    )
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().cmd {
        Cmd::Serve {
            port,
            ledger,
            repo,
            host,
        } => {
            let g = open(ledger, repo)?;
            let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
            info!(addr = %listener.local_addr()?, "listening");
            axum::serve(listener, api::router(g)).await?;
        }
        Cmd::Replay {
            model,
            traces,
            out,
            ledger,
            seed,
        } => {
            let bpmn = std::fs::read_to_string(&model)
                .with_context(|| format!("reading {}", model.display()))?;
            let text = std::fs::read_to_string(&traces)
                .with_context(|| format!("reading {}", traces.display()))?;
            let cases = trace::parse_traces(&text)?;
            let g = open(ledger, None)?;
            let report = replay::replay(g, &bpmn, cases, seed).await?;
            std::fs::write(&out, report.to_json())
                .with_context(|| format!("writing {}", out.display()))?;
            print!("{}", report.table());
        }
    }
    Ok(())
}
