use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use engine_server::config::ServerConfig;
use engine_server::replay::{export_format, replay_trace};
use engine_server::{router, AppState};

#[derive(Debug, Parser)]
#[command(name = "engine", version, about = "Decision-support engine: HTTP service and trace replay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        /// Overrides the port in the config file.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Replay a newline-delimited trace and export the resulting table.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        export: Option<PathBuf>,
        /// json, csv or md; defaults to the export file's extension.
        #[arg(long)]
        format: Option<String>,
        /// Cosine similarity at which criteria group together.
        #[arg(long)]
        threshold: Option<f64>,
        /// Number of ranked groups shown.
        #[arg(long)]
        visible: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<ServerConfig> {
    match path {
        Some(p) => ServerConfig::load(p),
        None => {
            let mut config = ServerConfig::default();
            config.apply_env(std::env::var(engine_server::config::EMBEDDING_ENDPOINT_ENV).ok());
            Ok(config)
        }
    }
}

async fn serve(port: Option<u16>, host: IpAddr, config: Option<PathBuf>) -> anyhow::Result<()> {
    let mut config = load_config(config.as_ref())?;
    if let Some(p) = port {
        config.port = p;
    }
    let state = tokio::task::spawn_blocking({
        let config = config.clone();
        move || AppState::open(&config)
    })
    .await??;
    let addr = SocketAddr::new(host, config.port);
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn replay(
    trace: PathBuf,
    export: Option<PathBuf>,
    format: Option<String>,
    threshold: Option<f64>,
    visible: Option<usize>,
    config: Option<PathBuf>,
) -> anyhow::Result<ExitCode> {
    let config = load_config(config.as_ref())?;
    let mut session_config = config.session;
    if let Some(t) = threshold {
        anyhow::ensure!((-1.0..=1.0).contains(&t), "threshold must be within [-1, 1]");
        session_config.similarity_threshold = t;
    }
    if let Some(v) = visible {
        anyhow::ensure!(v > 0, "visible must be positive");
        session_config.visible_count = v;
    }
    let format = export_format(format.as_deref(), export.as_deref()).map_err(anyhow::Error::msg)?;
    let text = std::fs::read_to_string(&trace).with_context(|| format!("reading {}", trace.display()))?;
    let (session, rejected) = match replay_trace(&text, session_config, config.providers()?) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: {e}", trace.display());
            return Ok(ExitCode::from(2));
        }
    };
    for r in &rejected {
        eprintln!("warning: record {} rejected: {}", r.index + 1, r.reason);
    }
    let out = session.export(format);
    match &export {
        Some(path) => std::fs::write(path, &out).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{out}"),
    }
    eprintln!(
        "replayed {} records to revision {}: {} options, {} groups",
        session.core().records_applied,
        session.revision(),
        session.derived().space.options.len(),
        session.derived().space.groups.len(),
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let result = match Cli::parse().command {
        Command::Serve { port, host, config } => tokio::runtime::Runtime::new()
            .map_err(anyhow::Error::from)
            .and_then(|rt| rt.block_on(serve(port, host, config)))
            .map(|()| ExitCode::SUCCESS),
        Command::Replay { trace, export, format, threshold, visible, config } => {
            replay(trace, export, format, threshold, visible, config)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
