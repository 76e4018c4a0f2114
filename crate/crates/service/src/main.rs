use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use stable_rank_service::{router, AppState, Config, Snapshot, DEFAULT_BODY_LIMIT};

#[derive(Parser, Debug)]
#[command(name = "stable-rank-service", version, about = "HTTP session service for stable rankings")]
struct Args {
    #[arg(long, env = "STABLE_RANK_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "STABLE_RANK_HOST", default_value = "127.0.0.1")]
    host: String,
    /// Directory served at `/` (the explorer bundle).
    #[arg(long, env = "STABLE_RANK_STATIC")]
    static_dir: Option<PathBuf>,
    /// Where a JSON snapshot is restored from on start and written on shutdown.
    #[arg(long, env = "STABLE_RANK_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Idle seconds before a session expires.
    #[arg(long, default_value_t = 3600)]
    ttl_secs: u64,
    #[arg(long, default_value_t = DEFAULT_BODY_LIMIT)]
    body_limit: usize,
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        if let Ok(mut s) = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            s.recv().await;
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

async fn run(args: Args) -> Result<(), String> {
    let config =
        Config { ttl: Duration::from_secs(args.ttl_secs), static_dir: args.static_dir, body_limit: args.body_limit };
    let state = match &args.data_dir {
        Some(dir) => match Snapshot::read(dir).map_err(|e| format!("{}: {e}", dir.display()))? {
            Some(snap) => {
                eprintln!("restoring {} sessions from {}", snap.session_count(), dir.display());
                let config = config.clone();
                tokio::task::spawn_blocking(move || AppState::restore(config, snap))
                    .await
                    .map_err(|e| e.to_string())?
                    .map_err(|e| format!("snapshot restore failed: {e}"))?
            }
            None => AppState::new(config),
        },
        None => AppState::new(config),
    };

    let sweeper = state.clone();
    let period = (sweeper.config().ttl / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.expire_idle();
        }
    });

    let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse().map_err(|e| format!("bad address: {e}"))?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| format!("bind {addr}: {e}"))?;
    eprintln!("listening on http://{}", listener.local_addr().map_err(|e| e.to_string())?);
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown_signal())
        .await
        .map_err(|e| e.to_string())?;

    if let Some(dir) = &args.data_dir {
        let snap = state.snapshot().await;
        snap.write(dir).map_err(|e| format!("snapshot to {}: {e}", dir.display()))?;
        eprintln!("wrote {} sessions to {}", snap.session_count(), dir.display());
    }
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    match run(Args::parse()).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
