//! Process configuration and startup.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::http::{header, HeaderValue, Method};
use axum::Router;
use itt_core::identity::{load_or_create_signing_key, FileEnvSecrets, KdfParams, SIGNING_KEY};
use itt_core::{IdentityConfig, SqliteStore, SystemClock};
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::routes::{self, Mode};
use crate::state::AppState;

#[derive(Debug, Clone, clap::Args)]
pub struct ServerConfig {
    /// Which service(s) this process runs. `all` serves every route on the log port.
    #[arg(long, env = "ITT_MODE", value_enum, default_value = "all")]
    pub mode: Mode,
    #[arg(long, env = "ITT_BIND", default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    pub bind: IpAddr,
    #[arg(long, env = "ITT_LOG_PORT", default_value_t = 8081)]
    pub log_port: u16,
    #[arg(long, env = "ITT_SSO_PORT", default_value_t = 8082)]
    pub sso_port: u16,
    #[arg(long, env = "ITT_DB_PATH", default_value = "itt.db")]
    pub db_path: PathBuf,
    /// Defaults to `signing.key` next to the database.
    #[arg(long, env = "ITT_SIGNING_KEY_FILE")]
    pub signing_key_file: Option<PathBuf>,
    #[arg(long, env = "ITT_BOOTSTRAP_ADMIN_ID")]
    pub bootstrap_admin_id: Option<String>,
    #[arg(long, env = "ITT_BOOTSTRAP_ADMIN_PASSWORD", hide_env_values = true)]
    pub bootstrap_admin_password: Option<String>,
    /// File of `client_id:secret` lines; `#` starts a comment.
    #[arg(long, env = "ITT_MONITOR_CREDENTIALS_FILE")]
    pub monitor_credentials_file: Option<PathBuf>,
    /// Comma-separated origins allowed to call the API from a browser.
    #[arg(long, env = "ITT_CORS_ORIGINS", value_delimiter = ',')]
    pub cors_origins: Vec<String>,
    #[arg(long, env = "ITT_ACCESS_TTL_SECONDS", default_value_t = itt_core::identity::DEFAULT_ACCESS_TTL_SECS)]
    pub access_ttl_seconds: i64,
    #[arg(long, env = "ITT_REFRESH_TTL_SECONDS", default_value_t = itt_core::identity::DEFAULT_REFRESH_TTL_SECS)]
    pub refresh_ttl_seconds: i64,
    #[arg(long, env = "ITT_KDF_MEMORY_KIB", default_value_t = KdfParams::default().memory_kib)]
    pub kdf_memory_kib: u32,
    #[arg(long, env = "ITT_KDF_ITERATIONS", default_value_t = KdfParams::default().iterations)]
    pub kdf_iterations: u32,
    #[arg(long, env = "ITT_KDF_PARALLELISM", default_value_t = KdfParams::default().parallelism)]
    pub kdf_parallelism: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("storage: {0}")]
    Store(#[from] itt_core::StoreError),
    #[error("identity: {0}")]
    Identity(#[from] itt_core::IdentityError),
    #[error("secrets: {0}")]
    Secret(#[from] itt_core::identity::SecretError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected client_id:secret")]
    CredentialLine { path: PathBuf, line: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl ServerConfig {
    pub fn identity_config(&self) -> IdentityConfig {
        IdentityConfig {
            access_ttl_secs: self.access_ttl_seconds,
            refresh_ttl_secs: self.refresh_ttl_seconds,
            kdf: KdfParams {
                memory_kib: self.kdf_memory_kib,
                iterations: self.kdf_iterations,
                parallelism: self.kdf_parallelism,
            },
        }
    }

    pub fn signing_key_path(&self) -> PathBuf {
        self.signing_key_file.clone().unwrap_or_else(|| {
            self.db_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join("signing.key")
        })
    }

    pub fn port(&self) -> u16 {
        match self.mode {
            Mode::Sso => self.sso_port,
            Mode::Log | Mode::All => self.log_port,
        }
    }

    fn check(&self) -> Result<(), StartupError> {
        if self.access_ttl_seconds <= 0 || self.refresh_ttl_seconds <= 0 {
            return Err(StartupError::Config(
                "token lifetimes must be positive".into(),
            ));
        }
        if self.refresh_ttl_seconds < self.access_ttl_seconds {
            return Err(StartupError::Config(
                "refresh tokens must not expire before access tokens".into(),
            ));
        }
        if self.bootstrap_admin_id.is_some() != self.bootstrap_admin_password.is_some() {
            return Err(StartupError::Config(
                "ITT_BOOTSTRAP_ADMIN_ID and ITT_BOOTSTRAP_ADMIN_PASSWORD go together".into(),
            ));
        }
        Ok(())
    }
}

/// Parses a monitor credentials file.
pub fn read_monitor_credentials(path: &Path) -> Result<Vec<(String, String)>, StartupError> {
    let text = std::fs::read_to_string(path).map_err(|source| StartupError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once(':') {
            Some((id, secret)) if !id.trim().is_empty() && !secret.is_empty() => {
                out.push((id.trim().to_owned(), secret.to_owned()))
            }
            _ => {
                return Err(StartupError::CredentialLine {
                    path: path.to_owned(),
                    line: i + 1,
                })
            }
        }
    }
    Ok(out)
}

/// Opens storage, loads secrets and seeds the bootstrap admin and monitor
/// credentials.
pub fn prepare(config: &ServerConfig) -> Result<AppState, StartupError> {
    config.check()?;
    let store = Arc::new(SqliteStore::open(&config.db_path)?);
    let secrets = FileEnvSecrets::new().with_file(SIGNING_KEY, config.signing_key_path());
    let key = load_or_create_signing_key(&secrets)?;
    let state = AppState::over_sqlite(store, Arc::new(SystemClock), key, config.identity_config())?;

    if let (Some(id), Some(password)) =
        (&config.bootstrap_admin_id, &config.bootstrap_admin_password)
    {
        if state.identity.bootstrap_admin(id, password)? {
            tracing::info!(admin = %id, "bootstrap administrator created");
        }
    }
    if let Some(path) = &config.monitor_credentials_file {
        for (client, secret) in read_monitor_credentials(path)? {
            if !state.identity.verify_monitor(&client, &secret)? {
                state.identity.set_monitor_credential(&client, &secret)?;
                tracing::info!(client = %client, "monitor credential stored");
            }
        }
    }
    Ok(state)
}

fn cors(origins: &[String]) -> Option<CorsLayer> {
    let origins: Vec<HeaderValue> = origins
        .iter()
        .map(|o| o.trim())
        .filter(|o| !o.is_empty())
        .filter_map(|o| HeaderValue::from_str(o).ok())
        .collect();
    if origins.is_empty() {
        return None;
    }
    Some(
        CorsLayer::new()
            .allow_origin(AllowOrigin::list(origins))
            .allow_methods([Method::GET, Method::POST, Method::PUT, Method::DELETE])
            .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE])
            .expose_headers([header::CONTENT_DISPOSITION])
            .allow_credentials(true)
            .max_age(Duration::from_secs(600)),
    )
}

/// The complete application for `mode`, middleware included.
pub fn app(state: AppState, mode: Mode, cors_origins: &[String]) -> Router {
    let router = routes::router(state, mode);
    match cors(cors_origins) {
        Some(layer) => router.layer(layer),
        None => router,
    }
}

/// Serves until ctrl-c or SIGTERM. The bound address is printed to stdout
/// first, so that a supervisor using port 0 can find it.
pub async fn serve(config: ServerConfig) -> Result<(), StartupError> {
    let prepared = config.clone();
    let state = tokio::task::spawn_blocking(move || prepare(&prepared))
        .await
        .map_err(|e| StartupError::Config(e.to_string()))??;
    let addr = SocketAddr::new(config.bind, config.port());
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| StartupError::Io {
            path: PathBuf::from(addr.to_string()),
            source,
        })?;
    let local = listener.local_addr().map_err(|source| StartupError::Io {
        path: PathBuf::from(addr.to_string()),
        source,
    })?;
    println!("listening on http://{local} mode={:?}", config.mode);
    tracing::info!(%local, mode = ?config.mode, "serving");
    axum::serve(listener, app(state, config.mode, &config.cors_origins))
        .with_graceful_shutdown(shutdown_signal())
        .await
        .map_err(|source| StartupError::Io {
            path: PathBuf::from(local.to_string()),
            source,
        })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}
