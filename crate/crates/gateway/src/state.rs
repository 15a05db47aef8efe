use std::sync::Arc;

use itt_core::identity::TokenSigner;
use itt_core::{
    Clock, IdentityConfig, IdentityError, IdentityService, LogStore, PolicyEngine, SqliteStore,
};

use crate::error::{ApiError, ApiResult};

/// Shared services. Cloning is cheap; all mutable state lives behind the
/// services themselves.
#[derive(Clone)]
pub struct AppState {
    pub logs: Arc<LogStore>,
    pub policies: Arc<PolicyEngine>,
    pub identity: Arc<IdentityService>,
}

impl AppState {
    /// All three services over one SQLite store.
    pub fn over_sqlite(
        store: Arc<SqliteStore>,
        clock: Arc<dyn Clock>,
        signing_key: Vec<u8>,
        config: IdentityConfig,
    ) -> Result<Self, IdentityError> {
        Ok(Self {
            logs: Arc::new(LogStore::new(store.clone(), clock.clone())),
            policies: Arc::new(PolicyEngine::new(store.clone(), clock.clone())),
            identity: Arc::new(IdentityService::new(
                store,
                TokenSigner::new(signing_key),
                clock,
                config,
            )?),
        })
    }
}

/// Runs store and hashing work off the async workers.
pub async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(ApiError::from)?
}
