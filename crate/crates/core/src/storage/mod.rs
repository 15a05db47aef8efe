//! Data-access interfaces and the default embedded backend.
//!
//! Services talk to storage only through the traits below, so the backend can
//! be replaced without touching the log, policy or identity logic.

mod migrations;
mod sqlite;

use std::collections::BTreeSet;

pub use migrations::{Migration, MIGRATIONS};
pub use sqlite::SqliteStore;

use crate::chain::{ChainState, RawRecord};
use crate::logstore::{LogPage, LogQuery};
use crate::model::{SessionToken, UsageLogEntry, UsagePolicy, UserRecord};
use crate::time::Timestamp;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("database error: {0}")]
    Database(#[from] rusqlite::Error),
    #[error("identifier {0:?} is already registered")]
    DuplicateIdentifier(String),
    #[error("record not found")]
    NotFound,
    #[error("operation would remove the last administrator")]
    LastAdmin,
    #[error("stored data is corrupt: {0}")]
    Corrupt(String),
    #[error("database schema version {found} is newer than supported version {supported}")]
    SchemaTooNew { found: u32, supported: u32 },
    #[error("store unavailable: {0}")]
    Unavailable(String),
}

pub type StoreResult<T> = Result<T, StoreError>;

/// Head record exactly as stored, for integrity checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawHead {
    pub head_seq: i64,
    pub head_hash: Vec<u8>,
}

pub trait LogBackend: Send + Sync {
    /// Runs `build` with the current head inside the write critical section and
    /// persists the entry it returns together with the advanced head. Either
    /// both are stored or neither is.
    fn append(
        &self,
        build: &mut dyn FnMut(ChainState) -> UsageLogEntry,
    ) -> StoreResult<UsageLogEntry>;

    fn chain_state(&self) -> StoreResult<ChainState>;

    fn raw_head(&self) -> StoreResult<RawHead>;

    /// Up to `limit` records in append order, starting after the `skip`-th.
    fn raw_records(&self, skip: u64, limit: usize) -> StoreResult<Vec<RawRecord>>;

    fn query(&self, q: &LogQuery) -> StoreResult<LogPage>;

    /// All of `owner`'s entries with `from <= occurred_at < to`, ascending by
    /// `(occurred_at, seq)`.
    fn entries_between(
        &self,
        owner: &str,
        from: Timestamp,
        to: Timestamp,
    ) -> StoreResult<Vec<UsageLogEntry>>;

    /// Probes that the store is readable and writable.
    fn health(&self) -> StoreResult<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeleteOutcome {
    Deleted,
    NotFound,
    WrongOwner,
}

pub trait PolicyBackend: Send + Sync {
    /// Inserts the rule, or replaces the effect of the existing rule with the
    /// same `(owner, subject, data_category)`. Returns the stored rule.
    fn upsert_policy(&self, policy: &UsagePolicy) -> StoreResult<UsagePolicy>;

    /// Rules of `owner` in creation order.
    fn policies_for(&self, owner: &str) -> StoreResult<Vec<UsagePolicy>>;

    fn delete_policy(&self, owner: &str, policy_id: &str) -> StoreResult<DeleteOutcome>;
}

/// A session plus the id tying an access token to its refresh token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRow {
    pub token: SessionToken,
    pub pair_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserChanges {
    pub secondary_ids: Option<BTreeSet<String>>,
    pub is_admin: Option<bool>,
}

pub trait IdentityBackend: Send + Sync {
    /// Fails with [`StoreError::DuplicateIdentifier`] naming the first identifier
    /// already claimed by anyone.
    fn insert_user(&self, user: &UserRecord) -> StoreResult<()>;

    fn user(&self, main_id: &str) -> StoreResult<Option<UserRecord>>;

    fn list_users(&self) -> StoreResult<Vec<UserRecord>>;

    fn main_id_for(&self, identifier: &str) -> StoreResult<Option<String>>;

    fn update_user(
        &self,
        main_id: &str,
        changes: &UserChanges,
        now: Timestamp,
    ) -> StoreResult<UserRecord>;

    fn set_credential(
        &self,
        main_id: &str,
        credential_hash: &str,
        now: Timestamp,
    ) -> StoreResult<()>;

    fn delete_user(&self, main_id: &str) -> StoreResult<()>;

    fn admin_count(&self) -> StoreResult<u64>;

    fn insert_sessions(&self, sessions: &[SessionRow]) -> StoreResult<()>;

    fn session(&self, token_id: &str) -> StoreResult<Option<SessionRow>>;

    /// Revokes both tokens of a pair; returns how many were live before.
    fn revoke_pair(&self, pair_id: &str) -> StoreResult<usize>;

    /// Revokes every live session of `principal`; returns how many.
    fn revoke_principal(&self, principal: &str) -> StoreResult<usize>;

    fn upsert_monitor(&self, client_id: &str, secret_hash: &str, now: Timestamp)
        -> StoreResult<()>;

    fn monitor_secret_hash(&self, client_id: &str) -> StoreResult<Option<String>>;
}
