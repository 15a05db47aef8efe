//! Core of the inverse transparency toolchain: the usage log data model, the
//! hash-chained log store, owner policies and the identity service.
//!
//! Everything here is synchronous and storage-agnostic behind the backend
//! traits in [`storage`]. The SQLite implementation is the one shipped.

pub mod chain;
pub mod encoding;
pub mod identity;
pub mod logstore;
pub mod model;
pub mod policy;
pub mod report;
pub mod storage;
pub mod time;

pub use chain::{ChainHash, ChainState, ExecMode};
pub use identity::{IdentityConfig, IdentityError, IdentityService, TokenPair, VerifiedToken};
pub use logstore::{ChainVerdict, LogError, LogOrder, LogPage, LogQuery, LogStore};
pub use model::*;
pub use policy::{PolicyDecision, PolicyEngine, PolicyError};
pub use storage::{SqliteStore, StoreError};
pub use time::{Clock, ManualClock, SystemClock, Timestamp};
