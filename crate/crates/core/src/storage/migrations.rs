//! Forward-only schema migrations, applied in order on open.
//!
//! The current version lives in `schema_version`. Add new steps at the end and
//! never edit a released one.

use rusqlite::{Connection, OptionalExtension};

use super::{StoreError, StoreResult};

pub struct Migration {
    pub version: u32,
    pub description: &'static str,
    pub sql: &'static str,
}

pub const MIGRATIONS: &[Migration] = &[
    Migration {
        version: 1,
        description: "usage log, chain head, policies, users, sessions, monitors",
        sql: "
        CREATE TABLE usage_log (
            position      INTEGER PRIMARY KEY,
            seq           INTEGER NOT NULL,
            entry_id      TEXT NOT NULL,
            occurred_at   TEXT NOT NULL,
            recorded_at   TEXT NOT NULL,
            owner         TEXT NOT NULL,
            consumer      TEXT NOT NULL,
            tool          TEXT NOT NULL,
            data_category TEXT NOT NULL,
            purpose       TEXT NOT NULL,
            access_kind   TEXT NOT NULL,
            policy_flag   TEXT NOT NULL,
            chain_hash    TEXT NOT NULL
        );
        CREATE INDEX usage_log_owner_time ON usage_log (owner, occurred_at, seq);

        CREATE TABLE chain_head (
            id        INTEGER PRIMARY KEY CHECK (id = 1),
            head_seq  INTEGER NOT NULL,
            head_hash TEXT NOT NULL
        );
        INSERT INTO chain_head (id, head_seq, head_hash)
            VALUES (1, 0, '0000000000000000000000000000000000000000000000000000000000000000');

        CREATE TABLE policies (
            ordinal       INTEGER PRIMARY KEY AUTOINCREMENT,
            policy_id     TEXT NOT NULL UNIQUE,
            owner         TEXT NOT NULL,
            subject       TEXT NOT NULL,
            data_category TEXT NOT NULL,
            effect        TEXT NOT NULL,
            created_at    TEXT NOT NULL,
            UNIQUE (owner, subject, data_category)
        );

        CREATE TABLE users (
            main_id         TEXT PRIMARY KEY,
            credential_hash TEXT NOT NULL,
            is_admin        INTEGER NOT NULL,
            created_at      TEXT NOT NULL,
            updated_at      TEXT NOT NULL
        );

        CREATE TABLE identifiers (
            identifier TEXT PRIMARY KEY,
            main_id    TEXT NOT NULL REFERENCES users (main_id) ON DELETE CASCADE,
            is_main    INTEGER NOT NULL
        );

        CREATE TABLE sessions (
            token_id   TEXT PRIMARY KEY,
            pair_id    TEXT NOT NULL,
            principal  TEXT NOT NULL,
            kind       TEXT NOT NULL,
            issued_at  TEXT NOT NULL,
            expires_at TEXT NOT NULL,
            revoked    INTEGER NOT NULL DEFAULT 0
        );

        CREATE TABLE monitor_credentials (
            client_id   TEXT PRIMARY KEY,
            secret_hash TEXT NOT NULL,
            updated_at  TEXT NOT NULL
        );
        ",
    },
    Migration {
        version: 2,
        description: "session lookup indexes",
        sql: "
        CREATE INDEX sessions_pair ON sessions (pair_id);
        CREATE INDEX sessions_principal ON sessions (principal, revoked);
        CREATE INDEX identifiers_main ON identifiers (main_id);
        ",
    },
];

pub fn latest_version() -> u32 {
    MIGRATIONS.last().map_or(0, |m| m.version)
}

pub fn current_version(conn: &Connection) -> StoreResult<u32> {
    conn.execute_batch(
        "CREATE TABLE IF NOT EXISTS schema_version (
            id INTEGER PRIMARY KEY CHECK (id = 1),
            version INTEGER NOT NULL
        )",
    )?;
    let version: Option<u32> = conn
        .query_row("SELECT version FROM schema_version WHERE id = 1", [], |r| {
            r.get(0)
        })
        .optional()?;
    Ok(version.unwrap_or(0))
}

/// Applies every migration above the stored version, up to `target`.
pub fn migrate_to(conn: &mut Connection, target: u32) -> StoreResult<u32> {
    let tx = conn.transaction_with_behavior(rusqlite::TransactionBehavior::Immediate)?;
    let found = current_version(&tx)?;
    let supported = latest_version();
    if found > supported {
        return Err(StoreError::SchemaTooNew { found, supported });
    }
    let mut version = found;
    for step in MIGRATIONS
        .iter()
        .filter(|m| m.version > found && m.version <= target)
    {
        tracing::info!(
            version = step.version,
            "applying migration: {}",
            step.description
        );
        tx.execute_batch(step.sql)?;
        version = step.version;
    }
    tx.execute(
        "INSERT INTO schema_version (id, version) VALUES (1, ?1)
         ON CONFLICT (id) DO UPDATE SET version = excluded.version",
        [version],
    )?;
    tx.commit()?;
    Ok(version)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn versions_strictly_increase() {
        assert!(MIGRATIONS.windows(2).all(|w| w[0].version < w[1].version));
        assert_eq!(MIGRATIONS[0].version, 1);
    }

    #[test]
    fn fresh_database_reaches_latest() {
        let mut conn = Connection::open_in_memory().unwrap();
        assert_eq!(current_version(&conn).unwrap(), 0);
        assert_eq!(
            migrate_to(&mut conn, latest_version()).unwrap(),
            latest_version()
        );
        // idempotent
        assert_eq!(
            migrate_to(&mut conn, latest_version()).unwrap(),
            latest_version()
        );
    }

    #[test]
    fn upgrades_from_older_version() {
        let mut conn = Connection::open_in_memory().unwrap();
        assert_eq!(migrate_to(&mut conn, 1).unwrap(), 1);
        let has_index: i64 = conn
            .query_row(
                "SELECT count(*) FROM sqlite_master WHERE name = 'sessions_pair'",
                [],
                |r| r.get(0),
            )
            .unwrap();
        assert_eq!(has_index, 0);
        assert_eq!(migrate_to(&mut conn, latest_version()).unwrap(), 2);
    }

    #[test]
    fn refuses_newer_schema() {
        let mut conn = Connection::open_in_memory().unwrap();
        migrate_to(&mut conn, latest_version()).unwrap();
        conn.execute("UPDATE schema_version SET version = 99", [])
            .unwrap();
        assert!(matches!(
            migrate_to(&mut conn, latest_version()),
            Err(StoreError::SchemaTooNew { found: 99, .. })
        ));
    }
}
