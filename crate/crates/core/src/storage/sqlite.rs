//! Single-file SQLite backend.
//!
//! One writer connection serializes every mutation; file-backed stores also
//! keep a small pool of reader connections so WAL snapshot reads proceed while
//! an append is in flight.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, MutexGuard};
use std::time::Duration;

use rusqlite::types::Value;
use rusqlite::{params, params_from_iter, Connection, OptionalExtension, Row, TransactionBehavior};

use super::migrations::{latest_version, migrate_to};
use super::{
    DeleteOutcome, IdentityBackend, LogBackend, PolicyBackend, RawHead, SessionRow, StoreError,
    StoreResult, UserChanges,
};
use crate::chain::{ChainHash, ChainState, RawRecord};
use crate::logstore::{LogOrder, LogPage, LogQuery};
use crate::model::{SessionToken, UsageLogEntry, UsagePolicy, UserRecord};
use crate::time::Timestamp;

const READERS: usize = 4;
const BUSY_TIMEOUT: Duration = Duration::from_secs(10);

const ENTRY_COLUMNS: &str = "seq, entry_id, occurred_at, recorded_at, owner, consumer, tool, \
                             data_category, purpose, access_kind, policy_flag, chain_hash";

pub struct SqliteStore {
    path: Option<PathBuf>,
    writer: Mutex<Connection>,
    readers: Vec<Mutex<Connection>>,
    next_reader: AtomicUsize,
}

impl SqliteStore {
    /// Opens (creating if needed) the database at `path` and migrates it to the
    /// latest schema.
    pub fn open(path: impl AsRef<Path>) -> StoreResult<Self> {
        let path = path.as_ref().to_path_buf();
        let mut writer = Connection::open(&path)?;
        configure(&writer)?;
        writer.pragma_update(None, "journal_mode", "WAL")?;
        writer.pragma_update(None, "synchronous", "NORMAL")?;
        migrate_to(&mut writer, latest_version())?;
        let readers = (0..READERS)
            .map(|_| {
                let conn = Connection::open(&path)?;
                configure(&conn)?;
                Ok(Mutex::new(conn))
            })
            .collect::<StoreResult<Vec<_>>>()?;
        Ok(Self {
            path: Some(path),
            writer: Mutex::new(writer),
            readers,
            next_reader: AtomicUsize::new(0),
        })
    }

    /// A private in-memory database; all access goes through one connection.
    pub fn open_in_memory() -> StoreResult<Self> {
        let mut writer = Connection::open_in_memory()?;
        configure(&writer)?;
        migrate_to(&mut writer, latest_version())?;
        Ok(Self {
            path: None,
            writer: Mutex::new(writer),
            readers: Vec::new(),
            next_reader: AtomicUsize::new(0),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn schema_version(&self) -> StoreResult<u32> {
        super::migrations::current_version(&self.writer())
    }

    fn writer(&self) -> MutexGuard<'_, Connection> {
        self.writer.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn reader(&self) -> MutexGuard<'_, Connection> {
        if self.readers.is_empty() {
            return self.writer();
        }
        let start = self.next_reader.fetch_add(1, Ordering::Relaxed);
        for i in 0..self.readers.len() {
            if let Ok(guard) = self.readers[(start + i) % self.readers.len()].try_lock() {
                return guard;
            }
        }
        self.readers[start % self.readers.len()]
            .lock()
            .unwrap_or_else(|p| p.into_inner())
    }
}

fn configure(conn: &Connection) -> StoreResult<()> {
    conn.busy_timeout(BUSY_TIMEOUT)?;
    conn.pragma_update(None, "foreign_keys", "ON")?;
    Ok(())
}

fn corrupt(what: &str, raw: &str) -> StoreError {
    StoreError::Corrupt(format!("{what}: {raw:?}"))
}

fn ts_column(row: &Row<'_>, idx: usize) -> StoreResult<Timestamp> {
    let raw: String = row.get(idx)?;
    Timestamp::parse(&raw).map_err(|_| corrupt("timestamp", &raw))
}

fn entry_from_row(row: &Row<'_>) -> StoreResult<UsageLogEntry> {
    let seq: i64 = row.get(0)?;
    let access: String = row.get(9)?;
    let flag: String = row.get(10)?;
    Ok(UsageLogEntry {
        seq: u64::try_from(seq).map_err(|_| corrupt("seq", &seq.to_string()))?,
        entry_id: row.get(1)?,
        occurred_at: ts_column(row, 2)?,
        recorded_at: ts_column(row, 3)?,
        owner: row.get(4)?,
        consumer: row.get(5)?,
        tool: row.get(6)?,
        data_category: row.get(7)?,
        purpose: row.get(8)?,
        access_kind: access
            .parse()
            .map_err(|()| corrupt("access_kind", &access))?,
        policy_flag: flag.parse().map_err(|()| corrupt("policy_flag", &flag))?,
        chain_hash: row.get(11)?,
    })
}

fn collect_entries(
    stmt: &mut rusqlite::Statement<'_>,
    params: impl rusqlite::Params,
) -> StoreResult<Vec<UsageLogEntry>> {
    let mut rows = stmt.query(params)?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        out.push(entry_from_row(row)?);
    }
    Ok(out)
}

/// Reads a text column as bytes whatever its storage class, so tampered
/// values never fail to load.
fn raw_bytes(row: &Row<'_>, idx: usize) -> rusqlite::Result<Vec<u8>> {
    Ok(match row.get::<_, Value>(idx)? {
        Value::Null => Vec::new(),
        Value::Integer(i) => i.to_string().into_bytes(),
        Value::Real(f) => f.to_string().into_bytes(),
        Value::Text(s) => s.into_bytes(),
        Value::Blob(b) => b,
    })
}

fn head_in(conn: &Connection) -> StoreResult<ChainState> {
    let (seq, hash): (i64, String) = conn.query_row(
        "SELECT head_seq, head_hash FROM chain_head WHERE id = 1",
        [],
        |r| Ok((r.get(0)?, r.get(1)?)),
    )?;
    Ok(ChainState {
        head_seq: u64::try_from(seq).map_err(|_| corrupt("head_seq", &seq.to_string()))?,
        head_hash: ChainHash::from_hex(hash.as_bytes())
            .ok_or_else(|| corrupt("head_hash", &hash))?,
    })
}

impl LogBackend for SqliteStore {
    fn append(
        &self,
        build: &mut dyn FnMut(ChainState) -> UsageLogEntry,
    ) -> StoreResult<UsageLogEntry> {
        let mut conn = self.writer();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let head = head_in(&tx)?;
        let entry = build(head);
        debug_assert_eq!(entry.seq, head.head_seq + 1);
        tx.execute(
            &format!("INSERT INTO usage_log ({ENTRY_COLUMNS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12)"),
            params![
                entry.seq as i64,
                entry.entry_id,
                entry.occurred_at.to_string(),
                entry.recorded_at.to_string(),
                entry.owner,
                entry.consumer,
                entry.tool,
                entry.data_category,
                entry.purpose,
                entry.access_kind.as_str(),
                entry.policy_flag.as_str(),
                entry.chain_hash,
            ],
        )?;
        tx.execute(
            "UPDATE chain_head SET head_seq = ?1, head_hash = ?2 WHERE id = 1",
            params![entry.seq as i64, entry.chain_hash],
        )?;
        tx.commit()?;
        Ok(entry)
    }

    fn chain_state(&self) -> StoreResult<ChainState> {
        head_in(&self.reader())
    }

    fn raw_head(&self) -> StoreResult<RawHead> {
        let conn = self.reader();
        Ok(conn.query_row(
            "SELECT head_seq, head_hash FROM chain_head WHERE id = 1",
            [],
            |r| {
                Ok(RawHead {
                    head_seq: r.get(0)?,
                    head_hash: raw_bytes(r, 1)?,
                })
            },
        )?)
    }

    fn raw_records(&self, skip: u64, limit: usize) -> StoreResult<Vec<RawRecord>> {
        let conn = self.reader();
        let mut stmt = conn.prepare_cached(&format!(
            "SELECT {ENTRY_COLUMNS} FROM usage_log ORDER BY position LIMIT ?1 OFFSET ?2"
        ))?;
        let rows = stmt.query_map(params![limit as i64, skip as i64], |r| {
            Ok(RawRecord {
                seq: match r.get::<_, Value>(0)? {
                    Value::Integer(i) => i,
                    // a non-integer seq can never equal its position
                    _ => -1,
                },
                entry_id: raw_bytes(r, 1)?,
                occurred_at: raw_bytes(r, 2)?,
                recorded_at: raw_bytes(r, 3)?,
                owner: raw_bytes(r, 4)?,
                consumer: raw_bytes(r, 5)?,
                tool: raw_bytes(r, 6)?,
                data_category: raw_bytes(r, 7)?,
                purpose: raw_bytes(r, 8)?,
                access_kind: raw_bytes(r, 9)?,
                policy_flag: raw_bytes(r, 10)?,
                chain_hash: raw_bytes(r, 11)?,
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<Vec<_>>>()?)
    }

    fn query(&self, q: &LogQuery) -> StoreResult<LogPage> {
        let mut clauses = vec!["owner = ?".to_owned()];
        let mut args: Vec<Value> = vec![Value::Text(q.owner.clone())];
        if let Some(from) = q.from {
            clauses.push("occurred_at >= ?".into());
            args.push(Value::Text(from.to_string()));
        }
        if let Some(to) = q.to {
            clauses.push("occurred_at < ?".into());
            args.push(Value::Text(to.to_string()));
        }
        for (column, value) in [
            ("consumer", &q.consumer),
            ("tool", &q.tool),
            ("data_category", &q.data_category),
        ] {
            if let Some(v) = value {
                clauses.push(format!("{column} = ?"));
                args.push(Value::Text(v.clone()));
            }
        }
        let filter = clauses.join(" AND ");
        let order = match q.order {
            LogOrder::OccurredAtDesc => "occurred_at DESC, seq DESC",
            LogOrder::OccurredAtAsc => "occurred_at ASC, seq ASC",
        };

        let mut conn = self.reader();
        // One read transaction so the count and the page see the same snapshot.
        let tx = conn.transaction()?;
        let total: i64 = tx.query_row(
            &format!("SELECT count(*) FROM usage_log WHERE {filter}"),
            params_from_iter(args.iter()),
            |r| r.get(0),
        )?;
        let mut page_args = args.clone();
        page_args.push(Value::Integer(i64::from(q.per_page)));
        page_args.push(Value::Integer(q.offset() as i64));
        let entries = {
            let mut stmt = tx.prepare(&format!(
                "SELECT {ENTRY_COLUMNS} FROM usage_log WHERE {filter} ORDER BY {order} LIMIT ? OFFSET ?"
            ))?;
            collect_entries(&mut stmt, params_from_iter(page_args.iter()))?
        };
        tx.finish()?;
        Ok(LogPage {
            entries,
            total_count: total as u64,
            page: q.page,
            per_page: q.per_page,
        })
    }

    fn entries_between(
        &self,
        owner: &str,
        from: Timestamp,
        to: Timestamp,
    ) -> StoreResult<Vec<UsageLogEntry>> {
        let conn = self.reader();
        let mut stmt = conn.prepare_cached(&format!(
            "SELECT {ENTRY_COLUMNS} FROM usage_log
             WHERE owner = ?1 AND occurred_at >= ?2 AND occurred_at < ?3
             ORDER BY occurred_at ASC, seq ASC"
        ))?;
        collect_entries(&mut stmt, params![owner, from.to_string(), to.to_string()])
    }

    fn health(&self) -> StoreResult<()> {
        if let Some(path) = &self.path {
            let meta = std::fs::metadata(path)
                .map_err(|e| StoreError::Unavailable(format!("{}: {e}", path.display())))?;
            if !meta.is_file() {
                return Err(StoreError::Unavailable(format!(
                    "{} is not a file",
                    path.display()
                )));
            }
            std::fs::OpenOptions::new()
                .write(true)
                .open(path)
                .map_err(|e| StoreError::Unavailable(format!("{}: {e}", path.display())))?;
        }
        let mut conn = self.writer();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        tx.query_row("SELECT head_seq FROM chain_head WHERE id = 1", [], |r| {
            r.get::<_, i64>(0)
        })?;
        tx.rollback()?;
        Ok(())
    }
}

fn policy_from_row(row: &Row<'_>) -> StoreResult<UsagePolicy> {
    let effect: String = row.get(4)?;
    Ok(UsagePolicy {
        policy_id: row.get(0)?,
        owner: row.get(1)?,
        subject: row.get(2)?,
        data_category: row.get(3)?,
        effect: effect.parse().map_err(|()| corrupt("effect", &effect))?,
        created_at: ts_column(row, 5)?,
    })
}

const POLICY_COLUMNS: &str = "policy_id, owner, subject, data_category, effect, created_at";

impl PolicyBackend for SqliteStore {
    fn upsert_policy(&self, policy: &UsagePolicy) -> StoreResult<UsagePolicy> {
        let mut conn = self.writer();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        tx.execute(
            "INSERT INTO policies (policy_id, owner, subject, data_category, effect, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)
             ON CONFLICT (owner, subject, data_category) DO UPDATE SET effect = excluded.effect",
            params![
                policy.policy_id,
                policy.owner,
                policy.subject,
                policy.data_category,
                policy.effect.as_str(),
                policy.created_at.to_string(),
            ],
        )?;
        let stored = tx.query_row(
            &format!(
                "SELECT {POLICY_COLUMNS} FROM policies
                 WHERE owner = ?1 AND subject = ?2 AND data_category = ?3"
            ),
            params![policy.owner, policy.subject, policy.data_category],
            |r| Ok(policy_from_row(r)),
        )??;
        tx.commit()?;
        Ok(stored)
    }

    fn policies_for(&self, owner: &str) -> StoreResult<Vec<UsagePolicy>> {
        let conn = self.reader();
        let mut stmt = conn.prepare_cached(&format!(
            "SELECT {POLICY_COLUMNS} FROM policies WHERE owner = ?1 ORDER BY created_at, ordinal"
        ))?;
        let mut rows = stmt.query([owner])?;
        let mut out = Vec::new();
        while let Some(row) = rows.next()? {
            out.push(policy_from_row(row)?);
        }
        Ok(out)
    }

    fn delete_policy(&self, owner: &str, policy_id: &str) -> StoreResult<DeleteOutcome> {
        let mut conn = self.writer();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let found: Option<String> = tx
            .query_row(
                "SELECT owner FROM policies WHERE policy_id = ?1",
                [policy_id],
                |r| r.get(0),
            )
            .optional()?;
        let outcome = match found {
            None => DeleteOutcome::NotFound,
            Some(o) if o != owner => DeleteOutcome::WrongOwner,
            Some(_) => {
                tx.execute("DELETE FROM policies WHERE policy_id = ?1", [policy_id])?;
                DeleteOutcome::Deleted
            }
        };
        tx.commit()?;
        Ok(outcome)
    }
}

fn load_user(conn: &Connection, main_id: &str) -> StoreResult<Option<UserRecord>> {
    let row = conn
        .query_row(
            "SELECT main_id, credential_hash, is_admin, created_at, updated_at
             FROM users WHERE main_id = ?1",
            [main_id],
            |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, bool>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, String>(4)?,
                ))
            },
        )
        .optional()?;
    let Some((main_id, credential_hash, is_admin, created, updated)) = row else {
        return Ok(None);
    };
    let mut stmt = conn.prepare_cached(
        "SELECT identifier FROM identifiers WHERE main_id = ?1 AND is_main = 0 ORDER BY identifier",
    )?;
    let secondary_ids = stmt
        .query_map([&main_id], |r| r.get::<_, String>(0))?
        .collect::<rusqlite::Result<_>>()?;
    Ok(Some(UserRecord {
        main_id,
        secondary_ids,
        credential_hash,
        is_admin,
        created_at: Timestamp::parse(&created).map_err(|_| corrupt("created_at", &created))?,
        updated_at: Timestamp::parse(&updated).map_err(|_| corrupt("updated_at", &updated))?,
    }))
}

fn ensure_unclaimed(tx: &Connection, identifier: &str) -> StoreResult<()> {
    let owner: Option<String> = tx
        .query_row(
            "SELECT main_id FROM identifiers WHERE identifier = ?1",
            [identifier],
            |r| r.get(0),
        )
        .optional()?;
    match owner {
        Some(_) => Err(StoreError::DuplicateIdentifier(identifier.to_owned())),
        None => Ok(()),
    }
}

fn claim_identifier(
    tx: &Connection,
    identifier: &str,
    main_id: &str,
    is_main: bool,
) -> StoreResult<()> {
    ensure_unclaimed(tx, identifier)?;
    tx.execute(
        "INSERT INTO identifiers (identifier, main_id, is_main) VALUES (?1, ?2, ?3)",
        params![identifier, main_id, is_main],
    )?;
    Ok(())
}

fn admins_in(conn: &Connection) -> StoreResult<u64> {
    let n: i64 = conn.query_row("SELECT count(*) FROM users WHERE is_admin = 1", [], |r| {
        r.get(0)
    })?;
    Ok(n as u64)
}

fn session_from_row(row: &Row<'_>) -> StoreResult<SessionRow> {
    let kind: String = row.get(3)?;
    Ok(SessionRow {
        token: SessionToken {
            token_id: row.get(0)?,
            principal: row.get(2)?,
            kind: kind.parse().map_err(|()| corrupt("kind", &kind))?,
            issued_at: ts_column(row, 4)?,
            expires_at: ts_column(row, 5)?,
            revoked: row.get(6)?,
        },
        pair_id: row.get(1)?,
    })
}

impl IdentityBackend for SqliteStore {
    fn insert_user(&self, user: &UserRecord) -> StoreResult<()> {
        let mut conn = self.writer();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        ensure_unclaimed(&tx, &user.main_id)?;
        tx.execute(
            "INSERT INTO users (main_id, credential_hash, is_admin, created_at, updated_at)
             VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                user.main_id,
                user.credential_hash,
                user.is_admin,
                user.created_at.to_string(),
                user.updated_at.to_string(),
            ],
        )?;
        claim_identifier(&tx, &user.main_id, &user.main_id, true)?;
        for id in &user.secondary_ids {
            claim_identifier(&tx, id, &user.main_id, false)?;
        }
        tx.commit()?;
        Ok(())
    }

    fn user(&self, main_id: &str) -> StoreResult<Option<UserRecord>> {
        load_user(&self.reader(), main_id)
    }

    fn list_users(&self) -> StoreResult<Vec<UserRecord>> {
        let mut conn = self.reader();
        let tx = conn.transaction()?;
        let ids: Vec<String> = {
            let mut stmt = tx.prepare("SELECT main_id FROM users ORDER BY main_id")?;
            let ids = stmt
                .query_map([], |r| r.get(0))?
                .collect::<rusqlite::Result<_>>()?;
            ids
        };
        let users = ids
            .iter()
            .filter_map(|id| load_user(&tx, id).transpose())
            .collect::<StoreResult<Vec<_>>>()?;
        tx.finish()?;
        Ok(users)
    }

    fn main_id_for(&self, identifier: &str) -> StoreResult<Option<String>> {
        Ok(self
            .reader()
            .query_row(
                "SELECT main_id FROM identifiers WHERE identifier = ?1",
                [identifier],
                |r| r.get(0),
            )
            .optional()?)
    }

    fn update_user(
        &self,
        main_id: &str,
        changes: &UserChanges,
        now: Timestamp,
    ) -> StoreResult<UserRecord> {
        let mut conn = self.writer();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let Some(current) = load_user(&tx, main_id)? else {
            return Err(StoreError::NotFound);
        };
        if let Some(is_admin) = changes.is_admin {
            if current.is_admin && !is_admin && admins_in(&tx)? <= 1 {
                return Err(StoreError::LastAdmin);
            }
            tx.execute(
                "UPDATE users SET is_admin = ?1 WHERE main_id = ?2",
                params![is_admin, main_id],
            )?;
        }
        if let Some(secondary) = &changes.secondary_ids {
            tx.execute(
                "DELETE FROM identifiers WHERE main_id = ?1 AND is_main = 0",
                [main_id],
            )?;
            for id in secondary {
                claim_identifier(&tx, id, main_id, false)?;
            }
        }
        tx.execute(
            "UPDATE users SET updated_at = ?1 WHERE main_id = ?2",
            params![now.to_string(), main_id],
        )?;
        let updated = load_user(&tx, main_id)?.ok_or(StoreError::NotFound)?;
        tx.commit()?;
        Ok(updated)
    }

    fn set_credential(
        &self,
        main_id: &str,
        credential_hash: &str,
        now: Timestamp,
    ) -> StoreResult<()> {
        let changed = self.writer().execute(
            "UPDATE users SET credential_hash = ?1, updated_at = ?2 WHERE main_id = ?3",
            params![credential_hash, now.to_string(), main_id],
        )?;
        if changed == 0 {
            return Err(StoreError::NotFound);
        }
        Ok(())
    }

    fn delete_user(&self, main_id: &str) -> StoreResult<()> {
        let mut conn = self.writer();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let Some(user) = load_user(&tx, main_id)? else {
            return Err(StoreError::NotFound);
        };
        if user.is_admin && admins_in(&tx)? <= 1 {
            return Err(StoreError::LastAdmin);
        }
        tx.execute("DELETE FROM identifiers WHERE main_id = ?1", [main_id])?;
        tx.execute("DELETE FROM users WHERE main_id = ?1", [main_id])?;
        tx.execute(
            "UPDATE sessions SET revoked = 1 WHERE principal = ?1",
            [main_id],
        )?;
        tx.commit()?;
        Ok(())
    }

    fn admin_count(&self) -> StoreResult<u64> {
        admins_in(&self.reader())
    }

    fn insert_sessions(&self, sessions: &[SessionRow]) -> StoreResult<()> {
        let mut conn = self.writer();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        for s in sessions {
            tx.execute(
                "INSERT INTO sessions (token_id, pair_id, principal, kind, issued_at, expires_at, revoked)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
                params![
                    s.token.token_id,
                    s.pair_id,
                    s.token.principal,
                    s.token.kind.as_str(),
                    s.token.issued_at.to_string(),
                    s.token.expires_at.to_string(),
                    s.token.revoked,
                ],
            )?;
        }
        tx.commit()?;
        Ok(())
    }

    fn session(&self, token_id: &str) -> StoreResult<Option<SessionRow>> {
        let conn = self.reader();
        let mut stmt = conn.prepare_cached(
            "SELECT token_id, pair_id, principal, kind, issued_at, expires_at, revoked
             FROM sessions WHERE token_id = ?1",
        )?;
        let mut rows = stmt.query([token_id])?;
        rows.next()?.map(session_from_row).transpose()
    }

    fn revoke_pair(&self, pair_id: &str) -> StoreResult<usize> {
        Ok(self.writer().execute(
            "UPDATE sessions SET revoked = 1 WHERE pair_id = ?1 AND revoked = 0",
            [pair_id],
        )?)
    }

    fn revoke_principal(&self, principal: &str) -> StoreResult<usize> {
        Ok(self.writer().execute(
            "UPDATE sessions SET revoked = 1 WHERE principal = ?1 AND revoked = 0",
            [principal],
        )?)
    }

    fn upsert_monitor(
        &self,
        client_id: &str,
        secret_hash: &str,
        now: Timestamp,
    ) -> StoreResult<()> {
        self.writer().execute(
            "INSERT INTO monitor_credentials (client_id, secret_hash, updated_at) VALUES (?1, ?2, ?3)
             ON CONFLICT (client_id) DO UPDATE SET secret_hash = excluded.secret_hash,
                                                  updated_at = excluded.updated_at",
            params![client_id, secret_hash, now.to_string()],
        )?;
        Ok(())
    }

    fn monitor_secret_hash(&self, client_id: &str) -> StoreResult<Option<String>> {
        Ok(self
            .reader()
            .query_row(
                "SELECT secret_hash FROM monitor_credentials WHERE client_id = ?1",
                [client_id],
                |r| r.get(0),
            )
            .optional()?)
    }
}
