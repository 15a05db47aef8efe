//! Out-of-band modification of a store file, bypassing the service.

use std::path::Path;

use rand::Rng;
use rusqlite::types::Value;
use rusqlite::{params, Connection};

/// Stored columns of a log row that participate in verification.
pub const COLUMNS: [&str; 12] = [
    "seq",
    "entry_id",
    "occurred_at",
    "recorded_at",
    "owner",
    "consumer",
    "tool",
    "data_category",
    "purpose",
    "access_kind",
    "policy_flag",
    "chain_hash",
];

#[derive(Debug, Clone)]
pub struct Mutation {
    pub position: u64,
    pub column: &'static str,
    pub byte: usize,
    pub before: Vec<u8>,
}

fn read_bytes(conn: &Connection, position: u64, column: &str) -> rusqlite::Result<Vec<u8>> {
    let v: Value = conn.query_row(
        &format!("SELECT {column} FROM usage_log WHERE position = ?1"),
        [position as i64],
        |r| r.get(0),
    )?;
    Ok(match v {
        Value::Integer(i) => i.to_string().into_bytes(),
        Value::Text(s) => s.into_bytes(),
        Value::Blob(b) => b,
        Value::Real(f) => f.to_string().into_bytes(),
        Value::Null => Vec::new(),
    })
}

fn write_bytes(
    conn: &Connection,
    position: u64,
    column: &str,
    bytes: Vec<u8>,
) -> rusqlite::Result<()> {
    // valid UTF-8 goes back as text so the column's affinity still applies
    let value = match String::from_utf8(bytes) {
        Ok(s) => Value::Text(s),
        Err(e) => Value::Blob(e.into_bytes()),
    };
    conn.execute(
        &format!("UPDATE usage_log SET {column} = ?1 WHERE position = ?2"),
        params![value, position as i64],
    )?;
    Ok(())
}

/// Changes one byte, drawn uniformly from all stored bytes of the row at
/// `position`, to a different value. Returns what was changed so the caller
/// can undo it.
pub fn flip_random_byte(
    db: &Path,
    position: u64,
    rng: &mut impl Rng,
) -> rusqlite::Result<Mutation> {
    let conn = Connection::open(db)?;
    let columns = COLUMNS
        .iter()
        .map(|c| read_bytes(&conn, position, c).map(|b| (*c, b)))
        .collect::<rusqlite::Result<Vec<_>>>()?;
    let total: usize = columns.iter().map(|(_, b)| b.len()).sum();
    let mut pick = rng.random_range(0..total);
    let (column, before) = columns
        .into_iter()
        .find(|(_, b)| {
            if pick < b.len() {
                true
            } else {
                pick -= b.len();
                false
            }
        })
        .expect("pick is below the total length");
    let mut after = before.clone();
    after[pick] ^= rng.random_range(1..=255u8);
    write_bytes(&conn, position, column, after)?;
    Ok(Mutation {
        position,
        column,
        byte: pick,
        before,
    })
}

pub fn undo(db: &Path, m: &Mutation) -> rusqlite::Result<()> {
    let conn = Connection::open(db)?;
    write_bytes(&conn, m.position, m.column, m.before.clone())
}
