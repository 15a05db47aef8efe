//! Canonical byte encoding of log entries.
//!
//! Fields appear in a fixed order as `name=value`, joined by `\n`. Inside a
//! value, `\` is written as `\\` and a newline as `\n`, so the separator never
//! occurs inside a value and the encoding is injective.

use crate::model::{AccessKind, PolicyFlag, UsageLogEntry};
use crate::time::Timestamp;

pub const FIELD_ORDER: [&str; 11] = [
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
];

/// Encodes every field of `entry` except `chain_hash`.
pub fn canonical_encode(entry: &UsageLogEntry) -> Vec<u8> {
    let seq = entry.seq.to_string();
    let occurred = entry.occurred_at.to_string();
    let recorded = entry.recorded_at.to_string();
    encode_values([
        seq.as_bytes(),
        entry.entry_id.as_bytes(),
        occurred.as_bytes(),
        recorded.as_bytes(),
        entry.owner.as_bytes(),
        entry.consumer.as_bytes(),
        entry.tool.as_bytes(),
        entry.data_category.as_bytes(),
        entry.purpose.as_bytes(),
        entry.access_kind.as_str().as_bytes(),
        entry.policy_flag.as_str().as_bytes(),
    ])
}

/// Encodes raw field values given in [`FIELD_ORDER`].
///
/// Works on bytes so that records read back from storage can be re-encoded
/// even when their contents are no longer valid UTF-8.
pub fn encode_values(values: [&[u8]; 11]) -> Vec<u8> {
    let len: usize = values.iter().map(|v| v.len() + 16).sum();
    let mut out = Vec::with_capacity(len);
    for (i, (name, value)) in FIELD_ORDER.iter().zip(values).enumerate() {
        if i > 0 {
            out.push(b'\n');
        }
        out.extend_from_slice(name.as_bytes());
        out.push(b'=');
        for &b in value {
            match b {
                b'\\' => out.extend_from_slice(b"\\\\"),
                b'\n' => out.extend_from_slice(b"\\n"),
                _ => out.push(b),
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("expected field {expected:?} at position {position}")]
    UnexpectedField {
        position: usize,
        expected: &'static str,
    },
    #[error("wrong number of fields: {0}")]
    FieldCount(usize),
    #[error("bad escape sequence in field {0:?}")]
    BadEscape(&'static str),
    #[error("field {0:?} has an invalid value")]
    BadValue(&'static str),
}

/// Inverse of [`canonical_encode`]. The returned entry has an empty `chain_hash`.
pub fn canonical_decode(bytes: &[u8]) -> Result<UsageLogEntry, DecodeError> {
    let lines: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    if lines.len() != FIELD_ORDER.len() {
        return Err(DecodeError::FieldCount(lines.len()));
    }
    let mut values = Vec::with_capacity(FIELD_ORDER.len());
    for (position, (line, name)) in lines.into_iter().zip(FIELD_ORDER).enumerate() {
        let value = line
            .strip_prefix(name.as_bytes())
            .and_then(|rest| rest.strip_prefix(b"="))
            .ok_or(DecodeError::UnexpectedField {
                position,
                expected: name,
            })?;
        let raw = unescape(value).ok_or(DecodeError::BadEscape(name))?;
        values.push(String::from_utf8(raw).map_err(|_| DecodeError::BadValue(name))?);
    }

    let mut it = values.into_iter();
    let mut next = || it.next().expect("field count checked");
    let seq = next().parse().map_err(|_| DecodeError::BadValue("seq"))?;
    let entry_id = next();
    let occurred_at =
        Timestamp::parse(&next()).map_err(|_| DecodeError::BadValue("occurred_at"))?;
    let recorded_at =
        Timestamp::parse(&next()).map_err(|_| DecodeError::BadValue("recorded_at"))?;
    let owner = next();
    let consumer = next();
    let tool = next();
    let data_category = next();
    let purpose = next();
    let access_kind: AccessKind = next()
        .parse()
        .map_err(|()| DecodeError::BadValue("access_kind"))?;
    let policy_flag: PolicyFlag = next()
        .parse()
        .map_err(|()| DecodeError::BadValue("policy_flag"))?;

    Ok(UsageLogEntry {
        entry_id,
        seq,
        occurred_at,
        recorded_at,
        owner,
        consumer,
        tool,
        data_category,
        purpose,
        access_kind,
        policy_flag,
        chain_hash: String::new(),
    })
}

fn unescape(value: &[u8]) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(value.len());
    let mut bytes = value.iter();
    while let Some(&b) = bytes.next() {
        if b == b'\\' {
            match bytes.next()? {
                b'\\' => out.push(b'\\'),
                b'n' => out.push(b'\n'),
                _ => return None,
            }
        } else {
            out.push(b);
        }
    }
    Some(out)
}
