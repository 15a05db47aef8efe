//! Hash chain over canonically encoded log entries.
//!
//! ```text
//! hash_1 = SHA-256(0x00 * 32 || encode(entry_1))
//! hash_k = SHA-256(hash_(k-1) || encode(entry_k))
//! ```
//!
//! Verification does not need to recompute the chain sequentially: every link
//! can be checked against the *stored* hash of its predecessor. Up to the first
//! broken link the stored hashes equal the recomputed ones, so the smallest
//! failing link is exactly where a sequential replay would first diverge. That
//! makes link checks independent and lets them run in parallel.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoding::{canonical_encode, encode_values};
use crate::model::UsageLogEntry;

pub const HASH_LEN: usize = 32;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainHash([u8; HASH_LEN]);

impl ChainHash {
    pub const GENESIS: ChainHash = ChainHash([0; HASH_LEN]);

    pub fn as_bytes(&self) -> &[u8; HASH_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Parses lowercase hex only; anything else is not a hash this store wrote.
    pub fn from_hex(raw: &[u8]) -> Option<Self> {
        if raw.len() != HASH_LEN * 2 || raw.iter().any(|b| b.is_ascii_uppercase()) {
            return None;
        }
        let mut out = [0u8; HASH_LEN];
        hex::decode_to_slice(raw, &mut out).ok()?;
        Some(Self(out))
    }
}

impl From<[u8; HASH_LEN]> for ChainHash {
    fn from(bytes: [u8; HASH_LEN]) -> Self {
        Self(bytes)
    }
}

impl fmt::Debug for ChainHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChainHash({}..)", &self.to_hex()[..12])
    }
}

impl fmt::Display for ChainHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

pub fn link(prev: &ChainHash, encoded: &[u8]) -> ChainHash {
    let mut hasher = Sha256::new();
    hasher.update(prev.0);
    hasher.update(encoded);
    ChainHash(hasher.finalize().into())
}

pub fn entry_hash(prev: &ChainHash, entry: &UsageLogEntry) -> ChainHash {
    link(prev, &canonical_encode(entry))
}

/// Head of the chain: last assigned sequence number and its hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainState {
    pub head_seq: u64,
    pub head_hash: ChainHash,
}

impl ChainState {
    pub const EMPTY: ChainState = ChainState {
        head_seq: 0,
        head_hash: ChainHash::GENESIS,
    };
}

/// A stored entry exactly as the storage layer holds it.
///
/// Nothing here is trusted: text columns are raw bytes and `seq` is whatever
/// integer is on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub seq: i64,
    pub entry_id: Vec<u8>,
    pub occurred_at: Vec<u8>,
    pub recorded_at: Vec<u8>,
    pub owner: Vec<u8>,
    pub consumer: Vec<u8>,
    pub tool: Vec<u8>,
    pub data_category: Vec<u8>,
    pub purpose: Vec<u8>,
    pub access_kind: Vec<u8>,
    pub policy_flag: Vec<u8>,
    pub chain_hash: Vec<u8>,
}

impl RawRecord {
    pub fn encode(&self) -> Vec<u8> {
        let seq = self.seq.to_string();
        encode_values([
            seq.as_bytes(),
            &self.entry_id,
            &self.occurred_at,
            &self.recorded_at,
            &self.owner,
            &self.consumer,
            &self.tool,
            &self.data_category,
            &self.purpose,
            &self.access_kind,
            &self.policy_flag,
        ])
    }

    /// Mutable views of every text column, in encoding order followed by the hash.
    pub fn text_columns_mut(&mut self) -> [&mut Vec<u8>; 11] {
        [
            &mut self.entry_id,
            &mut self.occurred_at,
            &mut self.recorded_at,
            &mut self.owner,
            &mut self.consumer,
            &mut self.tool,
            &mut self.data_category,
            &mut self.purpose,
            &mut self.access_kind,
            &mut self.policy_flag,
            &mut self.chain_hash,
        ]
    }
}

impl From<&UsageLogEntry> for RawRecord {
    fn from(e: &UsageLogEntry) -> Self {
        Self {
            seq: e.seq as i64,
            entry_id: e.entry_id.clone().into_bytes(),
            occurred_at: e.occurred_at.to_string().into_bytes(),
            recorded_at: e.recorded_at.to_string().into_bytes(),
            owner: e.owner.clone().into_bytes(),
            consumer: e.consumer.clone().into_bytes(),
            tool: e.tool.clone().into_bytes(),
            data_category: e.data_category.clone().into_bytes(),
            purpose: e.purpose.clone().into_bytes(),
            access_kind: e.access_kind.as_str().as_bytes().to_vec(),
            policy_flag: e.policy_flag.as_str().as_bytes().to_vec(),
            chain_hash: e.chain_hash.clone().into_bytes(),
        }
    }
}

/// The first link that failed to check out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrokenLink {
    /// Sequence number the failing position should hold.
    pub position: u64,
    pub expected_hash: String,
    pub found_hash: String,
}

/// How link checks are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    /// Rayon work-stealing; identical to `Sequential` without the `parallel` feature.
    #[default]
    Parallel,
}

/// Checks `records` as positions `first_position..` of the log, where `prev`
/// is the stored hex hash immediately before the first record (the genesis
/// hash for position 1). Returns the lowest failing position.
pub fn check_links(
    records: &[RawRecord],
    first_position: u64,
    prev: &[u8],
    mode: ExecMode,
) -> Option<BrokenLink> {
    let check = |i: usize| {
        let prev_raw: &[u8] = if i == 0 {
            prev
        } else {
            &records[i - 1].chain_hash
        };
        check_one(&records[i], first_position + i as u64, prev_raw)
    };
    match mode {
        ExecMode::Sequential => (0..records.len()).find_map(check),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..records.len()).into_par_iter().find_map_first(check)
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..records.len()).find_map(check)
            }
        }
    }
}

fn check_one(record: &RawRecord, position: u64, prev_raw: &[u8]) -> Option<BrokenLink> {
    let found = String::from_utf8_lossy(&record.chain_hash).into_owned();
    // An unreadable predecessor hash was already reported at the predecessor.
    let Some(prev) = ChainHash::from_hex(prev_raw) else {
        return Some(BrokenLink {
            position,
            expected_hash: String::new(),
            found_hash: found,
        });
    };
    let expected = link(&prev, &record.encode()).to_hex();
    let seq_ok = u64::try_from(record.seq).is_ok_and(|s| s == position);
    if seq_ok && expected.as_bytes() == record.chain_hash.as_slice() {
        None
    } else {
        Some(BrokenLink {
            position,
            expected_hash: expected,
            found_hash: found,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::tests::sample;

    const GENESIS_HEX: &str = "0000000000000000000000000000000000000000000000000000000000000000";

    fn build(n: u64) -> Vec<RawRecord> {
        let mut prev = ChainHash::GENESIS;
        (1..=n)
            .map(|seq| {
                let mut e = sample();
                e.seq = seq;
                e.purpose = format!("purpose {seq}");
                let h = entry_hash(&prev, &e);
                e.chain_hash = h.to_hex();
                prev = h;
                RawRecord::from(&e)
            })
            .collect()
    }

    #[test]
    fn genesis_is_zero() {
        assert_eq!(ChainHash::GENESIS.to_hex(), "0".repeat(64));
    }

    #[test]
    fn first_hash_is_sha256_of_zero_prefix() {
        let e = sample();
        let mut input = vec![0u8; 32];
        input.extend(canonical_encode(&e));
        let direct: [u8; 32] = Sha256::digest(&input).into();
        assert_eq!(entry_hash(&ChainHash::GENESIS, &e).as_bytes(), &direct);
    }

    #[test]
    fn intact_chain_checks_in_both_modes() {
        let records = build(64);
        for mode in [ExecMode::Sequential, ExecMode::Parallel] {
            assert_eq!(check_links(&records, 1, GENESIS_HEX.as_bytes(), mode), None);
        }
    }

    #[test]
    fn reports_lowest_broken_position() {
        let mut records = build(64);
        records[40].purpose.push(b'x');
        records[10].tool[0] ^= 1;
        for mode in [ExecMode::Sequential, ExecMode::Parallel] {
            assert_eq!(
                check_links(&records, 1, GENESIS_HEX.as_bytes(), mode)
                    .unwrap()
                    .position,
                11
            );
        }
    }

    #[test]
    fn corrupt_hash_reported_at_its_own_position() {
        let mut records = build(8);
        records[3].chain_hash[5] = b'Z';
        let broken = check_links(&records, 1, GENESIS_HEX.as_bytes(), ExecMode::Parallel).unwrap();
        assert_eq!(broken.position, 4);
    }

    #[test]
    fn chunked_check_uses_carried_hash() {
        let records = build(20);
        let (head, tail) = records.split_at(12);
        assert_eq!(
            check_links(head, 1, GENESIS_HEX.as_bytes(), ExecMode::Sequential),
            None
        );
        let prev = head.last().unwrap().chain_hash.clone();
        assert_eq!(check_links(tail, 13, &prev, ExecMode::Parallel), None);
    }

    #[test]
    fn hex_parse_is_strict() {
        assert!(ChainHash::from_hex("AB".repeat(32).as_bytes()).is_none());
        assert!(ChainHash::from_hex(b"abcd").is_none());
        assert!(ChainHash::from_hex("ab".repeat(32).as_bytes()).is_some());
    }
}
