//! Randomized stores and queries.

use std::sync::Arc;

use itt_core::model::{AccessKind, Effect, LogDraft, UsageLogEntry};
use itt_core::{LogOrder, LogQuery, LogStore, ManualClock, SqliteStore, Timestamp};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

/// 2023-11-14T22:13:20Z
pub const EPOCH: i64 = 1_700_000_000;
/// Entries are spread over this many days starting at [`EPOCH`].
pub const SPAN_DAYS: i64 = 30;
/// Occurrence times are multiples of this, so ties on occurred_at are common.
pub const GRID_SECS: i64 = 1800;

pub const CONSUMERS: [&str; 5] = ["ana", "ben", "cleo", "dmitri", "eve"];
pub const TOOLS: [&str; 4] = ["git-monitor", "calendar-sync", "hr-analytics", "bi-export"];
pub const CATEGORIES: [&str; 4] = ["commits", "calendar", "reviews", "tickets"];

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn owners(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("owner-{i:02}")).collect()
}

pub fn ts(unix: i64) -> Timestamp {
    Timestamp::from_unix(unix).expect("in range")
}

pub fn random_draft(rng: &mut impl Rng, owners: &[String]) -> LogDraft {
    let slot = rng.random_range(0..SPAN_DAYS * 86_400 / GRID_SECS);
    let purposes = [
        "",
        "weekly report",
        "line one\nline two",
        "back\\slash",
        "ünïcode ✓",
    ];
    LogDraft {
        occurred_at: ts(EPOCH + slot * GRID_SECS),
        owner: owners.choose(rng).unwrap().clone(),
        consumer: CONSUMERS.choose(rng).unwrap().to_string(),
        tool: TOOLS.choose(rng).unwrap().to_string(),
        data_category: CATEGORIES.choose(rng).unwrap().to_string(),
        purpose: purposes.choose(rng).unwrap().to_string(),
        access_kind: *AccessKind::ALL.choose(rng).unwrap(),
    }
}

/// A log store whose clock sits after every generated occurrence time.
pub struct SeededStore {
    pub store: LogStore,
    pub sqlite: Arc<SqliteStore>,
    pub clock: ManualClock,
    pub entries: Vec<UsageLogEntry>,
}

pub fn store_with_clock(sqlite: Arc<SqliteStore>) -> (LogStore, ManualClock) {
    let clock = ManualClock::new(ts(EPOCH + SPAN_DAYS * 86_400));
    (LogStore::new(sqlite, Arc::new(clock.clone())), clock)
}

pub fn seed(
    sqlite: Arc<SqliteStore>,
    rng: &mut impl Rng,
    n: usize,
    owners: &[String],
) -> SeededStore {
    let (store, clock) = store_with_clock(sqlite.clone());
    let entries = (0..n)
        .map(|_| {
            let effect = if rng.random_bool(0.1) {
                Effect::Deny
            } else {
                Effect::Allow
            };
            store
                .append(random_draft(rng, owners), effect)
                .expect("append")
        })
        .collect();
    SeededStore {
        store,
        sqlite,
        clock,
        entries,
    }
}

/// A valid query; filters are drawn so that many queries have few or no hits.
pub fn random_query(rng: &mut impl Rng, owners: &[String]) -> LogQuery {
    let mut q = LogQuery::for_owner(owners.choose(rng).unwrap().clone());
    let span = SPAN_DAYS * 86_400;
    if rng.random_bool(0.5) {
        let a = EPOCH + rng.random_range(-86_400..span);
        let b = EPOCH + rng.random_range(-86_400..span + 86_400);
        let (lo, hi) = if a < b { (a, b) } else { (b, a + 1) };
        if rng.random_bool(0.8) {
            q.from = Some(ts(lo));
        }
        if rng.random_bool(0.8) {
            q.to = Some(ts(hi));
        }
    }
    if rng.random_bool(0.3) {
        q.consumer = Some(CONSUMERS.choose(rng).unwrap().to_string());
    }
    if rng.random_bool(0.3) {
        q.tool = Some(TOOLS.choose(rng).unwrap().to_string());
    }
    if rng.random_bool(0.3) {
        q.data_category = Some(CATEGORIES.choose(rng).unwrap().to_string());
    }
    q.per_page = match rng.random_range(0..4) {
        0 => rng.random_range(1..=5),
        1 => rng.random_range(6..=60),
        2 => 500,
        _ => 50,
    };
    q.page = rng.random_range(1..=4);
    q.order = if rng.random_bool(0.5) {
        LogOrder::OccurredAtAsc
    } else {
        LogOrder::OccurredAtDesc
    };
    q
}
