//! Append-only, hash-chained usage log with owner-scoped reads.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::chain::{self, ExecMode, RawRecord};
use crate::model::{DayCount, Effect, LogDraft, PolicyFlag, UsageLogEntry, UsageSummary};
use crate::report::{self, Report};
use crate::storage::{LogBackend, StoreError};
use crate::time::{Clock, Timestamp};

pub const DEFAULT_PER_PAGE: u32 = 50;
pub const MAX_PER_PAGE: u32 = 500;
pub const DEFAULT_SUMMARY_DAYS: u32 = 7;

/// Records fetched per round trip while verifying.
const VERIFY_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogOrder {
    #[default]
    OccurredAtDesc,
    OccurredAtAsc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogQuery {
    pub owner: String,
    pub from: Option<Timestamp>,
    pub to: Option<Timestamp>,
    pub consumer: Option<String>,
    pub tool: Option<String>,
    pub data_category: Option<String>,
    pub page: u32,
    pub per_page: u32,
    pub order: LogOrder,
}

impl LogQuery {
    pub fn for_owner(owner: impl Into<String>) -> Self {
        Self {
            owner: owner.into(),
            from: None,
            to: None,
            consumer: None,
            tool: None,
            data_category: None,
            page: 1,
            per_page: DEFAULT_PER_PAGE,
            order: LogOrder::default(),
        }
    }

    pub fn validate(&self) -> Result<(), LogError> {
        if let (Some(from), Some(to)) = (self.from, self.to) {
            if from >= to {
                return Err(LogError::InvalidRange { from, to });
            }
        }
        if !(1..=MAX_PER_PAGE).contains(&self.per_page) {
            return Err(LogError::PerPage(self.per_page));
        }
        if self.page == 0 {
            return Err(LogError::Page);
        }
        Ok(())
    }

    /// Whether `entry` satisfies every filter, ignoring pagination.
    pub fn matches(&self, entry: &UsageLogEntry) -> bool {
        entry.owner == self.owner
            && self.from.is_none_or(|f| entry.occurred_at >= f)
            && self.to.is_none_or(|t| entry.occurred_at < t)
            && self.consumer.as_ref().is_none_or(|c| &entry.consumer == c)
            && self.tool.as_ref().is_none_or(|t| &entry.tool == t)
            && self
                .data_category
                .as_ref()
                .is_none_or(|c| &entry.data_category == c)
    }

    pub fn offset(&self) -> u64 {
        u64::from(self.page - 1) * u64::from(self.per_page)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogPage {
    pub entries: Vec<UsageLogEntry>,
    pub total_count: u64,
    pub page: u32,
    pub per_page: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ChainVerdict {
    Ok {
        entries: u64,
    },
    Broken {
        first_bad_seq: u64,
        expected_hash: String,
        found_hash: String,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("invalid range: from ({from}) must be before to ({to})")]
    InvalidRange { from: Timestamp, to: Timestamp },
    #[error("per_page must be between 1 and {MAX_PER_PAGE}, got {0}")]
    PerPage(u32),
    #[error("page must be at least 1")]
    Page,
    #[error("days must be at least 1")]
    Days,
}

pub struct LogStore {
    backend: Arc<dyn LogBackend>,
    clock: Arc<dyn Clock>,
    mode: ExecMode,
}

impl LogStore {
    pub fn new(backend: Arc<dyn LogBackend>, clock: Arc<dyn Clock>) -> Self {
        Self {
            backend,
            clock,
            mode: ExecMode::default(),
        }
    }

    pub fn with_exec_mode(mut self, mode: ExecMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    /// Sequences, stamps and chains `draft`. A deny decision flags the entry
    /// but never prevents it from being stored.
    pub fn append(&self, draft: LogDraft, decision: Effect) -> Result<UsageLogEntry, LogError> {
        let entry_id = Uuid::new_v4().to_string();
        let clock = &self.clock;
        let stored = self.backend.append(&mut |head| {
            let mut entry = UsageLogEntry {
                entry_id: entry_id.clone(),
                seq: head.head_seq + 1,
                occurred_at: draft.occurred_at,
                recorded_at: clock.now(),
                owner: draft.owner.clone(),
                consumer: draft.consumer.clone(),
                tool: draft.tool.clone(),
                data_category: draft.data_category.clone(),
                purpose: draft.purpose.clone(),
                access_kind: draft.access_kind,
                policy_flag: match decision {
                    Effect::Deny => PolicyFlag::Violation,
                    Effect::Allow => PolicyFlag::None,
                },
                chain_hash: String::new(),
            };
            entry.chain_hash = chain::entry_hash(&head.head_hash, &entry).to_hex();
            entry
        })?;
        Ok(stored)
    }

    pub fn query(&self, q: &LogQuery) -> Result<LogPage, LogError> {
        q.validate()?;
        Ok(self.backend.query(q)?)
    }

    /// Usage over the trailing `days` before `now`, i.e. `[now - days, now)`.
    pub fn summarize(
        &self,
        owner: &str,
        now: Timestamp,
        days: u32,
    ) -> Result<UsageSummary, LogError> {
        if days == 0 {
            return Err(LogError::Days);
        }
        let start = now.minus_secs(i64::from(days) * Timestamp::SECONDS_PER_DAY);
        self.summarize_range(owner, start, now)
    }

    pub fn summarize_range(
        &self,
        owner: &str,
        from: Timestamp,
        to: Timestamp,
    ) -> Result<UsageSummary, LogError> {
        if from >= to {
            return Err(LogError::InvalidRange { from, to });
        }
        let entries = self.backend.entries_between(owner, from, to)?;
        Ok(aggregate(owner, from, to, &entries, self.mode))
    }

    /// Replays the whole chain and reports the first position that does not
    /// check out.
    pub fn verify_chain(&self) -> Result<ChainVerdict, LogError> {
        let head = self.backend.raw_head()?;
        let mut prev = chain::ChainHash::GENESIS.to_hex().into_bytes();
        let mut seen: u64 = 0;
        loop {
            let batch: Vec<RawRecord> = self.backend.raw_records(seen, VERIFY_CHUNK)?;
            if batch.is_empty() {
                break;
            }
            if let Some(broken) = chain::check_links(&batch, seen + 1, &prev, self.mode) {
                return Ok(ChainVerdict::Broken {
                    first_bad_seq: broken.position,
                    expected_hash: broken.expected_hash,
                    found_hash: broken.found_hash,
                });
            }
            prev = batch.last().expect("non-empty").chain_hash.clone();
            seen += batch.len() as u64;
        }

        // The head guards against truncation of the newest entries.
        let found_hash = String::from_utf8_lossy(&head.head_hash).into_owned();
        let expected_hash = String::from_utf8_lossy(&prev).into_owned();
        if u64::try_from(head.head_seq).ok() != Some(seen) {
            let head_seq = u64::try_from(head.head_seq).unwrap_or(0);
            return Ok(ChainVerdict::Broken {
                first_bad_seq: head_seq.min(seen) + 1,
                expected_hash,
                found_hash,
            });
        }
        if head.head_hash != prev {
            return Ok(ChainVerdict::Broken {
                first_bad_seq: seen.max(1),
                expected_hash,
                found_hash,
            });
        }
        Ok(ChainVerdict::Ok { entries: seen })
    }

    pub fn export_report(
        &self,
        owner: &str,
        from: Timestamp,
        to: Timestamp,
    ) -> Result<Report, LogError> {
        if from >= to {
            return Err(LogError::InvalidRange { from, to });
        }
        let entries = self.backend.entries_between(owner, from, to)?;
        let summary = aggregate(owner, from, to, &entries, self.mode);
        Ok(report::render(owner, from, to, &summary, &entries))
    }

    pub fn health(&self) -> Result<(), LogError> {
        Ok(self.backend.health()?)
    }
}

#[derive(Default)]
struct Tally {
    by_consumer: HashMap<String, u64>,
    by_tool: HashMap<String, u64>,
    by_day: HashMap<chrono::NaiveDate, u64>,
}

impl Tally {
    fn add(mut self, e: &UsageLogEntry) -> Self {
        *self.by_consumer.entry(e.consumer.clone()).or_default() += 1;
        *self.by_tool.entry(e.tool.clone()).or_default() += 1;
        *self.by_day.entry(e.occurred_at.utc_day()).or_default() += 1;
        self
    }

    #[cfg(feature = "parallel")]
    fn merge(mut self, other: Tally) -> Self {
        for (k, v) in other.by_consumer {
            *self.by_consumer.entry(k).or_default() += v;
        }
        for (k, v) in other.by_tool {
            *self.by_tool.entry(k).or_default() += v;
        }
        for (k, v) in other.by_day {
            *self.by_day.entry(k).or_default() += v;
        }
        self
    }
}

/// Builds a summary from entries already restricted to owner and window.
/// Every UTC day the window touches gets a row, including empty ones.
pub fn aggregate(
    owner: &str,
    from: Timestamp,
    to: Timestamp,
    entries: &[UsageLogEntry],
    mode: ExecMode,
) -> UsageSummary {
    let tally = match mode {
        ExecMode::Sequential => entries.iter().fold(Tally::default(), Tally::add),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                entries
                    .par_iter()
                    .fold(Tally::default, Tally::add)
                    .reduce(Tally::default, Tally::merge)
            }
            #[cfg(not(feature = "parallel"))]
            {
                entries.iter().fold(Tally::default(), Tally::add)
            }
        }
    };

    let first_day = from.utc_day();
    let last_day = to.minus_secs(1).utc_day();
    let by_day = first_day
        .iter_days()
        .take_while(|d| *d <= last_day)
        .map(|day| DayCount {
            day: day.format("%Y-%m-%d").to_string(),
            count: tally.by_day.get(&day).copied().unwrap_or(0),
        })
        .collect();

    UsageSummary {
        owner: owner.to_owned(),
        window_start: from,
        window_end: to,
        total: entries.len() as u64,
        by_consumer: tally.by_consumer.into_iter().collect::<BTreeMap<_, _>>(),
        by_tool: tally.by_tool.into_iter().collect::<BTreeMap<_, _>>(),
        by_day,
    }
}
