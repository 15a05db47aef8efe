//! UTC timestamps at second precision, and the clocks that produce them.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A UTC instant truncated to whole seconds.
///
/// The textual form is always `YYYY-MM-DDTHH:MM:SSZ`, so lexicographic order of
/// the rendered strings equals chronological order. Storage relies on that.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed timestamp {input:?}: expected RFC 3339")]
pub struct TimestampError {
    pub input: String,
}

/// Earliest and latest representable instants (years 0001 through 9999).
const MIN_SECS: i64 = -62_135_596_800;
const MAX_SECS: i64 = 253_402_300_799;

impl Timestamp {
    pub const SECONDS_PER_DAY: i64 = 86_400;

    pub fn from_unix(secs: i64) -> Option<Self> {
        (MIN_SECS..=MAX_SECS).contains(&secs).then_some(Self(secs))
    }

    pub fn unix(self) -> i64 {
        self.0
    }

    pub fn parse(input: &str) -> Result<Self, TimestampError> {
        let err = || TimestampError {
            input: input.to_owned(),
        };
        let parsed = DateTime::parse_from_rfc3339(input.trim()).map_err(|_| err())?;
        Self::from_unix(parsed.timestamp()).ok_or_else(err)
    }

    pub fn plus_secs(self, secs: i64) -> Self {
        Self((self.0 + secs).clamp(MIN_SECS, MAX_SECS))
    }

    pub fn minus_secs(self, secs: i64) -> Self {
        self.plus_secs(-secs)
    }

    /// Calendar day (UTC) containing this instant.
    pub fn utc_day(self) -> NaiveDate {
        self.to_datetime().date_naive()
    }

    /// Midnight UTC at the start of `day`.
    pub fn start_of_day(day: NaiveDate) -> Self {
        let dt = day.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc();
        Self(dt.timestamp())
    }

    fn to_datetime(self) -> DateTime<Utc> {
        Utc.timestamp_opt(self.0, 0)
            .single()
            .expect("timestamp kept within chrono range")
    }
}

impl From<DateTime<Utc>> for Timestamp {
    fn from(dt: DateTime<Utc>) -> Self {
        Self(dt.timestamp().clamp(MIN_SECS, MAX_SECS))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(
            &self
                .to_datetime()
                .to_rfc3339_opts(SecondsFormat::Secs, true),
        )
    }
}

impl fmt::Debug for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Timestamp({self})")
    }
}

impl FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Self::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// Source of "now" for every component that stamps or expires something.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp::from(Utc::now())
    }
}

/// A clock that only moves when told to. Clones share the same instant.
#[derive(Debug, Clone)]
pub struct ManualClock(Arc<AtomicI64>);

impl ManualClock {
    pub fn new(start: Timestamp) -> Self {
        Self(Arc::new(AtomicI64::new(start.unix())))
    }

    pub fn set(&self, to: Timestamp) {
        self.0.store(to.unix(), Ordering::SeqCst);
    }

    pub fn advance(&self, secs: i64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        Timestamp(self.0.load(Ordering::SeqCst))
    }
}
