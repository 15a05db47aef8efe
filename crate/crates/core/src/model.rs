//! Domain types shared by the log store, policy engine and identity service.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

/// Monitors may report usages up to this far in the future of the store clock.
pub const CLOCK_SKEW_ALLOWANCE_SECS: i64 = 300;

/// Wildcard accepted in policy subject and category positions.
pub const WILDCARD: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Read,
    Aggregate,
    Export,
    Other,
}

impl AccessKind {
    pub const ALL: [AccessKind; 4] = [Self::Read, Self::Aggregate, Self::Export, Self::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Read => "read",
            Self::Aggregate => "aggregate",
            Self::Export => "export",
            Self::Other => "other",
        }
    }
}

impl FromStr for AccessKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or(())
    }
}

impl fmt::Display for AccessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyFlag {
    None,
    Violation,
}

impl PolicyFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Violation => "violation",
        }
    }
}

impl FromStr for PolicyFlag {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "none" => Ok(Self::None),
            "violation" => Ok(Self::Violation),
            _ => Err(()),
        }
    }
}

/// One attributed data-usage event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageLogEntry {
    pub entry_id: String,
    pub seq: u64,
    pub occurred_at: Timestamp,
    pub recorded_at: Timestamp,
    pub owner: String,
    pub consumer: String,
    pub tool: String,
    pub data_category: String,
    pub purpose: String,
    pub access_kind: AccessKind,
    pub policy_flag: PolicyFlag,
    /// Lowercase hex SHA-256 linking this entry to its predecessor.
    pub chain_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effect {
    Allow,
    Deny,
}

impl Effect {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Allow => "allow",
            Self::Deny => "deny",
        }
    }
}

impl FromStr for Effect {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "allow" => Ok(Self::Allow),
            "deny" => Ok(Self::Deny),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsagePolicy {
    pub policy_id: String,
    pub owner: String,
    pub subject: String,
    pub data_category: String,
    pub effect: Effect,
    pub created_at: Timestamp,
}

impl UsagePolicy {
    /// Number of non-wildcard match fields.
    pub fn specificity(&self) -> u8 {
        u8::from(self.subject != WILDCARD) + u8::from(self.data_category != WILDCARD)
    }

    pub fn matches(&self, consumer: &str, data_category: &str) -> bool {
        (self.subject == WILDCARD || self.subject == consumer)
            && (self.data_category == WILDCARD || self.data_category == data_category)
    }
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub main_id: String,
    pub secondary_ids: BTreeSet<String>,
    #[serde(skip)]
    pub credential_hash: String,
    pub is_admin: bool,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
}

impl UserRecord {
    pub fn identifiers(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.main_id.as_str()).chain(self.secondary_ids.iter().map(String::as_str))
    }
}

impl fmt::Debug for UserRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserRecord")
            .field("main_id", &self.main_id)
            .field("secondary_ids", &self.secondary_ids)
            .field("credential_hash", &"<redacted>")
            .field("is_admin", &self.is_admin)
            .field("created_at", &self.created_at)
            .field("updated_at", &self.updated_at)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Access,
    Refresh,
}

impl TokenKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Access => "access",
            Self::Refresh => "refresh",
        }
    }
}

impl FromStr for TokenKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "access" => Ok(Self::Access),
            "refresh" => Ok(Self::Refresh),
            _ => Err(()),
        }
    }
}

/// Server-side view of an issued token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    pub token_id: String,
    pub principal: String,
    pub issued_at: Timestamp,
    pub expires_at: Timestamp,
    pub kind: TokenKind,
    pub revoked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayCount {
    /// `YYYY-MM-DD`, UTC.
    pub day: String,
    pub count: u64,
}

/// Per-owner usage counts over a half-open window `[window_start, window_end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageSummary {
    pub owner: String,
    pub window_start: Timestamp,
    pub window_end: Timestamp,
    pub total: u64,
    pub by_consumer: BTreeMap<String, u64>,
    pub by_tool: BTreeMap<String, u64>,
    pub by_day: Vec<DayCount>,
}

impl UsageSummary {
    /// `total = Σ by_consumer = Σ by_tool = Σ by_day`.
    pub fn sums_agree(&self) -> bool {
        let consumers: u64 = self.by_consumer.values().sum();
        let tools: u64 = self.by_tool.values().sum();
        let days: u64 = self.by_day.iter().map(|d| d.count).sum();
        consumers == self.total && tools == self.total && days == self.total
    }
}

/// Unvalidated log fields as a monitor submits them.
///
/// Every field defaults to empty so that missing fields surface as field errors
/// rather than as a deserialization failure.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogSubmission {
    pub occurred_at: String,
    pub owner: String,
    pub consumer: String,
    pub tool: String,
    pub data_category: String,
    pub purpose: String,
    pub access_kind: String,
}

/// A syntactically valid submission, not yet sequenced or chained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogDraft {
    pub occurred_at: Timestamp,
    pub owner: String,
    pub consumer: String,
    pub tool: String,
    pub data_category: String,
    pub purpose: String,
    pub access_kind: AccessKind,
}

impl LogDraft {
    /// Replaces owner and consumer with resolved main identifiers.
    pub fn attributed(mut self, owner: String, consumer: String) -> Self {
        self.owner = owner;
        self.consumer = consumer;
        self
    }
}

impl From<&LogDraft> for LogSubmission {
    fn from(d: &LogDraft) -> Self {
        Self {
            occurred_at: d.occurred_at.to_string(),
            owner: d.owner.clone(),
            consumer: d.consumer.clone(),
            tool: d.tool.clone(),
            data_category: d.data_category.clone(),
            purpose: d.purpose.clone(),
            access_kind: d.access_kind.as_str().to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldErrorKind {
    Required,
    MalformedTimestamp,
    ClockSkew,
    UnknownAccessKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub kind: FieldErrorKind,
    pub message: String,
}

impl FieldError {
    fn new(field: &str, kind: FieldErrorKind, message: impl Into<String>) -> Self {
        Self {
            field: field.to_owned(),
            kind,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{} invalid field(s): {}", .0.len(), field_list(.0))]
pub struct ValidationErrors(pub Vec<FieldError>);

fn field_list(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| e.field.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Checks a submission field by field against the store clock `now`, collecting
/// every problem instead of stopping at the first.
pub fn validate_log_submission(
    candidate: &LogSubmission,
    now: Timestamp,
) -> Result<LogDraft, ValidationErrors> {
    let mut errors = Vec::new();

    let mut required = |field: &str, value: &str| {
        let value = value.trim();
        if value.is_empty() {
            errors.push(FieldError::new(
                field,
                FieldErrorKind::Required,
                "must not be empty",
            ));
        }
        value.to_owned()
    };
    let owner = required("owner", &candidate.owner);
    let consumer = required("consumer", &candidate.consumer);
    let tool = required("tool", &candidate.tool);
    let data_category = required("data_category", &candidate.data_category);
    let purpose = candidate.purpose.trim().to_owned();

    let occurred_at = match candidate.occurred_at.trim() {
        "" => {
            errors.push(FieldError::new(
                "occurred_at",
                FieldErrorKind::Required,
                "must not be empty",
            ));
            None
        }
        raw => match Timestamp::parse(raw) {
            Ok(ts) if ts.unix() > now.unix() + CLOCK_SKEW_ALLOWANCE_SECS => {
                errors.push(FieldError::new(
                    "occurred_at",
                    FieldErrorKind::ClockSkew,
                    format!(
                        "{ts} is more than {CLOCK_SKEW_ALLOWANCE_SECS}s ahead of the server clock ({now})"
                    ),
                ));
                None
            }
            Ok(ts) => Some(ts),
            Err(e) => {
                errors.push(FieldError::new(
                    "occurred_at",
                    FieldErrorKind::MalformedTimestamp,
                    e.to_string(),
                ));
                None
            }
        },
    };

    let access_kind = match candidate.access_kind.trim().to_ascii_lowercase().parse() {
        Ok(kind) => Some(kind),
        Err(()) => {
            errors.push(FieldError::new(
                "access_kind",
                FieldErrorKind::UnknownAccessKind,
                "expected one of read, aggregate, export, other",
            ));
            None
        }
    };

    match (occurred_at, access_kind) {
        (Some(occurred_at), Some(access_kind)) if errors.is_empty() => Ok(LogDraft {
            occurred_at,
            owner,
            consumer,
            tool,
            data_category,
            purpose,
            access_kind,
        }),
        _ => Err(ValidationErrors(errors)),
    }
}

/// Trims an identifier; `None` when nothing remains.
pub fn normalize_identifier(raw: &str) -> Option<String> {
    let trimmed = raw.trim();
    (!trimmed.is_empty()).then(|| trimmed.to_owned())
}
