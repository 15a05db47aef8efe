//! Brute-force reference implementations. None of these share code paths with
//! the production modules beyond the plain data types.

use std::collections::BTreeMap;

use itt_core::model::{DayCount, Effect, UsageLogEntry, UsagePolicy, UsageSummary};
use itt_core::policy::DecisionReason;
use itt_core::{LogOrder, LogQuery, PolicyDecision, Timestamp};

use crate::sha256;

/// Canonical bytes of an entry, spelled out field by field.
pub fn encode(e: &UsageLogEntry) -> Vec<u8> {
    fn esc(v: &str) -> String {
        v.replace('\\', "\\\\").replace('\n', "\\n")
    }
    let lines = [
        format!("seq={}", e.seq),
        format!("entry_id={}", esc(&e.entry_id)),
        format!("occurred_at={}", e.occurred_at),
        format!("recorded_at={}", e.recorded_at),
        format!("owner={}", esc(&e.owner)),
        format!("consumer={}", esc(&e.consumer)),
        format!("tool={}", esc(&e.tool)),
        format!("data_category={}", esc(&e.data_category)),
        format!("purpose={}", esc(&e.purpose)),
        format!("access_kind={}", e.access_kind.as_str()),
        format!("policy_flag={}", e.policy_flag.as_str()),
    ];
    lines.join("\n").into_bytes()
}

/// Chain hashes for `entries` in order, starting from the 32 zero-byte genesis.
pub fn chain_hashes(entries: &[UsageLogEntry]) -> Vec<String> {
    let mut prev = [0u8; 32];
    entries
        .iter()
        .map(|e| {
            let mut input = prev.to_vec();
            input.extend_from_slice(&encode(e));
            prev = sha256::digest(&input);
            sha256::hex(&prev)
        })
        .collect()
}

/// Filter, sort and slice. Returns the page and the unpaginated match count.
pub fn query(all: &[UsageLogEntry], q: &LogQuery) -> (Vec<UsageLogEntry>, u64) {
    let mut hits: Vec<&UsageLogEntry> = Vec::new();
    for e in all {
        if e.owner != q.owner {
            continue;
        }
        if let Some(from) = q.from {
            if e.occurred_at.unix() < from.unix() {
                continue;
            }
        }
        if let Some(to) = q.to {
            if e.occurred_at.unix() >= to.unix() {
                continue;
            }
        }
        if q.consumer.as_deref().is_some_and(|c| c != e.consumer) {
            continue;
        }
        if q.tool.as_deref().is_some_and(|t| t != e.tool) {
            continue;
        }
        if q.data_category
            .as_deref()
            .is_some_and(|c| c != e.data_category)
        {
            continue;
        }
        hits.push(e);
    }
    hits.sort_by_key(|e| (e.occurred_at.unix(), e.seq));
    if q.order == LogOrder::OccurredAtDesc {
        hits.reverse();
    }
    let total = hits.len() as u64;
    let start = ((q.page as usize - 1) * q.per_page as usize).min(hits.len());
    let end = (start + q.per_page as usize).min(hits.len());
    (
        hits[start..end].iter().map(|e| (*e).clone()).collect(),
        total,
    )
}

/// Proleptic Gregorian date of a day count since 1970-01-01.
pub fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let y = yoe + era * 400 + i64::from(m <= 2);
    (y, m, d)
}

pub fn summary(all: &[UsageLogEntry], owner: &str, now: Timestamp, days: u32) -> UsageSummary {
    let end = now.unix();
    let start = end - i64::from(days) * 86_400;
    summary_range(all, owner, start, end)
}

pub fn summary_range(all: &[UsageLogEntry], owner: &str, start: i64, end: i64) -> UsageSummary {
    let mut by_consumer = BTreeMap::new();
    let mut by_tool = BTreeMap::new();
    let mut per_day: BTreeMap<i64, u64> = BTreeMap::new();
    let mut total = 0;
    for e in all {
        let t = e.occurred_at.unix();
        if e.owner == owner && start <= t && t < end {
            total += 1;
            *by_consumer.entry(e.consumer.clone()).or_insert(0) += 1;
            *by_tool.entry(e.tool.clone()).or_insert(0) += 1;
            *per_day.entry(t.div_euclid(86_400)).or_insert(0) += 1;
        }
    }
    let by_day = (start.div_euclid(86_400)..=(end - 1).div_euclid(86_400))
        .map(|d| {
            let (y, m, dd) = civil_from_days(d);
            DayCount {
                day: format!("{y:04}-{m:02}-{dd:02}"),
                count: per_day.get(&d).copied().unwrap_or(0),
            }
        })
        .collect();
    UsageSummary {
        owner: owner.to_owned(),
        window_start: Timestamp::from_unix(start).unwrap(),
        window_end: Timestamp::from_unix(end).unwrap(),
        total,
        by_consumer,
        by_tool,
        by_day,
    }
}

/// Exhaustive policy decision: collect every matching rule, then apply deny
/// dominance and the specificity/recency tie-break. `rules` must be in
/// creation order.
pub fn decide(
    rules: &[UsagePolicy],
    owner: &str,
    consumer: &str,
    category: &str,
) -> PolicyDecision {
    let matching: Vec<(usize, &UsagePolicy)> = rules
        .iter()
        .enumerate()
        .filter(|(_, r)| r.owner == owner)
        .filter(|(_, r)| r.subject == "*" || r.subject == consumer)
        .filter(|(_, r)| r.data_category == "*" || r.data_category == category)
        .collect();
    for (effect, reason) in [
        (Effect::Deny, DecisionReason::ExplicitDeny),
        (Effect::Allow, DecisionReason::ExplicitAllow),
    ] {
        let mut best: Option<(usize, &UsagePolicy)> = None;
        for &(i, r) in matching.iter().filter(|(_, r)| r.effect == effect) {
            let wild = |s: &str| if s == "*" { 0 } else { 1 };
            let key = (
                wild(&r.subject) + wild(&r.data_category),
                r.created_at.unix(),
                i,
            );
            let better = match best {
                None => true,
                Some((j, b)) => {
                    key > (
                        wild(&b.subject) + wild(&b.data_category),
                        b.created_at.unix(),
                        j,
                    )
                }
            };
            if better {
                best = Some((i, r));
            }
        }
        if let Some((_, r)) = best {
            return PolicyDecision {
                effect,
                matched_policy_id: Some(r.policy_id.clone()),
                reason,
            };
        }
    }
    PolicyDecision {
        effect: Effect::Allow,
        matched_policy_id: None,
        reason: DecisionReason::DefaultAllow,
    }
}
