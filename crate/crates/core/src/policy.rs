//! Owner-authored usage policies.
//!
//! Evaluation is default-allow with deny-override: a matching deny always wins,
//! otherwise a matching allow, otherwise the default. Among matching rules of
//! the winning effect the most specific one is reported (fewest wildcards),
//! then the newest.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::model::{normalize_identifier, Effect, UsagePolicy, WILDCARD};
use crate::storage::{DeleteOutcome, PolicyBackend, StoreError};
use crate::time::Clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionReason {
    ExplicitDeny,
    ExplicitAllow,
    DefaultAllow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub effect: Effect,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matched_policy_id: Option<String>,
    pub reason: DecisionReason,
}

impl PolicyDecision {
    pub const DEFAULT_ALLOW: PolicyDecision = PolicyDecision {
        effect: Effect::Allow,
        matched_policy_id: None,
        reason: DecisionReason::DefaultAllow,
    };
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{field} must not be empty")]
    Empty { field: &'static str },
    #[error("owner must be a concrete identifier, not a wildcard")]
    WildcardOwner,
    #[error("policy not found")]
    NotFound,
    #[error("policy belongs to another owner")]
    NotOwner,
}

/// Decides over an already-loaded rule set. `rules` may include rules of other
/// owners; only `owner`'s are considered.
pub fn decide(
    rules: &[UsagePolicy],
    owner: &str,
    consumer: &str,
    data_category: &str,
) -> PolicyDecision {
    let best = |effect: Effect| {
        rules
            .iter()
            .enumerate()
            .filter(|(_, r)| {
                r.owner == owner && r.effect == effect && r.matches(consumer, data_category)
            })
            // later position breaks created_at ties: rules arrive in creation order
            .max_by_key(|(i, r)| (r.specificity(), r.created_at, *i))
            .map(|(_, r)| r.policy_id.clone())
    };
    if let Some(id) = best(Effect::Deny) {
        PolicyDecision {
            effect: Effect::Deny,
            matched_policy_id: Some(id),
            reason: DecisionReason::ExplicitDeny,
        }
    } else if let Some(id) = best(Effect::Allow) {
        PolicyDecision {
            effect: Effect::Allow,
            matched_policy_id: Some(id),
            reason: DecisionReason::ExplicitAllow,
        }
    } else {
        PolicyDecision::DEFAULT_ALLOW
    }
}

pub struct PolicyEngine {
    backend: Arc<dyn PolicyBackend>,
    clock: Arc<dyn Clock>,
}

impl PolicyEngine {
    pub fn new(backend: Arc<dyn PolicyBackend>, clock: Arc<dyn Clock>) -> Self {
        Self { backend, clock }
    }

    pub fn set_policy(
        &self,
        owner: &str,
        subject: &str,
        data_category: &str,
        effect: Effect,
    ) -> Result<UsagePolicy, PolicyError> {
        let owner = normalize_identifier(owner).ok_or(PolicyError::Empty { field: "owner" })?;
        if owner == WILDCARD {
            return Err(PolicyError::WildcardOwner);
        }
        let subject =
            normalize_identifier(subject).ok_or(PolicyError::Empty { field: "subject" })?;
        let data_category = normalize_identifier(data_category).ok_or(PolicyError::Empty {
            field: "data_category",
        })?;
        let policy = UsagePolicy {
            policy_id: Uuid::new_v4().to_string(),
            owner,
            subject,
            data_category,
            effect,
            created_at: self.clock.now(),
        };
        Ok(self.backend.upsert_policy(&policy)?)
    }

    pub fn list_policies(&self, owner: &str) -> Result<Vec<UsagePolicy>, PolicyError> {
        Ok(self.backend.policies_for(owner)?)
    }

    pub fn delete_policy(&self, owner: &str, policy_id: &str) -> Result<(), PolicyError> {
        match self.backend.delete_policy(owner, policy_id)? {
            DeleteOutcome::Deleted => Ok(()),
            DeleteOutcome::NotFound => Err(PolicyError::NotFound),
            DeleteOutcome::WrongOwner => Err(PolicyError::NotOwner),
        }
    }

    pub fn evaluate(
        &self,
        owner: &str,
        consumer: &str,
        data_category: &str,
    ) -> Result<PolicyDecision, PolicyError> {
        let rules = self.backend.policies_for(owner)?;
        Ok(decide(&rules, owner, consumer, data_category))
    }
}
