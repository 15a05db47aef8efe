//! User registry, identifier attribution and tracked session tokens.
//!
//! Tokens are stateless HS256 JWTs, but every issued `jti` is recorded as a
//! session. A token verifies only while its session is live, which is what
//! makes logout and refresh rotation effective.

mod password;
mod secrets;
mod token;

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uuid::Uuid;

pub use password::{CredentialHasher, HashError, KdfParams, MIN_PASSWORD_LEN};
pub use secrets::{
    load_or_create_signing_key, FileEnvSecrets, MemorySecrets, SecretError, SecretProvider,
    SIGNING_KEY,
};
pub use token::{Claims, TokenError, TokenSigner};

use crate::model::{normalize_identifier, SessionToken, TokenKind, UserRecord, WILDCARD};
use crate::storage::{IdentityBackend, SessionRow, StoreError, UserChanges};
use crate::time::{Clock, Timestamp};

pub const DEFAULT_ACCESS_TTL_SECS: i64 = 30 * 60;
pub const DEFAULT_REFRESH_TTL_SECS: i64 = 7 * 24 * 60 * 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityConfig {
    pub access_ttl_secs: i64,
    pub refresh_ttl_secs: i64,
    pub kdf: KdfParams,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self {
            access_ttl_secs: DEFAULT_ACCESS_TTL_SECS,
            refresh_ttl_secs: DEFAULT_REFRESH_TTL_SECS,
            kdf: KdfParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuedToken {
    pub token: String,
    #[serde(flatten)]
    pub session: SessionToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenPair {
    pub access: IssuedToken,
    pub refresh: IssuedToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiedToken {
    pub token_id: String,
    pub principal: String,
    pub kind: TokenKind,
    pub expires_at: Timestamp,
}

#[derive(Debug, thiserror::Error)]
pub enum IdentityError {
    #[error(transparent)]
    Store(StoreError),
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error("not authorized for this operation")]
    NotAuthorized,
    #[error("identifier {0:?} is already registered")]
    DuplicateIdentifier(String),
    #[error("invalid identifier: {0}")]
    InvalidIdentifier(String),
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("password must be at least {MIN_PASSWORD_LEN} characters")]
    WeakPassword,
    #[error("invalid credentials")]
    AuthenticationFailed,
    #[error("current password is incorrect")]
    WrongPassword,
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error("user not found")]
    NotFound,
    #[error("operation would remove the last administrator")]
    LastAdmin,
}

impl From<StoreError> for IdentityError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::DuplicateIdentifier(id) => Self::DuplicateIdentifier(id),
            StoreError::NotFound => Self::NotFound,
            StoreError::LastAdmin => Self::LastAdmin,
            other => Self::Store(other),
        }
    }
}

pub struct NewUser {
    pub main_id: String,
    pub secondary_ids: BTreeSet<String>,
    pub password: String,
    pub is_admin: bool,
}

pub struct IdentityService {
    backend: Arc<dyn IdentityBackend>,
    signer: TokenSigner,
    hasher: CredentialHasher,
    clock: Arc<dyn Clock>,
    config: IdentityConfig,
    /// client id -> (stored hash that was verified, SHA-256 of the secret)
    monitor_cache: Mutex<HashMap<String, (String, [u8; 32])>>,
}

fn normalize_id(raw: &str) -> Result<String, IdentityError> {
    match normalize_identifier(raw) {
        Some(id) if id != WILDCARD => Ok(id),
        Some(_) => Err(IdentityError::InvalidIdentifier("\"*\" is reserved".into())),
        None => Err(IdentityError::InvalidIdentifier(
            "identifier must not be empty".into(),
        )),
    }
}

fn normalize_secondary(
    main_id: &str,
    raw: impl IntoIterator<Item = String>,
) -> Result<BTreeSet<String>, IdentityError> {
    let mut out = BTreeSet::new();
    for id in raw {
        let id = normalize_id(&id)?;
        if id == main_id {
            return Err(IdentityError::InvalidIdentifier(format!(
                "{id:?} is the main identifier and cannot also be secondary"
            )));
        }
        out.insert(id);
    }
    Ok(out)
}

fn check_strength(password: &str) -> Result<(), IdentityError> {
    if password.chars().count() < MIN_PASSWORD_LEN {
        return Err(IdentityError::WeakPassword);
    }
    Ok(())
}

impl IdentityService {
    pub fn new(
        backend: Arc<dyn IdentityBackend>,
        signer: TokenSigner,
        clock: Arc<dyn Clock>,
        config: IdentityConfig,
    ) -> Result<Self, IdentityError> {
        Ok(Self {
            backend,
            signer,
            hasher: CredentialHasher::new(config.kdf)?,
            clock,
            config,
            monitor_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &IdentityConfig {
        &self.config
    }

    /// Creates `main_id` as an administrator unless it already exists.
    /// Returns whether a user was created.
    pub fn bootstrap_admin(&self, main_id: &str, password: &str) -> Result<bool, IdentityError> {
        let main_id = normalize_id(main_id)?;
        if self.backend.user(&main_id)?.is_some() {
            return Ok(false);
        }
        let created = self.insert(NewUser {
            main_id: main_id.clone(),
            secondary_ids: BTreeSet::new(),
            password: password.to_owned(),
            is_admin: true,
        });
        match created {
            Ok(_) => Ok(true),
            // another process sharing the store got there first
            Err(IdentityError::DuplicateIdentifier(id))
                if id == main_id && self.backend.user(&main_id)?.is_some() =>
            {
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }

    fn insert(&self, new: NewUser) -> Result<UserRecord, IdentityError> {
        let main_id = normalize_id(&new.main_id)?;
        let secondary_ids = normalize_secondary(&main_id, new.secondary_ids)?;
        check_strength(&new.password)?;
        // cheap early rejection before paying for the hash; the insert re-checks
        for id in std::iter::once(&main_id).chain(&secondary_ids) {
            if self.backend.main_id_for(id)?.is_some() {
                return Err(IdentityError::DuplicateIdentifier(id.clone()));
            }
        }
        let now = self.clock.now();
        let user = UserRecord {
            main_id,
            secondary_ids,
            credential_hash: self.hasher.hash(&new.password)?,
            is_admin: new.is_admin,
            created_at: now,
            updated_at: now,
        };
        self.backend.insert_user(&user)?;
        Ok(user)
    }

    pub fn is_admin(&self, main_id: &str) -> Result<bool, IdentityError> {
        Ok(self.backend.user(main_id)?.is_some_and(|u| u.is_admin))
    }

    fn require_admin(&self, actor: &str) -> Result<(), IdentityError> {
        if self.is_admin(actor)? {
            Ok(())
        } else {
            Err(IdentityError::NotAuthorized)
        }
    }

    pub fn create_user(&self, actor: &str, new: NewUser) -> Result<UserRecord, IdentityError> {
        self.require_admin(actor)?;
        self.insert(new)
    }

    pub fn get_user(&self, actor: &str, main_id: &str) -> Result<UserRecord, IdentityError> {
        if actor != main_id {
            self.require_admin(actor)?;
        }
        self.backend.user(main_id)?.ok_or(IdentityError::NotFound)
    }

    pub fn list_users(&self, actor: &str) -> Result<Vec<UserRecord>, IdentityError> {
        self.require_admin(actor)?;
        Ok(self.backend.list_users()?)
    }

    /// Maps any registered identifier to its owner's main identifier.
    pub fn resolve_identifier(&self, any_id: &str) -> Result<String, IdentityError> {
        let id = normalize_identifier(any_id).ok_or_else(|| {
            IdentityError::InvalidIdentifier("identifier must not be empty".into())
        })?;
        self.backend
            .main_id_for(&id)?
            .ok_or(IdentityError::UnknownIdentifier(id))
    }

    /// Applies changes to a user. Administrators may change anything listed in
    /// [`UserChanges`]; users may only replace their own secondary identifiers.
    /// Passwords are deliberately not part of `UserChanges`.
    pub fn update_user(
        &self,
        actor: &str,
        target: &str,
        changes: UserChanges,
    ) -> Result<UserRecord, IdentityError> {
        let actor_is_admin = self.is_admin(actor)?;
        if !actor_is_admin && (actor != target || changes.is_admin.is_some()) {
            return Err(IdentityError::NotAuthorized);
        }
        let changes = UserChanges {
            secondary_ids: changes
                .secondary_ids
                .map(|ids| normalize_secondary(target, ids))
                .transpose()?,
            is_admin: changes.is_admin,
        };
        Ok(self
            .backend
            .update_user(target, &changes, self.clock.now())?)
    }

    pub fn change_password(
        &self,
        actor: &str,
        current_password: &str,
        new_password: &str,
    ) -> Result<(), IdentityError> {
        let user = self.backend.user(actor)?.ok_or(IdentityError::NotFound)?;
        check_strength(new_password)?;
        if !self.hasher.verify(current_password, &user.credential_hash) {
            return Err(IdentityError::WrongPassword);
        }
        let hash = self.hasher.hash(new_password)?;
        self.backend
            .set_credential(actor, &hash, self.clock.now())?;
        self.backend.revoke_principal(actor)?;
        Ok(())
    }

    /// Removes a user and their sessions. Their log entries stay untouched.
    pub fn delete_user(&self, actor: &str, target: &str) -> Result<(), IdentityError> {
        self.require_admin(actor)?;
        Ok(self.backend.delete_user(target)?)
    }

    /// Unknown identifiers and wrong passwords fail identically.
    pub fn login(&self, identifier: &str, password: &str) -> Result<TokenPair, IdentityError> {
        let user = match normalize_identifier(identifier) {
            Some(id) => match self.backend.main_id_for(&id)? {
                Some(main) => self.backend.user(&main)?,
                None => None,
            },
            None => None,
        };
        let Some(user) = user else {
            self.hasher.verify_decoy(password);
            return Err(IdentityError::AuthenticationFailed);
        };
        if !self.hasher.verify(password, &user.credential_hash) {
            return Err(IdentityError::AuthenticationFailed);
        }
        self.issue_pair(&user.main_id)
    }

    fn issue_pair(&self, principal: &str) -> Result<TokenPair, IdentityError> {
        let now = self.clock.now();
        let pair_id = Uuid::new_v4().to_string();
        let session = |kind, ttl| SessionToken {
            token_id: Uuid::new_v4().to_string(),
            principal: principal.to_owned(),
            issued_at: now,
            expires_at: now.plus_secs(ttl),
            kind,
            revoked: false,
        };
        let access = session(TokenKind::Access, self.config.access_ttl_secs.max(1));
        let refresh = session(TokenKind::Refresh, self.config.refresh_ttl_secs.max(1));
        self.backend.insert_sessions(&[
            SessionRow {
                token: access.clone(),
                pair_id: pair_id.clone(),
            },
            SessionRow {
                token: refresh.clone(),
                pair_id,
            },
        ])?;
        let sign = |s: SessionToken| IssuedToken {
            token: self.signer.sign(&Claims {
                sub: s.principal.clone(),
                jti: s.token_id.clone(),
                iat: s.issued_at.unix(),
                exp: s.expires_at.unix(),
                knd: s.kind,
            }),
            session: s,
        };
        Ok(TokenPair {
            access: sign(access),
            refresh: sign(refresh),
        })
    }

    fn check(&self, raw: &str) -> Result<(VerifiedToken, SessionRow), IdentityError> {
        let claims = self.signer.decode(raw)?;
        let Some(row) = self.backend.session(&claims.jti)? else {
            return Err(TokenError::Revoked.into());
        };
        if row.token.revoked || row.token.principal != claims.sub || row.token.kind != claims.knd {
            return Err(TokenError::Revoked.into());
        }
        if self.clock.now().unix() >= claims.exp {
            return Err(TokenError::Expired.into());
        }
        let verified = VerifiedToken {
            token_id: claims.jti,
            principal: claims.sub,
            kind: claims.knd,
            expires_at: row.token.expires_at,
        };
        Ok((verified, row))
    }

    /// Valid iff the signature checks, the session is live and not expired.
    pub fn verify_token(&self, raw: &str) -> Result<VerifiedToken, IdentityError> {
        self.check(raw).map(|(v, _)| v)
    }

    /// Ends the session of an access token together with its refresh token.
    pub fn logout(&self, raw_access: &str) -> Result<(), IdentityError> {
        let (verified, row) = self.check(raw_access)?;
        if verified.kind != TokenKind::Access {
            return Err(TokenError::WrongKind.into());
        }
        self.backend.revoke_pair(&row.pair_id)?;
        Ok(())
    }

    /// Rotates a refresh token: the old pair is revoked, a new one issued.
    pub fn refresh(&self, raw_refresh: &str) -> Result<TokenPair, IdentityError> {
        let (verified, row) = self.check(raw_refresh)?;
        if verified.kind != TokenKind::Refresh {
            return Err(TokenError::WrongKind.into());
        }
        // losing a concurrent rotation race looks like reuse
        if self.backend.revoke_pair(&row.pair_id)? == 0 {
            return Err(TokenError::Revoked.into());
        }
        self.issue_pair(&verified.principal)
    }

    pub fn set_monitor_credential(
        &self,
        client_id: &str,
        secret: &str,
    ) -> Result<(), IdentityError> {
        let client_id = normalize_id(client_id)?;
        check_strength(secret)?;
        let hash = self.hasher.hash(secret)?;
        self.backend
            .upsert_monitor(&client_id, &hash, self.clock.now())?;
        self.monitor_cache
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .remove(&client_id);
        Ok(())
    }

    /// Checks monitor basic-auth credentials. A successful Argon2 verification
    /// is remembered for as long as the stored hash stays the same.
    pub fn verify_monitor(&self, client_id: &str, secret: &str) -> Result<bool, IdentityError> {
        let Some(stored) = self.backend.monitor_secret_hash(client_id)? else {
            self.hasher.verify_decoy(secret);
            return Ok(false);
        };
        let digest: [u8; 32] = Sha256::digest(secret.as_bytes()).into();
        {
            let cache = self.monitor_cache.lock().unwrap_or_else(|p| p.into_inner());
            if let Some((hash, cached)) = cache.get(client_id) {
                if *hash == stored {
                    return Ok(constant_time_eq(cached, &digest));
                }
            }
        }
        if !self.hasher.verify(secret, &stored) {
            return Ok(false);
        }
        self.monitor_cache
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(client_id.to_owned(), (stored, digest));
        Ok(true)
    }

    pub fn health(&self) -> Result<(), IdentityError> {
        self.backend.admin_count()?;
        Ok(())
    }
}

fn constant_time_eq(a: &[u8; 32], b: &[u8; 32]) -> bool {
    a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::SqliteStore;
    use crate::time::ManualClock;

    const ADMIN_PW: &str = "admin-password";

    fn fast() -> IdentityConfig {
        IdentityConfig {
            kdf: KdfParams {
                memory_kib: 64,
                iterations: 1,
                parallelism: 1,
            },
            ..Default::default()
        }
    }

    fn service() -> (IdentityService, ManualClock) {
        let clock = ManualClock::new(Timestamp::from_unix(1_700_000_000).unwrap());
        let svc = IdentityService::new(
            Arc::new(SqliteStore::open_in_memory().unwrap()),
            TokenSigner::new(vec![42; 32]),
            Arc::new(clock.clone()),
            fast(),
        )
        .unwrap();
        assert!(svc.bootstrap_admin("root", ADMIN_PW).unwrap());
        (svc, clock)
    }

    fn new_user(main: &str, secondary: &[&str]) -> NewUser {
        NewUser {
            main_id: main.into(),
            secondary_ids: secondary.iter().map(|s| s.to_string()).collect(),
            password: "password-1".into(),
            is_admin: false,
        }
    }

    #[test]
    fn bootstrap_is_idempotent() {
        let (svc, _) = service();
        assert!(!svc.bootstrap_admin("root", "other-password").unwrap());
        assert!(svc.is_admin("root").unwrap());
    }

    #[test]
    fn create_and_resolve() {
        let (svc, _) = service();
        let user = svc
            .create_user("root", new_user("vz", &["vz@example.org"]))
            .unwrap();
        assert!(!user.is_admin);
        assert_eq!(svc.resolve_identifier("vz").unwrap(), "vz");
        assert_eq!(svc.resolve_identifier(" vz@example.org ").unwrap(), "vz");
        assert!(matches!(
            svc.resolve_identifier("nobody"),
            Err(IdentityError::UnknownIdentifier(_))
        ));
    }

    #[test]
    fn create_rejections() {
        let (svc, _) = service();
        svc.create_user("root", new_user("vz", &["vz@example.org"]))
            .unwrap();
        let dup = svc.create_user("root", new_user("other", &["vz@example.org"]));
        assert!(
            matches!(dup, Err(IdentityError::DuplicateIdentifier(id)) if id == "vz@example.org")
        );
        assert!(matches!(
            svc.create_user("vz", new_user("x", &[])),
            Err(IdentityError::NotAuthorized)
        ));
        let mut weak = new_user("w", &[]);
        weak.password = "short".into();
        assert!(matches!(
            svc.create_user("root", weak),
            Err(IdentityError::WeakPassword)
        ));
        assert!(matches!(
            svc.create_user("root", new_user("self", &["self"])),
            Err(IdentityError::InvalidIdentifier(_))
        ));
        assert!(matches!(
            svc.create_user("root", new_user("*", &[])),
            Err(IdentityError::InvalidIdentifier(_))
        ));
    }

    #[test]
    fn login_failures_are_indistinguishable() {
        let (svc, _) = service();
        let unknown = svc.login("ghost", ADMIN_PW).unwrap_err().to_string();
        let wrong = svc
            .login("root", "not the password")
            .unwrap_err()
            .to_string();
        assert_eq!(unknown, wrong);
    }

    #[test]
    fn login_via_secondary_yields_main_principal() {
        let (svc, _) = service();
        svc.create_user("root", new_user("vz", &["vz@example.org"]))
            .unwrap();
        let pair = svc.login("vz@example.org", "password-1").unwrap();
        let v = svc.verify_token(&pair.access.token).unwrap();
        assert_eq!(v.principal, "vz");
        assert_eq!(v.kind, TokenKind::Access);
        assert_ne!(pair.access.session.token_id, pair.refresh.session.token_id);
        assert_eq!(
            pair.access.session.expires_at.unix() - pair.access.session.issued_at.unix(),
            DEFAULT_ACCESS_TTL_SECS
        );
    }

    #[test]
    fn logout_revokes_pair() {
        let (svc, _) = service();
        let pair = svc.login("root", ADMIN_PW).unwrap();
        svc.logout(&pair.access.token).unwrap();
        assert!(matches!(
            svc.verify_token(&pair.access.token),
            Err(IdentityError::Token(TokenError::Revoked))
        ));
        assert!(matches!(
            svc.refresh(&pair.refresh.token),
            Err(IdentityError::Token(TokenError::Revoked))
        ));
        assert!(svc.logout(&pair.access.token).is_err());
    }

    #[test]
    fn refresh_rotates() {
        let (svc, _) = service();
        let old = svc.login("root", ADMIN_PW).unwrap();
        assert!(matches!(
            svc.refresh(&old.access.token),
            Err(IdentityError::Token(TokenError::WrongKind))
        ));
        let new = svc.refresh(&old.refresh.token).unwrap();
        assert!(svc.verify_token(&new.access.token).is_ok());
        assert!(svc.verify_token(&old.access.token).is_err());
        assert!(matches!(
            svc.refresh(&old.refresh.token),
            Err(IdentityError::Token(TokenError::Revoked))
        ));
    }

    #[test]
    fn expiry_follows_clock() {
        let (svc, clock) = service();
        let pair = svc.login("root", ADMIN_PW).unwrap();
        clock.advance(DEFAULT_ACCESS_TTL_SECS - 1);
        assert!(svc.verify_token(&pair.access.token).is_ok());
        clock.advance(1);
        assert!(matches!(
            svc.verify_token(&pair.access.token),
            Err(IdentityError::Token(TokenError::Expired))
        ));
        assert!(svc.verify_token(&pair.refresh.token).is_ok());
    }

    #[test]
    fn password_change_revokes_sessions() {
        let (svc, _) = service();
        svc.create_user("root", new_user("vz", &[])).unwrap();
        let pair = svc.login("vz", "password-1").unwrap();
        assert!(matches!(
            svc.change_password("vz", "wrong-one", "password-2"),
            Err(IdentityError::WrongPassword)
        ));
        assert!(svc.verify_token(&pair.access.token).is_ok());
        svc.change_password("vz", "password-1", "password-2")
            .unwrap();
        assert!(svc.verify_token(&pair.access.token).is_err());
        assert!(svc.verify_token(&pair.refresh.token).is_err());
        assert!(svc.login("vz", "password-1").is_err());
        assert!(svc.login("vz", "password-2").is_ok());
    }

    #[test]
    fn update_permissions() {
        let (svc, _) = service();
        svc.create_user("root", new_user("a", &[])).unwrap();
        svc.create_user("root", new_user("b", &[])).unwrap();
        let add = UserChanges {
            secondary_ids: Some(BTreeSet::from(["a@x".to_owned()])),
            is_admin: None,
        };
        svc.update_user("a", "a", add.clone()).unwrap();
        assert_eq!(svc.resolve_identifier("a@x").unwrap(), "a");
        assert!(matches!(
            svc.update_user("b", "a", add),
            Err(IdentityError::NotAuthorized)
        ));
        let promote = UserChanges {
            is_admin: Some(true),
            ..Default::default()
        };
        assert!(matches!(
            svc.update_user("a", "a", promote.clone()),
            Err(IdentityError::NotAuthorized)
        ));
        assert!(svc.update_user("root", "a", promote).unwrap().is_admin);
    }

    #[test]
    fn delete_user_semantics() {
        let (svc, _) = service();
        svc.create_user("root", new_user("vz", &["vz@x"])).unwrap();
        let pair = svc.login("vz", "password-1").unwrap();
        svc.delete_user("root", "vz").unwrap();
        assert!(svc.resolve_identifier("vz").is_err());
        assert!(svc.resolve_identifier("vz@x").is_err());
        assert!(svc.verify_token(&pair.access.token).is_err());
        assert!(matches!(
            svc.delete_user("root", "vz"),
            Err(IdentityError::NotFound)
        ));
        assert!(matches!(
            svc.delete_user("root", "root"),
            Err(IdentityError::LastAdmin)
        ));
    }

    #[test]
    fn monitor_credentials() {
        let (svc, _) = service();
        svc.set_monitor_credential("git-monitor", "monitor-secret")
            .unwrap();
        assert!(svc.verify_monitor("git-monitor", "monitor-secret").unwrap());
        // cached path
        assert!(svc.verify_monitor("git-monitor", "monitor-secret").unwrap());
        assert!(!svc.verify_monitor("git-monitor", "wrong-secret").unwrap());
        assert!(!svc.verify_monitor("unknown", "monitor-secret").unwrap());
        svc.set_monitor_credential("git-monitor", "rotated-secret")
            .unwrap();
        assert!(!svc.verify_monitor("git-monitor", "monitor-secret").unwrap());
        assert!(svc.verify_monitor("git-monitor", "rotated-secret").unwrap());
    }
}
