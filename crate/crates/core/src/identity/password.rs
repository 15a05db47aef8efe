//! Salted Argon2id credential hashing.

use argon2::password_hash::{PasswordHasher, PasswordVerifier};
use argon2::{Algorithm, Argon2, Params, Version};

pub const MIN_PASSWORD_LEN: usize = 8;

/// Argon2id cost parameters. The default is 64 MiB, 3 passes, 2 lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KdfParams {
    pub memory_kib: u32,
    pub iterations: u32,
    pub parallelism: u32,
}

impl Default for KdfParams {
    fn default() -> Self {
        Self {
            memory_kib: 64 * 1024,
            iterations: 3,
            parallelism: 2,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("password hashing failed: {0}")]
pub struct HashError(String);

pub struct CredentialHasher {
    argon: Argon2<'static>,
    /// Verified against when the identifier is unknown, so that unknown users
    /// cost the same time as wrong passwords.
    decoy: String,
}

impl CredentialHasher {
    pub fn new(params: KdfParams) -> Result<Self, HashError> {
        let params = Params::new(
            params.memory_kib,
            params.iterations,
            params.parallelism,
            None,
        )
        .map_err(|e| HashError(e.to_string()))?;
        let argon = Argon2::new(Algorithm::Argon2id, Version::V0x13, params);
        let decoy = argon
            .hash_password(b"decoy password never used")
            .map_err(|e| HashError(e.to_string()))?
            .to_string();
        Ok(Self { argon, decoy })
    }

    /// PHC-encoded hash with a fresh random salt and the parameters inline.
    pub fn hash(&self, password: &str) -> Result<String, HashError> {
        self.argon
            .hash_password(password.as_bytes())
            .map(|h| h.to_string())
            .map_err(|e| HashError(e.to_string()))
    }

    /// Verifies using the parameters recorded in `encoded`.
    pub fn verify(&self, password: &str, encoded: &str) -> bool {
        self.argon
            .verify_password(password.as_bytes(), encoded)
            .is_ok()
    }

    /// Burns one verification's worth of work; always false.
    pub fn verify_decoy(&self, password: &str) -> bool {
        let _ = self.verify(password, &self.decoy);
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cheap() -> CredentialHasher {
        CredentialHasher::new(KdfParams {
            memory_kib: 64,
            iterations: 1,
            parallelism: 1,
        })
        .unwrap()
    }

    #[test]
    fn round_trip_and_salted() {
        let h = cheap();
        let a = h.hash("correct horse").unwrap();
        let b = h.hash("correct horse").unwrap();
        assert_ne!(a, b, "salt must differ");
        assert!(h.verify("correct horse", &a));
        assert!(!h.verify("wrong horse", &a));
        assert!(!h.verify("correct horse", "not a hash"));
    }

    #[test]
    fn default_params_are_encoded() {
        let h = CredentialHasher::new(KdfParams::default()).unwrap();
        let encoded = h.hash("long enough").unwrap();
        assert!(
            encoded.starts_with("$argon2id$v=19$m=65536,t=3,p=2$"),
            "{encoded}"
        );
        assert!(h.verify("long enough", &encoded));
    }

    #[test]
    fn verify_honours_params_in_hash() {
        let strong = cheap().hash("password1").unwrap();
        let other = CredentialHasher::new(KdfParams {
            memory_kib: 128,
            iterations: 2,
            parallelism: 1,
        })
        .unwrap();
        assert!(other.verify("password1", &strong));
    }
}
