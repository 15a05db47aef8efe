//! Named secret storage.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::RngCore;

#[derive(Debug, thiserror::Error)]
pub enum SecretError {
    #[error("secret {name:?}: {source}")]
    Io {
        name: String,
        #[source]
        source: std::io::Error,
    },
    #[error("secret {0:?} has no backing location")]
    Unmapped(String),
    #[error("secret {name:?} is invalid: {reason}")]
    Invalid { name: String, reason: String },
}

pub trait SecretProvider: Send + Sync {
    fn get(&self, name: &str) -> Result<Option<Vec<u8>>, SecretError>;
    fn put(&self, name: &str, value: &[u8]) -> Result<(), SecretError>;

    /// Stores `value` unless `name` already has one, and returns whichever value
    /// is stored afterwards.
    fn put_if_absent(&self, name: &str, value: &[u8]) -> Result<Vec<u8>, SecretError> {
        if let Some(existing) = self.get(name)? {
            return Ok(existing);
        }
        self.put(name, value)?;
        Ok(value.to_vec())
    }
}

/// Secrets from environment variables, falling back to files.
///
/// `name` is looked up as the variable `ITT_SECRET_<NAME>` (upper case, `-`
/// turned into `_`, value hex-encoded) and otherwise read from the file mapped
/// to that name. Writes always go to the file.
#[derive(Debug, Default)]
pub struct FileEnvSecrets {
    files: HashMap<String, PathBuf>,
}

impl FileEnvSecrets {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_file(mut self, name: &str, path: impl Into<PathBuf>) -> Self {
        self.files.insert(name.to_owned(), path.into());
        self
    }

    pub fn env_var(name: &str) -> String {
        format!("ITT_SECRET_{}", name.to_ascii_uppercase().replace('-', "_"))
    }
}

impl SecretProvider for FileEnvSecrets {
    fn get(&self, name: &str) -> Result<Option<Vec<u8>>, SecretError> {
        if let Ok(hexed) = std::env::var(Self::env_var(name)) {
            return hex::decode(hexed.trim())
                .map(Some)
                .map_err(|e| SecretError::Invalid {
                    name: name.to_owned(),
                    reason: e.to_string(),
                });
        }
        let Some(path) = self.files.get(name) else {
            return Ok(None);
        };
        match std::fs::read(path) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(SecretError::Io {
                name: name.to_owned(),
                source,
            }),
        }
    }

    fn put(&self, name: &str, value: &[u8]) -> Result<(), SecretError> {
        let path = self
            .files
            .get(name)
            .ok_or_else(|| SecretError::Unmapped(name.to_owned()))?;
        write_private(path, value).map_err(|source| SecretError::Io {
            name: name.to_owned(),
            source,
        })
    }

    /// Atomic across processes: the value is written to a private temporary
    /// file and hard-linked into place, which fails if the target exists.
    fn put_if_absent(&self, name: &str, value: &[u8]) -> Result<Vec<u8>, SecretError> {
        if let Some(existing) = self.get(name)? {
            return Ok(existing);
        }
        let path = self
            .files
            .get(name)
            .ok_or_else(|| SecretError::Unmapped(name.to_owned()))?;
        let io = |source| SecretError::Io {
            name: name.to_owned(),
            source,
        };
        let mut tmp = path.clone().into_os_string();
        tmp.push(format!(".{:016x}.tmp", rand::random::<u64>()));
        let tmp = PathBuf::from(tmp);
        write_private(&tmp, value).map_err(io)?;
        let linked = std::fs::hard_link(&tmp, path);
        let _ = std::fs::remove_file(&tmp);
        match linked {
            Ok(()) => Ok(value.to_vec()),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                std::fs::read(path).map_err(io)
            }
            Err(e) => Err(io(e)),
        }
    }
}

fn write_private(path: &Path, value: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut opts = std::fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut file = opts.open(path)?;
    file.write_all(value)?;
    file.sync_all()
}

/// Process-local secrets, for tests and ephemeral deployments.
#[derive(Debug, Default)]
pub struct MemorySecrets(Mutex<HashMap<String, Vec<u8>>>);

impl SecretProvider for MemorySecrets {
    fn get(&self, name: &str) -> Result<Option<Vec<u8>>, SecretError> {
        Ok(self
            .0
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .get(name)
            .cloned())
    }

    fn put(&self, name: &str, value: &[u8]) -> Result<(), SecretError> {
        self.0
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(name.to_owned(), value.to_vec());
        Ok(())
    }
}

pub const SIGNING_KEY: &str = "signing-key";

/// Loads the token signing key, generating and storing a random 32-byte key on
/// first use.
pub fn load_or_create_signing_key(provider: &dyn SecretProvider) -> Result<Vec<u8>, SecretError> {
    if let Some(key) = provider.get(SIGNING_KEY)? {
        if key.len() < 32 {
            return Err(SecretError::Invalid {
                name: SIGNING_KEY.into(),
                reason: format!("need at least 32 bytes, found {}", key.len()),
            });
        }
        return Ok(key);
    }
    let mut key = vec![0u8; 32];
    rand::rng().fill_bytes(&mut key);
    provider.put_if_absent(SIGNING_KEY, &key)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generates_once_then_reuses() {
        let dir = tempfile::tempdir().unwrap();
        let provider =
            FileEnvSecrets::new().with_file(SIGNING_KEY, dir.path().join("k/signing.key"));
        let a = load_or_create_signing_key(&provider).unwrap();
        let b = load_or_create_signing_key(&provider).unwrap();
        assert_eq!(a.len(), 32);
        assert_eq!(a, b);
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            let mode = std::fs::metadata(dir.path().join("k/signing.key"))
                .unwrap()
                .permissions()
                .mode();
            assert_eq!(mode & 0o777, 0o600);
        }
    }

    #[test]
    fn concurrent_creators_agree() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("signing.key");
        let keys: Vec<Vec<u8>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..8)
                .map(|_| {
                    let path = path.clone();
                    s.spawn(move || {
                        let provider = FileEnvSecrets::new().with_file(SIGNING_KEY, path);
                        load_or_create_signing_key(&provider).unwrap()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(keys.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(std::fs::read(&path).unwrap(), keys[0]);
    }

    #[test]
    fn short_key_rejected() {
        let provider = MemorySecrets::default();
        provider.put(SIGNING_KEY, b"short").unwrap();
        assert!(matches!(
            load_or_create_signing_key(&provider),
            Err(SecretError::Invalid { .. })
        ));
    }

    #[test]
    fn unmapped_put_fails() {
        assert!(matches!(
            FileEnvSecrets::new().put("x", b"y"),
            Err(SecretError::Unmapped(_))
        ));
    }

    #[test]
    fn env_var_name() {
        assert_eq!(
            FileEnvSecrets::env_var("signing-key"),
            "ITT_SECRET_SIGNING_KEY"
        );
    }
}
