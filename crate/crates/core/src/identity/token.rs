//! Compact JWS (HS256) session tokens.
//!
//! The signature is checked over the exact ASCII of `header.payload` before
//! either segment is decoded, so any modification of those bytes is reported
//! as a bad signature rather than as a parse failure.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use hmac::{Hmac, KeyInit, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::model::TokenKind;
use crate::time::Timestamp;

type HmacSha256 = Hmac<Sha256>;

const HEADER: &str = r#"{"alg":"HS256","typ":"JWT"}"#;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    pub sub: String,
    pub jti: String,
    pub iat: i64,
    pub exp: i64,
    pub knd: TokenKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TokenError {
    #[error("malformed token")]
    Malformed,
    #[error("token signature does not verify")]
    BadSignature,
    #[error("token has expired")]
    Expired,
    #[error("token has been revoked")]
    Revoked,
    #[error("wrong token kind")]
    WrongKind,
}

#[derive(Debug, Deserialize)]
struct Header {
    alg: String,
}

pub struct TokenSigner {
    key: Vec<u8>,
}

impl std::fmt::Debug for TokenSigner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("TokenSigner(<key>)")
    }
}

impl TokenSigner {
    pub const MIN_KEY_LEN: usize = 32;

    pub fn new(key: impl Into<Vec<u8>>) -> Self {
        Self { key: key.into() }
    }

    fn mac(&self) -> HmacSha256 {
        HmacSha256::new_from_slice(&self.key).expect("HMAC accepts any key length")
    }

    pub fn sign(&self, claims: &Claims) -> String {
        let payload = serde_json::to_vec(claims).expect("claims serialize");
        let mut token = format!(
            "{}.{}",
            URL_SAFE_NO_PAD.encode(HEADER),
            URL_SAFE_NO_PAD.encode(payload)
        );
        let mut mac = self.mac();
        mac.update(token.as_bytes());
        let sig = mac.finalize().into_bytes();
        token.push('.');
        token.push_str(&URL_SAFE_NO_PAD.encode(sig));
        token
    }

    /// Checks structure and signature and decodes the claims. Expiry and
    /// revocation are the caller's concern.
    pub fn decode(&self, raw: &str) -> Result<Claims, TokenError> {
        let raw = raw.trim();
        let mut parts = raw.split('.');
        let (Some(header), Some(payload), Some(sig), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(TokenError::Malformed);
        };
        if header.is_empty() || payload.is_empty() {
            return Err(TokenError::Malformed);
        }
        let sig = URL_SAFE_NO_PAD
            .decode(sig)
            .map_err(|_| TokenError::Malformed)?;
        let mut mac = self.mac();
        mac.update(&raw.as_bytes()[..header.len() + 1 + payload.len()]);
        mac.verify_slice(&sig)
            .map_err(|_| TokenError::BadSignature)?;

        let header: Header = URL_SAFE_NO_PAD
            .decode(header)
            .ok()
            .and_then(|h| serde_json::from_slice(&h).ok())
            .ok_or(TokenError::Malformed)?;
        if header.alg != "HS256" {
            return Err(TokenError::Malformed);
        }
        URL_SAFE_NO_PAD
            .decode(payload)
            .ok()
            .and_then(|p| serde_json::from_slice(&p).ok())
            .ok_or(TokenError::Malformed)
    }
}

impl Claims {
    pub fn expires_at(&self) -> Timestamp {
        Timestamp::from_unix(self.exp).unwrap_or_else(|| Timestamp::from_unix(0).expect("epoch"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn claims() -> Claims {
        Claims {
            sub: "vz".into(),
            jti: "id-1".into(),
            iat: 1_700_000_000,
            exp: 1_700_001_800,
            knd: TokenKind::Access,
        }
    }

    #[test]
    fn round_trip() {
        let s = TokenSigner::new(vec![7; 32]);
        let t = s.sign(&claims());
        assert_eq!(t.split('.').count(), 3);
        assert_eq!(s.decode(&t).unwrap(), claims());
    }

    #[test]
    fn other_key_rejected() {
        let t = TokenSigner::new(vec![7; 32]).sign(&claims());
        assert_eq!(
            TokenSigner::new(vec![8; 32]).decode(&t),
            Err(TokenError::BadSignature)
        );
    }

    #[test]
    fn structural_garbage_is_malformed() {
        let s = TokenSigner::new(vec![7; 32]);
        for bad in ["", "a.b", "a.b.c.d", "..", "a.b.!!!"] {
            assert_eq!(s.decode(bad), Err(TokenError::Malformed), "{bad}");
        }
    }

    #[test]
    fn every_payload_position_is_covered() {
        let s = TokenSigner::new(vec![7; 32]);
        let t = s.sign(&claims());
        let start = t.find('.').unwrap() + 1;
        let end = t.rfind('.').unwrap();
        for pos in start..end {
            let mut bytes = t.clone().into_bytes();
            bytes[pos] = if bytes[pos] == b'A' { b'B' } else { b'A' };
            let tampered = String::from_utf8(bytes).unwrap();
            assert_eq!(
                s.decode(&tampered),
                Err(TokenError::BadSignature),
                "pos {pos}"
            );
        }
    }

    #[test]
    fn alg_none_is_not_accepted() {
        let s = TokenSigner::new(vec![7; 32]);
        let header = URL_SAFE_NO_PAD.encode(r#"{"alg":"none"}"#);
        let payload = URL_SAFE_NO_PAD.encode(serde_json::to_vec(&claims()).unwrap());
        assert_eq!(
            s.decode(&format!("{header}.{payload}.")),
            Err(TokenError::BadSignature)
        );
    }
}
