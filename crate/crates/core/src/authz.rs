//! Per-content edit tokens.
//!
//! The clear token is handed out once; the server keeps only a salted
//! SHA-256 digest and compares digests in constant time.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;

use crate::clock::Timestamp;
use crate::store::{BoundContent, ContentId, Store, StoreError};

pub const SALT_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenStatus {
    Active,
    Revoked,
}

/// Server-side token record. Never contains the clear token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditToken {
    /// Hex-encoded salted digest.
    pub token_hash: String,
    pub status: TokenStatus,
    pub issued_at: Timestamp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenCheck {
    Authorized,
    Revoked,
    Invalid,
}

#[derive(Clone)]
pub struct TokenAuthority {
    salt: [u8; SALT_LEN],
}

impl std::fmt::Debug for TokenAuthority {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("TokenAuthority { .. }")
    }
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn from_hex(s: &str) -> Option<Vec<u8>> {
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}

impl TokenAuthority {
    pub fn new(salt: [u8; SALT_LEN]) -> Self {
        TokenAuthority { salt }
    }

    pub fn hash(&self, presented: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.salt);
        h.update(presented.as_bytes());
        h.finalize().into()
    }

    /// Fresh 128-bit token from the OS RNG, plus its stored record.
    pub fn generate(&self, now: Timestamp) -> (String, EditToken) {
        let mut raw = [0u8; 16];
        OsRng.fill_bytes(&mut raw);
        let clear = URL_SAFE_NO_PAD.encode(raw);
        let record = EditToken {
            token_hash: to_hex(&self.hash(&clear)),
            status: TokenStatus::Active,
            issued_at: now,
        };
        (clear, record)
    }

    /// Compares against the stored digest without early exit.
    pub fn check(&self, content: &BoundContent, presented: &str) -> TokenCheck {
        let Some(stored) = &content.token else {
            return TokenCheck::Invalid;
        };
        let Some(expected) = from_hex(&stored.token_hash) else {
            return TokenCheck::Invalid;
        };
        let matches: bool = self.hash(presented).ct_eq(expected.as_slice()).into();
        match (matches, stored.status) {
            (true, TokenStatus::Active) => TokenCheck::Authorized,
            (true, TokenStatus::Revoked) => TokenCheck::Revoked,
            (false, _) => TokenCheck::Invalid,
        }
    }

    /// Marks the token revoked. Returns true if this call changed it.
    pub fn revoke_in(content: &mut BoundContent) -> bool {
        match &mut content.token {
            Some(t) if t.status == TokenStatus::Active => {
                t.status = TokenStatus::Revoked;
                true
            }
            _ => false,
        }
    }

    pub fn issue_token(
        &self,
        store: &Store,
        content_id: &ContentId,
        now: Timestamp,
    ) -> Result<String, StoreError> {
        store.with_content_mut(content_id, |txn| {
            if txn.content().token.is_some() {
                return Err(StoreError::Conflict("token already issued".into()));
            }
            let (clear, record) = self.generate(now);
            txn.content_mut().token = Some(record);
            txn.persist()?;
            Ok(clear)
        })
    }

    pub fn validate(
        &self,
        store: &Store,
        presented: &str,
        content_id: &ContentId,
    ) -> Result<TokenCheck, StoreError> {
        store.with_content(content_id, |c| Ok(self.check(c, presented)))
    }

    pub fn revoke_token(&self, store: &Store, content_id: &ContentId) -> Result<(), StoreError> {
        store.with_content_mut(content_id, |txn| {
            if Self::revoke_in(txn.content_mut()) {
                txn.persist()?;
            }
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_roundtrip() {
        assert_eq!(from_hex(&to_hex(&[0, 1, 254, 255])).unwrap(), vec![0, 1, 254, 255]);
        assert!(from_hex("abc").is_none());
        assert!(from_hex("zz").is_none());
    }

    #[test]
    fn generated_tokens_are_128_bit_base64url() {
        let auth = TokenAuthority::new([7; SALT_LEN]);
        let (clear, rec) = auth.generate(chrono::Utc::now());
        assert_eq!(clear.len(), 22);
        assert!(clear.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_'));
        assert_eq!(rec.token_hash.len(), 64);
        assert!(!rec.token_hash.contains(&clear));
        assert_eq!(rec.status, TokenStatus::Active);
    }

    #[test]
    fn salt_changes_digest() {
        let a = TokenAuthority::new([1; SALT_LEN]);
        let b = TokenAuthority::new([2; SALT_LEN]);
        assert_ne!(a.hash("tok"), b.hash("tok"));
        assert_eq!(a.hash("tok"), a.hash("tok"));
    }
}
