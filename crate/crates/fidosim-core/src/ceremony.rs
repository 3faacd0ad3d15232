//! Byte-exact ceremony structures shared by the relying party, the client and
//! the authenticator: client data, authenticator data and the signed-message
//! layout.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use base64::engine::general_purpose::URL_SAFE_NO_PAD as B64_URL;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::crypto;

/// bit 0: user present, bit 2: user verified.
pub const FLAG_USER_PRESENT: u8 = 0b0000_0001;
pub const FLAG_USER_VERIFIED: u8 = 0b0000_0100;

pub const AUTHENTICATOR_DATA_LEN: usize = 37;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClientDataType {
    #[serde(rename = "webauthn.create")]
    Create,
    #[serde(rename = "webauthn.get")]
    Get,
}

impl ClientDataType {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClientDataType::Create => "webauthn.create",
            ClientDataType::Get => "webauthn.get",
        }
    }
}

/// The context the client assembles and the authenticator signs (hashed).
/// `origin` is whatever the browser believes it is connected to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientData {
    #[serde(rename = "type")]
    pub kind: ClientDataType,
    pub challenge: String,
    pub origin: String,
}

impl ClientData {
    pub fn new(kind: ClientDataType, challenge_bytes: &[u8; 32], origin: &str) -> Self {
        ClientData {
            kind,
            challenge: encode_challenge(challenge_bytes),
            origin: origin.to_string(),
        }
    }

    /// Canonical serialization: key-sorted, no whitespace, UTF-8. Both sides
    /// of a ceremony must produce identical bytes for identical fields.
    pub fn canonical_json(&self) -> String {
        let mut map = Map::new();
        map.insert(
            "challenge".to_string(),
            Value::String(self.challenge.clone()),
        );
        map.insert("origin".to_string(), Value::String(self.origin.clone()));
        map.insert(
            "type".to_string(),
            Value::String(self.kind.as_str().to_string()),
        );
        Value::Object(map).to_string()
    }

    pub fn hash(&self) -> [u8; 32] {
        crypto::hash(self.canonical_json().as_bytes())
    }
}

pub fn encode_challenge(bytes: &[u8; 32]) -> String {
    B64_URL.encode(bytes)
}

pub fn decode_challenge(s: &str) -> Option<[u8; 32]> {
    B64_URL.decode(s).ok()?.try_into().ok()
}

/// The authenticator-produced portion of a signed message: RP ID hash, flag
/// byte and big-endian signature counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuthenticatorData {
    pub rp_id_hash: [u8; 32],
    pub flags: u8,
    pub sign_count: u32,
}

impl AuthenticatorData {
    pub fn new(rp_id: &str, flags: u8, sign_count: u32) -> Self {
        AuthenticatorData {
            rp_id_hash: crypto::hash(rp_id.as_bytes()),
            flags,
            sign_count,
        }
    }

    pub fn to_bytes(&self) -> [u8; AUTHENTICATOR_DATA_LEN] {
        let mut out = [0u8; AUTHENTICATOR_DATA_LEN];
        out[..32].copy_from_slice(&self.rp_id_hash);
        out[32] = self.flags;
        out[33..].copy_from_slice(&self.sign_count.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.len() != AUTHENTICATOR_DATA_LEN {
            return None;
        }
        Some(AuthenticatorData {
            rp_id_hash: bytes[..32].try_into().unwrap(),
            flags: bytes[32],
            sign_count: u32::from_be_bytes(bytes[33..].try_into().unwrap()),
        })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        Self::from_bytes(&hex::decode(s).ok()?)
    }

    pub fn user_present(&self) -> bool {
        self.flags & FLAG_USER_PRESENT != 0
    }
}

/// What actually gets signed: authenticator data bytes followed by the hash
/// of the canonical client data.
pub fn signed_message(auth_data: &AuthenticatorData, client_data_hash: &[u8; 32]) -> Vec<u8> {
    let mut msg = Vec::with_capacity(AUTHENTICATOR_DATA_LEN + 32);
    msg.extend_from_slice(&auth_data.to_bytes());
    msg.extend_from_slice(client_data_hash);
    msg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_data_canonical_form_is_key_sorted_and_compact() {
        let cd = ClientData::new(ClientDataType::Get, &[0u8; 32], "https://linear.app");
        let json = cd.canonical_json();
        assert!(json.starts_with("{\"challenge\":\""));
        assert!(json.contains("\"origin\":\"https://linear.app\""));
        assert!(json.ends_with("\"type\":\"webauthn.get\"}"));
        assert!(!json.contains(' '));
    }

    #[test]
    fn client_data_hash_is_stable() {
        let a = ClientData::new(ClientDataType::Create, &[7u8; 32], "https://linear.app");
        let b = ClientData::new(ClientDataType::Create, &[7u8; 32], "https://linear.app");
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn challenge_encoding_round_trips() {
        let bytes = [42u8; 32];
        assert_eq!(decode_challenge(&encode_challenge(&bytes)), Some(bytes));
        assert_eq!(decode_challenge("not-base64!"), None);
    }

    #[test]
    fn authenticator_data_layout() {
        let ad = AuthenticatorData::new("linear.app", FLAG_USER_PRESENT, 0x01020304);
        let bytes = ad.to_bytes();
        assert_eq!(bytes.len(), 37);
        assert_eq!(&bytes[..32], &crypto::hash(b"linear.app"));
        assert_eq!(bytes[32], FLAG_USER_PRESENT);
        assert_eq!(&bytes[33..], &[1, 2, 3, 4]);
        assert_eq!(AuthenticatorData::from_bytes(&bytes), Some(ad));
        assert_eq!(AuthenticatorData::from_bytes(&bytes[..36]), None);
    }
}
