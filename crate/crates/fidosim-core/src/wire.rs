//! Channel wire format: length-prefixed canonical JSON records.
//!
//! Every message is an object with a `kind` field; interceptors see and may
//! rewrite the decoded record before delivery. Canonical serialization
//! (key-sorted, no whitespace) keeps transcripts diffable.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::{Map, Value};

pub mod kind {
    pub const BEGIN_REG: &str = "rp.begin_reg";
    pub const BEGIN_REG_OK: &str = "rp.begin_reg.ok";
    pub const FINISH_REG: &str = "rp.finish_reg";
    pub const FINISH_REG_OK: &str = "rp.finish_reg.ok";
    pub const BEGIN_AUTH: &str = "rp.begin_auth";
    pub const BEGIN_AUTH_OK: &str = "rp.begin_auth.ok";
    pub const FINISH_AUTH: &str = "rp.finish_auth";
    pub const FINISH_AUTH_OK: &str = "rp.finish_auth.ok";
    pub const PASSWORD_LOGIN: &str = "rp.password_login";
    pub const PASSWORD_LOGIN_OK: &str = "rp.password_login.ok";
    pub const ADD_PASSKEY: &str = "rp.add_passkey";
    pub const ADD_PASSKEY_OK: &str = "rp.add_passkey.ok";
    pub const ERROR: &str = "rp.error";

    pub const CTAP_UNLOCK: &str = "ctap.unlock";
    pub const CTAP_UNLOCK_OK: &str = "ctap.unlock.ok";
    pub const CTAP_MAKE_CREDENTIAL: &str = "ctap.make_credential";
    pub const CTAP_MAKE_CREDENTIAL_OK: &str = "ctap.make_credential.ok";
    pub const CTAP_GET_ASSERTION: &str = "ctap.get_assertion";
    pub const CTAP_GET_ASSERTION_OK: &str = "ctap.get_assertion.ok";
    pub const CTAP_ERROR: &str = "ctap.error";
    pub const CTAP_KEY_EXFILTRATION: &str = "ctap.key_exfiltration";

    pub const INFO_SUBMIT: &str = "user.info_submit";
    pub const INFO_SUBMIT_OK: &str = "user.info_submit.ok";
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireError {
    Truncated,
    NotCanonicalJson,
    MissingField(&'static str),
}

/// Canonical JSON text for a value. `serde_json`'s map is ordered, so object
/// keys come out sorted; we only ever put integers in numbers.
pub fn canonical_json(value: &Value) -> String {
    value.to_string()
}

/// 4-byte big-endian length prefix followed by canonical JSON bytes.
pub fn encode_record(value: &Value) -> Vec<u8> {
    let body = canonical_json(value).into_bytes();
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

pub fn decode_record(bytes: &[u8]) -> Result<Value, WireError> {
    if bytes.len() < 4 {
        return Err(WireError::Truncated);
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
    if bytes.len() != 4 + len {
        return Err(WireError::Truncated);
    }
    serde_json::from_slice(&bytes[4..]).map_err(|_| WireError::NotCanonicalJson)
}

pub fn message(kind: &str, fields: &[(&str, Value)]) -> Value {
    let mut map = Map::new();
    map.insert("kind".to_string(), Value::String(kind.to_string()));
    for (k, v) in fields {
        map.insert((*k).to_string(), v.clone());
    }
    Value::Object(map)
}

pub fn error_message(kind: &str, code: &str) -> Value {
    message(kind, &[("error", Value::String(code.to_string()))])
}

pub fn msg_kind(msg: &Value) -> &str {
    msg.get("kind").and_then(Value::as_str).unwrap_or("")
}

pub fn get_str<'a>(msg: &'a Value, field: &'static str) -> Result<&'a str, WireError> {
    msg.get(field)
        .and_then(Value::as_str)
        .ok_or(WireError::MissingField(field))
}

pub fn get_error(msg: &Value) -> Option<&str> {
    msg.get("error").and_then(Value::as_str)
}
