//! Ordered event log of everything that happens in a run, with canonical
//! newline-delimited JSON serialization and the validators the invariants
//! lean on: sequence monotonicity, attribution completeness, capability
//! soundness, secure-context discipline and the private-key byte scan.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde_json::{Map, Value};

use crate::crypto::KeyPair;

/// Event kinds that mutate fabric state and therefore must carry actor
/// attribution and capability evidence.
pub const PRIVILEGED_KINDS: &[&str] = &[
    "dns.override",
    "route.override",
    "dns.flush",
    "trust.anchor_installed",
    "interceptor.registered",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEvent {
    pub seq: u64,
    pub tick: u64,
    pub actor: String,
    pub kind: String,
    pub step_label: Option<String>,
    pub payload: Value,
}

impl TranscriptEvent {
    /// Canonical record: key-sorted object, no whitespace, `step_label`
    /// omitted when absent.
    pub fn canonical_json(&self) -> String {
        let mut map = Map::new();
        map.insert("actor".to_string(), Value::String(self.actor.clone()));
        map.insert("kind".to_string(), Value::String(self.kind.clone()));
        map.insert("payload".to_string(), self.payload.clone());
        map.insert("seq".to_string(), Value::from(self.seq));
        if let Some(label) = &self.step_label {
            map.insert("step_label".to_string(), Value::String(label.clone()));
        }
        map.insert("tick".to_string(), Value::from(self.tick));
        Value::Object(map).to_string()
    }

    fn from_value(value: Value) -> Result<Self, TranscriptError> {
        let obj = value.as_object().ok_or(TranscriptError::Malformed)?;
        let get_u64 = |k: &str| obj.get(k).and_then(Value::as_u64);
        let get_str = |k: &str| obj.get(k).and_then(Value::as_str);
        Ok(TranscriptEvent {
            seq: get_u64("seq").ok_or(TranscriptError::Malformed)?,
            tick: get_u64("tick").ok_or(TranscriptError::Malformed)?,
            actor: get_str("actor")
                .ok_or(TranscriptError::Malformed)?
                .to_string(),
            kind: get_str("kind")
                .ok_or(TranscriptError::Malformed)?
                .to_string(),
            step_label: get_str("step_label").map(|s| s.to_string()),
            payload: obj.get("payload").cloned().unwrap_or(Value::Null),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TranscriptError {
    /// Line number (1-based) of the record that failed to parse.
    Parse(usize),
    Malformed,
    NonMonotonicSeq(u64),
    Empty,
}

impl fmt::Display for TranscriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TranscriptError::Parse(line) => write!(f, "parse error at line {line}"),
            TranscriptError::Malformed => f.write_str("malformed transcript record"),
            TranscriptError::NonMonotonicSeq(seq) => {
                write!(f, "non-monotonic sequence number {seq}")
            }
            TranscriptError::Empty => f.write_str("empty transcript"),
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct Transcript {
    events: Vec<TranscriptEvent>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript::default()
    }

    pub fn push(&mut self, event: TranscriptEvent) {
        debug_assert!(self
            .events
            .last()
            .map(|prev| event.seq > prev.seq)
            .unwrap_or(true));
        self.events.push(event);
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn find_all<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a TranscriptEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// One canonical record per line, trailing newline included.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&event.canonical_json());
            out.push('\n');
        }
        out
    }

    pub fn parse_ndjson(text: &str) -> Result<Self, TranscriptError> {
        let mut transcript = Transcript::new();
        let mut last_seq = None;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let value: Value =
                serde_json::from_str(line).map_err(|_| TranscriptError::Parse(idx + 1))?;
            let event =
                TranscriptEvent::from_value(value).map_err(|_| TranscriptError::Parse(idx + 1))?;
            if let Some(prev) = last_seq {
                if event.seq <= prev {
                    return Err(TranscriptError::NonMonotonicSeq(event.seq));
                }
            }
            last_seq = Some(event.seq);
            transcript.push(event);
        }
        if transcript.is_empty() {
            return Err(TranscriptError::Empty);
        }
        Ok(transcript)
    }

    // -- validators ------------------------------------------------------------

    /// Attribution completeness: every privileged fabric mutation names an
    /// actor and a target.
    pub fn check_attribution(&self) -> Result<(), String> {
        for event in &self.events {
            if PRIVILEGED_KINDS.contains(&event.kind.as_str()) {
                if event.actor.is_empty() {
                    return Err(format_check_error(event, "missing actor"));
                }
                if event
                    .payload
                    .get("target")
                    .and_then(Value::as_str)
                    .is_none()
                {
                    return Err(format_check_error(event, "missing target"));
                }
            }
        }
        Ok(())
    }

    /// Capability soundness: no privileged mutation on an uncompromised host
    /// by a foreign actor without position. Replays the recorded evidence
    /// against the capability rules.
    pub fn check_capability_soundness(&self) -> Result<(), String> {
        for event in &self.events {
            if !PRIVILEGED_KINDS.contains(&event.kind.as_str()) {
                continue;
            }
            let target = event.payload.get("target").and_then(Value::as_str);
            let compromised = event
                .payload
                .get("target_compromised")
                .and_then(Value::as_bool)
                .unwrap_or(false);
            let same_segment = event
                .payload
                .get("same_segment")
                .and_then(Value::as_bool)
                .unwrap_or(false);
            let self_directed = target == Some(event.actor.as_str());
            let allowed = match event.kind.as_str() {
                "dns.override" | "route.override" => same_segment || compromised,
                "dns.flush" | "trust.anchor_installed" => self_directed || compromised,
                // Registration-time position was checked in the fabric; the
                // event must at least show one of the grounds.
                "interceptor.registered" => {
                    self_directed
                        || compromised
                        || same_segment
                        || event
                            .payload
                            .get("on_path")
                            .and_then(Value::as_bool)
                            .unwrap_or(false)
                }
                _ => true,
            };
            if !allowed {
                return Err(format_check_error(event, "capability violation"));
            }
        }
        Ok(())
    }

    /// WebAuthn calls must only ever happen in a secure context.
    pub fn check_secure_context(&self) -> Result<(), String> {
        for event in &self.events {
            if event.kind == "client.webauthn_create" || event.kind == "client.webauthn_get" {
                let secure = event
                    .payload
                    .get("secure_context")
                    .and_then(Value::as_bool)
                    .unwrap_or(false);
                if !secure {
                    return Err(format_check_error(event, "webauthn in insecure context"));
                }
            }
        }
        Ok(())
    }

    /// Client data origins must equal the connection's origin, byte for byte.
    pub fn check_origin_binding(&self) -> Result<(), String> {
        for event in &self.events {
            if event.kind == "client.webauthn_create" || event.kind == "client.webauthn_get" {
                let conn_origin = event.payload.get("origin").and_then(Value::as_str);
                let cd_origin = event
                    .payload
                    .get("client_data_origin")
                    .and_then(Value::as_str);
                if conn_origin != cd_origin {
                    return Err(format_check_error(event, "client data origin mismatch"));
                }
            }
        }
        Ok(())
    }

    /// Confidentiality scan: no private-key byte string of any audited
    /// keypair may occur anywhere in the serialized transcript.
    pub fn scan_private_material<'a>(
        &self,
        keypairs: impl IntoIterator<Item = &'a KeyPair>,
    ) -> Result<(), String> {
        let text = self.to_ndjson();
        for (i, kp) in keypairs.into_iter().enumerate() {
            if kp.private_material_appears_in(&text) {
                return Err(alloc::format!(
                    "private material of keypair #{i} (pub {}) leaked into transcript",
                    kp.public.to_hex()
                ));
            }
        }
        Ok(())
    }
}

fn format_check_error(event: &TranscriptEvent, what: &str) -> String {
    alloc::format!("event seq {} kind {}: {}", event.seq, event.kind, what)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn event(seq: u64, kind: &str, payload: Value) -> TranscriptEvent {
        TranscriptEvent {
            seq,
            tick: seq,
            actor: "attacker".to_string(),
            kind: kind.to_string(),
            step_label: None,
            payload,
        }
    }

    #[test]
    fn canonical_line_is_key_sorted() {
        let e = TranscriptEvent {
            seq: 3,
            tick: 1,
            actor: "victim".to_string(),
            kind: "client.navigate".to_string(),
            step_label: Some("1".to_string()),
            payload: json!({"url": "https://linear.app"}),
        };
        assert_eq!(
            e.canonical_json(),
            r#"{"actor":"victim","kind":"client.navigate","payload":{"url":"https://linear.app"},"seq":3,"step_label":"1","tick":1}"#
        );
    }

    #[test]
    fn ndjson_round_trip() {
        let mut t = Transcript::new();
        t.push(event(1, "a", json!({"x": 1})));
        t.push(event(2, "b", json!({})));
        let text = t.to_ndjson();
        let parsed = Transcript::parse_ndjson(&text).unwrap();
        assert_eq!(parsed.events(), t.events());
        assert_eq!(parsed.to_ndjson(), text);
    }

    #[test]
    fn truncated_line_is_parse_error() {
        let mut t = Transcript::new();
        t.push(event(1, "a", json!({"x": 1})));
        let text = t.to_ndjson();
        let truncated = &text[..text.len() - 5];
        assert!(matches!(
            Transcript::parse_ndjson(truncated).unwrap_err(),
            TranscriptError::Parse(1)
        ));
    }

    #[test]
    fn seq_must_increase() {
        let a = event(5, "a", json!({}));
        let b = event(5, "b", json!({}));
        let text = alloc::format!("{}\n{}\n", a.canonical_json(), b.canonical_json());
        assert!(matches!(
            Transcript::parse_ndjson(&text).unwrap_err(),
            TranscriptError::NonMonotonicSeq(5)
        ));
    }

    #[test]
    fn empty_transcript_is_an_error() {
        assert_eq!(
            Transcript::parse_ndjson("").unwrap_err(),
            TranscriptError::Empty
        );
    }

    #[test]
    fn capability_check_flags_unprivileged_mutation() {
        let mut t = Transcript::new();
        t.push(event(
            1,
            "trust.anchor_installed",
            json!({"target": "victim", "target_compromised": false, "same_segment": true}),
        ));
        assert!(t.check_capability_soundness().is_err());
        let mut ok = Transcript::new();
        ok.push(event(
            1,
            "trust.anchor_installed",
            json!({"target": "victim", "target_compromised": true, "same_segment": true}),
        ));
        assert!(ok.check_capability_soundness().is_ok());
    }

    #[test]
    fn secure_context_check() {
        let mut t = Transcript::new();
        t.push(event(
            1,
            "client.webauthn_get",
            json!({"secure_context": false, "origin": "http://x", "client_data_origin": "http://x"}),
        ));
        assert!(t.check_secure_context().is_err());
    }
}
