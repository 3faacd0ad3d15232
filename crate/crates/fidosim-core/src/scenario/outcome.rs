//! Scenario verdicts and their re-derivation from transcripts.
//!
//! The verdict is always computed from transcript evidence, never asserted
//! directly: a session issued to the attacker for the victim's account, a
//! credential stored under the victim with an attacker-known key, a captured
//! password or harvested information, else the last recorded block reason.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use core::fmt;

use serde_json::Value;

use crate::transcript::Transcript;

/// Reason codes for blocked verdicts that come from scenario logic rather
/// than a module error.
pub mod block_reason {
    pub const NONE: &str = "none";
    pub const OUT_OF_SCOPE: &str = "out_of_scope";
    pub const VICTIM_REACHED_GENUINE_RP: &str = "victim_reached_genuine_rp";
    pub const PASSWORD_FALLBACK_DISABLED: &str = "password_fallback_disabled";
    pub const USER_DECLINED: &str = "user_declined";
    pub const NO_RELAYED_CHALLENGE: &str = "no_relayed_challenge";
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    AttackerSessionAsVictim,
    AttackerCredentialOnVictimAccount,
    PasswordCaptured,
    InformationCaptured,
    Blocked(String),
}

impl Verdict {
    pub fn blocked(reason: &str) -> Self {
        Verdict::Blocked(reason.to_string())
    }

    pub fn is_account_takeover(&self) -> bool {
        matches!(
            self,
            Verdict::AttackerSessionAsVictim | Verdict::AttackerCredentialOnVictimAccount
        )
    }

    pub fn parse(s: &str) -> Option<Verdict> {
        match s {
            "attacker_session_as_victim" => Some(Verdict::AttackerSessionAsVictim),
            "attacker_credential_on_victim_account" => {
                Some(Verdict::AttackerCredentialOnVictimAccount)
            }
            "password_captured" => Some(Verdict::PasswordCaptured),
            "information_captured" => Some(Verdict::InformationCaptured),
            other => {
                let reason = other.strip_prefix("blocked(")?.strip_suffix(')')?;
                Some(Verdict::Blocked(reason.to_string()))
            }
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::AttackerSessionAsVictim => f.write_str("attacker_session_as_victim"),
            Verdict::AttackerCredentialOnVictimAccount => {
                f.write_str("attacker_credential_on_victim_account")
            }
            Verdict::PasswordCaptured => f.write_str("password_captured"),
            Verdict::InformationCaptured => f.write_str("information_captured"),
            Verdict::Blocked(reason) => write!(f, "blocked({reason})"),
        }
    }
}

/// Qualitative attack characteristics echoed in summary reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Table1Labels {
    pub stealthiness: &'static str,
    pub feasibility: &'static str,
    pub victim_interaction: &'static str,
    pub time_consumption: &'static str,
    pub privileges: &'static str,
}

pub const INFECTED_AUTHENTICATOR_LABELS: Table1Labels = Table1Labels {
    stealthiness: "High",
    feasibility: "Medium",
    victim_interaction: "Low",
    time_consumption: "Low",
    privileges: "Low-High",
};

pub const AUTHENTICATOR_DECEPTION_LABELS: Table1Labels = Table1Labels {
    stealthiness: "Medium",
    feasibility: "High",
    victim_interaction: "High",
    time_consumption: "Low-High",
    privileges: "Low-High",
};

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub verdict: Verdict,
    pub transcript: Transcript,
    pub table1: Option<Table1Labels>,
    /// Every keypair the run created, for confidentiality scans. Private
    /// bytes stay sealed inside [`crate::crypto::KeyPair`].
    pub keypair_audit: alloc::vec::Vec<crate::crypto::KeyPair>,
}

/// Recompute the verdict from a transcript alone.
pub fn derive_verdict(transcript: &Transcript) -> Result<Verdict, String> {
    let start = transcript
        .find_all("scenario.start")
        .next()
        .ok_or_else(|| "transcript has no scenario.start event".to_string())?;
    let scenario = start
        .payload
        .get("scenario")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    let victim_user = start
        .payload
        .get("victim_user")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    let attacker_host = start
        .payload
        .get("attacker_host")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();

    // Public keys the adversary demonstrably knows: anything that shows up in
    // an event the attacker host performed.
    let mut attacker_keys: BTreeSet<String> = BTreeSet::new();
    for event in transcript.events() {
        if event.actor == attacker_host {
            for field in ["public_key", "new_public_key"] {
                if let Some(pk) = event.payload.get(field).and_then(Value::as_str) {
                    attacker_keys.insert(pk.to_string());
                }
            }
        }
    }

    let field_is =
        |v: &Value, key: &str, expected: &str| v.get(key).and_then(Value::as_str) == Some(expected);

    let attacker_session = transcript.events().iter().any(|e| {
        (e.kind == "rp.finish_auth" || e.kind == "rp.password_login")
            && field_is(&e.payload, "result", "ok")
            && field_is(&e.payload, "user", &victim_user)
            && field_is(&e.payload, "requester_host", &attacker_host)
    });
    let implanted_credential = transcript.events().iter().any(|e| {
        e.kind == "rp.finish_reg"
            && field_is(&e.payload, "result", "ok")
            && field_is(&e.payload, "user", &victim_user)
            && e.payload
                .get("public_key")
                .and_then(Value::as_str)
                .map(|pk| attacker_keys.contains(pk))
                .unwrap_or(false)
    });
    let password_captured = transcript.events().iter().any(|e| {
        e.kind == "attacker.password_captured" && field_is(&e.payload, "user", &victim_user)
    });
    let info_captured = transcript
        .events()
        .iter()
        .any(|e| e.kind == "attacker.info_captured");
    let blocked_reason = transcript
        .events()
        .iter()
        .rev()
        .find(|e| e.kind == "flow.blocked")
        .and_then(|e| e.payload.get("reason").and_then(Value::as_str))
        .unwrap_or(block_reason::NONE)
        .to_string();

    // A rogue-key run reports the implant; everything else reports the
    // session first.
    let credential_first = scenario == "rogue_key_registration";
    let verdict = if credential_first && implanted_credential {
        Verdict::AttackerCredentialOnVictimAccount
    } else if attacker_session {
        Verdict::AttackerSessionAsVictim
    } else if implanted_credential {
        Verdict::AttackerCredentialOnVictimAccount
    } else if password_captured {
        Verdict::PasswordCaptured
    } else if info_captured {
        Verdict::InformationCaptured
    } else {
        Verdict::Blocked(blocked_reason)
    };
    Ok(verdict)
}
