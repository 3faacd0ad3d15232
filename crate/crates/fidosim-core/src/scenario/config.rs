//! Scenario configuration: the toggle set every attack precondition hangs
//! off, plus partial-config parsing for the CLI. Unknown toggle names are a
//! parse error, not a silent ignore.

use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::authenticator::InfectionMode;
use crate::client::VictimPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfectionSetting {
    None,
    Fixed,
    Indexed,
}

impl InfectionSetting {
    pub fn mode(&self) -> Option<InfectionMode> {
        match self {
            InfectionSetting::None => None,
            InfectionSetting::Fixed => Some(InfectionMode::FixedKey),
            InfectionSetting::Indexed => Some(InfectionMode::IndexedKeys),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub victim_compromised: bool,
    pub install_rogue_ca: bool,
    pub dns_override: bool,
    pub route_override: bool,
    pub flush_cache: bool,
    pub infection_mode: InfectionSetting,
    pub anti_arp_spoofing: bool,
    pub password_fallback_enabled: bool,
    /// Attacker within physical/network range of the victim (same segment).
    pub proximity: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles {
            victim_compromised: false,
            install_rogue_ca: false,
            dns_override: false,
            route_override: false,
            flush_cache: false,
            infection_mode: InfectionSetting::None,
            anti_arp_spoofing: false,
            password_fallback_enabled: true,
            proximity: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub seed: u64,
    #[serde(default)]
    pub victim_policy: VictimPolicy,
    #[serde(default)]
    pub toggles: Toggles,
}

impl ScenarioConfig {
    pub fn new(scenario: &str, seed: u64) -> Self {
        ScenarioConfig {
            scenario: scenario.to_string(),
            seed,
            victim_policy: VictimPolicy::default(),
            toggles: Toggles::default(),
        }
    }
}

/// Partial overlay parsed from a config file; unset fields keep the
/// scenario's defaults. Unknown keys anywhere are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigPatch {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub victim_policy: Option<PolicyPatch>,
    pub toggles: Option<TogglesPatch>,
    pub expect: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyPatch {
    pub follows_phishing_links: Option<bool>,
    pub ignores_tls_warnings: Option<bool>,
    pub approves_authenticator_prompts: Option<bool>,
    pub falls_back_to_password: Option<bool>,
    pub enters_wrong_pin: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TogglesPatch {
    pub victim_compromised: Option<bool>,
    pub install_rogue_ca: Option<bool>,
    pub dns_override: Option<bool>,
    pub route_override: Option<bool>,
    pub flush_cache: Option<bool>,
    pub infection_mode: Option<InfectionSetting>,
    pub anti_arp_spoofing: Option<bool>,
    pub password_fallback_enabled: Option<bool>,
    pub proximity: Option<bool>,
}

impl ConfigPatch {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| alloc::format!("config parse error: {e}"))
    }

    pub fn apply(&self, mut base: ScenarioConfig) -> ScenarioConfig {
        if let Some(seed) = self.seed {
            base.seed = seed;
        }
        if let Some(p) = &self.victim_policy {
            let v = &mut base.victim_policy;
            if let Some(x) = p.follows_phishing_links {
                v.follows_phishing_links = x;
            }
            if let Some(x) = p.ignores_tls_warnings {
                v.ignores_tls_warnings = x;
            }
            if let Some(x) = p.approves_authenticator_prompts {
                v.approves_authenticator_prompts = x;
            }
            if let Some(x) = p.falls_back_to_password {
                v.falls_back_to_password = x;
            }
            if let Some(x) = p.enters_wrong_pin {
                v.enters_wrong_pin = x;
            }
        }
        if let Some(t) = &self.toggles {
            let b = &mut base.toggles;
            if let Some(x) = t.victim_compromised {
                b.victim_compromised = x;
            }
            if let Some(x) = t.install_rogue_ca {
                b.install_rogue_ca = x;
            }
            if let Some(x) = t.dns_override {
                b.dns_override = x;
            }
            if let Some(x) = t.route_override {
                b.route_override = x;
            }
            if let Some(x) = t.flush_cache {
                b.flush_cache = x;
            }
            if let Some(x) = t.infection_mode {
                b.infection_mode = x;
            }
            if let Some(x) = t.anti_arp_spoofing {
                b.anti_arp_spoofing = x;
            }
            if let Some(x) = t.password_fallback_enabled {
                b.password_fallback_enabled = x;
            }
            if let Some(x) = t.proximity {
                b.proximity = x;
            }
        }
        base
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_toggles_rejected_at_parse_time() {
        let err = ConfigPatch::parse(r#"{"toggles": {"victim_compromised": true, "bogus": 1}}"#)
            .unwrap_err();
        assert!(err.contains("bogus"), "{err}");
        assert!(ConfigPatch::parse(r#"{"nope": true}"#).is_err());
    }

    #[test]
    fn patch_overlays_only_set_fields() {
        let patch =
            ConfigPatch::parse(r#"{"seed": 9, "toggles": {"install_rogue_ca": false}}"#).unwrap();
        let mut base = ScenarioConfig::new("authenticator_deception", 1);
        base.toggles.install_rogue_ca = true;
        base.toggles.victim_compromised = true;
        let merged = patch.apply(base);
        assert_eq!(merged.seed, 9);
        assert!(!merged.toggles.install_rogue_ca);
        assert!(merged.toggles.victim_compromised);
    }

    #[test]
    fn infection_setting_round_trip() {
        let t: Toggles = serde_json::from_str(r#"{"infection_mode": "fixed"}"#).unwrap();
        assert_eq!(t.infection_mode, InfectionSetting::Fixed);
        assert!(serde_json::from_str::<Toggles>(r#"{"infection_mode": "bad"}"#).is_err());
    }
}
