//! Executable attack scenarios: one per attack vector, plus the honest
//! baseline and a stub for out-of-scope key extraction. Each run builds a
//! private world from its config, scripts the attacker and the victim, and
//! returns a verdict re-derived from the transcript.

mod baseline;
mod config;
mod deception;
mod impersonation;
mod infected;
mod outcome;
mod reduction;
mod relay;
mod rogue_key;

pub use config::{
    ConfigPatch, InfectionSetting, PolicyPatch, ScenarioConfig, Toggles, TogglesPatch,
};
pub use outcome::{
    block_reason, derive_verdict, ScenarioOutcome, Table1Labels, Verdict,
    AUTHENTICATOR_DECEPTION_LABELS, INFECTED_AUTHENTICATOR_LABELS,
};

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::json;

use crate::authenticator::{Authenticator, InfectionConfig};
use crate::client::{ClientConfig, VictimPolicy};
use crate::crypto::Seed;
use crate::fabric::{Certificate, Endpoint, EndpointKind, Fabric, Host, HostRole};
use crate::rng::SimRng;
use crate::rp::{RelyingParty, RpConfig};
use crate::world::World;

pub const VICTIM: &str = "victim";
pub const ATTACKER: &str = "attacker";
pub const RP_HOST: &str = "rp-server";

pub const RP_DOMAIN: &str = "linear.app";
pub const RP_ORIGIN: &str = "https://linear.app";
pub const RP_URL: &str = "https://linear.app";
pub const PHISH_DOMAIN: &str = "evil.example";
pub const PHISH_URL: &str = "https://evil.example";

pub const RP_ADDR: &str = "10.0.0.10";
pub const PHISH_ADDR: &str = "10.0.66.6";
pub const GATEWAY_ADDR: &str = "10.0.0.1";

pub const EP_RP: &str = "ep-rp";
pub const EP_PHISH: &str = "ep-phish";
pub const EP_CTAP_VICTIM: &str = "ep-ctap-victim";
pub const EP_CTAP_ATTACKER: &str = "ep-ctap-attacker";

pub const PUBLIC_CA: &str = "public-root-ca";
pub const ROGUE_CA: &str = "attacker-rogue-ca";

pub const ALICE: &str = "alice";
pub const ALICE_PASSWORD: &str = "correct-horse-9";
pub const MALLORY: &str = "mallory";
pub const MALLORY_PASSWORD: &str = "mallory-pw-7";

pub const VICTIM_PIN: &str = "1234";
pub const ATTACKER_PIN: &str = "9999";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    UnknownScenario(String),
}

impl core::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ScenarioError::UnknownScenario(name) => write!(f, "unknown scenario: {name}"),
        }
    }
}

pub fn scenario_names() -> &'static [&'static str] {
    &[
        "baseline",
        "infected_authenticator",
        "authenticator_deception",
        "passkey_reduction",
        "rogue_key_registration",
        "rp_impersonation",
        "bluetooth_qr_relay",
        "key_extraction",
    ]
}

/// The verdict a default-config run of each scenario is supposed to produce.
pub fn expected_verdict(name: &str) -> Result<Verdict, ScenarioError> {
    match name {
        "baseline" => Ok(Verdict::blocked(block_reason::NONE)),
        "infected_authenticator" => Ok(Verdict::AttackerSessionAsVictim),
        "authenticator_deception" => Ok(Verdict::AttackerSessionAsVictim),
        "passkey_reduction" => Ok(Verdict::PasswordCaptured),
        "rogue_key_registration" => Ok(Verdict::AttackerCredentialOnVictimAccount),
        "rp_impersonation" => Ok(Verdict::InformationCaptured),
        "bluetooth_qr_relay" => Ok(Verdict::AttackerSessionAsVictim),
        "key_extraction" => Ok(Verdict::blocked(block_reason::OUT_OF_SCOPE)),
        other => Err(ScenarioError::UnknownScenario(other.to_string())),
    }
}

/// Default (attack-succeeds) configuration for each scenario.
pub fn default_config(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut config = ScenarioConfig::new(name, 1);
    let t = &mut config.toggles;
    let p = &mut config.victim_policy;
    match name {
        "baseline" | "key_extraction" => {}
        "infected_authenticator" => {
            t.victim_compromised = true;
            t.infection_mode = InfectionSetting::Fixed;
        }
        "authenticator_deception" => {
            t.victim_compromised = true;
            t.install_rogue_ca = true;
            t.dns_override = true;
            t.route_override = true;
            t.flush_cache = true;
            t.proximity = true;
        }
        "passkey_reduction" => {
            p.follows_phishing_links = true;
            p.falls_back_to_password = true;
        }
        "rogue_key_registration" => {
            t.victim_compromised = true;
        }
        "rp_impersonation" => {
            t.victim_compromised = true;
            t.install_rogue_ca = true;
            t.dns_override = true;
            t.route_override = true;
            t.flush_cache = true;
            t.proximity = true;
        }
        "bluetooth_qr_relay" => {
            t.proximity = true;
            p.follows_phishing_links = true;
        }
        other => return Err(ScenarioError::UnknownScenario(other.to_string())),
    }
    Ok(config)
}

pub fn run_scenario(name: &str, config: &ScenarioConfig) -> Result<ScenarioOutcome, ScenarioError> {
    match name {
        "baseline" => Ok(baseline::run(config)),
        "infected_authenticator" => Ok(infected::run(config)),
        "authenticator_deception" => Ok(deception::run(config)),
        "passkey_reduction" => Ok(reduction::run(config)),
        "rogue_key_registration" => Ok(rogue_key::run(config)),
        "rp_impersonation" => Ok(impersonation::run(config)),
        "bluetooth_qr_relay" => Ok(relay::run(config)),
        "key_extraction" => Ok(run_key_extraction(config)),
        other => Err(ScenarioError::UnknownScenario(other.to_string())),
    }
}

/// Extracting private keys from encrypted local stores is a documented
/// non-goal; the stub exists so the registry covers every vector.
fn run_key_extraction(config: &ScenarioConfig) -> ScenarioOutcome {
    let mut world = build_world(config, "key_extraction");
    world.event(
        ATTACKER,
        "scenario.note",
        json!({
            "status": "out_of_scope",
            "detail": "private-key extraction from encrypted stores is not modeled",
        }),
    );
    world.event(
        ATTACKER,
        "flow.blocked",
        json!({"reason": block_reason::OUT_OF_SCOPE}),
    );
    finish(world, "key_extraction", None)
}

/// Standard topology: victim and relying party, an attacker that is either
/// on the victim's LAN (proximity) or remote, the genuine web endpoint, the
/// attacker's frontend (with both its legitimate certificate and a
/// rogue-signed clone of the RP's) and one CTAP authenticator per side.
pub fn build_world(config: &ScenarioConfig, scenario: &str) -> World {
    let mut rng = SimRng::from_seed(config.seed);
    let infection_seed = Seed::attacker_known(rng.fork("infection-seed").bytes32());
    let world_rng = rng.fork("world");

    let mut fabric = Fabric::new();
    let attacker_segment = if config.toggles.proximity {
        "lan"
    } else {
        "wan"
    };
    let mut victim = Host::new(VICTIM, "lan", HostRole::Victim);
    victim.trust_store.insert(PUBLIC_CA.to_string());
    victim.anti_arp_spoofing = config.toggles.anti_arp_spoofing;
    let mut attacker = Host::new(ATTACKER, attacker_segment, HostRole::Attacker);
    attacker.trust_store.insert(PUBLIC_CA.to_string());
    let rp_host = Host::new(RP_HOST, "core", HostRole::RelyingParty);
    fabric.add_host(victim);
    fabric.add_host(attacker);
    fabric.add_host(rp_host);

    fabric.add_dns_record(RP_DOMAIN, RP_ADDR);
    fabric.add_dns_record(PHISH_DOMAIN, PHISH_ADDR);
    fabric.add_route(RP_ADDR, EP_RP);
    fabric.add_route(PHISH_ADDR, EP_PHISH);

    fabric.add_endpoint(Endpoint {
        id: EP_RP.to_string(),
        host: RP_HOST.to_string(),
        kind: EndpointKind::RelyingParty,
        certificates: alloc::vec![Certificate::new(
            RP_DOMAIN,
            &[RP_DOMAIN, "*.linear.app"],
            PUBLIC_CA,
        )],
        listening: true,
    });
    // The frontend owns a legitimate certificate for its own domain and a
    // rogue-signed clone for the target's; which one counts depends entirely
    // on the victim's trust store.
    fabric.add_endpoint(Endpoint {
        id: EP_PHISH.to_string(),
        host: ATTACKER.to_string(),
        kind: EndpointKind::AttackerFrontend,
        certificates: alloc::vec![
            Certificate::new(PHISH_DOMAIN, &[PHISH_DOMAIN], PUBLIC_CA),
            Certificate::new(RP_DOMAIN, &[RP_DOMAIN, "*.linear.app"], ROGUE_CA),
        ],
        listening: true,
    });
    fabric.add_endpoint(Endpoint {
        id: EP_CTAP_VICTIM.to_string(),
        host: VICTIM.to_string(),
        kind: EndpointKind::CtapAuthenticator,
        certificates: Vec::new(),
        listening: true,
    });
    fabric.add_endpoint(Endpoint {
        id: EP_CTAP_ATTACKER.to_string(),
        host: ATTACKER.to_string(),
        kind: EndpointKind::CtapAuthenticator,
        certificates: Vec::new(),
        listening: true,
    });

    let mut rp_config = RpConfig::new(RP_DOMAIN, RP_ORIGIN);
    rp_config.password_login_enabled = config.toggles.password_fallback_enabled;
    let mut rp = RelyingParty::new(rp_config);
    rp.create_account(
        ALICE,
        config
            .toggles
            .password_fallback_enabled
            .then_some(ALICE_PASSWORD),
    );
    rp.create_account(MALLORY, Some(MALLORY_PASSWORD));

    let mut world = World::new(fabric, rp, ATTACKER, world_rng);
    world.victim_user = ALICE.to_string();

    world.event(
        "harness",
        "scenario.start",
        json!({
            "scenario": scenario,
            "seed": config.seed,
            "toggles": config.toggles,
            "victim_policy": config.victim_policy,
            "victim_user": ALICE,
            "victim_host": VICTIM,
            "attacker_host": ATTACKER,
            "rp_origin": RP_ORIGIN,
            "genuine_endpoint": EP_RP,
            "phish_endpoint": EP_PHISH,
        }),
    );
    for (host, role, segment) in [
        (VICTIM, "victim", "lan"),
        (ATTACKER, "attacker", attacker_segment),
        (RP_HOST, "relying_party", "core"),
    ] {
        world.event(
            "harness",
            "host.created",
            json!({"host": host, "role": role, "segment": segment}),
        );
    }

    // Authenticators. Infection only takes hold if the attacker actually got
    // onto the device: the toggle is the intent, compromise is the means.
    let infected =
        config.toggles.victim_compromised && config.toggles.infection_mode.mode().is_some();
    let mut victim_auth =
        if let Some(mode) = config.toggles.infection_mode.mode().filter(|_| infected) {
            Authenticator::new_infected(
                VICTIM_PIN,
                InfectionConfig {
                    seed: infection_seed,
                    mode,
                    announce_exfiltration: false,
                },
            )
        } else {
            Authenticator::new_honest(VICTIM_PIN)
        };
    victim_auth.user_approves = config.victim_policy.approves_authenticator_prompts;
    world.authenticators.insert(VICTIM.to_string(), victim_auth);
    world.authenticators.insert(
        ATTACKER.to_string(),
        Authenticator::new_honest(ATTACKER_PIN),
    );
    // Whether or not the infection landed, the attacker knows the seed they
    // built the payload around.
    world.attacker.known_seeds.push(infection_seed);

    if config.toggles.victim_compromised {
        world.compromise_host(ATTACKER, VICTIM);
    }
    if infected {
        let mode_label = match config.toggles.infection_mode {
            InfectionSetting::Fixed => "fixed",
            InfectionSetting::Indexed => "indexed",
            InfectionSetting::None => "none",
        };
        world.event(
            ATTACKER,
            "authenticator.infected",
            json!({"target": VICTIM, "mode": mode_label}),
        );
    }

    let mut victim_client = ClientConfig::new(config.victim_policy, VICTIM_PIN);
    let attacker_policy = VictimPolicy {
        follows_phishing_links: true,
        ignores_tls_warnings: false,
        approves_authenticator_prompts: true,
        falls_back_to_password: true,
        enters_wrong_pin: false,
    };
    let mut attacker_client = ClientConfig::new(attacker_policy, ATTACKER_PIN);

    let victim_ctap = world
        .open_ctap_channel(VICTIM, EP_CTAP_VICTIM)
        .expect("victim ctap channel");
    let attacker_ctap = world
        .open_ctap_channel(ATTACKER, EP_CTAP_ATTACKER)
        .expect("attacker ctap channel");
    victim_client.ctap_channel = Some(victim_ctap);
    attacker_client.ctap_channel = Some(attacker_ctap);
    world.clients.insert(VICTIM.to_string(), victim_client);
    world.clients.insert(ATTACKER.to_string(), attacker_client);

    world
}

/// Seal a run: the verdict is whatever the transcript supports.
pub(crate) fn finish(
    world: World,
    scenario: &str,
    table1: Option<Table1Labels>,
) -> ScenarioOutcome {
    let verdict = derive_verdict(&world.transcript)
        .unwrap_or_else(|e| Verdict::Blocked(alloc::format!("derivation_error:{e}")));
    let keypair_audit = world.audit_keypairs().into_iter().cloned().collect();
    ScenarioOutcome {
        scenario: scenario.to_string(),
        verdict,
        transcript: world.transcript,
        table1,
        keypair_audit,
    }
}
