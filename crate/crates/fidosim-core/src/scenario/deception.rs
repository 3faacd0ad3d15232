//! Authenticator deception: spoof the target domain toward the victim with a
//! rogue-CA certificate, relay a genuine challenge to them, and submit their
//! signed response as one's own. Requires the full precondition stack; every
//! single missing piece collapses the attack at a specific point.

use serde_json::json;

use crate::client::{finish_auth_message, wire_str, FlowError};
use crate::fabric::{ChannelKind, InterceptorBehavior, InterceptorSelector};
use crate::scenario::{
    build_world, finish, ScenarioConfig, ScenarioOutcome, ALICE, ATTACKER,
    AUTHENTICATOR_DECEPTION_LABELS, EP_PHISH, EP_RP, GATEWAY_ADDR, MALLORY, PHISH_ADDR, ROGUE_CA,
    RP_DOMAIN, RP_URL, VICTIM,
};
use crate::wire::{self, kind};
use crate::world::{FrontendMode, World};

pub(crate) fn run(config: &ScenarioConfig) -> ScenarioOutcome {
    let mut world = build_world(config, "authenticator_deception");
    let result = script(&mut world, config);
    if let Err(error) = result {
        world.flow_blocked(ATTACKER, &error);
    }
    finish(
        world,
        "authenticator_deception",
        Some(AUTHENTICATOR_DECEPTION_LABELS),
    )
}

fn script(world: &mut World, config: &ScenarioConfig) -> Result<(), FlowError> {
    let toggles = &config.toggles;

    // Pre-state: the victim owns a passkey at the genuine RP (this also
    // leaves the genuine address in their DNS cache), and the attacker holds
    // a valid account of their own.
    let pre_conn = world.client_navigate(VICTIM, RP_URL)?;
    world.flow_register(VICTIM, &pre_conn, ALICE)?;
    let attacker_conn = world.client_navigate(ATTACKER, RP_URL)?;
    world.flow_register(ATTACKER, &attacker_conn, MALLORY)?;

    // Staging. Order matters for ablations: the first privileged act that
    // fails is the recorded block reason.
    if toggles.install_rogue_ca {
        world.install_trust_anchor(ATTACKER, VICTIM, ROGUE_CA)?;
    }
    if toggles.route_override {
        world.apply_route_override(ATTACKER, VICTIM, GATEWAY_ADDR, EP_PHISH)?;
    }
    if toggles.dns_override {
        world.apply_dns_override(ATTACKER, VICTIM, RP_DOMAIN, PHISH_ADDR)?;
        world.apply_dns_override(ATTACKER, VICTIM, "*.linear.app", PHISH_ADDR)?;
    }
    if toggles.flush_cache {
        world.flush_dns_cache(ATTACKER, VICTIM)?;
    }
    world.set_frontend_mode(FrontendMode::DeceptionRelay);
    world.register_interceptor(
        ATTACKER,
        InterceptorSelector {
            kind: ChannelKind::Web,
            client_host: Some(ATTACKER.into()),
            endpoint: Some(EP_RP.into()),
        },
        InterceptorBehavior::CaptureAuthChallenge,
    )?;

    // {1} The victim navigates to the target domain and, if every
    // precondition held, lands on the attacker's frontend with a trusted
    // certificate and the genuine origin in the URL bar.
    let victim_conn = world.client_navigate(VICTIM, RP_URL)?;
    if victim_conn.endpoint != EP_PHISH {
        return Err(FlowError::new(
            crate::scenario::block_reason::VICTIM_REACHED_GENUINE_RP,
        ));
    }
    world.event_labeled(
        VICTIM,
        "fig2.step",
        Some("1"),
        json!({"desc": "victim reaches the attacker frontend"}),
    );

    // {2} The attacker starts a genuine authentication in parallel.
    world.event_labeled(
        ATTACKER,
        "fig2.step",
        Some("2"),
        json!({"desc": "attacker initiates authentication at the genuine RP"}),
    );
    let begin = wire::message(kind::BEGIN_AUTH, &[]);
    let response = world.send_on_channel(attacker_conn.channel, begin)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }

    // {3} The on-path proxy pulled challenge and ceremony id out of that
    // exchange.
    let relay = world
        .attacker
        .relay
        .clone()
        .ok_or_else(|| FlowError::new(crate::scenario::block_reason::NO_RELAYED_CHALLENGE))?;
    world.event_labeled(
        ATTACKER,
        "fig2.step",
        Some("3"),
        json!({
            "desc": "challenge and ceremony id extracted in transit",
            "ceremony_id": relay.ceremony_id,
        }),
    );

    // {4} The frontend forwards the captured challenge to the victim.
    let victim_begin = wire::message(kind::BEGIN_AUTH, &[]);
    let relayed = world.send_on_channel(victim_conn.channel, victim_begin)?;
    if let Some(code) = wire::get_error(&relayed) {
        return Err(FlowError::new(code));
    }
    let relayed_challenge = wire_str(&relayed, "challenge")?;
    let relayed_rp_id = wire_str(&relayed, "rp_id")?;
    let relayed_ceremony = wire_str(&relayed, "ceremony_id")?;
    world.event_labeled(
        ATTACKER,
        "fig2.step",
        Some("4"),
        json!({"desc": "captured challenge forwarded to the victim"}),
    );

    // {5} The victim's authenticator signs: the origin it sees is the real
    // domain, so nothing refuses.
    let assertion =
        world.client_webauthn_get(VICTIM, &victim_conn, &relayed_rp_id, &relayed_challenge)?;
    world.event_labeled(
        VICTIM,
        "fig2.step",
        Some("5"),
        json!({"desc": "victim approves; authenticator signs the challenge"}),
    );

    // {6} The signed response returns to the attacker's backend; the victim
    // gets a bland error suggesting a reload.
    let user_handle = assertion
        .user_handle
        .clone()
        .unwrap_or_else(|| ALICE.into());
    let victim_finish = finish_auth_message(&relayed_ceremony, &assertion, &user_handle);
    let _reload_error = world.send_on_channel(victim_conn.channel, victim_finish)?;
    world.event_labeled(
        ATTACKER,
        "fig2.step",
        Some("6"),
        json!({"desc": "signed response captured by the attacker"}),
    );

    // {7} The attacker completes their own pending ceremony with the
    // victim's signed challenge and identifier.
    let captured = world
        .attacker
        .captured_assertion
        .clone()
        .ok_or_else(|| FlowError::new("assertion_not_captured"))?;
    world.event_labeled(
        ATTACKER,
        "fig2.step",
        Some("7"),
        json!({"desc": "attacker submits the victim's signed challenge as their own"}),
    );
    let response = world.send_on_channel(attacker_conn.channel, captured)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }

    // Cover the tracks: tear down the spoof and let the victim's reload land
    // on the genuine site.
    world.remove_overrides(ATTACKER);
    world.flush_dns_cache(ATTACKER, VICTIM)?;
    let post_conn = world.client_navigate(VICTIM, RP_URL)?;
    world.event(
        ATTACKER,
        "attack.cleanup",
        json!({
            "victim_endpoint_after_reload": post_conn.endpoint,
            "reached_genuine": post_conn.endpoint == EP_RP,
        }),
    );
    Ok(())
}
