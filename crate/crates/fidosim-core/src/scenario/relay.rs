//! Proximity relay: a phishing page is the lure, but the signature happens
//! over a cross-device pairing. The attacker starts a genuine login, packs
//! the challenge into a relay token (the QR stand-in), and the victim's
//! nearby authenticator signs for the real RP ID.

use alloc::string::ToString;

use serde_json::json;

use crate::ceremony::{ClientData, ClientDataType};
use crate::client::{finish_auth_message, wire_str, AssertionSubmission, FlowError};
use crate::fabric::{ChannelKind, InterceptorBehavior, InterceptorSelector};
use crate::scenario::{
    block_reason, build_world, finish, ScenarioConfig, ScenarioOutcome, ALICE, ATTACKER, EP_RP,
    PHISH_URL, RP_URL, VICTIM,
};
use crate::wire::{self, kind};
use crate::world::World;

pub(crate) fn run(config: &ScenarioConfig) -> ScenarioOutcome {
    let mut world = build_world(config, "bluetooth_qr_relay");
    let result = script(&mut world);
    if let Err(error) = result {
        world.flow_blocked(ATTACKER, &error);
    }
    finish(world, "bluetooth_qr_relay", None)
}

fn script(world: &mut World) -> Result<(), FlowError> {
    // Pre-state: the victim's device already holds a passkey for the RP.
    let pre_conn = world.client_navigate(VICTIM, RP_URL)?;
    world.flow_register(VICTIM, &pre_conn, ALICE)?;

    // Lure: the page itself is pure visual deception.
    if !world.consult_policy(VICTIM, "follows_phishing_links") {
        return Err(FlowError::new(block_reason::USER_DECLINED));
    }
    let _phish_conn = world.client_navigate(VICTIM, PHISH_URL)?;

    // Attacker starts a genuine, account-agnostic login and captures the
    // challenge off their own session.
    world.register_interceptor(
        ATTACKER,
        InterceptorSelector {
            kind: ChannelKind::Web,
            client_host: Some(ATTACKER.into()),
            endpoint: Some(EP_RP.into()),
        },
        InterceptorBehavior::CaptureAuthChallenge,
    )?;
    let attacker_conn = world.client_navigate(ATTACKER, RP_URL)?;
    let begin = wire::message(kind::BEGIN_AUTH, &[]);
    let response = world.send_on_channel(attacker_conn.channel, begin)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }
    let relay = world
        .attacker
        .relay
        .clone()
        .ok_or_else(|| FlowError::new(block_reason::NO_RELAYED_CHALLENGE))?;

    // The client data belongs to the attacker's genuine session; its origin
    // is the real one, which is exactly why the relayed signature verifies.
    let client_data = ClientData {
        kind: ClientDataType::Get,
        challenge: relay.challenge.clone(),
        origin: attacker_conn.origin_as_seen.clone(),
    };
    let client_data_hash = client_data.hash();
    world.event(
        ATTACKER,
        "attacker.relay_token",
        json!({
            "rp_id": relay.rp_id,
            "ceremony_id": relay.ceremony_id,
            "client_data_hash": hex::encode(client_data_hash),
            "transport": "qr+proximity",
        }),
    );

    // Pairing only works in physical range.
    if !world.proximity_check(ATTACKER, VICTIM) {
        return Err(FlowError::new("position_required"));
    }

    // The victim's authenticator is asked for the *genuine* RP ID with a
    // genuine challenge; domain isolation has nothing to refuse.
    let ctap = world
        .clients
        .get(VICTIM)
        .and_then(|c| c.ctap_channel)
        .ok_or_else(|| FlowError::new("connection_refused"))?;
    let pin = world
        .clients
        .get(VICTIM)
        .map(|c| c.pin.clone())
        .unwrap_or_default();
    let unlock = wire::message(
        kind::CTAP_UNLOCK,
        &[("pin", serde_json::Value::String(pin))],
    );
    let _ = world.send_on_channel(ctap, unlock)?;
    let get = wire::message(
        kind::CTAP_GET_ASSERTION,
        &[
            ("rp_id", serde_json::Value::String(relay.rp_id.clone())),
            (
                "client_data_hash",
                serde_json::Value::String(hex::encode(client_data_hash)),
            ),
        ],
    );
    let response = world.send_on_channel(ctap, get)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }
    world.event(
        ATTACKER,
        "relay.assertion_forwarded",
        json!({"ceremony_id": relay.ceremony_id}),
    );

    // Attacker finishes their own ceremony with the victim's signature.
    let submission = AssertionSubmission {
        client_data,
        credential_id: wire_str(&response, "credential_id")?,
        user_handle: response
            .get("user_handle")
            .and_then(serde_json::Value::as_str)
            .map(|s| s.to_string()),
        authenticator_data: wire_str(&response, "authenticator_data")?,
        signature: wire_str(&response, "signature")?,
    };
    let user_handle = submission.user_handle.clone().unwrap_or_default();
    let finish_msg = finish_auth_message(&relay.ceremony_id, &submission, &user_handle);
    let response = world.send_on_channel(attacker_conn.channel, finish_msg)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }
    Ok(())
}
