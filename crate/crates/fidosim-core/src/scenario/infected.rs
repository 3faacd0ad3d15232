//! Infected authenticator: the victim's device derives its "fresh" passkeys
//! from a seed the attacker baked into the binary. After one honest-looking
//! registration, a separate attacker context derives the same key material
//! and logs in as the victim.

use alloc::string::ToString;

use serde_json::json;

use crate::authenticator::infected_credential_id;
use crate::ceremony::{
    AuthenticatorData, ClientData, ClientDataType, FLAG_USER_PRESENT, FLAG_USER_VERIFIED,
};
use crate::client::{finish_auth_message, wire_str, AssertionSubmission, FlowError};
use crate::crypto::derive_seeded_keypair;
use crate::scenario::{
    build_world, finish, InfectionSetting, ScenarioConfig, ScenarioOutcome, ALICE, ATTACKER,
    INFECTED_AUTHENTICATOR_LABELS, RP_DOMAIN, RP_URL, VICTIM,
};
use crate::wire::{self, kind};
use crate::world::World;

pub(crate) fn run(config: &ScenarioConfig) -> ScenarioOutcome {
    let mut world = build_world(config, "infected_authenticator");
    let result = script(&mut world, config);
    if let Err(error) = result {
        world.flow_blocked(ATTACKER, &error);
    }
    finish(
        world,
        "infected_authenticator",
        Some(INFECTED_AUTHENTICATOR_LABELS),
    )
}

fn script(world: &mut World, config: &ScenarioConfig) -> Result<(), FlowError> {
    // The victim registers normally; an infected device silently derives the
    // keypair from the planted seed instead of drawing fresh randomness.
    let conn = world.client_navigate(VICTIM, RP_URL)?;
    world.flow_register(VICTIM, &conn, ALICE)?;

    // A fixed-key infection can never mint a second credential: the RP sees
    // the same credential id again and refuses.
    if config.toggles.infection_mode == InfectionSetting::Fixed {
        let second = world.flow_register(VICTIM, &conn, ALICE);
        let note = match &second {
            Ok(_) => "ok".to_string(),
            Err(e) => e.code.clone(),
        };
        world.event(VICTIM, "attack.note", json!({"second_registration": note}));
    }

    // Attacker context: re-derive key and credential id from the known seed.
    let seed = world.attacker.known_seeds[0];
    let keypair = derive_seeded_keypair(&seed, 0);
    let credential_id = infected_credential_id(&seed, 0);
    let public_key_hex = keypair.public.to_hex();
    world
        .attacker
        .derived_keypairs
        .push((0, keypair.clone(), credential_id));
    world.event(
        ATTACKER,
        "attacker.derived_keypair",
        json!({
            "index": 0,
            "public_key": public_key_hex,
            "credential_id": credential_id.to_hex(),
        }),
    );

    // Log in as the victim from the attacker's own machine, over an honest
    // channel to the genuine RP.
    let attacker_conn = world.client_navigate(ATTACKER, RP_URL)?;
    let begin = wire::message(kind::BEGIN_AUTH, &[]);
    let response = world.send_on_channel(attacker_conn.channel, begin)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }
    let ceremony_id = wire_str(&response, "ceremony_id")?;
    let challenge = wire_str(&response, "challenge")?;

    let client_data = ClientData {
        kind: ClientDataType::Get,
        challenge,
        origin: attacker_conn.origin_as_seen.clone(),
    };
    let authenticator_data =
        AuthenticatorData::new(RP_DOMAIN, FLAG_USER_PRESENT | FLAG_USER_VERIFIED, 1);
    let message = crate::ceremony::signed_message(&authenticator_data, &client_data.hash());
    let signature = keypair.sign(&message);
    let submission = AssertionSubmission {
        client_data,
        credential_id: credential_id.to_hex(),
        user_handle: Some(ALICE.to_string()),
        authenticator_data: authenticator_data.to_hex(),
        signature: signature.to_hex(),
    };
    let finish_msg = finish_auth_message(&ceremony_id, &submission, ALICE);
    let response = world.send_on_channel(attacker_conn.channel, finish_msg)?;
    if let Some(code) = wire::get_error(&response) {
        return Err(FlowError::new(code));
    }
    Ok(())
}
