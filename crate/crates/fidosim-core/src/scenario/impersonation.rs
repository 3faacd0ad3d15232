//! RP impersonation: the victim is walked through a login that never touches
//! the genuine RP, then milked for personal information under the guise of
//! security checks. The full variant spoofs the domain and tampers with the
//! client's FIDO library; the degraded variant is plain phishing and does not
//! involve passkeys at all.

use serde_json::json;

use crate::client::{finish_auth_message, wire_str, FlowError};
use crate::scenario::{
    block_reason, build_world, finish, ScenarioConfig, ScenarioOutcome, ATTACKER, EP_PHISH,
    GATEWAY_ADDR, PHISH_ADDR, PHISH_URL, ROGUE_CA, RP_DOMAIN, RP_URL, VICTIM,
};
use crate::wire::{self, kind};
use crate::world::{FrontendMode, World};

pub(crate) fn run(config: &ScenarioConfig) -> ScenarioOutcome {
    let mut world = build_world(config, "rp_impersonation");
    let result = script(&mut world, config);
    if let Err(error) = result {
        world.flow_blocked(ATTACKER, &error);
    }
    finish(world, "rp_impersonation", None)
}

fn script(world: &mut World, config: &ScenarioConfig) -> Result<(), FlowError> {
    let toggles = &config.toggles;
    world.set_frontend_mode(FrontendMode::Impersonation);

    // A spoofed-domain run is requested when the infrastructure toggles are
    // on; otherwise this is the degraded link-phishing form.
    let full_variant = toggles.dns_override || toggles.install_rogue_ca;
    let conn = if full_variant {
        // Best-effort staging: denied privileged steps are recorded and the
        // attack simply proceeds without them (and fails accordingly).
        if toggles.install_rogue_ca {
            let _ = world.install_trust_anchor(ATTACKER, VICTIM, ROGUE_CA);
        }
        if toggles.route_override {
            let _ = world.apply_route_override(ATTACKER, VICTIM, GATEWAY_ADDR, EP_PHISH);
        }
        if toggles.dns_override {
            let _ = world.apply_dns_override(ATTACKER, VICTIM, RP_DOMAIN, PHISH_ADDR);
        }
        if toggles.flush_cache {
            let _ = world.flush_dns_cache(ATTACKER, VICTIM);
        }
        if toggles.victim_compromised {
            let _ = world.tamper_client_library(ATTACKER, VICTIM);
        }

        let conn = world.client_navigate(VICTIM, RP_URL)?;
        if conn.endpoint != EP_PHISH {
            return Err(FlowError::new(block_reason::VICTIM_REACHED_GENUINE_RP));
        }

        // The fake ceremony. With a tampered library the client reports
        // success without consulting the authenticator; without it, the real
        // CTAP path refuses sooner or later.
        let begin = wire::message(kind::BEGIN_AUTH, &[]);
        let response = world.send_on_channel(conn.channel, begin)?;
        if let Some(code) = wire::get_error(&response) {
            return Err(FlowError::new(code));
        }
        let challenge = wire_str(&response, "challenge")?;
        let rp_id = wire_str(&response, "rp_id")?;
        let ceremony_id = wire_str(&response, "ceremony_id")?;
        let assertion = world.client_webauthn_get(VICTIM, &conn, &rp_id, &challenge)?;
        let finish_msg = finish_auth_message(&ceremony_id, &assertion, "alice");
        let response = world.send_on_channel(conn.channel, finish_msg)?;
        if let Some(code) = wire::get_error(&response) {
            return Err(FlowError::new(code));
        }
        world.event(
            VICTIM,
            "client.believes_logged_in",
            json!({"origin": conn.origin_as_seen}),
        );
        conn
    } else {
        if !world.consult_policy(VICTIM, "follows_phishing_links") {
            return Err(FlowError::new(block_reason::USER_DECLINED));
        }
        let conn = world.client_navigate(VICTIM, PHISH_URL)?;
        world.event(
            ATTACKER,
            "attacker.frontend",
            json!({"action": "skip_passkey_ui", "note": "authentication-method independent"}),
        );
        conn
    };

    // "Security check": harvest personal information from the signed-in
    // looking page.
    world.client_submit_info(
        VICTIM,
        &conn,
        json!({
            "full_name": "Alice Example",
            "recovery_email": "alice.backup@example.net",
            "security_answer": "first pet: turing",
        }),
    )?;
    Ok(())
}
