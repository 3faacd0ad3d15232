//! Passkey reduction: the phishing page claims passkey login is broken and
//! asks for the password instead. No passkey material is ever in play; the
//! attack stands or falls with the victim's willingness to fall back.

use crate::client::FlowError;
use crate::scenario::{
    block_reason, build_world, finish, ScenarioConfig, ScenarioOutcome, ALICE, ALICE_PASSWORD,
    PHISH_URL, VICTIM,
};
use crate::wire::{self, kind};
use crate::world::{FrontendMode, World};

pub(crate) fn run(config: &ScenarioConfig) -> ScenarioOutcome {
    let mut world = build_world(config, "passkey_reduction");
    let result = script(&mut world, config);
    if let Err(error) = result {
        world.flow_blocked(VICTIM, &error);
    }
    finish(world, "passkey_reduction", None)
}

fn script(world: &mut World, config: &ScenarioConfig) -> Result<(), FlowError> {
    world.set_frontend_mode(FrontendMode::CredentialPhishing);

    if !world.consult_policy(VICTIM, "follows_phishing_links") {
        return Err(FlowError::new(block_reason::USER_DECLINED));
    }
    let conn = world.client_navigate(VICTIM, PHISH_URL)?;

    // The victim picks passkey login; the fake RP signals an error.
    let begin = wire::message(kind::BEGIN_AUTH, &[]);
    let response = world.send_on_channel(conn.channel, begin)?;
    debug_assert_eq!(wire::get_error(&response), Some("passkey_unavailable"));

    if !config.toggles.password_fallback_enabled {
        // Passkey-only account: there is no password to phish.
        return Err(FlowError::new(block_reason::PASSWORD_FALLBACK_DISABLED));
    }
    world.client_submit_password(VICTIM, &conn, ALICE, ALICE_PASSWORD)?;
    Ok(())
}
