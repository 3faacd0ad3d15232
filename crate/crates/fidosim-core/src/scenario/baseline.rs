//! Honest registration followed by honest authentication; no adversary acts.

use crate::client::FlowError;
use crate::scenario::{
    build_world, finish, ScenarioConfig, ScenarioOutcome, ALICE, RP_URL, VICTIM,
};

pub(crate) fn run(config: &ScenarioConfig) -> ScenarioOutcome {
    let mut world = build_world(config, "baseline");
    let result = (|| -> Result<(), FlowError> {
        let conn = world.client_navigate(VICTIM, RP_URL)?;
        world.flow_register(VICTIM, &conn, ALICE)?;
        world.flow_passkey_login(VICTIM, &conn, Some(ALICE))?;
        Ok(())
    })();
    if let Err(error) = result {
        world.flow_blocked(VICTIM, &error);
    }
    finish(world, "baseline", None)
}
