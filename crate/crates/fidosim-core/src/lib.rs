//! Deterministic FIDO2/WebAuthn security testbed.
//!
//! This crate models the full passkey stack (relying party, browser client,
//! CTAP authenticator) on top of a simulated network fabric (DNS, routes,
//! certificate trust, interceptors). Attack scenarios script an adversary
//! against that world and return a verdict plus an ordered transcript of every
//! ceremony step and attacker action.
//!
//! Everything is driven from a single seed: identical `(scenario, config,
//! seed)` triples produce byte-identical transcripts. There is no real I/O
//! here; the companion CLI crate carries file formats and the command line.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod authenticator;
pub mod ceremony;
pub mod client;
pub mod crypto;
pub mod fabric;
pub mod rng;
pub mod rp;
pub mod scenario;
pub mod transcript;
pub mod wire;
pub mod world;

pub use scenario::{
    default_config, run_scenario, scenario_names, ScenarioConfig, ScenarioError, ScenarioOutcome,
    Verdict,
};
pub use transcript::{Transcript, TranscriptEvent};
