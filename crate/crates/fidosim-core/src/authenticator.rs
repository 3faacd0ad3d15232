//! CTAP-side state machine: credential creation and assertion under an unlock
//! gate. An honest authenticator draws fresh key material; an infected one
//! derives everything from an attacker-known seed, which is the entire point
//! of the infected-authenticator attack.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};

use crate::ceremony::{AuthenticatorData, FLAG_USER_PRESENT, FLAG_USER_VERIFIED};
use crate::crypto::{self, KeyPair, PublicKey, Seed, Signature};
use crate::rng::SimRng;
use crate::rp::CredentialId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtapError {
    WrongPin,
    NotUnlocked,
    UserDeclined,
    NoCredential,
}

impl CtapError {
    pub fn code(&self) -> &'static str {
        match self {
            CtapError::WrongPin => "wrong_pin",
            CtapError::NotUnlocked => "not_unlocked",
            CtapError::UserDeclined => "user_declined",
            CtapError::NoCredential => "no_credential",
        }
    }
}

impl fmt::Display for CtapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfectionMode {
    /// Always derive `(seed, 0)`: the hardcoded-key variant. One passkey per
    /// RP is all the victim will ever get.
    FixedKey,
    /// Derive `(seed, n)` with a per-registration counter: the predictable
    /// key-sequence variant.
    IndexedKeys,
}

#[derive(Clone)]
pub struct InfectionConfig {
    pub seed: Seed,
    pub mode: InfectionMode,
    /// When set, every derived credential is also announced on the wire (a
    /// transcript-visible stand-in for key exfiltration; public half only).
    pub announce_exfiltration: bool,
}

impl fmt::Debug for InfectionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "InfectionConfig({:?}, exfil={})",
            self.mode, self.announce_exfiltration
        )
    }
}

/// CTAP request bodies. The client data hash is opaque here: the
/// authenticator signs it without ever inspecting the origin inside.
#[derive(Debug, Clone)]
pub enum CtapRequest {
    MakeCredential {
        rp_id: String,
        client_data_hash: [u8; 32],
        user_handle: Option<String>,
    },
    GetAssertion {
        rp_id: String,
        client_data_hash: [u8; 32],
    },
}

#[derive(Debug, Clone)]
pub enum CtapResponse {
    MakeCredential {
        credential_id: CredentialId,
        public_key: PublicKey,
        authenticator_data: AuthenticatorData,
        /// Present only when an infected authenticator announces the key.
        exfiltration: Option<ExfilNotice>,
    },
    GetAssertion {
        credential_id: CredentialId,
        user_handle: Option<String>,
        authenticator_data: AuthenticatorData,
        signature: Signature,
    },
}

/// Public material an infected authenticator leaks on creation.
#[derive(Debug, Clone)]
pub struct ExfilNotice {
    pub rp_id: String,
    pub credential_id: CredentialId,
    pub public_key: PublicKey,
}

#[derive(Clone)]
struct StoredCredential {
    credential_id: CredentialId,
    keypair: KeyPair,
    user_handle: Option<String>,
    sign_count: u32,
}

/// One software authenticator instance. `Clone` exists so tests can model a
/// cloned device; the relying party's counter check is what has to catch that.
#[derive(Clone)]
pub struct Authenticator {
    pin: String,
    unlocked: bool,
    /// Whether the device owner approves prompts; scenario policy sets this.
    pub user_approves: bool,
    infection: Option<InfectionConfig>,
    next_key_index: u32,
    store: BTreeMap<String, Vec<StoredCredential>>,
}

impl Authenticator {
    pub fn new_honest(pin: &str) -> Self {
        Authenticator {
            pin: pin.to_string(),
            unlocked: false,
            user_approves: true,
            infection: None,
            next_key_index: 0,
            store: BTreeMap::new(),
        }
    }

    pub fn new_infected(pin: &str, infection: InfectionConfig) -> Self {
        Authenticator {
            infection: Some(infection),
            ..Authenticator::new_honest(pin)
        }
    }

    pub fn is_infected(&self) -> bool {
        self.infection.is_some()
    }

    /// PIN check; a successful unlock is good for exactly one operation.
    pub fn unlock(&mut self, pin: &str) -> Result<(), CtapError> {
        if pin != self.pin {
            return Err(CtapError::WrongPin);
        }
        self.unlocked = true;
        Ok(())
    }

    fn consume_unlock(&mut self) -> Result<(), CtapError> {
        if !self.unlocked {
            return Err(CtapError::NotUnlocked);
        }
        self.unlocked = false;
        Ok(())
    }

    fn flags() -> u8 {
        FLAG_USER_PRESENT | FLAG_USER_VERIFIED
    }

    pub fn make_credential(
        &mut self,
        req: &CtapRequest,
        rng: &mut SimRng,
    ) -> Result<CtapResponse, CtapError> {
        let CtapRequest::MakeCredential {
            rp_id, user_handle, ..
        } = req
        else {
            return Err(CtapError::NoCredential);
        };
        self.consume_unlock()?;
        if !self.user_approves {
            return Err(CtapError::UserDeclined);
        }

        let (credential_id, keypair, exfiltration) = match self.infection.clone() {
            None => (
                CredentialId(rng.bytes16()),
                crypto::generate_keypair(rng),
                None,
            ),
            Some(cfg) => {
                let index = match cfg.mode {
                    InfectionMode::FixedKey => 0,
                    InfectionMode::IndexedKeys => {
                        let i = self.next_key_index;
                        self.next_key_index += 1;
                        i
                    }
                };
                let keypair = crypto::derive_seeded_keypair(&cfg.seed, index);
                let credential_id = infected_credential_id(&cfg.seed, index);
                let exfil = cfg.announce_exfiltration.then(|| ExfilNotice {
                    rp_id: rp_id.clone(),
                    credential_id,
                    public_key: keypair.public,
                });
                (credential_id, keypair, exfil)
            }
        };

        let entries = self.store.entry(rp_id.clone()).or_default();
        // A fixed-key infection regenerates the same credential; keep the
        // existing entry (and its counter) instead of resetting it.
        if !entries.iter().any(|c| c.credential_id == credential_id) {
            entries.push(StoredCredential {
                credential_id,
                keypair: keypair.clone(),
                user_handle: user_handle.clone(),
                sign_count: 0,
            });
        }

        Ok(CtapResponse::MakeCredential {
            credential_id,
            public_key: keypair.public,
            authenticator_data: AuthenticatorData::new(rp_id, Self::flags(), 0),
            exfiltration,
        })
    }

    pub fn get_assertion(&mut self, req: &CtapRequest) -> Result<CtapResponse, CtapError> {
        let CtapRequest::GetAssertion {
            rp_id,
            client_data_hash,
        } = req
        else {
            return Err(CtapError::NoCredential);
        };
        self.consume_unlock()?;
        if !self.user_approves {
            return Err(CtapError::UserDeclined);
        }
        // Domain isolation: only credentials scoped to the requested RP ID
        // are eligible. No entry means a flat refusal.
        let entries = self.store.get_mut(rp_id).ok_or(CtapError::NoCredential)?;
        let credential = entries.last_mut().ok_or(CtapError::NoCredential)?;

        credential.sign_count += 1;
        let authenticator_data =
            AuthenticatorData::new(rp_id, Self::flags(), credential.sign_count);
        let message = crate::ceremony::signed_message(&authenticator_data, client_data_hash);
        Ok(CtapResponse::GetAssertion {
            credential_id: credential.credential_id,
            user_handle: credential.user_handle.clone(),
            authenticator_data,
            signature: credential.keypair.sign(&message),
        })
    }

    pub fn credential_count(&self, rp_id: &str) -> usize {
        self.store.get(rp_id).map(|v| v.len()).unwrap_or(0)
    }

    pub fn has_credential_for(&self, rp_id: &str) -> bool {
        self.credential_count(rp_id) > 0
    }

    /// Every keypair held by this device, for transcript confidentiality
    /// scans. Private bytes still never leave the crypto module.
    pub fn audit_keypairs(&self) -> impl Iterator<Item = &KeyPair> {
        self.store.values().flatten().map(|c| &c.keypair)
    }
}

impl fmt::Debug for Authenticator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Authenticator(infected={}, rps={})",
            self.is_infected(),
            self.store.len()
        )
    }
}

/// Credential IDs an infected authenticator hands out: first 16 bytes of
/// SHA-256(seed ‖ "cid" ‖ index_be32). The attacker recomputes these offline.
pub fn infected_credential_id(seed: &Seed, index: u32) -> CredentialId {
    let mut h = Sha256::new();
    h.update(seed.bytes);
    h.update(b"cid");
    h.update(index.to_be_bytes());
    let digest: [u8; 32] = h.finalize().into();
    CredentialId(digest[..16].try_into().unwrap())
}
