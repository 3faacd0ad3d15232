//! The relying party: account store, credential store, pending-ceremony store
//! and the server halves of the registration and authentication ceremonies,
//! plus password login and the add-passkey endpoint.
//!
//! The whole store is one logically-locked state machine; callers hold
//! `&mut RelyingParty`, which serializes every operation.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::ceremony::{encode_challenge, AuthenticatorData, ClientData, ClientDataType};
use crate::crypto::{self, PublicKey};
use crate::rng::SimRng;

pub type Tick = u64;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CredentialId(#[serde(with = "hex_bytes16")] pub [u8; 16]);

impl CredentialId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        Some(CredentialId(hex::decode(s).ok()?.try_into().ok()?))
    }
}

impl fmt::Debug for CredentialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CredentialId({})", self.to_hex())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionToken(#[serde(with = "hex_bytes16")] pub [u8; 16]);

impl SessionToken {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        Some(SessionToken(hex::decode(s).ok()?.try_into().ok()?))
    }
}

impl fmt::Debug for SessionToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionToken({})", self.to_hex())
    }
}

/// Opaque ceremony handle; the temporary value that binds one authentication
/// or registration exchange.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CeremonyId(pub String);

impl CeremonyId {
    fn new(rng: &mut SimRng) -> Self {
        CeremonyId(hex::encode(rng.bytes16()))
    }
}

impl fmt::Debug for CeremonyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CeremonyId({})", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CeremonyKind {
    Registration,
    Authentication,
}

/// Single-use random challenge bound to one pending ceremony.
#[derive(Debug, Clone)]
pub struct Challenge {
    pub bytes: [u8; 32],
    pub issued_at: Tick,
    pub ceremony_id: CeremonyId,
}

#[derive(Debug, Clone)]
pub struct PendingCeremony {
    pub ceremony_id: CeremonyId,
    pub challenge: [u8; 32],
    pub kind: CeremonyKind,
    pub user_handle: Option<String>,
    pub expires_at: Tick,
}

/// Server-side credential record.
#[derive(Debug, Clone)]
pub struct Credential {
    pub credential_id: CredentialId,
    pub rp_id: String,
    pub user_handle: String,
    pub public_key: PublicKey,
    pub sign_count: u32,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub token: SessionToken,
    pub user_handle: String,
    pub established_at: Tick,
}

/// The attestation body of a finished registration. Attestation runs in
/// "none" mode: structure is checked, no certificate chain is involved.
#[derive(Debug, Clone)]
pub struct RegistrationResponse {
    pub credential_id: CredentialId,
    pub public_key: PublicKey,
    pub authenticator_data: AuthenticatorData,
}

#[derive(Debug, Clone)]
pub struct RegistrationChallenge {
    pub ceremony_id: CeremonyId,
    pub challenge: Challenge,
    pub rp_id: String,
    pub user_handle: String,
}

#[derive(Debug, Clone)]
pub struct AuthenticationChallenge {
    pub ceremony_id: CeremonyId,
    pub challenge: Challenge,
    pub rp_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpError {
    UnknownUser,
    UnknownCeremony,
    ChallengeMismatch,
    OriginMismatch,
    DuplicateCredentialId,
    UnknownCredential,
    InvalidSignature,
    CloneSuspected,
    UserMismatch,
    BadCredentials,
    InvalidSession,
    RpIdHashMismatch,
    ClientDataTypeMismatch,
}

impl RpError {
    pub fn code(&self) -> &'static str {
        match self {
            RpError::UnknownUser => "unknown_user",
            RpError::UnknownCeremony => "unknown_ceremony",
            RpError::ChallengeMismatch => "challenge_mismatch",
            RpError::OriginMismatch => "origin_mismatch",
            RpError::DuplicateCredentialId => "duplicate_credential_id",
            RpError::UnknownCredential => "unknown_credential",
            RpError::InvalidSignature => "invalid_signature",
            RpError::CloneSuspected => "clone_suspected",
            RpError::UserMismatch => "user_mismatch",
            RpError::BadCredentials => "bad_credentials",
            RpError::InvalidSession => "invalid_session",
            RpError::RpIdHashMismatch => "rp_id_hash_mismatch",
            RpError::ClientDataTypeMismatch => "client_data_type_mismatch",
        }
    }
}

impl fmt::Display for RpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone)]
pub struct RpConfig {
    /// Domain credentials are scoped to, e.g. "linear.app".
    pub rp_id: String,
    /// Canonical origin finish_* responses must carry, e.g. "https://linear.app".
    pub origin: String,
    pub challenge_ttl_ticks: Tick,
    pub session_ttl_ticks: Tick,
    /// When false the RP is passkey-only: password_login always fails.
    pub password_login_enabled: bool,
}

impl RpConfig {
    pub fn new(rp_id: &str, origin: &str) -> Self {
        RpConfig {
            rp_id: rp_id.to_string(),
            origin: origin.to_string(),
            challenge_ttl_ticks: 120,
            session_ttl_ticks: 10_000,
            password_login_enabled: true,
        }
    }
}

#[derive(Debug, Clone)]
struct Account {
    password: Option<String>,
}

#[derive(Debug)]
pub struct RelyingParty {
    config: RpConfig,
    accounts: BTreeMap<String, Account>,
    credentials: BTreeMap<CredentialId, Credential>,
    pending: BTreeMap<CeremonyId, PendingCeremony>,
    sessions: BTreeMap<SessionToken, Session>,
}

impl RelyingParty {
    pub fn new(config: RpConfig) -> Self {
        RelyingParty {
            config,
            accounts: BTreeMap::new(),
            credentials: BTreeMap::new(),
            pending: BTreeMap::new(),
            sessions: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &RpConfig {
        &self.config
    }

    // -- fixtures ---------------------------------------------------------

    pub fn create_account(&mut self, user_handle: &str, password: Option<&str>) {
        self.accounts.insert(
            user_handle.to_string(),
            Account {
                password: password.map(|p| p.to_string()),
            },
        );
    }

    pub fn set_password(&mut self, user_handle: &str, password: &str) -> Result<(), RpError> {
        let account = self
            .accounts
            .get_mut(user_handle)
            .ok_or(RpError::UnknownUser)?;
        account.password = Some(password.to_string());
        Ok(())
    }

    /// Session minted outside any ceremony; test-fixture use only.
    pub fn fixture_session(
        &mut self,
        user_handle: &str,
        rng: &mut SimRng,
        now: Tick,
    ) -> Result<Session, RpError> {
        if !self.accounts.contains_key(user_handle) {
            return Err(RpError::UnknownUser);
        }
        Ok(self.issue_session(user_handle, rng, now))
    }

    // -- registration ------------------------------------------------------

    /// Deliberately enumerable: UnknownUser is a distinct error so scenario
    /// transcripts stay legible. A production RP would not reveal this.
    pub fn begin_registration(
        &mut self,
        user_handle: &str,
        rng: &mut SimRng,
        now: Tick,
    ) -> Result<RegistrationChallenge, RpError> {
        if !self.accounts.contains_key(user_handle) {
            return Err(RpError::UnknownUser);
        }
        let (ceremony_id, challenge) =
            self.store_pending(CeremonyKind::Registration, Some(user_handle), rng, now);
        Ok(RegistrationChallenge {
            ceremony_id,
            challenge,
            rp_id: self.config.rp_id.clone(),
            user_handle: user_handle.to_string(),
        })
    }

    pub fn finish_registration(
        &mut self,
        ceremony_id: &CeremonyId,
        client_data: &ClientData,
        response: &RegistrationResponse,
    ) -> Result<Credential, RpError> {
        let pending = self.take_pending(ceremony_id, CeremonyKind::Registration)?;
        if client_data.kind != ClientDataType::Create {
            return Err(RpError::ClientDataTypeMismatch);
        }
        if client_data.challenge != encode_challenge(&pending.challenge) {
            return Err(RpError::ChallengeMismatch);
        }
        self.check_origin(client_data)?;
        if response.authenticator_data.rp_id_hash != crypto::hash(self.config.rp_id.as_bytes()) {
            return Err(RpError::RpIdHashMismatch);
        }
        if self.credentials.contains_key(&response.credential_id) {
            return Err(RpError::DuplicateCredentialId);
        }
        let user_handle = pending.user_handle.ok_or(RpError::UnknownUser)?;
        let credential = Credential {
            credential_id: response.credential_id,
            rp_id: self.config.rp_id.clone(),
            user_handle,
            public_key: response.public_key,
            sign_count: response.authenticator_data.sign_count,
        };
        self.credentials
            .insert(credential.credential_id, credential.clone());
        Ok(credential)
    }

    // -- authentication ----------------------------------------------------

    /// Account-agnostic when `user_handle` is `None`: the identity is
    /// established by the assertion that finishes the ceremony.
    pub fn begin_authentication(
        &mut self,
        user_handle: Option<&str>,
        rng: &mut SimRng,
        now: Tick,
    ) -> AuthenticationChallenge {
        let (ceremony_id, challenge) =
            self.store_pending(CeremonyKind::Authentication, user_handle, rng, now);
        AuthenticationChallenge {
            ceremony_id,
            challenge,
            rp_id: self.config.rp_id.clone(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn finish_authentication(
        &mut self,
        ceremony_id: &CeremonyId,
        client_data: &ClientData,
        authenticator_data: &AuthenticatorData,
        credential_id: &CredentialId,
        user_handle: &str,
        signature: &[u8],
        rng: &mut SimRng,
        now: Tick,
    ) -> Result<Session, RpError> {
        let pending = self.take_pending(ceremony_id, CeremonyKind::Authentication)?;
        if client_data.kind != ClientDataType::Get {
            return Err(RpError::ClientDataTypeMismatch);
        }
        if client_data.challenge != encode_challenge(&pending.challenge) {
            return Err(RpError::ChallengeMismatch);
        }
        self.check_origin(client_data)?;
        let credential = self
            .credentials
            .get(credential_id)
            .ok_or(RpError::UnknownCredential)?;
        if let Some(bound) = &pending.user_handle {
            if bound != user_handle {
                return Err(RpError::UserMismatch);
            }
        }
        if credential.user_handle != user_handle {
            return Err(RpError::UserMismatch);
        }
        if authenticator_data.rp_id_hash != crypto::hash(credential.rp_id.as_bytes()) {
            return Err(RpError::RpIdHashMismatch);
        }
        let message = crate::ceremony::signed_message(authenticator_data, &client_data.hash());
        if !crypto::verify_bytes(&credential.public_key, &message, signature) {
            return Err(RpError::InvalidSignature);
        }
        if authenticator_data.sign_count <= credential.sign_count {
            return Err(RpError::CloneSuspected);
        }
        let user = credential.user_handle.clone();
        let asserted = authenticator_data.sign_count;
        self.credentials
            .get_mut(credential_id)
            .expect("credential present")
            .sign_count = asserted;
        Ok(self.issue_session(&user, rng, now))
    }

    // -- password fallback ---------------------------------------------------

    pub fn password_login(
        &mut self,
        user_handle: &str,
        password: &str,
        rng: &mut SimRng,
        now: Tick,
    ) -> Result<Session, RpError> {
        if !self.config.password_login_enabled {
            return Err(RpError::BadCredentials);
        }
        let matches = self
            .accounts
            .get(user_handle)
            .and_then(|a| a.password.as_deref())
            .map(|stored| stored == password)
            .unwrap_or(false);
        if !matches {
            return Err(RpError::BadCredentials);
        }
        Ok(self.issue_session(user_handle, rng, now))
    }

    /// Registration ceremony pre-bound to the session's account: the
    /// "add a passkey while logged in" endpoint.
    pub fn add_passkey_to_account(
        &mut self,
        token: &SessionToken,
        rng: &mut SimRng,
        now: Tick,
    ) -> Result<RegistrationChallenge, RpError> {
        let session = self.sessions.get(token).ok_or(RpError::InvalidSession)?;
        if session.established_at + self.config.session_ttl_ticks < now {
            return Err(RpError::InvalidSession);
        }
        let user_handle = session.user_handle.clone();
        let (ceremony_id, challenge) =
            self.store_pending(CeremonyKind::Registration, Some(&user_handle), rng, now);
        Ok(RegistrationChallenge {
            ceremony_id,
            challenge,
            rp_id: self.config.rp_id.clone(),
            user_handle,
        })
    }

    // -- views ---------------------------------------------------------------

    pub fn credential(&self, id: &CredentialId) -> Option<&Credential> {
        self.credentials.get(id)
    }

    pub fn credentials_for_user(&self, user_handle: &str) -> Vec<&Credential> {
        self.credentials
            .values()
            .filter(|c| c.user_handle == user_handle)
            .collect()
    }

    pub fn session(&self, token: &SessionToken) -> Option<&Session> {
        self.sessions.get(token)
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    // -- internals -------------------------------------------------------------

    fn store_pending(
        &mut self,
        kind: CeremonyKind,
        user_handle: Option<&str>,
        rng: &mut SimRng,
        now: Tick,
    ) -> (CeremonyId, Challenge) {
        let ceremony_id = CeremonyId::new(rng);
        let bytes = rng.bytes32();
        let pending = PendingCeremony {
            ceremony_id: ceremony_id.clone(),
            challenge: bytes,
            kind,
            user_handle: user_handle.map(|u| u.to_string()),
            expires_at: now + self.config.challenge_ttl_ticks,
        };
        self.pending.insert(ceremony_id.clone(), pending);
        let challenge = Challenge {
            bytes,
            issued_at: now,
            ceremony_id: ceremony_id.clone(),
        };
        (ceremony_id, challenge)
    }

    /// Consume the pending entry. Any finish attempt uses it up, which is what
    /// makes challenges single-use; expired entries count as unknown.
    fn take_pending(
        &mut self,
        ceremony_id: &CeremonyId,
        kind: CeremonyKind,
    ) -> Result<PendingCeremony, RpError> {
        let pending = self
            .pending
            .remove(ceremony_id)
            .ok_or(RpError::UnknownCeremony)?;
        if pending.kind != kind {
            return Err(RpError::UnknownCeremony);
        }
        Ok(pending)
    }

    /// Expiry sweep, driven by the simulation clock.
    pub fn expire_pending(&mut self, now: Tick) {
        self.pending.retain(|_, p| p.expires_at >= now);
    }

    fn check_origin(&self, client_data: &ClientData) -> Result<(), RpError> {
        if canonicalize_origin(&client_data.origin) != canonicalize_origin(&self.config.origin) {
            return Err(RpError::OriginMismatch);
        }
        Ok(())
    }

    fn issue_session(&mut self, user_handle: &str, rng: &mut SimRng, now: Tick) -> Session {
        let session = Session {
            token: SessionToken(rng.bytes16()),
            user_handle: user_handle.to_string(),
            established_at: now,
        };
        self.sessions.insert(session.token, session.clone());
        session
    }
}

/// Lowercase scheme and host; path and everything after stays untouched.
pub fn canonicalize_origin(origin: &str) -> String {
    match origin.split_once("://") {
        Some((scheme, rest)) => {
            let mut out = scheme.to_lowercase();
            out.push_str("://");
            out.push_str(&rest.to_lowercase());
            out
        }
        None => origin.to_lowercase(),
    }
}

mod hex_bytes16 {
    use alloc::string::String;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 16], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<[u8; 16], D::Error> {
        let s = String::deserialize(de)?;
        let v = hex::decode(&s).map_err(serde::de::Error::custom)?;
        v.try_into()
            .map_err(|_| serde::de::Error::custom("expected 16 bytes"))
    }
}
