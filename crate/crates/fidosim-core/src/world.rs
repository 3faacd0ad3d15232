//! One simulated world: the fabric, the relying party, per-host
//! authenticators and clients, the attacker's working state and the
//! transcript. All message traffic funnels through [`World::send_on_channel`],
//! where interceptors get their turn before an endpoint handler runs.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::{json, Value};

use crate::authenticator::{Authenticator, CtapRequest, CtapResponse};
use crate::ceremony::{AuthenticatorData, ClientData, ClientDataType};
use crate::client::ClientConfig;
use crate::crypto::{KeyPair, PublicKey, Seed};
use crate::fabric::{
    Channel, ChannelId, Fabric, FabricError, HostId, Interceptor, InterceptorBehavior,
    InterceptorSelector, Scheme,
};
use crate::rng::SimRng;
use crate::rp::{CeremonyId, CredentialId, RelyingParty, SessionToken, Tick};
use crate::transcript::{Transcript, TranscriptEvent};
use crate::wire::{self, kind};

/// What the attacker's frontend pretends to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontendMode {
    /// Serves nothing useful; landing page only.
    Inactive,
    /// Relays a captured genuine challenge and harvests the signed response.
    DeceptionRelay,
    /// Signals a passkey error and collects the password fallback.
    CredentialPhishing,
    /// Fakes the whole ceremony, then asks for personal information.
    Impersonation,
}

#[derive(Debug, Clone)]
pub struct RelayedChallenge {
    pub ceremony_id: String,
    pub challenge: String,
    pub rp_id: String,
}

/// Everything the adversary knows or has harvested.
pub struct AttackerState {
    pub host: HostId,
    pub frontend_mode: FrontendMode,
    pub captured_messages: Vec<Value>,
    pub relay: Option<RelayedChallenge>,
    pub captured_assertion: Option<Value>,
    pub captured_passwords: Vec<(String, String)>,
    pub captured_info: Vec<Value>,
    pub known_seeds: Vec<Seed>,
    pub derived_keypairs: Vec<(u32, KeyPair, CredentialId)>,
    /// Original credential id / public key seen when a registration response
    /// was tampered with in transit.
    pub replaced_credential: Option<(CredentialId, PublicKey)>,
}

impl AttackerState {
    pub fn new(host: &str) -> Self {
        AttackerState {
            host: host.to_string(),
            frontend_mode: FrontendMode::Inactive,
            captured_messages: Vec::new(),
            relay: None,
            captured_assertion: None,
            captured_passwords: Vec::new(),
            captured_info: Vec::new(),
            known_seeds: Vec::new(),
            derived_keypairs: Vec::new(),
            replaced_credential: None,
        }
    }

    /// Render the capture log for containment checks.
    pub fn capture_log_json(&self) -> String {
        let passwords: Vec<Value> = self
            .captured_passwords
            .iter()
            .map(|(u, p)| json!({"user": u, "password": p}))
            .collect();
        json!({
            "messages": self.captured_messages,
            "assertion": self.captured_assertion,
            "passwords": passwords,
            "info": self.captured_info,
        })
        .to_string()
    }
}

pub struct World {
    pub fabric: Fabric,
    pub rp: RelyingParty,
    pub authenticators: BTreeMap<HostId, Authenticator>,
    pub clients: BTreeMap<HostId, ClientConfig>,
    pub attacker: AttackerState,
    pub transcript: Transcript,
    pub rng: SimRng,
    pub victim_user: String,
    clock: Tick,
    next_seq: u64,
    /// Keypairs created outside any authenticator, kept for the
    /// confidentiality scan.
    pub loose_keypairs: Vec<KeyPair>,
}

impl World {
    pub fn new(fabric: Fabric, rp: RelyingParty, attacker_host: &str, rng: SimRng) -> Self {
        World {
            fabric,
            rp,
            authenticators: BTreeMap::new(),
            clients: BTreeMap::new(),
            attacker: AttackerState::new(attacker_host),
            transcript: Transcript::new(),
            rng,
            victim_user: String::new(),
            clock: 0,
            next_seq: 0,
            loose_keypairs: Vec::new(),
        }
    }

    pub fn clock(&self) -> Tick {
        self.clock
    }

    /// One logical action boundary: the clock moves, expired ceremonies go.
    pub fn advance(&mut self) {
        self.clock += 1;
        self.rp.expire_pending(self.clock);
    }

    pub fn advance_by(&mut self, ticks: Tick) {
        for _ in 0..ticks {
            self.advance();
        }
    }

    pub fn event(&mut self, actor: &str, event_kind: &str, payload: Value) {
        self.event_labeled(actor, event_kind, None, payload);
    }

    pub fn event_labeled(
        &mut self,
        actor: &str,
        event_kind: &str,
        step_label: Option<&str>,
        payload: Value,
    ) {
        self.next_seq += 1;
        self.transcript.push(TranscriptEvent {
            seq: self.next_seq,
            tick: self.clock,
            actor: actor.to_string(),
            kind: event_kind.to_string(),
            step_label: step_label.map(|s| s.to_string()),
            payload,
        });
    }

    /// Every keypair that exists anywhere in this world.
    pub fn audit_keypairs(&self) -> Vec<&KeyPair> {
        self.authenticators
            .values()
            .flat_map(|a| a.audit_keypairs())
            .chain(self.attacker.derived_keypairs.iter().map(|(_, kp, _)| kp))
            .chain(self.loose_keypairs.iter())
            .collect()
    }

    // -- scenario fixtures -----------------------------------------------------

    pub fn set_frontend_mode(&mut self, mode: FrontendMode) {
        self.advance();
        self.attacker.frontend_mode = mode;
        let label = match mode {
            FrontendMode::Inactive => "inactive",
            FrontendMode::DeceptionRelay => "deception_relay",
            FrontendMode::CredentialPhishing => "credential_phishing",
            FrontendMode::Impersonation => "impersonation",
        };
        let actor = self.attacker.host.clone();
        self.event(&actor, "attacker.frontend_mode", json!({ "mode": label }));
    }

    /// Out-of-band session (the "user is already logged in" precondition).
    pub fn fixture_session(&mut self, user: &str) -> Result<SessionToken, crate::rp::RpError> {
        self.advance();
        let now = self.clock;
        let session = self.rp.fixture_session(user, &mut self.rng, now)?;
        self.event("rp-server", "rp.fixture_session", json!({ "user": user }));
        Ok(session.token)
    }

    pub fn fixture_set_password(&mut self, actor: &str, user: &str, password: &str) {
        self.advance();
        let _ = self.rp.set_password(user, password);
        self.event(actor, "rp.password_changed", json!({ "user": user }));
    }

    /// Physical-range check for proximity transports.
    pub fn proximity_check(&mut self, a: &str, b: &str) -> bool {
        self.advance();
        let in_range = self.fabric.host(a).segment == self.fabric.host(b).segment;
        self.event(a, "relay.pairing", json!({"peer": b, "in_range": in_range}));
        in_range
    }

    // -- fabric action wrappers (logged) ------------------------------------

    pub fn compromise_host(&mut self, actor: &str, target: &str) {
        self.advance();
        self.fabric.host_mut(target).compromised = true;
        self.event(actor, "host.compromised", json!({ "target": target }));
    }

    pub fn tamper_client_library(&mut self, actor: &str, target: &str) -> Result<(), FabricError> {
        self.advance();
        if !self.fabric.host(target).compromised {
            return Err(FabricError::PrivilegeError);
        }
        if let Some(client) = self.clients.get_mut(target) {
            client.forced_success = true;
        }
        self.event(
            actor,
            "client.library_tampered",
            json!({ "target": target }),
        );
        Ok(())
    }

    pub fn apply_dns_override(
        &mut self,
        actor: &str,
        target: &str,
        pattern: &str,
        address: &str,
    ) -> Result<(), FabricError> {
        self.advance();
        match self
            .fabric
            .apply_dns_override(actor, target, pattern, address)
        {
            Ok(ev) => {
                self.event(
                    actor,
                    "dns.override",
                    json!({
                        "target": target,
                        "pattern": pattern,
                        "address": address,
                        "target_compromised": ev.target_compromised,
                        "same_segment": ev.same_segment,
                    }),
                );
                Ok(())
            }
            Err(e) => {
                self.log_denied(actor, "dns.override", target, e);
                Err(e)
            }
        }
    }

    pub fn apply_route_override(
        &mut self,
        actor: &str,
        target: &str,
        address: &str,
        endpoint: &str,
    ) -> Result<(), FabricError> {
        self.advance();
        match self
            .fabric
            .apply_route_override(actor, target, address, endpoint)
        {
            Ok(ev) => {
                self.event(
                    actor,
                    "route.override",
                    json!({
                        "target": target,
                        "address": address,
                        "endpoint": endpoint,
                        "target_compromised": ev.target_compromised,
                        "same_segment": ev.same_segment,
                    }),
                );
                Ok(())
            }
            Err(e) => {
                self.log_denied(actor, "route.override", target, e);
                Err(e)
            }
        }
    }

    pub fn flush_dns_cache(&mut self, actor: &str, target: &str) -> Result<(), FabricError> {
        self.advance();
        match self.fabric.flush_dns_cache(actor, target) {
            Ok(ev) => {
                self.event(
                    actor,
                    "dns.flush",
                    json!({
                        "target": target,
                        "target_compromised": ev.target_compromised,
                        "same_segment": ev.same_segment,
                    }),
                );
                Ok(())
            }
            Err(e) => {
                self.log_denied(actor, "dns.flush", target, e);
                Err(e)
            }
        }
    }

    pub fn install_trust_anchor(
        &mut self,
        actor: &str,
        target: &str,
        anchor: &str,
    ) -> Result<(), FabricError> {
        self.advance();
        match self.fabric.install_trust_anchor(actor, target, anchor) {
            Ok(ev) => {
                self.event(
                    actor,
                    "trust.anchor_installed",
                    json!({
                        "target": target,
                        "anchor": anchor,
                        "target_compromised": ev.target_compromised,
                        "same_segment": ev.same_segment,
                    }),
                );
                Ok(())
            }
            Err(e) => {
                self.log_denied(actor, "trust.anchor_installed", target, e);
                Err(e)
            }
        }
    }

    pub fn remove_overrides(&mut self, actor: &str) {
        self.advance();
        let removed = self.fabric.remove_overrides_by(actor);
        self.event(
            actor,
            "fabric.overrides_removed",
            json!({ "count": removed }),
        );
    }

    pub fn register_interceptor(
        &mut self,
        actor: &str,
        selector: InterceptorSelector,
        behavior: InterceptorBehavior,
    ) -> Result<u64, FabricError> {
        self.advance();
        let target = selector
            .endpoint
            .as_ref()
            .and_then(|e| self.fabric.endpoints.get(e))
            .map(|e| e.host.clone())
            .or_else(|| selector.client_host.clone())
            .unwrap_or_default();
        let evidence = self.fabric.evidence(actor, &target);
        let on_path = selector.client_host.as_deref() == Some(actor)
            || self
                .fabric
                .endpoints
                .values()
                .any(|e| e.host == actor && Some(&e.id) == selector.endpoint.as_ref());
        let behavior_label = behavior.label();
        let channel_kind = selector.kind;
        match self.fabric.register_interceptor(actor, selector, behavior) {
            Ok(handle) => {
                self.event(
                    actor,
                    "interceptor.registered",
                    json!({
                        "target": target,
                        "behavior": behavior_label,
                        "channel_kind": channel_kind,
                        "target_compromised": evidence.target_compromised,
                        "same_segment": evidence.same_segment,
                        "on_path": on_path,
                    }),
                );
                Ok(handle)
            }
            Err(e) => {
                self.log_denied(actor, "interceptor.registered", &target, e);
                Err(e)
            }
        }
    }

    fn log_denied(&mut self, actor: &str, op: &str, target: &str, error: FabricError) {
        self.event(
            actor,
            "fabric.denied",
            json!({"op": op, "target": target, "error": error.code()}),
        );
    }

    // -- channels and message transport ---------------------------------------

    pub fn open_web_channel(
        &mut self,
        client_host: &str,
        name: &str,
        scheme: Scheme,
    ) -> Result<ChannelId, FabricError> {
        self.advance();
        match self.fabric.establish_web_channel(client_host, name, scheme) {
            Ok(id) => {
                let channel = self.fabric.channel(id).expect("fresh channel").clone();
                self.event(
                    client_host,
                    "channel.established",
                    json!({
                        "channel": id,
                        "name": name,
                        "scheme": scheme.as_str(),
                        "endpoint": channel.endpoint,
                        "tls_trusted": channel.tls_trusted,
                    }),
                );
                Ok(id)
            }
            Err(e) => {
                self.event(
                    client_host,
                    "channel.failed",
                    json!({"name": name, "error": e.code()}),
                );
                Err(e)
            }
        }
    }

    pub fn open_ctap_channel(
        &mut self,
        client_host: &str,
        endpoint: &str,
    ) -> Result<ChannelId, FabricError> {
        self.advance();
        let id = self.fabric.establish_ctap_channel(client_host, endpoint)?;
        self.event(
            client_host,
            "channel.established",
            json!({"channel": id, "endpoint": endpoint, "kind": "ctap"}),
        );
        Ok(id)
    }

    /// Encode, intercept, deliver, intercept the response, log everything.
    /// Messages really do cross the channel as length-prefixed canonical
    /// JSON records; what the handler sees is what decoded.
    pub fn send_on_channel(
        &mut self,
        channel_id: ChannelId,
        msg: Value,
    ) -> Result<Value, FabricError> {
        self.advance();
        let channel = self.fabric.channel(channel_id)?.clone();
        let wire_bytes = wire::encode_record(&msg);
        let msg = wire::decode_record(&wire_bytes).map_err(|_| FabricError::MessageDropped)?;
        self.event(
            &channel.client_host.clone(),
            "net.request",
            json!({
                "channel": channel_id,
                "endpoint": channel.endpoint,
                "msg_kind": wire::msg_kind(&msg),
                "wire_len": wire_bytes.len(),
                "body": msg,
            }),
        );

        let interceptors = self.fabric.matching_interceptors(&channel);
        let mut msg = msg;
        for interceptor in &interceptors {
            msg = self.apply_interceptor(interceptor, &channel, msg, "request")?;
        }

        let endpoint = self
            .fabric
            .endpoints
            .get(&channel.endpoint)
            .ok_or(FabricError::ConnectionRefused)?
            .clone();
        let mut response = match endpoint.kind {
            crate::fabric::EndpointKind::RelyingParty => self.handle_rp_message(&channel, &msg),
            crate::fabric::EndpointKind::AttackerFrontend => {
                self.handle_frontend_message(&channel, &msg)
            }
            crate::fabric::EndpointKind::CtapAuthenticator => {
                self.handle_ctap_message(&endpoint.host, &msg)
            }
        };

        for interceptor in &interceptors {
            response = self.apply_interceptor(interceptor, &channel, response, "response")?;
        }
        let response = wire::decode_record(&wire::encode_record(&response))
            .map_err(|_| FabricError::MessageDropped)?;

        self.event(
            &endpoint.host,
            "net.response",
            json!({
                "channel": channel_id,
                "msg_kind": wire::msg_kind(&response),
                "body": response,
            }),
        );
        Ok(response)
    }

    fn apply_interceptor(
        &mut self,
        interceptor: &Interceptor,
        channel: &Channel,
        mut msg: Value,
        direction: &str,
    ) -> Result<Value, FabricError> {
        let actor = interceptor.actor.clone();
        let msg_kind_owned = wire::msg_kind(&msg).to_string();
        let base = json!({
            "channel": channel.id,
            "direction": direction,
            "msg_kind": msg_kind_owned,
            "target": channel.client_host,
        });
        let log = |world: &mut World, verdict: &str, extra: Value| {
            let mut payload = base.as_object().unwrap().clone();
            payload.insert("verdict".to_string(), Value::String(verdict.to_string()));
            if let Some(obj) = extra.as_object() {
                for (k, v) in obj {
                    payload.insert(k.clone(), v.clone());
                }
            }
            world.event(&actor, "interceptor.invoked", Value::Object(payload));
        };

        match &interceptor.behavior {
            InterceptorBehavior::CopyToAttacker => {
                self.attacker.captured_messages.push(msg.clone());
                log(self, "copy", json!({}));
                Ok(msg)
            }
            InterceptorBehavior::CaptureAuthChallenge => {
                if msg_kind_owned == kind::BEGIN_AUTH_OK {
                    let relay = RelayedChallenge {
                        ceremony_id: wire::get_str(&msg, "ceremony_id").unwrap_or("").to_string(),
                        challenge: wire::get_str(&msg, "challenge").unwrap_or("").to_string(),
                        rp_id: wire::get_str(&msg, "rp_id").unwrap_or("").to_string(),
                    };
                    let detail = json!({
                        "ceremony_id": relay.ceremony_id,
                        "challenge": relay.challenge,
                    });
                    self.attacker.relay = Some(relay);
                    log(self, "copy", detail);
                } else {
                    log(self, "pass", json!({}));
                }
                Ok(msg)
            }
            InterceptorBehavior::ReplaceRegistrationKey { public_key_hex } => {
                if msg_kind_owned == kind::CTAP_MAKE_CREDENTIAL_OK {
                    let original_pk = wire::get_str(&msg, "public_key").unwrap_or("").to_string();
                    let credential_id = wire::get_str(&msg, "credential_id")
                        .unwrap_or("")
                        .to_string();
                    if let (Some(cid), Some(pk)) = (
                        CredentialId::from_hex(&credential_id),
                        PublicKey::from_hex(&original_pk),
                    ) {
                        self.attacker.replaced_credential = Some((cid, pk));
                    }
                    msg["public_key"] = Value::String(public_key_hex.clone());
                    log(
                        self,
                        "modify",
                        json!({
                            "credential_id": credential_id,
                            "original_public_key": original_pk,
                            "public_key": public_key_hex,
                        }),
                    );
                } else {
                    log(self, "pass", json!({}));
                }
                Ok(msg)
            }
            InterceptorBehavior::TamperField {
                msg_kind: target_kind,
                field,
                value,
            } => {
                if &msg_kind_owned == target_kind {
                    msg[field.as_str()] = value.clone();
                    log(self, "modify", json!({"field": field, "value": value}));
                } else {
                    log(self, "pass", json!({}));
                }
                Ok(msg)
            }
            InterceptorBehavior::Drop { msg_kind: only } => {
                let matches = only.as_ref().map(|k| *k == msg_kind_owned).unwrap_or(true);
                if matches {
                    log(self, "drop", json!({}));
                    Err(FabricError::MessageDropped)
                } else {
                    log(self, "pass", json!({}));
                    Ok(msg)
                }
            }
        }
    }

    // -- relying-party endpoint -------------------------------------------------

    fn handle_rp_message(&mut self, channel: &Channel, msg: &Value) -> Value {
        let requester = channel.client_host.clone();
        let requester_role = self.fabric.host(&requester).role.as_str().to_string();
        let now = self.clock;
        let msg_kind = wire::msg_kind(msg).to_string();

        match msg_kind.as_str() {
            kind::BEGIN_REG => {
                let Ok(user) = wire::get_str(msg, "user_handle") else {
                    return wire::error_message(kind::ERROR, "malformed_message");
                };
                let user = user.to_string();
                match self.rp.begin_registration(&user, &mut self.rng, now) {
                    Ok(reg) => {
                        self.event(
                            "rp-server",
                            "rp.begin_reg",
                            json!({
                                "requester_host": requester,
                                "user": user,
                                "ceremony_id": reg.ceremony_id.0,
                            }),
                        );
                        wire::message(
                            kind::BEGIN_REG_OK,
                            &[
                                ("ceremony_id", Value::String(reg.ceremony_id.0.clone())),
                                (
                                    "challenge",
                                    Value::String(crate::ceremony::encode_challenge(
                                        &reg.challenge.bytes,
                                    )),
                                ),
                                ("rp_id", Value::String(reg.rp_id)),
                                ("user_handle", Value::String(reg.user_handle)),
                            ],
                        )
                    }
                    Err(e) => self.rp_error(&requester, "rp.begin_reg", e.code()),
                }
            }
            kind::FINISH_REG => self.handle_finish_registration(&requester, &requester_role, msg),
            kind::BEGIN_AUTH => {
                let user = msg.get("user_handle").and_then(Value::as_str);
                let auth = self.rp.begin_authentication(user, &mut self.rng, now);
                self.event(
                    "rp-server",
                    "rp.begin_auth",
                    json!({
                        "requester_host": requester,
                        "user": user,
                        "ceremony_id": auth.ceremony_id.0,
                    }),
                );
                wire::message(
                    kind::BEGIN_AUTH_OK,
                    &[
                        ("ceremony_id", Value::String(auth.ceremony_id.0.clone())),
                        (
                            "challenge",
                            Value::String(crate::ceremony::encode_challenge(&auth.challenge.bytes)),
                        ),
                        ("rp_id", Value::String(auth.rp_id)),
                    ],
                )
            }
            kind::FINISH_AUTH => {
                self.handle_finish_authentication(&requester, &requester_role, msg)
            }
            kind::PASSWORD_LOGIN => {
                let (Ok(user), Ok(password)) = (
                    wire::get_str(msg, "user_handle"),
                    wire::get_str(msg, "password"),
                ) else {
                    return wire::error_message(kind::ERROR, "malformed_message");
                };
                let (user, password) = (user.to_string(), password.to_string());
                match self.rp.password_login(&user, &password, &mut self.rng, now) {
                    Ok(session) => {
                        self.event(
                            "rp-server",
                            "rp.password_login",
                            json!({
                                "result": "ok",
                                "user": user,
                                "requester_host": requester,
                                "requester_role": requester_role,
                            }),
                        );
                        wire::message(
                            kind::PASSWORD_LOGIN_OK,
                            &[
                                ("session_token", Value::String(session.token.to_hex())),
                                ("user_handle", Value::String(session.user_handle)),
                            ],
                        )
                    }
                    Err(e) => {
                        self.event(
                            "rp-server",
                            "rp.password_login",
                            json!({
                                "result": e.code(),
                                "user": user,
                                "requester_host": requester,
                                "requester_role": requester_role,
                            }),
                        );
                        wire::error_message(kind::ERROR, e.code())
                    }
                }
            }
            kind::ADD_PASSKEY => {
                let token = wire::get_str(msg, "session_token")
                    .ok()
                    .and_then(SessionToken::from_hex);
                let Some(token) = token else {
                    return wire::error_message(kind::ERROR, "malformed_message");
                };
                match self.rp.add_passkey_to_account(&token, &mut self.rng, now) {
                    Ok(reg) => {
                        self.event(
                            "rp-server",
                            "rp.add_passkey",
                            json!({
                                "requester_host": requester,
                                "user": reg.user_handle,
                                "ceremony_id": reg.ceremony_id.0,
                            }),
                        );
                        wire::message(
                            kind::ADD_PASSKEY_OK,
                            &[
                                ("ceremony_id", Value::String(reg.ceremony_id.0.clone())),
                                (
                                    "challenge",
                                    Value::String(crate::ceremony::encode_challenge(
                                        &reg.challenge.bytes,
                                    )),
                                ),
                                ("rp_id", Value::String(reg.rp_id)),
                                ("user_handle", Value::String(reg.user_handle)),
                            ],
                        )
                    }
                    Err(e) => self.rp_error(&requester, "rp.add_passkey", e.code()),
                }
            }
            _ => wire::error_message(kind::ERROR, "unknown_kind"),
        }
    }

    fn handle_finish_registration(
        &mut self,
        requester: &str,
        requester_role: &str,
        msg: &Value,
    ) -> Value {
        let parsed = (|| {
            let ceremony_id = CeremonyId(wire::get_str(msg, "ceremony_id").ok()?.to_string());
            let client_data = parse_client_data(msg)?;
            let credential_id = CredentialId::from_hex(wire::get_str(msg, "credential_id").ok()?)?;
            let public_key = PublicKey::from_hex(wire::get_str(msg, "public_key").ok()?)?;
            let authenticator_data =
                AuthenticatorData::from_hex(wire::get_str(msg, "authenticator_data").ok()?)?;
            Some((
                ceremony_id,
                client_data,
                credential_id,
                public_key,
                authenticator_data,
            ))
        })();
        let Some((ceremony_id, client_data, credential_id, public_key, authenticator_data)) =
            parsed
        else {
            return wire::error_message(kind::ERROR, "malformed_message");
        };
        let response = crate::rp::RegistrationResponse {
            credential_id,
            public_key,
            authenticator_data,
        };
        match self
            .rp
            .finish_registration(&ceremony_id, &client_data, &response)
        {
            Ok(credential) => {
                self.event(
                    "rp-server",
                    "rp.finish_reg",
                    json!({
                        "result": "ok",
                        "user": credential.user_handle,
                        "credential_id": credential.credential_id.to_hex(),
                        "public_key": credential.public_key.to_hex(),
                        "sign_count": credential.sign_count,
                        "requester_host": requester,
                        "requester_role": requester_role,
                    }),
                );
                wire::message(
                    kind::FINISH_REG_OK,
                    &[(
                        "credential_id",
                        Value::String(credential.credential_id.to_hex()),
                    )],
                )
            }
            Err(e) => {
                self.event(
                    "rp-server",
                    "rp.finish_reg",
                    json!({
                        "result": e.code(),
                        "requester_host": requester,
                        "requester_role": requester_role,
                    }),
                );
                wire::error_message(kind::ERROR, e.code())
            }
        }
    }

    fn handle_finish_authentication(
        &mut self,
        requester: &str,
        requester_role: &str,
        msg: &Value,
    ) -> Value {
        let parsed = (|| {
            let ceremony_id = CeremonyId(wire::get_str(msg, "ceremony_id").ok()?.to_string());
            let client_data = parse_client_data(msg)?;
            let authenticator_data =
                AuthenticatorData::from_hex(wire::get_str(msg, "authenticator_data").ok()?)?;
            let credential_id = CredentialId::from_hex(wire::get_str(msg, "credential_id").ok()?)?;
            let user_handle = wire::get_str(msg, "user_handle").ok()?.to_string();
            let signature = hex::decode(wire::get_str(msg, "signature").ok()?).ok()?;
            Some((
                ceremony_id,
                client_data,
                authenticator_data,
                credential_id,
                user_handle,
                signature,
            ))
        })();
        let Some((
            ceremony_id,
            client_data,
            authenticator_data,
            credential_id,
            user_handle,
            signature,
        )) = parsed
        else {
            return wire::error_message(kind::ERROR, "malformed_message");
        };
        let now = self.clock;
        match self.rp.finish_authentication(
            &ceremony_id,
            &client_data,
            &authenticator_data,
            &credential_id,
            &user_handle,
            &signature,
            &mut self.rng,
            now,
        ) {
            Ok(session) => {
                self.event(
                    "rp-server",
                    "rp.finish_auth",
                    json!({
                        "result": "ok",
                        "user": session.user_handle,
                        "credential_id": credential_id.to_hex(),
                        "sign_count": authenticator_data.sign_count,
                        "requester_host": requester,
                        "requester_role": requester_role,
                        "ceremony_id": ceremony_id.0,
                    }),
                );
                wire::message(
                    kind::FINISH_AUTH_OK,
                    &[
                        ("session_token", Value::String(session.token.to_hex())),
                        ("user_handle", Value::String(session.user_handle)),
                    ],
                )
            }
            Err(e) => {
                self.event(
                    "rp-server",
                    "rp.finish_auth",
                    json!({
                        "result": e.code(),
                        "user": user_handle,
                        "credential_id": credential_id.to_hex(),
                        "requester_host": requester,
                        "requester_role": requester_role,
                        "ceremony_id": ceremony_id.0,
                    }),
                );
                wire::error_message(kind::ERROR, e.code())
            }
        }
    }

    fn rp_error(&mut self, requester: &str, op: &str, code: &str) -> Value {
        self.event(
            "rp-server",
            op,
            json!({"result": code, "requester_host": requester}),
        );
        wire::error_message(kind::ERROR, code)
    }

    // -- attacker frontend endpoint ---------------------------------------------

    fn handle_frontend_message(&mut self, channel: &Channel, msg: &Value) -> Value {
        let attacker = self.attacker.host.clone();
        let from = channel.client_host.clone();
        let msg_kind = wire::msg_kind(msg).to_string();
        match (self.attacker.frontend_mode, msg_kind.as_str()) {
            (FrontendMode::DeceptionRelay, kind::BEGIN_AUTH) => match self.attacker.relay.clone() {
                Some(relay) => {
                    self.event(
                            &attacker,
                            "attacker.frontend",
                            json!({"action": "relay_challenge", "to": from, "ceremony_id": relay.ceremony_id}),
                        );
                    wire::message(
                        kind::BEGIN_AUTH_OK,
                        &[
                            ("ceremony_id", Value::String(relay.ceremony_id)),
                            ("challenge", Value::String(relay.challenge)),
                            ("rp_id", Value::String(relay.rp_id)),
                        ],
                    )
                }
                None => wire::error_message(kind::ERROR, "no_relayed_challenge"),
            },
            (FrontendMode::DeceptionRelay, kind::FINISH_AUTH) => {
                self.attacker.captured_assertion = Some(msg.clone());
                self.event(
                    &attacker,
                    "attacker.assertion_captured",
                    json!({
                        "from": from,
                        "credential_id": msg.get("credential_id"),
                        "user_handle": msg.get("user_handle"),
                    }),
                );
                // Shake the victim off: error out and suggest a reload, which
                // will land them back on the genuine site once the spoof is
                // torn down.
                wire::error_message(kind::ERROR, "temporary_error_please_reload")
            }
            (FrontendMode::CredentialPhishing, kind::BEGIN_AUTH) => {
                self.event(
                    &attacker,
                    "attacker.frontend",
                    json!({"action": "signal_passkey_error", "to": from}),
                );
                wire::error_message(kind::ERROR, "passkey_unavailable")
            }
            (FrontendMode::CredentialPhishing, kind::PASSWORD_LOGIN) => {
                let user = wire::get_str(msg, "user_handle").unwrap_or("").to_string();
                let password = wire::get_str(msg, "password").unwrap_or("").to_string();
                self.attacker
                    .captured_passwords
                    .push((user.clone(), password.clone()));
                self.event(
                    &attacker,
                    "attacker.password_captured",
                    json!({"user": user, "password": password}),
                );
                let fake = hex::encode(self.rng.bytes16());
                wire::message(
                    kind::PASSWORD_LOGIN_OK,
                    &[
                        ("session_token", Value::String(fake)),
                        ("user_handle", Value::String(user)),
                    ],
                )
            }
            (FrontendMode::Impersonation, kind::BEGIN_AUTH) => {
                let fake_challenge = crate::ceremony::encode_challenge(&self.rng.bytes32());
                self.event(
                    &attacker,
                    "attacker.frontend",
                    json!({"action": "fake_ceremony_started", "to": from}),
                );
                wire::message(
                    kind::BEGIN_AUTH_OK,
                    &[
                        ("ceremony_id", Value::String("fake".to_string())),
                        ("challenge", Value::String(fake_challenge)),
                        ("rp_id", Value::String(host_of(&channel.requested_name))),
                    ],
                )
            }
            (FrontendMode::Impersonation, kind::FINISH_AUTH) => {
                self.event(
                    &attacker,
                    "attacker.frontend",
                    json!({"action": "fake_success", "to": from}),
                );
                let fake = hex::encode(self.rng.bytes16());
                wire::message(
                    kind::FINISH_AUTH_OK,
                    &[
                        ("session_token", Value::String(fake)),
                        (
                            "user_handle",
                            msg.get("user_handle").cloned().unwrap_or(Value::Null),
                        ),
                    ],
                )
            }
            (_, kind::INFO_SUBMIT) => {
                let fields = msg.get("fields").cloned().unwrap_or(Value::Null);
                self.attacker.captured_info.push(fields.clone());
                self.event(
                    &attacker,
                    "attacker.info_captured",
                    json!({"from": from, "fields": fields}),
                );
                wire::message(kind::INFO_SUBMIT_OK, &[])
            }
            _ => wire::error_message(kind::ERROR, "not_found"),
        }
    }

    // -- CTAP endpoint -------------------------------------------------------------

    fn handle_ctap_message(&mut self, device_host: &str, msg: &Value) -> Value {
        let msg_kind = wire::msg_kind(msg).to_string();
        let Some(authenticator) = self.authenticators.get_mut(device_host) else {
            return wire::error_message(kind::CTAP_ERROR, "no_authenticator");
        };
        match msg_kind.as_str() {
            kind::CTAP_UNLOCK => {
                let pin = wire::get_str(msg, "pin").unwrap_or("");
                let result = authenticator.unlock(pin);
                let ok = result.is_ok();
                self.event(
                    device_host,
                    "ctap.unlock",
                    json!({"host": device_host, "ok": ok}),
                );
                match result {
                    Ok(()) => wire::message(kind::CTAP_UNLOCK_OK, &[]),
                    Err(e) => wire::error_message(kind::CTAP_ERROR, e.code()),
                }
            }
            kind::CTAP_MAKE_CREDENTIAL => {
                let parsed = (|| {
                    let rp_id = wire::get_str(msg, "rp_id").ok()?.to_string();
                    let hash_bytes =
                        hex::decode(wire::get_str(msg, "client_data_hash").ok()?).ok()?;
                    let client_data_hash: [u8; 32] = hash_bytes.try_into().ok()?;
                    let user_handle = msg
                        .get("user_handle")
                        .and_then(Value::as_str)
                        .map(|s| s.to_string());
                    Some(CtapRequest::MakeCredential {
                        rp_id,
                        client_data_hash,
                        user_handle,
                    })
                })();
                let Some(req) = parsed else {
                    return wire::error_message(kind::CTAP_ERROR, "malformed_message");
                };
                match authenticator.make_credential(&req, &mut self.rng) {
                    Ok(CtapResponse::MakeCredential {
                        credential_id,
                        public_key,
                        authenticator_data,
                        exfiltration,
                    }) => {
                        let CtapRequest::MakeCredential { rp_id, .. } = &req else {
                            unreachable!()
                        };
                        self.event(
                            device_host,
                            "ctap.make_credential",
                            json!({
                                "host": device_host,
                                "rp_id": rp_id,
                                "credential_id": credential_id.to_hex(),
                                "public_key": public_key.to_hex(),
                            }),
                        );
                        if let Some(notice) = exfiltration {
                            self.event(
                                device_host,
                                "ctap.key_exfiltration",
                                json!({
                                    "rp_id": notice.rp_id,
                                    "credential_id": notice.credential_id.to_hex(),
                                    "public_key": notice.public_key.to_hex(),
                                }),
                            );
                        }
                        wire::message(
                            kind::CTAP_MAKE_CREDENTIAL_OK,
                            &[
                                ("credential_id", Value::String(credential_id.to_hex())),
                                ("public_key", Value::String(public_key.to_hex())),
                                (
                                    "authenticator_data",
                                    Value::String(authenticator_data.to_hex()),
                                ),
                            ],
                        )
                    }
                    Ok(_) => wire::error_message(kind::CTAP_ERROR, "internal"),
                    Err(e) => {
                        self.event(
                            device_host,
                            "ctap.error",
                            json!({"op": "make_credential", "error": e.code()}),
                        );
                        wire::error_message(kind::CTAP_ERROR, e.code())
                    }
                }
            }
            kind::CTAP_GET_ASSERTION => {
                let parsed = (|| {
                    let rp_id = wire::get_str(msg, "rp_id").ok()?.to_string();
                    let hash_bytes =
                        hex::decode(wire::get_str(msg, "client_data_hash").ok()?).ok()?;
                    let client_data_hash: [u8; 32] = hash_bytes.try_into().ok()?;
                    Some(CtapRequest::GetAssertion {
                        rp_id,
                        client_data_hash,
                    })
                })();
                let Some(req) = parsed else {
                    return wire::error_message(kind::CTAP_ERROR, "malformed_message");
                };
                match authenticator.get_assertion(&req) {
                    Ok(CtapResponse::GetAssertion {
                        credential_id,
                        user_handle,
                        authenticator_data,
                        signature,
                    }) => {
                        let CtapRequest::GetAssertion { rp_id, .. } = &req else {
                            unreachable!()
                        };
                        self.event(
                            device_host,
                            "ctap.get_assertion",
                            json!({
                                "host": device_host,
                                "rp_id": rp_id,
                                "credential_id": credential_id.to_hex(),
                                "sign_count": authenticator_data.sign_count,
                            }),
                        );
                        wire::message(
                            kind::CTAP_GET_ASSERTION_OK,
                            &[
                                ("credential_id", Value::String(credential_id.to_hex())),
                                (
                                    "user_handle",
                                    user_handle.map(Value::String).unwrap_or(Value::Null),
                                ),
                                (
                                    "authenticator_data",
                                    Value::String(authenticator_data.to_hex()),
                                ),
                                ("signature", Value::String(signature.to_hex())),
                            ],
                        )
                    }
                    Ok(_) => wire::error_message(kind::CTAP_ERROR, "internal"),
                    Err(e) => {
                        self.event(
                            device_host,
                            "ctap.error",
                            json!({"op": "get_assertion", "error": e.code()}),
                        );
                        wire::error_message(kind::CTAP_ERROR, e.code())
                    }
                }
            }
            _ => wire::error_message(kind::CTAP_ERROR, "unknown_kind"),
        }
    }
}

pub(crate) fn parse_client_data(msg: &Value) -> Option<ClientData> {
    let kind = match wire::get_str(msg, "client_data_type").ok()? {
        "webauthn.create" => ClientDataType::Create,
        "webauthn.get" => ClientDataType::Get,
        _ => return None,
    };
    Some(ClientData {
        kind,
        challenge: wire::get_str(msg, "client_data_challenge")
            .ok()?
            .to_string(),
        origin: wire::get_str(msg, "client_data_origin").ok()?.to_string(),
    })
}

pub(crate) fn host_of(origin_or_name: &str) -> String {
    let rest = origin_or_name
        .split_once("://")
        .map(|(_, r)| r)
        .unwrap_or(origin_or_name);
    rest.split(['/', ':']).next().unwrap_or("").to_lowercase()
}
