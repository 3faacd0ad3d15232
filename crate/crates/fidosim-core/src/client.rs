//! The browser model: navigation with DNS, routing and trust evaluation,
//! secure-context enforcement, the WebAuthn API surface and the CTAP hop to
//! the authenticator. Nothing a fabric message carries can change what origin
//! the client believes it is on: `origin_as_seen` derives from the requested
//! URL and the trust verdict alone.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde_json::{json, Value};

use crate::ceremony::{ClientData, ClientDataType};
use crate::fabric::{ChannelId, FabricError, Scheme};
use crate::rp::canonicalize_origin;
use crate::wire::{self, kind};
use crate::world::{host_of, World};

/// How the simulated human behaves at each interaction point. Every consult
/// is recorded in the transcript.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VictimPolicy {
    pub follows_phishing_links: bool,
    pub ignores_tls_warnings: bool,
    pub approves_authenticator_prompts: bool,
    pub falls_back_to_password: bool,
    /// Fumbles the authenticator PIN; operations then fail NotUnlocked.
    pub enters_wrong_pin: bool,
}

impl Default for VictimPolicy {
    fn default() -> Self {
        VictimPolicy {
            follows_phishing_links: false,
            ignores_tls_warnings: false,
            approves_authenticator_prompts: true,
            falls_back_to_password: false,
            enters_wrong_pin: false,
        }
    }
}

/// Per-host browser state.
#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub policy: VictimPolicy,
    pub pin: String,
    pub ctap_channel: Option<ChannelId>,
    /// Tampered FIDO library: ceremonies "succeed" without touching the
    /// authenticator. Requires a compromised host to set.
    pub forced_success: bool,
}

impl ClientConfig {
    pub fn new(policy: VictimPolicy, pin: &str) -> Self {
        ClientConfig {
            policy,
            pin: pin.to_string(),
            ctap_channel: None,
            forced_success: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Connection {
    pub origin_as_seen: String,
    pub endpoint: String,
    pub channel: ChannelId,
    pub secure_context: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientError {
    BadUrl,
    NameResolutionFailure,
    ConnectionRefused,
    TlsUntrusted,
    InsecureContext,
    RpIdMismatch,
    NoCredential,
    UserDeclined,
    NotUnlocked,
    WrongPin,
    Remote(String),
}

impl ClientError {
    pub fn code(&self) -> &str {
        match self {
            ClientError::BadUrl => "bad_url",
            ClientError::NameResolutionFailure => "name_resolution_failure",
            ClientError::ConnectionRefused => "connection_refused",
            ClientError::TlsUntrusted => "tls_untrusted",
            ClientError::InsecureContext => "insecure_context",
            ClientError::RpIdMismatch => "rp_id_mismatch",
            ClientError::NoCredential => "no_credential",
            ClientError::UserDeclined => "user_declined",
            ClientError::NotUnlocked => "not_unlocked",
            ClientError::WrongPin => "wrong_pin",
            ClientError::Remote(code) => code,
        }
    }

    fn from_code(code: &str) -> Self {
        match code {
            "no_credential" => ClientError::NoCredential,
            "user_declined" => ClientError::UserDeclined,
            "not_unlocked" => ClientError::NotUnlocked,
            "wrong_pin" => ClientError::WrongPin,
            other => ClientError::Remote(other.to_string()),
        }
    }
}

impl fmt::Display for ClientError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl From<FabricError> for ClientError {
    fn from(e: FabricError) -> Self {
        match e {
            FabricError::NameResolutionFailure => ClientError::NameResolutionFailure,
            FabricError::TlsUntrusted => ClientError::TlsUntrusted,
            _ => ClientError::ConnectionRefused,
        }
    }
}

/// Blocked-reason carrier for scenario flows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowError {
    pub code: String,
}

impl FlowError {
    pub fn new(code: &str) -> Self {
        FlowError {
            code: code.to_string(),
        }
    }
}

impl From<ClientError> for FlowError {
    fn from(e: ClientError) -> Self {
        FlowError::new(e.code())
    }
}

impl From<FabricError> for FlowError {
    fn from(e: FabricError) -> Self {
        FlowError::new(e.code())
    }
}

pub fn parse_url(url: &str) -> Option<(Scheme, String)> {
    let (scheme, rest) = url.split_once("://")?;
    let scheme = match scheme.to_lowercase().as_str() {
        "http" => Scheme::Http,
        "https" => Scheme::Https,
        _ => return None,
    };
    let host = rest.split(['/', '?', ':']).next()?.to_lowercase();
    if host.is_empty() {
        return None;
    }
    Some((scheme, host))
}

/// What the client hands the RP to finish a registration.
#[derive(Debug, Clone)]
pub struct RegistrationSubmission {
    pub client_data: ClientData,
    pub credential_id: String,
    pub public_key: String,
    pub authenticator_data: String,
}

/// What the client hands the RP to finish an authentication.
#[derive(Debug, Clone)]
pub struct AssertionSubmission {
    pub client_data: ClientData,
    pub credential_id: String,
    pub user_handle: Option<String>,
    pub authenticator_data: String,
    pub signature: String,
}

impl World {
    fn policy(&self, host: &str) -> VictimPolicy {
        self.clients.get(host).map(|c| c.policy).unwrap_or_default()
    }

    /// Consult one policy flag and record the consultation.
    pub fn consult_policy(&mut self, host: &str, point: &str) -> bool {
        let policy = self.policy(host);
        let value = match point {
            "follows_phishing_links" => policy.follows_phishing_links,
            "ignores_tls_warnings" => policy.ignores_tls_warnings,
            "approves_authenticator_prompts" => policy.approves_authenticator_prompts,
            "falls_back_to_password" => policy.falls_back_to_password,
            "enters_wrong_pin" => policy.enters_wrong_pin,
            _ => false,
        };
        self.event(
            host,
            "client.policy",
            json!({"point": point, "value": value}),
        );
        value
    }

    /// Resolve, route, evaluate trust, and produce a connection whose
    /// `origin_as_seen` comes from the requested URL only.
    pub fn client_navigate(&mut self, host: &str, url: &str) -> Result<Connection, ClientError> {
        let Some((scheme, name)) = parse_url(url) else {
            self.event(
                host,
                "client.navigate_failed",
                json!({"url": url, "error": "bad_url"}),
            );
            return Err(ClientError::BadUrl);
        };
        let origin_as_seen = canonicalize_origin(&alloc::format!("{}://{}", scheme.as_str(), name));

        let channel_id = match self.open_web_channel(host, &name, scheme) {
            Ok(id) => id,
            Err(e) => {
                self.event(
                    host,
                    "client.navigate_failed",
                    json!({"url": url, "error": e.code()}),
                );
                return Err(e.into());
            }
        };
        let channel = self
            .fabric
            .channel(channel_id)
            .expect("fresh channel")
            .clone();

        let mut warnings = Vec::new();
        if scheme == Scheme::Https && !channel.tls_trusted {
            let proceed = self.consult_policy(host, "ignores_tls_warnings");
            if !proceed {
                self.event(
                    host,
                    "client.navigate_failed",
                    json!({"url": url, "error": "tls_untrusted"}),
                );
                return Err(ClientError::TlsUntrusted);
            }
            warnings.push("tls_certificate_untrusted".to_string());
        }

        let secure_context =
            (scheme == Scheme::Https && channel.tls_trusted) || name == "localhost";
        let connection = Connection {
            origin_as_seen: origin_as_seen.clone(),
            endpoint: channel.endpoint.clone(),
            channel: channel_id,
            secure_context,
            warnings,
        };
        self.event(
            host,
            "client.navigate",
            json!({
                "url": url,
                "origin_as_seen": origin_as_seen,
                "endpoint": channel.endpoint,
                "endpoint_host": self.fabric.endpoints.get(&channel.endpoint).map(|e| e.host.clone()),
                "secure_context": secure_context,
                "tls_trusted": channel.tls_trusted,
            }),
        );
        Ok(connection)
    }

    fn ctap_channel(&mut self, host: &str) -> Result<ChannelId, ClientError> {
        self.clients
            .get(host)
            .and_then(|c| c.ctap_channel)
            .ok_or(ClientError::ConnectionRefused)
    }

    fn ctap_unlock(&mut self, host: &str) -> Result<(), ClientError> {
        let channel = self.ctap_channel(host)?;
        let wrong = self.consult_policy(host, "enters_wrong_pin");
        let pin = if wrong {
            "0000-fumbled".to_string()
        } else {
            self.clients
                .get(host)
                .map(|c| c.pin.clone())
                .unwrap_or_default()
        };
        let msg = wire::message(kind::CTAP_UNLOCK, &[("pin", Value::String(pin))]);
        // A failed unlock doesn't stop the user from trying the operation;
        // the authenticator then refuses with NotUnlocked.
        let _ = self
            .send_on_channel(channel, msg)
            .map_err(ClientError::from)?;
        Ok(())
    }

    /// `navigator.credentials.create()`: secure context and RP ID binding
    /// enforced here, key material produced over CTAP.
    pub fn client_webauthn_create(
        &mut self,
        host: &str,
        conn: &Connection,
        rp_id: &str,
        user_handle: &str,
        challenge_b64: &str,
    ) -> Result<RegistrationSubmission, ClientError> {
        let origin_host = host_of(&conn.origin_as_seen);
        if !conn.secure_context {
            self.event(
                host,
                "client.webauthn_blocked",
                json!({"op": "create", "error": "insecure_context", "origin": conn.origin_as_seen}),
            );
            return Err(ClientError::InsecureContext);
        }
        if rp_id != origin_host {
            self.event(
                host,
                "client.webauthn_blocked",
                json!({"op": "create", "error": "rp_id_mismatch", "rp_id": rp_id, "origin_host": origin_host}),
            );
            return Err(ClientError::RpIdMismatch);
        }
        let client_data = ClientData {
            kind: ClientDataType::Create,
            challenge: challenge_b64.to_string(),
            origin: conn.origin_as_seen.clone(),
        };
        self.event(
            host,
            "client.webauthn_create",
            json!({
                "origin": conn.origin_as_seen,
                "client_data_origin": client_data.origin,
                "secure_context": conn.secure_context,
                "rp_id": rp_id,
            }),
        );
        // Recorded here; the authenticator is what actually enforces it.
        self.consult_policy(host, "approves_authenticator_prompts");
        self.ctap_unlock(host)?;
        let channel = self.ctap_channel(host)?;
        let msg = wire::message(
            kind::CTAP_MAKE_CREDENTIAL,
            &[
                ("rp_id", Value::String(rp_id.to_string())),
                (
                    "client_data_hash",
                    Value::String(hex::encode(client_data.hash())),
                ),
                ("user_handle", Value::String(user_handle.to_string())),
            ],
        );
        let response = self
            .send_on_channel(channel, msg)
            .map_err(ClientError::from)?;
        if let Some(code) = wire::get_error(&response) {
            return Err(ClientError::from_code(code));
        }
        Ok(RegistrationSubmission {
            client_data,
            credential_id: wire::get_str(&response, "credential_id")
                .map_err(|_| ClientError::Remote("malformed_message".to_string()))?
                .to_string(),
            public_key: wire::get_str(&response, "public_key")
                .map_err(|_| ClientError::Remote("malformed_message".to_string()))?
                .to_string(),
            authenticator_data: wire::get_str(&response, "authenticator_data")
                .map_err(|_| ClientError::Remote("malformed_message".to_string()))?
                .to_string(),
        })
    }

    /// `navigator.credentials.get()`.
    pub fn client_webauthn_get(
        &mut self,
        host: &str,
        conn: &Connection,
        rp_id: &str,
        challenge_b64: &str,
    ) -> Result<AssertionSubmission, ClientError> {
        let origin_host = host_of(&conn.origin_as_seen);
        if !conn.secure_context {
            self.event(
                host,
                "client.webauthn_blocked",
                json!({"op": "get", "error": "insecure_context", "origin": conn.origin_as_seen}),
            );
            return Err(ClientError::InsecureContext);
        }
        if rp_id != origin_host {
            self.event(
                host,
                "client.webauthn_blocked",
                json!({"op": "get", "error": "rp_id_mismatch", "rp_id": rp_id, "origin_host": origin_host}),
            );
            return Err(ClientError::RpIdMismatch);
        }
        let client_data = ClientData {
            kind: ClientDataType::Get,
            challenge: challenge_b64.to_string(),
            origin: conn.origin_as_seen.clone(),
        };
        let forced = self
            .clients
            .get(host)
            .map(|c| c.forced_success)
            .unwrap_or(false);
        self.event(
            host,
            "client.webauthn_get",
            json!({
                "origin": conn.origin_as_seen,
                "client_data_origin": client_data.origin,
                "secure_context": conn.secure_context,
                "rp_id": rp_id,
                "forced_success": forced,
            }),
        );
        if forced {
            // Tampered library: report success without consulting the
            // authenticator. The "assertion" is garbage no RP would accept.
            return Ok(AssertionSubmission {
                client_data,
                credential_id: hex::encode([0u8; 16]),
                user_handle: None,
                authenticator_data: hex::encode([0u8; 37]),
                signature: hex::encode([0u8; 64]),
            });
        }
        self.consult_policy(host, "approves_authenticator_prompts");
        self.ctap_unlock(host)?;
        let channel = self.ctap_channel(host)?;
        let msg = wire::message(
            kind::CTAP_GET_ASSERTION,
            &[
                ("rp_id", Value::String(rp_id.to_string())),
                (
                    "client_data_hash",
                    Value::String(hex::encode(client_data.hash())),
                ),
            ],
        );
        let response = self
            .send_on_channel(channel, msg)
            .map_err(ClientError::from)?;
        if let Some(code) = wire::get_error(&response) {
            return Err(ClientError::from_code(code));
        }
        Ok(AssertionSubmission {
            client_data,
            credential_id: wire::get_str(&response, "credential_id")
                .map_err(|_| ClientError::Remote("malformed_message".to_string()))?
                .to_string(),
            user_handle: response
                .get("user_handle")
                .and_then(Value::as_str)
                .map(|s| s.to_string()),
            authenticator_data: wire::get_str(&response, "authenticator_data")
                .map_err(|_| ClientError::Remote("malformed_message".to_string()))?
                .to_string(),
            signature: wire::get_str(&response, "signature")
                .map_err(|_| ClientError::Remote("malformed_message".to_string()))?
                .to_string(),
        })
    }

    /// Deliver a password to whatever the connection points at.
    pub fn client_submit_password(
        &mut self,
        host: &str,
        conn: &Connection,
        user: &str,
        password: &str,
    ) -> Result<Value, FlowError> {
        if !self.consult_policy(host, "falls_back_to_password") {
            return Err(FlowError::new("user_declined"));
        }
        let msg = wire::message(
            kind::PASSWORD_LOGIN,
            &[
                ("user_handle", Value::String(user.to_string())),
                ("password", Value::String(password.to_string())),
            ],
        );
        let response = self.send_on_channel(conn.channel, msg)?;
        if let Some(code) = wire::get_error(&response) {
            return Err(FlowError::new(code));
        }
        Ok(response)
    }

    pub fn client_submit_info(
        &mut self,
        _host: &str,
        conn: &Connection,
        fields: Value,
    ) -> Result<Value, FlowError> {
        let msg = wire::message(kind::INFO_SUBMIT, &[("fields", fields)]);
        let response = self.send_on_channel(conn.channel, msg)?;
        if let Some(code) = wire::get_error(&response) {
            return Err(FlowError::new(code));
        }
        Ok(response)
    }

    // -- complete ceremonies -----------------------------------------------------

    /// Registration ceremony driven end to end from the client.
    pub fn flow_register(
        &mut self,
        host: &str,
        conn: &Connection,
        user: &str,
    ) -> Result<String, FlowError> {
        let begin = wire::message(
            kind::BEGIN_REG,
            &[("user_handle", Value::String(user.to_string()))],
        );
        let response = self.send_on_channel(conn.channel, begin)?;
        if let Some(code) = wire::get_error(&response) {
            return Err(FlowError::new(code));
        }
        let ceremony_id = wire_str(&response, "ceremony_id")?;
        let challenge = wire_str(&response, "challenge")?;
        let rp_id = wire_str(&response, "rp_id")?;
        let bound_user = wire_str(&response, "user_handle")?;

        let submission =
            self.client_webauthn_create(host, conn, &rp_id, &bound_user, &challenge)?;

        let finish = finish_reg_message(&ceremony_id, &submission);
        let response = self.send_on_channel(conn.channel, finish)?;
        if let Some(code) = wire::get_error(&response) {
            return Err(FlowError::new(code));
        }
        wire_str(&response, "credential_id")
    }

    /// Authentication ceremony driven end to end from the client, with the
    /// classic workflow steps labeled 0 through 6.
    pub fn flow_passkey_login(
        &mut self,
        host: &str,
        conn: &Connection,
        user: Option<&str>,
    ) -> Result<String, FlowError> {
        let endpoint_host = self
            .fabric
            .endpoints
            .get(&conn.endpoint)
            .map(|e| e.host.clone())
            .unwrap_or_default();

        self.event_labeled(
            host,
            "fig1.step",
            Some("0"),
            json!({"desc": "client starts passkey authentication"}),
        );
        let mut begin_fields = Vec::new();
        if let Some(u) = user {
            begin_fields.push(("user_handle", Value::String(u.to_string())));
        }
        let begin = wire::message(kind::BEGIN_AUTH, &begin_fields);
        let response = self.send_on_channel(conn.channel, begin)?;
        if let Some(code) = wire::get_error(&response) {
            return Err(FlowError::new(code));
        }
        let ceremony_id = wire_str(&response, "ceremony_id")?;
        let challenge = wire_str(&response, "challenge")?;
        let rp_id = wire_str(&response, "rp_id")?;
        self.event_labeled(
            &endpoint_host,
            "fig1.step",
            Some("1"),
            json!({"desc": "server responds with a challenge"}),
        );

        self.event_labeled(
            host,
            "fig1.step",
            Some("2"),
            json!({"desc": "challenge forwarded to the authenticator"}),
        );
        let assertion = self.client_webauthn_get(host, conn, &rp_id, &challenge)?;
        self.event_labeled(
            host,
            "fig1.step",
            Some("3"),
            json!({"desc": "authenticator signs the challenge"}),
        );
        self.event_labeled(
            host,
            "fig1.step",
            Some("4"),
            json!({"desc": "signed challenge returned to the client"}),
        );

        self.event_labeled(
            host,
            "fig1.step",
            Some("5"),
            json!({"desc": "signed challenge forwarded to the server"}),
        );
        let user_handle = assertion
            .user_handle
            .clone()
            .or_else(|| user.map(|u| u.to_string()))
            .unwrap_or_default();
        let finish = finish_auth_message(&ceremony_id, &assertion, &user_handle);
        let response = self.send_on_channel(conn.channel, finish)?;
        if let Some(code) = wire::get_error(&response) {
            return Err(FlowError::new(code));
        }
        self.event_labeled(
            &endpoint_host,
            "fig1.step",
            Some("6"),
            json!({"desc": "server verifies the signature; session established"}),
        );
        wire_str(&response, "session_token")
    }

    /// Password login over whatever the connection points at.
    pub fn flow_password_login(
        &mut self,
        host: &str,
        conn: &Connection,
        user: &str,
        password: &str,
    ) -> Result<String, FlowError> {
        let response = self.client_submit_password(host, conn, user, password)?;
        wire_str(&response, "session_token")
    }

    pub fn flow_blocked(&mut self, host: &str, error: &FlowError) {
        self.event(host, "flow.blocked", json!({"reason": error.code}));
    }
}

pub(crate) fn wire_str(msg: &Value, field: &'static str) -> Result<String, FlowError> {
    wire::get_str(msg, field)
        .map(|s| s.to_string())
        .map_err(|_| FlowError::new("malformed_message"))
}

/// Assemble a finish-registration request from attestation parts.
pub fn finish_reg_message(ceremony_id: &str, submission: &RegistrationSubmission) -> Value {
    wire::message(
        kind::FINISH_REG,
        &[
            ("ceremony_id", Value::String(ceremony_id.to_string())),
            (
                "client_data_type",
                Value::String(submission.client_data.kind.as_str().to_string()),
            ),
            (
                "client_data_challenge",
                Value::String(submission.client_data.challenge.clone()),
            ),
            (
                "client_data_origin",
                Value::String(submission.client_data.origin.clone()),
            ),
            (
                "credential_id",
                Value::String(submission.credential_id.clone()),
            ),
            ("public_key", Value::String(submission.public_key.clone())),
            (
                "authenticator_data",
                Value::String(submission.authenticator_data.clone()),
            ),
        ],
    )
}

/// Assemble a finish-authentication request from assertion parts.
pub fn finish_auth_message(
    ceremony_id: &str,
    assertion: &AssertionSubmission,
    user_handle: &str,
) -> Value {
    wire::message(
        kind::FINISH_AUTH,
        &[
            ("ceremony_id", Value::String(ceremony_id.to_string())),
            (
                "client_data_type",
                Value::String(assertion.client_data.kind.as_str().to_string()),
            ),
            (
                "client_data_challenge",
                Value::String(assertion.client_data.challenge.clone()),
            ),
            (
                "client_data_origin",
                Value::String(assertion.client_data.origin.clone()),
            ),
            (
                "credential_id",
                Value::String(assertion.credential_id.clone()),
            ),
            ("user_handle", Value::String(user_handle.to_string())),
            (
                "authenticator_data",
                Value::String(assertion.authenticator_data.clone()),
            ),
            ("signature", Value::String(assertion.signature.clone())),
        ],
    )
}
