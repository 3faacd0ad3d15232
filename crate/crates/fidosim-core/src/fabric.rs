//! The simulated world the attacks manipulate: hosts, name resolution, route
//! overrides (the ARP-poisoning stand-in), certificate trust and adversary
//! interception hooks.
//!
//! Privileged mutations are capability-checked: a foreign actor needs either
//! network position (same segment, on-path) or a compromised target. Every
//! mutation records who did it; the transcript layer asserts that attribution.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FabricError {
    NameResolutionFailure,
    ConnectionRefused,
    TlsUntrusted,
    PositionRequired,
    PrivilegeError,
    MessageDropped,
    UnknownChannel,
}

impl FabricError {
    pub fn code(&self) -> &'static str {
        match self {
            FabricError::NameResolutionFailure => "name_resolution_failure",
            FabricError::ConnectionRefused => "connection_refused",
            FabricError::TlsUntrusted => "tls_untrusted",
            FabricError::PositionRequired => "position_required",
            FabricError::PrivilegeError => "privilege_error",
            FabricError::MessageDropped => "message_dropped",
            FabricError::UnknownChannel => "unknown_channel",
        }
    }
}

impl fmt::Display for FabricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HostRole {
    Victim,
    Attacker,
    RelyingParty,
    Infrastructure,
}

impl HostRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            HostRole::Victim => "victim",
            HostRole::Attacker => "attacker",
            HostRole::RelyingParty => "relying_party",
            HostRole::Infrastructure => "infrastructure",
        }
    }
}

pub type HostId = String;
pub type EndpointId = String;
pub type ChannelId = u64;
pub type InterceptorHandle = u64;

#[derive(Debug, Clone)]
pub struct Host {
    pub id: HostId,
    pub segment: String,
    pub role: HostRole,
    pub compromised: bool,
    pub anti_arp_spoofing: bool,
    pub dns_cache: BTreeMap<String, String>,
    pub trust_store: BTreeSet<String>,
}

impl Host {
    pub fn new(id: &str, segment: &str, role: HostRole) -> Self {
        Host {
            id: id.to_string(),
            segment: segment.to_string(),
            role,
            compromised: false,
            anti_arp_spoofing: false,
            dns_cache: BTreeMap::new(),
            trust_store: BTreeSet::new(),
        }
    }
}

/// Structural certificate model: a chain is one issuer hop to a named anchor.
/// Trust = anchor in the host's store, name matches SAN (or CN), not revoked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub subject_cn: String,
    pub san: Vec<String>,
    pub issuer: String,
    pub valid: bool,
}

impl Certificate {
    pub fn new(cn: &str, san: &[&str], issuer: &str) -> Self {
        Certificate {
            subject_cn: cn.to_string(),
            san: san.iter().map(|s| s.to_string()).collect(),
            issuer: issuer.to_string(),
            valid: true,
        }
    }

    pub fn matches_name(&self, name: &str) -> bool {
        self.san.iter().any(|p| name_matches(p, name)) || name_matches(&self.subject_cn, name)
    }

    pub fn trusted_by(&self, host: &Host, requested_name: &str) -> bool {
        self.valid && host.trust_store.contains(&self.issuer) && self.matches_name(requested_name)
    }
}

/// Exact match, or `*.suffix` matching one-label-or-deeper prefixes.
pub fn name_matches(pattern: &str, name: &str) -> bool {
    if let Some(suffix) = pattern.strip_prefix("*.") {
        name.len() > suffix.len() + 1
            && name.ends_with(suffix)
            && name.as_bytes()[name.len() - suffix.len() - 1] == b'.'
    } else {
        pattern == name
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    RelyingParty,
    AttackerFrontend,
    CtapAuthenticator,
}

#[derive(Debug, Clone)]
pub struct Endpoint {
    pub id: EndpointId,
    pub host: HostId,
    pub kind: EndpointKind,
    /// Certificates the endpoint can present; picked by requested name.
    pub certificates: Vec<Certificate>,
    pub listening: bool,
}

impl Endpoint {
    pub fn certificate_for(&self, name: &str) -> Option<&Certificate> {
        self.certificates
            .iter()
            .find(|c| c.matches_name(name))
            .or(self.certificates.first())
    }
}

#[derive(Debug, Clone)]
pub struct DnsOverride {
    pub target: HostId,
    pub pattern: String,
    pub address: String,
    pub actor: HostId,
}

#[derive(Debug, Clone)]
pub struct RouteOverride {
    pub target: HostId,
    pub address: String,
    pub endpoint: EndpointId,
    pub actor: HostId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Web,
    Ctap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Http,
    Https,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Http => "http",
            Scheme::Https => "https",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Channel {
    pub id: ChannelId,
    pub kind: ChannelKind,
    pub client_host: HostId,
    pub endpoint: EndpointId,
    pub requested_name: String,
    pub scheme: Option<Scheme>,
    pub tls_trusted: bool,
}

/// What an interceptor does to a matching message. Handlers are data, not
/// closures, so transcripts stay replayable.
#[derive(Debug, Clone)]
pub enum InterceptorBehavior {
    /// Copy matching messages into the attacker's capture log.
    CopyToAttacker,
    /// Pull `ceremony_id`/`challenge` out of authentication-challenge
    /// responses into the attacker's relay state.
    CaptureAuthChallenge,
    /// Rewrite the public key in credential-creation responses, keeping the
    /// victim's credential id; the original key is copied to the attacker.
    ReplaceRegistrationKey { public_key_hex: String },
    /// Overwrite one field of matching messages (tamper testing).
    TamperField {
        msg_kind: String,
        field: String,
        value: Value,
    },
    /// Drop matching messages (all messages when `msg_kind` is None).
    Drop { msg_kind: Option<String> },
}

impl InterceptorBehavior {
    pub fn label(&self) -> &'static str {
        match self {
            InterceptorBehavior::CopyToAttacker => "copy_to_attacker",
            InterceptorBehavior::CaptureAuthChallenge => "capture_auth_challenge",
            InterceptorBehavior::ReplaceRegistrationKey { .. } => "replace_registration_key",
            InterceptorBehavior::TamperField { .. } => "tamper_field",
            InterceptorBehavior::Drop { .. } => "drop",
        }
    }
}

/// Which channels an interceptor sees.
#[derive(Debug, Clone)]
pub struct InterceptorSelector {
    pub kind: ChannelKind,
    pub client_host: Option<HostId>,
    pub endpoint: Option<EndpointId>,
}

impl InterceptorSelector {
    pub fn matches(&self, channel: &Channel) -> bool {
        self.kind == channel.kind
            && self
                .client_host
                .as_ref()
                .map(|h| *h == channel.client_host)
                .unwrap_or(true)
            && self
                .endpoint
                .as_ref()
                .map(|e| *e == channel.endpoint)
                .unwrap_or(true)
    }
}

#[derive(Debug, Clone)]
pub struct Interceptor {
    pub handle: InterceptorHandle,
    pub actor: HostId,
    pub selector: InterceptorSelector,
    pub behavior: InterceptorBehavior,
}

/// Evidence attached to privileged-mutation events so capability soundness
/// can be re-checked from the transcript alone.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CapabilityEvidence {
    pub target_compromised: bool,
    pub same_segment: bool,
}

#[derive(Debug, Default)]
pub struct Fabric {
    pub hosts: BTreeMap<HostId, Host>,
    pub endpoints: BTreeMap<EndpointId, Endpoint>,
    dns_base: BTreeMap<String, String>,
    dns_overrides: Vec<DnsOverride>,
    route_base: BTreeMap<String, EndpointId>,
    route_overrides: Vec<RouteOverride>,
    pub channels: BTreeMap<ChannelId, Channel>,
    pub interceptors: Vec<Interceptor>,
    next_channel: ChannelId,
    next_interceptor: InterceptorHandle,
}

impl Fabric {
    pub fn new() -> Self {
        Fabric::default()
    }

    pub fn add_host(&mut self, host: Host) {
        self.hosts.insert(host.id.clone(), host);
    }

    pub fn add_endpoint(&mut self, endpoint: Endpoint) {
        self.endpoints.insert(endpoint.id.clone(), endpoint);
    }

    pub fn add_dns_record(&mut self, name: &str, address: &str) {
        self.dns_base.insert(name.to_string(), address.to_string());
    }

    pub fn add_route(&mut self, address: &str, endpoint: &str) {
        self.route_base
            .insert(address.to_string(), endpoint.to_string());
    }

    pub fn host(&self, id: &str) -> &Host {
        self.hosts.get(id).expect("known host")
    }

    pub fn host_mut(&mut self, id: &str) -> &mut Host {
        self.hosts.get_mut(id).expect("known host")
    }

    fn same_segment(&self, a: &str, b: &str) -> bool {
        self.hosts.get(a).map(|h| h.segment.clone()) == self.hosts.get(b).map(|h| h.segment.clone())
    }

    pub fn evidence(&self, actor: &str, target: &str) -> CapabilityEvidence {
        CapabilityEvidence {
            target_compromised: self
                .hosts
                .get(target)
                .map(|h| h.compromised)
                .unwrap_or(false),
            same_segment: self.same_segment(actor, target),
        }
    }

    // -- name resolution -----------------------------------------------------

    /// Resolve through the host's cache first, then overrides targeting that
    /// host, then the base table. Results are cached: a warm cache defeats a
    /// later spoof until someone flushes it.
    pub fn resolve_name(&mut self, host_id: &str, name: &str) -> Result<String, FabricError> {
        if name.is_empty() {
            return Err(FabricError::NameResolutionFailure);
        }
        if let Some(cached) = self.host(host_id).dns_cache.get(name) {
            return Ok(cached.clone());
        }
        let resolved = self
            .effective_dns_override(host_id, name)
            .or_else(|| self.dns_base.get(name).cloned())
            .or_else(|| {
                self.dns_base
                    .iter()
                    .rev()
                    .find(|(pattern, _)| name_matches(pattern, name))
                    .map(|(_, addr)| addr.clone())
            })
            .ok_or(FabricError::NameResolutionFailure)?;
        self.host_mut(host_id)
            .dns_cache
            .insert(name.to_string(), resolved.clone());
        Ok(resolved)
    }

    /// A spoofed record only answers if the actor actually sees the victim's
    /// queries, i.e. holds an active route override putting them on-path for
    /// that target. A spoof without the path position is inert.
    fn effective_dns_override(&self, host_id: &str, name: &str) -> Option<String> {
        self.dns_overrides
            .iter()
            .rev()
            .filter(|o| o.target == host_id && name_matches(&o.pattern, name))
            .find(|o| {
                self.route_overrides
                    .iter()
                    .any(|r| r.actor == o.actor && r.target == o.target)
            })
            .map(|o| o.address.clone())
    }

    pub fn route_lookup(&self, host_id: &str, address: &str) -> Result<EndpointId, FabricError> {
        self.route_overrides
            .iter()
            .rev()
            .find(|o| o.target == host_id && o.address == address)
            .map(|o| o.endpoint.clone())
            .or_else(|| self.route_base.get(address).cloned())
            .ok_or(FabricError::ConnectionRefused)
    }

    // -- privileged mutations --------------------------------------------------

    pub fn apply_dns_override(
        &mut self,
        actor: &str,
        target: &str,
        pattern: &str,
        address: &str,
    ) -> Result<CapabilityEvidence, FabricError> {
        let evidence = self.evidence(actor, target);
        if !(evidence.same_segment || evidence.target_compromised) {
            return Err(FabricError::PositionRequired);
        }
        self.dns_overrides.push(DnsOverride {
            target: target.to_string(),
            pattern: pattern.to_string(),
            address: address.to_string(),
            actor: actor.to_string(),
        });
        Ok(evidence)
    }

    /// The ARP-poisoning stand-in. Anti-ARP-spoofing on the target makes the
    /// poisoning fail, which is the stated defense.
    pub fn apply_route_override(
        &mut self,
        actor: &str,
        target: &str,
        address: &str,
        endpoint: &str,
    ) -> Result<CapabilityEvidence, FabricError> {
        let evidence = self.evidence(actor, target);
        if !(evidence.same_segment || evidence.target_compromised) {
            return Err(FabricError::PositionRequired);
        }
        if self.host(target).anti_arp_spoofing {
            return Err(FabricError::PositionRequired);
        }
        self.route_overrides.push(RouteOverride {
            target: target.to_string(),
            address: address.to_string(),
            endpoint: endpoint.to_string(),
            actor: actor.to_string(),
        });
        Ok(evidence)
    }

    pub fn remove_overrides_by(&mut self, actor: &str) -> usize {
        let before = self.dns_overrides.len() + self.route_overrides.len();
        self.dns_overrides.retain(|o| o.actor != actor);
        self.route_overrides.retain(|o| o.actor != actor);
        before - (self.dns_overrides.len() + self.route_overrides.len())
    }

    pub fn flush_dns_cache(
        &mut self,
        actor: &str,
        target: &str,
    ) -> Result<CapabilityEvidence, FabricError> {
        let evidence = self.evidence(actor, target);
        if actor != target && !evidence.target_compromised {
            return Err(FabricError::PrivilegeError);
        }
        self.host_mut(target).dns_cache.clear();
        Ok(evidence)
    }

    pub fn install_trust_anchor(
        &mut self,
        actor: &str,
        target: &str,
        anchor: &str,
    ) -> Result<CapabilityEvidence, FabricError> {
        let evidence = self.evidence(actor, target);
        if actor != target && !evidence.target_compromised {
            return Err(FabricError::PrivilegeError);
        }
        self.host_mut(target).trust_store.insert(anchor.to_string());
        Ok(evidence)
    }

    // -- channels ------------------------------------------------------------

    /// Resolve, route and (for https) evaluate the presented certificate
    /// against the client host's trust store.
    pub fn establish_web_channel(
        &mut self,
        client_host: &str,
        name: &str,
        scheme: Scheme,
    ) -> Result<ChannelId, FabricError> {
        let address = self.resolve_name(client_host, name)?;
        let endpoint_id = self.route_lookup(client_host, &address)?;
        let endpoint = self
            .endpoints
            .get(&endpoint_id)
            .filter(|e| e.listening)
            .ok_or(FabricError::ConnectionRefused)?;
        let tls_trusted = match scheme {
            Scheme::Http => false,
            Scheme::Https => {
                let cert = endpoint
                    .certificate_for(name)
                    .ok_or(FabricError::TlsUntrusted)?;
                cert.trusted_by(self.host(client_host), name)
            }
        };
        Ok(self.insert_channel(Channel {
            id: 0,
            kind: ChannelKind::Web,
            client_host: client_host.to_string(),
            endpoint: endpoint_id,
            requested_name: name.to_string(),
            scheme: Some(scheme),
            tls_trusted,
        }))
    }

    /// Local client-to-authenticator transport; no naming or TLS involved.
    pub fn establish_ctap_channel(
        &mut self,
        client_host: &str,
        endpoint_id: &str,
    ) -> Result<ChannelId, FabricError> {
        if !self
            .endpoints
            .get(endpoint_id)
            .map(|e| e.listening && e.kind == EndpointKind::CtapAuthenticator)
            .unwrap_or(false)
        {
            return Err(FabricError::ConnectionRefused);
        }
        Ok(self.insert_channel(Channel {
            id: 0,
            kind: ChannelKind::Ctap,
            client_host: client_host.to_string(),
            endpoint: endpoint_id.to_string(),
            requested_name: endpoint_id.to_string(),
            scheme: None,
            tls_trusted: true,
        }))
    }

    fn insert_channel(&mut self, mut channel: Channel) -> ChannelId {
        self.next_channel += 1;
        channel.id = self.next_channel;
        self.channels.insert(channel.id, channel);
        self.next_channel
    }

    pub fn channel(&self, id: ChannelId) -> Result<&Channel, FabricError> {
        self.channels.get(&id).ok_or(FabricError::UnknownChannel)
    }

    // -- interceptors -----------------------------------------------------------

    /// Position check at registration time: a CTAP hook on someone else's
    /// device is a local AITM (requires compromise); a web hook requires the
    /// actor to be the channel's client, the endpoint's host or on-path via a
    /// route override it placed.
    pub fn register_interceptor(
        &mut self,
        actor: &str,
        selector: InterceptorSelector,
        behavior: InterceptorBehavior,
    ) -> Result<InterceptorHandle, FabricError> {
        let positioned = match selector.kind {
            ChannelKind::Ctap => {
                let device_host = selector
                    .endpoint
                    .as_ref()
                    .and_then(|e| self.endpoints.get(e))
                    .map(|e| e.host.clone())
                    .or_else(|| selector.client_host.clone());
                match device_host {
                    Some(h) => h == actor || self.host(&h).compromised,
                    None => false,
                }
            }
            ChannelKind::Web => {
                let client_ok = selector.client_host.as_deref() == Some(actor);
                let endpoint_ok = selector
                    .endpoint
                    .as_ref()
                    .and_then(|e| self.endpoints.get(e))
                    .map(|e| e.host == actor)
                    .unwrap_or(false);
                let on_path = selector
                    .client_host
                    .as_ref()
                    .map(|client| {
                        self.route_overrides
                            .iter()
                            .any(|o| o.actor == actor && o.target == *client)
                            || self.host(client).compromised
                    })
                    .unwrap_or(false);
                client_ok || endpoint_ok || on_path
            }
        };
        if !positioned {
            return Err(FabricError::PositionRequired);
        }
        self.next_interceptor += 1;
        let handle = self.next_interceptor;
        self.interceptors.push(Interceptor {
            handle,
            actor: actor.to_string(),
            selector,
            behavior,
        });
        Ok(handle)
    }

    pub fn matching_interceptors(&self, channel: &Channel) -> Vec<Interceptor> {
        self.interceptors
            .iter()
            .filter(|i| i.selector.matches(channel))
            .cloned()
            .collect()
    }

    pub fn dns_override_count(&self) -> usize {
        self.dns_overrides.len()
    }

    pub fn route_override_count(&self) -> usize {
        self.route_overrides.len()
    }
}
