//! Protocol-aware user agent.
//!
//! Intercepts authorization requests that opt into blinded derivation,
//! checks that the requesting page may use the audience it asks for, and
//! rewrites the request so the identity provider sees only a blinded
//! audience, a constant return target and an origin-bound nonce. On the
//! return leg it forwards the token together with the blind to the original
//! target and forgets the flow.

use std::collections::HashMap;
use std::net::IpAddr;
use std::path::Path;
use std::sync::Mutex;

use bison_core::binding::nonce_binding;
use bison_core::derivation::{blind, unblind, AudienceId, Blind};
use bison_core::encoding::{element_from_b64, element_to_b64};
use bison_core::group::PrimeGroup;
use bison_core::token::{SignedIdToken, BISON_SUBJECT_TYPE};
use psl::Psl;
use url::{Host, Url};

use crate::sp::random_token;
use crate::wire::{param, AuthorizationRequest, BISON_REDIRECT_URI};

/// Lifetime of an in-flight rewrite record.
pub const RECORD_TTL_SECS: u64 = 600;

/// The page that initiated a navigation, as the agent observed it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OriginContext {
    /// Lowercase scheme and host, default port elided, no trailing slash.
    pub current_origin: String,
    pub is_secure_context: bool,
    host: Option<Host<String>>,
}

impl OriginContext {
    pub fn from_url(url: &Url) -> Self {
        let current_origin = url.origin().ascii_serialization();
        let host = url.host().map(|h| h.to_owned());
        let is_secure_context = match (url.scheme(), &host) {
            ("https" | "wss", Some(_)) => true,
            ("http" | "ws", Some(Host::Domain(d))) => d == "localhost" || d.ends_with(".localhost"),
            ("http" | "ws", Some(Host::Ipv4(ip))) => IpAddr::V4(*ip).is_loopback(),
            ("http" | "ws", Some(Host::Ipv6(ip))) => IpAddr::V6(*ip).is_loopback(),
            _ => false,
        };
        Self {
            current_origin,
            is_secure_context,
            host,
        }
    }

    pub fn host(&self) -> Option<&Host<String>> {
        self.host.as_ref()
    }
}

/// Source of public-suffix data: the snapshot compiled into the `psl`
/// crate, or a list loaded from a file.
pub enum SuffixList {
    Bundled,
    Custom(publicsuffix::List),
}

impl SuffixList {
    pub fn parse(text: &str) -> Result<Self, publicsuffix::Error> {
        text.parse().map(Self::Custom)
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| std::io::Error::other(format!("{e:?}")))
    }

    /// Whether `name` lies at or below a registrable domain, i.e. is not a
    /// public suffix itself.
    pub fn is_registrable(&self, name: &str) -> bool {
        let bytes = name.as_bytes();
        match self {
            Self::Bundled => psl::List.domain(bytes).is_some(),
            Self::Custom(list) => list.domain(bytes).is_some(),
        }
    }
}

/// Whether a page at `origin` may request `audience`: the audience must be
/// the page's origin, its host, or a registrable domain suffix of the host.
pub fn authorize_audience(suffixes: &SuffixList, audience: &str, origin: &OriginContext) -> bool {
    if !origin.is_secure_context {
        return false;
    }
    let audience = audience.trim_end_matches('.').to_ascii_lowercase();
    if audience.is_empty() {
        return false;
    }
    if audience == origin.current_origin {
        return true;
    }
    match &origin.host {
        Some(Host::Domain(host)) => {
            let host = host.trim_end_matches('.');
            host == audience
                || (host.ends_with(&format!(".{audience}")) && suffixes.is_registrable(&audience))
        }
        Some(ip) => ip.to_string() == audience,
        None => false,
    }
}

/// Consent decision for one rewrite.
pub trait Consent: Send + Sync {
    fn approve(&self, sp_origin: &str, audience: &str) -> bool;
}

pub struct AutoApprove;

impl Consent for AutoApprove {
    fn approve(&self, _: &str, _: &str) -> bool {
        true
    }
}

pub struct DenyAll;

impl Consent for DenyAll {
    fn approve(&self, _: &str, _: &str) -> bool {
        false
    }
}

impl<F: Fn(&str, &str) -> bool + Send + Sync> Consent for F {
    fn approve(&self, sp_origin: &str, audience: &str) -> bool {
        self(sp_origin, audience)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("user denied consent")]
    ConsentDenied,
    #[error("service provider supplied an invalid blind")]
    MalformedSpBlind,
    #[error("no in-flight flow for this return")]
    UnknownReturn,
    #[error("in-flight flow timed out")]
    StaleRecord,
}

/// Why a request was left untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassReason {
    NotOpenId,
    NotOffered,
    NotSecureContext,
    AudienceNotAuthorized,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum RewriteOutcome {
    Rewritten {
        request: AuthorizationRequest,
        handle: String,
    },
    PassThrough(PassReason),
}

/// State of one in-flight flow, held until the return leg.
#[derive(Debug, Clone)]
pub struct RewriteRecord<G: PrimeGroup> {
    pub original_redirect_uri: String,
    pub blind: Blind<G>,
    pub audience: String,
    pub created_at: u64,
}

/// The post the agent sends on to the service provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardedPost {
    pub target: String,
    pub id_token: String,
    pub blind: String,
}

impl ForwardedPost {
    pub fn fields(&self) -> Vec<(String, String)> {
        vec![
            (param::ID_TOKEN.to_owned(), self.id_token.clone()),
            (param::BLIND.to_owned(), self.blind.clone()),
        ]
    }

    /// The pseudonym the service provider should derive, computed on the
    /// user side from the signed pair and the blind.
    pub fn expected_pseudonym<G: PrimeGroup>(&self) -> Option<String> {
        let token = SignedIdToken::parse(&self.id_token).ok()?;
        if token.claims.pairwise_subject_type.as_deref() != Some(BISON_SUBJECT_TYPE) {
            return None;
        }
        let b = element_from_b64::<G>(&token.claims.sub).ok()?;
        let r = Blind::<G>::from_param(&self.blind).ok()?;
        Some(unblind(&b, &r).encode())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReturnOutcome {
    Forward(ForwardedPost),
    /// Not addressed to the constant target; leave it alone.
    PassThrough,
}

pub struct Agent<G: PrimeGroup> {
    suffixes: SuffixList,
    consent: Box<dyn Consent>,
    records: Mutex<HashMap<String, RewriteRecord<G>>>,
    ttl: u64,
}

impl<G: PrimeGroup> Agent<G> {
    pub fn new(suffixes: SuffixList, consent: impl Consent + 'static) -> Self {
        Self {
            suffixes,
            consent: Box::new(consent),
            records: Mutex::new(HashMap::new()),
            ttl: RECORD_TTL_SECS,
        }
    }

    pub fn with_ttl(mut self, ttl: u64) -> Self {
        self.ttl = ttl;
        self
    }

    pub fn suffixes(&self) -> &SuffixList {
        &self.suffixes
    }

    /// Number of in-flight records.
    pub fn records_held(&self) -> usize {
        self.records.lock().unwrap().len()
    }

    /// Decides whether to blind `req` and does so if allowed.
    pub fn rewrite_request(
        &self,
        req: &AuthorizationRequest,
        origin: &OriginContext,
        now: u64,
    ) -> Result<RewriteOutcome, AgentError> {
        if !req.is_openid() {
            return Ok(RewriteOutcome::PassThrough(PassReason::NotOpenId));
        }
        if !req.offers_bison() {
            return Ok(RewriteOutcome::PassThrough(PassReason::NotOffered));
        }
        if !origin.is_secure_context {
            return Ok(RewriteOutcome::PassThrough(PassReason::NotSecureContext));
        }
        let audience = req.audience();
        if !authorize_audience(&self.suffixes, audience, origin) {
            return Ok(RewriteOutcome::PassThrough(
                PassReason::AudienceNotAuthorized,
            ));
        }
        if !self.consent.approve(&origin.current_origin, audience) {
            return Err(AgentError::ConsentDenied);
        }
        let r = match req.extra.get(param::BLIND) {
            Some(p) => Blind::from_param(p).map_err(|_| AgentError::MalformedSpBlind)?,
            None => Blind::sample(&mut rand::rngs::OsRng).expect("OS entropy"),
        };
        Ok(self.rewrite_with_blind(req, origin, r, now))
    }

    /// The rewrite itself, with the blind supplied by the caller. Performs no
    /// authorization or consent checks.
    pub fn rewrite_with_blind(
        &self,
        req: &AuthorizationRequest,
        origin: &OriginContext,
        r: Blind<G>,
        now: u64,
    ) -> RewriteOutcome {
        let (request, record) = rewrite(req, origin, r, now);
        let handle = random_token();
        let mut records = self.records.lock().unwrap();
        records.retain(|_, rec| rec.created_at + self.ttl > now);
        records.insert(handle.clone(), record);
        RewriteOutcome::Rewritten { request, handle }
    }

    /// Handles a form post the identity provider sent through the agent.
    pub fn handle_return(
        &self,
        handle: &str,
        post_target: &str,
        id_token: &str,
        now: u64,
    ) -> Result<ReturnOutcome, AgentError> {
        if post_target != BISON_REDIRECT_URI {
            return Ok(ReturnOutcome::PassThrough);
        }
        let record = self
            .records
            .lock()
            .unwrap()
            .remove(handle)
            .ok_or(AgentError::UnknownReturn)?;
        if record.created_at + self.ttl <= now {
            return Err(AgentError::StaleRecord);
        }
        Ok(ReturnOutcome::Forward(ForwardedPost {
            target: record.original_redirect_uri,
            id_token: id_token.to_owned(),
            blind: record.blind.to_param(),
        }))
    }
}

/// The request rewrite: blinded audience as `client_id`, constant redirect
/// target, origin-bound nonce, marker set, everything else dropped.
pub fn rewrite<G: PrimeGroup>(
    req: &AuthorizationRequest,
    origin: &OriginContext,
    r: Blind<G>,
    now: u64,
) -> (AuthorizationRequest, RewriteRecord<G>) {
    let audience = req.audience().to_owned();
    let a = blind(&AudienceId::<G>::derive(audience.as_bytes()), &r);
    let request = AuthorizationRequest {
        scope: req.scope.clone(),
        client_id: element_to_b64::<G>(&a),
        redirect_uri: BISON_REDIRECT_URI.to_owned(),
        nonce: nonce_binding(&origin.current_origin, &req.nonce),
        response_type: req.response_type.clone(),
        response_mode: req.response_mode.clone(),
        pairwise_subject_type: Some(BISON_SUBJECT_TYPE.to_owned()),
        extra: Default::default(),
    };
    let record = RewriteRecord {
        original_redirect_uri: req.redirect_uri.clone(),
        blind: r,
        audience,
        created_at: now,
    };
    (request, record)
}
