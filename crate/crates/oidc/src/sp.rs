//! Mock service provider.
//!
//! Starts authentication with a fresh one-time nonce, then validates the
//! returned token: signature, blinding check, origin-bound nonce, and
//! finally unblinds the pseudonym. Pending authentications are the only
//! mutable state and are redeemed at most once.

use std::collections::HashMap;
use std::marker::PhantomData;
use std::sync::{Arc, Mutex};

use axum::extract::{Form, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{Html, IntoResponse, Redirect, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bison_core::binding::nonce_binding;
use bison_core::derivation::{unblind, verify_blind, AudienceId, Blind, BlindedPair};
use bison_core::encoding::b64url;
use bison_core::group::PrimeGroup;
use bison_core::token::{
    verify_token, TokenError, VerificationKey, BISON_SUBJECT_TYPE, CLOCK_SKEW_SECS,
};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::idp::DISCOVERY_PATH;
use crate::wire::{
    param, AuthorizationRequest, DiscoveryDocument, RESPONSE_MODE_FORM_POST,
    RESPONSE_TYPE_ID_TOKEN, SCOPE_OPENID,
};

pub const RETURN_PATH: &str = "/return";
pub const AUTH_PATH: &str = "/auth";
pub const PENDING_COOKIE: &str = "bison_pending";
pub const PENDING_TTL_SECS: u64 = 600;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpError {
    #[error("no pending authentication for this session")]
    UnknownSession,
    #[error("nonce already redeemed")]
    ReplayDetected,
    #[error("blind does not reproduce the signed blinded audience")]
    BlindMismatch,
    #[error("nonce is not bound to this origin and pending authentication")]
    NonceBindingMismatch,
    #[error("token audience is not this client")]
    AudienceMismatch,
    #[error("token was issued before authentication started")]
    TokenPredatesRequest,
    #[error("bad token: {0}")]
    BadToken(#[from] TokenError),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

impl SpError {
    /// Failure class name, as reported to clients.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::UnknownSession => "UnknownSession",
            Self::ReplayDetected => "ReplayDetected",
            Self::BlindMismatch => "BlindMismatch",
            Self::NonceBindingMismatch => "NonceBindingMismatch",
            Self::AudienceMismatch => "AudienceMismatch",
            Self::TokenPredatesRequest => "TokenPredatesRequest",
            Self::BadToken(_) => "BadToken",
            Self::MalformedResponse(_) => "MalformedResponse",
        }
    }

    fn status(&self) -> StatusCode {
        match self {
            Self::ReplayDetected => StatusCode::CONFLICT,
            Self::MalformedResponse(_) | Self::UnknownSession => StatusCode::BAD_REQUEST,
            _ => StatusCode::UNAUTHORIZED,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error("discovery request failed: {0}")]
    Discovery(#[from] reqwest::Error),
    #[error("identity provider does not support blinded derivation")]
    NoBisonSupport,
    #[error("no usable signing key in discovery document")]
    NoKey,
    #[error("invalid URL: {0}")]
    Url(#[from] url::ParseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DerivationMode {
    #[serde(rename = "bison")]
    Bison,
    #[serde(rename = "ppid-fallback")]
    PpidFallback,
}

impl DerivationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bison => "bison",
            Self::PpidFallback => "ppid-fallback",
        }
    }
}

/// Outcome of a successful authentication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionResult {
    pub pseudonym: String,
    pub derivation_mode: DerivationMode,
    pub audience: String,
}

#[derive(Debug, Clone)]
pub struct SpConfig {
    /// Canonical origin; also the client id.
    pub origin: String,
    /// Audience to request. Defaults to the origin.
    pub audience: Option<String>,
    /// Opt into blinded derivation.
    pub bison: bool,
    /// Sample the blind here and require the agent to use it.
    pub sp_samples_blind: bool,
}

impl SpConfig {
    pub fn new(origin: &Url) -> Self {
        Self {
            origin: origin.origin().ascii_serialization(),
            audience: None,
            bison: true,
            sp_samples_blind: false,
        }
    }

    pub fn audience(&self) -> &str {
        self.audience.as_deref().unwrap_or(&self.origin)
    }

    pub fn redirect_uri(&self) -> String {
        format!("{}{RETURN_PATH}", self.origin)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingAuth {
    pub nonce: String,
    pub audience: String,
    pub created_at: u64,
    pub consumed: bool,
    /// `blind` parameter chosen by the service provider, if any.
    pub blind: Option<String>,
}

/// In-memory pending authentications keyed by an unguessable handle.
/// Consumption is an atomic check-and-set under the store lock.
pub struct PendingStore {
    entries: Mutex<HashMap<String, PendingAuth>>,
    ttl: u64,
}

impl PendingStore {
    pub fn new(ttl: u64) -> Self {
        Self {
            entries: Mutex::new(HashMap::new()),
            ttl,
        }
    }

    pub fn insert(&self, pending: PendingAuth, now: u64) -> String {
        let handle = random_token();
        let mut entries = self.entries.lock().unwrap();
        entries.retain(|_, p| p.created_at + self.ttl > now);
        entries.insert(handle.clone(), pending);
        handle
    }

    /// A snapshot of a live (possibly consumed) entry.
    pub fn get(&self, handle: &str, now: u64) -> Option<PendingAuth> {
        let entries = self.entries.lock().unwrap();
        entries
            .get(handle)
            .filter(|p| p.created_at + self.ttl > now)
            .cloned()
    }

    /// Marks the entry consumed; fails if it already was.
    pub fn consume(&self, handle: &str) -> Result<(), SpError> {
        let mut entries = self.entries.lock().unwrap();
        let entry = entries.get_mut(handle).ok_or(SpError::UnknownSession)?;
        if entry.consumed {
            return Err(SpError::ReplayDetected);
        }
        entry.consumed = true;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// 32 random bytes, base64url.
pub fn random_token() -> String {
    let mut bytes = [0u8; 32];
    rand::rngs::OsRng.fill_bytes(&mut bytes);
    b64url(&bytes)
}

/// Checks a blinded response: the blind must reproduce the signed blinded
/// audience for `audience`, and the nonce must be bound to `origin` and the
/// pending nonce.
pub fn check_blinded<G: PrimeGroup>(
    audience: &str,
    origin: &str,
    pending_nonce: &str,
    token_nonce: &str,
    pair: &BlindedPair<G>,
    r: &Blind<G>,
) -> Result<(), SpError> {
    let audience = AudienceId::<G>::derive(audience.as_bytes());
    if !verify_blind(&audience, r, &pair.blinded_audience) {
        return Err(SpError::BlindMismatch);
    }
    if token_nonce != nonce_binding(origin, pending_nonce) {
        return Err(SpError::NonceBindingMismatch);
    }
    Ok(())
}

/// The identity provider as the service provider trusts it.
#[derive(Debug, Clone)]
pub struct TrustedIssuer {
    pub issuer: String,
    pub authorization_endpoint: Url,
    pub key: VerificationKey,
}

impl TrustedIssuer {
    pub fn from_discovery(doc: &DiscoveryDocument) -> Result<Self, SetupError> {
        let key = doc
            .jwks
            .keys
            .iter()
            .find_map(|jwk| VerificationKey::from_jwk(jwk).ok())
            .ok_or(SetupError::NoKey)?;
        Ok(Self {
            issuer: doc.issuer.clone(),
            authorization_endpoint: Url::parse(&doc.authorization_endpoint)?,
            key,
        })
    }
}

pub struct ServiceProvider<G: PrimeGroup> {
    config: SpConfig,
    idp: TrustedIssuer,
    pending: PendingStore,
    _group: PhantomData<G>,
}

impl<G: PrimeGroup> ServiceProvider<G> {
    pub fn new(config: SpConfig, doc: &DiscoveryDocument) -> Result<Self, SetupError> {
        if config.bison
            && !doc
                .pairwise_subject_types
                .iter()
                .any(|t| t == BISON_SUBJECT_TYPE)
        {
            return Err(SetupError::NoBisonSupport);
        }
        Ok(Self {
            idp: TrustedIssuer::from_discovery(doc)?,
            config,
            pending: PendingStore::new(PENDING_TTL_SECS),
            _group: PhantomData,
        })
    }

    /// Fetches the identity provider's discovery document and builds the
    /// service provider from it.
    pub async fn connect(config: SpConfig, idp_base: &Url) -> Result<Self, SetupError> {
        let doc: DiscoveryDocument = reqwest::get(idp_base.join(DISCOVERY_PATH)?)
            .await?
            .error_for_status()?
            .json()
            .await?;
        Self::new(config, &doc)
    }

    pub fn config(&self) -> &SpConfig {
        &self.config
    }

    pub fn pending(&self) -> &PendingStore {
        &self.pending
    }

    /// Creates a pending authentication and the request to send the user
    /// to. Returns the pending handle alongside.
    pub fn start_auth(&self, now: u64) -> (String, AuthorizationRequest) {
        let nonce = random_token();
        let audience = self.config.audience().to_owned();
        let mut pairs = vec![
            (param::SCOPE, SCOPE_OPENID.to_owned()),
            (param::RESPONSE_TYPE, RESPONSE_TYPE_ID_TOKEN.to_owned()),
            (param::RESPONSE_MODE, RESPONSE_MODE_FORM_POST.to_owned()),
            (param::CLIENT_ID, self.config.origin.clone()),
            (param::REDIRECT_URI, self.config.redirect_uri()),
            (param::NONCE, nonce.clone()),
        ];
        let mut blind = None;
        if self.config.bison {
            pairs.push((param::PAIRWISE_SUBJECT_TYPES, BISON_SUBJECT_TYPE.to_owned()));
            if audience != self.config.origin {
                pairs.push((param::AUDIENCE_ID, audience.clone()));
            }
            if self.config.sp_samples_blind {
                let r = Blind::<G>::sample(&mut rand::rngs::OsRng).expect("OS entropy");
                pairs.push((param::BLIND, r.to_param()));
                blind = Some(r.to_param());
            }
        }
        let req = AuthorizationRequest::from_pairs(pairs).expect("all required parameters set");
        let handle = self.pending.insert(
            PendingAuth {
                nonce,
                audience,
                created_at: now,
                consumed: false,
                blind,
            },
            now,
        );
        (handle, req)
    }

    pub fn authorization_url(&self, req: &AuthorizationRequest) -> Url {
        req.to_url(&self.idp.authorization_endpoint)
    }

    /// Validates a returned token and derives the pseudonym.
    ///
    /// All checks run before the pending entry is consumed, so a rejected
    /// attempt does not burn the nonce; among concurrent valid attempts only
    /// the first to consume succeeds.
    pub fn complete_auth(
        &self,
        handle: &str,
        id_token: &str,
        blind_param: Option<&str>,
        now: u64,
    ) -> Result<SessionResult, SpError> {
        let pending = self
            .pending
            .get(handle, now)
            .ok_or(SpError::UnknownSession)?;
        let claims = verify_token::<G>(id_token, &self.idp.key, &self.idp.issuer, now)?;
        if claims.iat + CLOCK_SKEW_SECS < pending.created_at {
            return Err(SpError::TokenPredatesRequest);
        }
        if claims.is_bison() {
            if !self.config.bison {
                return Err(SpError::MalformedResponse(
                    "blinded token without opt-in".into(),
                ));
            }
            let blind_param =
                blind_param.ok_or_else(|| SpError::MalformedResponse("missing blind".into()))?;
            let r = Blind::<G>::from_param(blind_param)
                .map_err(|e| SpError::MalformedResponse(format!("blind: {e}")))?;
            if pending.blind.as_deref().is_some_and(|b| b != blind_param) {
                return Err(SpError::BlindMismatch);
            }
            let pair = claims.blinded_pair::<G>()?;
            check_blinded(
                &pending.audience,
                &self.config.origin,
                &pending.nonce,
                &claims.nonce,
                &pair,
                &r,
            )?;
            self.pending.consume(handle)?;
            Ok(SessionResult {
                pseudonym: unblind(&pair.blinded_pseudonym, &r).encode(),
                derivation_mode: DerivationMode::Bison,
                audience: pending.audience,
            })
        } else {
            if claims.nonce != pending.nonce {
                return Err(SpError::NonceBindingMismatch);
            }
            if claims.aud != self.config.origin {
                return Err(SpError::AudienceMismatch);
            }
            self.pending.consume(handle)?;
            Ok(SessionResult {
                pseudonym: claims.sub,
                derivation_mode: DerivationMode::PpidFallback,
                audience: self.config.origin.clone(),
            })
        }
    }

    /// HTTP routes: landing page, `/auth` and `/return`.
    pub fn router(self: Arc<Self>) -> Router {
        Router::new()
            .route("/", get(landing))
            .route(AUTH_PATH, get(start::<G>))
            .route(RETURN_PATH, post(finish::<G>))
            .with_state(self)
    }
}

async fn landing() -> Html<&'static str> {
    Html(concat!(
        "<!DOCTYPE html><html><head><title>Service provider</title></head><body>",
        "<h1>Service provider</h1><a href=\"/auth\">Log in</a></body></html>"
    ))
}

async fn start<G: PrimeGroup>(State(sp): State<Arc<ServiceProvider<G>>>) -> Response {
    let (handle, req) = sp.start_auth(crate::unix_now());
    let cookie = format!("{PENDING_COOKIE}={handle}; Path=/; HttpOnly; SameSite=Lax");
    (
        [(header::SET_COOKIE, cookie)],
        Redirect::to(sp.authorization_url(&req).as_str()),
    )
        .into_response()
}

fn pending_cookie(headers: &HeaderMap) -> Option<String> {
    headers
        .get_all(header::COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|kv| kv.trim().split_once('='))
        .find(|(k, _)| *k == PENDING_COOKIE)
        .map(|(_, v)| v.to_owned())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReturnForm {
    pub id_token: Option<String>,
    pub blind: Option<String>,
}

/// JSON error body of `/return`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

async fn finish<G: PrimeGroup>(
    State(sp): State<Arc<ServiceProvider<G>>>,
    headers: HeaderMap,
    Form(form): Form<ReturnForm>,
) -> Response {
    let json = headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("application/json"));
    let result = match (pending_cookie(&headers), form.id_token) {
        (None, _) => Err(SpError::UnknownSession),
        (_, None) => Err(SpError::MalformedResponse("missing id_token".into())),
        (Some(handle), Some(token)) => {
            sp.complete_auth(&handle, &token, form.blind.as_deref(), crate::unix_now())
        }
    };
    match (result, json) {
        (Ok(session), true) => Json(session).into_response(),
        (Ok(session), false) => Html(format!(
            concat!(
                "<!DOCTYPE html><html><body><h1>Signed in</h1>",
                "<p>Pseudonym: <code>{}</code></p><p>Derivation: {:?}</p><p>Audience: {}</p>",
                "</body></html>"
            ),
            session.pseudonym,
            session.derivation_mode,
            html_escape::encode_text(&session.audience)
        ))
        .into_response(),
        (Err(e), true) => (
            e.status(),
            Json(ErrorBody {
                error: e.kind().to_owned(),
                detail: e.to_string(),
            }),
        )
            .into_response(),
        (Err(e), false) => (
            e.status(),
            Html(format!(
                "<!DOCTYPE html><html><body><p class=\"error\" data-code=\"{}\">{}</p></body></html>",
                e.kind(),
                html_escape::encode_text(&e.to_string())
            )),
        )
            .into_response(),
    }
}
