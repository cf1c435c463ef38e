//! Mock identity provider.
//!
//! Authentication is an explicit choice among a few stored accounts. For a
//! blinded request the provider evaluates the blinded audience carried in
//! `client_id` under the account's secret scalar and signs the pair; without
//! the marker it issues a conventional pairwise identifier instead.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Form, RawQuery, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use bison_core::counter;
use bison_core::derivation::{blind_eval, UserId};
use bison_core::encoding::{b64url, b64url_decode, element_from_b64, element_to_b64};
use bison_core::group::PrimeGroup;
use bison_core::token::{
    issue_token, IdTokenClaims, JwkSet, SignedIdToken, TokenError, TokenSigner, BISON_SUBJECT_TYPE,
    DEFAULT_TOKEN_LIFETIME_SECS,
};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha512};
use url::Url;

use crate::wire::{
    hidden_input, param, render_form_post, AuthorizationRequest, DiscoveryDocument, WireError,
    RESPONSE_MODE_FORM_POST, RESPONSE_TYPE_ID_TOKEN, SCOPE_OPENID,
};

pub const DISCOVERY_PATH: &str = "/.well-known/openid-configuration";
pub const LOGIN_PATH: &str = "/login";
pub const DEFAULT_ACCOUNTS: [&str; 3] = ["alice", "bob", "carol"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdpError {
    #[error("unknown account {0:?}")]
    UnknownAccount(String),
    #[error("account is suspended")]
    SuspendedAccount,
    #[error("client_id is not a valid blinded audience")]
    MalformedBlindedAudience,
    #[error("malformed request: {0}")]
    MalformedRequest(String),
    #[error("redirect_uri is not registered for this client")]
    UnregisteredRedirect,
    #[error(transparent)]
    Token(#[from] TokenError),
}

impl IdpError {
    /// Stable machine-readable code, embedded in error pages.
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownAccount(_) => "unknown_account",
            Self::SuspendedAccount => "suspended_account",
            Self::MalformedBlindedAudience => "malformed_blinded_audience",
            Self::MalformedRequest(_) => "invalid_request",
            Self::UnregisteredRedirect => "unregistered_redirect",
            Self::Token(_) => "server_error",
        }
    }

    fn status(&self) -> StatusCode {
        match self {
            Self::SuspendedAccount => StatusCode::FORBIDDEN,
            Self::Token(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        }
    }
}

impl From<WireError> for IdpError {
    fn from(e: WireError) -> Self {
        Self::MalformedRequest(e.to_string())
    }
}

/// A stored account. The secret scalar is derived from `seed`, which is
/// always generated, never chosen.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub account_label: String,
    #[serde(with = "seed_b64")]
    seed: [u8; 32],
    #[serde(default)]
    pub suspended: bool,
}

impl UserRecord {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R, account_label: impl Into<String>) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self {
            account_label: account_label.into(),
            seed,
            suspended: false,
        }
    }

    pub fn seed(&self) -> &[u8; 32] {
        &self.seed
    }

    pub fn user_id<G: PrimeGroup>(&self) -> UserId<G> {
        UserId::from_seed(&self.seed)
    }
}

impl std::fmt::Debug for UserRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UserRecord")
            .field("account_label", &self.account_label)
            .field("suspended", &self.suspended)
            .finish_non_exhaustive()
    }
}

mod seed_b64 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&bison_core::encoding::b64url(seed))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let text = String::deserialize(d)?;
        let bytes = bison_core::encoding::b64url_decode(&text).map_err(D::Error::custom)?;
        bytes.try_into().map_err(|b: Vec<u8>| {
            D::Error::custom(format!("seed must be 32 bytes, got {}", b.len()))
        })
    }
}

/// The persisted account table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTable {
    pub accounts: Vec<UserRecord>,
}

impl UserTable {
    /// Fresh accounts with the default labels.
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self {
            accounts: DEFAULT_ACCOUNTS
                .iter()
                .map(|label| UserRecord::generate(rng, *label))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text)
    }

    /// Loads `path`, creating it with fresh default accounts if absent.
    pub fn load_or_create(path: &Path) -> std::io::Result<Self> {
        if path.exists() {
            return Self::load(path);
        }
        let table = Self::generate(&mut rand::rngs::OsRng);
        table.save(path)?;
        Ok(table)
    }
}

/// Pairwise identifier for requests without the blinded marker:
/// `base64url(SHA-512(client_id || seed))`.
pub fn ppid_fallback(client_id: &str, seed: &[u8]) -> String {
    counter::record_hash_eval();
    let digest = Sha512::new()
        .chain_update(client_id.as_bytes())
        .chain_update(seed)
        .finalize();
    b64url(&digest)
}

/// One request as received at the authorization endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoggedRequest {
    pub method: &'static str,
    pub params: Vec<(String, String)>,
}

struct Account<G: PrimeGroup> {
    record: UserRecord,
    user_id: UserId<G>,
}

pub struct IdpConfig {
    /// Base URL; also the `iss` claim.
    pub issuer: Url,
    pub token_lifetime_secs: u64,
}

impl IdpConfig {
    pub fn new(issuer: Url) -> Self {
        Self {
            issuer,
            token_lifetime_secs: DEFAULT_TOKEN_LIFETIME_SECS,
        }
    }
}

/// Identity provider state: signing key, account table, registered clients
/// for the conventional flow, and a request log.
pub struct IdentityProvider<G: PrimeGroup> {
    issuer: String,
    authorization_endpoint: Url,
    lifetime: u64,
    signer: TokenSigner,
    accounts: RwLock<Vec<Account<G>>>,
    clients: RwLock<BTreeMap<String, BTreeSet<String>>>,
    log: Mutex<Vec<LoggedRequest>>,
}

impl<G: PrimeGroup> IdentityProvider<G> {
    pub fn new(config: IdpConfig, users: UserTable, signer: TokenSigner) -> Self {
        let issuer = config.issuer.as_str().trim_end_matches('/').to_owned();
        let authorization_endpoint = config
            .issuer
            .join(LOGIN_PATH)
            .expect("issuer is a base URL");
        let accounts = users
            .accounts
            .into_iter()
            .map(|record| Account {
                user_id: record.user_id(),
                record,
            })
            .collect();
        Self {
            issuer,
            authorization_endpoint,
            lifetime: config.token_lifetime_secs,
            signer,
            accounts: RwLock::new(accounts),
            clients: RwLock::new(BTreeMap::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn issuer(&self) -> &str {
        &self.issuer
    }

    pub fn discovery(&self) -> DiscoveryDocument {
        let strings = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        DiscoveryDocument {
            issuer: self.issuer.clone(),
            authorization_endpoint: self.authorization_endpoint.to_string(),
            jwks: JwkSet {
                keys: vec![self.signer.verification_key().to_jwk()],
            },
            pairwise_subject_types: strings(&[BISON_SUBJECT_TYPE]),
            response_types_supported: strings(&[RESPONSE_TYPE_ID_TOKEN]),
            response_modes_supported: strings(&[RESPONSE_MODE_FORM_POST]),
            scopes_supported: strings(&[SCOPE_OPENID]),
            subject_types_supported: strings(&["pairwise"]),
            id_token_signing_alg_values_supported: strings(&["EdDSA"]),
        }
    }

    pub fn account_labels(&self) -> Vec<String> {
        self.accounts
            .read()
            .unwrap()
            .iter()
            .map(|a| a.record.account_label.clone())
            .collect()
    }

    /// Registers a client for the conventional (unblinded) flow.
    pub fn register_client(&self, client_id: impl Into<String>, redirect_uri: impl Into<String>) {
        self.clients
            .write()
            .unwrap()
            .entry(client_id.into())
            .or_default()
            .insert(redirect_uri.into());
    }

    pub fn set_suspended(&self, account_label: &str, suspended: bool) -> Result<(), IdpError> {
        let mut accounts = self.accounts.write().unwrap();
        let account = accounts
            .iter_mut()
            .find(|a| a.record.account_label == account_label)
            .ok_or_else(|| IdpError::UnknownAccount(account_label.into()))?;
        account.record.suspended = suspended;
        Ok(())
    }

    /// Everything received at the authorization endpoint so far.
    pub fn request_log(&self) -> Vec<LoggedRequest> {
        self.log.lock().unwrap().clone()
    }

    fn record(&self, method: &'static str, params: &[(String, String)]) {
        self.log.lock().unwrap().push(LoggedRequest {
            method,
            params: params.to_vec(),
        });
    }

    /// Checks a request before any account is involved.
    pub fn check_request(&self, req: &AuthorizationRequest) -> Result<(), IdpError> {
        if !req.is_openid() {
            return Err(IdpError::MalformedRequest(
                "scope must include openid".into(),
            ));
        }
        if req.response_type != RESPONSE_TYPE_ID_TOKEN {
            return Err(IdpError::MalformedRequest(
                "response_type must be id_token".into(),
            ));
        }
        if req.response_mode != RESPONSE_MODE_FORM_POST {
            return Err(IdpError::MalformedRequest(
                "response_mode must be form_post".into(),
            ));
        }
        if req.is_bison() {
            // The constant redirect target is accepted as is: the provider
            // must not learn the real one.
            element_from_b64::<G>(&req.client_id)
                .map_err(|_| IdpError::MalformedBlindedAudience)?;
        } else {
            let clients = self.clients.read().unwrap();
            let registered = clients
                .get(&req.client_id)
                .is_some_and(|uris| uris.contains(&req.redirect_uri));
            if !registered {
                return Err(IdpError::UnregisteredRedirect);
            }
        }
        Ok(())
    }

    /// Authenticates `account_label` and issues the token for `req`.
    pub fn handle_authorization(
        &self,
        req: &AuthorizationRequest,
        account_label: &str,
        now: u64,
    ) -> Result<SignedIdToken, IdpError> {
        self.check_request(req)?;
        let accounts = self.accounts.read().unwrap();
        let account = accounts
            .iter()
            .find(|a| a.record.account_label == account_label)
            .ok_or_else(|| IdpError::UnknownAccount(account_label.into()))?;
        if account.record.suspended {
            return Err(IdpError::SuspendedAccount);
        }
        let (aud, sub, subject_type) = if req.is_bison() {
            let a = element_from_b64::<G>(&req.client_id)
                .map_err(|_| IdpError::MalformedBlindedAudience)?;
            let b = blind_eval(&a, &account.user_id);
            (
                element_to_b64::<G>(&a),
                element_to_b64::<G>(&b),
                Some(BISON_SUBJECT_TYPE.to_owned()),
            )
        } else {
            let ppid = ppid_fallback(&req.client_id, account.record.seed());
            (req.client_id.clone(), ppid, None)
        };
        let claims = IdTokenClaims {
            aud,
            exp: now + self.lifetime,
            iat: now,
            iss: self.issuer.clone(),
            nonce: req.nonce.clone(),
            pairwise_subject_type: subject_type,
            sub,
        };
        Ok(issue_token::<G>(claims, &self.signer)?)
    }

    /// HTTP routes: discovery and the authorization endpoint.
    pub fn router(self: Arc<Self>) -> Router {
        Router::new()
            .route(DISCOVERY_PATH, get(discovery::<G>))
            .route(LOGIN_PATH, get(login_page::<G>).post(login_submit::<G>))
            .with_state(self)
    }
}

async fn discovery<G: PrimeGroup>(
    State(idp): State<Arc<IdentityProvider<G>>>,
) -> Json<DiscoveryDocument> {
    Json(idp.discovery())
}

fn error_page(err: &IdpError) -> Response {
    let body = format!(
        "<!DOCTYPE html><html><body><p class=\"error\" data-code=\"{}\">{}</p></body></html>",
        err.code(),
        html_escape::encode_text(&err.to_string())
    );
    (err.status(), Html(body)).into_response()
}

async fn login_page<G: PrimeGroup>(
    State(idp): State<Arc<IdentityProvider<G>>>,
    RawQuery(query): RawQuery,
) -> Response {
    let pairs: Vec<(String, String)> =
        url::form_urlencoded::parse(query.unwrap_or_default().as_bytes())
            .into_owned()
            .collect();
    idp.record("GET", &pairs);
    let req = match AuthorizationRequest::from_pairs(pairs.iter().map(|(k, v)| (k, v.clone()))) {
        Ok(req) => req,
        Err(e) => return error_page(&e.into()),
    };
    if let Err(e) = idp.check_request(&req) {
        return error_page(&e);
    }
    let hidden: String = req
        .to_pairs()
        .iter()
        .map(|(k, v)| hidden_input(k, v))
        .collect();
    let shown: String = req
        .to_pairs()
        .iter()
        .map(|(k, v)| {
            format!(
                "<tr><td>{}</td><td><code>{}</code></td></tr>",
                html_escape::encode_text(k),
                html_escape::encode_text(v)
            )
        })
        .collect();
    let choices: String = idp
        .account_labels()
        .iter()
        .map(|label| {
            let label = html_escape::encode_double_quoted_attribute(label);
            format!(
                "<button type=\"submit\" name=\"{}\" value=\"{label}\">{label}</button>",
                param::ACCOUNT
            )
        })
        .collect();
    Html(format!(
        concat!(
            "<!DOCTYPE html><html><head><title>Sign in</title></head><body>",
            "<h1>Choose an identity</h1><table>{}</table>",
            "<form method=\"post\" action=\"{}\">{}{}</form></body></html>"
        ),
        shown, LOGIN_PATH, hidden, choices
    ))
    .into_response()
}

async fn login_submit<G: PrimeGroup>(
    State(idp): State<Arc<IdentityProvider<G>>>,
    Form(fields): Form<Vec<(String, String)>>,
) -> Response {
    idp.record("POST", &fields);
    let account = fields
        .iter()
        .find(|(k, _)| k == param::ACCOUNT)
        .map(|(_, v)| v.clone())
        .unwrap_or_default();
    let req = match AuthorizationRequest::from_pairs(
        fields
            .iter()
            .filter(|(k, _)| k != param::ACCOUNT)
            .map(|(k, v)| (k, v.clone())),
    ) {
        Ok(req) => req,
        Err(e) => return error_page(&e.into()),
    };
    match idp.handle_authorization(&req, &account, crate::unix_now()) {
        Ok(token) => Html(render_form_post(
            &req.redirect_uri,
            &[(param::ID_TOKEN, &token.compact())],
        ))
        .into_response(),
        Err(e) => {
            tracing::info!(code = e.code(), "authorization refused");
            error_page(&e)
        }
    }
}

/// Decodes a stored seed, as written by [`UserTable::save`].
pub fn decode_seed(text: &str) -> Option<[u8; 32]> {
    b64url_decode(text).ok()?.try_into().ok()
}
