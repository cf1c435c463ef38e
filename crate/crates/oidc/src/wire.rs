//! Wire messages shared by the identity provider, service provider and agent:
//! authorization requests, discovery metadata and form-post pages.

use std::collections::BTreeMap;

use bison_core::token::{JwkSet, BISON_SUBJECT_TYPE};
use regex::Regex;
use serde::{Deserialize, Serialize};
use url::Url;

/// Constant return target substituted by the agent. The domain never
/// resolves, so a response that escapes interception goes nowhere.
pub const BISON_REDIRECT_URI: &str = "https://anonymous.invalid/bison";

pub const SCOPE_OPENID: &str = "openid";
pub const RESPONSE_TYPE_ID_TOKEN: &str = "id_token";
pub const RESPONSE_MODE_FORM_POST: &str = "form_post";

/// Query parameter names.
pub mod param {
    pub const SCOPE: &str = "scope";
    pub const CLIENT_ID: &str = "client_id";
    pub const REDIRECT_URI: &str = "redirect_uri";
    pub const NONCE: &str = "nonce";
    pub const RESPONSE_TYPE: &str = "response_type";
    pub const RESPONSE_MODE: &str = "response_mode";
    /// Marker set by the agent once it has blinded the request.
    pub const PAIRWISE_SUBJECT_TYPE: &str = "pairwise_subject_type";
    /// Opt-in list sent by the service provider.
    pub const PAIRWISE_SUBJECT_TYPES: &str = "pairwise_subject_types";
    /// Audience override; defaults to the client id.
    pub const AUDIENCE_ID: &str = "audience_id";
    /// Blinding scalar. Sent by the service provider in the replay-hardened
    /// variant and added by the agent on the return leg.
    pub const BLIND: &str = "blind";
    pub const ID_TOKEN: &str = "id_token";
    pub const ACCOUNT: &str = "account";
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("missing parameter {0}")]
    MissingParameter(&'static str),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("no form found in page")]
    NoForm,
}

/// An OpenID Connect implicit-flow authorization request.
///
/// Only the parameters the identity provider acts upon are modelled
/// explicitly; anything else the service provider added travels in `extra`
/// so the agent can inspect and strip it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorizationRequest {
    pub scope: String,
    pub client_id: String,
    pub redirect_uri: String,
    pub nonce: String,
    pub response_type: String,
    pub response_mode: String,
    pub pairwise_subject_type: Option<String>,
    pub extra: BTreeMap<String, String>,
}

impl AuthorizationRequest {
    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self, WireError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in pairs {
            map.entry(k.as_ref().to_owned()).or_insert_with(|| v.into());
        }
        let mut take = |name: &'static str| map.remove(name);
        let required = |v: Option<String>, name: &'static str| {
            v.filter(|s| !s.is_empty())
                .ok_or(WireError::MissingParameter(name))
        };
        let scope = required(take(param::SCOPE), param::SCOPE)?;
        let client_id = required(take(param::CLIENT_ID), param::CLIENT_ID)?;
        let redirect_uri = required(take(param::REDIRECT_URI), param::REDIRECT_URI)?;
        let nonce = required(take(param::NONCE), param::NONCE)?;
        let response_type =
            take(param::RESPONSE_TYPE).unwrap_or_else(|| RESPONSE_TYPE_ID_TOKEN.into());
        let response_mode =
            take(param::RESPONSE_MODE).unwrap_or_else(|| RESPONSE_MODE_FORM_POST.into());
        let pairwise_subject_type = take(param::PAIRWISE_SUBJECT_TYPE);
        Ok(Self {
            scope,
            client_id,
            redirect_uri,
            nonce,
            response_type,
            response_mode,
            pairwise_subject_type,
            extra: map,
        })
    }

    /// Parses the query of an authorization URL.
    pub fn from_url(url: &Url) -> Result<Self, WireError> {
        Self::from_pairs(
            url.query_pairs()
                .map(|(k, v)| (k.into_owned(), v.into_owned())),
        )
    }

    pub fn is_openid(&self) -> bool {
        self.scope.split(' ').any(|s| s == SCOPE_OPENID)
    }

    /// Whether the service provider opted into blinded derivation.
    pub fn offers_bison(&self) -> bool {
        self.extra
            .get(param::PAIRWISE_SUBJECT_TYPES)
            .is_some_and(|v| v.split(' ').any(|s| s == BISON_SUBJECT_TYPE))
    }

    /// Whether the request has been blinded by an agent.
    pub fn is_bison(&self) -> bool {
        self.pairwise_subject_type.as_deref() == Some(BISON_SUBJECT_TYPE)
    }

    /// Audience the service provider asks for: the override if present,
    /// otherwise the client id.
    pub fn audience(&self) -> &str {
        self.extra
            .get(param::AUDIENCE_ID)
            .map(String::as_str)
            .unwrap_or(&self.client_id)
    }

    /// Parameters in a fixed order, `extra` last.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut pairs = vec![
            (param::SCOPE.to_owned(), self.scope.clone()),
            (param::RESPONSE_TYPE.to_owned(), self.response_type.clone()),
            (param::RESPONSE_MODE.to_owned(), self.response_mode.clone()),
            (param::CLIENT_ID.to_owned(), self.client_id.clone()),
            (param::REDIRECT_URI.to_owned(), self.redirect_uri.clone()),
            (param::NONCE.to_owned(), self.nonce.clone()),
        ];
        if let Some(p) = &self.pairwise_subject_type {
            pairs.push((param::PAIRWISE_SUBJECT_TYPE.to_owned(), p.clone()));
        }
        pairs.extend(self.extra.iter().map(|(k, v)| (k.clone(), v.clone())));
        pairs
    }

    /// The full authorization URL at `endpoint`.
    pub fn to_url(&self, endpoint: &Url) -> Url {
        let mut url = endpoint.clone();
        url.query_pairs_mut().clear().extend_pairs(self.to_pairs());
        url
    }
}

/// Identity provider discovery metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryDocument {
    pub issuer: String,
    pub authorization_endpoint: String,
    pub jwks: JwkSet,
    pub pairwise_subject_types: Vec<String>,
    pub response_types_supported: Vec<String>,
    pub response_modes_supported: Vec<String>,
    pub scopes_supported: Vec<String>,
    pub subject_types_supported: Vec<String>,
    pub id_token_signing_alg_values_supported: Vec<String>,
}

/// A form the user agent is asked to submit: the account picker at the
/// identity provider or a self-submitting `form_post` response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HtmlForm {
    pub action: String,
    pub fields: Vec<(String, String)>,
}

impl HtmlForm {
    pub fn field(&self, name: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    /// Extracts the first form and its hidden inputs from a page.
    pub fn parse(page: &str) -> Result<Self, WireError> {
        let form = Regex::new(r#"(?s)<form[^>]*\baction="([^"]*)"[^>]*>(.*?)</form>"#).unwrap();
        let input = Regex::new(r#"<input\b[^>]*>"#).unwrap();
        let attr = Regex::new(r#"\b(type|name|value)="([^"]*)""#).unwrap();
        let caps = form.captures(page).ok_or(WireError::NoForm)?;
        let unescape = |s: &str| html_escape::decode_html_entities(s).into_owned();
        let mut fields = Vec::new();
        for tag in input.find_iter(&caps[2]) {
            let mut kind = None;
            let mut name = None;
            let mut value = String::new();
            for a in attr.captures_iter(tag.as_str()) {
                match &a[1] {
                    "type" => kind = Some(a[2].to_owned()),
                    "name" => name = Some(unescape(&a[2])),
                    _ => value = unescape(&a[2]),
                }
            }
            if let (Some("hidden"), Some(name)) = (kind.as_deref(), name) {
                fields.push((name, value));
            }
        }
        Ok(Self {
            action: unescape(&caps[1]),
            fields,
        })
    }
}

/// Renders a self-submitting `form_post` page.
pub fn render_form_post(action: &str, fields: &[(&str, &str)]) -> String {
    let inputs: String = fields.iter().map(|(k, v)| hidden_input(k, v)).collect();
    format!(
        concat!(
            "<!DOCTYPE html><html><head><title>Submit</title></head>",
            "<body onload=\"document.forms[0].submit()\">",
            "<form method=\"post\" action=\"{}\">{}",
            "<noscript><button type=\"submit\">Continue</button></noscript>",
            "</form></body></html>"
        ),
        html_escape::encode_double_quoted_attribute(action),
        inputs
    )
}

pub(crate) fn hidden_input(name: &str, value: &str) -> String {
    format!(
        "<input type=\"hidden\" name=\"{}\" value=\"{}\">",
        html_escape::encode_double_quoted_attribute(name),
        html_escape::encode_double_quoted_attribute(value)
    )
}
