//! Headless browser that drives full flows over HTTP with an [`Agent`]
//! intercepting navigations, as a protocol-aware browser would.
//!
//! A flow is split into its navigation steps so that tests can tamper with
//! any leg:
//!
//! 1. [`HeadlessBrowser::begin`]: visit the service provider's `/auth`.
//! 2. [`HeadlessBrowser::intercept`]: let the agent rewrite the request.
//! 3. [`HeadlessBrowser::authenticate`]: pick an account at the provider.
//! 4. [`HeadlessBrowser::intercept_return`]: let the agent add the blind.
//! 5. [`HeadlessBrowser::deliver`]: post the result to the service provider.

use std::sync::Arc;

use bison_core::derivation::Blind;
use bison_core::group::PrimeGroup;
use regex::Regex;
use reqwest::header::{ACCEPT, LOCATION};
use reqwest::redirect::Policy;
use reqwest::StatusCode;
use url::Url;

use crate::agent::{
    Agent, AgentError, ForwardedPost, OriginContext, ReturnOutcome, RewriteOutcome,
};
use crate::sp::{ErrorBody, SessionResult, AUTH_PATH};
use crate::wire::{param, AuthorizationRequest, HtmlForm, WireError};

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("unexpected response: {0}")]
    Unexpected(String),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("identity provider refused ({status}): {code}")]
    IdpRefused { status: StatusCode, code: String },
    #[error("service provider rejected ({status}): {error}")]
    SpRejected {
        status: StatusCode,
        error: String,
        detail: String,
    },
}

impl FlowError {
    /// The service provider's failure class, if that is where the flow
    /// ended.
    pub fn sp_error(&self) -> Option<&str> {
        match self {
            Self::SpRejected { error, .. } => Some(error),
            _ => None,
        }
    }

    pub fn idp_code(&self) -> Option<&str> {
        match self {
            Self::IdpRefused { code, .. } => Some(code),
            _ => None,
        }
    }
}

/// A navigation to an authorization endpoint and the page that caused it.
#[derive(Debug, Clone)]
pub struct Navigation {
    pub page_origin: OriginContext,
    pub authorization_url: Url,
}

/// Where the browser goes after interception.
#[derive(Debug, Clone)]
pub struct Intercepted {
    pub url: Url,
    /// Set when the agent rewrote the request.
    pub handle: Option<String>,
}

/// A form post about to leave the browser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub target: String,
    pub fields: Vec<(String, String)>,
}

impl Delivery {
    pub fn field(&self, name: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn set_field(&mut self, name: &str, value: impl Into<String>) {
        let value = value.into();
        match self.fields.iter_mut().find(|(k, _)| k == name) {
            Some(entry) => entry.1 = value,
            None => self.fields.push((name.to_owned(), value)),
        }
    }
}

impl From<ForwardedPost> for Delivery {
    fn from(post: ForwardedPost) -> Self {
        Self {
            fields: post.fields(),
            target: post.target,
        }
    }
}

/// Outcome of a complete flow.
#[derive(Debug, Clone)]
pub struct FlowReport {
    pub session: SessionResult,
    /// Whether the agent blinded the request.
    pub rewritten: bool,
    pub delivery: Delivery,
}

/// A cookie-keeping HTTP client that never follows redirects on its own.
pub struct HeadlessBrowser<G: PrimeGroup> {
    http: reqwest::Client,
    agent: Arc<Agent<G>>,
}

impl<G: PrimeGroup> HeadlessBrowser<G> {
    pub fn new(agent: Arc<Agent<G>>) -> Self {
        let http = reqwest::Client::builder()
            .cookie_store(true)
            .redirect(Policy::none())
            .build()
            .expect("static client configuration");
        Self { http, agent }
    }

    pub fn agent(&self) -> &Arc<Agent<G>> {
        &self.agent
    }

    /// Visits the service provider's login start and returns the redirect.
    pub async fn begin(&self, sp_base: &Url) -> Result<Navigation, FlowError> {
        let start = sp_base
            .join(AUTH_PATH)
            .map_err(|e| FlowError::Unexpected(e.to_string()))?;
        let resp = self.http.get(start.clone()).send().await?;
        if !resp.status().is_redirection() {
            return Err(FlowError::Unexpected(format!(
                "/auth answered {}",
                resp.status()
            )));
        }
        let location = resp
            .headers()
            .get(LOCATION)
            .and_then(|v| v.to_str().ok())
            .ok_or_else(|| FlowError::Unexpected("redirect without location".into()))?;
        let authorization_url = start
            .join(location)
            .map_err(|e| FlowError::Unexpected(e.to_string()))?;
        Ok(Navigation {
            page_origin: OriginContext::from_url(&start),
            authorization_url,
        })
    }

    /// Runs the agent over an outgoing authorization request.
    pub fn intercept(&self, nav: &Navigation) -> Result<Intercepted, FlowError> {
        let req = AuthorizationRequest::from_url(&nav.authorization_url)?;
        match self
            .agent
            .rewrite_request(&req, &nav.page_origin, crate::unix_now())?
        {
            RewriteOutcome::Rewritten { request, handle } => {
                let mut endpoint = nav.authorization_url.clone();
                endpoint.set_query(None);
                Ok(Intercepted {
                    url: request.to_url(&endpoint),
                    handle: Some(handle),
                })
            }
            RewriteOutcome::PassThrough(_) => Ok(Intercepted {
                url: nav.authorization_url.clone(),
                handle: None,
            }),
        }
    }

    /// Like [`Self::intercept`], but with a blind chosen by the caller and
    /// without the audience and consent checks, as a user controlling their
    /// own device could do.
    pub fn intercept_with_blind(
        &self,
        nav: &Navigation,
        r: Blind<G>,
    ) -> Result<Intercepted, FlowError> {
        let req = AuthorizationRequest::from_url(&nav.authorization_url)?;
        let RewriteOutcome::Rewritten { request, handle } =
            self.agent
                .rewrite_with_blind(&req, &nav.page_origin, r, crate::unix_now())
        else {
            unreachable!("rewrite_with_blind always rewrites")
        };
        let mut endpoint = nav.authorization_url.clone();
        endpoint.set_query(None);
        Ok(Intercepted {
            url: request.to_url(&endpoint),
            handle: Some(handle),
        })
    }

    /// Loads the provider's sign-in page, picks `account`, and returns the
    /// provider's `form_post` response.
    pub async fn authenticate(&self, url: &Url, account: &str) -> Result<HtmlForm, FlowError> {
        let resp = self.http.get(url.clone()).send().await?;
        let page = idp_page(resp).await?;
        let form = HtmlForm::parse(&page)?;
        let action = url
            .join(&form.action)
            .map_err(|e| FlowError::Unexpected(e.to_string()))?;
        let mut fields = form.fields;
        fields.push((param::ACCOUNT.to_owned(), account.to_owned()));
        let resp = self.http.post(action).form(&fields).send().await?;
        let page = idp_page(resp).await?;
        Ok(HtmlForm::parse(&page)?)
    }

    /// Runs the agent over the provider's response.
    pub fn intercept_return(
        &self,
        form: HtmlForm,
        handle: Option<&str>,
    ) -> Result<Delivery, FlowError> {
        let id_token = form
            .field(param::ID_TOKEN)
            .ok_or(WireError::MissingParameter(param::ID_TOKEN))?;
        let outcome = match handle {
            Some(h) => self
                .agent
                .handle_return(h, &form.action, id_token, crate::unix_now())?,
            None => ReturnOutcome::PassThrough,
        };
        Ok(match outcome {
            ReturnOutcome::Forward(post) => post.into(),
            ReturnOutcome::PassThrough => Delivery {
                target: form.action,
                fields: form.fields,
            },
        })
    }

    /// Submits a delivery to the service provider and reads its verdict.
    pub async fn deliver(&self, delivery: &Delivery) -> Result<SessionResult, FlowError> {
        let resp = self
            .http
            .post(&delivery.target)
            .header(ACCEPT, "application/json")
            .form(&delivery.fields)
            .send()
            .await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let body: ErrorBody = resp.json().await?;
        Err(FlowError::SpRejected {
            status,
            error: body.error,
            detail: body.detail,
        })
    }

    /// Steps 3 to 5 for an already intercepted navigation.
    pub async fn finish(
        &self,
        intercepted: &Intercepted,
        account: &str,
    ) -> Result<FlowReport, FlowError> {
        let form = self.authenticate(&intercepted.url, account).await?;
        let delivery = self.intercept_return(form, intercepted.handle.as_deref())?;
        let session = self.deliver(&delivery).await?;
        Ok(FlowReport {
            session,
            rewritten: intercepted.handle.is_some(),
            delivery,
        })
    }

    /// One complete sign-in at `sp_base` as `account`.
    pub async fn login(&self, sp_base: &Url, account: &str) -> Result<FlowReport, FlowError> {
        let nav = self.begin(sp_base).await?;
        let intercepted = self.intercept(&nav)?;
        self.finish(&intercepted, account).await
    }
}

async fn idp_page(resp: reqwest::Response) -> Result<String, FlowError> {
    let status = resp.status();
    let body = resp.text().await?;
    if status.is_success() {
        return Ok(body);
    }
    let code = Regex::new(r#"data-code="([^"]*)""#)
        .unwrap()
        .captures(&body)
        .map(|c| c[1].to_owned())
        .unwrap_or_default();
    Err(FlowError::IdpRefused { status, code })
}
