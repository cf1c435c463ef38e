//! Adversarial flows against real services on loopback ports.
//!
//! Every scenario declares the outcome it expects; an attack that ends in
//! a session where a rejection was expected is a failure.

use std::sync::Arc;

use bison_core::derivation::Blind;
use bison_core::group::PrimeGroup;
use bison_oidc::agent::{Agent, AutoApprove, PassReason, RewriteOutcome, SuffixList};
use bison_oidc::browser::{Delivery, FlowError, HeadlessBrowser, Navigation};
use bison_oidc::idp::UserTable;
use bison_oidc::sp::SessionResult;
use bison_oidc::testbed::{LaunchError, SpSpec, Testbed};
use bison_oidc::unix_now;
use bison_oidc::wire::{param, AuthorizationRequest};
use rand::rngs::OsRng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use url::Url;

pub const SUCCESS: &str = "success";
pub const RACE_CONTENDERS: usize = 16;
pub const SYBIL_FLOWS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttackOutcome {
    pub name: String,
    pub expected: String,
    pub observed: String,
}

impl AttackOutcome {
    fn new(name: &str, expected: &str, observed: impl Into<String>) -> Self {
        Self {
            name: name.to_owned(),
            expected: expected.to_owned(),
            observed: observed.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.expected == self.observed
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Launch(#[from] LaunchError),
    #[error("honest step failed: {0}")]
    Flow(#[from] FlowError),
    #[error("{0}")]
    Setup(String),
}

/// The rejection class of a flow result, or [`SUCCESS`].
pub fn classify(result: &Result<SessionResult, FlowError>) -> String {
    match result {
        Ok(_) => SUCCESS.to_owned(),
        Err(FlowError::SpRejected { error, .. }) => error.clone(),
        Err(FlowError::IdpRefused { code, .. }) => format!("idp:{code}"),
        Err(e) => format!("error:{e}"),
    }
}

fn browser<G: PrimeGroup>() -> HeadlessBrowser<G> {
    HeadlessBrowser::new(Arc::new(Agent::new(SuffixList::Bundled, AutoApprove)))
}

/// Runs steps up to the final post and returns what would be delivered.
async fn capture<G: PrimeGroup>(
    b: &HeadlessBrowser<G>,
    sp: &Url,
    account: &str,
) -> Result<Delivery, HarnessError> {
    let nav = b.begin(sp).await?;
    let intercepted = b.intercept(&nav)?;
    if intercepted.handle.is_none() {
        return Err(HarnessError::Setup(
            "agent did not rewrite the request".into(),
        ));
    }
    let form = b.authenticate(&intercepted.url, account).await?;
    Ok(b.intercept_return(form, intercepted.handle.as_deref())?)
}

fn random_blind<G: PrimeGroup>() -> Blind<G> {
    Blind::sample(&mut OsRng).expect("OS entropy")
}

/// Immediate resubmission, resubmission against a fresh pending request,
/// and resubmission with a re-randomized blind.
pub async fn run_replay_attack<G: PrimeGroup>() -> Result<Vec<AttackOutcome>, HarnessError> {
    let bed = Testbed::<G>::launch(UserTable::generate(&mut OsRng), &[SpSpec::default()]).await?;
    let b = browser::<G>();
    let captured = capture(&b, bed.sp_url(0), "alice").await?;
    let honest = b.deliver(&captured).await;
    let mut out = vec![AttackOutcome::new(
        "replay/honest",
        SUCCESS,
        classify(&honest),
    )];

    let again = b.deliver(&captured).await;
    out.push(AttackOutcome::new(
        "replay/immediate",
        "ReplayDetected",
        classify(&again),
    ));

    let mut rerandomized = captured.clone();
    rerandomized.set_field(param::BLIND, random_blind::<G>().to_param());
    let r = b.deliver(&rerandomized).await;
    out.push(AttackOutcome::new(
        "replay/rerandomized-blind",
        "BlindMismatch",
        classify(&r),
    ));

    // A new sign-in replaces the pending cookie with a fresh nonce.
    b.begin(bed.sp_url(0)).await?;
    let cross = b.deliver(&captured).await;
    out.push(AttackOutcome::new(
        "replay/cross-pending",
        "NonceBindingMismatch",
        classify(&cross),
    ));
    Ok(out)
}

fn redirect_to(nav: &Navigation, target: &str) -> Result<Navigation, HarnessError> {
    let mut req = AuthorizationRequest::from_url(&nav.authorization_url)
        .map_err(|e| HarnessError::Setup(e.to_string()))?;
    req.redirect_uri = target.to_owned();
    let mut endpoint = nav.authorization_url.clone();
    endpoint.set_query(None);
    Ok(Navigation {
        page_origin: nav.page_origin.clone(),
        authorization_url: req.to_url(&endpoint),
    })
}

/// The attacker's page relays the genuine service provider's request to a
/// victim and submits the victim's response at the genuine provider with
/// its own session cookie.
async fn relay<G: PrimeGroup>(
    bed: &Testbed<G>,
    genuine: usize,
    attacker_page: &Url,
) -> Result<Result<SessionResult, FlowError>, HarnessError> {
    let attacker = browser::<G>();
    let victim = browser::<G>();
    let genuine_nav = attacker.begin(bed.sp_url(genuine)).await?;
    let collect = attacker_page.join("/return").expect("static path");
    let mut relayed = redirect_to(&genuine_nav, collect.as_str())?;
    relayed.page_origin = bison_oidc::agent::OriginContext::from_url(attacker_page);
    let intercepted = victim.intercept(&relayed)?;
    if intercepted.handle.is_none() {
        return Err(HarnessError::Setup("victim's agent did not rewrite".into()));
    }
    let form = victim.authenticate(&intercepted.url, "alice").await?;
    let mut stolen = victim.intercept_return(form, intercepted.handle.as_deref())?;
    stolen.target = genuine_nav
        .authorization_url
        .query_pairs()
        .find(|(k, _)| k == param::REDIRECT_URI)
        .map(|(_, v)| v.into_owned())
        .ok_or_else(|| HarnessError::Setup("request without redirect_uri".into()))?;
    Ok(attacker.deliver(&stolen).await)
}

/// Same-audience relay, the degenerate relay from the genuine origin, and a
/// relay of an audience the attacker's origin may not request.
pub async fn run_mitm_attack<G: PrimeGroup>() -> Result<Vec<AttackOutcome>, HarnessError> {
    // Both sites live on 127.0.0.1, so both may request that audience.
    let bed = Testbed::<G>::launch(
        UserTable::generate(&mut OsRng),
        &[
            SpSpec::with_audience("127.0.0.1"),
            SpSpec::with_audience("127.0.0.1"),
            SpSpec::default(),
        ],
    )
    .await?;
    let attacker_site = bed.sp_url(1).clone();
    let mut out = Vec::new();

    let relayed = relay(&bed, 0, &attacker_site).await?;
    out.push(AttackOutcome::new(
        "mitm/same-audience-relay",
        "NonceBindingMismatch",
        classify(&relayed),
    ));

    let control = relay(&bed, 0, &bed.sp_url(0).clone()).await?;
    out.push(AttackOutcome::new(
        "mitm/genuine-origin-control",
        SUCCESS,
        classify(&control),
    ));

    // The third provider's audience is its full origin, which no other
    // origin is allowed to request.
    let victim = browser::<G>();
    let nav = browser::<G>().begin(bed.sp_url(2)).await?;
    let req = AuthorizationRequest::from_url(&nav.authorization_url)
        .map_err(|e| HarnessError::Setup(e.to_string()))?;
    let attacker_origin = bison_oidc::agent::OriginContext::from_url(&attacker_site);
    let observed = match victim
        .agent()
        .rewrite_request(&req, &attacker_origin, unix_now())
    {
        Ok(RewriteOutcome::PassThrough(reason)) => format!("pass-through:{reason:?}"),
        Ok(RewriteOutcome::Rewritten { .. }) => "rewritten".to_owned(),
        Err(e) => format!("error:{e}"),
    };
    out.push(AttackOutcome::new(
        "mitm/unauthorized-audience",
        &format!("pass-through:{:?}", PassReason::AudienceNotAuthorized),
        observed,
    ));
    Ok(out)
}

/// A captured response redeemed by `RACE_CONTENDERS` concurrent posts.
pub async fn run_race_attack<G: PrimeGroup>() -> Result<Vec<AttackOutcome>, HarnessError> {
    let bed = Testbed::<G>::launch(UserTable::generate(&mut OsRng), &[SpSpec::default()]).await?;
    let b = Arc::new(browser::<G>());
    let captured = Arc::new(capture(&b, bed.sp_url(0), "alice").await?);
    let barrier = Arc::new(tokio::sync::Barrier::new(RACE_CONTENDERS));
    let tasks: Vec<_> = (0..RACE_CONTENDERS)
        .map(|_| {
            let (b, captured, barrier) = (b.clone(), captured.clone(), barrier.clone());
            tokio::spawn(async move {
                barrier.wait().await;
                classify(&b.deliver(&captured).await)
            })
        })
        .collect();
    let mut successes = 0;
    let mut replays = 0;
    let mut other = Vec::new();
    for t in tasks {
        match t
            .await
            .map_err(|e| HarnessError::Setup(e.to_string()))?
            .as_str()
        {
            SUCCESS => successes += 1,
            "ReplayDetected" => replays += 1,
            o => other.push(o.to_owned()),
        }
    }
    let mut observed = format!("{successes} success, {replays} ReplayDetected");
    if !other.is_empty() {
        observed.push_str(&format!(", other: {other:?}"));
    }
    Ok(vec![AttackOutcome::new(
        &format!("race/{RACE_CONTENDERS}-redemptions"),
        &format!("1 success, {} ReplayDetected", RACE_CONTENDERS - 1),
        observed,
    )])
}

/// Repeated sign-ins with blinds the user picks, a forged blind, and a
/// suspension in the middle of the sequence.
pub async fn run_sybil_attempt<G: PrimeGroup>() -> Result<Vec<AttackOutcome>, HarnessError> {
    let bed = Testbed::<G>::launch(UserTable::generate(&mut OsRng), &[SpSpec::default()]).await?;
    let b = browser::<G>();
    let mut rng = ChaCha20Rng::seed_from_u64(20);
    let mut pseudonyms = std::collections::BTreeSet::new();
    let mut failures = Vec::new();
    for i in 0..SYBIL_FLOWS {
        // The user's agent is theirs to control: the first flow uses r = 1.
        let r = if i == 0 {
            Blind::from_scalar(G::scalar_one())
        } else {
            Blind::sample(&mut rng).expect("seeded rng")
        };
        let nav = b.begin(bed.sp_url(0)).await?;
        let intercepted = b.intercept_with_blind(&nav, r)?;
        match b.finish(&intercepted, "alice").await {
            Ok(report) => {
                pseudonyms.insert(report.session.pseudonym);
            }
            Err(e) => failures.push(classify(&Err(e))),
        }
    }
    let mut observed = format!("{} distinct pseudonym(s)", pseudonyms.len());
    if !failures.is_empty() {
        observed.push_str(&format!(", failures: {failures:?}"));
    }
    let mut out = vec![AttackOutcome::new(
        &format!("sybil/{SYBIL_FLOWS}-chosen-blinds"),
        "1 distinct pseudonym(s)",
        observed,
    )];

    let captured = capture(&b, bed.sp_url(0), "alice").await?;
    let mut forged = captured.clone();
    let honest_blind = captured.field(param::BLIND).unwrap_or_default().to_owned();
    let forged_blind = loop {
        let candidate = random_blind::<G>().to_param();
        if candidate != honest_blind {
            break candidate;
        }
    };
    forged.set_field(param::BLIND, forged_blind);
    let forged_result = b.deliver(&forged).await;
    out.push(AttackOutcome::new(
        "sybil/forged-blind",
        "BlindMismatch",
        classify(&forged_result),
    ));
    // The rejected attempt must not have minted anything new: the honest
    // blind still redeems, to the same pseudonym.
    let honest = b.deliver(&captured).await;
    let observed = match &honest {
        Ok(s) if pseudonyms.contains(&s.pseudonym) => "same pseudonym".to_owned(),
        Ok(_) => "new pseudonym".to_owned(),
        Err(_) => classify(&honest),
    };
    out.push(AttackOutcome::new(
        "sybil/after-forgery",
        "same pseudonym",
        observed,
    ));

    bed.idp
        .set_suspended("alice", true)
        .map_err(|e| HarnessError::Setup(e.to_string()))?;
    let refused = b.login(bed.sp_url(0), "alice").await.map(|r| r.session);
    out.push(AttackOutcome::new(
        "sybil/suspended-account",
        "idp:suspended_account",
        classify(&refused),
    ));
    Ok(out)
}

/// Names accepted by [`run_attack`].
pub const ATTACKS: [&str; 4] = ["replay", "mitm", "race", "sybil"];

pub async fn run_attack<G: PrimeGroup>(name: &str) -> Result<Vec<AttackOutcome>, HarnessError> {
    match name {
        "replay" => run_replay_attack::<G>().await,
        "mitm" => run_mitm_attack::<G>().await,
        "race" => run_race_attack::<G>().await,
        "sybil" => run_sybil_attempt::<G>().await,
        other => Err(HarnessError::Setup(format!("unknown attack {other:?}"))),
    }
}

pub async fn run_all_attacks<G: PrimeGroup>() -> Result<Vec<AttackOutcome>, HarnessError> {
    let mut out = Vec::new();
    for name in ATTACKS {
        out.extend(run_attack::<G>(name).await?);
    }
    Ok(out)
}
