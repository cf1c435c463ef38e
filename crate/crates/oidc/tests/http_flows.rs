//! Full flows over loopback HTTP: identity provider, service providers and a
//! headless browser with the agent.

use std::sync::Arc;

use bison_core::derivation::{derive_pseudonym_direct, AudienceId};
use bison_core::encoding::element_to_b64;
use bison_core::group::{PrimeGroup, Ristretto255, TestGroup};
use bison_oidc::agent::{Agent, AutoApprove, DenyAll, SuffixList};
use bison_oidc::browser::{FlowError, HeadlessBrowser};
use bison_oidc::idp::{ppid_fallback, UserTable};
use bison_oidc::sp::DerivationMode;
use bison_oidc::testbed::{SpSpec, Testbed};
use bison_oidc::wire::BISON_REDIRECT_URI;

fn browser<G: PrimeGroup>() -> HeadlessBrowser<G> {
    HeadlessBrowser::new(Arc::new(Agent::new(SuffixList::Bundled, AutoApprove)))
}

fn users() -> UserTable {
    UserTable::generate(&mut rand::rngs::OsRng)
}

fn expected<G: PrimeGroup>(users: &UserTable, account: usize, audience: &str) -> String {
    let user = users.accounts[account].user_id::<G>();
    derive_pseudonym_direct(&user, &AudienceId::derive(audience.as_bytes())).encode()
}

#[tokio::test]
async fn blinded_flow_yields_the_direct_pseudonym() {
    let users = users();
    let bed = Testbed::<Ristretto255>::launch(users.clone(), &[SpSpec::default()])
        .await
        .unwrap();
    let b = browser::<Ristretto255>();
    let report = b.login(bed.sp_url(0), "alice").await.unwrap();
    assert!(report.rewritten);
    assert_eq!(report.session.derivation_mode, DerivationMode::Bison);
    let audience = bed.sp(0).config().origin.clone();
    assert_eq!(report.session.audience, audience);
    assert_eq!(
        report.session.pseudonym,
        expected::<Ristretto255>(&users, 0, &audience)
    );
    assert_eq!(b.agent().records_held(), 0);
}

#[tokio::test]
async fn blinded_flow_on_the_test_group() {
    let users = users();
    let bed = Testbed::<TestGroup>::launch(users.clone(), &[SpSpec::with_audience("127.0.0.1")])
        .await
        .unwrap();
    let report = browser::<TestGroup>()
        .login(bed.sp_url(0), "carol")
        .await
        .unwrap();
    assert_eq!(
        report.session.pseudonym,
        expected::<TestGroup>(&users, 2, "127.0.0.1")
    );
}

#[tokio::test]
async fn identity_provider_never_sees_the_audience() {
    let bed = Testbed::<Ristretto255>::launch(
        users(),
        &[SpSpec::default(), SpSpec::with_audience("127.0.0.1")],
    )
    .await
    .unwrap();
    let b = browser::<Ristretto255>();
    for i in 0..2 {
        for account in ["alice", "bob"] {
            b.login(bed.sp_url(i), account).await.unwrap();
        }
    }
    let log = bed.idp.request_log();
    assert_eq!(log.len(), 8);
    let mut forbidden = Vec::new();
    for i in 0..2 {
        let config = bed.sp(i).config();
        let aud = config.audience().to_owned();
        let hashed = element_to_b64::<Ristretto255>(
            AudienceId::<Ristretto255>::derive(aud.as_bytes()).element(),
        );
        forbidden.extend([aud, config.origin.clone(), config.redirect_uri(), hashed]);
    }
    for entry in &log {
        for (k, v) in &entry.params {
            for needle in &forbidden {
                assert!(!v.contains(needle.as_str()), "{k}={v} leaks {needle}");
            }
        }
        let redirect = entry
            .params
            .iter()
            .find(|(k, _)| k == "redirect_uri")
            .unwrap();
        assert_eq!(redirect.1, BISON_REDIRECT_URI);
        assert!(!entry
            .params
            .iter()
            .any(|(k, _)| k == "audience_id" || k == "blind"));
    }
}

#[tokio::test]
async fn plain_service_provider_gets_the_ppid() {
    let users = users();
    let bed = Testbed::<Ristretto255>::launch(users.clone(), &[SpSpec::plain()])
        .await
        .unwrap();
    let b = browser::<Ristretto255>();
    let first = b.login(bed.sp_url(0), "bob").await.unwrap();
    let second = b.login(bed.sp_url(0), "bob").await.unwrap();
    assert!(!first.rewritten);
    assert_eq!(first.session.derivation_mode, DerivationMode::PpidFallback);
    let client_id = &bed.sp(0).config().origin;
    assert_eq!(
        first.session.pseudonym,
        ppid_fallback(client_id, users.accounts[1].seed())
    );
    assert_eq!(first.session.pseudonym, second.session.pseudonym);
}

#[tokio::test]
async fn unauthorized_audience_falls_back_to_plain_oidc() {
    let users = users();
    let bed =
        Testbed::<Ristretto255>::launch(users.clone(), &[SpSpec::with_audience("example.com")])
            .await
            .unwrap();
    let report = browser::<Ristretto255>()
        .login(bed.sp_url(0), "alice")
        .await
        .unwrap();
    assert!(!report.rewritten);
    assert_eq!(report.session.derivation_mode, DerivationMode::PpidFallback);
}

#[tokio::test]
async fn denied_consent_sends_nothing() {
    let bed = Testbed::<Ristretto255>::launch(users(), &[SpSpec::default()])
        .await
        .unwrap();
    let b =
        HeadlessBrowser::<Ristretto255>::new(Arc::new(Agent::new(SuffixList::Bundled, DenyAll)));
    let err = b.login(bed.sp_url(0), "alice").await.unwrap_err();
    assert!(matches!(
        err,
        FlowError::Agent(bison_oidc::agent::AgentError::ConsentDenied)
    ));
    assert!(bed.idp.request_log().is_empty());
}

#[tokio::test]
async fn sp_sampled_blind_flow() {
    let users = users();
    let spec = SpSpec {
        sp_samples_blind: true,
        ..SpSpec::default()
    };
    let bed = Testbed::<Ristretto255>::launch(users.clone(), &[spec])
        .await
        .unwrap();
    let b = browser::<Ristretto255>();
    let report = b.login(bed.sp_url(0), "alice").await.unwrap();
    let audience = bed.sp(0).config().origin.clone();
    assert_eq!(
        report.session.pseudonym,
        expected::<Ristretto255>(&users, 0, &audience)
    );
    assert!(bed
        .idp
        .request_log()
        .iter()
        .all(|e| !e.params.iter().any(|(k, _)| k == "blind")));
}

#[tokio::test]
async fn user_side_check_matches_the_service_provider() {
    let bed = Testbed::<Ristretto255>::launch(users(), &[SpSpec::default()])
        .await
        .unwrap();
    let b = browser::<Ristretto255>();
    let nav = b.begin(bed.sp_url(0)).await.unwrap();
    let intercepted = b.intercept(&nav).unwrap();
    let form = b.authenticate(&intercepted.url, "alice").await.unwrap();
    assert_eq!(form.action, BISON_REDIRECT_URI);
    let handle = intercepted.handle.as_deref();
    let delivery = b.intercept_return(form, handle).unwrap();
    let post = bison_oidc::agent::ForwardedPost {
        target: delivery.target.clone(),
        id_token: delivery.field("id_token").unwrap().to_owned(),
        blind: delivery.field("blind").unwrap().to_owned(),
    };
    let session = b.deliver(&delivery).await.unwrap();
    assert_eq!(
        post.expected_pseudonym::<Ristretto255>(),
        Some(session.pseudonym)
    );
}

#[tokio::test]
async fn html_return_page_shows_the_pseudonym() {
    let bed = Testbed::<Ristretto255>::launch(users(), &[SpSpec::default()])
        .await
        .unwrap();
    let b = browser::<Ristretto255>();
    let nav = b.begin(bed.sp_url(0)).await.unwrap();
    let intercepted = b.intercept(&nav).unwrap();
    let form = b.authenticate(&intercepted.url, "alice").await.unwrap();
    let delivery = b
        .intercept_return(form, intercepted.handle.as_deref())
        .unwrap();
    // A fresh client without the pending cookie is refused.
    let page = reqwest::Client::new()
        .post(&delivery.target)
        .form(&delivery.fields)
        .send()
        .await
        .unwrap();
    assert_eq!(page.status(), 400);
    assert!(page
        .text()
        .await
        .unwrap()
        .contains("data-code=\"UnknownSession\""));
    let session = b.deliver(&delivery).await.unwrap();
    assert!(!session.pseudonym.is_empty());
}
