//! Honest end-to-end behaviour over loopback HTTP.

use std::collections::BTreeSet;
use std::sync::Arc;

use bison_core::group::PrimeGroup;
use bison_oidc::agent::{Agent, AutoApprove, SuffixList};
use bison_oidc::browser::HeadlessBrowser;
use bison_oidc::idp::UserTable;
use bison_oidc::sp::DerivationMode;
use bison_oidc::testbed::{SpSpec, Testbed};
use rand::rngs::OsRng;
use serde::Serialize;

use crate::attacks::HarnessError;

pub const STABILITY_FLOWS: usize = 20;

fn fresh_browser<G: PrimeGroup>() -> HeadlessBrowser<G> {
    HeadlessBrowser::new(Arc::new(Agent::new(SuffixList::Bundled, AutoApprove)))
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub flows: usize,
    /// Distinct pseudonyms over the repeated flows; one when stable.
    pub distinct_repeated: usize,
    pub distinct_audiences_differ: bool,
    pub distinct_accounts_differ: bool,
    /// Blinded requests seen by the identity provider over the repeated
    /// flows, all of which must differ.
    pub distinct_blinded_requests: usize,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.distinct_repeated == 1
            && self.distinct_audiences_differ
            && self.distinct_accounts_differ
            && self.distinct_blinded_requests == self.flows
    }
}

/// `flows` sign-ins by one account at one audience, each with a fresh
/// blind, then one sign-in at a second audience and one by a second
/// account.
pub async fn run_stability<G: PrimeGroup>(flows: usize) -> Result<StabilityReport, HarnessError> {
    let bed = Testbed::<G>::launch(
        UserTable::generate(&mut OsRng),
        &[SpSpec::default(), SpSpec::with_audience("127.0.0.1")],
    )
    .await?;
    let b = fresh_browser::<G>();
    let mut repeated = BTreeSet::new();
    for _ in 0..flows {
        repeated.insert(b.login(bed.sp_url(0), "alice").await?.session.pseudonym);
    }
    let blinded: BTreeSet<String> = bed
        .idp
        .request_log()
        .into_iter()
        .filter(|e| e.method == "GET")
        .filter_map(|e| {
            e.params
                .into_iter()
                .find(|(k, _)| k == "client_id")
                .map(|(_, v)| v)
        })
        .collect();
    let reference = repeated.iter().next().cloned().unwrap_or_default();
    let other_audience = b.login(bed.sp_url(1), "alice").await?.session.pseudonym;
    let other_account = b.login(bed.sp_url(0), "bob").await?.session.pseudonym;
    Ok(StabilityReport {
        flows,
        distinct_repeated: repeated.len(),
        distinct_audiences_differ: other_audience != reference,
        distinct_accounts_differ: other_account != reference && other_account != other_audience,
        distinct_blinded_requests: blinded.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StatelessnessReport {
    pub first: String,
    pub returning: String,
    pub records_left: usize,
}

impl StatelessnessReport {
    pub fn passed(&self) -> bool {
        self.first == self.returning && self.records_left == 0
    }
}

/// Signs in with one agent, discards it, and signs in again with a newly
/// constructed agent and browser.
pub async fn run_statelessness<G: PrimeGroup>() -> Result<StatelessnessReport, HarnessError> {
    let bed = Testbed::<G>::launch(UserTable::generate(&mut OsRng), &[SpSpec::default()]).await?;
    let first_browser = fresh_browser::<G>();
    let first = first_browser
        .login(bed.sp_url(0), "carol")
        .await?
        .session
        .pseudonym;
    let records_left = first_browser.agent().records_held();
    drop(first_browser);
    let returning = fresh_browser::<G>()
        .login(bed.sp_url(0), "carol")
        .await?
        .session
        .pseudonym;
    Ok(StatelessnessReport {
        first,
        returning,
        records_left,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BackcompatReport {
    pub client_id: String,
    pub pseudonyms: Vec<String>,
    pub modes: Vec<DerivationMode>,
    pub rewritten: Vec<bool>,
}

/// Sign-ins at a service provider that does not opt in, each with a new
/// browser.
pub async fn run_backcompat<G: PrimeGroup>(
    users: UserTable,
    account: &str,
    runs: usize,
) -> Result<BackcompatReport, HarnessError> {
    let bed = Testbed::<G>::launch(users, &[SpSpec::plain()]).await?;
    let mut report = BackcompatReport {
        client_id: bed.sp(0).config().origin.clone(),
        pseudonyms: Vec::new(),
        modes: Vec::new(),
        rewritten: Vec::new(),
    };
    for _ in 0..runs {
        let flow = fresh_browser::<G>().login(bed.sp_url(0), account).await?;
        report.pseudonyms.push(flow.session.pseudonym);
        report.modes.push(flow.session.derivation_mode);
        report.rewritten.push(flow.rewritten);
    }
    Ok(report)
}
