//! Timing and operation counts of the full derivation.
//!
//! One iteration runs every step of a sign-in that involves group
//! arithmetic or the counted hashes, using the same functions the services
//! use, but without HTTP and without token signatures:
//!
//! * agent: sample `r`, hash the audience, blind, bind the nonce;
//! * identity provider: decode `A`, evaluate;
//! * service provider: decode, re-hash the audience, check the blind and
//!   the nonce binding, unblind.

use std::time::Instant;

use bison_core::counter::{CountingScope, OpCounts};
use bison_core::derivation::{blind_eval, unblind, Blind, BlindedPair, UserId};
use bison_core::encoding::{element_from_b64, element_to_b64};
use bison_core::group::PrimeGroup;
use bison_oidc::agent::{
    Agent, AutoApprove, OriginContext, ReturnOutcome, RewriteOutcome, SuffixList,
};
use bison_oidc::sp::check_blinded;
use bison_oidc::wire::{AuthorizationRequest, BISON_REDIRECT_URI};
use serde::Serialize;
use url::Url;

pub const BENCH_ORIGIN: &str = "https://login.example.com";
pub const BENCH_AUDIENCE: &str = "example.com";
const BENCH_NONCE: &str = "n-0S6_WzA2Mj";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub backend: &'static str,
    pub iterations: u64,
    pub mean_derivation_micros: f64,
    /// Totals over all iterations.
    pub scalar_mults: u64,
    pub hash_evals: u64,
    /// Iterations whose own counts differed from the first iteration's.
    pub irregular_iterations: u64,
    /// Agent records still held after the run.
    pub retained_records: usize,
}

impl BenchReport {
    pub fn mults_per_iteration(&self) -> f64 {
        self.scalar_mults as f64 / self.iterations as f64
    }

    pub fn hashes_per_iteration(&self) -> f64 {
        self.hash_evals as f64 / self.iterations as f64
    }
}

/// The service provider's request for the benchmark audience.
pub fn bench_request() -> AuthorizationRequest {
    AuthorizationRequest::from_pairs([
        ("scope", "openid"),
        ("client_id", BENCH_ORIGIN),
        ("redirect_uri", "https://login.example.com/return"),
        ("nonce", BENCH_NONCE),
        ("pairwise_subject_types", "bison"),
        ("audience_id", BENCH_AUDIENCE),
    ])
    .expect("static request")
}

/// Everything one derivation needs that outlives a single iteration.
pub struct Pipeline<G: PrimeGroup> {
    agent: Agent<G>,
    origin: OriginContext,
    request: AuthorizationRequest,
    user: UserId<G>,
}

impl<G: PrimeGroup> Pipeline<G> {
    pub fn new(user_seed: &[u8; 32]) -> Self {
        Self {
            agent: Agent::new(SuffixList::Bundled, AutoApprove),
            origin: OriginContext::from_url(&Url::parse(BENCH_ORIGIN).expect("static URL")),
            request: bench_request(),
            user: UserId::from_seed(user_seed),
        }
    }

    pub fn agent(&self) -> &Agent<G> {
        &self.agent
    }

    /// One full derivation; returns the encoded pseudonym.
    pub fn derive_once(&self) -> String {
        let RewriteOutcome::Rewritten { request, handle } = self
            .agent
            .rewrite_request(&self.request, &self.origin, 0)
            .expect("consent is automatic")
        else {
            panic!("benchmark request must be rewritten");
        };
        let a = element_from_b64::<G>(&request.client_id).expect("agent output decodes");
        let b = blind_eval(&a, &self.user);
        let (a_wire, b_wire) = (element_to_b64::<G>(&a), element_to_b64::<G>(&b));
        let ReturnOutcome::Forward(post) = self
            .agent
            .handle_return(&handle, BISON_REDIRECT_URI, "", 0)
            .expect("record present")
        else {
            panic!("return must be forwarded");
        };
        let pair = BlindedPair::<G> {
            blinded_audience: element_from_b64::<G>(&a_wire).expect("decodes"),
            blinded_pseudonym: element_from_b64::<G>(&b_wire).expect("decodes"),
        };
        let r = Blind::<G>::from_param(&post.blind).expect("decodes");
        check_blinded(
            BENCH_AUDIENCE,
            &self.origin.current_origin,
            BENCH_NONCE,
            &request.nonce,
            &pair,
            &r,
        )
        .expect("honest derivation verifies");
        unblind(&pair.blinded_pseudonym, &r).encode()
    }

    /// Runs one derivation inside a fresh counting scope.
    pub fn count_once(&self) -> (String, OpCounts) {
        let scope = CountingScope::start();
        let pseudonym = self.derive_once();
        (pseudonym, scope.counts())
    }
}

/// Runs `iterations` derivations and reports the mean time and exact
/// operation counts.
pub fn run_benchmark<G: PrimeGroup>(iterations: u64) -> BenchReport {
    assert!(iterations > 0, "need at least one iteration");
    let pipeline = Pipeline::<G>::new(&[0x42; 32]);
    // Warm up caches and lazily initialized tables.
    for _ in 0..iterations.min(100) {
        pipeline.derive_once();
    }
    let (_, reference) = pipeline.count_once();
    let mut totals = OpCounts::default();
    let mut irregular = 0;
    let mut elapsed = std::time::Duration::ZERO;
    for _ in 0..iterations {
        let scope = CountingScope::start();
        let start = Instant::now();
        std::hint::black_box(pipeline.derive_once());
        elapsed += start.elapsed();
        let counts = scope.counts();
        if counts != reference {
            irregular += 1;
        }
        totals.scalar_mults += counts.scalar_mults;
        totals.hash_evals += counts.hash_evals;
    }
    BenchReport {
        backend: G::descriptor().name,
        iterations,
        mean_derivation_micros: elapsed.as_secs_f64() * 1e6 / iterations as f64,
        scalar_mults: totals.scalar_mults,
        hash_evals: totals.hash_evals,
        irregular_iterations: irregular,
        retained_records: pipeline.agent().records_held(),
    }
}
