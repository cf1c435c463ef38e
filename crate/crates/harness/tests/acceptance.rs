//! Acceptance suite: one PASS/FAIL line per criterion, then a non-zero exit
//! if any criterion failed.

use std::time::{Duration, Instant};

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use bison_core::group::Ristretto255;
use bison_harness::attacks::{run_all_attacks, AttackOutcome};
use bison_harness::bench::run_benchmark;
use bison_harness::oprf::{
    blind_soundness_exhaustive, correctness_exhaustive, correctness_randomized,
};
use bison_harness::scenarios::{run_backcompat, run_stability, run_statelessness, STABILITY_FLOWS};
use bison_harness::uniformity::{run_uniformity_test, CHI2_9DOF_Q999, DEFAULT_SEED};
use bison_oidc::idp::UserTable;
use bison_oidc::sp::DerivationMode;
use sha2::{Digest, Sha512};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const OPRF_BUDGET: Duration = Duration::from_secs(5);
const E2E_BUDGET: Duration = Duration::from_secs(30);
const BENCH_ITERATIONS: u64 = 10_000;
const MEAN_BOUND_MICROS: f64 = 10_000.0;
const MULTS_PER_DERIVATION: u64 = 4;
const HASHES_PER_DERIVATION: u64 = 4;

struct Verdict {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        name,
        passed,
        detail: detail.into(),
    }
}

fn oprf_correctness() -> Verdict {
    let start = Instant::now();
    let exhaustive = correctness_exhaustive();
    let randomized = correctness_randomized(1000, 1);
    let elapsed = start.elapsed();
    check(
        "OPRF correctness",
        exhaustive.cases == 1000
            && exhaustive.failures == 0
            && randomized.cases == 1000
            && randomized.failures == 0
            && elapsed < OPRF_BUDGET,
        format!(
            "test group {}/{} failures, ristretto255 {}/{} failures, {:.2?}",
            exhaustive.failures, exhaustive.cases, randomized.failures, randomized.cases, elapsed
        ),
    )
}

fn blind_soundness() -> Verdict {
    let t = blind_soundness_exhaustive();
    check(
        "Blind soundness",
        t.cases == 1000 && t.false_accepts == 0 && t.false_rejects == 0,
        format!(
            "{} cases, {} false accepts, {} false rejects",
            t.cases, t.false_accepts, t.false_rejects
        ),
    )
}

fn uniformity() -> Verdict {
    let quantile = ChiSquared::new(9.0).unwrap().inverse_cdf(0.999);
    let report = run_uniformity_test(10_000, DEFAULT_SEED);
    let stats: Vec<String> = report
        .audiences
        .iter()
        .map(|a| {
            format!(
                "{} flat={} chi2={:.3}",
                a.audience, a.exhaustive_flat, a.chi_square
            )
        })
        .collect();
    check(
        "Blinding uniformity",
        report.passed() && (quantile - CHI2_9DOF_Q999).abs() < 1e-3,
        format!(
            "{}; identical={}; critical {CHI2_9DOF_Q999} (statrs {quantile:.4})",
            stats.join(", "),
            report.identically_distributed
        ),
    )
}

fn bench() -> (Verdict, Verdict) {
    let r = run_benchmark::<Ristretto255>(BENCH_ITERATIONS);
    let counts = check(
        "Operation count",
        r.scalar_mults == MULTS_PER_DERIVATION * r.iterations
            && r.hash_evals == HASHES_PER_DERIVATION * r.iterations
            && r.irregular_iterations == 0,
        format!(
            "{} mults, {} hashes per derivation over {} iterations ({} irregular)",
            r.mults_per_iteration(),
            r.hashes_per_iteration(),
            r.iterations,
            r.irregular_iterations
        ),
    );
    let perf = check(
        "Performance",
        r.iterations >= 10_000
            && r.mean_derivation_micros <= MEAN_BOUND_MICROS
            && r.retained_records == 0,
        format!(
            "mean {:.1} µs over {} iterations on {}; {} agent records retained",
            r.mean_derivation_micros, r.iterations, r.backend, r.retained_records
        ),
    );
    (counts, perf)
}

async fn stability() -> Verdict {
    let start = Instant::now();
    let result = run_stability::<Ristretto255>(STABILITY_FLOWS).await;
    let elapsed = start.elapsed();
    match result {
        Ok(r) => check(
            "End-to-end stability",
            r.flows == 20 && r.passed() && elapsed < E2E_BUDGET,
            format!(
                "{} flows -> {} distinct pseudonym(s), {} distinct blinded requests; other audience differs={}, other account differs={}; {:.2?}",
                r.flows,
                r.distinct_repeated,
                r.distinct_blinded_requests,
                r.distinct_audiences_differ,
                r.distinct_accounts_differ,
                elapsed
            ),
        ),
        Err(e) => check("End-to-end stability", false, e.to_string()),
    }
}

async fn attack_suite() -> Verdict {
    const REQUIRED: [(&str, &str); 6] = [
        ("replay/immediate", "ReplayDetected"),
        ("replay/cross-pending", "NonceBindingMismatch"),
        ("mitm/same-audience-relay", "NonceBindingMismatch"),
        ("sybil/forged-blind", "BlindMismatch"),
        ("sybil/suspended-account", "idp:suspended_account"),
        ("race/16-redemptions", "1 success, 15 ReplayDetected"),
    ];
    match run_all_attacks::<Ristretto255>().await {
        Ok(outcomes) => {
            let covered = REQUIRED.iter().all(|(name, expected)| {
                outcomes
                    .iter()
                    .any(|o| o.name == *name && o.expected == *expected && o.passed())
            });
            let failed: Vec<&AttackOutcome> = outcomes.iter().filter(|o| !o.passed()).collect();
            let detail = if failed.is_empty() {
                format!("{} scenarios in their declared class", outcomes.len())
            } else {
                failed
                    .iter()
                    .map(|o| {
                        format!(
                            "{}: expected {}, observed {}",
                            o.name, o.expected, o.observed
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("; ")
            };
            check("Attack suite", covered && failed.is_empty(), detail)
        }
        Err(e) => check("Attack suite", false, e.to_string()),
    }
}

fn ppid_oracle(client_id: &str, seed: &[u8]) -> String {
    let mut h = Sha512::new();
    h.update(client_id.as_bytes());
    h.update(seed);
    URL_SAFE_NO_PAD.encode(h.finalize())
}

async fn backcompat() -> Verdict {
    let users = UserTable::generate(&mut rand::rngs::OsRng);
    let seed = *users.accounts[1].seed();
    let mut details = Vec::new();
    let mut passed = true;
    // Two independent deployments, three sign-ins each.
    for _ in 0..2 {
        match run_backcompat::<Ristretto255>(users.clone(), "bob", 3).await {
            Ok(r) => {
                let expected = ppid_oracle(&r.client_id, &seed);
                let ok = r.pseudonyms.iter().all(|p| *p == expected)
                    && r.modes.iter().all(|m| *m == DerivationMode::PpidFallback)
                    && r.rewritten.iter().all(|w| !w);
                passed &= ok;
                details.push(format!(
                    "{}: {} runs match oracle={ok}",
                    r.client_id,
                    r.pseudonyms.len()
                ));
            }
            Err(e) => {
                passed = false;
                details.push(e.to_string());
            }
        }
    }
    check("Backwards compatibility", passed, details.join("; "))
}

async fn statelessness() -> Verdict {
    match run_statelessness::<Ristretto255>().await {
        Ok(r) => check(
            "Statelessness",
            r.passed(),
            format!(
                "fresh agent reproduces pseudonym={}, records left={}",
                r.first == r.returning,
                r.records_left
            ),
        ),
        Err(e) => check("Statelessness", false, e.to_string()),
    }
}

fn main() {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime");
    let (counts, perf) = bench();
    let verdicts = vec![
        oprf_correctness(),
        blind_soundness(),
        uniformity(),
        counts,
        perf,
        runtime.block_on(stability()),
        runtime.block_on(attack_suite()),
        runtime.block_on(backcompat()),
        runtime.block_on(statelessness()),
    ];
    println!();
    for v in &verdicts {
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("{tag}  {:<24} {}", v.name, v.detail);
    }
    let failed = verdicts.iter().filter(|v| !v.passed).count();
    println!(
        "\nacceptance: {} passed, {failed} failed\n",
        verdicts.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
