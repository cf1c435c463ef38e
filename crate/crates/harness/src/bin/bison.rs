use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use bison_core::group::{PrimeGroup, Ristretto255, TestGroup};
use bison_harness::attacks::{self, AttackOutcome, HarnessError, ATTACKS};
use bison_harness::bench::run_benchmark;
use bison_harness::uniformity::{run_uniformity_test, DEFAULT_SEED};
use bison_oidc::agent::{Agent, AutoApprove, ForwardedPost, SuffixList};
use bison_oidc::browser::HeadlessBrowser;
use bison_oidc::idp::UserTable;
use bison_oidc::testbed::{SpSpec, Testbed};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "bison",
    about = "Blinded scoped pseudonyms over OpenID Connect"
)]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Group backend.
    #[arg(long, global = true, value_enum, default_value_t = Backend::Curve)]
    backend: Backend,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    /// ristretto255
    Curve,
    /// The order-11 subgroup of Z/23; insecure, for exhaustive tests.
    Testgroup,
}

#[derive(Subcommand)]
enum Command {
    /// Start an identity provider and service providers on loopback and
    /// sign in to each once.
    Demo {
        /// Exit after the sample sign-ins instead of serving until Ctrl-C.
        #[arg(long)]
        once: bool,
        #[arg(long)]
        users: Option<PathBuf>,
    },
    /// Run one headless sign-in and print the pseudonym.
    Flow {
        #[arg(long, default_value = "alice")]
        account: String,
        /// Audience the service provider requests; defaults to its origin.
        #[arg(long)]
        audience: Option<String>,
        /// User table (JSON); created if missing.
        #[arg(long)]
        users: Option<PathBuf>,
    },
    /// Run an attack scenario: replay, mitm, race, sybil or all.
    Attack { name: String },
    /// Time the full derivation and count group operations.
    Bench {
        #[arg(long, default_value_t = 10_000)]
        iterations: u64,
    },
    /// Check the distribution of blinded audiences on the test group.
    Uniformity {
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Sign in and recompute the pseudonym on the user's side from the
    /// signed tuple and the blind.
    Selfcheck {
        #[arg(long, default_value = "alice")]
        account: String,
        #[arg(long)]
        audience: Option<String>,
    },
}

type Failure = Box<dyn std::error::Error>;

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce(&T) -> String) {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(value).expect("serializable report")
        );
    } else {
        println!("{}", text(value));
    }
}

fn load_users(path: Option<&PathBuf>) -> std::io::Result<UserTable> {
    match path {
        Some(p) => UserTable::load_or_create(p),
        None => Ok(UserTable::generate(&mut rand::rngs::OsRng)),
    }
}

fn browser<G: PrimeGroup>() -> HeadlessBrowser<G> {
    HeadlessBrowser::new(Arc::new(Agent::new(SuffixList::Bundled, AutoApprove)))
}

fn spec_for(audience: Option<String>) -> SpSpec {
    SpSpec {
        audience,
        ..SpSpec::default()
    }
}

#[derive(Serialize)]
struct FlowOutput {
    sp: String,
    account: String,
    audience: String,
    derivation_mode: String,
    pseudonym: String,
}

async fn demo<G: PrimeGroup>(
    json: bool,
    once: bool,
    users: Option<PathBuf>,
) -> Result<bool, Failure> {
    let specs = [
        SpSpec::default(),
        SpSpec::with_audience("127.0.0.1"),
        SpSpec::plain(),
    ];
    let bed = Testbed::<G>::launch(load_users(users.as_ref())?, &specs).await?;
    if !json {
        println!("identity provider  {}", bed.idp_url());
        for (i, spec) in specs.iter().enumerate() {
            let kind = if spec.plain { "plain OIDC" } else { "blinded" };
            println!(
                "service provider   {}  ({kind}, audience {})",
                bed.sp_url(i),
                bed.sp(i).config().audience()
            );
        }
    }
    let b = browser::<G>();
    let mut flows = Vec::new();
    for i in 0..specs.len() {
        for account in bed.idp.account_labels() {
            let report = b.login(bed.sp_url(i), &account).await?;
            flows.push(FlowOutput {
                sp: bed.sp_url(i).to_string(),
                account,
                audience: report.session.audience,
                derivation_mode: report.session.derivation_mode.as_str().to_owned(),
                pseudonym: report.session.pseudonym,
            });
        }
    }
    emit(json, &flows, |flows| {
        flows
            .iter()
            .map(|f| {
                format!(
                    "{}  {:<6} {:<14} {}",
                    f.sp, f.account, f.derivation_mode, f.pseudonym
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    });
    if !once {
        if !json {
            println!("serving; press Ctrl-C to stop");
        }
        tokio::signal::ctrl_c().await?;
    }
    Ok(true)
}

async fn flow<G: PrimeGroup>(
    json: bool,
    account: String,
    audience: Option<String>,
    users: Option<PathBuf>,
) -> Result<bool, Failure> {
    let bed = Testbed::<G>::launch(load_users(users.as_ref())?, &[spec_for(audience)]).await?;
    let report = browser::<G>().login(bed.sp_url(0), &account).await?;
    let out = FlowOutput {
        sp: bed.sp_url(0).to_string(),
        account,
        audience: report.session.audience,
        derivation_mode: report.session.derivation_mode.as_str().to_owned(),
        pseudonym: report.session.pseudonym,
    };
    emit(json, &out, |o| {
        format!(
            "{} ({}, audience {})",
            o.pseudonym, o.derivation_mode, o.audience
        )
    });
    Ok(true)
}

async fn attack<G: PrimeGroup>(json: bool, name: &str) -> Result<bool, Failure> {
    let outcomes: Vec<AttackOutcome> = if name == "all" {
        attacks::run_all_attacks::<G>().await?
    } else if ATTACKS.contains(&name) {
        attacks::run_attack::<G>(name).await?
    } else {
        return Err(format!("unknown attack {name:?}; expected one of {ATTACKS:?} or all").into());
    };
    emit(json, &outcomes, |outcomes| {
        outcomes
            .iter()
            .map(|o| {
                let verdict = if o.passed() { "ok  " } else { "FAIL" };
                format!(
                    "{verdict} {:<32} expected {:<28} observed {}",
                    o.name, o.expected, o.observed
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    });
    Ok(outcomes.iter().all(AttackOutcome::passed))
}

#[derive(Serialize)]
struct SelfcheckOutput {
    pseudonym_at_sp: String,
    recomputed: Option<String>,
    matches: bool,
}

async fn selfcheck<G: PrimeGroup>(
    json: bool,
    account: String,
    audience: Option<String>,
) -> Result<bool, Failure> {
    let bed = Testbed::<G>::launch(
        UserTable::generate(&mut rand::rngs::OsRng),
        &[spec_for(audience)],
    )
    .await?;
    let b = browser::<G>();
    let nav = b.begin(bed.sp_url(0)).await?;
    let intercepted = b.intercept(&nav)?;
    if intercepted.handle.is_none() {
        return Err("the agent did not blind this request; nothing to check".into());
    }
    let form = b.authenticate(&intercepted.url, &account).await?;
    let delivery = b.intercept_return(form, intercepted.handle.as_deref())?;
    let post = ForwardedPost {
        target: delivery.target.clone(),
        id_token: delivery.field("id_token").unwrap_or_default().to_owned(),
        blind: delivery.field("blind").unwrap_or_default().to_owned(),
    };
    let recomputed = post.expected_pseudonym::<G>();
    let session = b.deliver(&delivery).await?;
    let out = SelfcheckOutput {
        matches: recomputed.as_deref() == Some(session.pseudonym.as_str()),
        pseudonym_at_sp: session.pseudonym,
        recomputed,
    };
    emit(json, &out, |o| {
        format!(
            "service provider: {}\nrecomputed:       {}\n{}",
            o.pseudonym_at_sp,
            o.recomputed.as_deref().unwrap_or("(token did not verify)"),
            if o.matches { "match" } else { "MISMATCH" }
        )
    });
    Ok(out.matches)
}

async fn run<G: PrimeGroup>(cli: Cli) -> Result<bool, Failure> {
    let json = cli.json;
    match cli.command {
        Command::Demo { once, users } => demo::<G>(json, once, users).await,
        Command::Flow {
            account,
            audience,
            users,
        } => flow::<G>(json, account, audience, users).await,
        Command::Attack { name } => attack::<G>(json, &name).await,
        Command::Bench { iterations } => {
            let report = run_benchmark::<G>(iterations.max(1));
            emit(json, &report, |r| {
                format!(
                    "{}: {} iterations, mean {:.1} µs, {} mults and {} hashes per derivation",
                    r.backend,
                    r.iterations,
                    r.mean_derivation_micros,
                    r.mults_per_iteration(),
                    r.hashes_per_iteration()
                )
            });
            Ok(report.irregular_iterations == 0)
        }
        Command::Uniformity { trials, seed } => {
            let report = run_uniformity_test(trials, seed);
            emit(json, &report, |r| {
                let mut lines: Vec<String> = r
                    .audiences
                    .iter()
                    .map(|a| {
                        format!(
                            "{:<12} exhaustive flat: {}  chi-square {:.3} (< {})",
                            a.audience, a.exhaustive_flat, a.chi_square, r.critical_value
                        )
                    })
                    .collect();
                lines.push(format!(
                    "identically distributed: {}",
                    r.identically_distributed
                ));
                lines.join("\n")
            });
            Ok(report.passed())
        }
        Command::Selfcheck { account, audience } => selfcheck::<G>(json, account, audience).await,
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.backend {
        Backend::Curve => run::<Ristretto255>(cli).await,
        Backend::Testgroup => run::<TestGroup>(cli).await,
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            let e: &dyn std::error::Error = e.as_ref();
            if let Some(h) = e.downcast_ref::<HarnessError>() {
                eprintln!("error: {h}");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(2)
        }
    }
}
