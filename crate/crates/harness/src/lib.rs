//! Adversarial scenarios, statistical checks and the benchmark for blinded
//! pseudonym derivation, plus the `bison` command-line tool.
//!
//! * [`oprf`]: exhaustive correctness and blind-soundness checks.
//! * [`uniformity`]: distribution of the blinded audience.
//! * [`bench`]: timing and exact operation counts.
//! * [`attacks`]: replay, relay, redemption race and Sybil attempts.
//! * [`scenarios`]: stability, statelessness and plain-OIDC fallback.

pub mod attacks;
pub mod bench;
pub mod oprf;
pub mod scenarios;
pub mod uniformity;
