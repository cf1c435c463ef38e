//! Stateless scoped pseudonyms from a hashed Diffie-Hellman OPRF.
//!
//! An identity provider holding a secret scalar per account evaluates a
//! blinded audience identifier; the service provider unblinds the result and
//! obtains a pseudonym that is stable for the (account, audience) pair while
//! the identity provider never learns the audience.
//!
//! * [`group`]: prime-order group backends and their encodings.
//! * [`derivation`]: blind, blind-evaluate, verify and unblind.
//! * [`binding`]: nonce binding to the user-facing origin.
//! * [`token`]: the signed ID token that carries the blinded pair.
//! * [`counter`]: operation counting for the cost model.

pub mod binding;
pub mod counter;
pub mod derivation;
pub mod encoding;
pub mod group;
pub mod token;

pub use derivation::{AudienceId, Blind, BlindedPair, Pseudonym, UserId};
pub use group::{PrimeGroup, Ristretto255, TestGroup};
