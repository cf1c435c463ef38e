//! Blinded pseudonym derivation.
//!
//! The user device hashes the audience onto the group and blinds it with a
//! fresh scalar `r`; the identity provider multiplies the blinded value by
//! the account's secret `userId`; the service provider checks the blinding
//! and removes it, learning `userId · H(audience)`:
//!
//! ```
//! use bison_core::derivation::{blind, blind_eval, unblind, verify_blind, derive_pseudonym_direct, AudienceId, Blind, UserId};
//! use bison_core::group::Ristretto255;
//!
//! let audience = AudienceId::<Ristretto255>::derive(b"example.com");
//! let user = UserId::from_seed(&[7u8; 32]);
//! let r = Blind::sample(&mut rand_core::OsRng).unwrap();
//!
//! let a = blind(&audience, &r);
//! let b = blind_eval(&a, &user);
//! assert!(verify_blind(&audience, &r, &a));
//! assert_eq!(unblind(&b, &r), derive_pseudonym_direct(&user, &audience));
//! ```

use core::fmt;

use rand_core::{CryptoRng, RngCore};

use crate::encoding::{self, DecodeError};
use crate::group::{GroupError, PrimeGroup};

/// An audience identifier hashed onto the group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AudienceId<G: PrimeGroup> {
    element: G::Element,
    source: Vec<u8>,
}

impl<G: PrimeGroup> AudienceId<G> {
    pub fn derive(audience: &[u8]) -> Self {
        Self {
            element: G::hash_to_group(audience),
            source: audience.to_vec(),
        }
    }

    pub fn element(&self) -> &G::Element {
        &self.element
    }

    /// The audience identifier before hashing.
    pub fn source(&self) -> &[u8] {
        &self.source
    }
}

/// The blinding scalar of one authentication attempt.
///
/// Intended for exactly one attempt; the agent discards it once the return
/// leg has been forwarded.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Blind<G: PrimeGroup>(G::Scalar);

impl<G: PrimeGroup> Blind<G> {
    pub fn sample<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Result<Self, GroupError> {
        G::random_scalar(rng).map(Self)
    }

    /// Uses an externally chosen scalar, e.g. one sampled by the service
    /// provider for replay hardening.
    pub fn from_scalar(r: G::Scalar) -> Self {
        Self(r)
    }

    pub fn scalar(&self) -> &G::Scalar {
        &self.0
    }

    /// The `blind` request/form parameter.
    pub fn to_param(&self) -> String {
        encoding::scalar_to_b64::<G>(&self.0)
    }

    pub fn from_param(param: &str) -> Result<Self, DecodeError> {
        encoding::scalar_from_b64::<G>(param).map(Self)
    }
}

impl<G: PrimeGroup> fmt::Debug for Blind<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Blind(..)")
    }
}

/// The identity provider's per-account secret scalar.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct UserId<G: PrimeGroup>(G::Scalar);

impl<G: PrimeGroup> UserId<G> {
    /// Derives the scalar from a stored random seed.
    pub fn from_seed(seed: &[u8; 32]) -> Self {
        Self(G::hash_to_scalar(seed))
    }

    pub fn from_scalar(k: G::Scalar) -> Self {
        Self(k)
    }

    pub fn scalar(&self) -> &G::Scalar {
        &self.0
    }
}

impl<G: PrimeGroup> fmt::Debug for UserId<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("UserId(..)")
    }
}

/// The tuple signed by the identity provider: blinded audience `A` and
/// blinded pseudonym `B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlindedPair<G: PrimeGroup> {
    pub blinded_audience: G::Element,
    pub blinded_pseudonym: G::Element,
}

/// `userId · H(audience)`, stable per account and audience.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pseudonym<G: PrimeGroup>(G::Element);

impl<G: PrimeGroup> Pseudonym<G> {
    pub fn element(&self) -> &G::Element {
        &self.0
    }

    /// Canonical textual form: unpadded base64url of the element encoding.
    pub fn encode(&self) -> String {
        encoding::element_to_b64::<G>(&self.0)
    }

    pub fn decode(text: &str) -> Result<Self, DecodeError> {
        encoding::element_from_b64::<G>(text).map(Self)
    }
}

impl<G: PrimeGroup> fmt::Display for Pseudonym<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

/// `A = r · AudienceId`.
pub fn blind<G: PrimeGroup>(audience: &AudienceId<G>, r: &Blind<G>) -> G::Element {
    G::scalar_mult(&r.0, &audience.element)
}

/// `B = userId · A`.
pub fn blind_eval<G: PrimeGroup>(blinded_audience: &G::Element, user: &UserId<G>) -> G::Element {
    G::scalar_mult(&user.0, blinded_audience)
}

/// `r⁻¹ · B`.
pub fn unblind<G: PrimeGroup>(blinded_pseudonym: &G::Element, r: &Blind<G>) -> Pseudonym<G> {
    Pseudonym(G::scalar_mult(&G::scalar_invert(&r.0), blinded_pseudonym))
}

/// Recomputes the blinding and compares with the claimed `A`. Scalar
/// multiplication by a fixed element is injective, so acceptance pins the
/// claimed `r` to the one actually used.
pub fn verify_blind<G: PrimeGroup>(
    audience: &AudienceId<G>,
    claimed_r: &Blind<G>,
    blinded_audience: &G::Element,
) -> bool {
    blind(audience, claimed_r) == *blinded_audience
}

/// Computes the pseudonym without blinding. Reference path for tests and for
/// the user-side self check.
pub fn derive_pseudonym_direct<G: PrimeGroup>(
    user: &UserId<G>,
    audience: &AudienceId<G>,
) -> Pseudonym<G> {
    Pseudonym(G::scalar_mult(&user.0, &audience.element))
}
