//! Prime-order group backends.
//!
//! Every protocol value is either a non-identity element of a prime-order
//! group or a nonzero scalar modulo the group order. [`PrimeGroup`] captures
//! exactly the operations the derivation needs, so callers stay generic over
//! the backend:
//!
//! * [`Ristretto255`]: the production backend (ristretto255 with SHA-512).
//! * [`TestGroup`]: the order-11 subgroup of `Z_23^*`, small enough to
//!   enumerate exhaustively in tests.
//!
//! Scalar multiplications and hash evaluations performed through this trait
//! are reported to [`crate::counter`].

mod ristretto;
mod testgroup;

use core::fmt::Debug;

use rand_core::{CryptoRng, RngCore};

pub use ristretto::{Ristretto255, RistrettoElement, RistrettoScalar};
pub use testgroup::{TestElement, TestGroup, TestScalar};

/// Static parameters of a group backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupDescriptor {
    pub name: &'static str,
    /// Group order in decimal.
    pub order: &'static str,
    pub element_byte_length: usize,
    pub scalar_byte_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroupError {
    #[error("expected {expected} bytes, got {actual}")]
    WrongLength { expected: usize, actual: usize },
    #[error("non-canonical encoding")]
    NonCanonical,
    #[error("identity element is not a valid protocol value")]
    Identity,
    #[error("zero is not a valid protocol scalar")]
    ZeroScalar,
    #[error("entropy source failed: {0}")]
    Entropy(String),
}

/// A group of prime order `p`, restricted to its non-identity elements and
/// the units of `Z_p`.
///
/// Implementations are zero-sized markers; all operations are associated
/// functions over the backend's element and scalar types.
pub trait PrimeGroup: Copy + Debug + Default + Eq + Send + Sync + 'static {
    /// A member of the group other than the identity.
    type Element: Copy + Debug + Eq + Send + Sync;
    /// A nonzero residue modulo the group order.
    type Scalar: Copy + Debug + Eq + Send + Sync;

    fn descriptor() -> GroupDescriptor;

    /// Deterministically maps an arbitrary byte string onto the group.
    fn hash_to_group(input: &[u8]) -> Self::Element;

    /// Deterministically maps an arbitrary byte string onto a nonzero scalar.
    fn hash_to_scalar(input: &[u8]) -> Self::Scalar;

    /// Samples a uniformly random nonzero scalar.
    fn random_scalar<R: RngCore + CryptoRng + ?Sized>(
        rng: &mut R,
    ) -> Result<Self::Scalar, GroupError>;

    /// Computes `s · x`.
    fn scalar_mult(s: &Self::Scalar, x: &Self::Element) -> Self::Element;

    fn scalar_invert(s: &Self::Scalar) -> Self::Scalar;

    /// Product of two scalars modulo the group order.
    fn scalar_product(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;

    fn scalar_one() -> Self::Scalar;

    fn encode_element(x: &Self::Element) -> Vec<u8>;
    fn decode_element(bytes: &[u8]) -> Result<Self::Element, GroupError>;

    fn encode_scalar(s: &Self::Scalar) -> Vec<u8>;
    fn decode_scalar(bytes: &[u8]) -> Result<Self::Scalar, GroupError>;
}

pub(crate) fn check_length(bytes: &[u8], expected: usize) -> Result<(), GroupError> {
    if bytes.len() != expected {
        return Err(GroupError::WrongLength {
            expected,
            actual: bytes.len(),
        });
    }
    Ok(())
}
