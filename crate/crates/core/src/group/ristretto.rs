use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use elliptic_curve::hash2curve::{ExpandMsg, ExpandMsgXmd, Expander};
use rand_core::{CryptoRng, RngCore};
use sha2::Sha512;

use super::{check_length, GroupDescriptor, GroupError, PrimeGroup};
use crate::counter;

/// Domain separation tags of the ristretto255-SHA512 OPRF suite, mode 0x00.
const HASH_TO_GROUP_DST: &[u8] = b"HashToGroup-OPRFV1-\x00-ristretto255-SHA512";
const HASH_TO_SCALAR_DST: &[u8] = b"HashToScalar-OPRFV1-\x00-ristretto255-SHA512";

/// The ristretto255 group with SHA-512 as companion hash.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ristretto255;

/// A ristretto255 point other than the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RistrettoElement(RistrettoPoint);

impl RistrettoElement {
    pub fn point(&self) -> &RistrettoPoint {
        &self.0
    }
}

impl TryFrom<RistrettoPoint> for RistrettoElement {
    type Error = GroupError;

    fn try_from(point: RistrettoPoint) -> Result<Self, Self::Error> {
        if point == RistrettoPoint::identity() {
            return Err(GroupError::Identity);
        }
        Ok(Self(point))
    }
}

/// A nonzero scalar modulo the ristretto255 group order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RistrettoScalar(Scalar);

impl RistrettoScalar {
    pub fn scalar(&self) -> &Scalar {
        &self.0
    }
}

impl TryFrom<Scalar> for RistrettoScalar {
    type Error = GroupError;

    fn try_from(scalar: Scalar) -> Result<Self, Self::Error> {
        if scalar == Scalar::ZERO {
            return Err(GroupError::ZeroScalar);
        }
        Ok(Self(scalar))
    }
}

fn expand_xmd(msg: &[u8], dst: &[u8]) -> [u8; 64] {
    let mut uniform = [0u8; 64];
    let dsts = [dst];
    ExpandMsgXmd::<Sha512>::expand_message(&[msg], &dsts, uniform.len())
        .expect("64-byte expansion with a short DST is always valid")
        .fill_bytes(&mut uniform);
    uniform
}

impl PrimeGroup for Ristretto255 {
    type Element = RistrettoElement;
    type Scalar = RistrettoScalar;

    fn descriptor() -> GroupDescriptor {
        GroupDescriptor {
            name: "ristretto255",
            // 2^252 + 27742317777372353535851937790883648493
            order: "7237005577332262213973186563042994240857116359379907606001950938285454250989",
            element_byte_length: 32,
            scalar_byte_length: 32,
        }
    }

    fn hash_to_group(input: &[u8]) -> RistrettoElement {
        counter::record_hash_eval();
        let mut point = RistrettoPoint::from_uniform_bytes(&expand_xmd(input, HASH_TO_GROUP_DST));
        // Reaching the identity needs a SHA-512 preimage; the loop exists so
        // the type invariant holds unconditionally.
        let mut retry = 0u8;
        while point == RistrettoPoint::identity() {
            let mut extended = input.to_vec();
            extended.push(retry);
            point = RistrettoPoint::from_uniform_bytes(&expand_xmd(&extended, HASH_TO_GROUP_DST));
            retry = retry.wrapping_add(1);
        }
        RistrettoElement(point)
    }

    fn hash_to_scalar(input: &[u8]) -> RistrettoScalar {
        counter::record_hash_eval();
        let mut scalar = Scalar::from_bytes_mod_order_wide(&expand_xmd(input, HASH_TO_SCALAR_DST));
        let mut retry = 0u8;
        while scalar == Scalar::ZERO {
            let mut extended = input.to_vec();
            extended.push(retry);
            scalar = Scalar::from_bytes_mod_order_wide(&expand_xmd(&extended, HASH_TO_SCALAR_DST));
            retry = retry.wrapping_add(1);
        }
        RistrettoScalar(scalar)
    }

    fn random_scalar<R: RngCore + CryptoRng + ?Sized>(
        rng: &mut R,
    ) -> Result<RistrettoScalar, GroupError> {
        let mut wide = [0u8; 64];
        loop {
            rng.try_fill_bytes(&mut wide)
                .map_err(|e| GroupError::Entropy(e.to_string()))?;
            let scalar = Scalar::from_bytes_mod_order_wide(&wide);
            if scalar != Scalar::ZERO {
                return Ok(RistrettoScalar(scalar));
            }
        }
    }

    fn scalar_mult(s: &RistrettoScalar, x: &RistrettoElement) -> RistrettoElement {
        counter::record_scalar_mult();
        RistrettoElement(s.0 * x.0)
    }

    fn scalar_invert(s: &RistrettoScalar) -> RistrettoScalar {
        RistrettoScalar(s.0.invert())
    }

    fn scalar_product(a: &RistrettoScalar, b: &RistrettoScalar) -> RistrettoScalar {
        RistrettoScalar(a.0 * b.0)
    }

    fn scalar_one() -> RistrettoScalar {
        RistrettoScalar(Scalar::ONE)
    }

    fn encode_element(x: &RistrettoElement) -> Vec<u8> {
        x.0.compress().to_bytes().to_vec()
    }

    fn decode_element(bytes: &[u8]) -> Result<RistrettoElement, GroupError> {
        check_length(bytes, 32)?;
        let point = CompressedRistretto::from_slice(bytes)
            .map_err(|_| GroupError::NonCanonical)?
            .decompress()
            .ok_or(GroupError::NonCanonical)?;
        RistrettoElement::try_from(point)
    }

    fn encode_scalar(s: &RistrettoScalar) -> Vec<u8> {
        s.0.to_bytes().to_vec()
    }

    fn decode_scalar(bytes: &[u8]) -> Result<RistrettoScalar, GroupError> {
        check_length(bytes, 32)?;
        let mut repr = [0u8; 32];
        repr.copy_from_slice(bytes);
        let scalar: Option<Scalar> = Scalar::from_canonical_bytes(repr).into();
        RistrettoScalar::try_from(scalar.ok_or(GroupError::NonCanonical)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn identity_encoding_is_rejected() {
        assert_eq!(
            Ristretto255::decode_element(&[0u8; 32]),
            Err(GroupError::Identity)
        );
        assert_eq!(
            Ristretto255::decode_scalar(&[0u8; 32]),
            Err(GroupError::ZeroScalar)
        );
    }

    #[test]
    fn truncated_encodings_are_length_errors() {
        let x = Ristretto255::hash_to_group(b"example.com");
        let bytes = Ristretto255::encode_element(&x);
        assert_eq!(
            Ristretto255::decode_element(&bytes[..31]),
            Err(GroupError::WrongLength {
                expected: 32,
                actual: 31
            })
        );
    }

    #[test]
    fn non_canonical_encodings_are_rejected() {
        // The field modulus 2^255 - 19 itself is a non-canonical field encoding.
        let mut p = [0xffu8; 32];
        p[0] = 0xed;
        p[31] = 0x7f;
        assert_eq!(
            Ristretto255::decode_element(&p),
            Err(GroupError::NonCanonical)
        );
        // The group order l is a non-canonical scalar encoding.
        let l = hex::decode("edd3f55c1a631258d69cf7a2def9de1400000000000000000000000000000010")
            .unwrap();
        assert_eq!(
            Ristretto255::decode_scalar(&l),
            Err(GroupError::NonCanonical)
        );
    }

    #[test]
    fn random_scalars_do_not_collide() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..10_000 {
            let s = Ristretto255::random_scalar(&mut rng).unwrap();
            assert!(seen.insert(Ristretto255::encode_scalar(&s)));
        }
    }
}
