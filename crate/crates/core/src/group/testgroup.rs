use rand_core::{CryptoRng, RngCore};
use sha2::{Digest, Sha512};

use super::{check_length, GroupDescriptor, GroupError, PrimeGroup};
use crate::counter;

const MODULUS: u16 = 23;
const ORDER: u8 = 11;
const GENERATOR: u16 = 2;

const fn is_prime(n: u8) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

const _: () = assert!(is_prime(ORDER), "test group order must be prime");
const _: () = assert!((MODULUS - 1).is_multiple_of(ORDER as u16));

/// The order-11 subgroup of `Z_23^*`, generated by 2 and written
/// multiplicatively: `s · x` is `x^s mod 23`.
///
/// Not constant time; for exhaustive tests only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TestGroup;

/// A residue in the order-11 subgroup, never 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TestElement(u16);

/// An exponent in `1..=10`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TestScalar(u8);

fn pow_mod(base: u16, exp: u8) -> u16 {
    let mut acc = 1u32;
    for _ in 0..exp {
        acc = acc * u32::from(base) % u32::from(MODULUS);
    }
    acc as u16
}

impl TestElement {
    pub fn new(residue: u16) -> Option<Self> {
        let in_subgroup = residue > 0 && residue < MODULUS && pow_mod(residue, ORDER) == 1;
        (in_subgroup && residue != 1).then_some(Self(residue))
    }

    pub fn residue(self) -> u16 {
        self.0
    }
}

impl TestScalar {
    pub fn new(value: u8) -> Option<Self> {
        (!value.is_multiple_of(ORDER)).then_some(Self(value % ORDER))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TestGroup {
    /// All ten non-identity elements, in generator-power order.
    pub fn elements() -> impl Iterator<Item = TestElement> {
        (1..ORDER).map(|e| TestElement(pow_mod(GENERATOR, e)))
    }

    /// All ten nonzero scalars.
    pub fn scalars() -> impl Iterator<Item = TestScalar> {
        (1..ORDER).map(TestScalar)
    }

    /// Reduces a SHA-512 digest modulo 10 and shifts into `1..=10`.
    fn digest_to_exponent(input: &[u8]) -> u8 {
        let digest = Sha512::digest(input);
        let rem = digest.iter().fold(0u32, |acc, &b| {
            (acc * 256 + u32::from(b)) % u32::from(ORDER - 1)
        });
        rem as u8 + 1
    }
}

impl PrimeGroup for TestGroup {
    type Element = TestElement;
    type Scalar = TestScalar;

    fn descriptor() -> GroupDescriptor {
        GroupDescriptor {
            name: "testgroup-11-of-23",
            order: "11",
            element_byte_length: 2,
            scalar_byte_length: 2,
        }
    }

    fn hash_to_group(input: &[u8]) -> TestElement {
        counter::record_hash_eval();
        let mut exponent = Self::digest_to_exponent(input);
        let mut residue = pow_mod(GENERATOR, exponent);
        // Exponents lie in 1..=10, so the identity cannot occur; resampling
        // with a counter byte keeps the rule explicit.
        let mut retry = 0u8;
        while residue == 1 {
            let mut extended = input.to_vec();
            extended.push(retry);
            exponent = Self::digest_to_exponent(&extended);
            residue = pow_mod(GENERATOR, exponent);
            retry = retry.wrapping_add(1);
        }
        TestElement(residue)
    }

    /// Biased towards small exponents (2^512 mod 10 != 0); irrelevant at
    /// test scale.
    fn hash_to_scalar(input: &[u8]) -> TestScalar {
        counter::record_hash_eval();
        TestScalar(Self::digest_to_exponent(input))
    }

    fn random_scalar<R: RngCore + CryptoRng + ?Sized>(
        rng: &mut R,
    ) -> Result<TestScalar, GroupError> {
        let mut byte = [0u8; 1];
        loop {
            rng.try_fill_bytes(&mut byte)
                .map_err(|e| GroupError::Entropy(e.to_string()))?;
            // 250 is the largest multiple of 10 that fits a byte.
            if byte[0] < 250 {
                return Ok(TestScalar(byte[0] % (ORDER - 1) + 1));
            }
        }
    }

    fn scalar_mult(s: &TestScalar, x: &TestElement) -> TestElement {
        counter::record_scalar_mult();
        TestElement(pow_mod(x.0, s.0))
    }

    fn scalar_invert(s: &TestScalar) -> TestScalar {
        // Fermat: s^(p-2) mod p.
        let mut acc = 1u16;
        for _ in 0..ORDER - 2 {
            acc = acc * u16::from(s.0) % u16::from(ORDER);
        }
        TestScalar(acc as u8)
    }

    fn scalar_product(a: &TestScalar, b: &TestScalar) -> TestScalar {
        TestScalar((u16::from(a.0) * u16::from(b.0) % u16::from(ORDER)) as u8)
    }

    fn scalar_one() -> TestScalar {
        TestScalar(1)
    }

    fn encode_element(x: &TestElement) -> Vec<u8> {
        x.0.to_be_bytes().to_vec()
    }

    fn decode_element(bytes: &[u8]) -> Result<TestElement, GroupError> {
        check_length(bytes, 2)?;
        let residue = u16::from_be_bytes([bytes[0], bytes[1]]);
        if residue == 1 {
            return Err(GroupError::Identity);
        }
        TestElement::new(residue).ok_or(GroupError::NonCanonical)
    }

    fn encode_scalar(s: &TestScalar) -> Vec<u8> {
        u16::from(s.0).to_be_bytes().to_vec()
    }

    fn decode_scalar(bytes: &[u8]) -> Result<TestScalar, GroupError> {
        check_length(bytes, 2)?;
        match u16::from_be_bytes([bytes[0], bytes[1]]) {
            0 => Err(GroupError::ZeroScalar),
            v if v < u16::from(ORDER) => Ok(TestScalar(v as u8)),
            _ => Err(GroupError::NonCanonical),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: square-and-multiply over u64.
    fn modexp(base: u64, mut exp: u64, m: u64) -> u64 {
        let (mut acc, mut b) = (1u64, base % m);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * b % m;
            }
            b = b * b % m;
            exp >>= 1;
        }
        acc
    }

    fn el(r: u16) -> TestElement {
        TestElement::new(r).unwrap()
    }

    fn sc(v: u8) -> TestScalar {
        TestScalar::new(v).unwrap()
    }

    #[test]
    fn subgroup_enumeration_matches_repeated_multiplication() {
        let mut powers = Vec::new();
        let mut x = 1u64;
        for _ in 0..11 {
            x = x * 2 % 23;
            powers.push(x as u16);
        }
        assert_eq!(powers, vec![2, 4, 8, 16, 9, 18, 13, 3, 6, 12, 1]);
        let enumerated: Vec<u16> = TestGroup::elements().map(|e| e.residue()).collect();
        assert_eq!(enumerated, powers[..10]);
    }

    #[test]
    fn scalar_mult_matches_modexp_oracle() {
        assert_eq!(TestGroup::scalar_mult(&sc(3), &el(4)), el(18));
        for x in TestGroup::elements() {
            for s in TestGroup::scalars() {
                let expected = modexp(u64::from(x.residue()), u64::from(s.value()), 23) as u16;
                assert_eq!(TestGroup::scalar_mult(&s, &x).residue(), expected);
            }
        }
    }

    #[test]
    fn inversion_matches_exhaustive_search() {
        assert_eq!(TestGroup::scalar_invert(&sc(3)), sc(4));
        assert_eq!(TestGroup::scalar_invert(&sc(1)), sc(1));
        for s in TestGroup::scalars() {
            let found = (1u8..11)
                .find(|t| u16::from(s.value()) * u16::from(*t) % 11 == 1)
                .unwrap();
            assert_eq!(TestGroup::scalar_invert(&s).value(), found);
            assert_eq!(TestGroup::scalar_invert(&TestGroup::scalar_invert(&s)), s);
        }
    }

    #[test]
    fn group_law_for_scalar_products() {
        for x in TestGroup::elements() {
            for a in TestGroup::scalars() {
                for b in TestGroup::scalars() {
                    let nested = TestGroup::scalar_mult(&a, &TestGroup::scalar_mult(&b, &x));
                    let direct = TestGroup::scalar_mult(&TestGroup::scalar_product(&a, &b), &x);
                    assert_eq!(nested, direct);
                }
            }
        }
    }

    #[test]
    fn hash_to_group_stays_in_subgroup_and_avoids_identity() {
        let members: Vec<u16> = vec![2, 4, 8, 16, 9, 18, 13, 3, 6, 12];
        for i in 0u32..10_000 {
            let x = TestGroup::hash_to_group(&i.to_be_bytes());
            assert!(members.contains(&x.residue()));
        }
        assert!(members.contains(&TestGroup::hash_to_group(b"").residue()));
    }

    #[test]
    fn encodings() {
        assert_eq!(TestGroup::encode_element(&el(18)), vec![0, 18]);
        assert_eq!(TestGroup::decode_element(&[0, 18]), Ok(el(18)));
        assert_eq!(
            TestGroup::decode_element(&[0, 1]),
            Err(GroupError::Identity)
        );
        assert_eq!(
            TestGroup::decode_element(&[0, 0]),
            Err(GroupError::NonCanonical)
        );
        // 5 is in Z_23^* but outside the order-11 subgroup.
        assert_eq!(
            TestGroup::decode_element(&[0, 5]),
            Err(GroupError::NonCanonical)
        );
        assert_eq!(
            TestGroup::decode_element(&[0, 41]),
            Err(GroupError::NonCanonical)
        );
        assert_eq!(
            TestGroup::decode_element(&[18]),
            Err(GroupError::WrongLength {
                expected: 2,
                actual: 1
            })
        );
        assert_eq!(
            TestGroup::decode_scalar(&[0, 0]),
            Err(GroupError::ZeroScalar)
        );
        assert_eq!(
            TestGroup::decode_scalar(&[0, 11]),
            Err(GroupError::NonCanonical)
        );
        assert_eq!(TestGroup::decode_scalar(&[0, 3]), Ok(sc(3)));
    }
}
