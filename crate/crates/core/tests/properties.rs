//! Algebraic properties of the derivation, exhaustive on the test group and
//! randomized on ristretto255.

use std::collections::BTreeMap;

use bison_core::counter::CountingScope;
use bison_core::derivation::{
    blind, blind_eval, derive_pseudonym_direct, unblind, verify_blind, AudienceId, Blind, UserId,
};
use bison_core::group::{PrimeGroup, Ristretto255, TestElement, TestGroup};
use proptest::prelude::*;

/// Audience strings covering every test-group element, found by scanning.
fn test_group_audiences() -> BTreeMap<TestElement, AudienceId<TestGroup>> {
    let mut found = BTreeMap::new();
    for i in 0.. {
        let aud = AudienceId::<TestGroup>::derive(format!("aud-{i}").as_bytes());
        found.entry(*aud.element()).or_insert(aud);
        if found.len() == 10 {
            return found;
        }
    }
    unreachable!()
}

#[test]
fn correctness_is_exhaustive_on_test_group() {
    let mut cases = 0;
    for aud in test_group_audiences().values() {
        for r in TestGroup::scalars().map(Blind::from_scalar) {
            for k in TestGroup::scalars().map(UserId::from_scalar) {
                let b = blind_eval(&blind(aud, &r), &k);
                assert_eq!(unblind(&b, &r), derive_pseudonym_direct(&k, aud));
                assert_eq!(
                    *unblind(&b, &r).element(),
                    TestGroup::scalar_mult(k.scalar(), aud.element())
                );
                cases += 1;
            }
        }
    }
    assert_eq!(cases, 1000);
}

#[test]
fn blinding_round_trip_is_exhaustive_on_test_group() {
    for x in TestGroup::elements() {
        for s in TestGroup::scalars() {
            let y = TestGroup::scalar_mult(&s, &x);
            assert_eq!(TestGroup::scalar_mult(&TestGroup::scalar_invert(&s), &y), x);
        }
    }
}

#[test]
fn verify_blind_accepts_exactly_the_used_blind() {
    for aud in test_group_audiences().values() {
        for r in TestGroup::scalars() {
            let a = blind(aud, &Blind::from_scalar(r));
            for claimed in TestGroup::scalars() {
                assert_eq!(
                    verify_blind(aud, &Blind::from_scalar(claimed), &a),
                    claimed == r
                );
            }
        }
    }
}

#[test]
fn blinding_is_a_bijection_onto_the_non_identity_elements() {
    let all: Vec<TestElement> = {
        let mut v: Vec<_> = TestGroup::elements().collect();
        v.sort();
        v
    };
    for aud in test_group_audiences().values() {
        let mut image: Vec<TestElement> = TestGroup::scalars()
            .map(|r| blind(aud, &Blind::from_scalar(r)))
            .collect();
        image.sort();
        assert_eq!(image, all);
    }
}

#[test]
fn pseudonyms_under_one_audience_are_equal_iff_user_ids_are() {
    for aud in test_group_audiences().values() {
        for k1 in TestGroup::scalars() {
            for k2 in TestGroup::scalars() {
                let p1 = derive_pseudonym_direct(&UserId::from_scalar(k1), aud);
                let p2 = derive_pseudonym_direct(&UserId::from_scalar(k2), aud);
                assert_eq!(p1 == p2, k1 == k2);
            }
        }
    }
}

#[test]
fn pseudonym_does_not_depend_on_the_blind() {
    let aud = AudienceId::<Ristretto255>::derive(b"example.com");
    let user = UserId::<Ristretto255>::from_seed(&[3u8; 32]);
    let mut rng = rand::thread_rng();
    let first = {
        let r = Blind::sample(&mut rng).unwrap();
        unblind(&blind_eval(&blind(&aud, &r), &user), &r).encode()
    };
    for _ in 0..20 {
        let r = Blind::sample(&mut rng).unwrap();
        assert_eq!(
            unblind(&blind_eval(&blind(&aud, &r), &user), &r).encode(),
            first
        );
    }
}

#[test]
fn core_pipeline_counts() {
    let aud_src = b"example.com";
    let user = UserId::<Ristretto255>::from_seed(&[5u8; 32]);
    let r = Blind::sample(&mut rand::thread_rng()).unwrap();
    let scope = CountingScope::start();
    let aud = AudienceId::<Ristretto255>::derive(aud_src);
    let a = blind(&aud, &r);
    let b = blind_eval(&a, &user);
    let sp_aud = AudienceId::<Ristretto255>::derive(aud_src);
    assert!(verify_blind(&sp_aud, &r, &a));
    unblind(&b, &r);
    let counts = scope.counts();
    assert_eq!(counts.scalar_mults, 4);
    assert_eq!(counts.hash_evals, 2);
}

fn ristretto_triple() -> impl Strategy<Value = (Vec<u8>, [u8; 32], [u8; 32])> {
    (
        proptest::collection::vec(any::<u8>(), 0..48),
        any::<[u8; 32]>(),
        any::<[u8; 32]>(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ristretto_derivation_matches_direct((audience, r_seed, user_seed) in ristretto_triple()) {
        let aud = AudienceId::<Ristretto255>::derive(&audience);
        let r = Blind::from_scalar(Ristretto255::hash_to_scalar(&r_seed));
        let user = UserId::from_seed(&user_seed);
        let a = blind(&aud, &r);
        prop_assert!(verify_blind(&aud, &r, &a));
        prop_assert_eq!(unblind(&blind_eval(&a, &user), &r), derive_pseudonym_direct(&user, &aud));
    }

    #[test]
    fn ristretto_encodings_round_trip(input in any::<Vec<u8>>(), seed in any::<[u8; 32]>()) {
        let x = Ristretto255::hash_to_group(&input);
        prop_assert_eq!(Ristretto255::decode_element(&Ristretto255::encode_element(&x)), Ok(x));
        let s = Ristretto255::hash_to_scalar(&seed);
        prop_assert_eq!(Ristretto255::decode_scalar(&Ristretto255::encode_scalar(&s)), Ok(s));
        let inv = Ristretto255::scalar_invert(&s);
        prop_assert_eq!(Ristretto255::scalar_mult(&inv, &Ristretto255::scalar_mult(&s, &x)), x);
        prop_assert_eq!(Ristretto255::scalar_invert(&inv), s);
    }
}
