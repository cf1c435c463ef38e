//! Exhaustive and randomized checks of the blinded evaluation.

use std::collections::BTreeMap;

use bison_core::derivation::{
    blind, blind_eval, derive_pseudonym_direct, unblind, verify_blind, AudienceId, Blind, UserId,
};
use bison_core::group::{PrimeGroup, Ristretto255, TestElement, TestGroup};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub cases: u64,
    pub failures: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SoundnessTally {
    pub cases: u64,
    pub false_accepts: u64,
    pub false_rejects: u64,
}

/// One audience string per test-group element, found by scanning
/// `aud-0`, `aud-1`, ... in order.
pub fn test_group_audiences() -> BTreeMap<TestElement, AudienceId<TestGroup>> {
    let mut found = BTreeMap::new();
    for i in 0u32.. {
        let aud = AudienceId::<TestGroup>::derive(format!("aud-{i}").as_bytes());
        found.entry(*aud.element()).or_insert(aud);
        if found.len() == 10 {
            break;
        }
    }
    found
}

/// `unblind(blind_eval(blind(X, r), k), r) == k · X` for every audience
/// element, blind and user secret of the test group.
pub fn correctness_exhaustive() -> Tally {
    let mut tally = Tally {
        cases: 0,
        failures: 0,
    };
    for aud in test_group_audiences().values() {
        for r in TestGroup::scalars().map(Blind::from_scalar) {
            for k in TestGroup::scalars() {
                let user = UserId::<TestGroup>::from_scalar(k);
                let out = unblind(&blind_eval(&blind(aud, &r), &user), &r);
                tally.cases += 1;
                if *out.element() != TestGroup::scalar_mult(&k, aud.element()) {
                    tally.failures += 1;
                }
            }
        }
    }
    tally
}

/// The same identity on ristretto255 with seeded random audiences, blinds
/// and user secrets.
pub fn correctness_randomized(trials: u64, seed: u64) -> Tally {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut tally = Tally {
        cases: 0,
        failures: 0,
    };
    for i in 0..trials {
        let aud = AudienceId::<Ristretto255>::derive(format!("audience-{seed}-{i}").as_bytes());
        let mut user_seed = [0u8; 32];
        rand::RngCore::fill_bytes(&mut rng, &mut user_seed);
        let user = UserId::<Ristretto255>::from_seed(&user_seed);
        let r = Blind::<Ristretto255>::sample(&mut rng).expect("seeded rng");
        let out = unblind(&blind_eval(&blind(&aud, &r), &user), &r);
        tally.cases += 1;
        if out != derive_pseudonym_direct(&user, &aud) {
            tally.failures += 1;
        }
    }
    tally
}

/// `verify_blind(X, r′, r · X)` over all audience elements and all pairs
/// `(r, r′)`: it must accept exactly when `r′ = r`.
pub fn blind_soundness_exhaustive() -> SoundnessTally {
    let mut tally = SoundnessTally {
        cases: 0,
        false_accepts: 0,
        false_rejects: 0,
    };
    for aud in test_group_audiences().values() {
        for r in TestGroup::scalars() {
            let a = blind(aud, &Blind::<TestGroup>::from_scalar(r));
            for claimed in TestGroup::scalars() {
                let accepted = verify_blind(aud, &Blind::from_scalar(claimed), &a);
                tally.cases += 1;
                match (accepted, claimed == r) {
                    (true, false) => tally.false_accepts += 1,
                    (false, true) => tally.false_rejects += 1,
                    _ => {}
                }
            }
        }
    }
    tally
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn audiences_cover_the_group() {
        let found = test_group_audiences();
        assert_eq!(found.len(), 10);
        assert!(TestGroup::elements().all(|e| found.contains_key(&e)));
    }

    #[test]
    fn exhaustive_counts() {
        assert_eq!(
            correctness_exhaustive(),
            Tally {
                cases: 1000,
                failures: 0
            }
        );
        let s = blind_soundness_exhaustive();
        assert_eq!((s.cases, s.false_accepts, s.false_rejects), (1000, 0, 0));
    }

    #[test]
    fn randomized_is_deterministic_per_seed() {
        assert_eq!(
            correctness_randomized(20, 7),
            Tally {
                cases: 20,
                failures: 0
            }
        );
    }
}
