//! Distribution of the blinded audience `A = r · H(audience)` on the test
//! group.
//!
//! For a fixed audience, `r ↦ r · H(audience)` is a bijection from the ten
//! nonzero scalars onto the ten non-identity elements, so what the identity
//! provider sees does not depend on the audience.

use std::collections::BTreeMap;

use bison_core::derivation::{blind, AudienceId, Blind};
use bison_core::group::{TestElement, TestGroup};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

/// The two audiences used by the checks; they hash to different elements.
pub const AUDIENCES: [&str; 2] = ["example.com", "other.com"];

/// Upper 0.001 tail point of chi-square with 9 degrees of freedom.
pub const CHI2_9DOF_Q999: f64 = 27.877;

pub const DEFAULT_SEED: u64 = 0x5EED_B150;

pub type Histogram = BTreeMap<TestElement, u64>;

fn empty_histogram() -> Histogram {
    TestGroup::elements().map(|e| (e, 0)).collect()
}

/// One blinding per nonzero scalar.
pub fn exhaustive_histogram(audience: &str) -> Histogram {
    let aud = AudienceId::<TestGroup>::derive(audience.as_bytes());
    let mut hist = empty_histogram();
    for r in TestGroup::scalars() {
        *hist
            .get_mut(&blind(&aud, &Blind::from_scalar(r)))
            .expect("subgroup element") += 1;
    }
    hist
}

/// `trials` blindings with `r` drawn by the agent's sampler from a seeded
/// generator.
pub fn randomized_histogram(audience: &str, trials: u64, seed: u64) -> Histogram {
    let aud = AudienceId::<TestGroup>::derive(audience.as_bytes());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut hist = empty_histogram();
    for _ in 0..trials {
        let r = Blind::<TestGroup>::sample(&mut rng).expect("seeded rng");
        *hist.get_mut(&blind(&aud, &r)).expect("subgroup element") += 1;
    }
    hist
}

/// Pearson statistic of `hist` against the uniform distribution over its
/// bins.
pub fn chi_square(hist: &Histogram) -> f64 {
    let total: u64 = hist.values().sum();
    let expected = total as f64 / hist.len() as f64;
    hist.values()
        .map(|&observed| {
            let d = observed as f64 - expected;
            d * d / expected
        })
        .sum()
}

pub fn is_flat(hist: &Histogram) -> bool {
    let mut counts = hist.values();
    let first = counts.next().copied();
    counts.all(|&c| Some(c) == first)
}

#[derive(Debug, Clone, Serialize)]
pub struct AudienceReport {
    pub audience: String,
    pub exhaustive_flat: bool,
    pub chi_square: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformityReport {
    pub trials: u64,
    pub seed: u64,
    pub critical_value: f64,
    pub audiences: Vec<AudienceReport>,
    /// The two exhaustive histograms agree bin for bin.
    pub identically_distributed: bool,
}

impl UniformityReport {
    pub fn passed(&self) -> bool {
        self.identically_distributed
            && self
                .audiences
                .iter()
                .all(|a| a.exhaustive_flat && a.chi_square < self.critical_value)
    }
}

/// Runs both modes for [`AUDIENCES`].
pub fn run_uniformity_test(trials: u64, seed: u64) -> UniformityReport {
    let exhaustive: Vec<Histogram> = AUDIENCES.iter().map(|a| exhaustive_histogram(a)).collect();
    let audiences = AUDIENCES
        .iter()
        .zip(&exhaustive)
        .enumerate()
        .map(|(i, (aud, hist))| AudienceReport {
            audience: aud.to_string(),
            exhaustive_flat: is_flat(hist) && hist.values().all(|&c| c == 1),
            chi_square: chi_square(&randomized_histogram(
                aud,
                trials,
                seed.wrapping_add(i as u64),
            )),
        })
        .collect();
    UniformityReport {
        trials,
        seed,
        critical_value: CHI2_9DOF_Q999,
        audiences,
        identically_distributed: exhaustive[0] == exhaustive[1],
    }
}
