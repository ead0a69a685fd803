//! Randomized sweeps of the dimensional identity suite at desk scale.
//! Each row must match its expectation: identities hold where the
//! dimension admits them, and the negative controls fail elsewhere.

use cetest_core::identities::{identity_suite, random_weyl, WeylSampleConfig};
use cetest_core::Mode;

fn sweep(cfg_for_seed: impl Fn(u64) -> WeylSampleConfig, seeds: std::ops::Range<u64>) {
    for seed in seeds {
        let cfg = cfg_for_seed(seed);
        let w = random_weyl(&cfg).expect("random sample");
        for entry in identity_suite(&w).expect("suite") {
            assert!(
                entry.satisfied(),
                "dim {} seed {seed}: `{}` expected pass = {}, got pass = {} \
                 (worst relative {:.3e})",
                cfg.dimension,
                entry.report.label,
                entry.expected_pass,
                entry.report.pass,
                entry.report.worst_relative(),
            );
        }
    }
}

#[test]
fn exact_suite_holds_with_lorentzian_signature() {
    for dim in 4..=8 {
        sweep(
            |seed| WeylSampleConfig::lorentzian(dim, seed, Mode::Exact),
            100..103,
        );
    }
}

#[test]
fn exact_suite_holds_with_euclidean_signature() {
    for dim in 4..=6 {
        sweep(
            |seed| WeylSampleConfig::euclidean(dim, seed, Mode::Exact),
            200..203,
        );
    }
}

#[test]
fn float_suite_holds_within_tolerance() {
    for dim in 4..=6 {
        sweep(
            |seed| WeylSampleConfig::lorentzian(dim, seed, Mode::Float),
            300..305,
        );
    }
}

#[test]
fn mixed_signature_sample_is_well_formed() {
    // Two minus signs: still a valid pseudo-Riemannian Weyl sample.
    let cfg = WeylSampleConfig::new(5, vec![-1, -1, 1, 1, 1], 7, Mode::Exact);
    let w = random_weyl(&cfg).expect("sample");
    for entry in identity_suite(&w).expect("suite") {
        assert!(entry.satisfied(), "row `{}`", entry.report.label);
    }
}
