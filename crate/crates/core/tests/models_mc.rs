mod common;

use hybrid_risk::augment::build_infinite_horizon;
use hybrid_risk::matrixkit::PhaseType;
use hybrid_risk::model::RiskModelSpec;
use hybrid_risk::models::{cramer_lundberg, dividend_poisson_observed, dividend_refraction, markov_modulated};
use hybrid_risk::simulate::{estimate_descriptors, McOptions, PathOptions};

use common::two_env;

/// Ruin probability and its standard error on `[0, d]`.
fn psi(model: &RiskModelSpec, d: f64, u: f64, paths: usize, seed: u64) -> (f64, f64) {
    let aug = build_infinite_horizon(model).unwrap();
    let opts = McOptions::new(PathOptions::new(0.0, d, 1e-3), paths, seed, 20).unwrap();
    let ds = estimate_descriptors(&aug, u, 0, &opts).unwrap();
    (ds.summary().psi_lower, ds.summary_std_errors().unwrap().psi_lower)
}

fn not_above(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 + 3.0 * a.1.hypot(b.1)
}

fn cl() -> RiskModelSpec {
    cramer_lundberg(1.0, 1.0, &PhaseType::exponential(2.0).unwrap()).unwrap()
}

#[test]
fn ruin_decreases_with_interest_premium() {
    let runs: Vec<(f64, f64)> = [0.0, 0.1, 0.3]
        .iter()
        .map(|&k| psi(&markov_modulated(&two_env(k)).unwrap(), 10.0, 1.0, 10_000, 3))
        .collect();
    for w in runs.windows(2) {
        assert!(not_above(w[1], w[0]), "{runs:?}");
    }
    assert!(runs[2].0 < runs[0].0, "{runs:?}");
}

#[test]
fn ruin_does_not_decrease_with_dividend_rate() {
    let runs: Vec<(f64, f64)> = [0.0, 0.2, 0.4]
        .iter()
        .map(|&delta| psi(&dividend_refraction(&cl(), 2.0, delta, 0.0).unwrap(), 10.0, 1.0, 10_000, 5))
        .collect();
    for w in runs.windows(2) {
        assert!(not_above(w[0], w[1]), "{runs:?}");
    }
    assert!(runs[2].0 > runs[0].0, "{runs:?}");
}

#[test]
fn frequent_observation_approaches_refraction() {
    let refraction = psi(&dividend_refraction(&cl(), 2.0, 0.3, 0.0).unwrap(), 8.0, 1.0, 5_000, 9);
    let observed = psi(&dividend_poisson_observed(&cl(), 2.0, 1e3, 0.3).unwrap(), 8.0, 1.0, 5_000, 9);
    let z = (observed.0 - refraction.0) / refraction.1.hypot(observed.1);
    assert!(z.abs() <= 3.0, "refraction {refraction:?} observed {observed:?} z={z}");
}
