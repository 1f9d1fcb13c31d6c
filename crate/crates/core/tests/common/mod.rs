#![allow(dead_code)]

use std::sync::Arc;

use hybrid_risk::augment::{
    build_cumulative_parisian, build_erlang_horizon, build_generalized_omega, build_infinite_horizon, build_omega,
    build_poissonian, AugmentedModel, GeneralizedOmegaParams, Reweighing,
};
use hybrid_risk::jumps::pareto_drift;
use hybrid_risk::matrixkit::{ErlangClock, PhaseType};
use hybrid_risk::model::{RateFn, RiskModelSpec};
use hybrid_risk::models::{
    brownian, cramer_lundberg, deterministic, dividend_poisson_observed, dividend_refraction, heavy_tailed,
    markov_modulated, MarkovModulated,
};
use hybrid_risk::Matrix;
use nalgebra::DVector;

/// Two environment states, premium `c_j + kappa x`, volatility 0.5 and
/// exponential claims.
pub fn two_env(kappa: f64) -> MarkovModulated {
    MarkovModulated {
        environment: Matrix::from_row_slice(2, 2, &[-0.5, 0.5, 1.0, -1.0]),
        premiums: vec![Arc::new(move |x: f64| 1.0 + kappa * x), Arc::new(move |x: f64| 1.5 + kappa * x)],
        volatilities: vec![Arc::new(|_| 0.5), Arc::new(|_| 0.5)],
        claim_rates: vec![1.0, 0.5],
        claims: vec![PhaseType::exponential(2.0).unwrap(), PhaseType::exponential(1.0).unwrap()],
        lipschitz: kappa.abs(),
    }
}

pub fn two_phase_claim() -> PhaseType {
    PhaseType::new(
        DVector::from_vec(vec![0.3, 0.7]),
        Matrix::from_row_slice(2, 2, &[-3.0, 1.0, 0.5, -1.5]),
    )
    .unwrap()
}

pub fn presets() -> Vec<(&'static str, RiskModelSpec)> {
    let cl = cramer_lundberg(1.0, 1.0, &PhaseType::exponential(2.0).unwrap()).unwrap();
    vec![
        ("brownian", brownian(0.2, 1.0).unwrap()),
        ("deterministic", deterministic(-0.5).unwrap()),
        ("cramer_lundberg", cl.clone()),
        ("markov_modulated", markov_modulated(&two_env(0.1)).unwrap()),
        ("dividend_refraction", dividend_refraction(&cl, 2.0, 0.3, 0.5).unwrap()),
        ("dividend_poisson", dividend_poisson_observed(&cl, 2.0, 3.0, 0.3).unwrap()),
        (
            "heavy_tailed",
            heavy_tailed(1.0, 0.5, &PhaseType::erlang(2, 2.0).unwrap(), pareto_drift(1.0, 0.1).unwrap(), 0.1).unwrap(),
        ),
    ]
}

/// `0.5 |x|` bankruptcy rate below zero, bounded on `[-bound_at, 0]`.
pub fn half_abs(bound_at: f64) -> RateFn {
    RateFn::new(0.5 * bound_at, |_, x: f64| 0.5 * x.abs()).unwrap()
}

pub fn gomega_params(model: &RiskModelSpec, c: f64) -> GeneralizedOmegaParams {
    let p = model.partition().clone();
    let prem: Vec<bool> = (0..p.len()).map(|i| p.is_premium(i)).collect();
    let pm = prem.clone();
    GeneralizedOmegaParams {
        reweigh_plus: Reweighing::new(0.1, move |i, j, _| if i == j && prem[i] { 0.1 } else { 0.0 }).unwrap(),
        reweigh_minus: Reweighing::new(0.3, move |i, j, _| if i == j && pm[i] { 0.3 } else { 0.0 }).unwrap(),
        horizon: Some(ErlangClock::new(2, 2.0).unwrap()),
        grace: Some(ErlangClock::new(2, 2.0).unwrap().phase_type()),
        base_omega: Some(half_abs(c.abs().max(1.0))),
        ..Default::default()
    }
}

/// Every ruin construction on `model`, for domains reaching down to `c`.
pub fn ruin_types(model: &RiskModelSpec, c: f64) -> Vec<(&'static str, AugmentedModel)> {
    vec![
        ("infinite", build_infinite_horizon(model).unwrap()),
        ("erlang", build_erlang_horizon(model, ErlangClock::new(2, 1.0).unwrap()).unwrap()),
        ("poisson", build_poissonian(model, 2.0).unwrap()),
        ("parisian", build_cumulative_parisian(model, PhaseType::erlang(2, 3.0).unwrap()).unwrap()),
        ("omega", build_omega(model, half_abs(c.abs().max(1.0))).unwrap()),
        ("gomega", build_generalized_omega(model, &gomega_params(model, c)).unwrap()),
    ]
}

/// The concordance model: two environments, premium `c_j + 0.1x`, Erlang(2)
/// horizon and grace, `ω = 0.5|x|` below zero.
pub fn concordance_model(c: f64) -> AugmentedModel {
    let model = markov_modulated(&two_env(0.1)).unwrap();
    let params = GeneralizedOmegaParams {
        horizon: Some(ErlangClock::new(2, 2.0).unwrap()),
        grace: Some(ErlangClock::new(2, 2.0).unwrap().phase_type()),
        base_omega: Some(half_abs(c.abs().max(1.0))),
        ..Default::default()
    };
    build_generalized_omega(&model, &params).unwrap()
}

/// Kolmogorov–Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}
