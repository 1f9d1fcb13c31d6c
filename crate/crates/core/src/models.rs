//! Preset risk models expressed as hybrid SDEs.
//!
//! Claims are "straightened out": a claim of phase-type size is a sojourn in
//! down-jump states drifting at unit speed, so the claim size equals the
//! sojourn time.

use std::sync::Arc;

use crate::error::{usage, Result};
use crate::matrixkit::PhaseType;
use crate::model::{LevelDependentGenerator, Matrix, RiskModelSpec, StateClass, StatePartition};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// A single premium state with constant drift `mu` and volatility `sigma`, no
/// switching. Handy for closed-form checks.
pub fn brownian(mu: f64, sigma: f64) -> Result<RiskModelSpec> {
    if sigma < 0.0 {
        return usage("volatility must be >= 0");
    }
    let p = StatePartition::new(vec!["premium".into()], vec![0], vec![], vec![])?;
    let g = LevelDependentGenerator::constant(Matrix::zeros(1, 1))?;
    RiskModelSpec::new(p, move |_, _| mu, move |_, _| sigma, g, 0.0)
}

/// Deterministic drift `mu` in a single premium state.
pub fn deterministic(mu: f64) -> Result<RiskModelSpec> {
    brownian(mu, 0.0)
}

/// Cramér–Lundberg: premium rate `premium`, Poisson(`claim_rate`) arrivals,
/// phase-type claims. State 0 collects premiums; states `1..=m` are the claim
/// phases, drifting at `-1`.
pub fn cramer_lundberg(premium: f64, claim_rate: f64, claim: &PhaseType) -> Result<RiskModelSpec> {
    if !(claim_rate >= 0.0) {
        return usage("claim rate must be >= 0");
    }
    let m = claim.order();
    let n = m + 1;
    let mut names = vec!["premium".to_string()];
    names.extend((1..=m).map(|k| format!("claim_{k}")));
    let p = StatePartition::new(names, vec![0], vec![], (1..n).collect())?;
    let mut g = Matrix::zeros(n, n);
    let alpha = claim.alpha();
    for k in 0..m {
        g[(0, k + 1)] = claim_rate * alpha[k];
        g[(k + 1, 0)] = claim.exit()[k];
        for l in 0..m {
            g[(k + 1, l + 1)] = claim.t_mat()[(k, l)];
        }
    }
    g[(0, 0)] = -claim_rate * alpha.sum();
    let gen = LevelDependentGenerator::constant(g)?;
    RiskModelSpec::new(p, move |i, _| if i == 0 { premium } else { -1.0 }, |_, _| 0.0, gen, 0.0)
}

/// Parameters of a Markov-modulated model with level-dependent premiums and
/// volatilities.
#[derive(Clone)]
pub struct MarkovModulated {
    /// Conservative generator of the economic environment.
    pub environment: Matrix,
    pub premiums: Vec<ScalarFn>,
    pub volatilities: Vec<ScalarFn>,
    pub claim_rates: Vec<f64>,
    pub claims: Vec<PhaseType>,
    /// Lipschitz constant shared by all premium and volatility functions.
    pub lipschitz: f64,
}

/// Markov-modulated risk process: environment states are the premium states,
/// and each environment state `j` owns its own claim phases. A claim started
/// in `j` returns the environment to `j`.
pub fn markov_modulated(params: &MarkovModulated) -> Result<RiskModelSpec> {
    let k = params.environment.nrows();
    if k == 0 || !params.environment.is_square() {
        return usage("environment generator must be square and non-empty");
    }
    for (len, what) in [
        (params.premiums.len(), "premiums"),
        (params.volatilities.len(), "volatilities"),
        (params.claim_rates.len(), "claim_rates"),
        (params.claims.len(), "claims"),
    ] {
        if len != k {
            return usage(format!("{what} needs one entry per environment state ({k}), got {len}"));
        }
    }
    let mut offsets = Vec::with_capacity(k);
    let mut n = k;
    for c in &params.claims {
        offsets.push(n);
        n += c.order();
    }
    let mut names: Vec<String> = (0..k).map(|j| format!("env_{j}")).collect();
    let mut classes = vec![StateClass::Premium; k];
    for (j, c) in params.claims.iter().enumerate() {
        for ph in 0..c.order() {
            names.push(format!("claim_{j}_{}", ph + 1));
            classes.push(StateClass::Down);
        }
    }
    let partition = StatePartition::from_classes(names, &classes)?;

    let mut g = Matrix::zeros(n, n);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                g[(i, j)] = params.environment[(i, j)];
            }
        }
    }
    for (j, c) in params.claims.iter().enumerate() {
        let off = offsets[j];
        let beta = params.claim_rates[j];
        for a in 0..c.order() {
            g[(j, off + a)] = beta * c.alpha()[a];
            g[(off + a, j)] = c.exit()[a];
            for b in 0..c.order() {
                g[(off + a, off + b)] = c.t_mat()[(a, b)];
            }
        }
    }
    for i in 0..k {
        let row: f64 = (0..n).filter(|&j| j != i).map(|j| g[(i, j)]).sum();
        g[(i, i)] = -row;
    }
    let gen = LevelDependentGenerator::constant(g)?;
    let premiums = params.premiums.clone();
    let vols = params.volatilities.clone();
    RiskModelSpec::new(
        partition,
        move |i, x| if i < k { premiums[i](x) } else { -1.0 },
        move |i, x| if i < k { vols[i](x) } else { 0.0 },
        gen,
        params.lipschitz,
    )
}

/// Refraction dividends: above the barrier `b` the premium states pay
/// dividends at rate `delta`. With `ramp > 0` the drift reduction is phased in
/// linearly over `(b - ramp/2, b + ramp/2)`, which keeps the drift Lipschitz;
/// with `ramp = 0` the step is sharp and no Lipschitz constant is claimed.
pub fn dividend_refraction(base: &RiskModelSpec, b: f64, delta: f64, ramp: f64) -> Result<RiskModelSpec> {
    if delta < 0.0 || ramp < 0.0 {
        return usage("dividend rate and ramp width must be >= 0");
    }
    let partition = base.partition().clone();
    let prem: Arc<Vec<bool>> = Arc::new((0..partition.len()).map(|i| partition.is_premium(i)).collect());
    let drift = base.drift_fn().clone();
    let weight = move |x: f64| {
        if ramp == 0.0 {
            if x > b {
                1.0
            } else {
                0.0
            }
        } else {
            ((x - b) / ramp + 0.5).clamp(0.0, 1.0)
        }
    };
    let lip = if delta == 0.0 {
        base.lipschitz_bound()
    } else if ramp > 0.0 {
        base.lipschitz_bound() + delta / ramp
    } else {
        f64::INFINITY
    };
    RiskModelSpec::from_parts(
        partition,
        Arc::new(move |i, x| {
            let mu = drift(i, x);
            if prem[i] {
                mu - delta * weight(x)
            } else {
                mu
            }
        }),
        base.diffusion_fn().clone(),
        base.generator().clone(),
        lip,
    )
}

/// Dividends decided at Poisson(`obs_rate`) observation epochs: an observer
/// finding the surplus above `b` switches payments on (rate `delta`), one
/// finding it at or below `b` switches them off.
///
/// Every base state `i` is doubled into `(i, 0)` (not paying) and `(i, 1)`
/// (paying), ordered base-state-major. Jump states are doubled as well so a
/// claim or injection returns to the mode it started from; only premium
/// states switch mode.
pub fn dividend_poisson_observed(base: &RiskModelSpec, b: f64, obs_rate: f64, delta: f64) -> Result<RiskModelSpec> {
    if obs_rate < 0.0 || delta < 0.0 {
        return usage("observation rate and dividend rate must be >= 0");
    }
    let bp = base.partition();
    let n = bp.len();
    let mut names = Vec::with_capacity(2 * n);
    let mut classes = Vec::with_capacity(2 * n);
    for i in 0..n {
        for mode in 0..2 {
            names.push(format!("{}[div={mode}]", bp.name(i)));
            classes.push(bp.class_of(i));
        }
    }
    let partition = StatePartition::from_classes(names, &classes)?;
    let prem: Arc<Vec<bool>> = Arc::new((0..n).map(|i| bp.is_premium(i)).collect());
    let base_gen = base.generator().clone();
    let prem_g = prem.clone();
    let gen = LevelDependentGenerator::sided(2 * n, base_gen.bound() + obs_rate, move |x, side| {
        let lam = base_gen.at_side(x, side).unwrap_or_else(|_| Matrix::from_element(n, n, f64::NAN));
        let mut g = Matrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                for mode in 0..2 {
                    g[(2 * i + mode, 2 * j + mode)] = lam[(i, j)];
                }
            }
            if prem_g[i] {
                let (on, off) = if x > b { (obs_rate, 0.0) } else { (0.0, obs_rate) };
                g[(2 * i, 2 * i + 1)] += on;
                g[(2 * i, 2 * i)] -= on;
                g[(2 * i + 1, 2 * i)] += off;
                g[(2 * i + 1, 2 * i + 1)] -= off;
            }
        }
        g
    })?;
    let drift = base.drift_fn().clone();
    let diffusion = base.diffusion_fn().clone();
    RiskModelSpec::new(
        partition,
        move |s, x| {
            let (i, mode) = (s / 2, s % 2);
            let mu = drift(i, x);
            if prem[i] && mode == 1 {
                mu - delta
            } else {
                mu
            }
        },
        move |s, x| diffusion(s / 2, x),
        gen,
        base.lipschitz_bound(),
    )
}

/// A single premium state with Poisson claims whose accumulation drift is the
/// level-dependent `down_drift(u)` in every claim phase. Sojourn intensities
/// are the constant `PH(alpha, T)` generator, so jump sizes follow an
/// inhomogeneous phase-type law with rate `1/|down_drift(x - y)|`.
pub fn heavy_tailed(
    premium: f64,
    claim_rate: f64,
    claim_phases: &PhaseType,
    down_drift: ScalarFn,
    lipschitz: f64,
) -> Result<RiskModelSpec> {
    let cl = cramer_lundberg(premium, claim_rate, claim_phases)?;
    let g = cl.generator().clone();
    let bound = max_abs(&g.at(0.0)?);
    let gen = LevelDependentGenerator::new(g.dim(), bound, move |x| g.at(x).expect("constant generator"))?;
    RiskModelSpec::new(
        cl.partition().clone(),
        move |i, x| if i == 0 { premium } else { down_drift(x) },
        |_, _| 0.0,
        gen,
        lipschitz,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{linspace, validate_model};

    fn grid() -> Vec<f64> {
        linspace(-10.0, 10.0, 81)
    }

    #[test]
    fn cramer_lundberg_structure() {
        let m = cramer_lundberg(1.0, 1.0, &PhaseType::exponential(2.0).unwrap()).unwrap();
        assert_eq!(m.n_states(), 2);
        let g = m.generator().at(0.0).unwrap();
        assert_eq!(g, Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]));
        assert_eq!(g, m.generator().at(5.0).unwrap());
        // net profit condition λ/(cβ) = 0.5 < 1
        assert!(1.0 / (1.0 * 2.0) < 1.0);
        assert!(validate_model(&m, &grid()).unwrap().passed());
    }

    fn two_env(kappa: f64) -> MarkovModulated {
        MarkovModulated {
            environment: Matrix::from_row_slice(2, 2, &[-0.5, 0.5, 1.0, -1.0]),
            premiums: vec![Arc::new(move |x| 1.0 + kappa * x), Arc::new(move |x| 1.5 + kappa * x)],
            volatilities: vec![Arc::new(|_| 0.5), Arc::new(|_| 0.5)],
            claim_rates: vec![1.0, 0.5],
            claims: vec![PhaseType::exponential(2.0).unwrap(), PhaseType::erlang(2, 3.0).unwrap()],
            lipschitz: kappa,
        }
    }

    #[test]
    fn markov_modulated_structure() {
        let m = markov_modulated(&two_env(0.1)).unwrap();
        assert_eq!(m.n_states(), 5);
        assert_eq!(m.partition().premium(), &[0, 1]);
        assert_eq!(m.partition().down(), &[2, 3, 4]);
        let g = m.generator().at(0.0).unwrap();
        // claim of type 1 returns to env 1
        assert_eq!(g[(4, 1)], 3.0);
        assert_eq!(g[(4, 0)], 0.0);
        assert_eq!(g[(1, 3)], 0.5);
        for i in 0..5 {
            assert!(g.row(i).sum().abs() < 1e-12);
        }
        assert!(validate_model(&m, &grid()).unwrap().passed());
    }

    #[test]
    fn single_env_reduces_to_cramer_lundberg() {
        let exp2 = PhaseType::exponential(2.0).unwrap();
        let mm = markov_modulated(&MarkovModulated {
            environment: Matrix::zeros(1, 1),
            premiums: vec![Arc::new(|_| 1.0)],
            volatilities: vec![Arc::new(|_| 0.0)],
            claim_rates: vec![1.0],
            claims: vec![exp2.clone()],
            lipschitz: 0.0,
        })
        .unwrap();
        let cl = cramer_lundberg(1.0, 1.0, &exp2).unwrap();
        assert_eq!(mm.generator().at(1.0).unwrap(), cl.generator().at(1.0).unwrap());
        for i in 0..2 {
            assert_eq!(mm.drift(i, 3.0), cl.drift(i, 3.0));
        }
    }

    #[test]
    fn refraction_reduces_drift_above_barrier() {
        let cl = cramer_lundberg(1.0, 1.0, &PhaseType::exponential(2.0).unwrap()).unwrap();
        let same = dividend_refraction(&cl, 2.0, 0.0, 0.0).unwrap();
        assert_eq!(same.drift(0, 5.0), 1.0);
        let r = dividend_refraction(&cl, 2.0, 0.3, 0.0).unwrap();
        assert!((r.drift(0, 3.0) - 0.7).abs() < 1e-15);
        assert_eq!(r.drift(0, 1.0), 1.0);
        assert_eq!(r.drift(1, 3.0), -1.0);
        let smooth = dividend_refraction(&cl, 2.0, 0.3, 0.1).unwrap();
        assert!(validate_model(&smooth, &grid()).unwrap().passed());
    }

    #[test]
    fn poisson_observed_dividends() {
        let cl = cramer_lundberg(1.0, 1.0, &PhaseType::exponential(2.0).unwrap()).unwrap();
        let d = dividend_poisson_observed(&cl, 2.0, 5.0, 0.4).unwrap();
        assert_eq!(d.n_states(), 4);
        let g = d.generator().at(2.1).unwrap();
        assert_eq!(g[(0, 1)], 5.0);
        assert_eq!(g[(1, 0)], 0.0);
        let g = d.generator().at(1.0).unwrap();
        assert_eq!(g[(1, 0)], 5.0);
        assert_eq!(g[(0, 1)], 0.0);
        assert!((d.drift(1, 0.0) - 0.6).abs() < 1e-15);
        assert_eq!(d.drift(0, 0.0), 1.0);
        assert!(validate_model(&d, &grid()).unwrap().passed());

        let frozen = dividend_poisson_observed(&cl, 2.0, 0.0, 0.4).unwrap();
        let g = frozen.generator().at(3.0).unwrap();
        assert_eq!(g[(0, 1)], 0.0);
        assert_eq!(g[(0, 2)], 1.0);
    }
}
