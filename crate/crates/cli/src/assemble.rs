//! Turns a [`RunConfig`] into library objects.

use hybrid_risk::augment::{
    build_cumulative_parisian, build_erlang_horizon, build_generalized_omega, build_infinite_horizon, build_omega,
    build_poissonian, AugmentedModel, GeneralizedOmegaParams, Reweighing,
};
use hybrid_risk::matrixkit::{ErlangClock, PhaseType};
use hybrid_risk::model::{linspace, LevelDependentGenerator, RateFn, RiskModelSpec, StatePartition};
use hybrid_risk::models::{self, MarkovModulated};
use hybrid_risk::{Error, Matrix, Result};
use nalgebra::DVector;

use crate::analytic::{LevelFunction, RawFn};
use crate::config::{DividendConfig, ModelConfig, RawGenerator, RawPh, RuinConfig, RunConfig};

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

fn function(raw: &RawFn) -> Result<LevelFunction> {
    LevelFunction::parse(raw).map_err(Error::Usage)
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return bad(format!("{what} must be a non-empty square matrix"));
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn phase_type(raw: &RawPh) -> Result<PhaseType> {
    match raw {
        RawPh::Exponential { rate } => PhaseType::exponential(*rate),
        RawPh::Erlang { stages, rate } => PhaseType::erlang(*stages, *rate),
        RawPh::PhaseType { alpha, t } => {
            let t = matrix(t, "phase-type `t`")?;
            if alpha.len() != t.nrows() {
                return bad("phase-type `alpha` must have one entry per phase");
            }
            PhaseType::new(DVector::from_vec(alpha.clone()), t)
        }
    }
}

fn lipschitz(declared: Option<f64>, fns: &[&LevelFunction]) -> f64 {
    declared.unwrap_or_else(|| fns.iter().map(|f| f.lipschitz()).fold(0.0, f64::max))
}

fn generator(raw: &RawGenerator) -> Result<LevelDependentGenerator> {
    match raw {
        RawGenerator::Constant(rows) => LevelDependentGenerator::constant(matrix(rows, "generator")?),
        RawGenerator::Table { levels, matrices } => {
            if levels.is_empty() || levels.len() != matrices.len() {
                return bad("generator table needs one matrix per level");
            }
            if levels.windows(2).any(|w| !(w[1] > w[0])) {
                return bad("generator table levels must be strictly increasing");
            }
            let ms = matrices.iter().map(|m| matrix(m, "generator")).collect::<Result<Vec<_>>>()?;
            let n = ms[0].nrows();
            if ms.iter().any(|m| m.nrows() != n) {
                return bad("generator table matrices must share one size");
            }
            let bound = ms.iter().map(|m| m.amax()).fold(0.0, f64::max);
            let levels = levels.clone();
            LevelDependentGenerator::new(n, bound, move |x| {
                let k = levels.partition_point(|v| *v <= x);
                if k == 0 {
                    ms[0].clone()
                } else if k == levels.len() {
                    ms[k - 1].clone()
                } else {
                    let w = (x - levels[k - 1]) / (levels[k] - levels[k - 1]);
                    &ms[k - 1] * (1.0 - w) + &ms[k] * w
                }
            })
        }
    }
}

/// The base model with any dividend overlay applied.
pub fn base_model(cfg: &RunConfig) -> Result<RiskModelSpec> {
    let base = match &cfg.model {
        ModelConfig::Brownian { mu, sigma } => models::brownian(*mu, *sigma)?,
        ModelConfig::Deterministic { mu } => models::deterministic(*mu)?,
        ModelConfig::CramerLundberg {
            premium,
            claim_rate,
            claim,
        } => models::cramer_lundberg(*premium, *claim_rate, &phase_type(claim)?)?,
        ModelConfig::MarkovModulated {
            environment,
            premiums,
            volatilities,
            claim_rates,
            claims,
            lipschitz: declared,
        } => {
            let p = premiums.iter().map(function).collect::<Result<Vec<_>>>()?;
            let v = volatilities.iter().map(function).collect::<Result<Vec<_>>>()?;
            let all: Vec<&LevelFunction> = p.iter().chain(&v).collect();
            let lip = lipschitz(*declared, &all);
            models::markov_modulated(&MarkovModulated {
                environment: matrix(environment, "environment")?,
                premiums: p.into_iter().map(LevelFunction::into_fn).collect(),
                volatilities: v.into_iter().map(LevelFunction::into_fn).collect(),
                claim_rates: claim_rates.clone(),
                claims: claims.iter().map(phase_type).collect::<Result<_>>()?,
                lipschitz: lip,
            })?
        }
        ModelConfig::HeavyTailed {
            premium,
            claim_rate,
            claim,
            down_drift,
            lipschitz: declared,
        } => {
            let f = function(down_drift)?;
            let lip = lipschitz(*declared, &[&f]);
            models::heavy_tailed(*premium, *claim_rate, &phase_type(claim)?, f.into_fn(), lip)?
        }
        ModelConfig::Inline {
            states,
            generator: g,
            lipschitz: declared,
        } => {
            let names = states.iter().map(|s| s.name.clone()).collect();
            let classes: Vec<_> = states.iter().map(|s| s.class).collect();
            let partition = StatePartition::from_classes(names, &classes)?;
            let drift = states.iter().map(|s| function(&s.drift)).collect::<Result<Vec<_>>>()?;
            let diffusion = states
                .iter()
                .map(|s| s.diffusion.as_ref().map(function).unwrap_or(Ok(LevelFunction::Constant(0.0))))
                .collect::<Result<Vec<_>>>()?;
            let all: Vec<&LevelFunction> = drift.iter().chain(&diffusion).collect();
            let lip = lipschitz(*declared, &all);
            let g = generator(g)?;
            if g.dim() != states.len() {
                return bad(format!("generator is {0}x{0} but {1} states are declared", g.dim(), states.len()));
            }
            RiskModelSpec::new(partition, move |i, x| drift[i].eval(x), move |i, x| diffusion[i].eval(x), g, lip)?
        }
    };
    match &cfg.dividend {
        None => Ok(base),
        Some(DividendConfig::Refraction { barrier, rate, ramp }) => {
            models::dividend_refraction(&base, *barrier, *rate, *ramp)
        }
        Some(DividendConfig::PoissonObserved { barrier, obs_rate, rate }) => {
            models::dividend_poisson_observed(&base, *barrier, *obs_rate, *rate)
        }
    }
}

/// An ω rate from a level function: non-negative on `[c, 0]`, bounded by its
/// supremum over the domain.
fn omega_rate(raw: &RawFn, c: f64, d: f64) -> Result<RateFn> {
    let f = function(raw)?;
    let lo = c.min(-1.0);
    if let Some(x) = linspace(lo, 0.0, 401).into_iter().find(|x| f.eval(*x) < 0.0) {
        return bad(format!("omega {f} is negative at x = {x}"));
    }
    RateFn::new(f.sup_abs(lo, d), move |_, x| f.eval(x).max(0.0))
}

fn reweighing(rows: &Option<Vec<Vec<f64>>>, n: usize, what: &str) -> Result<Reweighing> {
    match rows {
        None => Ok(Reweighing::zero()),
        Some(rows) => {
            let m = matrix(rows, what)?;
            if m.nrows() != n {
                return bad(format!("{what} must be {n}x{n} (one row per base state)"));
            }
            Reweighing::new(m.amax(), move |i, j, _| m[(i, j)])
        }
    }
}

pub fn augmented(cfg: &RunConfig) -> Result<AugmentedModel> {
    let base = base_model(cfg)?;
    let aug = match &cfg.ruin {
        RuinConfig::Infinite => build_infinite_horizon(&base)?,
        RuinConfig::ErlangHorizon { stages, rate } => build_erlang_horizon(&base, ErlangClock::new(*stages, *rate)?)?,
        RuinConfig::Poissonian { rate } => build_poissonian(&base, *rate)?,
        RuinConfig::Parisian { grace } => build_cumulative_parisian(&base, phase_type(grace)?)?,
        RuinConfig::Omega { omega } => build_omega(&base, omega_rate(omega, cfg.c, cfg.d)?)?,
        RuinConfig::GeneralizedOmega {
            horizon,
            grace,
            omega,
            reweigh_plus,
            reweigh_minus,
        } => {
            let n = base.n_states();
            let params = GeneralizedOmegaParams {
                reweigh_plus: reweighing(reweigh_plus, n, "reweigh_plus")?,
                reweigh_minus: reweighing(reweigh_minus, n, "reweigh_minus")?,
                horizon: horizon.as_ref().map(|h| ErlangClock::new(h.stages, h.rate)).transpose()?,
                grace: grace.as_ref().map(phase_type).transpose()?,
                base_omega: omega.as_ref().map(|f| omega_rate(f, cfg.c, cfg.d)).transpose()?,
                check_levels: linspace(cfg.c.min(-1.0), cfg.d, 401),
            };
            build_generalized_omega(&base, &params)?
        }
    };
    if cfg.q > 0.0 {
        aug.with_discount(cfg.q)
    } else {
        Ok(aug)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use hybrid_risk::model::validate_model;

    fn cfg(model: &str, ruin: &str) -> RunConfig {
        parse_config(&format!("method = \"mc\"\nu = 1.0\nc = -2.0\nd = 5.0\n\n[model]\n{model}\n\n[ruin]\n{ruin}\n"))
            .unwrap()
    }

    const MM: &str = r#"preset = "markov_modulated"
environment = [[-0.5, 0.5], [1.0, -1.0]]
premiums = ["linear(1, 0.1)", "linear(1.5, 0.1)"]
volatilities = [0.5, 0.5]
claim_rates = [1.0, 0.5]
claims = [{ kind = "exponential", rate = 2.0 }, { kind = "exponential", rate = 1.0 }]"#;

    #[test]
    fn every_ruin_type_builds_a_valid_model() {
        for ruin in [
            "type = \"infinite\"",
            "type = \"erlang_horizon\"\nstages = 2\nrate = 1.0",
            "type = \"poissonian\"\nrate = 2.0",
            "type = \"parisian\"\ngrace = { kind = \"erlang\", stages = 2, rate = 3.0 }",
            "type = \"omega\"\nomega = \"linear(0, -0.5)\"",
            "type = \"generalized_omega\"\nhorizon = { stages = 2, rate = 2.0 }\nomega = 1.0\n\
             reweigh_plus = [[0.1, 0, 0, 0], [0, 0.1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]",
        ] {
            let aug = augmented(&cfg(MM, ruin)).unwrap();
            let report = validate_model(&aug.spec, &linspace(-2.0, 5.0, 50)).unwrap();
            assert!(report.passed(), "{ruin}: {:?}", report.violations);
        }
    }

    #[test]
    fn markov_modulated_lipschitz_defaults_to_steepest_slope() {
        let m = base_model(&cfg(MM, "type = \"infinite\"")).unwrap();
        assert_eq!(m.lipschitz_bound(), 0.1);
        assert_eq!(m.drift(1, 2.0), 1.7);
    }

    #[test]
    fn inline_model_matches_preset() {
        let inline = cfg(
            "preset = \"inline\"\ngenerator = [[-1.0, 1.0], [2.0, -2.0]]\nstates = [\n  { name = \"p\", class = \"premium\", drift = 1.0 },\n  { name = \"j\", class = \"down\", drift = -1.0 },\n]",
            "type = \"poissonian\"\nrate = 1.5",
        );
        let preset = cfg(
            "preset = \"cramer_lundberg\"\npremium = 1.0\nclaim_rate = 1.0\nclaim = { kind = \"exponential\", rate = 2.0 }",
            "type = \"poissonian\"\nrate = 1.5",
        );
        let (a, b) = (augmented(&inline).unwrap(), augmented(&preset).unwrap());
        let diff = hybrid_risk::augment::max_structural_difference(&a, &b, &linspace(-2.0, 5.0, 30)).unwrap();
        assert_eq!(diff, 0.0);
    }

    #[test]
    fn negative_omega_is_rejected() {
        let e = augmented(&cfg(MM, "type = \"omega\"\nomega = \"linear(0, 0.5)\"")).unwrap_err();
        assert!(e.to_string().contains("negative"), "{e}");
    }

    #[test]
    fn tabulated_generator_interpolates() {
        let g = generator(&RawGenerator::Table {
            levels: vec![0.0, 2.0],
            matrices: vec![vec![vec![-1.0, 1.0], vec![0.0, 0.0]], vec![vec![-3.0, 3.0], vec![0.0, 0.0]]],
        })
        .unwrap();
        assert_eq!(g.at(1.0).unwrap()[(0, 1)], 2.0);
        assert_eq!(g.at(5.0).unwrap()[(0, 1)], 3.0);
    }
}
