//! Run configuration: a TOML document parsed into a validated [`RunConfig`].
//! Every schema error carries the line it refers to.

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use hybrid_risk::model::StateClass;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use toml::Spanned;

use crate::analytic::{LevelFunction, RawFn};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError { line: Some(l), message } => write!(f, "line {l}: {message}"),
            ConfigError { line: None, message } => write!(f, "{message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Mc,
    Transient,
    Stationary,
    All,
}

impl MethodChoice {
    pub fn needs_grid(self) -> bool {
        !matches!(self, MethodChoice::Mc)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawPh {
    Exponential { rate: f64 },
    Erlang { stages: usize, rate: f64 },
    PhaseType { alpha: Vec<f64>, t: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawState {
    pub name: String,
    pub class: StateClass,
    pub drift: RawFn,
    pub diffusion: Option<RawFn>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RawGenerator {
    Constant(Vec<Vec<f64>>),
    Table { levels: Vec<f64>, matrices: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Brownian {
        mu: f64,
        sigma: f64,
    },
    Deterministic {
        mu: f64,
    },
    CramerLundberg {
        premium: f64,
        claim_rate: f64,
        claim: RawPh,
    },
    MarkovModulated {
        environment: Vec<Vec<f64>>,
        premiums: Vec<RawFn>,
        volatilities: Vec<RawFn>,
        claim_rates: Vec<f64>,
        claims: Vec<RawPh>,
        lipschitz: Option<f64>,
    },
    HeavyTailed {
        premium: f64,
        claim_rate: f64,
        claim: RawPh,
        down_drift: RawFn,
        lipschitz: Option<f64>,
    },
    Inline {
        states: Vec<RawState>,
        generator: RawGenerator,
        lipschitz: Option<f64>,
    },
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Brownian { .. } => "brownian",
            ModelConfig::Deterministic { .. } => "deterministic",
            ModelConfig::CramerLundberg { .. } => "cramer_lundberg",
            ModelConfig::MarkovModulated { .. } => "markov_modulated",
            ModelConfig::HeavyTailed { .. } => "heavy_tailed",
            ModelConfig::Inline { .. } => "inline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DividendConfig {
    Refraction {
        barrier: f64,
        rate: f64,
        #[serde(default)]
        ramp: f64,
    },
    PoissonObserved {
        barrier: f64,
        obs_rate: f64,
        rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawClock {
    pub stages: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuinConfig {
    Infinite,
    ErlangHorizon {
        stages: usize,
        rate: f64,
    },
    Poissonian {
        rate: f64,
    },
    Parisian {
        grace: RawPh,
    },
    Omega {
        omega: RawFn,
    },
    GeneralizedOmega {
        horizon: Option<RawClock>,
        grace: Option<RawPh>,
        omega: Option<RawFn>,
        reweigh_plus: Option<Vec<Vec<f64>>>,
        reweigh_minus: Option<Vec<Vec<f64>>>,
    },
}

impl RuinConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RuinConfig::Infinite => "infinite",
            RuinConfig::ErlangHorizon { .. } => "erlang_horizon",
            RuinConfig::Poissonian { .. } => "poissonian",
            RuinConfig::Parisian { .. } => "parisian",
            RuinConfig::Omega { .. } => "omega",
            RuinConfig::GeneralizedOmega { .. } => "generalized_omega",
        }
    }
}

fn default_paths() -> usize {
    10_000
}

fn default_step() -> f64 {
    1e-3
}

fn default_ode_step() -> f64 {
    hybrid_risk::simulate::DEFAULT_ODE_STEP
}

fn default_cap() -> f64 {
    hybrid_risk::simulate::DEFAULT_HORIZON_CAP
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_ode_step")]
    pub ode_step: f64,
    #[serde(default = "default_cap")]
    pub horizon_cap: f64,
    /// Histogram bins; defaults to the top-level `bins`, else 100.
    pub bins: Option<usize>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            paths: default_paths(),
            step: default_step(),
            ode_step: default_ode_step(),
            horizon_cap: default_cap(),
            bins: None,
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir() }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    method: Option<Spanned<MethodChoice>>,
    u: Spanned<f64>,
    #[serde(default)]
    i0: usize,
    c: Spanned<f64>,
    d: Spanned<f64>,
    bins: Option<Spanned<usize>>,
    eps: Option<Spanned<f64>>,
    #[serde(default)]
    q: f64,
    cells: Option<Spanned<usize>>,
    #[serde(default)]
    bands: Vec<Spanned<(f64, f64)>>,
    #[serde(default)]
    seed: u64,
    model: Spanned<toml::Value>,
    dividend: Option<Spanned<toml::Value>>,
    ruin: Option<Spanned<toml::Value>>,
    mc: Option<Spanned<toml::Value>>,
    output: Option<Spanned<toml::Value>>,
}

/// A validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: MethodChoice,
    pub u: f64,
    pub i0: usize,
    pub c: f64,
    pub d: f64,
    pub bins: Option<usize>,
    pub eps: Option<f64>,
    pub q: f64,
    pub cells: usize,
    pub bands: Vec<(f64, f64)>,
    pub seed: u64,
    pub model: ModelConfig,
    pub dividend: Option<DividendConfig>,
    pub ruin: RuinConfig,
    pub mc: McConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn solver_bins(&self) -> Option<usize> {
        self.bins
    }

    pub fn mc_bins(&self) -> usize {
        self.mc.bins.or(self.bins).unwrap_or(100)
    }

    /// Smoothing width: as configured, else one bin of the given grid.
    pub fn eps_for(&self, bins: usize) -> f64 {
        self.eps.unwrap_or_else(|| hybrid_risk::grid::default_eps(self.c, self.d, bins))
    }
}

struct Source<'a>(&'a str);

impl Source<'_> {
    fn line(&self, span: &Range<usize>) -> usize {
        self.0[..span.start.min(self.0.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, span: &Range<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError {
            line: Some(self.line(span)),
            message: message.into(),
        })
    }

    fn table<T: DeserializeOwned>(&self, name: &str, v: Spanned<toml::Value>) -> Result<T, ConfigError> {
        let span = v.span();
        v.into_inner().try_into().map_err(|e: toml::de::Error| ConfigError {
            line: Some(self.line(&span)),
            message: format!("in [{name}]: {}", e.message().trim()),
        })
    }
}

pub fn parse_config(src: &str) -> Result<RunConfig, ConfigError> {
    let s = Source(src);
    let raw: RawConfig = toml::from_str(src).map_err(|e| ConfigError {
        line: e.span().map(|r| s.line(&r)),
        message: e.message().trim().to_string(),
    })?;
    let Some(method) = raw.method else {
        return Err(ConfigError {
            line: Some(1),
            message: "missing key `method` (one of mc, transient, stationary, all)".into(),
        });
    };
    let (c, d, u) = (*raw.c.get_ref(), *raw.d.get_ref(), *raw.u.get_ref());
    if !(c.is_finite() && c <= 0.0) {
        return s.err(&raw.c.span(), format!("`c` must be finite and <= 0, got {c}"));
    }
    if !(d.is_finite() && d > 0.0) {
        return s.err(&raw.d.span(), format!("`d` must be finite and > 0, got {d}"));
    }
    if !(u >= c && u < d) {
        return s.err(&raw.u.span(), format!("`u` = {u} must lie in [c, d) = [{c}, {d})"));
    }
    if method.get_ref().needs_grid() && raw.bins.is_none() {
        return s.err(
            &method.span(),
            format!("method `{}` requires the key `bins`", method_name(*method.get_ref())),
        );
    }
    if let Some(b) = &raw.bins {
        if *b.get_ref() < 2 {
            return s.err(&b.span(), "`bins` must be at least 2");
        }
    }
    if let Some(e) = &raw.eps {
        if !(*e.get_ref() >= 0.0) {
            return s.err(&e.span(), "`eps` must be >= 0");
        }
    }
    if !(raw.q >= 0.0) {
        return Err(ConfigError {
            line: None,
            message: "`q` must be >= 0".into(),
        });
    }
    let cells = match &raw.cells {
        Some(v) if *v.get_ref() == 0 => return s.err(&v.span(), "`cells` must be at least 1"),
        Some(v) => *v.get_ref(),
        None => hybrid_risk::solver::DEFAULT_CELLS_PER_BIN,
    };
    for b in &raw.bands {
        let (lo, hi) = *b.get_ref();
        if !(lo < hi && lo >= c && hi <= d) {
            return s.err(&b.span(), format!("band ({lo}, {hi}) must satisfy c <= lo < hi <= d"));
        }
    }

    let model_span = raw.model.span();
    let model: ModelConfig = s.table("model", raw.model)?;
    check_model(&model).or_else(|m| s.err(&model_span, format!("in [model]: {m}")))?;
    let dividend = raw.dividend.map(|v| s.table("dividend", v)).transpose()?;
    let ruin = match raw.ruin {
        Some(v) => {
            let span = v.span();
            let r: RuinConfig = s.table("ruin", v)?;
            check_ruin(&r).or_else(|m| s.err(&span, format!("in [ruin]: {m}")))?;
            r
        }
        None => RuinConfig::Infinite,
    };
    let mc = match raw.mc {
        Some(v) => {
            let span = v.span();
            let m: McConfig = s.table("mc", v)?;
            if m.paths == 0 || !(m.step > 0.0) || !(m.ode_step > 0.0) || !(m.horizon_cap > 0.0) {
                return s.err(&span, "in [mc]: paths, step, ode_step and horizon_cap must be positive");
            }
            m
        }
        None => McConfig::default(),
    };
    let output = raw.output.map(|v| s.table("output", v)).transpose()?.unwrap_or_default();

    Ok(RunConfig {
        method: *method.get_ref(),
        u,
        i0: raw.i0,
        c,
        d,
        bins: raw.bins.map(|b| *b.get_ref()),
        eps: raw.eps.map(|e| *e.get_ref()),
        q: raw.q,
        cells,
        bands: raw.bands.iter().map(|b| *b.get_ref()).collect(),
        seed: raw.seed,
        model,
        dividend,
        ruin,
        mc,
        output,
    })
}

pub fn method_name(m: MethodChoice) -> &'static str {
    match m {
        MethodChoice::Mc => "mc",
        MethodChoice::Transient => "transient",
        MethodChoice::Stationary => "stationary",
        MethodChoice::All => "all",
    }
}

fn check_fn(raw: &RawFn, what: &str) -> Result<(), String> {
    LevelFunction::parse(raw).map(|_| ()).map_err(|e| format!("{what}: {e}"))
}

fn check_model(m: &ModelConfig) -> Result<(), String> {
    match m {
        ModelConfig::MarkovModulated { premiums, volatilities, .. } => {
            for (k, f) in premiums.iter().enumerate() {
                check_fn(f, &format!("premiums[{k}]"))?;
            }
            for (k, f) in volatilities.iter().enumerate() {
                check_fn(f, &format!("volatilities[{k}]"))?;
            }
            Ok(())
        }
        ModelConfig::HeavyTailed { down_drift, .. } => check_fn(down_drift, "down_drift"),
        ModelConfig::Inline { states, .. } => {
            for st in states {
                check_fn(&st.drift, &format!("state `{}` drift", st.name))?;
                if let Some(f) = &st.diffusion {
                    check_fn(f, &format!("state `{}` diffusion", st.name))?;
                }
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn check_ruin(r: &RuinConfig) -> Result<(), String> {
    match r {
        RuinConfig::Omega { omega } => check_fn(omega, "omega"),
        RuinConfig::GeneralizedOmega { omega: Some(f), .. } => check_fn(f, "omega"),
        _ => Ok(()),
    }
}
