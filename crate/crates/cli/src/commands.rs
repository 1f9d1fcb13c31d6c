//! The work behind each subcommand.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hybrid_risk::augment::AugmentedModel;
use hybrid_risk::grid::discretize;
use hybrid_risk::jumps::{jump_density_auto, JumpDirection};
use hybrid_risk::model::{linspace, validate_model, ValidationReport};
use hybrid_risk::simulate::{estimate_descriptors, simulate_path, McOptions, PathOptions};
use hybrid_risk::solver::{build_level_chain_with, solve_transient, solve_via_stationary, DescriptorSet};

use crate::assemble::{augmented, base_model};
use crate::config::{parse_config, ConfigError, MethodChoice, RunConfig};
use crate::output::{num, write_comparison, write_method, RunProvenance};

/// A schema violation in a config file.
#[derive(Debug)]
pub struct SchemaError {
    pub path: PathBuf,
    pub error: ConfigError,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.error.line {
            Some(l) => write!(f, "{}:{l}: {}", self.path.display(), self.error.message),
            None => write!(f, "{}: {}", self.path.display(), self.error.message),
        }
    }
}

impl std::error::Error for SchemaError {}

pub fn load(path: &Path) -> Result<RunConfig> {
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&src).map_err(|error| {
        SchemaError {
            path: path.to_path_buf(),
            error,
        }
        .into()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Transient,
    Stationary,
}

pub fn solve(cfg: &RunConfig, aug: &AugmentedModel, backend: Backend) -> Result<DescriptorSet> {
    let bins = cfg.solver_bins().context("the solver needs `bins`")?;
    let grid = discretize(aug, cfg.c, cfg.d, bins, cfg.eps_for(bins))?;
    let chain = build_level_chain_with(&grid, cfg.cells)?;
    let ds = match backend {
        Backend::Transient => solve_transient(&chain, cfg.u, cfg.i0, &cfg.bands)?,
        Backend::Stationary => solve_via_stationary(&chain, cfg.u, cfg.i0, &cfg.bands)?,
    };
    Ok(ds)
}

fn path_options(cfg: &RunConfig) -> PathOptions {
    let mut p = PathOptions::new(cfg.c, cfg.d, cfg.mc.step);
    p.ode_step = cfg.mc.ode_step;
    p.horizon_cap = cfg.mc.horizon_cap;
    p
}

pub fn simulate(cfg: &RunConfig, aug: &AugmentedModel) -> Result<DescriptorSet> {
    let mut opts = McOptions::new(path_options(cfg), cfg.mc.paths, cfg.seed, cfg.mc_bins())?;
    opts.bands = cfg.bands.clone();
    Ok(estimate_descriptors(aug, cfg.u, cfg.i0, &opts)?)
}

/// Files written and descriptor sets computed by a run.
pub struct Artifacts {
    pub results: Vec<DescriptorSet>,
    pub files: Vec<PathBuf>,
}

/// Runs every method the config asks for and writes the result files.
pub fn run(cfg: &RunConfig, config_path: &Path) -> Result<Artifacts> {
    let aug = augmented(cfg)?;
    let prov = RunProvenance::new(cfg, config_path);
    let results = match cfg.method {
        MethodChoice::Transient => vec![solve(cfg, &aug, Backend::Transient)?],
        MethodChoice::Stationary => vec![solve(cfg, &aug, Backend::Stationary)?],
        MethodChoice::Mc => vec![simulate(cfg, &aug)?],
        MethodChoice::All => vec![
            solve(cfg, &aug, Backend::Transient)?,
            solve(cfg, &aug, Backend::Stationary)?,
            simulate(cfg, &aug)?,
        ],
    };
    for ds in &results {
        for w in &ds.warnings {
            log::warn!("{}: {w}", ds.provenance.method.name());
        }
    }
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    for ds in &results {
        files.extend(write_method(dir, &prov, ds)?);
    }
    if let [t, s, m] = results.as_slice() {
        files.push(write_comparison(dir, &prov, [t, s, m])?);
    }
    Ok(Artifacts { results, files })
}

/// Structural checks of the base and augmented models over the domain.
pub fn validate(cfg: &RunConfig) -> Result<(ValidationReport, ValidationReport)> {
    let levels = linspace(cfg.c, cfg.d, 201);
    let base = validate_model(&base_model(cfg)?, &levels)?;
    let aug = validate_model(&augmented(cfg)?.spec, &levels)?;
    Ok((base, aug))
}

/// Jump-size intensity density `(y, density)` from `level` in base state
/// `state`, summed over landing states.
pub fn jump_density(
    cfg: &RunConfig,
    level: f64,
    state: usize,
    direction: JumpDirection,
    dy: f64,
    cap: f64,
) -> Result<Vec<(f64, f64)>> {
    let model = base_model(cfg)?;
    let (ys, d) = jump_density_auto(&model, direction, level, state, dy, cap)?;
    Ok(ys.into_iter().zip(d).collect())
}

/// One simulated path as CSV: every recorded time with level and state.
pub fn path_csv(cfg: &RunConfig, seed: u64) -> Result<Vec<u8>> {
    let aug = augmented(cfg)?;
    let path = simulate_path(&aug, cfg.u, cfg.i0, &path_options(cfg), seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "level", "state"])?;
    for ((t, x), s) in path.times.iter().zip(&path.levels).zip(&path.env) {
        w.write_record([num(*t), num(*x), aug.state_name(*s)])?;
    }
    Ok(w.into_inner()?)
}
