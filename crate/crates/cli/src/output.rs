//! Result files: a versioned JSON document per method, per-bin and
//! per-state CSV tables, and a cross-method comparison for `method = "all"`.
//! Every file starts with the same provenance block.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hybrid_risk::solver::{DescriptorSet, Summary, BACKEND_TOLERANCE, CONDITION_WARNING};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

pub const SCHEMA: &str = "hybrid-risk/descriptors/v1";
pub const GIT_HASH: &str = env!("HYBRID_RISK_GIT_HASH");

/// Run-level provenance shared by every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunProvenance {
    pub schema: &'static str,
    pub version: &'static str,
    pub git_hash: &'static str,
    pub config: String,
    pub model: &'static str,
    pub dividend: Option<String>,
    pub ruin: &'static str,
    pub method: &'static str,
    pub u: f64,
    pub i0: usize,
    pub c: f64,
    pub d: f64,
    pub q: f64,
    pub seed: u64,
    pub solver_bins: Option<usize>,
    pub cells: usize,
    pub eps: Option<f64>,
    pub mc_paths: usize,
    pub mc_bins: usize,
    pub mc_step: f64,
    pub mc_ode_step: f64,
    pub mc_horizon_cap: f64,
    pub tolerance_backend: f64,
    pub tolerance_structural: f64,
    pub condition_warning: f64,
}

impl RunProvenance {
    pub fn new(cfg: &RunConfig, config_path: &Path) -> Self {
        RunProvenance {
            schema: SCHEMA,
            version: env!("CARGO_PKG_VERSION"),
            git_hash: GIT_HASH,
            config: config_path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            model: cfg.model.name(),
            dividend: cfg.dividend.as_ref().map(|d| format!("{d:?}")),
            ruin: cfg.ruin.name(),
            method: crate::config::method_name(cfg.method),
            u: cfg.u,
            i0: cfg.i0,
            c: cfg.c,
            d: cfg.d,
            q: cfg.q,
            seed: cfg.seed,
            solver_bins: cfg.bins,
            cells: cfg.cells,
            eps: cfg.bins.map(|b| cfg.eps_for(b)),
            mc_paths: cfg.mc.paths,
            mc_bins: cfg.mc_bins(),
            mc_step: cfg.mc.step,
            mc_ode_step: cfg.mc.ode_step,
            mc_horizon_cap: cfg.mc.horizon_cap,
            tolerance_backend: BACKEND_TOLERANCE,
            tolerance_structural: hybrid_risk::model::STRUCTURAL_TOL,
            condition_warning: CONDITION_WARNING,
        }
    }

    /// `# key = value` lines for CSV headers.
    pub fn comment_lines(&self) -> Vec<String> {
        let Value::Object(map) = serde_json::to_value(self).expect("plain struct") else {
            unreachable!()
        };
        map.into_iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("# {k} = {s}"),
                other => format!("# {k} = {other}"),
            })
            .collect()
    }
}

fn summary_value(s: &Summary) -> Value {
    serde_json::to_value(s).expect("plain struct")
}

/// The structured-text document for one method.
pub fn document(prov: &RunProvenance, ds: &DescriptorSet) -> Value {
    json!({
        "schema": SCHEMA,
        "provenance": prov,
        "summary": summary_value(&ds.summary()),
        "summary_std_errors": ds.summary_std_errors().as_ref().map(summary_value),
        "descriptors": ds,
    })
}

fn with_header(prov: &RunProvenance, path: &Path, body: Vec<u8>) -> Result<PathBuf> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for line in prov.comment_lines() {
        writeln!(f, "{line}")?;
    }
    f.write_all(&body)?;
    Ok(path.to_path_buf())
}

fn csv_body(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner()?)
}

/// Shortest round-trip form, in exponent notation for very small or large
/// magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Standard error of a per-bin kill density: the kill event in a bin is a
/// per-path indicator, so its SE is binomial.
fn density_se(ds: &DescriptorSet, density: &[f64]) -> Vec<Option<f64>> {
    let n = ds.provenance.n_paths;
    (0..ds.n_bins())
        .map(|k| {
            let n = n? as f64;
            let p = density[k] * ds.width(k);
            Some((p * (1.0 - p) / (n - 1.0).max(1.0)).max(0.0).sqrt() / ds.width(k))
        })
        .collect()
}

pub fn bins_csv(ds: &DescriptorSet) -> Result<Vec<u8>> {
    let (plus, minus) = (ds.non_ruin_density(), ds.ruin_density());
    let (plus_se, minus_se) = (density_se(ds, &plus), density_se(ds, &minus));
    let rows = (0..ds.n_bins()).map(|k| {
        let occ: f64 = ds.values.occupation.iter().map(|r| r[k]).sum();
        vec![
            k.to_string(),
            num(ds.edges[k]),
            num(ds.edges[k + 1]),
            num(ds.center(k)),
            num(occ),
            num(plus[k]),
            num(minus[k]),
            opt(plus_se[k]),
            opt(minus_se[k]),
        ]
    });
    csv_body(
        &["bin", "lo", "hi", "center", "occupation", "non_ruin_density", "ruin_density", "non_ruin_density_se", "ruin_density_se"],
        rows,
    )
}

pub fn states_csv(ds: &DescriptorSet) -> Result<Vec<u8>> {
    let v = &ds.values;
    let se = ds.std_errors.as_ref();
    let mut rows = Vec::new();
    for (s, name) in ds.states.iter().enumerate() {
        for k in 0..ds.n_bins() {
            rows.push(vec![
                name.clone(),
                k.to_string(),
                num(ds.edges[k]),
                num(ds.edges[k + 1]),
                num(v.occupation[s][k]),
                num(v.kill_plus[s][k]),
                num(v.kill_minus[s][k]),
                opt(se.map(|e| e.occupation[s][k])),
                opt(se.map(|e| e.kill_plus[s][k])),
                opt(se.map(|e| e.kill_minus[s][k])),
            ]);
        }
    }
    csv_body(
        &["state", "bin", "lo", "hi", "occupation", "kill_plus", "kill_minus", "occupation_se", "kill_plus_se", "kill_minus_se"],
        rows,
    )
}

const SUMMARY_FIELDS: [&str; 6] = ["psi_lower", "psi_plus", "psi_minus", "upper", "discounted", "capped"];

fn field(s: &Summary, name: &str) -> f64 {
    match name {
        "psi_lower" => s.psi_lower,
        "psi_plus" => s.psi_plus,
        "psi_minus" => s.psi_minus,
        "upper" => s.upper,
        "discounted" => s.discounted,
        _ => s.capped,
    }
}

/// Deviation of a solver value from the Monte Carlo mean in standard errors;
/// empty when the SE vanishes.
fn z(solver: f64, mc: f64, se: f64) -> String {
    if se > 0.0 {
        num((mc - solver) / se)
    } else {
        String::new()
    }
}

pub fn comparison_csv(transient: &DescriptorSet, stationary: &DescriptorSet, mc: &DescriptorSet) -> Result<Vec<u8>> {
    let (t, s, m) = (transient.summary(), stationary.summary(), mc.summary());
    let se = mc.summary_std_errors().expect("simulation carries path counts");
    let rows = SUMMARY_FIELDS.iter().map(|&f| {
        let (a, b, c, e) = (field(&t, f), field(&s, f), field(&m, f), field(&se, f));
        vec![f.to_string(), num(a), num(b), num(c), num(e), z(a, c, e), z(b, c, e), num((a - b).abs())]
    });
    csv_body(
        &["descriptor", "transient", "stationary", "mc", "mc_se", "z_transient", "z_stationary", "backend_difference"],
        rows,
    )
}

/// Writes the JSON document and both CSV tables of one method.
pub fn write_method(dir: &Path, prov: &RunProvenance, ds: &DescriptorSet) -> Result<Vec<PathBuf>> {
    let name = ds.provenance.method.name();
    let json_path = dir.join(format!("{name}.json"));
    let mut text = serde_json::to_string_pretty(&document(prov, ds))?;
    text.push('\n');
    fs::write(&json_path, text).with_context(|| format!("writing {}", json_path.display()))?;
    Ok(vec![
        json_path,
        with_header(prov, &dir.join(format!("{name}_bins.csv")), bins_csv(ds)?)?,
        with_header(prov, &dir.join(format!("{name}_states.csv")), states_csv(ds)?)?,
    ])
}

pub fn write_comparison(dir: &Path, prov: &RunProvenance, sets: [&DescriptorSet; 3]) -> Result<PathBuf> {
    with_header(prov, &dir.join("comparison.csv"), comparison_csv(sets[0], sets[1], sets[2])?)
}
