//! Killed and clock-augmented models for the supported ruin definitions.
//!
//! Every builder goes through one assembler. With `B(x)` the base generator
//! after reweighing and direct killing, `P = diag(1{i ∈ S^p})` and `K(x)` the
//! active clock generator, the augmented subintensity matrix is
//! `B(x) ⊗ I + P ⊗ K(x)`. Clocks therefore run only while the base state pays
//! premiums and are frozen during jumps. The horizon clock runs on both sides
//! of zero; the grace clock only below zero.
//!
//! `kill_plus` collects non-ruin terminations and `kill_minus` ruin
//! terminations, independently of the sign of the level at which they occur.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{usage, Error, Result};
use crate::matrixkit::{kron_prod, kron_sum, ErlangClock, PhaseType};
use crate::model::{
    linspace, KilledGenerator, LevelDependentGenerator, Matrix, RateFn, RiskModelSpec, Side, StateClass,
    StatePartition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuinKind {
    Infinite,
    ErlangHorizon,
    Poissonian,
    CumulativeParisian,
    Omega,
    GeneralizedOmega,
}

impl RuinKind {
    pub fn name(self) -> &'static str {
        match self {
            RuinKind::Infinite => "infinite",
            RuinKind::ErlangHorizon => "erlang",
            RuinKind::Poissonian => "poisson",
            RuinKind::CumulativeParisian => "parisian",
            RuinKind::Omega => "omega",
            RuinKind::GeneralizedOmega => "gomega",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ruin,
    NonRuin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KillChannel {
    Plus,
    Minus,
}

impl KillChannel {
    pub fn outcome(self) -> Outcome {
        match self {
            KillChannel::Plus => Outcome::NonRuin,
            KillChannel::Minus => Outcome::Ruin,
        }
    }
}

/// A named source of killing and the absorbing class it feeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KillSource {
    pub name: String,
    pub channel: KillChannel,
    pub outcome: Outcome,
}

/// The killing sources of a model: `∂_N` collects non-ruin, `∂_R` ruin.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AbsorptionClasses {
    pub sources: Vec<KillSource>,
}

impl AbsorptionClasses {
    fn push(&mut self, name: &str, channel: KillChannel) {
        self.sources.push(KillSource {
            name: name.to_string(),
            channel,
            outcome: channel.outcome(),
        });
    }

    pub fn has(&self, channel: KillChannel) -> bool {
        self.sources.iter().any(|s| s.channel == channel)
    }
}

/// Coordinates of an augmented state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct AugState {
    pub base: usize,
    pub horizon_stage: usize,
    pub grace_stage: usize,
}

/// Reweighing functions `ω_{ij}(x)` with a declared bound. Off-diagonal
/// entries divert part of the `i → j` intensity to killing, diagonal entries
/// kill directly.
#[derive(Clone)]
pub struct Reweighing {
    f: Arc<dyn Fn(usize, usize, f64) -> f64 + Send + Sync>,
    bound: f64,
}

impl fmt::Debug for Reweighing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Reweighing").field("bound", &self.bound).finish_non_exhaustive()
    }
}

impl Reweighing {
    pub fn new(bound: f64, f: impl Fn(usize, usize, f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(bound.is_finite() && bound >= 0.0) {
            return usage("reweighing bound must be finite and >= 0");
        }
        Ok(Reweighing { f: Arc::new(f), bound })
    }

    pub fn zero() -> Self {
        Reweighing {
            f: Arc::new(|_, _, _| 0.0),
            bound: 0.0,
        }
    }

    pub fn eval(&self, i: usize, j: usize, x: f64) -> f64 {
        (self.f)(i, j, x)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

/// Parameters of the generalized Omega construction. Reweighing and direct
/// killing apply to premium states only; `base_omega` acts below zero and is
/// the diagonal of the ruin-side reweighing.
#[derive(Debug, Clone)]
pub struct GeneralizedOmegaParams {
    pub reweigh_plus: Reweighing,
    pub reweigh_minus: Reweighing,
    pub horizon: Option<ErlangClock>,
    pub grace: Option<PhaseType>,
    pub base_omega: Option<RateFn>,
    /// Levels at which `0 ≤ ω_{ij} ≤ Λ_{ij}` is checked.
    pub check_levels: Vec<f64>,
}

impl Default for GeneralizedOmegaParams {
    fn default() -> Self {
        GeneralizedOmegaParams {
            reweigh_plus: Reweighing::zero(),
            reweigh_minus: Reweighing::zero(),
            horizon: None,
            grace: None,
            base_omega: None,
            check_levels: linspace(-50.0, 50.0, 401),
        }
    }
}

/// A model on a (possibly clock-augmented) state space with classified
/// killing.
#[derive(Clone)]
pub struct AugmentedModel {
    pub kind: RuinKind,
    pub base: RiskModelSpec,
    pub spec: RiskModelSpec,
    pub partition_map: Vec<AugState>,
    pub killing: KilledGenerator,
    pub absorption_classes: AbsorptionClasses,
    horizon_stages: usize,
    grace_init: DVector<f64>,
}

impl fmt::Debug for AugmentedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AugmentedModel")
            .field("kind", &self.kind)
            .field("states", &self.partition_map.len())
            .field("absorption_classes", &self.absorption_classes)
            .finish_non_exhaustive()
    }
}

impl AugmentedModel {
    pub fn n_states(&self) -> usize {
        self.partition_map.len()
    }

    pub fn base_state(&self, k: usize) -> usize {
        self.partition_map[k].base
    }

    pub fn horizon_stages(&self) -> usize {
        self.horizon_stages
    }

    pub fn grace_stages(&self) -> usize {
        self.grace_init.len()
    }

    pub fn index_of(&self, s: AugState) -> Option<usize> {
        if s.base >= self.base.n_states() || s.horizon_stage >= self.horizon_stages || s.grace_stage >= self.grace_stages()
        {
            return None;
        }
        Some((s.base * self.horizon_stages + s.horizon_stage) * self.grace_stages() + s.grace_stage)
    }

    /// Initial law over augmented states when the base process starts in
    /// `i0`: horizon clock in its first stage, grace clock drawn from its
    /// initial vector.
    pub fn initial_distribution(&self, i0: usize) -> Result<Vec<f64>> {
        if i0 >= self.base.n_states() {
            return usage(format!("initial state {i0} out of range (model has {} states)", self.base.n_states()));
        }
        let mut v = vec![0.0; self.n_states()];
        for (b, w) in self.grace_init.iter().enumerate() {
            let k = self
                .index_of(AugState {
                    base: i0,
                    horizon_stage: 0,
                    grace_stage: b,
                })
                .expect("in range");
            v[k] = *w;
        }
        Ok(v)
    }

    /// The same model discounted at rate `q` (premium states only).
    pub fn with_discount(mut self, q: f64) -> Result<Self> {
        self.killing = self.killing.with_discount(q)?;
        Ok(self)
    }

    /// Sums a per-augmented-state vector over clock stages.
    pub fn to_base(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.base.n_states()];
        for (k, v) in values.iter().enumerate() {
            out[self.partition_map[k].base] += v;
        }
        out
    }

    /// Upper bound for the total exit rate of any state, used for
    /// uniformization.
    pub fn rate_bound(&self) -> f64 {
        let n = self.n_states() as f64;
        self.spec.generator().bound() * n + self.killing.kill_bound()
    }

    pub fn state_name(&self, k: usize) -> String {
        let s = self.partition_map[k];
        let base = self.base.partition().name(s.base);
        match (self.horizon_stages > 1 || self.kind == RuinKind::ErlangHorizon, self.has_grace()) {
            (false, false) => base.to_string(),
            (true, false) => format!("{base}|h{}", s.horizon_stage + 1),
            (false, true) => format!("{base}|g{}", s.grace_stage + 1),
            (true, true) => format!("{base}|h{}|g{}", s.horizon_stage + 1, s.grace_stage + 1),
        }
    }

    fn has_grace(&self) -> bool {
        self.grace_stages() > 1 || matches!(self.kind, RuinKind::CumulativeParisian)
    }
}

/// Identity augmentation with no killing.
pub fn build_infinite_horizon(model: &RiskModelSpec) -> Result<AugmentedModel> {
    assemble(model, RuinKind::Infinite, &GeneralizedOmegaParams {
        check_levels: vec![],
        ..Default::default()
    })
}

/// Ruin before an independent Erlang horizon, which runs in operational time.
pub fn build_erlang_horizon(model: &RiskModelSpec, clock: ErlangClock) -> Result<AugmentedModel> {
    assemble(model, RuinKind::ErlangHorizon, &GeneralizedOmegaParams {
        horizon: Some(clock),
        check_levels: vec![],
        ..Default::default()
    })
}

/// Ruin at the first Poisson(`obs_rate`) observation of a negative surplus.
pub fn build_poissonian(model: &RiskModelSpec, obs_rate: f64) -> Result<AugmentedModel> {
    if !(obs_rate >= 0.0 && obs_rate.is_finite()) {
        return usage("observation rate must be finite and >= 0");
    }
    assemble(model, RuinKind::Poissonian, &GeneralizedOmegaParams {
        base_omega: Some(RateFn::constant(obs_rate)?),
        check_levels: vec![],
        ..Default::default()
    })
}

/// Ruin once the total time spent below zero exceeds a phase-type grace
/// period.
pub fn build_cumulative_parisian(model: &RiskModelSpec, grace: PhaseType) -> Result<AugmentedModel> {
    assemble(model, RuinKind::CumulativeParisian, &GeneralizedOmegaParams {
        grace: Some(grace),
        check_levels: vec![],
        ..Default::default()
    })
}

/// Bankruptcy at rate `ω(i, x)` while the surplus is negative.
pub fn build_omega(model: &RiskModelSpec, omega: RateFn) -> Result<AugmentedModel> {
    assemble(model, RuinKind::Omega, &GeneralizedOmegaParams {
        base_omega: Some(omega),
        check_levels: vec![],
        ..Default::default()
    })
}

pub fn build_generalized_omega(model: &RiskModelSpec, params: &GeneralizedOmegaParams) -> Result<AugmentedModel> {
    check_reweighing(model, params)?;
    assemble(model, RuinKind::GeneralizedOmega, params)
}

fn check_reweighing(model: &RiskModelSpec, params: &GeneralizedOmegaParams) -> Result<()> {
    let p = model.partition();
    let n = model.n_states();
    for &x in &params.check_levels {
        let side = Side::of(x);
        let lam = model.generator().at_side(x, side)?;
        let (w, label) = match side {
            Side::NonNegative => (&params.reweigh_plus, "ω^+"),
            Side::Negative => (&params.reweigh_minus, "ω^-"),
        };
        for i in 0..n {
            for j in 0..n {
                let v = w.eval(i, j, x);
                if v.is_nan() || v < 0.0 {
                    return usage(format!("{label}[{i},{j}]({x}) = {v} is negative"));
                }
                if v == 0.0 {
                    continue;
                }
                if !p.is_premium(i) {
                    return usage(format!("{label}[{i},{j}] must vanish: state {i} is not premium-paying"));
                }
                if i != j && !p.is_premium(j) {
                    return usage(format!("{label}[{i},{j}] may only reweigh transitions into premium states"));
                }
                if i != j && v > lam[(i, j)] + 1e-12 {
                    return usage(format!(
                        "{label}[{i},{j}]({x}) = {v} exceeds the intensity Λ[{i},{j}] = {}",
                        lam[(i, j)]
                    ));
                }
                if v > w.bound() + 1e-12 {
                    return usage(format!("{label}[{i},{j}]({x}) = {v} exceeds its declared bound {}", w.bound()));
                }
            }
        }
    }
    Ok(())
}

struct Layout {
    n: usize,
    m_n: usize,
    m_r: usize,
    premium: Arc<Vec<bool>>,
}

impl Layout {
    fn dim(&self) -> usize {
        self.n * self.m_n * self.m_r
    }

    fn split(&self, k: usize) -> (usize, usize, usize) {
        (k / (self.m_n * self.m_r), (k / self.m_r) % self.m_n, k % self.m_r)
    }
}

fn assemble(model: &RiskModelSpec, kind: RuinKind, params: &GeneralizedOmegaParams) -> Result<AugmentedModel> {
    let bp = model.partition();
    let n = model.n_states();

    let (k_n, exit_n) = match params.horizon {
        Some(c) => {
            let k = c.generator();
            let exit = -k.column_sum();
            (k, exit)
        }
        None => (Matrix::zeros(1, 1), DVector::zeros(1)),
    };
    let (k_r, exit_r, grace_init) = match &params.grace {
        Some(ph) => {
            let a = ph.alpha();
            if (a.sum() - 1.0).abs() > 1e-12 {
                return usage("grace period must not have an atom at zero (initial vector must sum to 1)");
            }
            (ph.t_mat().clone(), ph.exit().clone(), a.clone())
        }
        None => (Matrix::zeros(1, 1), DVector::zeros(1), DVector::from_element(1, 1.0)),
    };
    let layout = Arc::new(Layout {
        n,
        m_n: k_n.nrows(),
        m_r: k_r.nrows(),
        premium: Arc::new((0..n).map(|i| bp.is_premium(i)).collect()),
    });
    let (m_n, m_r) = (layout.m_n, layout.m_r);

    // active clock generators on each side
    let clocks_pos = kron_prod(&k_n, &Matrix::identity(m_r, m_r));
    let clocks_neg = kron_sum(&k_n, &k_r)?;

    let mut classes = AbsorptionClasses::default();
    if params.horizon.is_some() {
        classes.push("horizon clock", KillChannel::Plus);
    }
    if params.reweigh_plus.bound() > 0.0 {
        classes.push("non-ruin reweighing", KillChannel::Plus);
    }
    if params.grace.is_some() {
        classes.push("grace clock", KillChannel::Minus);
    }
    if params.reweigh_minus.bound() > 0.0 {
        classes.push("ruin reweighing", KillChannel::Minus);
    }
    if let Some(w) = &params.base_omega {
        let name = if kind == RuinKind::Poissonian { "observation" } else { "omega" };
        if w.bound() > 0.0 || kind == RuinKind::Poissonian {
            classes.push(name, KillChannel::Minus);
        }
    }

    // base rows after reweighing, plus the per-base-state kill rates
    let base_gen = model.generator().clone();
    let wp = params.reweigh_plus.clone();
    let wm = params.reweigh_minus.clone();
    let omega = params.base_omega.clone();
    let prem = layout.premium.clone();
    let reweighed = Arc::new(move |x: f64, side: Side| -> (Matrix, Vec<f64>, Vec<f64>) {
        let mut b = base_gen
            .at_side(x, side)
            .unwrap_or_else(|_| Matrix::from_element(n, n, f64::NAN));
        let mut kp = vec![0.0; n];
        let mut km = vec![0.0; n];
        for i in 0..n {
            if !prem[i] {
                continue;
            }
            let (w, k) = match side {
                Side::NonNegative => (&wp, &mut kp),
                Side::Negative => (&wm, &mut km),
            };
            if w.bound() > 0.0 {
                for j in 0..n {
                    let v = w.eval(i, j, x);
                    if v != 0.0 {
                        if i != j {
                            b[(i, j)] -= v;
                        } else {
                            b[(i, i)] -= v;
                        }
                        k[i] += v;
                    }
                }
            }
            if side == Side::Negative {
                if let Some(o) = &omega {
                    let v = o.eval(i, x);
                    b[(i, i)] -= v;
                    km[i] += v;
                }
            }
        }
        (b, kp, km)
    });

    let mask = Matrix::from_fn(n, n, |i, j| if i == j && layout.premium[i] { 1.0 } else { 0.0 });
    let g_layout = layout.clone();
    let g_rw = reweighed;
    let dim = layout.dim();
    let gen_bound = model.generator().bound()
        + params.reweigh_plus.bound().max(params.reweigh_minus.bound())
        + params.base_omega.as_ref().map_or(0.0, |w| w.bound())
        + max_abs(&clocks_neg).max(max_abs(&clocks_pos));
    let generator = LevelDependentGenerator::sided(dim, gen_bound, move |x, side| {
        let (b, _, _) = g_rw(x, side);
        let clocks = match side {
            Side::NonNegative => &clocks_pos,
            Side::Negative => &clocks_neg,
        };
        let m = g_layout.m_n * g_layout.m_r;
        kron_prod(&b, &Matrix::identity(m, m)) + kron_prod(&mask, clocks)
    })?;

    let names: Vec<String> = (0..dim).map(|k| format!("s{k}")).collect();
    let classes_vec: Vec<StateClass> = (0..dim).map(|k| bp.class_of(layout.split(k).0)).collect();
    let partition = StatePartition::from_classes(names, &classes_vec)?;

    let drift = model.drift_fn().clone();
    let diffusion = model.diffusion_fn().clone();
    let (l1, l2) = (layout.clone(), layout.clone());
    let spec = RiskModelSpec::new(
        partition.clone(),
        move |k, x| drift(l1.split(k).0, x),
        move |k, x| diffusion(l2.split(k).0, x),
        generator.clone(),
        model.lipschitz_bound(),
    )?;

    // per-state kill rates without assembling the matrix
    let wp = params.reweigh_plus.clone();
    let wm = params.reweigh_minus.clone();
    let omega = params.base_omega.clone();
    let base_kills = Arc::new(move |i: usize, x: f64, side: Side| -> (f64, f64) {
        let mut kp = 0.0;
        let mut km = 0.0;
        match side {
            Side::NonNegative => {
                if wp.bound() > 0.0 {
                    kp = (0..n).map(|j| wp.eval(i, j, x)).sum();
                }
            }
            Side::Negative => {
                if wm.bound() > 0.0 {
                    km = (0..n).map(|j| wm.eval(i, j, x)).sum();
                }
                if let Some(o) = &omega {
                    km += o.eval(i, x);
                }
            }
        }
        (kp, km)
    });
    let (lp, lm) = (layout.clone(), layout.clone());
    let (bp_k, bm_k) = (base_kills.clone(), base_kills);
    let exit_n_p = exit_n.clone();
    let kill_bound = params.reweigh_plus.bound().max(params.reweigh_minus.bound()) * n as f64
        + params.base_omega.as_ref().map_or(0.0, |w| w.bound())
        + exit_n.max()
        + exit_r.max();
    let killing = KilledGenerator::new(
        spec.generator().clone(),
        &partition,
        move |k, x, side| {
            let (i, a, _) = lp.split(k);
            if !lp.premium[i] {
                return 0.0;
            }
            bp_k(i, x, side).0 + exit_n_p[a]
        },
        move |k, x, side| {
            let (i, _, b) = lm.split(k);
            if !lm.premium[i] {
                return 0.0;
            }
            let clock = if side == Side::Negative { exit_r[b] } else { 0.0 };
            bm_k(i, x, side).1 + clock
        },
        kill_bound,
    )?;

    let partition_map = (0..dim)
        .map(|k| {
            let (i, a, b) = layout.split(k);
            AugState {
                base: i,
                horizon_stage: a,
                grace_stage: b,
            }
        })
        .collect();

    let _ = m_n;
    Ok(AugmentedModel {
        kind,
        base: model.clone(),
        spec,
        partition_map,
        killing,
        absorption_classes: classes,
        horizon_stages: m_n,
        grace_init,
    })
}

fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Largest entrywise difference between the effective generators and the
/// kill rates of two models on a set of levels, both sides of zero.
pub fn max_structural_difference(a: &AugmentedModel, b: &AugmentedModel, levels: &[f64]) -> Result<f64> {
    if a.n_states() != b.n_states() {
        return Err(Error::Invalid(format!(
            "state counts differ: {} vs {}",
            a.n_states(),
            b.n_states()
        )));
    }
    let mut worst = 0.0_f64;
    for &x in levels {
        for side in [Side::Negative, Side::NonNegative] {
            let ga = a.killing.effective(x, side)?;
            let gb = b.killing.effective(x, side)?;
            worst = worst.max(max_abs(&(ga - gb)));
            for k in 0..a.n_states() {
                worst = worst.max((a.killing.kill_plus(k, x, side) - b.killing.kill_plus(k, x, side)).abs());
                worst = worst.max((a.killing.kill_minus(k, x, side) - b.killing.kill_minus(k, x, side)).abs());
            }
        }
    }
    Ok(worst)
}
