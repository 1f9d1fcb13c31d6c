//! Domain types for hybrid risk processes.
//!
//! A hybrid risk process is described by the hybrid SDE it is built from: a
//! finite environment `J` whose states are split into premium-paying states
//! (`S^p`, diffusive), up-jump states (`S^+`, positive drift only) and
//! down-jump states (`S^-`, negative drift only), a level-dependent drift and
//! diffusion per state, and a level-dependent switching generator `Λ(x)`.
//! Time spent in `S^±` is excised from the clock, so those sojourns appear as
//! instantaneous jumps of the surplus.
//!
//! Coefficients are black-box callables. Validation is sampling based: the
//! caller declares a uniform bound on the generator entries and a Lipschitz
//! constant for drift/diffusion, and [`validate_model`] checks them on a grid.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

pub type Matrix = DMatrix<f64>;

/// Absolute tolerance used by every structural check.
pub const STRUCTURAL_TOL: f64 = 1e-10;

/// Which side of the surplus level zero a coefficient is evaluated on.
///
/// Ruin constructions switch clocks and killing on and off at `x = 0`. The
/// switch is right-continuous: `x = 0` belongs to [`Side::NonNegative`]. Base
/// models ignore the side; augmented models use it so the grid can blend the
/// two regimes inside a buffer zone around zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Negative,
    NonNegative,
}

impl Side {
    pub fn of(x: f64) -> Side {
        if x < 0.0 {
            Side::Negative
        } else {
            Side::NonNegative
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateClass {
    Premium,
    Up,
    Down,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    names: Vec<String>,
    premium: Vec<usize>,
    up: Vec<usize>,
    down: Vec<usize>,
}

/// Split of the environment states `0..n` into `S^p`, `S^+` and `S^-`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct StatePartition {
    names: Vec<String>,
    premium: Vec<usize>,
    up: Vec<usize>,
    down: Vec<usize>,
    classes: Vec<StateClass>,
}

impl TryFrom<PartitionRepr> for StatePartition {
    type Error = Error;

    fn try_from(r: PartitionRepr) -> Result<Self> {
        StatePartition::new(r.names, r.premium, r.up, r.down)
    }
}

impl From<StatePartition> for PartitionRepr {
    fn from(p: StatePartition) -> Self {
        PartitionRepr {
            names: p.names,
            premium: p.premium,
            up: p.up,
            down: p.down,
        }
    }
}

impl StatePartition {
    pub fn new(
        names: Vec<String>,
        premium: Vec<usize>,
        up: Vec<usize>,
        down: Vec<usize>,
    ) -> Result<Self> {
        let n = names.len();
        if premium.is_empty() {
            return usage("premium-paying state set must be non-empty");
        }
        if premium.len() + up.len() + down.len() != n {
            return usage(format!(
                "partition sizes {}+{}+{} do not match {} named states",
                premium.len(),
                up.len(),
                down.len(),
                n
            ));
        }
        let mut classes: Vec<Option<StateClass>> = vec![None; n];
        for (set, class) in [
            (&premium, StateClass::Premium),
            (&up, StateClass::Up),
            (&down, StateClass::Down),
        ] {
            for &i in set {
                if i >= n {
                    return usage(format!("state id {i} out of range 0..{n}"));
                }
                if classes[i].is_some() {
                    return usage(format!("state id {i} appears in more than one set"));
                }
                classes[i] = Some(class);
            }
        }
        let classes = classes.into_iter().map(|c| c.expect("covered")).collect();
        Ok(StatePartition {
            names,
            premium,
            up,
            down,
            classes,
        })
    }

    /// Builds a partition from one class per state, keeping ids in order.
    pub fn from_classes(names: Vec<String>, classes: &[StateClass]) -> Result<Self> {
        if names.len() != classes.len() {
            return usage("one class per named state is required");
        }
        let pick = |c: StateClass| {
            classes
                .iter()
                .enumerate()
                .filter(|(_, &k)| k == c)
                .map(|(i, _)| i)
                .collect::<Vec<_>>()
        };
        StatePartition::new(
            names,
            pick(StateClass::Premium),
            pick(StateClass::Up),
            pick(StateClass::Down),
        )
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn premium(&self) -> &[usize] {
        &self.premium
    }

    pub fn up(&self) -> &[usize] {
        &self.up
    }

    pub fn down(&self) -> &[usize] {
        &self.down
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn class_of(&self, i: usize) -> StateClass {
        self.classes[i]
    }

    pub fn classes(&self) -> &[StateClass] {
        &self.classes
    }

    pub fn is_premium(&self, i: usize) -> bool {
        self.classes[i] == StateClass::Premium
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// `true` where the block `S^+ -> S^-` or `S^- -> S^+` forces a zero.
    pub fn is_structural_zero(&self, i: usize, j: usize) -> bool {
        matches!(
            (self.classes[i], self.classes[j]),
            (StateClass::Up, StateClass::Down) | (StateClass::Down, StateClass::Up)
        )
    }
}

type MatrixFn = dyn Fn(f64, Side) -> Matrix + Send + Sync;

/// `Λ(x)`: a level-dependent (sub)intensity matrix with a declared uniform
/// bound on its entries.
#[derive(Clone)]
pub struct LevelDependentGenerator {
    dim: usize,
    bound: f64,
    entries: Arc<MatrixFn>,
    zero_mask: Option<Arc<Vec<bool>>>,
}

impl fmt::Debug for LevelDependentGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelDependentGenerator")
            .field("dim", &self.dim)
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

impl LevelDependentGenerator {
    pub fn new(
        dim: usize,
        bound: f64,
        f: impl Fn(f64) -> Matrix + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::sided(dim, bound, move |x, _| f(x))
    }

    /// A generator whose value may depend on which side of zero it is
    /// evaluated on (see [`Side`]).
    pub fn sided(
        dim: usize,
        bound: f64,
        f: impl Fn(f64, Side) -> Matrix + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return usage("generator dimension must be positive");
        }
        if !(bound.is_finite() && bound >= 0.0) {
            return usage(format!("generator bound must be finite and >= 0, got {bound}"));
        }
        Ok(LevelDependentGenerator {
            dim,
            bound,
            entries: Arc::new(f),
            zero_mask: None,
        })
    }

    pub fn constant(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return usage("generator matrix must be square");
        }
        let bound = m.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let dim = m.nrows();
        Self::new(dim, bound, move |_| m.clone())
    }

    /// Enforces the `S^+ <-> S^-` structural zeros on every evaluation.
    pub fn with_partition(mut self, partition: &StatePartition) -> Result<Self> {
        if partition.len() != self.dim {
            return usage(format!(
                "partition has {} states, generator has dimension {}",
                partition.len(),
                self.dim
            ));
        }
        let n = self.dim;
        let mask = (0..n * n)
            .map(|k| partition.is_structural_zero(k / n, k % n))
            .collect();
        self.zero_mask = Some(Arc::new(mask));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// The callable's value without structural zeros applied.
    pub fn raw(&self, x: f64, side: Side) -> Matrix {
        (self.entries)(x, side)
    }

    /// `Λ(x)` on an explicit side of zero, structural zeros enforced.
    pub fn at_side(&self, x: f64, side: Side) -> Result<Matrix> {
        let mut m = self.raw(x, side);
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::Numeric(format!(
                "generator returned {}x{} at x={x}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                self.dim,
                self.dim
            )));
        }
        if let Some(bad) = m.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite generator entry {bad} at x={x}")));
        }
        if let Some(mask) = &self.zero_mask {
            let n = self.dim;
            for i in 0..n {
                for j in 0..n {
                    if mask[i * n + j] {
                        m[(i, j)] = 0.0;
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn at(&self, x: f64) -> Result<Matrix> {
        self.at_side(x, Side::of(x))
    }
}

/// Evaluates `Λ(x)` with the right-continuous side convention.
pub fn evaluate_generator(generator: &LevelDependentGenerator, x: f64) -> Result<Matrix> {
    generator.at(x)
}

/// A per-state, per-level scalar coefficient.
pub type LevelFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// A non-negative rate `(state, level) -> rate` with a declared upper bound.
#[derive(Clone)]
pub struct RateFn {
    f: LevelFn,
    bound: f64,
}

impl fmt::Debug for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateFn").field("bound", &self.bound).finish_non_exhaustive()
    }
}

impl RateFn {
    pub fn new(bound: f64, f: impl Fn(usize, f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(bound.is_finite() && bound >= 0.0) {
            return usage(format!("rate bound must be finite and >= 0, got {bound}"));
        }
        Ok(RateFn {
            f: Arc::new(f),
            bound,
        })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        if rate < 0.0 {
            return usage(format!("rate must be >= 0, got {rate}"));
        }
        Self::new(rate, move |_, _| rate)
    }

    pub fn zero() -> Self {
        RateFn {
            f: Arc::new(|_, _| 0.0),
            bound: 0.0,
        }
    }

    pub fn eval(&self, i: usize, x: f64) -> f64 {
        (self.f)(i, x)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

/// Drift, diffusion and switching of the hybrid SDE underlying a hybrid risk
/// process.
#[derive(Clone)]
pub struct RiskModelSpec {
    partition: StatePartition,
    drift: LevelFn,
    diffusion: LevelFn,
    generator: LevelDependentGenerator,
    lipschitz_bound: f64,
}

impl fmt::Debug for RiskModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RiskModelSpec")
            .field("partition", &self.partition)
            .field("generator", &self.generator)
            .field("lipschitz_bound", &self.lipschitz_bound)
            .finish_non_exhaustive()
    }
}

impl RiskModelSpec {
    pub fn new(
        partition: StatePartition,
        drift: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        generator: LevelDependentGenerator,
        lipschitz_bound: f64,
    ) -> Result<Self> {
        Self::from_parts(
            partition,
            Arc::new(drift),
            Arc::new(diffusion),
            generator,
            lipschitz_bound,
        )
    }

    pub fn from_parts(
        partition: StatePartition,
        drift: LevelFn,
        diffusion: LevelFn,
        generator: LevelDependentGenerator,
        lipschitz_bound: f64,
    ) -> Result<Self> {
        if !(lipschitz_bound >= 0.0) {
            return usage("declared Lipschitz bound must be >= 0");
        }
        let generator = generator.with_partition(&partition)?;
        Ok(RiskModelSpec {
            partition,
            drift,
            diffusion,
            generator,
            lipschitz_bound,
        })
    }

    pub fn partition(&self) -> &StatePartition {
        &self.partition
    }

    pub fn generator(&self) -> &LevelDependentGenerator {
        &self.generator
    }

    pub fn n_states(&self) -> usize {
        self.partition.len()
    }

    pub fn drift(&self, i: usize, x: f64) -> f64 {
        (self.drift)(i, x)
    }

    pub fn diffusion(&self, i: usize, x: f64) -> f64 {
        (self.diffusion)(i, x)
    }

    pub fn drift_fn(&self) -> &LevelFn {
        &self.drift
    }

    pub fn diffusion_fn(&self) -> &LevelFn {
        &self.diffusion
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }
}

/// `Λ^G(x)` together with its classified killing rates and the discount rate.
///
/// `base` is a subintensity matrix whose row defect at `(i, x)` is exactly
/// `kill_plus(i, x) + kill_minus(i, x)`. Discounting at rate `q` acts only on
/// premium-paying states and is applied on top by [`KilledGenerator::effective`].
#[derive(Clone)]
pub struct KilledGenerator {
    base: LevelDependentGenerator,
    kill_plus: Arc<dyn Fn(usize, f64, Side) -> f64 + Send + Sync>,
    kill_minus: Arc<dyn Fn(usize, f64, Side) -> f64 + Send + Sync>,
    kill_bound: f64,
    premium: Arc<Vec<bool>>,
    discount: f64,
}

impl fmt::Debug for KilledGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KilledGenerator")
            .field("base", &self.base)
            .field("kill_bound", &self.kill_bound)
            .field("discount", &self.discount)
            .finish_non_exhaustive()
    }
}

impl KilledGenerator {
    pub fn new(
        base: LevelDependentGenerator,
        partition: &StatePartition,
        kill_plus: impl Fn(usize, f64, Side) -> f64 + Send + Sync + 'static,
        kill_minus: impl Fn(usize, f64, Side) -> f64 + Send + Sync + 'static,
        kill_bound: f64,
    ) -> Result<Self> {
        if partition.len() != base.dim() {
            return usage("partition and generator dimensions differ");
        }
        Ok(KilledGenerator {
            base,
            kill_plus: Arc::new(kill_plus),
            kill_minus: Arc::new(kill_minus),
            kill_bound,
            premium: Arc::new((0..partition.len()).map(|i| partition.is_premium(i)).collect()),
            discount: 0.0,
        })
    }

    /// A killed generator with no killing at all.
    pub fn unkilled(base: LevelDependentGenerator, partition: &StatePartition) -> Result<Self> {
        Self::new(base, partition, |_, _, _| 0.0, |_, _, _| 0.0, 0.0)
    }

    pub fn with_discount(mut self, q: f64) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return usage(format!("discount rate must be finite and >= 0, got {q}"));
        }
        self.discount = q;
        Ok(self)
    }

    pub fn base(&self) -> &LevelDependentGenerator {
        &self.base
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn kill_bound(&self) -> f64 {
        self.kill_bound
    }

    pub fn is_premium(&self, i: usize) -> bool {
        self.premium[i]
    }

    pub fn kill_plus(&self, i: usize, x: f64, side: Side) -> f64 {
        (self.kill_plus)(i, x, side)
    }

    pub fn kill_minus(&self, i: usize, x: f64, side: Side) -> f64 {
        (self.kill_minus)(i, x, side)
    }

    /// `Λ^{G,q}(x)`: the base generator with `q` subtracted on premium diagonals.
    pub fn effective(&self, x: f64, side: Side) -> Result<Matrix> {
        let mut m = self.base.at_side(x, side)?;
        for i in 0..m.nrows() {
            if self.premium[i] {
                m[(i, i)] -= self.discount;
            }
        }
        Ok(m)
    }

    /// Row defect of `Λ^{G,q}(x)` at state `i`.
    pub fn defect(&self, i: usize, x: f64, side: Side) -> Result<f64> {
        let m = self.effective(x, side)?;
        Ok(-m.row(i).sum())
    }

    /// Sum of classified killing and discounting at `(i, x)`.
    pub fn expected_defect(&self, i: usize, x: f64, side: Side) -> f64 {
        let q = if self.premium[i] { self.discount } else { 0.0 };
        self.kill_plus(i, x, side) + self.kill_minus(i, x, side) + q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub state: Option<usize>,
    pub level: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub levels_checked: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, rule: &str, state: Option<usize>, level: Option<f64>, detail: String) {
        self.violations.push(Violation {
            rule: rule.to_string(),
            state,
            level,
            detail,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return writeln!(f, "ok: {} levels checked, no violations", self.levels_checked);
        }
        writeln!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            write!(f, "  {}", v.rule)?;
            if let Some(s) = v.state {
                write!(f, " [state {s}]")?;
            }
            if let Some(x) = v.level {
                write!(f, " [x={x}]")?;
            }
            writeln!(f, ": {}", v.detail)?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of `spec` on the sampled levels.
///
/// The report lists each violated rule with the offending state and level.
/// An empty or unsorted grid is a usage error.
pub fn validate_model(spec: &RiskModelSpec, sample_grid: &[f64]) -> Result<ValidationReport> {
    if sample_grid.is_empty() {
        return usage("validation grid must be non-empty");
    }
    if sample_grid.iter().any(|x| !x.is_finite()) {
        return usage("validation grid must be finite");
    }
    if sample_grid.windows(2).any(|w| w[1] < w[0]) {
        return usage("validation grid must be sorted");
    }
    let mut report = ValidationReport {
        levels_checked: sample_grid.len(),
        ..Default::default()
    };
    let p = spec.partition();
    let g = spec.generator();
    let n = p.len();
    let tol = STRUCTURAL_TOL;

    for &x in sample_grid {
        let sides: &[Side] = if x == 0.0 {
            &[Side::Negative, Side::NonNegative]
        } else if x < 0.0 {
            &[Side::Negative]
        } else {
            &[Side::NonNegative]
        };
        for &side in sides {
            let m = g.raw(x, side);
            if m.nrows() != n || m.ncols() != n {
                report.push(
                    "generator shape",
                    None,
                    Some(x),
                    format!("{}x{} instead of {n}x{n}", m.nrows(), m.ncols()),
                );
                continue;
            }
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    let v = m[(i, j)];
                    row += v;
                    if !v.is_finite() {
                        report.push("non-finite entry", Some(i), Some(x), format!("({i},{j}) = {v}"));
                        continue;
                    }
                    if i != j && v < -1e-12 {
                        report.push(
                            "negative off-diagonal",
                            Some(i),
                            Some(x),
                            format!("({i},{j}) = {v}"),
                        );
                    }
                    if v.abs() > g.bound() * (1.0 + tol) + tol {
                        report.push(
                            "exceeds declared bound",
                            Some(i),
                            Some(x),
                            format!("|({i},{j})| = {} > {}", v.abs(), g.bound()),
                        );
                    }
                    if i != j && p.is_structural_zero(i, j) && v.abs() > tol {
                        report.push(
                            "structural zero violated",
                            Some(i),
                            Some(x),
                            format!("S^+/S^- cross entry ({i},{j}) = {v}"),
                        );
                    }
                }
                if row > tol {
                    report.push("row sum positive", Some(i), Some(x), format!("row sum {row}"));
                }
            }
        }
        for i in 0..n {
            let mu = spec.drift(i, x);
            let sigma = spec.diffusion(i, x);
            if !mu.is_finite() || !sigma.is_finite() {
                report.push(
                    "non-finite coefficient",
                    Some(i),
                    Some(x),
                    format!("drift {mu}, diffusion {sigma}"),
                );
                continue;
            }
            if sigma < 0.0 {
                report.push("negative diffusion", Some(i), Some(x), format!("sigma = {sigma}"));
            }
            match p.class_of(i) {
                StateClass::Down => {
                    if sigma != 0.0 {
                        report.push(
                            "S^- diffusion must vanish",
                            Some(i),
                            Some(x),
                            format!("sigma = {sigma}"),
                        );
                    }
                    if !(mu < 0.0) {
                        report.push(
                            "S^- drift must be negative",
                            Some(i),
                            Some(x),
                            format!("mu = {mu}"),
                        );
                    }
                }
                StateClass::Up => {
                    if sigma != 0.0 {
                        report.push(
                            "S^+ diffusion must vanish",
                            Some(i),
                            Some(x),
                            format!("sigma = {sigma}"),
                        );
                    }
                    if !(mu > 0.0) {
                        report.push(
                            "S^+ drift must be positive",
                            Some(i),
                            Some(x),
                            format!("mu = {mu}"),
                        );
                    }
                }
                StateClass::Premium => {}
            }
        }
    }

    let lip = spec.lipschitz_bound();
    if lip.is_finite() {
        for w in sample_grid.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            let dx = x1 - x0;
            if dx <= 0.0 {
                continue;
            }
            for i in 0..n {
                for (name, f) in [("drift", spec.drift_fn()), ("diffusion", spec.diffusion_fn())] {
                    let (a, b) = (f(i, x0), f(i, x1));
                    if !(a.is_finite() && b.is_finite()) {
                        continue;
                    }
                    let slope = (b - a).abs() / dx;
                    if slope > lip * (1.0 + 1e-9) + tol / dx {
                        report.push(
                            "Lipschitz bound exceeded",
                            Some(i),
                            Some(x0),
                            format!("{name} slope {slope} on [{x0}, {x1}] > {lip}"),
                        );
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Checks that `killed`'s row defects decompose into its classified kill
/// rates plus discounting, at every level in `grid`.
pub fn check_defect_decomposition(
    killed: &KilledGenerator,
    partition: &StatePartition,
    grid: &[f64],
) -> Result<ValidationReport> {
    let mut report = ValidationReport {
        levels_checked: grid.len(),
        ..Default::default()
    };
    for &x in grid {
        let side = Side::of(x);
        let m = killed.effective(x, side)?;
        for i in 0..m.nrows() {
            let defect = -m.row(i).sum();
            let expected = killed.expected_defect(i, x, side);
            if (defect - expected).abs() > STRUCTURAL_TOL * (1.0 + expected.abs()) {
                report.push(
                    "defect decomposition",
                    Some(i),
                    Some(x),
                    format!("row defect {defect} != classified kills {expected}"),
                );
            }
            if !partition.is_premium(i)
                && (killed.kill_plus(i, x, side) != 0.0 || killed.kill_minus(i, x, side) != 0.0)
            {
                report.push(
                    "killing outside operational time",
                    Some(i),
                    Some(x),
                    "kill rate nonzero for a non-premium state".into(),
                );
            }
        }
    }
    Ok(report)
}

/// `n` evenly spaced levels on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}
