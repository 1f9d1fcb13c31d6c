//! Jump-size intensities of a hybrid risk process.
//!
//! A downward jump from level `x` is a sojourn of the environment in `S^-`.
//! Measured in accumulated jump size `y` rather than sojourn time, the
//! environment inside `S^-` has generator
//! `T^-(y; x) = Δ_μ(x - y) Λ_{S^-S^-}(x - y)` with `Δ_μ(z) = diag(1/|μ(k, z)|)`,
//! so the jump intensity density is
//! `e_i' Λ_{S^pS^-}(x) P(0, y) Δ_μ(x - y) Λ_{S^-S^p}(x - y) e_j` where `P` is the
//! product integral of `T^-`. Upward jumps mirror this with `S^+` and levels
//! `x + y`.

use std::sync::Arc;

use crate::error::{usage, Error, Result};
use crate::matrixkit::product_integral_at;
use crate::model::{Matrix, RiskModelSpec, Side};

/// Drifts smaller than this in magnitude make the kernel singular.
pub const DRIFT_FLOOR: f64 = 1e-12;

/// Default RK4 step (in jump-size units) for the product integral.
pub const DEFAULT_STEP: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpDirection {
    Down,
    Up,
}

/// The ingredients of the jump-size law from a fixed starting level.
pub struct JumpKernel<'a> {
    spec: &'a RiskModelSpec,
    direction: JumpDirection,
    from_level: f64,
    premium: Vec<usize>,
    jump_states: Vec<usize>,
    entry: Matrix,
}

impl<'a> JumpKernel<'a> {
    pub fn new(spec: &'a RiskModelSpec, direction: JumpDirection, from_level: f64) -> Result<Self> {
        let p = spec.partition();
        let jump_states = match direction {
            JumpDirection::Down => p.down().to_vec(),
            JumpDirection::Up => p.up().to_vec(),
        };
        if jump_states.is_empty() {
            return usage(format!("model has no {direction:?} jump states"));
        }
        let premium = p.premium().to_vec();
        let lam = spec.generator().at(from_level)?;
        let entry = Matrix::from_fn(premium.len(), jump_states.len(), |r, c| lam[(premium[r], jump_states[c])]);
        Ok(JumpKernel {
            spec,
            direction,
            from_level,
            premium,
            jump_states,
            entry,
        })
    }

    pub fn level_at(&self, y: f64) -> f64 {
        match self.direction {
            JumpDirection::Down => self.from_level - y,
            JumpDirection::Up => self.from_level + y,
        }
    }

    /// `Λ_{S^p S^∓}(x)` restricted to premium rows and jump columns.
    pub fn entry_block(&self) -> &Matrix {
        &self.entry
    }

    pub fn premium_states(&self) -> &[usize] {
        &self.premium
    }

    pub fn jump_states(&self) -> &[usize] {
        &self.jump_states
    }

    /// Diagonal of `Δ_μ` at accumulated size `y`.
    pub fn inverse_speeds(&self, y: f64) -> Result<Vec<f64>> {
        let z = self.level_at(y);
        self.jump_states
            .iter()
            .map(|&k| {
                let mu = self.spec.drift(k, z);
                let ok = match self.direction {
                    JumpDirection::Down => mu < 0.0,
                    JumpDirection::Up => mu > 0.0,
                };
                if !ok || mu.abs() < DRIFT_FLOOR || mu.is_nan() {
                    Err(Error::Singularity(format!(
                        "drift of jump state {k} is {mu} at level {z}; jump kernels need it bounded away from zero"
                    )))
                } else {
                    Ok(1.0 / mu.abs())
                }
            })
            .collect()
    }

    fn generator_at(&self, y: f64) -> Result<Matrix> {
        let z = self.level_at(y);
        self.spec.generator().at_side(z, Side::of(z))
    }

    /// `Δ_μ(z) Λ_{S^∓S^∓}(z)` at `z = x ∓ y`.
    pub fn sojourn_generator(&self, y: f64) -> Result<Matrix> {
        let inv = self.inverse_speeds(y)?;
        let lam = self.generator_at(y)?;
        let js = &self.jump_states;
        Ok(Matrix::from_fn(js.len(), js.len(), |r, c| inv[r] * lam[(js[r], js[c])]))
    }

    /// `Δ_μ(z) Λ_{S^∓S^p}(z)` at `z = x ∓ y`.
    pub fn exit_block(&self, y: f64) -> Result<Matrix> {
        let inv = self.inverse_speeds(y)?;
        let lam = self.generator_at(y)?;
        let (js, ps) = (&self.jump_states, &self.premium);
        Ok(Matrix::from_fn(js.len(), ps.len(), |r, c| inv[r] * lam[(js[r], ps[c])]))
    }

    /// Matrix of intensity densities (premium × premium) at every point of
    /// `y_grid`, integrating with RK4 steps no longer than `max_step`.
    pub fn densities(&self, y_grid: &[f64], max_step: f64) -> Result<Vec<Matrix>> {
        if y_grid.iter().any(|y| !(*y > 0.0)) || y_grid.windows(2).any(|w| w[1] <= w[0]) {
            return usage("jump-size grid must be positive and strictly increasing");
        }
        let props = product_integral_at(|y| self.sojourn_generator(y), self.jump_states.len(), y_grid, max_step)?;
        y_grid
            .iter()
            .zip(props)
            .map(|(&y, p)| Ok(&self.entry * p * self.exit_block(y)?))
            .collect()
    }
}

/// Intensity density of a downward jump of size `y` from level `x`, starting
/// in premium state `i` and landing in premium state `j`, for each `y` in
/// `y_grid`.
pub fn jump_intensity_density(spec: &RiskModelSpec, x: f64, i: usize, j: usize, y_grid: &[f64]) -> Result<Vec<f64>> {
    directed_intensity_density(spec, JumpDirection::Down, x, i, j, y_grid, DEFAULT_STEP)
}

pub fn directed_intensity_density(
    spec: &RiskModelSpec,
    direction: JumpDirection,
    x: f64,
    i: usize,
    j: usize,
    y_grid: &[f64],
    max_step: f64,
) -> Result<Vec<f64>> {
    let kernel = JumpKernel::new(spec, direction, x)?;
    let (ri, rj) = premium_positions(&kernel, i, j)?;
    Ok(kernel.densities(y_grid, max_step)?.iter().map(|m| m[(ri, rj)]).collect())
}

fn premium_positions(kernel: &JumpKernel<'_>, i: usize, j: usize) -> Result<(usize, usize)> {
    let pos = |s: usize| {
        kernel
            .premium_states()
            .iter()
            .position(|&p| p == s)
            .ok_or_else(|| Error::Usage(format!("state {s} is not a premium-paying state")))
    };
    Ok((pos(i)?, pos(j)?))
}

/// Jump-size density from premium state `i`, summed over landing states, on
/// an automatically extended grid of spacing `dy`: integration stops once the
/// intensity of longer jumps falls below `1e-8` of the total entry rate or
/// `y` reaches `cap`.
pub fn jump_density_auto(
    spec: &RiskModelSpec,
    direction: JumpDirection,
    x: f64,
    i: usize,
    dy: f64,
    cap: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(dy > 0.0 && cap > 0.0) {
        return usage("dy and cap must be positive");
    }
    let kernel = JumpKernel::new(spec, direction, x)?;
    let (ri, _) = premium_positions(&kernel, i, i)?;
    let total_entry: f64 = kernel.entry_block().row(ri).sum();
    let m = kernel.jump_states().len();
    let mut ys = Vec::new();
    let mut dens = Vec::new();
    if total_entry == 0.0 {
        return Ok((ys, dens));
    }
    let step = dy.min(DEFAULT_STEP);
    // row vector a(y) = e_i' entry P(0, y); propagated chunk by chunk
    let mut a = kernel.entry_block().row(ri).into_owned();
    let mut y = 0.0;
    // a(y)·1 is the intensity of jumps longer than y
    while y < cap && a.sum() > 1e-8 * total_entry {
        let next = (y + dy).min(cap);
        let shift = y;
        let p = product_integral_at(|s| kernel.sojourn_generator(shift + s), m, &[next - y], step)?.remove(0);
        a = &a * p;
        let d = (&a * kernel.exit_block(next)?).sum();
        y = next;
        ys.push(y);
        dens.push(d);
    }
    Ok((ys, dens))
}

pub type DriftFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Linear accumulation drift `μ^-(u) = -a - b·u`; its jump-size hazard from
/// level `x` is `1/(a + b(x - y))`, giving matrix-Pareto tails.
pub fn pareto_drift(a: f64, b: f64) -> Result<DriftFn> {
    if !(a > 0.0 && b > 0.0) {
        return usage("pareto_drift needs a > 0 and b > 0");
    }
    Ok(Arc::new(move |u| -a - b * u))
}

/// Hazard of the Pareto-type kernel at accumulated size `y` from level `x`.
pub fn pareto_rate(a: f64, b: f64, x: f64, y: f64) -> f64 {
    1.0 / (a + b * (x - y))
}

/// Power accumulation drift `μ^-(u) = -1/(β |u|^{β-1})`, giving a Weibull
/// hazard `β (x - y)^{β-1}` in the remaining distance. At `u = 0` with
/// `β > 1` the drift is infinite, i.e. the hazard vanishes.
pub fn weibull_drift(beta: f64) -> Result<DriftFn> {
    if !(beta > 0.0) {
        return usage("weibull_drift needs beta > 0");
    }
    Ok(Arc::new(move |u: f64| -1.0 / (beta * u.abs().powf(beta - 1.0))))
}

pub fn weibull_rate(beta: f64, x: f64, y: f64) -> f64 {
    beta * (x - y).abs().powf(beta - 1.0)
}
