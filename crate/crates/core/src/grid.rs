//! Piecewise-constant approximation of an augmented model on `[c, d]`.

use serde::Serialize;

use crate::augment::AugmentedModel;
use crate::error::{usage, Result};
use crate::model::{Matrix, Side};

/// Sample points per bin for the sup-norm diagnostics.
const DIAGNOSTIC_SAMPLES: usize = 8;

/// Measured sup-norm distances between the model coefficients and their
/// piecewise-constant versions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ApproximationErrors {
    pub drift: f64,
    pub diffusion: f64,
    pub generator: f64,
}

#[derive(Debug, Clone)]
pub struct GridModel {
    pub aug: AugmentedModel,
    pub edges: Vec<f64>,
    pub eps: f64,
    pub discount: f64,
    /// `drift[k][s]` on bin `k`.
    pub drift: Vec<Vec<f64>>,
    /// Squared volatility per bin and state.
    pub variance: Vec<Vec<f64>>,
    /// `Λ̂` per bin, before discounting.
    pub generator: Vec<Matrix>,
    pub kill_plus: Vec<Vec<f64>>,
    pub kill_minus: Vec<Vec<f64>>,
    pub premium: Vec<bool>,
    pub errors: ApproximationErrors,
}

impl GridModel {
    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn n_states(&self) -> usize {
        self.premium.len()
    }

    pub fn lower(&self) -> f64 {
        self.edges[0]
    }

    pub fn upper(&self) -> f64 {
        *self.edges.last().expect("at least two edges")
    }

    pub fn width(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    pub fn center(&self, k: usize) -> f64 {
        0.5 * (self.edges[k] + self.edges[k + 1])
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|k| self.center(k)).collect()
    }

    /// Index of the bin `[x_k, x_{k+1})` holding `x`; `d` maps to the last bin.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.lower() && x <= self.upper()) {
            return None;
        }
        let k = self.edges.partition_point(|e| *e <= x);
        Some(k.saturating_sub(1).min(self.n_bins() - 1))
    }

    pub fn discount_rate(&self, s: usize) -> f64 {
        if self.premium[s] {
            self.discount
        } else {
            0.0
        }
    }
}

/// Default smoothing half-width: one uniform bin.
pub fn default_eps(c: f64, d: f64, n_bins: usize) -> f64 {
    (d - c) / n_bins as f64
}

/// Uniform edges over `[c, d]` with `0` and `±eps` forced in; uniform edges
/// closer than a quarter bin to a forced one are dropped.
pub fn grid_edges(c: f64, d: f64, n_bins: usize, eps: f64) -> Result<Vec<f64>> {
    if !(c.is_finite() && d.is_finite()) {
        return usage("domain ends must be finite");
    }
    if !(c <= 0.0 && 0.0 < d) {
        return usage(format!("domain [{c}, {d}] must satisfy c <= 0 < d"));
    }
    if n_bins < 2 {
        return usage("need at least two bins");
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return usage("smoothing width must be finite and >= 0");
    }
    let h = (d - c) / n_bins as f64;
    let mut forced = vec![0.0];
    for e in [-eps, eps] {
        if eps > 0.0 && e > c && e < d {
            forced.push(e);
        }
    }
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|k| if k == n_bins { d } else { c + h * k as f64 })
        .filter(|x| {
            *x == c || *x == d || forced.iter().all(|f| (x - f).abs() >= 0.25 * h)
        })
        .collect();
    for f in forced {
        if f > c && f < d {
            edges.push(f);
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    edges.dedup();
    Ok(edges)
}

/// Blending weight of the non-negative regime at `x`, or `None` outside the
/// smoothing zone.
fn blend_weight(x: f64, eps: f64) -> Option<f64> {
    if eps > 0.0 && x > -eps && x < eps {
        Some((x + eps) / (2.0 * eps))
    } else {
        None
    }
}

pub fn discretize(aug: &AugmentedModel, c: f64, d: f64, n_bins: usize, eps: f64) -> Result<GridModel> {
    let edges = grid_edges(c, d, n_bins, eps)?;
    discretize_on(aug, edges, eps)
}

/// Discretizes on explicit edges (which must contain `0`).
pub fn discretize_on(aug: &AugmentedModel, edges: Vec<f64>, eps: f64) -> Result<GridModel> {
    if edges.len() < 3 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return usage("edges must be strictly increasing with at least two bins");
    }
    if !edges.contains(&0.0) {
        return usage("edges must contain 0");
    }
    let spec = &aug.spec;
    let killing = &aug.killing;
    let n = aug.n_states();
    let nb = edges.len() - 1;
    let mut drift = Vec::with_capacity(nb);
    let mut variance = Vec::with_capacity(nb);
    let mut generator = Vec::with_capacity(nb);
    let mut kill_plus = Vec::with_capacity(nb);
    let mut kill_minus = Vec::with_capacity(nb);

    for k in 0..nb {
        let m = 0.5 * (edges[k] + edges[k + 1]);
        drift.push((0..n).map(|s| spec.drift(s, m)).collect::<Vec<_>>());
        variance.push((0..n).map(|s| spec.diffusion(s, m).powi(2)).collect::<Vec<_>>());
        let regime = |side: Side| -> Result<(Matrix, Vec<f64>, Vec<f64>)> {
            Ok((
                killing.base().at_side(m, side)?,
                (0..n).map(|s| killing.kill_plus(s, m, side)).collect(),
                (0..n).map(|s| killing.kill_minus(s, m, side)).collect(),
            ))
        };
        let (g, kp, km) = match blend_weight(m, eps) {
            None => regime(Side::of(m))?,
            Some(w) => {
                let (gn, kpn, kmn) = regime(Side::Negative)?;
                let (gp, kpp, kmp) = regime(Side::NonNegative)?;
                let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (1.0 - w) * u + w * v).collect();
                (gn * (1.0 - w) + gp * w, mix(&kpn, &kpp), mix(&kmn, &kmp))
            }
        };
        generator.push(g);
        kill_plus.push(kp);
        kill_minus.push(km);
    }

    let premium = (0..n).map(|s| spec.partition().is_premium(s)).collect();
    let mut grid = GridModel {
        aug: aug.clone(),
        edges,
        eps,
        discount: killing.discount(),
        drift,
        variance,
        generator,
        kill_plus,
        kill_minus,
        premium,
        errors: ApproximationErrors::default(),
    };
    grid.errors = approximation_errors(&grid)?;
    Ok(grid)
}

/// Sup-norm errors of the piecewise-constant coefficients on a refined
/// sample of each bin (generator distance in max-entry norm).
pub fn approximation_errors(grid: &GridModel) -> Result<ApproximationErrors> {
    let spec = &grid.aug.spec;
    let n = grid.n_states();
    let mut e = ApproximationErrors::default();
    for k in 0..grid.n_bins() {
        let (a, b) = (grid.edges[k], grid.edges[k + 1]);
        for t in 0..DIAGNOSTIC_SAMPLES {
            let x = a + (b - a) * (t as f64 + 0.5) / DIAGNOSTIC_SAMPLES as f64;
            for s in 0..n {
                e.drift = e.drift.max((spec.drift(s, x) - grid.drift[k][s]).abs());
                e.diffusion = e.diffusion.max((spec.diffusion(s, x) - grid.variance[k][s].sqrt()).abs());
            }
            let g = grid.aug.killing.base().at(x)?;
            let diff = (g - &grid.generator[k]).abs().max();
            e.generator = e.generator.max(diff);
        }
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{build_infinite_horizon, build_poissonian};
    use crate::matrixkit::PhaseType;
    use crate::model::{LevelDependentGenerator, RiskModelSpec, StatePartition};
    use crate::models::{cramer_lundberg, deterministic};

    fn linear_drift() -> RiskModelSpec {
        let p = StatePartition::new(vec!["p".into()], vec![0], vec![], vec![]).unwrap();
        let g = LevelDependentGenerator::constant(Matrix::zeros(1, 1)).unwrap();
        RiskModelSpec::new(p, |_, x| x, |_, _| 1.0, g, 1.0).unwrap()
    }

    #[test]
    fn midpoint_values() {
        let aug = build_infinite_horizon(&linear_drift()).unwrap();
        let g = discretize(&aug, -2.0, 2.0, 4, 0.0).unwrap();
        assert_eq!(g.edges, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        let k = g.bin_of(0.3).unwrap();
        assert_eq!(k, 2);
        assert_eq!(g.drift[k][0], 0.5);
    }

    #[test]
    fn edges_tile_domain_and_contain_forced_points() {
        for (c, d, n, eps) in [(0.0, 60.0, 4000, 0.015), (-10.0, 10.0, 7, 0.8), (-1.0, 3.0, 10, 0.0), (-3.0, 5.0, 50, 0.16)] {
            let e = grid_edges(c, d, n, eps).unwrap();
            assert_eq!(e[0], c);
            assert_eq!(*e.last().unwrap(), d);
            assert!(e.contains(&0.0));
            if eps > 0.0 && -eps > c {
                assert!(e.contains(&-eps) && e.contains(&eps));
            }
            assert!(e.windows(2).all(|w| w[1] > w[0]));
            let h = (d - c) / n as f64;
            assert!(e.windows(2).all(|w| w[1] - w[0] >= 0.25 * h - 1e-12));
        }
        assert!(grid_edges(1.0, 3.0, 10, 0.0).is_err());
        assert!(grid_edges(-1.0, 0.0, 10, 0.0).is_err());
    }

    #[test]
    fn level_independent_generator_is_constant_across_bins() {
        let aug = build_infinite_horizon(&cramer_lundberg(1.0, 1.0, &PhaseType::exponential(2.0).unwrap()).unwrap()).unwrap();
        let g = discretize(&aug, -1.0, 5.0, 30, 0.0).unwrap();
        assert!(g.generator.iter().all(|m| *m == g.generator[0]));
        assert_eq!(g.errors.generator, 0.0);
        assert!(g.variance.iter().all(|v| v[1] == 0.0));
    }

    #[test]
    fn poissonian_indicator_without_smoothing() {
        let aug = build_poissonian(&deterministic(-1.0).unwrap(), 2.0).unwrap();
        let g = discretize(&aug, -10.0, 2.0, 60, 0.0).unwrap();
        for k in 0..g.n_bins() {
            let want = if g.center(k) < 0.0 { 2.0 } else { 0.0 };
            assert_eq!(g.kill_minus[k][0], want);
        }
    }

    #[test]
    fn smoothing_interpolates_regimes() {
        let aug = build_poissonian(&deterministic(-1.0).unwrap(), 2.0).unwrap();
        let g = discretize(&aug, -1.0, 1.0, 20, 0.1).unwrap();
        let inner = g.bin_of(-0.05).unwrap();
        assert!((g.kill_minus[inner][0] - 2.0 * 0.75).abs() < 1e-12);
        let inner = g.bin_of(0.05).unwrap();
        assert!((g.kill_minus[inner][0] - 2.0 * 0.25).abs() < 1e-12);
        assert!((g.generator[inner][(0, 0)] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn refinement_does_not_increase_errors() {
        let aug = build_infinite_horizon(&linear_drift()).unwrap();
        let mut prev = f64::INFINITY;
        for n in [10, 20, 40, 80] {
            let g = discretize(&aug, -2.0, 2.0, n, 0.0).unwrap();
            assert!(g.errors.drift <= prev);
            prev = g.errors.drift;
        }
    }
}
