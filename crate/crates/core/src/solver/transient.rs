use nalgebra::DVector;

use crate::error::{usage, Error, Result};
use crate::model::Matrix;

use super::chain::LevelChain;
use super::descriptors::{band_occupation, DescriptorSet, DescriptorValues, Method, Provenance};

/// Condition estimates above this are logged as warnings.
pub const CONDITION_WARNING: f64 = 1e12;

const REFINEMENT_STEPS: usize = 2;

/// Block-tridiagonal factorization of `A' = (-Q_T)'`, the transposed
/// transient block of a level chain. Off-diagonal blocks are diagonal.
pub struct TransposedFactor {
    b: usize,
    diag: Vec<Matrix>,
    /// `sub[k]`: diagonal of block `(k, k-1)`.
    sub: Vec<DVector<f64>>,
    /// `sup[k]`: diagonal of block `(k, k+1)`.
    sup: Vec<DVector<f64>>,
    inv: Vec<Matrix>,
}

impl TransposedFactor {
    pub fn new(chain: &LevelChain) -> Result<Self> {
        let b = chain.n_states;
        let nb = chain.n_nodes();
        let diag: Vec<Matrix> = (0..nb).map(|k| -chain.diagonal_block(k).transpose()).collect();
        let sub: Vec<DVector<f64>> = (0..nb)
            .map(|k| {
                if k == 0 {
                    DVector::zeros(b)
                } else {
                    DVector::from_fn(b, |s, _| -chain.up[chain.index(s, k - 1)])
                }
            })
            .collect();
        let sup: Vec<DVector<f64>> = (0..nb)
            .map(|k| {
                if k + 1 == nb {
                    DVector::zeros(b)
                } else {
                    DVector::from_fn(b, |s, _| -chain.down[chain.index(s, k + 1)])
                }
            })
            .collect();
        let mut inv: Vec<Matrix> = Vec::with_capacity(nb);
        for k in 0..nb {
            let mut m = diag[k].clone();
            if k > 0 {
                // m -= L_k M_{k-1}^{-1} U_{k-1}
                let prev = &inv[k - 1];
                for r in 0..b {
                    for c in 0..b {
                        m[(r, c)] -= sub[k][r] * prev[(r, c)] * sup[k - 1][c];
                    }
                }
            }
            let mi = m.clone().lu().try_inverse().ok_or_else(|| {
                Error::SingularTransient(format!(
                    "block {k} of the transient generator is singular: the chain has no reachable absorption from this level"
                ))
            })?;
            if mi.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularTransient(format!("block {k} inverse is not finite")));
            }
            inv.push(mi);
        }
        Ok(TransposedFactor { b, diag, sub, sup, inv })
    }

    fn blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (b, nb) = (self.b, self.blocks());
        let mut g: Vec<DVector<f64>> = Vec::with_capacity(nb);
        for k in 0..nb {
            let mut v = DVector::from_column_slice(&rhs[k * b..(k + 1) * b]);
            if k > 0 {
                let t = &self.inv[k - 1] * &g[k - 1];
                v -= self.sub[k].component_mul(&t);
            }
            g.push(v);
        }
        let mut x = vec![DVector::zeros(b); nb];
        for k in (0..nb).rev() {
            let mut v = g[k].clone();
            if k + 1 < nb {
                v -= self.sup[k].component_mul(&x[k + 1]);
            }
            x[k] = &self.inv[k] * v;
        }
        x.into_iter().flat_map(|v| v.iter().copied().collect::<Vec<_>>()).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (b, nb) = (self.b, self.blocks());
        let mut y = vec![0.0; b * nb];
        for k in 0..nb {
            let xk = DVector::from_column_slice(&x[k * b..(k + 1) * b]);
            let mut v = &self.diag[k] * xk;
            if k > 0 {
                v += self.sub[k].component_mul(&DVector::from_column_slice(&x[(k - 1) * b..k * b]));
            }
            if k + 1 < nb {
                v += self.sup[k].component_mul(&DVector::from_column_slice(&x[(k + 1) * b..(k + 2) * b]));
            }
            y[k * b..(k + 1) * b].copy_from_slice(v.as_slice());
        }
        y
    }

    /// Solve with iterative refinement.
    pub fn solve_refined(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = self.solve(rhs);
        for _ in 0..REFINEMENT_STEPS {
            let ax = self.apply(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(a, b)| a - b).collect();
            let dx = self.solve(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        x
    }

    /// `‖A‖₁ ‖A⁻¹‖₁`, exact for M-matrices (whose inverse is non-negative).
    pub fn condition_estimate(&self) -> f64 {
        let (b, nb) = (self.b, self.blocks());
        let mut norm_a = 0.0_f64;
        // column sums of A = row sums of A'
        for k in 0..nb {
            for r in 0..b {
                let mut s: f64 = self.diag[k].row(r).iter().map(|v| v.abs()).sum();
                s += self.sub[k][r].abs() + self.sup[k][r].abs();
                norm_a = norm_a.max(s);
            }
        }
        let z = self.solve(&vec![1.0; b * nb]);
        let norm_inv = z.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        norm_a * norm_inv
    }
}

/// Occupation times and absorption masses of the level chain started at
/// level `u` in base state `i0`.
pub fn solve_transient(chain: &LevelChain, u: f64, i0: usize, bands: &[(f64, f64)]) -> Result<DescriptorSet> {
    let grid = &chain.grid;
    for &(a, b) in bands {
        if !(a < b && a >= grid.lower() && b <= grid.upper()) {
            return usage(format!("band ({a}, {b}) must lie inside [{}, {}]", grid.lower(), grid.upper()));
        }
    }
    let factor = TransposedFactor::new(chain)?;
    let rhs = start_vector(chain, u, i0)?;
    let x = factor.solve_refined(&rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularTransient("occupation solve produced non-finite values".into()));
    }
    let cond = factor.condition_estimate();
    if cond > CONDITION_WARNING {
        log::warn!("transient block is ill-conditioned (estimate {cond:.3e})");
    }
    let occupation: Vec<Vec<f64>> = (0..chain.n_states)
        .map(|s| (0..chain.n_nodes()).map(|k| x[chain.index(s, k)]).collect())
        .collect();
    let mut ds = assemble(chain, u, i0, bands, occupation, Method::Transient, Some(cond));
    if cond > CONDITION_WARNING {
        ds.warnings.push(format!("ill-conditioned transient block (estimate {cond:.3e})"));
    }
    Ok(ds)
}

pub(crate) fn start_vector(chain: &LevelChain, u: f64, i0: usize) -> Result<Vec<f64>> {
    let init = chain.grid.aug.initial_distribution(i0)?;
    let mut rhs = vec![0.0; chain.n_transient()];
    for (k, w) in chain.start_weights(u)? {
        for (s, p) in init.iter().enumerate() {
            rhs[chain.index(s, k)] += w * p;
        }
    }
    Ok(rhs)
}

/// Turns per-(state, node) expected times into a descriptor set: every
/// absorption mass is a time multiplied by the matching exit rate, then
/// gathered per bin.
pub(crate) fn assemble(
    chain: &LevelChain,
    u: f64,
    i0: usize,
    bands: &[(f64, f64)],
    occupation: Vec<Vec<f64>>,
    method: Method,
    cond: Option<f64>,
) -> DescriptorSet {
    let grid = &chain.grid;
    let (b, nb, nn) = (chain.n_states, chain.n_bins, chain.n_nodes());
    let mut v = DescriptorValues::zeros(b, nb, bands.len());
    for s in 0..b {
        v.lower[s] = occupation[s][0] * chain.down[chain.index(s, 0)];
        v.upper[s] = occupation[s][nn - 1] * chain.up[chain.index(s, nn - 1)];
        for node in 0..nn {
            let (i, k) = (chain.index(s, node), chain.bin_of_node(node));
            let t = occupation[s][node];
            v.kill_plus[s][k] += t * chain.kill_plus[i];
            v.kill_minus[s][k] += t * chain.kill_minus[i];
            v.discounted += t * chain.discount[i];
            v.occupation[s][k] += t;
        }
    }
    v.bands = band_occupation(&chain.cell_edges(), &occupation, bands);
    DescriptorSet {
        provenance: Provenance {
            method,
            ruin: grid.aug.kind.name().to_string(),
            u,
            i0,
            c: grid.lower(),
            d: grid.upper(),
            q: grid.discount,
            n_bins: nb,
            cells: Some(chain.cells),
            eps: grid.eps,
            condition_estimate: cond,
            n_paths: None,
            step: None,
            seed: None,
        },
        states: (0..b).map(|s| grid.aug.state_name(s)).collect(),
        edges: grid.edges.clone(),
        band_limits: bands.to_vec(),
        values: v,
        std_errors: None,
        warnings: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{build_erlang_horizon, build_infinite_horizon, build_poissonian};
    use crate::grid::discretize;
    use crate::matrixkit::ErlangClock;
    use crate::models::{brownian, deterministic};
    use crate::solver::chain::build_level_chain;

    fn chain_for(aug: crate::augment::AugmentedModel, c: f64, d: f64, n: usize) -> LevelChain {
        build_level_chain(&discretize(&aug, c, d, n, 0.0).unwrap()).unwrap()
    }

    #[test]
    fn brownian_exit_probability() {
        let aug = build_infinite_horizon(&brownian(0.0, 1.0).unwrap()).unwrap();
        let ds = solve_transient(&chain_for(aug, 0.0, 2.0, 200), 1.0, 0, &[]).unwrap();
        assert!((ds.summary().psi_lower - 0.5).abs() < 1e-9);
        assert!((ds.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn brownian_with_drift_matches_scale_function() {
        let (mu, sigma, u, d) = (0.4, 1.2, 0.7, 2.0);
        let aug = build_infinite_horizon(&brownian(mu, sigma).unwrap()).unwrap();
        let ds = solve_transient(&chain_for(aug, 0.0, d, 400), u, 0, &[]).unwrap();
        let k = 2.0 * mu / (sigma * sigma);
        let exact = ((-k * u).exp() - (-k * d).exp()) / (1.0 - (-k * d).exp());
        assert!((ds.summary().psi_lower - exact).abs() < 1e-4, "{} vs {exact}", ds.summary().psi_lower);
    }

    #[test]
    fn unit_drift_occupation() {
        let aug = build_infinite_horizon(&deterministic(1.0).unwrap()).unwrap();
        let ds = solve_transient(&chain_for(aug, 0.0, 1.0, 100), 0.0, 0, &[(0.25, 0.75)]).unwrap();
        assert!((ds.values.bands[0][0] - 0.5).abs() < 1e-9);
        assert!((ds.summary().upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_horizon_before_deterministic_ruin() {
        let aug = build_erlang_horizon(&deterministic(-1.0).unwrap(), ErlangClock::new(1, 1.0).unwrap()).unwrap();
        let ds = solve_transient(&chain_for(aug, 0.0, 2.0, 2000), 1.0, 0, &[]).unwrap();
        assert!((ds.summary().psi_lower - (-1.0f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn poissonian_deficit_density() {
        let aug = build_poissonian(&deterministic(-1.0).unwrap(), 2.0).unwrap();
        let ds = solve_transient(&chain_for(aug, -10.0, 2.0, 2000), 1.0, 0, &[]).unwrap();
        assert!((ds.deficit_density(0.5) - 2.0 * (-1.0f64).exp()).abs() < 1e-2);
    }

    #[test]
    fn stranded_mass_is_singular() {
        let aug = build_infinite_horizon(&deterministic(0.0).unwrap()).unwrap();
        let r = solve_transient(&chain_for(aug, 0.0, 1.0, 10), 0.5, 0, &[]);
        assert!(matches!(r, Err(Error::SingularTransient(_))));
    }
}
