use crate::error::{usage, Result};
use crate::grid::GridModel;
use crate::model::Matrix;

/// Transport cells per bin unless stated otherwise.
pub const DEFAULT_CELLS_PER_BIN: usize = 8;

/// Finite CTMC on `(state, node)` pairs plus absorbing accumulators.
///
/// Every bin of the grid is split into `cells` equal cells sharing the bin's
/// coefficients; cell centers are the nodes. Level moves go to adjacent nodes
/// only; the outermost nodes move to `∂_c` and `∂_d`, placed at the domain
/// ends.
#[derive(Debug, Clone)]
pub struct LevelChain {
    pub grid: GridModel,
    pub cells: usize,
    /// Number of environment states `b`.
    pub n_states: usize,
    pub n_bins: usize,
    pub nodes: Vec<f64>,
    /// Rate of a move to the next node up, indexed `node * b + s`.
    pub up: Vec<f64>,
    /// Rate of a move to the next node down (or `∂_c` from node 0).
    pub down: Vec<f64>,
    pub kill_plus: Vec<f64>,
    pub kill_minus: Vec<f64>,
    pub discount: Vec<f64>,
}

impl LevelChain {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn index(&self, s: usize, node: usize) -> usize {
        node * self.n_states + s
    }

    pub fn bin_of_node(&self, node: usize) -> usize {
        node / self.cells
    }

    pub fn n_transient(&self) -> usize {
        self.n_states * self.n_nodes()
    }

    /// `Λ̂` of the node's bin with the level moves and discounting on the
    /// diagonal: the in-node block of the transient generator.
    pub fn diagonal_block(&self, node: usize) -> Matrix {
        let mut m = self.grid.generator[self.bin_of_node(node)].clone();
        for s in 0..self.n_states {
            let i = self.index(s, node);
            m[(s, s)] -= self.up[i] + self.down[i] + self.discount[i];
        }
        m
    }

    /// Row sum of the generator including all accumulator columns.
    pub fn row_sum(&self, s: usize, node: usize) -> f64 {
        let i = self.index(s, node);
        self.diagonal_block(node).row(s).sum()
            + self.up[i]
            + self.down[i]
            + self.kill_plus[i]
            + self.kill_minus[i]
            + self.discount[i]
    }

    /// Cell boundaries, `n_nodes + 1` of them.
    pub fn cell_edges(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut e: Vec<f64> = (0..self.n_bins)
            .flat_map(|k| (0..self.cells).map(move |j| g.edges[k] + g.width(k) * j as f64 / self.cells as f64))
            .collect();
        e.push(g.upper());
        e
    }

    /// Node of the level `x`.
    pub fn node_of(&self, x: f64) -> Option<usize> {
        let k = self.grid.bin_of(x)?;
        let (a, w) = (self.grid.edges[k], self.grid.width(k));
        let j = (((x - a) / w) * self.cells as f64).floor() as usize;
        Some(k * self.cells + j.min(self.cells - 1))
    }

    /// Start mass over nodes: `u` is split linearly between the two nearest
    /// node centers (all of it to the outer node beyond the outermost ones).
    pub fn start_weights(&self, u: f64) -> Result<Vec<(usize, f64)>> {
        let (lo, hi) = (self.grid.lower(), self.grid.upper());
        if !(u >= lo && u < hi) {
            return usage(format!("start level {u} outside [{lo}, {hi})"));
        }
        let n = self.n_nodes();
        if u <= self.nodes[0] {
            return Ok(vec![(0, 1.0)]);
        }
        if u >= self.nodes[n - 1] {
            return Ok(vec![(n - 1, 1.0)]);
        }
        let k = self.nodes.partition_point(|c| *c <= u) - 1;
        let (a, b) = (self.nodes[k], self.nodes[k + 1]);
        let w = (u - a) / (b - a);
        Ok(vec![(k, 1.0 - w), (k + 1, w)])
    }
}

/// Jump rates `(up, down)` matching drift `mu` and variance `var` over
/// spacings `dm` (below) and `dp` (above). The central choice is used when
/// both rates come out non-negative, otherwise the upwind one.
pub fn move_rates(mu: f64, var: f64, dm: f64, dp: f64) -> (f64, f64) {
    let span = dm + dp;
    let up = (var + mu * dm) / (dp * span);
    let down = (var - mu * dp) / (dm * span);
    if up >= 0.0 && down >= 0.0 {
        return (up, down);
    }
    (var / (dp * span) + mu.max(0.0) / dp, var / (dm * span) + (-mu).max(0.0) / dm)
}

pub fn build_level_chain(grid: &GridModel) -> Result<LevelChain> {
    build_level_chain_with(grid, DEFAULT_CELLS_PER_BIN)
}

pub fn build_level_chain_with(grid: &GridModel, cells: usize) -> Result<LevelChain> {
    if cells == 0 {
        return usage("need at least one cell per bin");
    }
    let b = grid.n_states();
    let nb = grid.n_bins();
    let nodes: Vec<f64> = (0..nb)
        .flat_map(|k| {
            let (a, w) = (grid.edges[k], grid.width(k));
            (0..cells).map(move |j| a + w * (j as f64 + 0.5) / cells as f64)
        })
        .collect();
    let nn = nodes.len();
    let mut chain = LevelChain {
        grid: grid.clone(),
        cells,
        n_states: b,
        n_bins: nb,
        nodes,
        up: vec![0.0; b * nn],
        down: vec![0.0; b * nn],
        kill_plus: vec![0.0; b * nn],
        kill_minus: vec![0.0; b * nn],
        discount: vec![0.0; b * nn],
    };
    for node in 0..nn {
        let k = node / cells;
        let x = chain.nodes[node];
        let dm = x - if node == 0 { grid.lower() } else { chain.nodes[node - 1] };
        let dp = if node + 1 == nn { grid.upper() } else { chain.nodes[node + 1] } - x;
        for s in 0..b {
            let i = node * b + s;
            let (mu, var) = (grid.drift[k][s], grid.variance[k][s]);
            if !(mu.is_finite() && var.is_finite()) {
                return usage(format!("non-finite coefficients in state {s}, bin {k}"));
            }
            let (u, d) = move_rates(mu, var, dm, dp);
            chain.up[i] = u;
            chain.down[i] = d;
            chain.kill_plus[i] = grid.kill_plus[k][s];
            chain.kill_minus[i] = grid.kill_minus[k][s];
            chain.discount[i] = grid.discount_rate(s);
        }
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{build_erlang_horizon, build_poissonian};
    use crate::grid::discretize;
    use crate::matrixkit::{ErlangClock, PhaseType};
    use crate::models::{cramer_lundberg, markov_modulated, MarkovModulated};
    use std::sync::Arc;

    #[test]
    fn pure_drift_and_pure_diffusion_rates() {
        assert_eq!(move_rates(1.0, 0.0, 0.1, 0.1), (10.0, 0.0));
        let (u, d) = move_rates(0.0, 1.0, 0.1, 0.1);
        assert!((u - 50.0).abs() < 1e-9 && (d - 50.0).abs() < 1e-9);
        let (u, d) = move_rates(-2.0, 0.0, 0.1, 0.1);
        assert_eq!((u, d), (0.0, 20.0));
    }

    #[test]
    fn rates_match_first_two_moments() {
        for (mu, var, dm, dp) in [(0.3, 1.0, 0.1, 0.05), (-0.5, 0.25, 0.2, 0.2), (0.01, 2.0, 0.05, 0.1)] {
            let (u, d) = move_rates(mu, var, dm, dp);
            assert!((u * dp - d * dm - mu).abs() < 1e-12);
            assert!((u * dp * dp + d * dm * dm - var).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_are_conservative() {
        let model = markov_modulated(&MarkovModulated {
            environment: Matrix::from_row_slice(2, 2, &[-0.5, 0.5, 1.0, -1.0]),
            premiums: vec![Arc::new(|x: f64| 1.0 + 0.1 * x), Arc::new(|x: f64| 1.5 + 0.1 * x)],
            volatilities: vec![Arc::new(|_| 0.5), Arc::new(|_| 0.5)],
            claim_rates: vec![1.0, 0.5],
            claims: vec![PhaseType::exponential(2.0).unwrap(), PhaseType::exponential(1.0).unwrap()],
            lipschitz: 0.1,
        })
        .unwrap();
        for aug in [
            build_erlang_horizon(&model, ErlangClock::new(2, 1.0).unwrap()).unwrap(),
            build_poissonian(&model, 2.0).unwrap().with_discount(0.1).unwrap(),
        ] {
            let g = discretize(&aug, -3.0, 5.0, 40, 0.2).unwrap();
            let chain = build_level_chain(&g).unwrap();
            for node in 0..chain.n_nodes() {
                for s in 0..chain.n_states {
                    assert!(chain.row_sum(s, node).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn nodes_and_start_mass() {
        let aug = build_erlang_horizon(
            &cramer_lundberg(1.0, 1.0, &PhaseType::exponential(2.0).unwrap()).unwrap(),
            ErlangClock::new(1, 1.0).unwrap(),
        )
        .unwrap();
        let g = discretize(&aug, 0.0, 1.0, 10, 0.0).unwrap();
        let chain = build_level_chain_with(&g, 1).unwrap();
        assert_eq!(chain.start_weights(0.0).unwrap(), vec![(0, 1.0)]);
        let w = chain.start_weights(0.3).unwrap();
        assert_eq!(w[0].0, 2);
        assert!((w[0].1 - 0.5).abs() < 1e-12 && (w[1].1 - 0.5).abs() < 1e-12);
        assert!(chain.start_weights(1.0).is_err());

        let chain = build_level_chain_with(&g, 4).unwrap();
        assert_eq!(chain.n_nodes(), 40);
        assert!((chain.nodes[0] - 0.0125).abs() < 1e-15);
        assert_eq!(chain.node_of(0.26), Some(10));
        assert_eq!(chain.bin_of_node(10), 2);
    }
}
