use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

use super::chain::LevelChain;
use super::descriptors::{DescriptorSet, Method};
use super::transient::assemble;

const REFINEMENT_STEPS: usize = 2;

/// Indexing of the auxiliary regenerative chain.
///
/// Layout: excursion states `(s, node)`, then holding states at `c` and `d` per
/// state, non-ruin and ruin holding states per `(s, node)`, discount holding
/// states per node, the two transit lanes (down, up) per node, and `∂_u` last.
#[derive(Debug, Clone)]
pub struct AuxChain {
    pub n_states: usize,
    pub n_nodes: usize,
    pub start_node: usize,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl AuxChain {
    pub fn excursion(&self, s: usize, k: usize) -> usize {
        k * self.n_states + s
    }
    fn block(&self) -> usize {
        self.n_states * self.n_nodes
    }
    pub fn lower(&self, s: usize) -> usize {
        self.block() + s
    }
    pub fn upper(&self, s: usize) -> usize {
        self.block() + self.n_states + s
    }
    pub fn non_ruin(&self, s: usize, k: usize) -> usize {
        self.block() + 2 * self.n_states + self.excursion(s, k)
    }
    pub fn ruin(&self, s: usize, k: usize) -> usize {
        2 * self.block() + 2 * self.n_states + self.excursion(s, k)
    }
    pub fn discount(&self, k: usize) -> usize {
        3 * self.block() + 2 * self.n_states + k
    }
    pub fn lane_down(&self, k: usize) -> usize {
        3 * self.block() + 2 * self.n_states + self.n_nodes + k
    }
    pub fn lane_up(&self, k: usize) -> usize {
        3 * self.block() + 2 * self.n_states + 2 * self.n_nodes + k
    }
    pub fn pre_start(&self) -> usize {
        3 * self.block() + 2 * self.n_states + 3 * self.n_nodes
    }
    pub fn len(&self) -> usize {
        self.pre_start() + 1
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Number of holding states (boundary, kill and discount holds).
    pub fn n_holding(&self) -> usize {
        2 * self.n_states + 2 * self.block() + self.n_nodes
    }

    /// Row sums of the generator.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.len()];
        for &(i, _, v) in &self.triplets {
            r[i] += v;
        }
        r
    }
}

/// Entry to the regeneration path from a level frozen at node `k`.
fn regenerate_from(aux: &AuxChain, k: usize) -> usize {
    use std::cmp::Ordering::*;
    match k.cmp(&aux.start_node) {
        Greater => aux.lane_down(k),
        Less => aux.lane_up(k),
        Equal => aux.pre_start(),
    }
}

/// Appends the regeneration structure to a level chain: Exp(1) holds after
/// every absorption, unit-speed transit back to the node of `u`, and an Exp(1)
/// pre-start hold before restarting from `(i0, u)`.
pub fn build_auxiliary(chain: &LevelChain, u: f64, i0: usize) -> Result<AuxChain> {
    let (b, nb) = (chain.n_states, chain.n_nodes());
    let grid = &chain.grid;
    let weights = chain.start_weights(u)?;
    let start_node = chain.node_of(u).expect("validated by start_weights");
    let init = grid.aug.initial_distribution(i0)?;
    let mut aux = AuxChain {
        n_states: b,
        n_nodes: nb,
        start_node,
        triplets: Vec::new(),
    };
    let mut t = Vec::new();
    let mut push = |i: usize, j: usize, v: f64| {
        if v != 0.0 {
            t.push((i, j, v));
        }
    };

    for k in 0..nb {
        let block = chain.diagonal_block(k);
        for s in 0..b {
            let i = aux.excursion(s, k);
            let ci = chain.index(s, k);
            let mut out = 0.0;
            for r in 0..b {
                if r != s {
                    push(i, aux.excursion(r, k), block[(s, r)]);
                    out += block[(s, r)];
                }
            }
            let up = chain.up[ci];
            let down = chain.down[ci];
            let target_up = if k + 1 < nb { aux.excursion(s, k + 1) } else { aux.upper(s) };
            let target_down = if k > 0 { aux.excursion(s, k - 1) } else { aux.lower(s) };
            push(i, target_up, up);
            push(i, target_down, down);
            push(i, aux.non_ruin(s, k), chain.kill_plus[ci]);
            push(i, aux.ruin(s, k), chain.kill_minus[ci]);
            push(i, aux.discount(k), chain.discount[ci]);
            out += up + down + chain.kill_plus[ci] + chain.kill_minus[ci] + chain.discount[ci];
            push(i, i, -out);

            for hold in [aux.non_ruin(s, k), aux.ruin(s, k)] {
                push(hold, regenerate_from(&aux, k), 1.0);
                push(hold, hold, -1.0);
            }
        }
        push(aux.discount(k), regenerate_from(&aux, k), 1.0);
        push(aux.discount(k), aux.discount(k), -1.0);

        // transit lanes: unit speed between nodes
        if k > start_node {
            let rate = 1.0 / (chain.nodes[k] - chain.nodes[k - 1]);
            let next = if k - 1 == start_node { aux.pre_start() } else { aux.lane_down(k - 1) };
            push(aux.lane_down(k), next, rate);
            push(aux.lane_down(k), aux.lane_down(k), -rate);
        } else {
            push(aux.lane_down(k), aux.pre_start(), 1.0);
            push(aux.lane_down(k), aux.lane_down(k), -1.0);
        }
        if k < start_node {
            let rate = 1.0 / (chain.nodes[k + 1] - chain.nodes[k]);
            let next = if k + 1 == start_node { aux.pre_start() } else { aux.lane_up(k + 1) };
            push(aux.lane_up(k), next, rate);
            push(aux.lane_up(k), aux.lane_up(k), -rate);
        } else {
            push(aux.lane_up(k), aux.pre_start(), 1.0);
            push(aux.lane_up(k), aux.lane_up(k), -1.0);
        }
    }
    for s in 0..b {
        push(aux.lower(s), regenerate_from(&aux, 0), 1.0);
        push(aux.lower(s), aux.lower(s), -1.0);
        push(aux.upper(s), regenerate_from(&aux, nb - 1), 1.0);
        push(aux.upper(s), aux.upper(s), -1.0);
    }
    let p = aux.pre_start();
    for &(k, w) in &weights {
        for (s, a) in init.iter().enumerate() {
            push(p, aux.excursion(s, k), w * a);
        }
    }
    push(p, p, -1.0);
    aux.triplets = t;
    Ok(aux)
}

/// Stationary law of the auxiliary chain, split by component.
#[derive(Debug, Clone)]
pub struct AuxStationary {
    pub aux: AuxChain,
    pub pi: Vec<f64>,
}

impl AuxStationary {
    pub fn p_u(&self) -> f64 {
        self.pi[self.aux.pre_start()]
    }

    pub fn excursion(&self, s: usize, k: usize) -> f64 {
        self.pi[self.aux.excursion(s, k)]
    }

    pub fn p_lower(&self, s: usize) -> f64 {
        self.pi[self.aux.lower(s)]
    }

    pub fn p_upper(&self, s: usize) -> f64 {
        self.pi[self.aux.upper(s)]
    }

    pub fn pi_plus(&self, s: usize, k: usize) -> f64 {
        self.pi[self.aux.non_ruin(s, k)]
    }

    pub fn pi_minus(&self, s: usize, k: usize) -> f64 {
        self.pi[self.aux.ruin(s, k)]
    }

    pub fn p_discount(&self, k: usize) -> f64 {
        self.pi[self.aux.discount(k)]
    }

    pub fn total_mass(&self) -> f64 {
        self.pi.iter().sum()
    }
}

fn transposed_matrix(aux: &AuxChain, pin: usize) -> Result<SparseColMat<usize, f64>> {
    let n = aux.len();
    let mut trip: Vec<Triplet<usize, usize, f64>> = aux
        .triplets
        .iter()
        .filter(|(_, j, _)| *j != pin)
        .map(|&(i, j, v)| Triplet::new(j, i, v))
        .collect();
    // the balance equation of `pin` is replaced by `π_pin = 1`
    trip.push(Triplet::new(pin, pin, 1.0));
    SparseColMat::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::Numeric(format!("cannot assemble auxiliary generator: {e:?}")))
}

fn matvec(a: &SparseColMat<usize, f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    let sym = a.symbolic();
    let vals = a.val();
    for j in 0..a.ncols() {
        let range = sym.col_ptr()[j]..sym.col_ptr()[j + 1];
        for idx in range {
            y[sym.row_idx()[idx]] += vals[idx] * x[j];
        }
    }
    y
}

/// Solves `πQ = 0`, `π1 = 1` by sparse LU with iterative refinement.
pub fn solve_stationary(aux: &AuxChain) -> Result<AuxStationary> {
    let n = aux.len();
    let pin = aux.pre_start();
    let a = transposed_matrix(aux, pin)?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::Numeric(format!("sparse LU of the auxiliary chain failed: {e:?}")))?;
    let mut rhs = vec![0.0; n];
    rhs[pin] = 1.0;
    let solve = |r: &[f64]| -> Vec<f64> {
        let b = Mat::from_fn(n, 1, |i, _| r[i]);
        let x = lu.solve(&b);
        (0..n).map(|i| x[(i, 0)]).collect()
    };
    let mut x = solve(&rhs);
    for _ in 0..REFINEMENT_STEPS {
        let ax = matvec(&a, &x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(p, q)| p - q).collect();
        for (xi, d) in x.iter_mut().zip(solve(&r)) {
            *xi += d;
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("stationary solve produced non-finite values".into()));
    }
    let total: f64 = x.iter().sum();
    let pi = x.into_iter().map(|v| (v / total).max(0.0)).collect();
    Ok(AuxStationary { aux: aux.clone(), pi })
}

/// Descriptors recovered from the stationary law by normalizing with `p_u`.
pub fn descriptors_from_stationary(
    chain: &LevelChain,
    st: &AuxStationary,
    u: f64,
    i0: usize,
    bands: &[(f64, f64)],
) -> Result<DescriptorSet> {
    let pu = st.p_u();
    if !(pu > 0.0) {
        return Err(Error::Numeric("pre-start atom vanished".into()));
    }
    let (b, nb) = (chain.n_states, chain.n_nodes());
    let occupation: Vec<Vec<f64>> = (0..b)
        .map(|s| (0..nb).map(|k| st.excursion(s, k) / pu).collect())
        .collect();
    let mut ds = assemble(chain, u, i0, bands, occupation, Method::Stationary, None);
    // absorption masses straight from the holding atoms
    let v = &mut ds.values;
    for s in 0..b {
        v.lower[s] = st.p_lower(s) / pu;
        v.upper[s] = st.p_upper(s) / pu;
        v.kill_plus[s].iter_mut().for_each(|m| *m = 0.0);
        v.kill_minus[s].iter_mut().for_each(|m| *m = 0.0);
        for node in 0..nb {
            let k = chain.bin_of_node(node);
            v.kill_plus[s][k] += st.pi_plus(s, node) / pu;
            v.kill_minus[s][k] += st.pi_minus(s, node) / pu;
        }
    }
    v.discounted = (0..nb).map(|k| st.p_discount(k)).sum::<f64>() / pu;
    Ok(ds)
}

/// Stationary backend end to end.
pub fn solve_via_stationary(chain: &LevelChain, u: f64, i0: usize, bands: &[(f64, f64)]) -> Result<DescriptorSet> {
    let aux = build_auxiliary(chain, u, i0)?;
    let st = solve_stationary(&aux)?;
    descriptors_from_stationary(chain, &st, u, i0, bands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{build_erlang_horizon, build_infinite_horizon};
    use crate::grid::discretize;
    use crate::matrixkit::ErlangClock;
    use crate::models::{brownian, deterministic};
    use crate::solver::chain::{build_level_chain, build_level_chain_with};
    use crate::solver::transient::solve_transient;

    #[test]
    fn toy_cycle_has_hand_computable_atoms() {
        // no level motion, Exp(1) non-ruin kill: ∂_u -> (0,k_u) -> ∂_+ -> ∂_u,
        // three Exp(1) stages per cycle
        let aug = build_erlang_horizon(&deterministic(0.0).unwrap(), ErlangClock::new(1, 1.0).unwrap()).unwrap();
        let chain = build_level_chain_with(&discretize(&aug, -1.0, 1.0, 2, 0.0).unwrap(), 1).unwrap();
        let aux = build_auxiliary(&chain, -0.5, 0).unwrap();
        let st = solve_stationary(&aux).unwrap();
        assert!((st.p_u() - 1.0 / 3.0).abs() < 1e-14);
        assert!((st.excursion(0, 0) - 1.0 / 3.0).abs() < 1e-14);
        assert!((st.pi_plus(0, 0) - 1.0 / 3.0).abs() < 1e-14);
        assert!((st.total_mass() - 1.0).abs() < 1e-14);
        let ds = descriptors_from_stationary(&chain, &st, -0.5, 0, &[]).unwrap();
        assert!((ds.summary().psi_plus - 1.0).abs() < 1e-14);
    }

    #[test]
    fn construction_arithmetic_and_conservation() {
        let aug = build_infinite_horizon(&brownian(0.0, 1.0).unwrap()).unwrap();
        let chain = build_level_chain(&discretize(&aug, 0.0, 2.0, 20, 0.0).unwrap()).unwrap();
        let aux = build_auxiliary(&chain, 1.0, 0).unwrap();
        assert_eq!(aux.len(), chain.n_transient() + aux.n_holding() + 2 * chain.n_nodes() + 1);
        assert!(aux.row_sums().iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn every_holding_state_reaches_pre_start() {
        let aug = build_infinite_horizon(&brownian(0.0, 1.0).unwrap()).unwrap();
        let chain = build_level_chain(&discretize(&aug, 0.0, 2.0, 20, 0.0).unwrap()).unwrap();
        let aux = build_auxiliary(&chain, 0.55, 0).unwrap();
        let mut next = vec![Vec::new(); aux.len()];
        for &(i, j, v) in &aux.triplets {
            if i != j && v > 0.0 {
                next[i].push(j);
            }
        }
        let holds: Vec<usize> = (0..aux.n_states)
            .flat_map(|s| [aux.lower(s), aux.upper(s)])
            .chain((0..aux.n_nodes).flat_map(|k| [aux.non_ruin(0, k), aux.ruin(0, k), aux.discount(k)]))
            .collect();
        for h in holds {
            let mut cur = h;
            for _ in 0..=aux.n_nodes + 1 {
                assert_eq!(next[cur].len(), 1, "holding path branches at {cur}");
                cur = next[cur][0];
                if cur == aux.pre_start() {
                    break;
                }
            }
            assert_eq!(cur, aux.pre_start());
        }
    }

    #[test]
    fn matches_transient_backend() {
        let aug = build_infinite_horizon(&brownian(0.2, 1.0).unwrap()).unwrap().with_discount(0.05).unwrap();
        let chain = build_level_chain(&discretize(&aug, 0.0, 2.0, 50, 0.0).unwrap()).unwrap();
        let a = solve_transient(&chain, 1.0, 0, &[(0.5, 1.5)]).unwrap();
        let b = solve_via_stationary(&chain, 1.0, 0, &[(0.5, 1.5)]).unwrap();
        assert!(a.max_difference(&b) < 1e-10);
        assert!((b.summary().psi_lower - a.summary().psi_lower).abs() < 1e-10);
    }
}
