use serde::Serialize;

/// Which computation produced a [`DescriptorSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Transient,
    Stationary,
    MonteCarlo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Transient => "transient",
            Method::Stationary => "stationary",
            Method::MonteCarlo => "mc",
        }
    }
}

/// Run parameters carried along with every descriptor set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub method: Method,
    pub ruin: String,
    pub u: f64,
    pub i0: usize,
    pub c: f64,
    pub d: f64,
    pub q: f64,
    pub n_bins: usize,
    /// Transport cells per bin of the level chain.
    pub cells: Option<usize>,
    pub eps: f64,
    pub condition_estimate: Option<f64>,
    pub n_paths: Option<usize>,
    pub step: Option<f64>,
    pub seed: Option<u64>,
}

/// Masses per absorbing class; one entry per (augmented) state, and per bin
/// for the internal kills.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescriptorValues {
    /// Absorption at `c`, by state at absorption.
    pub lower: Vec<f64>,
    /// Absorption at `d`.
    pub upper: Vec<f64>,
    /// Non-ruin kill mass, `[state][bin]`.
    pub kill_plus: Vec<Vec<f64>>,
    /// Ruin kill mass, `[state][bin]`.
    pub kill_minus: Vec<Vec<f64>>,
    /// Mass lost to the discount clock.
    pub discounted: f64,
    /// Paths stopped by the operational-time cap (simulation only).
    pub capped: f64,
    /// Expected (discounted) occupation time, `[state][bin]`.
    pub occupation: Vec<Vec<f64>>,
    /// Occupation per band, `[band][state]`.
    pub bands: Vec<Vec<f64>>,
}

impl DescriptorValues {
    pub fn zeros(n_states: usize, n_bins: usize, n_bands: usize) -> Self {
        DescriptorValues {
            lower: vec![0.0; n_states],
            upper: vec![0.0; n_states],
            kill_plus: vec![vec![0.0; n_bins]; n_states],
            kill_minus: vec![vec![0.0; n_bins]; n_states],
            discounted: 0.0,
            capped: 0.0,
            occupation: vec![vec![0.0; n_bins]; n_states],
            bands: vec![vec![0.0; n_states]; n_bands],
        }
    }

    /// Visits every scalar together with its counterpart in `other`.
    pub fn zip_for_each(&self, other: &DescriptorValues, mut f: impl FnMut(&'static str, f64, f64)) {
        fn each(a: &[f64], b: &[f64], name: &'static str, f: &mut impl FnMut(&'static str, f64, f64)) {
            for (x, y) in a.iter().zip(b) {
                f(name, *x, *y);
            }
        }
        each(&self.lower, &other.lower, "lower", &mut f);
        each(&self.upper, &other.upper, "upper", &mut f);
        for (a, b) in self.kill_plus.iter().zip(&other.kill_plus) {
            each(a, b, "kill_plus", &mut f);
        }
        for (a, b) in self.kill_minus.iter().zip(&other.kill_minus) {
            each(a, b, "kill_minus", &mut f);
        }
        f("discounted", self.discounted, other.discounted);
        for (a, b) in self.occupation.iter().zip(&other.occupation) {
            each(a, b, "occupation", &mut f);
        }
        for (a, b) in self.bands.iter().zip(&other.bands) {
            each(a, b, "bands", &mut f);
        }
    }
}

/// Headline probabilities of a descriptor set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    /// Down-crossing of `c` before any termination (`ψ^{0<+}` when `c = 0`).
    pub psi_lower: f64,
    /// Non-ruin termination first (`ψ^{+<0}` for `c = 0`, `ψ^{+<-}` for `c < 0`).
    pub psi_plus: f64,
    /// Ruin by termination first (`ψ^{-<+}`).
    pub psi_minus: f64,
    pub upper: f64,
    pub discounted: f64,
    pub capped: f64,
}

/// Occupation times and absorption laws of one start `(u, i0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescriptorSet {
    pub provenance: Provenance,
    pub states: Vec<String>,
    pub edges: Vec<f64>,
    pub band_limits: Vec<(f64, f64)>,
    pub values: DescriptorValues,
    /// Standard errors of `values` (simulation only).
    pub std_errors: Option<DescriptorValues>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn sum2(v: &[Vec<f64>]) -> f64 {
    v.iter().map(|r| r.iter().sum::<f64>()).sum()
}

impl DescriptorSet {
    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn width(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    pub fn center(&self, k: usize) -> f64 {
        0.5 * (self.edges[k] + self.edges[k + 1])
    }

    pub fn summary(&self) -> Summary {
        let v = &self.values;
        Summary {
            psi_lower: v.lower.iter().sum(),
            psi_plus: sum2(&v.kill_plus),
            psi_minus: sum2(&v.kill_minus),
            upper: v.upper.iter().sum(),
            discounted: v.discounted,
            capped: v.capped,
        }
    }

    /// Standard errors of the summary probabilities, from the per-path
    /// indicator variances (simulation only).
    pub fn summary_std_errors(&self) -> Option<Summary> {
        let n = self.provenance.n_paths? as f64;
        let s = self.summary();
        let se = |p: f64| (p * (1.0 - p) / (n - 1.0).max(1.0)).max(0.0).sqrt();
        Some(Summary {
            psi_lower: se(s.psi_lower),
            psi_plus: se(s.psi_plus),
            psi_minus: se(s.psi_minus),
            upper: se(s.upper),
            discounted: se(s.discounted),
            capped: se(s.capped),
        })
    }

    /// Total probability over all absorbing classes.
    pub fn total_mass(&self) -> f64 {
        let s = self.summary();
        s.psi_lower + s.psi_plus + s.psi_minus + s.upper + s.discounted + s.capped
    }

    /// Kill density per bin, summed over states.
    pub fn density(&self, masses: &[Vec<f64>]) -> Vec<f64> {
        (0..self.n_bins())
            .map(|k| masses.iter().map(|r| r[k]).sum::<f64>() / self.width(k))
            .collect()
    }

    pub fn non_ruin_density(&self) -> Vec<f64> {
        self.density(&self.values.kill_plus)
    }

    pub fn ruin_density(&self) -> Vec<f64> {
        self.density(&self.values.kill_minus)
    }

    /// Piecewise-linear interpolation of a per-bin profile between bin
    /// centers (flat beyond the outer centers).
    pub fn interpolate(&self, profile: &[f64], x: f64) -> f64 {
        let n = self.n_bins();
        if x <= self.center(0) {
            return profile[0];
        }
        if x >= self.center(n - 1) {
            return profile[n - 1];
        }
        let k = (0..n - 1).find(|&k| x < self.center(k + 1)).expect("x inside centers");
        let (a, b) = (self.center(k), self.center(k + 1));
        let w = (x - a) / (b - a);
        (1.0 - w) * profile[k] + w * profile[k + 1]
    }

    /// Density of the deficit `y > 0` at ruin by termination.
    pub fn deficit_density(&self, y: f64) -> f64 {
        self.interpolate(&self.ruin_density(), -y)
    }

    /// Density of the surplus `y` at non-ruin termination.
    pub fn surplus_density(&self, y: f64) -> f64 {
        self.interpolate(&self.non_ruin_density(), y)
    }

    /// Largest scaled entrywise difference `|a-b| / max(1, |a|, |b|)`.
    pub fn max_difference(&self, other: &DescriptorSet) -> f64 {
        let mut worst = 0.0_f64;
        self.values.zip_for_each(&other.values, |_, a, b| {
            let scale = 1.0_f64.max(a.abs()).max(b.abs());
            worst = worst.max((a - b).abs() / scale);
        });
        worst
    }
}

/// Fraction of bin `[lo, hi)` inside the band `(a, b]`.
pub(crate) fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    let l = lo.max(a);
    let r = hi.min(b);
    if r > l {
        (r - l) / (hi - lo)
    } else {
        0.0
    }
}

/// Band occupations from per-bin occupations, assuming uniform mass within
/// each bin.
pub(crate) fn band_occupation(edges: &[f64], occupation: &[Vec<f64>], bands: &[(f64, f64)]) -> Vec<Vec<f64>> {
    bands
        .iter()
        .map(|&(a, b)| {
            occupation
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .map(|(k, v)| v * overlap(edges[k], edges[k + 1], a, b))
                        .sum()
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_fractions() {
        assert_eq!(overlap(0.0, 1.0, 0.25, 0.75), 0.5);
        assert_eq!(overlap(0.0, 1.0, 2.0, 3.0), 0.0);
        assert_eq!(overlap(0.0, 1.0, -1.0, 3.0), 1.0);
    }

    #[test]
    fn band_sums() {
        let edges = vec![0.0, 0.5, 1.0];
        let occ = vec![vec![0.5, 0.5]];
        assert_eq!(band_occupation(&edges, &occ, &[(0.25, 0.75)]), vec![vec![0.5]]);
    }
}
