//! Monte Carlo oracle.
//!
//! Paths of the hybrid SDE `(J, X)` on an augmented model are generated on
//! the underlying clock. Diffusive premium states take Euler–Maruyama steps
//! with a Brownian-bridge boundary check; drift-only states follow their ODE
//! with RK4 steps. Switching and killing come from uniformization against a
//! per-state dominating rate. Time spent in drift-only states is excised from
//! operational time as the path runs, which turns those sojourns into jumps of
//! the recorded risk process `(L, R)`.
//!
//! Estimates are bit-reproducible for a given seed: paths are grouped in
//! fixed-size chunks, each chunk draws from its own ChaCha8 stream, and chunk
//! tallies are merged in chunk order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::augment::AugmentedModel;
use crate::error::{usage, Error, Result};
use crate::model::{linspace, Side};
use crate::solver::{DescriptorSet, DescriptorValues, Method, Provenance};

/// Operational-time cap for paths that never absorb.
pub const DEFAULT_HORIZON_CAP: f64 = 1e4;
/// Largest RK4 step in drift-only motion.
pub const DEFAULT_ODE_STEP: f64 = 0.1;
/// Estimates from fewer paths carry a warning.
pub const MIN_PATHS: usize = 100;

const CHUNK_PATHS: usize = 512;
const RATE_SAMPLES: usize = 2049;
const RATE_HEADROOM: f64 = 1.05;
const BISECTION_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    BoundaryC,
    BoundaryD,
    KillPlus,
    KillMinus,
    QKill,
    HorizonCap,
}

/// How and where a path stopped. `time` is operational time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Terminal {
    pub cause: Termination,
    pub state: usize,
    pub level: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpSign {
    Down,
    Up,
}

/// A completed sojourn in drift-only states, seen as a jump of `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRecord {
    pub time: f64,
    pub size: f64,
    pub sign: JumpSign,
    /// Premium state before the jump (the start state if the path began in a
    /// drift-only state).
    pub from_state: usize,
    /// Premium state after the jump.
    pub to_state: usize,
}

/// One path of the time-changed process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    /// Operational times of the recorded points.
    pub times: Vec<f64>,
    /// `R_t` at those times.
    pub levels: Vec<f64>,
    /// `L_t` at those times.
    pub env: Vec<usize>,
    pub jumps: Vec<JumpRecord>,
    pub termination: Terminal,
    /// Underlying-clock time spent in drift-only states.
    pub excised: f64,
    /// Underlying-clock time until termination.
    pub elapsed: f64,
}

/// Step sizes, domain and cap shared by single paths and estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    /// Euler–Maruyama step in diffusive states.
    pub step: f64,
    /// Largest RK4 step in drift-only motion.
    pub ode_step: f64,
    /// Operational-time cap.
    pub horizon_cap: f64,
    pub c: f64,
    pub d: f64,
}

impl PathOptions {
    pub fn new(c: f64, d: f64, step: f64) -> Self {
        PathOptions {
            step,
            ode_step: DEFAULT_ODE_STEP,
            horizon_cap: DEFAULT_HORIZON_CAP,
            c,
            d,
        }
    }

    fn check(&self, u: f64) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return usage(format!("time step must be positive, got {}", self.step));
        }
        if !(self.ode_step > 0.0 && self.ode_step.is_finite()) {
            return usage(format!("ODE step must be positive, got {}", self.ode_step));
        }
        if !(self.horizon_cap > 0.0) {
            return usage("horizon cap must be positive");
        }
        if !(self.c.is_finite() && self.d.is_finite() && self.c <= 0.0 && 0.0 < self.d) {
            return usage(format!("domain [{}, {}] must satisfy c <= 0 < d", self.c, self.d));
        }
        if !(u >= self.c && u < self.d) {
            return usage(format!("start level {u} outside [{}, {})", self.c, self.d));
        }
        Ok(())
    }
}

/// Settings of [`estimate_descriptors`].
#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub path: PathOptions,
    pub n_paths: usize,
    pub seed: u64,
    /// Histogram edges over `[c, d]`.
    pub edges: Vec<f64>,
    /// Smoothing half-width the edges were built with (provenance only).
    pub eps: f64,
    pub bands: Vec<(f64, f64)>,
}

impl McOptions {
    /// Uniform histogram of `n_bins` bins with zero forced in.
    pub fn new(path: PathOptions, n_paths: usize, seed: u64, n_bins: usize) -> Result<Self> {
        let eps = 0.0;
        Ok(McOptions {
            edges: crate::grid::grid_edges(path.c, path.d, n_bins, eps)?,
            path,
            n_paths,
            seed,
            eps,
            bands: Vec::new(),
        })
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// The summary probabilities of a simulated descriptor set with their
/// standard errors.
pub fn summary_estimates(ds: &DescriptorSet) -> Option<Vec<(&'static str, McEstimate)>> {
    let n = ds.provenance.n_paths?;
    let seed = ds.provenance.seed?;
    let s = ds.summary();
    let se = ds.summary_std_errors()?;
    let est = |value, std_error| McEstimate {
        value,
        std_error,
        n_paths: n,
        seed,
    };
    Some(vec![
        ("psi_lower", est(s.psi_lower, se.psi_lower)),
        ("psi_plus", est(s.psi_plus, se.psi_plus)),
        ("psi_minus", est(s.psi_minus, se.psi_minus)),
        ("upper", est(s.upper, se.upper)),
        ("discounted", est(s.discounted, se.discounted)),
        ("capped", est(s.capped, se.capped)),
    ])
}

trait Observer {
    fn segment(&mut self, _s: usize, _x0: f64, _x1: f64, _dt: f64) {}
    fn point(&mut self, _t: f64, _x: f64, _s: usize) {}
    fn jump(&mut self, _j: JumpRecord) {}
}

struct Ctx<'a> {
    aug: &'a AugmentedModel,
    premium: Vec<bool>,
    /// Dominating total exit rate per state.
    rates: Vec<f64>,
    q: f64,
    opts: PathOptions,
}

impl<'a> Ctx<'a> {
    fn new(aug: &'a AugmentedModel, opts: PathOptions) -> Result<Self> {
        let n = aug.n_states();
        let premium: Vec<bool> = (0..n).map(|i| aug.spec.partition().is_premium(i)).collect();
        let q = aug.killing.discount();
        let mut rates = vec![0.0_f64; n];
        let mut levels: Vec<(f64, Side)> = linspace(opts.c, opts.d, RATE_SAMPLES)
            .into_iter()
            .map(|x| (x, Side::of(x)))
            .collect();
        levels.push((0.0, Side::Negative));
        levels.push((0.0, Side::NonNegative));
        for (x, side) in levels {
            let m = aug.spec.generator().at_side(x, side)?;
            for i in 0..n {
                let qi = if premium[i] { q } else { 0.0 };
                rates[i] = rates[i].max(-m[(i, i)] + qi);
            }
        }
        for r in &mut rates {
            *r *= RATE_HEADROOM;
        }
        Ok(Ctx {
            aug,
            premium,
            rates,
            q,
            opts,
        })
    }

    fn drift(&self, i: usize, x: f64) -> f64 {
        self.aug.spec.drift(i, x)
    }

    fn next_candidate<R: Rng>(&self, i: usize, rng: &mut R) -> f64 {
        let r = self.rates[i];
        if r > 0.0 {
            let e: f64 = rng.sample(Exp1);
            e / r
        } else {
            f64::INFINITY
        }
    }

    /// Euler–Maruyama step; returns `(x1, dt, hit)`.
    fn em_step<R: Rng>(&self, i: usize, x: f64, sigma: f64, dt: f64, rng: &mut R) -> (f64, f64, Option<Termination>) {
        let (c, d) = (self.opts.c, self.opts.d);
        let z: f64 = rng.sample(StandardNormal);
        let x1 = x + self.drift(i, x) * dt + sigma * dt.sqrt() * z;
        if x1 <= c {
            let frac = if x > x1 { (x - c) / (x - x1) } else { 0.0 };
            return (c, frac * dt, Some(Termination::BoundaryC));
        }
        if x1 >= d {
            let frac = if x1 > x { (d - x) / (x1 - x) } else { 0.0 };
            return (d, frac * dt, Some(Termination::BoundaryD));
        }
        let v = sigma * sigma * dt;
        for (barrier, cause) in [(c, Termination::BoundaryC), (d, Termination::BoundaryD)] {
            let p = (-2.0 * (x - barrier) * (x1 - barrier) / v).exp();
            if p > 1e-16 && rng.random::<f64>() < p {
                return (x1, dt, Some(cause));
            }
        }
        (x1, dt, None)
    }

    /// RK4 step of `dX = μ(i, X) dt`; a boundary crossing is located on the
    /// cubic Hermite interpolant of the step.
    fn ode_step(&self, i: usize, x: f64, dt: f64) -> (f64, f64, Option<Termination>) {
        let (c, d) = (self.opts.c, self.opts.d);
        let k1 = self.drift(i, x);
        let k2 = self.drift(i, x + 0.5 * dt * k1);
        let k3 = self.drift(i, x + 0.5 * dt * k2);
        let k4 = self.drift(i, x + dt * k3);
        let x1 = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let (barrier, cause) = if x1 <= c {
            (c, Termination::BoundaryC)
        } else if x1 >= d {
            (d, Termination::BoundaryD)
        } else {
            return (x1, dt, None);
        };
        let f1 = self.drift(i, x1);
        let hermite = |s: f64| {
            let (s2, s3) = (s * s, s * s * s);
            (2.0 * s3 - 3.0 * s2 + 1.0) * x
                + (s3 - 2.0 * s2 + s) * dt * k1
                + (-2.0 * s3 + 3.0 * s2) * x1
                + (s3 - s2) * dt * f1
        };
        let inside = |y: f64| y > c && y < d;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if inside(hermite(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (barrier, hi * dt, Some(cause))
    }

    fn run<R: Rng>(&self, u: f64, init: &[f64], rng: &mut R, obs: &mut impl Observer) -> Result<(Terminal, f64, f64)> {
        let aug = self.aug;
        let n = aug.n_states();
        let mut i = {
            let v: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (k, p) in init.iter().enumerate() {
                acc += p;
                if v < acc {
                    pick = k;
                    break;
                }
            }
            pick
        };
        let mut x = u;
        let (mut t, mut excised, mut elapsed) = (0.0_f64, 0.0_f64, 0.0_f64);
        let mut sojourn: Option<(usize, f64)> = None;
        if self.premium[i] {
            obs.point(0.0, x, i);
        } else {
            sojourn = Some((i, x));
        }
        let mut rem = self.next_candidate(i, rng);
        let cap = self.opts.horizon_cap;

        let finish = |cause, state, level, t: f64, excised: f64, elapsed: f64| -> Result<(Terminal, f64, f64)> {
            if (t + excised - elapsed).abs() > 1e-9 * (1.0 + elapsed) {
                return Err(Error::Numeric(format!(
                    "time change bookkeeping broken: {t} + {excised} != {elapsed}"
                )));
            }
            Ok((Terminal { cause, state, level, time: t }, excised, elapsed))
        };

        loop {
            let prem = self.premium[i];
            if prem && t >= cap {
                return finish(Termination::HorizonCap, i, x, t, excised, elapsed);
            }
            let mut limit = rem;
            if prem {
                limit = limit.min(cap - t);
            }
            let sigma = if prem { aug.spec.diffusion(i, x) } else { 0.0 };
            let max_step = if sigma > 0.0 { self.opts.step } else { self.opts.ode_step };
            let to_event = rem <= max_step && rem <= limit;
            let dt = if to_event { rem } else { max_step.min(limit) };
            let (x1, used, hit) = if sigma > 0.0 {
                self.em_step(i, x, sigma, dt, rng)
            } else {
                self.ode_step(i, x, dt)
            };
            obs.segment(i, x, x1, used);
            elapsed += used;
            if prem {
                t += used;
            } else {
                excised += used;
            }
            x = x1;
            if let Some(cause) = hit {
                return finish(cause, i, x, t, excised, elapsed);
            }
            if prem {
                obs.point(t, x, i);
            }
            if !to_event {
                rem -= used;
                continue;
            }

            // candidate event at (i, x)
            let side = Side::of(x);
            let m = aug.spec.generator().at_side(x, side)?;
            let qi = if prem { self.q } else { 0.0 };
            let total = -m[(i, i)] + qi;
            if total > self.rates[i] * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::Numeric(format!(
                    "exit rate {total} of state {i} at level {x} exceeds its dominating rate {}",
                    self.rates[i]
                )));
            }
            let mut v = rng.random::<f64>() * self.rates[i];
            if v < total {
                let mut target = None;
                for j in (0..n).filter(|&j| j != i) {
                    v -= m[(i, j)];
                    if v < 0.0 {
                        target = Some(j);
                        break;
                    }
                }
                if let Some(j) = target {
                    match (prem, self.premium[j]) {
                        (true, false) => sojourn = Some((i, x)),
                        (false, true) => {
                            if let Some((from, x0)) = sojourn.take() {
                                let size = (x - x0).abs();
                                if size > 0.0 {
                                    obs.jump(JumpRecord {
                                        time: t,
                                        size,
                                        sign: if x < x0 { JumpSign::Down } else { JumpSign::Up },
                                        from_state: from,
                                        to_state: j,
                                    });
                                }
                            }
                            obs.point(t, x, j);
                        }
                        (true, true) => obs.point(t, x, j),
                        (false, false) => {}
                    }
                    i = j;
                } else {
                    let kills = [
                        (aug.killing.kill_plus(i, x, side), Termination::KillPlus),
                        (aug.killing.kill_minus(i, x, side), Termination::KillMinus),
                        (qi, Termination::QKill),
                    ];
                    for (rate, cause) in kills {
                        v -= rate;
                        if v < 0.0 {
                            return finish(cause, i, x, t, excised, elapsed);
                        }
                    }
                }
            }
            rem = self.next_candidate(i, rng);
        }
    }
}

struct Recorder {
    times: Vec<f64>,
    levels: Vec<f64>,
    env: Vec<usize>,
    jumps: Vec<JumpRecord>,
}

impl Observer for Recorder {
    fn point(&mut self, t: f64, x: f64, s: usize) {
        self.times.push(t);
        self.levels.push(x);
        self.env.push(s);
    }

    fn jump(&mut self, j: JumpRecord) {
        self.jumps.push(j);
    }
}

/// One recorded path started at level `u` in base state `i0`.
pub fn simulate_path(aug: &AugmentedModel, u: f64, i0: usize, opts: &PathOptions, seed: u64) -> Result<PathSample> {
    opts.check(u)?;
    let ctx = Ctx::new(aug, *opts)?;
    let init = aug.initial_distribution(i0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rec = Recorder {
        times: Vec::new(),
        levels: Vec::new(),
        env: Vec::new(),
        jumps: Vec::new(),
    };
    let (termination, excised, elapsed) = ctx.run(u, &init, &mut rng, &mut rec)?;
    Ok(PathSample {
        times: rec.times,
        levels: rec.levels,
        env: rec.env,
        jumps: rec.jumps,
        termination,
        excised,
        elapsed,
    })
}

/// Per-path occupation in `(state, bin)` and per band.
struct Occupation<'a> {
    edges: &'a [f64],
    bands: &'a [(f64, f64)],
    n_bins: usize,
    occ: Vec<f64>,
    touched: Vec<usize>,
    band_occ: Vec<f64>,
}

impl Occupation<'_> {
    fn bin(&self, x: f64) -> usize {
        let k = self.edges.partition_point(|e| *e <= x);
        k.clamp(1, self.n_bins) - 1
    }

    fn add(&mut self, s: usize, k: usize, v: f64) {
        let idx = s * self.n_bins + k;
        if self.occ[idx] == 0.0 {
            self.touched.push(idx);
        }
        self.occ[idx] += v;
    }
}

impl Observer for Occupation<'_> {
    fn segment(&mut self, s: usize, x0: f64, x1: f64, dt: f64) {
        if !(dt > 0.0) {
            return;
        }
        let (lo, hi) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        let (k0, k1) = (self.bin(lo), self.bin(hi));
        if k0 == k1 || hi == lo {
            self.add(s, k0, dt);
        } else {
            let span = hi - lo;
            for k in k0..=k1 {
                let a = lo.max(self.edges[k]);
                let b = hi.min(self.edges[k + 1]);
                if b > a {
                    self.add(s, k, dt * (b - a) / span);
                }
            }
        }
        let nb = self.bands.len();
        for (bi, &(a, b)) in self.bands.iter().enumerate() {
            let frac = if hi == lo {
                if lo > a && lo <= b {
                    1.0
                } else {
                    0.0
                }
            } else {
                (hi.min(b) - lo.max(a)).max(0.0) / (hi - lo)
            };
            self.band_occ[s * nb + bi] += dt * frac;
        }
    }
}

/// Sums and sums of squares of per-path descriptor values.
struct Tally {
    n: usize,
    sum: DescriptorValues,
    sq: DescriptorValues,
}

impl Tally {
    fn new(b: usize, nb: usize, n_bands: usize) -> Self {
        Tally {
            n: 0,
            sum: DescriptorValues::zeros(b, nb, n_bands),
            sq: DescriptorValues::zeros(b, nb, n_bands),
        }
    }

    fn merge(&mut self, other: &Tally) {
        self.n += other.n;
        for (a, b) in [(&mut self.sum, &other.sum), (&mut self.sq, &other.sq)] {
            add_values(a, b);
        }
    }
}

fn add_values(a: &mut DescriptorValues, b: &DescriptorValues) {
    let add = |x: &mut Vec<f64>, y: &Vec<f64>| x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
    add(&mut a.lower, &b.lower);
    add(&mut a.upper, &b.upper);
    for (x, y) in a.kill_plus.iter_mut().zip(&b.kill_plus) {
        add(x, y);
    }
    for (x, y) in a.kill_minus.iter_mut().zip(&b.kill_minus) {
        add(x, y);
    }
    for (x, y) in a.occupation.iter_mut().zip(&b.occupation) {
        add(x, y);
    }
    for (x, y) in a.bands.iter_mut().zip(&b.bands) {
        add(x, y);
    }
    a.discounted += b.discounted;
    a.capped += b.capped;
}

fn map_values(sum: &DescriptorValues, sq: &DescriptorValues, f: impl Fn(f64, f64) -> f64) -> DescriptorValues {
    let v = |a: &Vec<f64>, b: &Vec<f64>| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect::<Vec<_>>();
    let vv = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| a.iter().zip(b).map(|(x, y)| v(x, y)).collect::<Vec<_>>();
    DescriptorValues {
        lower: v(&sum.lower, &sq.lower),
        upper: v(&sum.upper, &sq.upper),
        kill_plus: vv(&sum.kill_plus, &sq.kill_plus),
        kill_minus: vv(&sum.kill_minus, &sq.kill_minus),
        discounted: f(sum.discounted, sq.discounted),
        capped: f(sum.capped, sq.capped),
        occupation: vv(&sum.occupation, &sq.occupation),
        bands: vv(&sum.bands, &sq.bands),
    }
}

fn run_chunk(ctx: &Ctx, u: f64, init: &[f64], opts: &McOptions, chunk: usize, paths: usize) -> Result<Tally> {
    let b = ctx.aug.n_states();
    let nb = opts.edges.len() - 1;
    let n_bands = opts.bands.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(chunk as u64);
    let mut tally = Tally::new(b, nb, n_bands);
    let mut obs = Occupation {
        edges: &opts.edges,
        bands: &opts.bands,
        n_bins: nb,
        occ: vec![0.0; b * nb],
        touched: Vec::new(),
        band_occ: vec![0.0; b * n_bands],
    };
    for _ in 0..paths {
        let (term, _, _) = ctx.run(u, init, &mut rng, &mut obs)?;
        let s = term.state;
        let k = obs.bin(term.level);
        let (sum, sq) = (&mut tally.sum, &mut tally.sq);
        match term.cause {
            Termination::BoundaryC => {
                sum.lower[s] += 1.0;
                sq.lower[s] += 1.0;
            }
            Termination::BoundaryD => {
                sum.upper[s] += 1.0;
                sq.upper[s] += 1.0;
            }
            Termination::KillPlus => {
                sum.kill_plus[s][k] += 1.0;
                sq.kill_plus[s][k] += 1.0;
            }
            Termination::KillMinus => {
                sum.kill_minus[s][k] += 1.0;
                sq.kill_minus[s][k] += 1.0;
            }
            Termination::QKill => {
                sum.discounted += 1.0;
                sq.discounted += 1.0;
            }
            Termination::HorizonCap => {
                sum.capped += 1.0;
                sq.capped += 1.0;
            }
        }
        for &idx in &obs.touched {
            let v = obs.occ[idx];
            sum.occupation[idx / nb][idx % nb] += v;
            sq.occupation[idx / nb][idx % nb] += v * v;
            obs.occ[idx] = 0.0;
        }
        obs.touched.clear();
        for s in 0..b {
            for bi in 0..n_bands {
                let v = obs.band_occ[s * n_bands + bi];
                sum.bands[bi][s] += v;
                sq.bands[bi][s] += v * v;
            }
        }
        obs.band_occ.iter_mut().for_each(|v| *v = 0.0);
        tally.n += 1;
    }
    Ok(tally)
}

/// Empirical descriptors from `n_paths` independent paths, with standard
/// errors. Discounting is taken from the model's killed generator.
pub fn estimate_descriptors(aug: &AugmentedModel, u: f64, i0: usize, opts: &McOptions) -> Result<DescriptorSet> {
    let p = &opts.path;
    p.check(u)?;
    if opts.n_paths < 2 {
        return usage("need at least two paths");
    }
    let e = &opts.edges;
    if e.len() < 2 || e.windows(2).any(|w| !(w[1] > w[0])) {
        return usage("histogram edges must be strictly increasing");
    }
    if (e[0] - p.c).abs() > 1e-12 || (e[e.len() - 1] - p.d).abs() > 1e-12 {
        return usage("histogram edges must span [c, d]");
    }
    for &(a, b) in &opts.bands {
        if !(a < b && a >= p.c && b <= p.d) {
            return usage(format!("band ({a}, {b}) must lie inside [{}, {}]", p.c, p.d));
        }
    }
    let ctx = Ctx::new(aug, *p)?;
    let init = aug.initial_distribution(i0)?;
    let n_chunks = opts.n_paths.div_ceil(CHUNK_PATHS);
    let tallies: Vec<Tally> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let paths = CHUNK_PATHS.min(opts.n_paths - chunk * CHUNK_PATHS);
            run_chunk(&ctx, u, &init, opts, chunk, paths)
        })
        .collect::<Result<_>>()?;
    let (b, nb) = (aug.n_states(), e.len() - 1);
    let mut total = Tally::new(b, nb, opts.bands.len());
    for t in &tallies {
        total.merge(t);
    }
    let n = total.n as f64;
    let values = map_values(&total.sum, &total.sq, |s, _| s / n);
    let std_errors = map_values(&total.sum, &total.sq, |s, q| {
        let mean = s / n;
        ((q - n * mean * mean) / (n - 1.0)).max(0.0).sqrt() / n.sqrt()
    });

    let mut warnings = Vec::new();
    if opts.n_paths < MIN_PATHS {
        warnings.push(format!("only {} paths; standard errors are unreliable", opts.n_paths));
    }
    if values.capped > 0.0 {
        warnings.push(format!(
            "{} paths reached the operational-time cap {}",
            total.sum.capped, p.horizon_cap
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(DescriptorSet {
        provenance: Provenance {
            method: Method::MonteCarlo,
            ruin: aug.kind.name().to_string(),
            u,
            i0,
            c: p.c,
            d: p.d,
            q: aug.killing.discount(),
            n_bins: nb,
            cells: None,
            eps: opts.eps,
            condition_estimate: None,
            n_paths: Some(opts.n_paths),
            step: Some(p.step),
            seed: Some(opts.seed),
        },
        states: (0..b).map(|s| aug.state_name(s)).collect(),
        edges: e.clone(),
        band_limits: opts.bands.clone(),
        values,
        std_errors: Some(std_errors),
        warnings,
    })
}
