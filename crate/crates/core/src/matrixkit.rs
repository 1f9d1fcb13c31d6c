//! Matrix-analytic primitives: matrix exponential, Kronecker sum/product,
//! phase-type and inhomogeneous phase-type distributions, and product
//! integrals of level-dependent subintensity matrices.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{usage, Error, Result};
use crate::model::{Matrix, STRUCTURAL_TOL};

// Padé(13) coefficients and the 1-norm threshold below which no scaling is
// needed (Higham, 2005).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn norm1(a: &Matrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^A` by scaling and squaring with a degree-13 Padé approximant.
pub fn mat_exp(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return usage(format!("mat_exp needs a square matrix, got {}x{}", a.nrows(), a.ncols()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("mat_exp input has non-finite entries".into()));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let nrm = norm1(a);
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(s);
    let id = Matrix::identity(n, n);
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::Numeric("singular Padé denominator in mat_exp".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("mat_exp overflowed".into()));
    }
    Ok(r)
}

/// Kronecker product `A ⊗ B`.
pub fn kron_prod(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker sum `A ⊕ B = A ⊗ I + I ⊗ B`: the generator of two independent
/// chains running concurrently.
pub fn kron_sum(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() || !b.is_square() {
        return usage("kron_sum needs square inputs");
    }
    let ia = Matrix::identity(a.nrows(), a.nrows());
    let ib = Matrix::identity(b.nrows(), b.nrows());
    Ok(kron_prod(a, &ib) + kron_prod(&ia, b))
}

const BLOWUP: f64 = 1e12;

/// Samples of the propagator `P(0, y)` solving `P'(y) = P(y) T(y)`, `P(0) = I`.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub points: Vec<f64>,
    pub values: Vec<Matrix>,
    /// Step-halving estimate of the error at the last point.
    pub error_estimate: f64,
}

fn rk4_step<F>(t_of: &mut F, p: &Matrix, y: f64, h: f64) -> Result<Matrix>
where
    F: FnMut(f64) -> Result<Matrix>,
{
    let t0 = t_of(y)?;
    let tm = t_of(y + 0.5 * h)?;
    let t1 = t_of(y + h)?;
    let k1 = p * &t0;
    let k2 = (p + &k1 * (0.5 * h)) * &tm;
    let k3 = (p + &k2 * (0.5 * h)) * &tm;
    let k4 = (p + &k3 * h) * &t1;
    Ok(p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Integrates the product integral through `points` (increasing, starting at
/// or after 0) with RK4 steps no longer than `max_step`, recording `P(0, y)`
/// at every requested point.
pub fn product_integral_at<F>(mut t_of: F, dim: usize, points: &[f64], max_step: f64) -> Result<Vec<Matrix>>
where
    F: FnMut(f64) -> Result<Matrix>,
{
    if !(max_step > 0.0) {
        return usage("product integral step must be positive");
    }
    if points.iter().any(|y| *y < 0.0) || points.windows(2).any(|w| w[1] < w[0]) {
        return usage("product integral points must be non-negative and increasing");
    }
    let mut p = Matrix::identity(dim, dim);
    let mut y = 0.0;
    let mut out = Vec::with_capacity(points.len());
    for &target in points {
        let span = target - y;
        if span > 0.0 {
            let n = (span / max_step).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for k in 0..n {
                p = rk4_step(&mut t_of, &p, y + k as f64 * h, h)?;
            }
            let nrm = p.amax();
            if !nrm.is_finite() || nrm > BLOWUP {
                return Err(Error::Numeric(format!("product integral blew up near y={target}")));
            }
        }
        y = target;
        out.push(p.clone());
    }
    Ok(out)
}

/// `P(0, y)` on `steps + 1` equally spaced points of `[0, y_max]`, by
/// fixed-step RK4, with a step-halving error estimate.
pub fn product_integral<F>(mut t_of: F, dim: usize, y_max: f64, steps: usize) -> Result<Propagator>
where
    F: FnMut(f64) -> Result<Matrix>,
{
    if !(y_max > 0.0) {
        return usage("product integral needs y_max > 0");
    }
    if steps < 1 {
        return usage("product integral needs at least one step");
    }
    let h = y_max / steps as f64;
    let points: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    let values = product_integral_at(&mut t_of, dim, &points, h * (1.0 + 1e-12))?;
    let fine = product_integral_at(&mut t_of, dim, &[y_max], h / 2.0)?;
    let last = values.last().expect("non-empty");
    let error_estimate = (last - &fine[0]).amax() / 15.0;
    Ok(Propagator {
        points,
        values,
        error_estimate,
    })
}

/// A phase-type distribution `PH(α, T)` with exit vector `t = -T·1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseType {
    alpha: DVector<f64>,
    t_mat: Matrix,
    exit: DVector<f64>,
}

impl PhaseType {
    pub fn new(alpha: DVector<f64>, t_mat: Matrix) -> Result<Self> {
        let m = alpha.len();
        if m == 0 || t_mat.nrows() != m || t_mat.ncols() != m {
            return usage("phase-type needs a non-empty α and a matching square T");
        }
        if alpha.iter().any(|a| *a < -STRUCTURAL_TOL) || alpha.sum() > 1.0 + STRUCTURAL_TOL {
            return usage("α must be non-negative with total mass at most 1");
        }
        for i in 0..m {
            for j in 0..m {
                if i != j && t_mat[(i, j)] < -STRUCTURAL_TOL {
                    return usage("T must have non-negative off-diagonal entries");
                }
            }
            if t_mat.row(i).sum() > STRUCTURAL_TOL {
                return usage("T rows must sum to at most zero");
            }
        }
        let exit = -(&t_mat * DVector::from_element(m, 1.0));
        let exit = exit.map(|v| if v.abs() < STRUCTURAL_TOL { 0.0 } else { v });
        Ok(PhaseType { alpha, t_mat, exit })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return usage("exponential rate must be positive");
        }
        Self::new(DVector::from_element(1, 1.0), Matrix::from_element(1, 1, -rate))
    }

    pub fn erlang(stages: usize, rate: f64) -> Result<Self> {
        ErlangClock::new(stages, rate).map(|c| c.phase_type())
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn t_mat(&self) -> &Matrix {
        &self.t_mat
    }

    pub fn exit(&self) -> &DVector<f64> {
        &self.exit
    }

    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    /// `α e^{Tx} t`.
    pub fn density(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return usage(format!("phase-type density needs x >= 0, got {x}"));
        }
        let e = mat_exp(&(&self.t_mat * x))?;
        Ok((self.alpha.transpose() * e * &self.exit)[(0, 0)])
    }

    /// `1 - α e^{Tx} 1`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return usage(format!("phase-type cdf needs x >= 0, got {x}"));
        }
        let e = mat_exp(&(&self.t_mat * x))?;
        let ones = DVector::from_element(self.order(), 1.0);
        Ok(1.0 - (self.alpha.transpose() * e * ones)[(0, 0)])
    }

    /// `-α T^{-1} 1`.
    pub fn mean(&self) -> Result<f64> {
        let ones = DVector::from_element(self.order(), 1.0);
        let sol = self
            .t_mat
            .clone()
            .lu()
            .solve(&ones)
            .ok_or_else(|| Error::Numeric("singular T in phase-type mean".into()))?;
        Ok(-(self.alpha.transpose() * sol)[(0, 0)])
    }

    /// One absorption time, simulating the phase chain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let m = self.order();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut phase = None;
        for i in 0..m {
            acc += self.alpha[i];
            if u < acc {
                phase = Some(i);
                break;
            }
        }
        let mut t = 0.0;
        while let Some(i) = phase {
            let out = -self.t_mat[(i, i)];
            if out <= 0.0 {
                return f64::INFINITY;
            }
            let e: f64 = Exp1.sample(rng);
            t += e / out;
            let mut v = rng.random::<f64>() * out;
            phase = None;
            for j in 0..m {
                if j == i {
                    continue;
                }
                v -= self.t_mat[(i, j)];
                if v < 0.0 {
                    phase = Some(j);
                    break;
                }
            }
        }
        t
    }

    /// `n` samples from an explicit seed.
    pub fn sample_seeded(&self, seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }
}

/// Density of `ph` at `x`.
pub fn ph_density(ph: &PhaseType, x: f64) -> Result<f64> {
    ph.density(x)
}

/// Distribution function of `ph` at `x`.
pub fn ph_cdf(ph: &PhaseType, x: f64) -> Result<f64> {
    ph.cdf(x)
}

/// A single draw from `ph` using a fresh generator seeded with `seed`.
pub fn ph_sample(ph: &PhaseType, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ph.sample(&mut rng)
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Inhomogeneous phase-type distribution with subintensity `T(x)`.
///
/// When built with [`Iph::separable`] (`T(x) = c(x)·T`), the density uses the
/// closed form `α e^{T C(x)} t c(x)`; otherwise it integrates the product
/// integral.
#[derive(Clone)]
pub struct Iph {
    alpha: DVector<f64>,
    t_of: Arc<dyn Fn(f64) -> Matrix + Send + Sync>,
    separable: Option<(Matrix, ScalarFn, ScalarFn)>,
}

impl fmt::Debug for Iph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Iph")
            .field("alpha", &self.alpha)
            .field("separable", &self.separable.is_some())
            .finish_non_exhaustive()
    }
}

impl Iph {
    pub fn new(alpha: DVector<f64>, t_of: impl Fn(f64) -> Matrix + Send + Sync + 'static) -> Self {
        Iph {
            alpha,
            t_of: Arc::new(t_of),
            separable: None,
        }
    }

    /// `T(x) = c(x)·T` with cumulative rate `C(x) = ∫_0^x c`.
    pub fn separable(
        alpha: DVector<f64>,
        t_mat: Matrix,
        rate: impl Fn(f64) -> f64 + Send + Sync + 'static,
        cumulative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let rate: ScalarFn = Arc::new(rate);
        let cumulative: ScalarFn = Arc::new(cumulative);
        let t2 = t_mat.clone();
        let r2 = rate.clone();
        Iph {
            alpha,
            t_of: Arc::new(move |x| &t2 * r2(x)),
            separable: Some((t_mat, rate, cumulative)),
        }
    }

    pub fn t_at(&self, x: f64) -> Matrix {
        (self.t_of)(x)
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return usage("IPH density needs x >= 0");
        }
        let m = self.alpha.len();
        let ones = DVector::from_element(m, 1.0);
        if let Some((t, c, big_c)) = &self.separable {
            let e = mat_exp(&(t * big_c(x)))?;
            let exit = -(t * &ones) * c(x);
            return Ok((self.alpha.transpose() * e * exit)[(0, 0)]);
        }
        let p = if x == 0.0 {
            Matrix::identity(m, m)
        } else {
            let t_of = self.t_of.clone();
            product_integral_at(|y| Ok(t_of(y)), m, &[x], (x / 2000.0).min(1e-2))?.remove(0)
        };
        let exit = -(self.t_at(x) * ones);
        Ok((self.alpha.transpose() * p * exit)[(0, 0)])
    }
}

/// An Erlang clock: `m` sequential `Exp(λ)` stages started in stage 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangClock {
    stages: usize,
    rate: f64,
}

impl ErlangClock {
    pub fn new(stages: usize, rate: f64) -> Result<Self> {
        if stages == 0 {
            return usage("Erlang clock needs at least one stage");
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return usage("Erlang clock rate must be positive");
        }
        Ok(ErlangClock { stages, rate })
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mean(&self) -> f64 {
        self.stages as f64 / self.rate
    }

    /// `K`: `-λ` on the diagonal, `λ` on the first superdiagonal.
    pub fn generator(&self) -> Matrix {
        let m = self.stages;
        let mut k = Matrix::zeros(m, m);
        for i in 0..m {
            k[(i, i)] = -self.rate;
            if i + 1 < m {
                k[(i, i + 1)] = self.rate;
            }
        }
        k
    }

    /// `κ`: unit mass on the first stage.
    pub fn kappa(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.stages);
        v[0] = 1.0;
        v
    }

    pub fn phase_type(&self) -> PhaseType {
        PhaseType::new(self.kappa(), self.generator()).expect("Erlang shape is a valid phase-type")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn taylor_exp(a: &Matrix) -> Matrix {
        let n = a.nrows();
        let mut term = Matrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..60 {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn mat_exp_examples() {
        assert_eq!(mat_exp(&Matrix::zeros(3, 3)).unwrap(), Matrix::identity(3, 3));
        let e = mat_exp(&Matrix::from_element(1, 1, -1.0)).unwrap();
        assert!(close(e[(0, 0)], (-1.0f64).exp(), 1e-15));
        assert!(matches!(mat_exp(&Matrix::zeros(2, 3)), Err(Error::Usage(_))));
    }

    #[test]
    fn mat_exp_matches_diagonalisation_for_large_norm() {
        // A = S D S^{-1} with known eigenvalues
        let s = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let sinv = Matrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]);
        let d = Matrix::from_diagonal(&DVector::from_vec(vec![-30.0, -0.5]));
        let a = &s * &d * &sinv;
        let expected = &s * Matrix::from_diagonal(&DVector::from_vec(vec![(-30.0f64).exp(), (-0.5f64).exp()])) * &sinv;
        let got = mat_exp(&a).unwrap();
        assert!((got - &expected).amax() <= 1e-10 * expected.amax());
    }

    #[test]
    fn erlang_density_at_one() {
        let ph = PhaseType::erlang(2, 1.0).unwrap();
        assert!(close(ph.density(1.0).unwrap(), (-1.0f64).exp(), 1e-12));
        assert!(close(ph.cdf(1.0).unwrap(), 1.0 - 2.0 * (-1.0f64).exp(), 1e-12));
        assert!(close(PhaseType::exponential(2.0).unwrap().density(0.0).unwrap(), 2.0, 1e-15));
        assert!(matches!(ph.density(-0.1), Err(Error::Usage(_))));
    }

    #[test]
    fn erlang_sample_mean() {
        let ph = PhaseType::erlang(2, 1.0).unwrap();
        let xs = ph.sample_seeded(7, 1_000_000);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "mean {mean} se {se}");
        assert_eq!(ph_sample(&ph, 3), ph_sample(&ph, 3));
    }

    #[test]
    fn kron_examples() {
        let s = kron_sum(&Matrix::from_element(1, 1, -1.0), &Matrix::from_element(1, 1, -2.0)).unwrap();
        assert_eq!(s[(0, 0)], -3.0);
        let b = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let p = kron_prod(&Matrix::identity(2, 2), &b);
        let mut expected = Matrix::zeros(4, 4);
        expected.view_mut((0, 0), (2, 2)).copy_from(&b);
        expected.view_mut((2, 2), (2, 2)).copy_from(&b);
        assert_eq!(p, expected);
    }

    #[test]
    fn kron_sum_preserves_defect() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]);
        let k = ErlangClock::new(3, 1.5).unwrap().generator();
        let s = kron_sum(&a, &k).unwrap();
        let ik = kron_prod(&Matrix::identity(2, 2), &k);
        for r in 0..6 {
            assert!(close(s.row(r).sum(), ik.row(r).sum(), 1e-14));
        }
    }

    #[test]
    fn product_integral_constant_generator() {
        let t = Matrix::from_row_slice(2, 2, &[-2.0, 1.0, 0.5, -1.0]);
        let prop = product_integral(|_| Ok(t.clone()), 2, 2.0, 400).unwrap();
        for (y, p) in prop.points.iter().zip(&prop.values) {
            let e = mat_exp(&(&t * *y)).unwrap();
            assert!((p - e).amax() < 1e-8);
        }
    }

    #[test]
    fn product_integral_scalar_closed_form_and_order() {
        // T(y) = 2y·[-1] has P(0,y) = e^{-y²}
        let f = |y: f64| Ok(Matrix::from_element(1, 1, -2.0 * y));
        let err = |steps: usize| {
            let p = product_integral(f, 1, 2.0, steps).unwrap();
            (p.values.last().unwrap()[(0, 0)] - (-4.0f64).exp()).abs()
        };
        let (e1, e2) = (err(20), err(40));
        assert!(e2 < 1e-6);
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "RK4 ratio {ratio}");
        let p = product_integral(f, 1, 2.0, 40).unwrap();
        assert!(p.error_estimate < 1e-5);
    }

    #[test]
    fn product_integral_reports_blowup() {
        let r = product_integral(|_| Ok(Matrix::from_element(1, 1, 50.0)), 1, 1.0, 10);
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn iph_separable_matches_product_integral() {
        let t = Matrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let alpha = DVector::from_vec(vec![0.6, 0.4]);
        let sep = Iph::separable(alpha.clone(), t.clone(), |x| 1.0 + x, |x| x + 0.5 * x * x);
        let t2 = t.clone();
        let general = Iph::new(alpha, move |x| &t2 * (1.0 + x));
        for x in [0.0, 0.3, 1.0, 2.5] {
            let a = sep.density(x).unwrap();
            let b = general.density(x).unwrap();
            assert!(close(a, b, 1e-8), "x={x}: {a} vs {b}");
        }
    }

    fn random_subintensity(n: usize, seed: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                if i != j {
                    m[(i, j)] = seed[k % seed.len()];
                    row += m[(i, j)];
                    k += 1;
                }
            }
            m[(i, i)] = -row - seed[(k + i) % seed.len()];
        }
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn mat_exp_agrees_with_taylor_on_small_norms(vals in prop::collection::vec(-1.0f64..1.0, 9)) {
            let a = Matrix::from_row_slice(3, 3, &vals);
            let e = mat_exp(&a).unwrap();
            let t = taylor_exp(&a);
            prop_assert!((e - &t).amax() <= 1e-10 * t.amax().max(1.0));
        }

        #[test]
        fn kron_sum_eigenvalues_are_pairwise_sums(a in prop::collection::vec(-3.0f64..3.0, 2), b in prop::collection::vec(-3.0f64..3.0, 3), up in -1.0f64..1.0) {
            // upper-triangular inputs have explicit spectra
            let am = Matrix::from_row_slice(2, 2, &[a[0], up, 0.0, a[1]]);
            let bm = Matrix::from_row_slice(3, 3, &[b[0], up, 0.5, 0.0, b[1], up, 0.0, 0.0, b[2]]);
            let s = kron_sum(&am, &bm).unwrap();
            let mut got: Vec<f64> = s.complex_eigenvalues().iter().map(|z| z.re).collect();
            let mut want: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| x + y)).collect();
            got.sort_by(|x, y| x.partial_cmp(y).unwrap());
            want.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() < 1e-8, "{:?} vs {:?}", got, want);
            }
        }

        #[test]
        fn ph_density_integrates_to_alpha_mass(rates in prop::collection::vec(0.2f64..3.0, 6), w in 0.1f64..1.0) {
            let t = random_subintensity(3, &rates);
            let alpha = DVector::from_vec(vec![w * 0.5, w * 0.3, w * 0.2]);
            let ph = PhaseType::new(alpha.clone(), t.clone()).unwrap();
            let max_diag = (0..3).map(|i| t[(i, i)].abs()).fold(0.0, f64::max);
            let upper = 50.0 / max_diag;
            // composite Simpson on [0, upper] after transforming through the propagator
            let n = 4000;
            let h = upper / n as f64;
            let step = mat_exp(&(&t * h)).unwrap();
            let mut p = Matrix::identity(3, 3);
            let exit = ph.exit().clone();
            let mut acc = 0.0;
            for k in 0..=n {
                let f = (alpha.transpose() * &p * &exit)[(0, 0)];
                let c = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += c * f;
                p = &p * &step;
            }
            let integral = acc * h / 3.0;
            let tail = 1.0 - ph.cdf(upper).unwrap();
            prop_assert!((integral + tail - alpha.sum()).abs() < 1e-6, "integral {} tail {}", integral, tail);
        }

        #[test]
        fn propagator_is_substochastic(rates in prop::collection::vec(0.1f64..2.0, 6), y in 0.1f64..3.0) {
            let t = random_subintensity(3, &rates);
            let prop = product_integral(|s| Ok(&t * (1.0 + s)), 3, y, 50).unwrap();
            for p in &prop.values {
                for i in 0..3 {
                    let r = p.row(i).sum();
                    prop_assert!(r >= -1e-12 && r <= 1.0 + 1e-12);
                }
            }
        }
    }
}
