//! Smooth objectives, finite-sum objectives, stochastic gradient oracles, and
//! the deterministic RNG streams that drive them.
//!
//! Every objective declares its lower bound `f_bar` and a gradient Lipschitz
//! modulus analytically; both enter the verifier's recursion checks exactly,
//! so neither is ever estimated from data. Oracles are constructed so the
//! second-moment bound `E[||g - grad f||^2] <= C (f(x) - f_bar) + D` holds
//! with equality, which makes the bound itself testable.

use crate::error::{Error, Result};
use crate::linalg;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// RNG streams
// ---------------------------------------------------------------------------

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    // Stafford variant 13 finalizer (the splitmix64 output function).
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based random stream: the `i`-th draw is a pure function of
/// `(seed, replication_index, counter + i)`, so streams can be split and
/// replications evaluated in any order while reproducing identical draws
/// bit for bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub replication_index: u64,
    pub counter: u64,
    base: u64,
}

impl RngStream {
    pub fn new(seed: u64, replication_index: u64) -> Self {
        let base = mix64(seed ^ mix64(replication_index.wrapping_mul(GOLDEN_GAMMA) ^ 0x5851_F42D_4C95_7F2D));
        RngStream {
            seed,
            replication_index,
            counter: 0,
            base,
        }
    }

    /// Independent stream derived from this one; used for frozen-state
    /// resampling so probe draws never disturb the parent stream.
    pub fn substream(&self, tag: u64) -> RngStream {
        RngStream::new(
            mix64(self.base ^ tag.wrapping_mul(GOLDEN_GAMMA)),
            self.replication_index,
        )
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = mix64(self.base.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)));
        self.counter += 1;
        out
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`, safe as a log argument.
    #[inline]
    fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Unbiased integer in `[0, n)` by rejection.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Uniform random permutation of `0..n` by Fisher-Yates.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.next_below((i + 1) as u64) as usize;
            p.swap(i, j);
        }
        p
    }
}

// ---------------------------------------------------------------------------
// Smooth objectives
// ---------------------------------------------------------------------------

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A continuously differentiable objective with a declared lower bound and a
/// declared modulus for its gradient.
///
/// `lipschitz` is certified on the ball `||x||_inf <= sample_radius`
/// (infinite radius means globally); samplers in tests and in the verifier
/// stay inside that region.
#[derive(Clone)]
pub struct SmoothObjective {
    pub dim: usize,
    pub f_bar: f64,
    pub lipschitz: f64,
    pub sample_radius: f64,
    value: ValueFn,
    gradient: GradFn,
}

impl std::fmt::Debug for SmoothObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothObjective")
            .field("dim", &self.dim)
            .field("f_bar", &self.f_bar)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl SmoothObjective {
    pub fn new<V, G>(dim: usize, f_bar: f64, lipschitz: f64, value: V, gradient: G) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        SmoothObjective {
            dim,
            f_bar,
            lipschitz,
            sample_radius: f64::INFINITY,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    pub fn with_sample_radius(mut self, r: f64) -> Self {
        self.sample_radius = r;
        self
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let v = (self.value)(x);
        assert!(
            v >= self.f_bar - 1e-8 * (1.0 + self.f_bar.abs()),
            "objective value {v} below declared lower bound {}",
            self.f_bar
        );
        v
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    /// Gap `f(x) - f_bar`, the quantity the descent recursions track.
    pub fn gap(&self, x: &[f64]) -> f64 {
        self.value(x) - self.f_bar
    }
}

/// Average of `N` smooth components sharing dimension, lower bound and
/// modulus; the full objective is `f(x) = (1/N) sum_i f(x, i)`.
#[derive(Clone, Debug)]
pub struct FiniteSumObjective {
    pub components: Vec<SmoothObjective>,
}

impl FiniteSumObjective {
    pub fn new(components: Vec<SmoothObjective>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("finite sum needs N >= 1".into()));
        }
        let dim = components[0].dim;
        if components.iter().any(|c| c.dim != dim) {
            return Err(Error::InvalidParameter(
                "finite-sum components must share the dimension".into(),
            ));
        }
        Ok(FiniteSumObjective { components })
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim
    }

    /// Common lower bound: every component is bounded below by it, hence so
    /// is the average.
    pub fn f_bar(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.f_bar)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Common modulus (max over components, valid for the average too).
    pub fn lipschitz(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.lipschitz)
            .fold(0.0, f64::max)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|c| c.value(x)).sum::<f64>() / self.n() as f64
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for c in &self.components {
            let gc = c.gradient(x);
            for (a, b) in g.iter_mut().zip(&gc) {
                *a += b;
            }
        }
        let inv = 1.0 / self.n() as f64;
        g.iter_mut().for_each(|v| *v *= inv);
        g
    }

    /// The averaged objective as a single `SmoothObjective`.
    pub fn full(&self) -> SmoothObjective {
        let fs = self.clone();
        let fs2 = self.clone();
        SmoothObjective::new(
            self.dim(),
            self.f_bar(),
            self.lipschitz(),
            move |x: &[f64]| fs.value(x),
            move |x: &[f64]| fs2.gradient(x),
        )
    }
}

// ---------------------------------------------------------------------------
// Stochastic gradient oracle
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    GaussianIsotropic,
    BoundedUniform,
    Zero,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_isotropic" => Ok(NoiseKind::GaussianIsotropic),
            "bounded_uniform" => Ok(NoiseKind::BoundedUniform),
            "zero" => Ok(NoiseKind::Zero),
            other => Err(Error::UnknownName(format!("noise kind `{other}`"))),
        }
    }
}

/// Unbiased gradient oracle whose conditional noise second moment equals
/// `C (f(x) - f_bar) + D` by construction.
#[derive(Clone, Debug)]
pub struct AbcOracle {
    pub base: SmoothObjective,
    pub c: f64,
    pub d: f64,
    pub noise_kind: NoiseKind,
}

impl AbcOracle {
    pub fn new(base: SmoothObjective, c: f64, d: f64, noise_kind: NoiseKind) -> Result<Self> {
        if c < 0.0 || d < 0.0 {
            return Err(Error::InvalidParameter(
                "oracle constants C, D must be nonnegative".into(),
            ));
        }
        Ok(AbcOracle {
            base,
            c,
            d,
            noise_kind,
        })
    }

    pub fn noiseless(base: SmoothObjective) -> Self {
        AbcOracle {
            base,
            c: 0.0,
            d: 0.0,
            noise_kind: NoiseKind::Zero,
        }
    }

    /// Draw `grad f(x) + eps` with `E eps = 0` and `E||eps||^2 = C (f(x)-f_bar) + D`.
    pub fn sample(&self, x: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        if !linalg::all_finite(x) {
            return Err(Error::NonFinite("oracle query point".into()));
        }
        let mut g = self.base.gradient(x);
        if matches!(self.noise_kind, NoiseKind::Zero) {
            return Ok(g);
        }
        let var = self.c * self.base.gap(x) + self.d;
        assert!(var >= 0.0, "constructed noise variance must be nonnegative");
        if var == 0.0 {
            return Ok(g);
        }
        let n = self.base.dim as f64;
        match self.noise_kind {
            NoiseKind::GaussianIsotropic => {
                // eps = sigma * z / sqrt(n) with z standard normal.
                let s = (var / n).sqrt();
                for gi in g.iter_mut() {
                    *gi += s * rng.next_normal();
                }
            }
            NoiseKind::BoundedUniform => {
                // eps_i = sigma * sqrt(3/n) * u_i with u_i uniform on [-1, 1];
                // E||eps||^2 = sigma^2 exactly, and the noise stays bounded.
                let s = (3.0 * var / n).sqrt();
                for gi in g.iter_mut() {
                    *gi += s * (2.0 * rng.next_f64() - 1.0);
                }
            }
            NoiseKind::Zero => unreachable!(),
        }
        Ok(g)
    }
}

// ---------------------------------------------------------------------------
// Problem catalog
// ---------------------------------------------------------------------------

/// Catalog entry describing a desk-scale test problem.
#[derive(Clone, Debug)]
pub enum ProblemSpec {
    /// `f(x) = 1/2 (x-c)^T Q (x-c)` with symmetric PSD `Q`; `f_bar = 0`.
    Quadratic { q: Vec<Vec<f64>>, center: Vec<f64> },
    /// `f(x) = 1/2 ||A x - b||^2`; `f_bar` is the least-squares residual.
    LeastSquares { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// `f(x,i) = log(1 + exp(-y_i <a_i, x>))` averaged over the data.
    LogisticFiniteSum { data: Vec<(Vec<f64>, f64)> },
    /// 2-D banana valley plus Tikhonov term `mu/2 ||x||^2`; the declared
    /// modulus is certified on `||x||_inf <= 3`.
    RosenbrockRegularized { mu: f64 },
}

#[derive(Clone, Debug)]
pub enum BuiltProblem {
    Smooth(SmoothObjective),
    FiniteSum(FiniteSumObjective),
}

impl BuiltProblem {
    pub fn smooth(&self) -> SmoothObjective {
        match self {
            BuiltProblem::Smooth(s) => s.clone(),
            BuiltProblem::FiniteSum(fs) => fs.full(),
        }
    }

    pub fn finite_sum(&self) -> Option<&FiniteSumObjective> {
        match self {
            BuiltProblem::FiniteSum(fs) => Some(fs),
            BuiltProblem::Smooth(_) => None,
        }
    }
}

const DIM_CAP: usize = 100;

/// Build a catalog problem with analytically correct `f_bar` and modulus.
pub fn build_problem(spec: &ProblemSpec) -> Result<BuiltProblem> {
    match spec {
        ProblemSpec::Quadratic { q, center } => {
            let n = q.len();
            check_dim(n)?;
            if center.len() != n || q.iter().any(|row| row.len() != n) {
                return Err(Error::InvalidParameter(
                    "quadratic: Q must be square and match the center length".into(),
                ));
            }
            for i in 0..n {
                for j in 0..n {
                    if (q[i][j] - q[j][i]).abs() > 1e-12 * (1.0 + q[i][j].abs()) {
                        return Err(Error::InvalidParameter("quadratic: Q must be symmetric".into()));
                    }
                }
            }
            let lambda_max = linalg::largest_eigenvalue(q, 1e-10);
            let lambda_min = linalg::smallest_eigenvalue(q, 1e-10);
            if lambda_min < -1e-9 * (1.0 + lambda_max.abs()) {
                return Err(Error::InvalidParameter(
                    "quadratic: Q is not positive semidefinite, objective unbounded below".into(),
                ));
            }
            let (qv, cv, qg, cg) = (q.clone(), center.clone(), q.clone(), center.clone());
            Ok(BuiltProblem::Smooth(SmoothObjective::new(
                n,
                0.0,
                lambda_max,
                move |x: &[f64]| {
                    let d = linalg::sub(x, &cv);
                    0.5 * linalg::dot(&d, &linalg::mat_vec(&qv, &d))
                },
                move |x: &[f64]| linalg::mat_vec(&qg, &linalg::sub(x, &cg)),
            )))
        }
        ProblemSpec::LeastSquares { a, b } => {
            let m = a.len();
            let n = a.first().map_or(0, |r| r.len());
            check_dim(n)?;
            if b.len() != m || n == 0 {
                return Err(Error::InvalidParameter(
                    "least_squares: shape of A and b mismatch".into(),
                ));
            }
            let g = linalg::gram(a);
            let lambda_max = linalg::largest_eigenvalue(&g, 1e-10);
            // f_bar: exact residual at the normal-equations solution. With a
            // rank-deficient A the residual is still attained by any solution
            // of the (regularized) normal equations.
            let rhs = linalg::mat_t_vec(a, b);
            let x_star = linalg::solve(&g, &rhs).ok_or_else(|| {
                Error::InvalidParameter("least_squares: A must have full column rank".into())
            })?;
            let r = linalg::sub(&linalg::mat_vec(a, &x_star), b);
            let f_bar = 0.5 * linalg::dot(&r, &r);
            let (av, bv, ag, bg) = (a.clone(), b.clone(), a.clone(), b.clone());
            Ok(BuiltProblem::Smooth(SmoothObjective::new(
                n,
                f_bar,
                lambda_max,
                move |x: &[f64]| {
                    let r = linalg::sub(&linalg::mat_vec(&av, x), &bv);
                    0.5 * linalg::dot(&r, &r)
                },
                move |x: &[f64]| linalg::mat_t_vec(&ag, &linalg::sub(&linalg::mat_vec(&ag, x), &bg)),
            )))
        }
        ProblemSpec::LogisticFiniteSum { data } => {
            let n = data.first().map(|(a, _)| a.len()).ok_or_else(|| {
                Error::InvalidParameter("logistic_finite_sum: empty data".into())
            })?;
            check_dim(n)?;
            let components = data
                .iter()
                .map(|(a, y)| {
                    if a.len() != n {
                        return Err(Error::InvalidParameter(
                            "logistic_finite_sum: inconsistent feature dimension".into(),
                        ));
                    }
                    Ok(logistic_component(a.clone(), *y))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BuiltProblem::FiniteSum(FiniteSumObjective::new(components)?))
        }
        ProblemSpec::RosenbrockRegularized { mu } => {
            if *mu < 0.0 {
                return Err(Error::InvalidParameter("rosenbrock: mu must be >= 0".into()));
            }
            let mu = *mu;
            const R: f64 = 3.0;
            // Hessian sup bound on |x|,|y| <= R via row sums:
            // H = [[2 + 1200 x^2 - 400 y + mu, -400 x], [-400 x, 200 + mu]].
            let l_box = (2.0 + 1200.0 * R * R + 400.0 * R + 400.0 * R + mu).max(400.0 * R + 200.0 + mu);
            Ok(BuiltProblem::Smooth(
                SmoothObjective::new(
                    2,
                    0.0,
                    l_box,
                    move |x: &[f64]| {
                        let (a, b) = (x[0], x[1]);
                        (1.0 - a).powi(2)
                            + 100.0 * (b - a * a).powi(2)
                            + 0.5 * mu * (a * a + b * b)
                    },
                    move |x: &[f64]| {
                        let (a, b) = (x[0], x[1]);
                        vec![
                            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a) + mu * a,
                            200.0 * (b - a * a) + mu * b,
                        ]
                    },
                )
                .with_sample_radius(R),
            ))
        }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > DIM_CAP {
        return Err(Error::InvalidParameter(format!(
            "dimension {n} outside the catalog range 1..={DIM_CAP}"
        )));
    }
    Ok(())
}

/// One logistic loss term `log(1 + exp(-y <a, x>))` with modulus `||a||^2 / 4`.
pub fn logistic_component(a: Vec<f64>, y: f64) -> SmoothObjective {
    let l = linalg::dot(&a, &a) / 4.0;
    let (av, ag) = (a.clone(), a);
    let dim = av.len();
    SmoothObjective::new(
        dim,
        0.0,
        l,
        move |x: &[f64]| log1p_exp(-y * linalg::dot(&av, x)),
        move |x: &[f64]| {
            let z = -y * linalg::dot(&ag, x);
            let s = sigmoid(z);
            linalg::scale(&ag, -y * s)
        },
    )
}

/// `1/2 s ||x - c||^2` as a component, handy for hand-checkable finite sums.
pub fn quadratic_component(center: Vec<f64>, s: f64) -> SmoothObjective {
    let (c1, c2) = (center.clone(), center.clone());
    let dim = c1.len();
    SmoothObjective::new(
        dim,
        0.0,
        s,
        move |x: &[f64]| {
            let d = linalg::sub(x, &c1);
            0.5 * s * linalg::dot(&d, &d)
        },
        move |x: &[f64]| linalg::scale(&linalg::sub(x, &c2), s),
    )
}

fn log1p_exp(z: f64) -> f64 {
    if z <= 0.0 {
        z.exp().ln_1p()
    } else {
        z + (-z).exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Deterministic synthetic logistic data for the CLI catalog.
pub fn synthetic_logistic_data(n_points: usize, dim: usize, data_seed: u64) -> Vec<(Vec<f64>, f64)> {
    let mut rng = RngStream::new(data_seed, u64::MAX);
    (0..n_points)
        .map(|_| {
            let a: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
            let y = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
            (a, y)
        })
        .collect()
}

/// Deterministic synthetic least-squares data for the CLI catalog.
pub fn synthetic_least_squares(m: usize, dim: usize, data_seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = RngStream::new(data_seed, u64::MAX - 1);
    let a: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..dim).map(|_| rng.next_normal()).collect())
        .collect();
    let b: Vec<f64> = (0..m).map(|_| rng.next_normal()).collect();
    (a, b)
}
