//! Method runners: SGD, random reshuffling, proximal stochastic gradient,
//! and stochastic model-based methods, plus step-size schedules and the
//! per-iteration traces they emit.
//!
//! Conventions shared by all runners:
//! * record `k` describes state `x^k` (objective, measure) and the transition
//!   to `x^{k+1}` (`alpha`, `step_len`); the last record's `step_len` is NaN.
//! * expensive stationarity measures are logged every `stride` iterations;
//!   untaken slots hold NaN.
//! * step-size admissibility caps are enforced by skipping the schedule
//!   forward to its first admissible index (recorded in the trace), never by
//!   clipping values, so summability properties survive intact.
//! * an iterate norm above `1e12` truncates the run with a divergence flag
//!   instead of aborting, so ensembles always complete.

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::{AbcOracle, FiniteSumObjective, RngStream, SmoothObjective};
use crate::regularizers::Regularizer;
use crate::stationarity::{moreau_env_1d, moreau_prox, natural_residual, CompositeProblem};

pub const DIVERGENCE_NORM: f64 = 1e12;

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    /// `alpha_k = c`
    Constant { c: f64 },
    /// `alpha_k = c / (k+1)^p`
    InvK { c: f64, p: f64 },
    /// `alpha_k = c / ((k+1) log(k+2))`
    InvKLog { c: f64 },
    /// `1/(k+2)` for even `k`, `1/((k+1)(k+2))` for odd `k`
    AlternatingH,
}

/// Summability properties a schedule declares about itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct ScheduleFlags {
    pub sum_diverges: bool,
    pub sum_sq_finite: bool,
    pub sum_cube_finite: bool,
}

impl Schedule {
    pub fn value(&self, k: u64) -> f64 {
        let kf = k as f64;
        match *self {
            Schedule::Constant { c } => c,
            Schedule::InvK { c, p } => c / (kf + 1.0).powf(p),
            Schedule::InvKLog { c } => c / ((kf + 1.0) * (kf + 2.0).ln()),
            Schedule::AlternatingH => {
                if k % 2 == 0 {
                    1.0 / (kf + 2.0)
                } else {
                    1.0 / ((kf + 1.0) * (kf + 2.0))
                }
            }
        }
    }

    pub fn flags(&self) -> ScheduleFlags {
        match *self {
            Schedule::Constant { .. } => ScheduleFlags {
                sum_diverges: true,
                sum_sq_finite: false,
                sum_cube_finite: false,
            },
            Schedule::InvK { p, .. } => ScheduleFlags {
                sum_diverges: p <= 1.0,
                sum_sq_finite: p > 0.5,
                sum_cube_finite: p > 1.0 / 3.0,
            },
            Schedule::InvKLog { .. } => ScheduleFlags {
                sum_diverges: true,
                sum_sq_finite: true,
                sum_cube_finite: true,
            },
            Schedule::AlternatingH => ScheduleFlags {
                sum_diverges: true,
                sum_sq_finite: true,
                sum_cube_finite: true,
            },
        }
    }

    /// Whether `sum_k alpha_k^e` is finite.
    pub fn power_sum_finite(&self, e: f64) -> bool {
        match *self {
            Schedule::Constant { .. } => false,
            Schedule::InvK { p, .. } => p * e > 1.0,
            // sum (1/(k log k))^e diverges at e = 1 (iterated-log rate)
            Schedule::InvKLog { .. } => e > 1.0,
            // even-index terms behave like 1/k
            Schedule::AlternatingH => e > 1.0,
        }
    }

    /// Smallest offset `k0` with `alpha_k < cap` for every `k >= k0`.
    pub fn first_index_below(&self, cap: f64) -> Result<u64> {
        if !(cap > 0.0) {
            return Err(Error::InvalidParameter("schedule cap must be > 0".into()));
        }
        if cap.is_infinite() {
            return Ok(0);
        }
        match *self {
            Schedule::Constant { c } => {
                if c < cap {
                    Ok(0)
                } else {
                    Err(Error::IncompatibleConfig(format!(
                        "constant step {c} never drops below the admissibility cap {cap}"
                    )))
                }
            }
            Schedule::InvK { .. } | Schedule::InvKLog { .. } => {
                // monotone: exponential search then binary search
                if self.value(0) < cap {
                    return Ok(0);
                }
                let mut hi = 1u64;
                while self.value(hi) >= cap {
                    hi *= 2;
                    if hi > 1 << 50 {
                        return Err(Error::IncompatibleConfig(
                            "schedule admissibility index beyond 2^50".into(),
                        ));
                    }
                }
                let mut lo = hi / 2;
                while lo + 1 < hi {
                    let mid = lo + (hi - lo) / 2;
                    if self.value(mid) < cap {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok(hi)
            }
            Schedule::AlternatingH => {
                // even-index values dominate: need 1/(k+2) < cap onward
                let mut k0 = 0u64;
                while self.value(k0).max(self.value(k0 + 1)) >= cap {
                    k0 += 1;
                    if k0 > 1 << 40 {
                        return Err(Error::IncompatibleConfig(
                            "alternating schedule never admissible".into(),
                        ));
                    }
                }
                Ok(k0)
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Schedule::Constant { c } => format!("constant:{c}"),
            Schedule::InvK { c, p } => format!("inv_k:{c}:{p}"),
            Schedule::InvKLog { c } => format!("inv_k_log:{c}"),
            Schedule::AlternatingH => "alternating_h".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Schedule> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| -> Result<f64> {
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad schedule number `{t}`")))
        };
        match parts.as_slice() {
            ["constant", c] => Ok(Schedule::Constant { c: num(c)? }),
            ["inv_k", c, p] => Ok(Schedule::InvK { c: num(c)?, p: num(p)? }),
            ["inv_k_log", c] => Ok(Schedule::InvKLog { c: num(c)? }),
            ["alternating_h"] => Ok(Schedule::AlternatingH),
            _ => Err(Error::UnknownName(format!("schedule `{s}`"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sgd,
    Rr,
    ProxSgd,
    Smm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::Rr => "rr",
            Method::ProxSgd => "prox_sgd",
            Method::Smm => "smm",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Method::Sgd),
            "rr" => Ok(Method::Rr),
            "prox_sgd" => Ok(Method::ProxSgd),
            "smm" => Ok(Method::Smm),
            other => Err(Error::UnknownName(format!("method `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    /// `||grad f(x^k)||`
    Grad,
    /// `||F_nat^alpha(x^k)||`
    NatResidual,
    /// `||grad env_{theta psi}(x^k)||`
    EnvGrad,
}

impl std::str::FromStr for MeasureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grad" => Ok(MeasureKind::Grad),
            "nat_residual" => Ok(MeasureKind::NatResidual),
            "env_grad" => Ok(MeasureKind::EnvGrad),
            other => Err(Error::UnknownName(format!("measure `{other}`"))),
        }
    }
}

impl MeasureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MeasureKind::Grad => "grad",
            MeasureKind::NatResidual => "nat_residual",
            MeasureKind::EnvGrad => "env_grad",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub k: u64,
    pub alpha: f64,
    pub obj: f64,
    /// Stationarity measure at `x^k`; NaN when not logged at this `k`.
    pub measure: f64,
    /// `||x^{k+1} - x^k||`; NaN on the final record.
    pub step_len: f64,
}

/// Per-run record of one replication.
#[derive(Clone, Debug)]
pub struct Trace {
    pub method: Method,
    pub records: Vec<TraceRecord>,
    /// `env_{theta psi}(x^k) - psi_bar` where computed (NaN elsewhere);
    /// carried in memory for the verifier's recursion checks.
    pub env_gap: Vec<f64>,
    /// Iterate snapshots `(k, x^k)` at the measure stride.
    pub snapshots: Vec<(u64, Vec<f64>)>,
    pub final_x: Vec<f64>,
    pub seed: u64,
    pub replication: u64,
    pub diverged: bool,
    pub warnings: Vec<String>,
    /// Offset added to the schedule index to satisfy admissibility caps.
    pub schedule_offset: u64,
    /// Envelope parameter used for `EnvGrad` measures (NaN otherwise).
    pub theta: f64,
}

impl Trace {
    fn new(method: Method, seed: u64, replication: u64) -> Self {
        Trace {
            method,
            records: Vec::new(),
            env_gap: Vec::new(),
            snapshots: Vec::new(),
            final_x: Vec::new(),
            seed,
            replication,
            diverged: false,
            warnings: Vec::new(),
            schedule_offset: 0,
            theta: f64::NAN,
        }
    }

    pub fn t_max(&self) -> u64 {
        self.records.last().map_or(0, |r| r.k)
    }

    /// CSV serialization with the fixed `k,alpha,obj,measure,step_len` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,alpha,obj,measure,step_len\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.k, r.alpha, r.obj, r.measure, r.step_len
            ));
        }
        out
    }

    pub fn records_from_csv(text: &str) -> Result<Vec<TraceRecord>> {
        let mut lines = text.lines();
        match lines.next() {
            Some("k,alpha,obj,measure,step_len") => {}
            other => {
                return Err(Error::Parse(format!(
                    "bad CSV header {other:?}, expected k,alpha,obj,measure,step_len"
                )))
            }
        }
        lines
            .enumerate()
            .map(|(i, line)| {
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() != 5 {
                    return Err(Error::Parse(format!("row {i}: expected 5 columns")));
                }
                let f = |s: &str| -> Result<f64> {
                    s.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("row {i}: bad float `{s}`")))
                };
                Ok(TraceRecord {
                    k: cols[0]
                        .parse::<u64>()
                        .map_err(|_| Error::Parse(format!("row {i}: bad k `{}`", cols[0])))?,
                    alpha: f(cols[1])?,
                    obj: f(cols[2])?,
                    measure: f(cols[3])?,
                    step_len: f(cols[4])?,
                })
            })
            .collect()
    }
}

fn diverged(x: &[f64]) -> bool {
    !linalg::all_finite(x) || linalg::norm(x) > DIVERGENCE_NORM
}

// ---------------------------------------------------------------------------
// SGD
// ---------------------------------------------------------------------------

/// `x^{k+1} = x^k - alpha_k g^k`. The logged measure `||grad f(x^k)||` uses
/// the true gradient for diagnostics only; the update never sees it.
pub fn run_sgd(
    oracle: &AbcOracle,
    schedule: &Schedule,
    x0: &[f64],
    t: u64,
    rng: &mut RngStream,
) -> Result<Trace> {
    if t < 1 {
        return Err(Error::InvalidParameter("run_sgd: T must be >= 1".into()));
    }
    let obj = &oracle.base;
    let mut trace = Trace::new(Method::Sgd, rng.seed, rng.replication_index);
    let snap = snapshot_stride(t);
    let mut x = x0.to_vec();
    for k in 0..=t {
        let alpha = schedule.value(k);
        let fx = obj.value(&x);
        let measure = linalg::norm(&obj.gradient(&x));
        if k % snap == 0 || k == t {
            trace.snapshots.push((k, x.clone()));
        }
        if k == t {
            trace.records.push(TraceRecord { k, alpha, obj: fx, measure, step_len: f64::NAN });
            trace.env_gap.push(f64::NAN);
            break;
        }
        let g = oracle.sample(&x, rng)?;
        let x_next = linalg::axpy(&x, -alpha, &g);
        let step_len = linalg::dist(&x_next, &x);
        trace.records.push(TraceRecord { k, alpha, obj: fx, measure, step_len });
        trace.env_gap.push(f64::NAN);
        x = x_next;
        if diverged(&x) {
            trace.diverged = true;
            break;
        }
    }
    trace.final_x = x;
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Random reshuffling
// ---------------------------------------------------------------------------

/// One epoch: `N` sequential component-gradient steps along `perm`.
pub fn rr_epoch(fs: &FiniteSumObjective, x: &[f64], alpha: f64, perm: &[usize]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &i in perm {
        let g = fs.components[i].gradient(&y);
        y = linalg::axpy(&y, -alpha, &g);
    }
    y
}

/// Random reshuffling over the finite sum; one trace record per epoch.
/// Requires a schedule with a finite cube sum.
pub fn run_rr(
    fs: &FiniteSumObjective,
    schedule: &Schedule,
    x0: &[f64],
    t_epochs: u64,
    rng: &mut RngStream,
) -> Result<Trace> {
    if t_epochs < 1 {
        return Err(Error::InvalidParameter("run_rr: T must be >= 1".into()));
    }
    if !schedule.flags().sum_cube_finite {
        return Err(Error::IncompatibleConfig(
            "random reshuffling needs a schedule with finite cube sum".into(),
        ));
    }
    let full = fs.full();
    let mut trace = Trace::new(Method::Rr, rng.seed, rng.replication_index);
    let snap = snapshot_stride(t_epochs);
    let mut x = x0.to_vec();
    for k in 0..=t_epochs {
        let alpha = schedule.value(k);
        let fx = full.value(&x);
        let measure = linalg::norm(&full.gradient(&x));
        if k % snap == 0 || k == t_epochs {
            trace.snapshots.push((k, x.clone()));
        }
        if k == t_epochs {
            trace.records.push(TraceRecord { k, alpha, obj: fx, measure, step_len: f64::NAN });
            trace.env_gap.push(f64::NAN);
            break;
        }
        let perm = rng.permutation(fs.n());
        let x_next = rr_epoch(fs, &x, alpha, &perm);
        let step_len = linalg::dist(&x_next, &x);
        trace.records.push(TraceRecord { k, alpha, obj: fx, measure, step_len });
        trace.env_gap.push(f64::NAN);
        x = x_next;
        if diverged(&x) {
            trace.diverged = true;
            break;
        }
    }
    trace.final_x = x;
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Proximal SGD
// ---------------------------------------------------------------------------

/// Measurement knobs shared by the composite runners.
#[derive(Clone, Copy, Debug)]
pub struct MeasureOptions {
    pub kind: MeasureKind,
    /// Stride for expensive measures; 0 means `max(1, T/200)`.
    pub stride: u64,
    /// Envelope parameter; None picks the problem default.
    pub theta: Option<f64>,
    pub env_tol: f64,
    /// Extra step-size admissibility cap (e.g. the envelope descent
    /// bound's `1/(2 (1/theta - L - tau))`), enforced like the built-in
    /// `1/(2 tau)` cap: by skipping the schedule forward, never clipping.
    pub alpha_cap: Option<f64>,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions {
            kind: MeasureKind::EnvGrad,
            stride: 0,
            theta: None,
            env_tol: crate::stationarity::DEFAULT_ENV_TOL,
            alpha_cap: None,
        }
    }
}

fn effective_stride(stride: u64, t: u64) -> u64 {
    if stride == 0 {
        (t / 200).max(1)
    } else {
        stride
    }
}

/// Iterate snapshots are kept at this coarse stride on every runner; the
/// frozen-state resampler draws its probe points from them.
fn snapshot_stride(t: u64) -> u64 {
    (t / 16).max(1)
}

/// `x^{k+1} = prox_{alpha_k phi}(x^k - alpha_k g^k)`.
///
/// The schedule is skipped forward until `alpha_k < 1/(2 tau)`; with a
/// non-Lipschitz regularizer the run proceeds but carries a warning flag,
/// since the guarantees it is checked against assume a Lipschitz `phi`.
pub fn run_prox_sgd(
    cp: &CompositeProblem,
    oracle: &AbcOracle,
    schedule: &Schedule,
    x0: &[f64],
    t: u64,
    rng: &mut RngStream,
    opts: &MeasureOptions,
) -> Result<Trace> {
    if t < 1 {
        return Err(Error::InvalidParameter("run_prox_sgd: T must be >= 1".into()));
    }
    let theta = opts.theta.unwrap_or_else(|| cp.default_theta());
    let mut trace = Trace::new(Method::ProxSgd, rng.seed, rng.replication_index);
    trace.theta = theta;
    if cp.phi.lipschitz.is_none() {
        trace
            .warnings
            .push("regularizer is not Lipschitz; results are outside the checked guarantees".into());
    }
    let tau_cap = if cp.phi.tau > 0.0 {
        0.5 / cp.phi.tau
    } else {
        f64::INFINITY
    };
    let cap = tau_cap.min(opts.alpha_cap.unwrap_or(f64::INFINITY));
    let offset = schedule.first_index_below(cap)?;
    trace.schedule_offset = offset;
    let stride = effective_stride(opts.stride, t);
    let snap = snapshot_stride(t);
    let psi_bar = cp.psi_bar();

    let mut x = x0.to_vec();
    if !cp.phi.in_domain(&x) {
        x = cp.phi.prox(0.5 * theta.min(cp.phi.max_prox_step()), &x)?;
    }
    for k in 0..=t {
        let alpha = schedule.value(k + offset);
        let fx = cp.psi(&x);
        let log_now = opts.kind == MeasureKind::Grad || k % stride == 0 || k == t;
        let (measure, env_gap) = if log_now {
            measure_at(cp, opts.kind, theta, opts.env_tol, psi_bar, &x)?
        } else {
            (f64::NAN, f64::NAN)
        };
        if k % snap == 0 || k == t {
            trace.snapshots.push((k, x.clone()));
        }
        if k == t {
            trace.records.push(TraceRecord { k, alpha, obj: fx, measure, step_len: f64::NAN });
            trace.env_gap.push(env_gap);
            break;
        }
        let g = oracle.sample(&x, rng)?;
        let x_next = cp.phi.prox(alpha, &linalg::axpy(&x, -alpha, &g))?;
        let step_len = linalg::dist(&x_next, &x);
        trace.records.push(TraceRecord { k, alpha, obj: fx, measure, step_len });
        trace.env_gap.push(env_gap);
        x = x_next;
        if diverged(&x) {
            trace.diverged = true;
            break;
        }
    }
    trace.final_x = x;
    Ok(trace)
}

fn measure_at(
    cp: &CompositeProblem,
    kind: MeasureKind,
    theta: f64,
    env_tol: f64,
    psi_bar: f64,
    x: &[f64],
) -> Result<(f64, f64)> {
    match kind {
        MeasureKind::Grad => Ok((linalg::norm(&cp.f.gradient(x)), f64::NAN)),
        MeasureKind::NatResidual => {
            let r = natural_residual(cp, cp.default_alpha(), x)?;
            Ok((linalg::norm(&r), f64::NAN))
        }
        MeasureKind::EnvGrad => {
            let env = moreau_prox(cp, theta, x, env_tol)?;
            Ok((env.grad_norm(), env.env_value - psi_bar))
        }
    }
}

// ---------------------------------------------------------------------------
// Stochastic model-based methods
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelType {
    Subgradient,
    ProximalPoint,
    ProxLinear,
}

impl std::str::FromStr for ModelType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subgradient" => Ok(ModelType::Subgradient),
            "proximal_point" => Ok(ModelType::ProximalPoint),
            "prox_linear" => Ok(ModelType::ProxLinear),
            other => Err(Error::UnknownName(format!("model type `{other}`"))),
        }
    }
}

/// Finite family of stochastic components `f(x, i)`; the objective is their
/// average. Each variant exposes what the model types need: subgradients for
/// the linear model, smooth gradients for the proximal-point model, and a
/// scalar inner map `c` with gradient for the prox-linear model.
#[derive(Clone, Debug)]
pub enum StochasticFamily {
    /// `f(x, i) = |<a_i, x> - b_i|`
    RobustLinear { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// `f(x, i) = |<a_i, x>^2 - b_i|`
    PhaseRetrieval { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// `f(x, i) = s/2 ||x - c_i||^2`
    SmoothQuadratic { centers: Vec<Vec<f64>>, scale: f64 },
}

impl StochasticFamily {
    pub fn n(&self) -> usize {
        match self {
            StochasticFamily::RobustLinear { a, .. } => a.len(),
            StochasticFamily::PhaseRetrieval { a, .. } => a.len(),
            StochasticFamily::SmoothQuadratic { centers, .. } => centers.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            StochasticFamily::RobustLinear { a, .. } => a[0].len(),
            StochasticFamily::PhaseRetrieval { a, .. } => a[0].len(),
            StochasticFamily::SmoothQuadratic { centers, .. } => centers[0].len(),
        }
    }

    pub fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        match self {
            StochasticFamily::RobustLinear { a, b } => (linalg::dot(&a[i], x) - b[i]).abs(),
            StochasticFamily::PhaseRetrieval { a, b } => {
                let z = linalg::dot(&a[i], x);
                (z * z - b[i]).abs()
            }
            StochasticFamily::SmoothQuadratic { centers, scale } => {
                let d = linalg::sub(x, &centers[i]);
                0.5 * scale * linalg::dot(&d, &d)
            }
        }
    }

    pub fn mean_value(&self, x: &[f64]) -> f64 {
        (0..self.n()).map(|i| self.component_value(i, x)).sum::<f64>() / self.n() as f64
    }

    /// A subgradient of `f(., i)` at `x`.
    pub fn subgradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        match self {
            StochasticFamily::RobustLinear { a, b } => {
                let s = (linalg::dot(&a[i], x) - b[i]).signum();
                linalg::scale(&a[i], s)
            }
            StochasticFamily::PhaseRetrieval { a, b } => {
                let z = linalg::dot(&a[i], x);
                let s = (z * z - b[i]).signum();
                linalg::scale(&a[i], s * 2.0 * z)
            }
            StochasticFamily::SmoothQuadratic { centers, scale } => {
                linalg::scale(&linalg::sub(x, &centers[i]), *scale)
            }
        }
    }

    /// Scalar inner map `c(x, i)` and its gradient, for the prox-linear model.
    fn inner(&self, i: usize, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        match self {
            StochasticFamily::RobustLinear { a, b } => {
                Some((linalg::dot(&a[i], x) - b[i], a[i].clone()))
            }
            StochasticFamily::PhaseRetrieval { a, b } => {
                let z = linalg::dot(&a[i], x);
                Some((z * z - b[i], linalg::scale(&a[i], 2.0 * z)))
            }
            StochasticFamily::SmoothQuadratic { .. } => None,
        }
    }

    fn smooth_grad(&self, i: usize, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        match self {
            StochasticFamily::SmoothQuadratic { centers, scale } => Some((
                linalg::scale(&linalg::sub(x, &centers[i]), *scale),
                *scale,
            )),
            _ => None,
        }
    }

    /// Weak-convexity modulus of the components themselves.
    pub fn component_weak_convexity(&self) -> f64 {
        match self {
            StochasticFamily::RobustLinear { .. } => 0.0,
            StochasticFamily::PhaseRetrieval { a, .. } => {
                2.0 * a
                    .iter()
                    .map(|ai| linalg::dot(ai, ai))
                    .fold(0.0, f64::max)
            }
            StochasticFamily::SmoothQuadratic { .. } => 0.0,
        }
    }

    /// Subgradient norm bound on `||x||_inf <= radius` (the model Lipschitz
    /// modulus); global for the robust-linear family.
    pub fn subgradient_bound(&self, radius: f64) -> f64 {
        match self {
            StochasticFamily::RobustLinear { a, .. } => {
                a.iter().map(|ai| linalg::norm(ai)).fold(0.0, f64::max)
            }
            StochasticFamily::PhaseRetrieval { a, .. } => a
                .iter()
                .map(|ai| {
                    let na = linalg::norm(ai);
                    let n1 = ai.iter().map(|v| v.abs()).sum::<f64>();
                    2.0 * na * n1 * radius
                })
                .fold(0.0, f64::max),
            StochasticFamily::SmoothQuadratic { centers, scale } => {
                let cmax = centers.iter().map(|c| linalg::norm(c)).fold(0.0, f64::max);
                let n = centers[0].len() as f64;
                scale * (radius * n.sqrt() + cmax)
            }
        }
    }
}

/// A model family: the stochastic problem, the model type used to
/// approximate it, and the declared accuracy/regularity constants.
#[derive(Clone, Debug)]
pub struct ModelFamily {
    pub model_type: ModelType,
    pub family: StochasticFamily,
    /// One-sided accuracy: `E[f_x(y, xi) - f(y)] <= tau/2 ||x - y||^2`.
    pub tau: f64,
    /// Weak convexity of `y -> f_x(y, xi) + phi(y)`.
    pub eta: f64,
    /// Model Lipschitz modulus (certified on the declared sample radius).
    pub lipschitz: f64,
    pub sample_radius: f64,
}

impl ModelFamily {
    pub fn new(
        model_type: ModelType,
        family: StochasticFamily,
        phi: &Regularizer,
        sample_radius: f64,
    ) -> Result<Self> {
        let rho = family.component_weak_convexity();
        let (tau, model_wc) = match model_type {
            // affine minorant, accurate up to the component's weak convexity
            ModelType::Subgradient => (rho, 0.0),
            // exact model
            ModelType::ProximalPoint => (0.0, rho),
            // linearization error of the scalar inner map
            ModelType::ProxLinear => {
                if matches!(family, StochasticFamily::SmoothQuadratic { .. }) {
                    return Err(Error::IncompatibleConfig(
                        "prox_linear model needs a composite family".into(),
                    ));
                }
                (rho, 0.0)
            }
        };
        let lipschitz = family.subgradient_bound(sample_radius);
        Ok(ModelFamily {
            model_type,
            family,
            tau,
            eta: model_wc + phi.tau,
            lipschitz,
            sample_radius,
        })
    }

    /// Value of the model `f_x(y, xi)` anchored at `x`.
    pub fn model_value(&self, x: &[f64], xi: usize, y: &[f64]) -> f64 {
        match self.model_type {
            ModelType::Subgradient => {
                let s = self.family.subgradient(xi, x);
                self.family.component_value(xi, x) + linalg::dot(&s, &linalg::sub(y, x))
            }
            ModelType::ProximalPoint => self.family.component_value(xi, y),
            ModelType::ProxLinear => {
                let (c, gc) = self.family.inner(xi, x).expect("composite family");
                (c + linalg::dot(&gc, &linalg::sub(y, x))).abs()
            }
        }
    }

    /// Envelope parameter strictly inside `(0, 1/(tau + eta))`.
    pub fn default_theta(&self) -> f64 {
        1.0 / (2.0 * (self.tau + self.eta + 1.0))
    }
}

const SMM_INNER_TOL: f64 = 1e-10;
const SMM_MAX_INNER: usize = 100_000;

/// One model-based step:
/// `argmin_y f_x(y, xi) + phi(y) + ||y - x||^2 / (2 alpha)`.
pub fn smm_subproblem(
    model: &ModelFamily,
    phi: &Regularizer,
    alpha: f64,
    x: &[f64],
    xi: usize,
) -> Result<Vec<f64>> {
    if model.eta > 0.0 && !(alpha < 0.5 / model.eta) {
        return Err(Error::InvalidParameter(format!(
            "smm_subproblem: alpha = {alpha} must stay below 1/(2 eta) = {}",
            0.5 / model.eta
        )));
    }
    match model.model_type {
        ModelType::Subgradient => {
            let s = model.family.subgradient(xi, x);
            phi.prox(alpha, &linalg::axpy(x, -alpha, &s))
        }
        ModelType::ProximalPoint => {
            if model.family.smooth_grad(xi, x).is_some() {
                // proximal gradient on f(., xi) + ||.-x||^2/(2 alpha) + phi
                let (_, l_smooth) = model.family.smooth_grad(xi, x).unwrap();
                let beta = 1.0 / (l_smooth + 1.0 / alpha + phi.tau);
                let mut y = x.to_vec();
                let mut residual = f64::INFINITY;
                for _ in 0..SMM_MAX_INNER {
                    let (mut g, _) = model.family.smooth_grad(xi, &y).expect("smooth family");
                    for ((gi, yi), xc) in g.iter_mut().zip(&y).zip(x) {
                        *gi += (yi - xc) / alpha;
                    }
                    let y_next = phi.prox(beta, &linalg::axpy(&y, -beta, &g))?;
                    residual = linalg::dist(&y_next, &y);
                    y = y_next;
                    if residual <= SMM_INNER_TOL {
                        return Ok(y);
                    }
                }
                Err(Error::InnerSolverFailed { iters: SMM_MAX_INNER, residual })
            } else if model.family.dim() == 1 {
                // 1-D nonsmooth component: the subproblem is convex for
                // admissible alpha, solve by golden section
                let fam = &model.family;
                let psi = |y: f64| fam.component_value(xi, &[y]) + phi.value_1d(y);
                let r = moreau_env_1d(&psi, alpha, x[0], 1e-12)?;
                Ok(r.prox_point)
            } else {
                Err(Error::NotApplicable(
                    "proximal-point model on a nonsmooth family is only solvable in 1-D".into(),
                ))
            }
        }
        ModelType::ProxLinear => {
            let (u, v) = model
                .family
                .inner(xi, x)
                .ok_or_else(|| Error::NotApplicable("prox_linear needs a composite family".into()))?;
            prox_linear_step(phi, alpha, x, u, &v)
        }
    }
}

/// Exact minimizer of `|u + <v, y-x>| + phi(y) + ||y-x||^2/(2 alpha)`.
///
/// Optimality reads `y = prox_{alpha phi}(x - alpha mu v)` with
/// `mu in sgn(u + <v, y-x>)`; the residual `u + <v, y(mu)-x>` is
/// nonincreasing in `mu` (monotonicity of the prox), so the multiplier is
/// found by checking the endpoints of `[-1, 1]` and bisecting otherwise.
fn prox_linear_step(
    phi: &Regularizer,
    alpha: f64,
    x: &[f64],
    u: f64,
    v: &[f64],
) -> Result<Vec<f64>> {
    let y_of = |mu: f64| phi.prox(alpha, &linalg::axpy(x, -alpha * mu, v));
    let resid = |y: &[f64]| u + linalg::dot(v, &linalg::sub(y, x));
    let y_hi = y_of(1.0)?;
    if resid(&y_hi) >= 0.0 {
        return Ok(y_hi);
    }
    let y_lo = y_of(-1.0)?;
    if resid(&y_lo) <= 0.0 {
        return Ok(y_lo);
    }
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut y = y_lo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        y = y_of(mid)?;
        let r = resid(&y);
        if r.abs() <= 1e-14 * (1.0 + u.abs()) || (hi - lo) <= 1e-15 {
            break;
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(y)
}

/// Model-based iteration with a fresh component draw per step.
pub fn run_smm(
    model: &ModelFamily,
    phi: &Regularizer,
    schedule: &Schedule,
    x0: &[f64],
    t: u64,
    rng: &mut RngStream,
    opts: &MeasureOptions,
) -> Result<Trace> {
    if t < 1 {
        return Err(Error::InvalidParameter("run_smm: T must be >= 1".into()));
    }
    let theta = opts.theta.unwrap_or_else(|| model.default_theta());
    let mut trace = Trace::new(Method::Smm, rng.seed, rng.replication_index);
    trace.theta = theta;
    if phi.lipschitz.is_none() {
        trace
            .warnings
            .push("regularizer is not Lipschitz; results are outside the checked guarantees".into());
    }
    let eta_cap = if model.eta > 0.0 {
        0.5 / model.eta
    } else {
        f64::INFINITY
    };
    let cap = eta_cap.min(opts.alpha_cap.unwrap_or(f64::INFINITY));
    let offset = schedule.first_index_below(cap)?;
    trace.schedule_offset = offset;
    let stride = effective_stride(opts.stride, t);
    let snap = snapshot_stride(t);
    let psi_bar = phi.lower_bound; // all catalog families are nonnegative
    let smooth_env = smm_envelope_problem(model, phi);

    let mut x = x0.to_vec();
    if !phi.in_domain(&x) {
        x = phi.prox(0.5 * theta.min(phi.max_prox_step()), &x)?;
    }
    for k in 0..=t {
        let alpha = schedule.value(k + offset);
        let psi_x = model.family.mean_value(&x) + phi.value(&x);
        let log_now = k % stride == 0 || k == t;
        let (measure, env_gap) = if log_now {
            smm_measure(model, phi, &smooth_env, theta, psi_bar, &x, opts)?
        } else {
            (f64::NAN, f64::NAN)
        };
        if k % snap == 0 || k == t {
            trace.snapshots.push((k, x.clone()));
        }
        if k == t {
            trace.records.push(TraceRecord { k, alpha, obj: psi_x, measure, step_len: f64::NAN });
            trace.env_gap.push(env_gap);
            break;
        }
        let xi = rng.next_below(model.family.n() as u64) as usize;
        let x_next = smm_subproblem(model, phi, alpha, &x, xi)?;
        let step_len = linalg::dist(&x_next, &x);
        trace.records.push(TraceRecord { k, alpha, obj: psi_x, measure, step_len });
        trace.env_gap.push(env_gap);
        x = x_next;
        if diverged(&x) {
            trace.diverged = true;
            break;
        }
    }
    trace.final_x = x;
    Ok(trace)
}

/// For smooth families the envelope machinery of [`crate::stationarity`]
/// applies directly.
fn smm_envelope_problem(model: &ModelFamily, phi: &Regularizer) -> Option<CompositeProblem> {
    match &model.family {
        StochasticFamily::SmoothQuadratic { centers, scale } => {
            let scale = *scale;
            let dim = centers[0].len();
            let (c1, c2) = (centers.clone(), centers.clone());
            let f = SmoothObjective::new(
                dim,
                0.0,
                scale,
                move |x: &[f64]| {
                    c1.iter()
                        .map(|c| {
                            let d = linalg::sub(x, c);
                            0.5 * scale * linalg::dot(&d, &d)
                        })
                        .sum::<f64>()
                        / c1.len() as f64
                },
                move |x: &[f64]| {
                    let mut g = vec![0.0; x.len()];
                    for c in &c2 {
                        for (gi, di) in g.iter_mut().zip(linalg::sub(x, c)) {
                            *gi += di * scale;
                        }
                    }
                    linalg::scale(&g, 1.0 / c2.len() as f64)
                },
            );
            Some(CompositeProblem::new(f, *phi))
        }
        _ => None,
    }
}

fn smm_measure(
    model: &ModelFamily,
    phi: &Regularizer,
    smooth_env: &Option<CompositeProblem>,
    theta: f64,
    psi_bar: f64,
    x: &[f64],
    opts: &MeasureOptions,
) -> Result<(f64, f64)> {
    match opts.kind {
        MeasureKind::Grad => {
            if let Some(cp) = smooth_env {
                Ok((linalg::norm(&cp.f.gradient(x)), f64::NAN))
            } else {
                Ok((f64::NAN, f64::NAN))
            }
        }
        MeasureKind::NatResidual => {
            if let Some(cp) = smooth_env {
                let r = natural_residual(cp, cp.default_alpha(), x)?;
                Ok((linalg::norm(&r), f64::NAN))
            } else {
                Ok((f64::NAN, f64::NAN))
            }
        }
        MeasureKind::EnvGrad => {
            if let Some(cp) = smooth_env {
                let env = moreau_prox(cp, theta, x, opts.env_tol)?;
                return Ok((env.grad_norm(), env.env_value - psi_bar));
            }
            if model.family.dim() == 1 {
                let fam = model.family.clone();
                let phi = *phi;
                let psi = move |y: f64| fam.mean_value(&[y]) + phi.value_1d(y);
                let env = moreau_env_1d(&psi, theta, x[0], 1e-12)?;
                Ok((env.grad_norm(), env.env_value - psi_bar))
            } else {
                Ok((f64::NAN, f64::NAN))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_problem, quadratic_component, NoiseKind, ProblemSpec};

    fn quad_1d() -> SmoothObjective {
        build_problem(&ProblemSpec::Quadratic { q: vec![vec![1.0]], center: vec![0.0] })
            .unwrap()
            .smooth()
    }

    #[test]
    #[allow(clippy::approx_constant)] // 1.442695 is the worked 1/ln 2 value
    fn schedule_values() {
        assert_eq!(Schedule::InvK { c: 1.0, p: 1.0 }.value(0), 1.0);
        let v = Schedule::InvKLog { c: 1.0 }.value(0);
        assert!((v - 1.0 / 2.0f64.ln()).abs() < 1e-12, "{v}");
        assert!((v - 1.442695).abs() < 1e-6);
        assert!((Schedule::AlternatingH.value(1) - 1.0 / 6.0).abs() < 1e-15);
        assert!((Schedule::AlternatingH.value(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn schedule_flags_consistent() {
        let f = Schedule::InvK { c: 1.0, p: 1.0 }.flags();
        assert!(f.sum_diverges && f.sum_sq_finite && f.sum_cube_finite);
        let f = Schedule::InvK { c: 1.0, p: 0.4 }.flags();
        assert!(f.sum_diverges && !f.sum_sq_finite && f.sum_cube_finite);
        let f = Schedule::Constant { c: 0.1 }.flags();
        assert!(f.sum_diverges && !f.sum_sq_finite && !f.sum_cube_finite);
    }

    #[test]
    fn schedule_monotone_and_skip_forward() {
        let s = Schedule::InvK { c: 2.0, p: 1.0 };
        for k in 0..100u64 {
            assert!(s.value(k + 1) <= s.value(k));
        }
        let log_s = Schedule::InvKLog { c: 1.0 };
        for k in 0..100u64 {
            assert!(log_s.value(k + 1) <= log_s.value(k));
        }
        let k0 = s.first_index_below(0.25).unwrap();
        assert!(s.value(k0) < 0.25 && s.value(k0 - 1) >= 0.25);
        assert!(Schedule::Constant { c: 1.0 }.first_index_below(0.5).is_err());
        assert_eq!(Schedule::Constant { c: 0.1 }.first_index_below(0.5).unwrap(), 0);
    }

    #[test]
    fn schedule_parse_round_trip() {
        for s in [
            Schedule::Constant { c: 0.5 },
            Schedule::InvK { c: 1.0, p: 0.75 },
            Schedule::InvKLog { c: 0.2 },
            Schedule::AlternatingH,
        ] {
            assert_eq!(Schedule::parse(&s.describe()).unwrap(), s);
        }
        assert!(Schedule::parse("bogus").is_err());
    }

    #[test]
    fn sgd_deterministic_contraction() {
        let oracle = AbcOracle::noiseless(quad_1d());
        let mut rng = RngStream::new(0, 0);
        let tr = run_sgd(&oracle, &Schedule::Constant { c: 0.5 }, &[1.0], 2, &mut rng).unwrap();
        // x1 = 0.5, x2 = 0.25
        assert!((tr.records[1].obj - 0.125).abs() < 1e-15); // f(0.5)
        assert!((tr.final_x[0] - 0.25).abs() < 1e-15);
        // stationary start stays put
        let mut rng = RngStream::new(0, 0);
        let tr = run_sgd(&oracle, &Schedule::Constant { c: 0.5 }, &[0.0], 5, &mut rng).unwrap();
        assert_eq!(tr.final_x[0], 0.0);
    }

    #[test]
    fn sgd_trace_is_contiguous_and_csv_round_trips() {
        let oracle = AbcOracle::new(quad_1d(), 0.0, 1.0, NoiseKind::GaussianIsotropic).unwrap();
        let mut rng = RngStream::new(42, 1);
        let tr = run_sgd(&oracle, &Schedule::InvK { c: 0.5, p: 1.0 }, &[2.0], 20, &mut rng).unwrap();
        assert_eq!(tr.records.len(), 21);
        for (i, r) in tr.records.iter().enumerate() {
            assert_eq!(r.k, i as u64);
        }
        assert!(tr.records.last().unwrap().step_len.is_nan());
        let csv = tr.to_csv();
        let back = Trace::records_from_csv(&csv).unwrap();
        assert_eq!(back.len(), tr.records.len());
        for (a, b) in back.iter().zip(&tr.records) {
            assert_eq!(a.alpha.to_bits(), b.alpha.to_bits());
            assert_eq!(a.obj.to_bits(), b.obj.to_bits());
        }
    }

    #[test]
    fn sgd_divergence_truncates_with_flag() {
        let oracle = AbcOracle::noiseless(quad_1d());
        let mut rng = RngStream::new(0, 0);
        // step 3 on L=1 quadratic: |x| doubles every iteration
        let tr = run_sgd(&oracle, &Schedule::Constant { c: 3.0 }, &[1.0], 200, &mut rng).unwrap();
        assert!(tr.diverged);
        assert!(tr.records.len() < 201);
    }

    #[test]
    fn rr_epoch_hand_computed() {
        let fs = FiniteSumObjective::new(vec![
            quadratic_component(vec![1.0], 1.0),
            quadratic_component(vec![-1.0], 1.0),
        ])
        .unwrap();
        // permutation (component 0 then 1): x1 = 0.5, x2 = -0.25
        let out = rr_epoch(&fs, &[0.0], 0.5, &[0, 1]);
        assert!((out[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn rr_requires_cube_summable_schedule() {
        let fs = FiniteSumObjective::new(vec![quadratic_component(vec![0.0], 1.0)]).unwrap();
        let mut rng = RngStream::new(0, 0);
        assert!(run_rr(&fs, &Schedule::Constant { c: 0.1 }, &[1.0], 3, &mut rng).is_err());
    }

    #[test]
    fn rr_same_seed_same_trace() {
        let fs = FiniteSumObjective::new(vec![
            quadratic_component(vec![1.0], 1.0),
            quadratic_component(vec![-1.0], 1.0),
            quadratic_component(vec![0.5], 1.0),
        ])
        .unwrap();
        let s = Schedule::InvK { c: 0.3, p: 1.0 };
        let mut r1 = RngStream::new(9, 2);
        let mut r2 = RngStream::new(9, 2);
        let t1 = run_rr(&fs, &s, &[0.1], 30, &mut r1).unwrap();
        let t2 = run_rr(&fs, &s, &[0.1], 30, &mut r2).unwrap();
        assert_eq!(t1.final_x[0].to_bits(), t2.final_x[0].to_bits());
    }

    #[test]
    fn prox_sgd_soft_threshold_step() {
        // f = x^2/2, phi = |.|, alpha = 0.5, x0 = 3:
        // x1 = prox_{0.5|.|}(3 - 1.5) = 1.0
        let cp = CompositeProblem::new(quad_1d(), Regularizer::l1(1.0));
        let oracle = AbcOracle::noiseless(quad_1d());
        let mut rng = RngStream::new(0, 0);
        let tr = run_prox_sgd(
            &cp,
            &oracle,
            &Schedule::Constant { c: 0.5 },
            &[3.0],
            1,
            &mut rng,
            &MeasureOptions::default(),
        )
        .unwrap();
        assert!((tr.final_x[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn prox_sgd_skips_schedule_to_admissible_range() {
        use crate::regularizers::{make_regularizer, RegKind};
        // mcp tau = 1 -> cap 0.5; inv_k from 1.0 needs offset 2 (alpha_2 = 1/3)
        let phi = make_regularizer(RegKind::Mcp { lambda: 1.0, theta: 1.0 }).unwrap();
        let cp = CompositeProblem::new(quad_1d(), phi);
        let oracle = AbcOracle::noiseless(quad_1d());
        let mut rng = RngStream::new(0, 0);
        let tr = run_prox_sgd(
            &cp,
            &oracle,
            &Schedule::InvK { c: 1.0, p: 1.0 },
            &[1.0],
            3,
            &mut rng,
            &MeasureOptions::default(),
        )
        .unwrap();
        assert_eq!(tr.schedule_offset, 2);
        assert!(tr.records.iter().all(|r| r.alpha < 0.5));
    }

    #[test]
    fn prox_sgd_flags_non_lipschitz_regularizer() {
        use crate::regularizers::{make_regularizer, RegKind};
        let phi = make_regularizer(RegKind::BoxIndicator { lo: -1.0, hi: 1.0 }).unwrap();
        let cp = CompositeProblem::new(quad_1d(), phi);
        let oracle = AbcOracle::noiseless(quad_1d());
        let mut rng = RngStream::new(0, 0);
        let tr = run_prox_sgd(
            &cp,
            &oracle,
            &Schedule::Constant { c: 0.1 },
            &[2.0],
            2,
            &mut rng,
            &MeasureOptions::default(),
        )
        .unwrap();
        assert!(!tr.warnings.is_empty());
        // iterates stay in the box
        assert!(tr.final_x[0] <= 1.0);
    }

    #[test]
    fn smm_subproblem_examples() {
        let fam = StochasticFamily::SmoothQuadratic { centers: vec![vec![0.0]], scale: 1.0 };
        let phi = Regularizer::zero();

        // subgradient model reduces to a gradient step: 1 - 0.1*1 = 0.9
        let m = ModelFamily::new(ModelType::Subgradient, fam.clone(), &phi, 10.0).unwrap();
        let y = smm_subproblem(&m, &phi, 0.1, &[1.0], 0).unwrap();
        assert!((y[0] - 0.9).abs() < 1e-15);

        // proximal-point model: (alpha*xi + x)/(1+alpha) = 10/11
        let m = ModelFamily::new(ModelType::ProximalPoint, fam, &phi, 10.0).unwrap();
        let y = smm_subproblem(&m, &phi, 0.1, &[1.0], 0).unwrap();
        assert!((y[0] - 10.0 / 11.0).abs() < 1e-9, "{}", y[0]);

        // prox-linear on |x^2 - 1| at x = 1: linearized residual 0, stay put
        let fam = StochasticFamily::PhaseRetrieval { a: vec![vec![1.0]], b: vec![1.0] };
        let m = ModelFamily::new(ModelType::ProxLinear, fam, &phi, 10.0).unwrap();
        let y = smm_subproblem(&m, &phi, 0.1, &[1.0], 0).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12, "{}", y[0]);
    }

    #[test]
    fn smm_alpha_cap_enforced() {
        use crate::regularizers::{make_regularizer, RegKind};
        let fam = StochasticFamily::RobustLinear { a: vec![vec![1.0]], b: vec![0.0] };
        let phi = make_regularizer(RegKind::Mcp { lambda: 1.0, theta: 1.0 }).unwrap();
        // eta = tau_phi = 1 -> alpha must stay below 0.5
        let m = ModelFamily::new(ModelType::Subgradient, fam, &phi, 10.0).unwrap();
        assert!(smm_subproblem(&m, &phi, 0.6, &[1.0], 0).is_err());
        assert!(smm_subproblem(&m, &phi, 0.4, &[1.0], 0).is_ok());
    }

    #[test]
    fn prox_linear_interior_multiplier() {
        // model residual pinned to zero when both branch candidates overshoot
        let fam = StochasticFamily::RobustLinear { a: vec![vec![1.0]], b: vec![-2.0] };
        let phi = Regularizer::l1(0.1);
        let m = ModelFamily::new(ModelType::ProxLinear, fam, &phi, 10.0).unwrap();
        let y = smm_subproblem(&m, &phi, 1.0, &[-1.9], 0).unwrap();
        assert!((y[0] + 2.0).abs() < 1e-9, "{}", y[0]);
    }
}
