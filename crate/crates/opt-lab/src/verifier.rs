//! Empirical checks for the abstract conditions behind the methods'
//! convergence guarantees, evaluated on ensembles of replicated runs.
//!
//! Statistical discipline: expectations are cross-replication means with
//! jackknife standard errors and a `5 * stderr` slack throughout. Checks on
//! quantities that vanish identically (noiseless runs) pass with zero slack.
//! Every check is a pure function of the ensemble, so re-running it yields
//! an identical report. An `inconclusive` verdict is reported when the noise
//! level dominates the margin being tested; acceptance gates only count
//! pass/fail.
//!
//! Conditional-expectation statements are tested in their totally-expected
//! form: each replication contributes the per-sample residual
//! `lhs - rhs`, whose expectation is nonpositive whenever the conditional
//! inequality holds, and the cross-replication mean of that residual is
//! compared against `5 * stderr`. The one place conditional quantities are
//! estimated directly is the frozen-state resampler of
//! [`check_decomposition`].

use crate::error::{Error, Result};
use crate::linalg;
use crate::optimizers::{Method, Schedule, Trace};
use crate::problems::RngStream;
use serde_json::json;

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Leave-one-out jackknife standard error of the sample mean.
pub fn jackknife_stderr(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let total: f64 = xs.iter().sum();
    let nf = n as f64;
    let loo: Vec<f64> = xs.iter().map(|x| (total - x) / (nf - 1.0)).collect();
    let loo_bar = mean(&loo);
    let ss: f64 = loo.iter().map(|l| (l - loo_bar) * (l - loo_bar)).sum();
    ((nf - 1.0) / nf * ss).sqrt()
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    Skipped,
}

/// Outcome of one condition check, serializable as JSON.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ConditionReport {
    pub condition: String,
    pub verdict: Verdict,
    pub statistics: serde_json::Value,
    pub eligible_k_range: Option<(u64, u64)>,
    pub config_hash: String,
    pub notes: Vec<String>,
}

impl ConditionReport {
    fn new(condition: &str, verdict: Verdict, statistics: serde_json::Value) -> Self {
        ConditionReport {
            condition: condition.to_string(),
            verdict,
            statistics,
            eligible_k_range: None,
            config_hash: String::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

/// Replicated traces with a common configuration.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub traces: Vec<Trace>,
    pub schedule: Schedule,
    pub config_hash: String,
}

pub const MIN_REPLICATIONS: usize = 8;

impl Ensemble {
    pub fn new(traces: Vec<Trace>, schedule: Schedule, config_hash: String) -> Result<Self> {
        if traces.is_empty() {
            return Err(Error::InvalidParameter("ensemble needs at least one trace".into()));
        }
        let t = traces[0].records.len();
        let method = traces[0].method;
        if traces.iter().any(|tr| tr.records.len() != t || tr.method != method) {
            return Err(Error::IncompatibleConfig(
                "ensemble traces must share method and length (drop diverged runs first)".into(),
            ));
        }
        Ok(Ensemble { traces, schedule, config_hash })
    }

    pub fn r(&self) -> usize {
        self.traces.len()
    }

    pub fn method(&self) -> Method {
        self.traces[0].method
    }

    /// Highest common iteration index.
    pub fn t(&self) -> u64 {
        self.traces[0].t_max()
    }

    fn require_statistical_power(&self) -> Result<()> {
        if self.r() < MIN_REPLICATIONS {
            return Err(Error::NotApplicable(format!(
                "statistical verdicts need >= {MIN_REPLICATIONS} replications, got {}",
                self.r()
            )));
        }
        Ok(())
    }

    /// Iteration indices at which every replication logged the measure.
    pub fn measured_ks(&self) -> Vec<u64> {
        (0..self.traces[0].records.len())
            .filter(|&i| self.traces.iter().all(|tr| tr.records[i].measure.is_finite()))
            .map(|i| self.traces[0].records[i].k)
            .collect()
    }

    fn per_rep(&self, idx: usize, f: impl Fn(&Trace, usize) -> f64) -> Vec<f64> {
        self.traces.iter().map(|tr| f(tr, idx)).collect()
    }
}

/// Synthetic single-method ensemble with prescribed measure values; the
/// negative-control fixtures are built from this.
pub fn synthetic_measure_ensemble(
    measure: impl Fn(u64) -> f64,
    schedule: Schedule,
    t: u64,
    r: usize,
) -> Ensemble {
    let traces = (0..r)
        .map(|rep| {
            let records = (0..=t)
                .map(|k| crate::optimizers::TraceRecord {
                    k,
                    alpha: schedule.value(k),
                    obj: 0.0,
                    measure: measure(k),
                    step_len: if k == t { f64::NAN } else { 0.0 },
                })
                .collect::<Vec<_>>();
            let n = records.len();
            Trace {
                method: Method::Sgd,
                records,
                env_gap: vec![f64::NAN; n],
                snapshots: Vec::new(),
                final_x: vec![0.0],
                seed: 0,
                replication: rep as u64,
                diverged: false,
                warnings: Vec::new(),
                schedule_offset: 0,
                theta: f64::NAN,
            }
        })
        .collect();
    Ensemble { traces, schedule, config_hash: "synthetic".into() }
}

// ---------------------------------------------------------------------------
// P1: Lipschitz continuity of the measure
// ---------------------------------------------------------------------------

/// Declared properties of the convergence measure `Phi`.
pub struct MeasureSpec<'a> {
    pub phi: &'a dyn Fn(&[f64]) -> Result<Vec<f64>>,
    pub declared_modulus: f64,
    pub exponent_a: f64,
}

/// Max sampled ratio `||Phi(x)-Phi(y)|| / ||x-y||` against the declared
/// modulus; the empirical max is a certified lower bound on the true one.
pub fn check_p1(ms: &MeasureSpec, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<ConditionReport> {
    if pairs.len() < 100 {
        return Err(Error::InvalidParameter(
            "check_p1 needs at least 100 point pairs".into(),
        ));
    }
    let mut max_ratio = 0.0f64;
    let mut witness = None;
    for (x, y) in pairs {
        let d = linalg::dist(x, y);
        if d == 0.0 {
            continue;
        }
        let px = (ms.phi)(x)?;
        let py = (ms.phi)(y)?;
        let ratio = linalg::dist(&px, &py) / d;
        if ratio > max_ratio {
            max_ratio = ratio;
            witness = Some((x.clone(), y.clone()));
        }
    }
    let pass = max_ratio <= ms.declared_modulus * (1.0 + 1e-6);
    let mut rep = ConditionReport::new(
        "p1",
        if pass { Verdict::Pass } else { Verdict::Fail },
        json!({
            "declared_modulus": ms.declared_modulus,
            "empirical_max_ratio": max_ratio,
            "n_pairs": pairs.len(),
        }),
    );
    if !pass {
        if let Some((x, y)) = witness {
            rep.notes.push(format!("witness pair x = {x:?}, y = {y:?}"));
        }
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// P2: weighted summability of the measure
// ---------------------------------------------------------------------------

/// Cauchy-style surrogate for `sum_k mu_k E||Phi(x^k)||^a < infinity`:
/// partial-sum increments over dyadic windows must shrink by a factor of
/// two. Window sums are computed per replication (measure values
/// interpolated linearly between logging strides) and compared with
/// jackknife errors; a verdict of `inconclusive` is returned when the
/// stderr dominates a violated margin.
pub fn check_p2(ens: &Ensemble, a: f64) -> Result<ConditionReport> {
    ens.require_statistical_power()?;
    let ks = ens.measured_ks();
    if ks.len() < 2 {
        return Err(Error::NotApplicable("p2 needs measures at two or more strides".into()));
    }
    let t_last = *ks.last().unwrap();
    if t_last / 8 < 1 {
        return Err(Error::NotApplicable(
            "fewer than 3 dyadic windows available".into(),
        ));
    }
    let anchors = [t_last / 8, t_last / 4, t_last / 2, t_last];

    // per replication: prefix sums of mu_k * ||Phi||^a with interpolation
    let windows: Vec<[f64; 3]> = ens
        .traces
        .iter()
        .map(|tr| {
            let interp = interpolate_measure(tr, &ks, a);
            let prefix = |j: u64| -> f64 {
                (0..=j)
                    .map(|k| ens.schedule.value(k + tr.schedule_offset) * interp[k as usize])
                    .sum()
            };
            let s: Vec<f64> = anchors.iter().map(|&t| prefix(t)).collect();
            [s[1] - s[0], s[2] - s[1], s[3] - s[2]]
        })
        .collect();

    let mut verdict = Verdict::Pass;
    let mut stats = Vec::new();
    for pair in [(0usize, 1usize), (1, 2)] {
        // margin >= 0 means the later window is at most half the earlier one
        let margins: Vec<f64> = windows.iter().map(|w| w[pair.0] / 2.0 - w[pair.1]).collect();
        let m = mean(&margins);
        let se = jackknife_stderr(&margins);
        stats.push(json!({ "window_pair": pair.1, "margin": m, "stderr": se }));
        if m < 0.0 {
            if m.abs() <= 5.0 * se {
                if verdict == Verdict::Pass {
                    verdict = Verdict::Inconclusive;
                }
            } else {
                verdict = Verdict::Fail;
            }
        }
    }
    let mut rep =
        ConditionReport::new("p2", verdict, json!({ "comparisons": stats, "anchors": anchors }));
    rep.eligible_k_range = Some((anchors[0], t_last));
    rep.config_hash = ens.config_hash.clone();
    Ok(rep)
}

/// Per-iteration `||Phi||^a`, linearly interpolated between logged strides.
fn interpolate_measure(tr: &Trace, ks: &[u64], a: f64) -> Vec<f64> {
    let t = tr.records.last().unwrap().k;
    let mut out = vec![0.0; (t + 1) as usize];
    let vals: Vec<f64> = ks
        .iter()
        .map(|&k| tr.records[k as usize].measure.powf(a))
        .collect();
    for w in 0..ks.len() {
        let (k0, v0) = (ks[w], vals[w]);
        let (k1, v1) = if w + 1 < ks.len() {
            (ks[w + 1], vals[w + 1])
        } else {
            (t, vals[w])
        };
        for k in k0..=k1 {
            let frac = if k1 > k0 {
                (k - k0) as f64 / (k1 - k0) as f64
            } else {
                0.0
            };
            out[k as usize] = v0 + frac * (v1 - v0);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// P3 / P4: step-length bound in expectation
// ---------------------------------------------------------------------------

/// Constants of the step-length growth bound
/// `E||x^{k+1}-x^k||^q <= A mu_k^{p1} + B mu_k^{p2} E||Phi(x^k)||^b`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ConditionParams {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub p1: f64,
    pub p2: f64,
    pub big_a: f64,
    pub big_b: f64,
}

impl ConditionParams {
    /// Violated expectation-track parameter relations, by name.
    pub fn p4_violations(&self, schedule: &Schedule) -> Vec<String> {
        let mut v = Vec::new();
        if self.a < 1.0 {
            v.push("a >= 1".into());
        }
        if self.q < 1.0 {
            v.push("q >= 1".into());
        }
        if self.a < self.b {
            v.push("a >= b".into());
        }
        if self.p1 < self.q {
            v.push("p1 >= q".into());
        }
        if self.p2 < self.q {
            v.push("p2 >= q".into());
        }
        if !schedule.flags().sum_diverges {
            v.push("sum mu_k = infinity".into());
        }
        v
    }

    /// Violated almost-sure-track parameter relations, by name.
    pub fn p4_prime_violations(&self, schedule: &Schedule) -> Vec<String> {
        let mut v = Vec::new();
        if self.q < 2.0 {
            v.push("q >= 2".into());
        }
        if self.q * self.a < self.b {
            v.push("q a >= b".into());
        }
        if self.p1 <= 0.5 {
            v.push("p1 > 1/2".into());
        }
        if self.p2 < 1.0 {
            v.push("p2 >= 1".into());
        }
        if !schedule.flags().sum_diverges {
            v.push("sum mu_k = infinity".into());
        }
        if !schedule.power_sum_finite(2.0 * self.p1) {
            v.push("sum mu_k^{2 p1} < infinity".into());
        }
        v
    }
}

/// Per-k test of the step-length bound with `5 * stderr` slack; passes when
/// at least 99% of the tested iterations pass and the parameter relations
/// hold.
pub fn check_p3(ens: &Ensemble, cp: &ConditionParams) -> Result<ConditionReport> {
    ens.require_statistical_power()?;
    let violations = cp.p4_violations(&ens.schedule);
    if !violations.is_empty() {
        let mut rep = ConditionReport::new(
            "p3",
            Verdict::Fail,
            json!({ "parameter_violations": violations }),
        );
        rep.config_hash = ens.config_hash.clone();
        return Ok(rep);
    }
    let t = ens.traces[0].records.len() - 1;
    let needs_measure = cp.big_b > 0.0 && cp.b > 0.0;
    let mut tested = 0usize;
    let mut passed = 0usize;
    let mut first_fail = None;
    for i in 0..t {
        let rec0 = &ens.traces[0].records[i];
        if needs_measure && !ens.traces.iter().all(|tr| tr.records[i].measure.is_finite()) {
            continue;
        }
        let mu = rec0.alpha;
        let residuals: Vec<f64> = ens.per_rep(i, |tr, idx| {
            let r = &tr.records[idx];
            let measure_term = if needs_measure {
                cp.big_b * mu.powf(cp.p2) * r.measure.powf(cp.b)
            } else {
                0.0
            };
            r.step_len.powf(cp.q) - cp.big_a * mu.powf(cp.p1) - measure_term
        });
        let m = mean(&residuals);
        let se = jackknife_stderr(&residuals);
        tested += 1;
        if m <= 5.0 * se + 1e-12 * (1.0 + m.abs()) {
            passed += 1;
        } else if first_fail.is_none() {
            first_fail = Some((rec0.k, m, se));
        }
    }
    if tested == 0 {
        return Err(Error::NotApplicable("p3: no testable iterations".into()));
    }
    let frac = passed as f64 / tested as f64;
    let verdict = if frac >= 0.99 { Verdict::Pass } else { Verdict::Fail };
    let mut rep = ConditionReport::new(
        "p3",
        verdict,
        json!({
            "tested_k": tested,
            "passed_k": passed,
            "pass_fraction": frac,
            "params": cp,
        }),
    );
    if let Some((k, m, se)) = first_fail {
        rep.notes
            .push(format!("first failing k = {k}: mean residual {m:.3e}, stderr {se:.3e}"));
    }
    rep.config_hash = ens.config_hash.clone();
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Decomposition check (conditional step-length structure)
// ---------------------------------------------------------------------------

/// Frozen-state resampling of the one-step displacement at a probe point.
pub trait FrozenResampler {
    /// Draw one displacement `x^{k+1} - x^k` with the state frozen at `x`.
    fn displacement(&self, x: &[f64], k: u64, rng: &mut RngStream) -> Result<Vec<f64>>;
    /// `mu_k` of the underlying schedule.
    fn mu(&self, k: u64) -> f64;
    /// Known conditional drift `E[x^{k+1}-x^k | x] / mu_k`, when available
    /// in closed form (used as a cross-check of the estimate).
    fn drift_reference(&self, _x: &[f64], _k: u64) -> Option<Vec<f64>> {
        None
    }
    /// Probe-local declared bound on `E||A_k||^q`, when the method's
    /// constants give one at this point; otherwise the global
    /// `DecompositionParams::declared_a` applies.
    fn a_moment_bound(&self, _x: &[f64], _k: u64) -> Option<f64> {
        None
    }
    /// How the resampling randomness is generated.
    fn mode(&self) -> &'static str;
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct DecompositionParams {
    pub q: f64,
    pub b: f64,
    /// Declared bound on `E||A_k||^q`.
    pub declared_a: f64,
    /// Ceiling for `||B_k||^q / (1 + ||Phi(x^k)||^b)` across probes.
    pub ceiling: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ProbeOutcome {
    pub k: u64,
    pub mu: f64,
    /// `||mean A||` against `5 * stderr` (martingale-difference check).
    pub mean_a_norm: f64,
    pub mean_a_stderr: f64,
    pub martingale_pass: bool,
    /// `mean ||A||^q` against the declared bound.
    pub a_moment: f64,
    pub a_moment_stderr: f64,
    pub moment_pass: bool,
    /// `||B||^q / (1 + ||Phi||^b)` against the ceiling.
    pub b_ratio: f64,
    pub ratio_pass: bool,
    /// `||B_hat - B_ref||` in stderr units, when a reference is available.
    pub drift_deviation_sigmas: Option<f64>,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct DecompositionReport {
    pub probes: Vec<ProbeOutcome>,
    pub resampling_mode: String,
    pub verdict: Verdict,
    pub m_samples: usize,
}

/// Estimate the martingale/drift split of the update at frozen probe points:
/// `A = (delta - E[delta|x]) / mu`, `B = E[delta|x] / mu`.
///
/// The conditional mean used to center `A` comes from an independent first
/// batch of draws, so the centered mean keeps honest statistics.
pub fn check_decomposition(
    resampler: &dyn FrozenResampler,
    probes: &[(u64, Vec<f64>)],
    m_samples: usize,
    params: &DecompositionParams,
    measure_at: &dyn Fn(&[f64]) -> Result<f64>,
    rng: &RngStream,
) -> Result<DecompositionReport> {
    if probes.is_empty() || m_samples < 16 {
        return Err(Error::InvalidParameter(
            "decomposition check needs probes and at least 16 resamples".into(),
        ));
    }
    let mut outcomes = Vec::new();
    let mut all_pass = true;
    for (pi, (k, x)) in probes.iter().enumerate() {
        let mu = resampler.mu(*k);
        let dim = x.len();
        let mut sub = rng.substream(0x9e3779b9 + pi as u64);
        let draw = |rng: &mut RngStream| resampler.displacement(x, *k, rng);

        // first batch: estimate the conditional mean displacement
        let mut cond_mean = vec![0.0; dim];
        for _ in 0..m_samples {
            let d = draw(&mut sub)?;
            for (c, di) in cond_mean.iter_mut().zip(&d) {
                *c += di;
            }
        }
        cond_mean.iter_mut().for_each(|c| *c /= m_samples as f64);

        // second batch: center and normalize
        let mut a_samples = Vec::with_capacity(m_samples);
        for _ in 0..m_samples {
            let d = draw(&mut sub)?;
            let a: Vec<f64> = d
                .iter()
                .zip(&cond_mean)
                .map(|(di, ci)| (di - ci) / mu)
                .collect();
            a_samples.push(a);
        }
        let b_hat: Vec<f64> = cond_mean.iter().map(|c| c / mu).collect();

        // (i) martingale-difference: ||mean A|| within 5 stderr of zero
        let mut mean_a = vec![0.0; dim];
        for a in &a_samples {
            for (mi, ai) in mean_a.iter_mut().zip(a) {
                *mi += ai;
            }
        }
        mean_a.iter_mut().for_each(|mi| *mi /= m_samples as f64);
        let mut var_sum = 0.0;
        for i in 0..dim {
            let coords: Vec<f64> = a_samples.iter().map(|a| a[i]).collect();
            let se = jackknife_stderr(&coords);
            var_sum += se * se;
        }
        let mean_a_norm = linalg::norm(&mean_a);
        let mean_a_stderr = var_sum.sqrt();
        let martingale_pass = mean_a_norm <= 5.0 * mean_a_stderr + 1e-14;

        // (ii) moment bound on ||A||^q
        let a_norms_q: Vec<f64> = a_samples
            .iter()
            .map(|a| linalg::norm(a).powf(params.q))
            .collect();
        let a_moment = mean(&a_norms_q);
        let a_moment_stderr = jackknife_stderr(&a_norms_q);
        let declared = resampler.a_moment_bound(x, *k).unwrap_or(params.declared_a);
        let moment_pass = a_moment <= declared + 5.0 * a_moment_stderr + 1e-14;

        // (iii) bounded drift relative to the measure
        let phi = measure_at(x)?;
        let b_ratio = linalg::norm(&b_hat).powf(params.q) / (1.0 + phi.powf(params.b));
        let ratio_pass = b_ratio <= params.ceiling;

        let drift_deviation_sigmas = resampler.drift_reference(x, *k).map(|b_ref| {
            let dev = linalg::dist(&b_hat, &b_ref);
            // absolute floor so exact (zero-variance) estimates compare as 0
            let tol = 1e-12 * (1.0 + linalg::norm(&b_ref));
            if dev <= tol {
                0.0
            } else {
                dev / mean_a_stderr.max(tol)
            }
        });
        if let Some(sig) = drift_deviation_sigmas {
            if sig > 5.0 {
                all_pass = false;
            }
        }
        all_pass &= martingale_pass && moment_pass && ratio_pass;
        outcomes.push(ProbeOutcome {
            k: *k,
            mu,
            mean_a_norm,
            mean_a_stderr,
            martingale_pass,
            a_moment,
            a_moment_stderr,
            moment_pass,
            b_ratio,
            ratio_pass,
            drift_deviation_sigmas,
        });
    }
    Ok(DecompositionReport {
        probes: outcomes,
        resampling_mode: resampler.mode().to_string(),
        verdict: if all_pass { Verdict::Pass } else { Verdict::Fail },
        m_samples,
    })
}

// ---------------------------------------------------------------------------
// Recursion checks
// ---------------------------------------------------------------------------

/// Which per-iteration descent inequality to test, with the constants it
/// needs. All constants are declared by the problem/method, never fitted.
#[derive(Clone, Copy, Debug, serde::Serialize)]
#[serde(tag = "recursion", rename_all = "snake_case")]
pub enum RecursionSpec {
    /// SGD objective-gap recursion under the `C, D` noise bound.
    SgdNoise { l: f64, c: f64, d: f64, f_bar: f64 },
    /// Per-epoch recursion of random reshuffling (deterministic given the
    /// permutation), valid for `alpha < 1/(sqrt(2) L N)`.
    RrEpoch { l: f64, n: usize, f_bar: f64 },
    /// Envelope-gap descent recursion of proximal SGD; needs envelope gaps
    /// and gradients logged at every iteration.
    ProxSgdEnvelope { l: f64, c: f64, d: f64, l_phi: f64, tau: f64, theta: f64 },
    /// Squared-step bound of proximal SGD in terms of the envelope gap.
    ProxSgdStepLength { l: f64, c: f64, d: f64, l_phi: f64, tau: f64, theta: f64 },
    /// Envelope descent recursion of model-based methods, `alpha < theta`.
    SmmEnvelope { l_model: f64, eta: f64, tau: f64, theta: f64 },
    /// Squared-step bound of model-based methods, `alpha <= 1/(2 eta)`.
    SmmStepLength { l_model: f64, l_phi: f64, eta: f64 },
}

impl RecursionSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RecursionSpec::SgdNoise { .. } => "sgd_noise",
            RecursionSpec::RrEpoch { .. } => "rr_epoch",
            RecursionSpec::ProxSgdEnvelope { .. } => "prox_sgd_envelope",
            RecursionSpec::ProxSgdStepLength { .. } => "prox_sgd_step",
            RecursionSpec::SmmEnvelope { .. } => "smm_envelope",
            RecursionSpec::SmmStepLength { .. } => "smm_step",
        }
    }

    pub fn method(&self) -> Method {
        match self {
            RecursionSpec::SgdNoise { .. } => Method::Sgd,
            RecursionSpec::RrEpoch { .. } => Method::Rr,
            RecursionSpec::ProxSgdEnvelope { .. } | RecursionSpec::ProxSgdStepLength { .. } => {
                Method::ProxSgd
            }
            RecursionSpec::SmmEnvelope { .. } | RecursionSpec::SmmStepLength { .. } => Method::Smm,
        }
    }

    /// Step-size eligibility clause of the inequality.
    fn eligible(&self, alpha: f64) -> bool {
        match *self {
            RecursionSpec::SgdNoise { .. } => true,
            RecursionSpec::RrEpoch { l, n, .. } => {
                alpha < 1.0 / (std::f64::consts::SQRT_2 * l * n as f64)
            }
            RecursionSpec::ProxSgdEnvelope { l, tau, theta, .. } => {
                let cap_tau = if tau > 0.0 { 0.5 / tau } else { f64::INFINITY };
                let cap_theta = 0.5 / (1.0 / theta - (l + tau));
                alpha <= cap_tau.min(cap_theta)
            }
            RecursionSpec::ProxSgdStepLength { tau, .. } => tau <= 0.0 || alpha <= 0.5 / tau,
            RecursionSpec::SmmEnvelope { theta, .. } => alpha < theta,
            RecursionSpec::SmmStepLength { eta, .. } => eta <= 0.0 || alpha <= 0.5 / eta,
        }
    }

    /// Validate the announced envelope parameter range; recursion checks on
    /// the envelope are meaningless outside it.
    fn validate(&self) -> Result<()> {
        match *self {
            RecursionSpec::ProxSgdEnvelope { l, tau, theta, .. } => {
                if !(theta > 0.0 && theta < 1.0 / (3.0 * l + tau)) {
                    return Err(Error::InvalidParameter(
                        "envelope recursion needs theta in (0, 1/(3L+tau))".into(),
                    ));
                }
            }
            RecursionSpec::ProxSgdStepLength { l, tau, theta, .. } => {
                if !(theta > 0.0 && theta < 1.0 / (4.0 / 3.0 * l + tau)) {
                    return Err(Error::InvalidParameter(
                        "step-length bound needs theta in (0, 1/(4L/3+tau))".into(),
                    ));
                }
            }
            RecursionSpec::SmmEnvelope { eta, tau, theta, .. } => {
                if !(theta > 0.0 && theta < 1.0 / (tau + eta)) {
                    return Err(Error::InvalidParameter(
                        "envelope recursion needs theta in (0, 1/(tau+eta))".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Residual of the faithful inequality at record index `i`, exposed for
    /// diagnostic plots.
    pub fn plot_residual(&self, tr: &Trace, i: usize) -> Option<f64> {
        self.residual(tr, i, 1.0)
    }

    /// Per-replication residual `lhs - rhs` at record index `i`; the
    /// conditional inequality makes its expectation nonpositive. None when
    /// the trace lacks the data at this index.
    fn residual(&self, tr: &Trace, i: usize, rhs_scale: f64) -> Option<f64> {
        let r = &tr.records[i];
        let next = tr.records.get(i + 1)?;
        let alpha = r.alpha;
        match *self {
            RecursionSpec::SgdNoise { l, c, d, f_bar } => {
                let gap = r.obj - f_bar;
                let gap_next = next.obj - f_bar;
                let m2 = r.measure * r.measure;
                let rhs = (1.0 + l * c * alpha * alpha / 2.0) * gap
                    - alpha * (1.0 - l * alpha / 2.0) * m2
                    + l * d * alpha * alpha / 2.0;
                Some(gap_next - rhs_scale * rhs)
            }
            RecursionSpec::RrEpoch { l, n, f_bar } => {
                let nf = n as f64;
                let gap = r.obj - f_bar;
                let gap_next = next.obj - f_bar;
                let m2 = r.measure * r.measure;
                if !r.step_len.is_finite() {
                    return None;
                }
                let rhs = (1.0 + 2.0 * l.powi(3) * nf.powi(3) * alpha.powi(3)) * gap
                    - nf * alpha / 2.0 * m2
                    - (1.0 - l * nf * alpha) / (2.0 * nf * alpha) * r.step_len * r.step_len;
                Some(gap_next - rhs_scale * rhs)
            }
            RecursionSpec::ProxSgdEnvelope { l, c, d, l_phi, theta, .. } => {
                let gap = tr.env_gap.get(i).copied()?;
                let gap_next = tr.env_gap.get(i + 1).copied()?;
                if !gap.is_finite() || !gap_next.is_finite() || !r.measure.is_finite() {
                    return None;
                }
                let m2 = r.measure * r.measure;
                let rhs = (1.0 + 4.0 * c * alpha * alpha / theta) * gap
                    - l * theta * alpha * m2
                    + 2.0 * alpha * alpha * (c * l_phi * l_phi + d / theta);
                Some(gap_next - rhs_scale * rhs)
            }
            RecursionSpec::ProxSgdStepLength { l, c, d, l_phi, theta, .. } => {
                let gap = tr.env_gap.get(i).copied()?;
                if !gap.is_finite() || !r.step_len.is_finite() {
                    return None;
                }
                let a2 = alpha * alpha;
                let rhs = 8.0 * (2.0 * l + c) * a2 * gap
                    + 4.0 * (((2.0 * l + c) * theta + 1.0) * l_phi * l_phi + d) * a2;
                Some(r.step_len * r.step_len - rhs_scale * rhs)
            }
            RecursionSpec::SmmEnvelope { l_model, eta, tau, theta } => {
                let gap = tr.env_gap.get(i).copied()?;
                let gap_next = tr.env_gap.get(i + 1).copied()?;
                if !gap.is_finite() || !gap_next.is_finite() || !r.measure.is_finite() {
                    return None;
                }
                let m2 = r.measure * r.measure;
                let rhs = gap
                    - (1.0 - (tau + eta) * theta) * alpha / (2.0 * (1.0 - eta * alpha)) * m2
                    + 2.0 * l_model * l_model * alpha * alpha
                        / ((1.0 - eta * alpha) * (theta - alpha));
                Some(gap_next - rhs_scale * rhs)
            }
            RecursionSpec::SmmStepLength { l_model, l_phi, .. } => {
                if !r.step_len.is_finite() {
                    return None;
                }
                let bound = 16.0 * (l_model + l_phi) * (l_model + l_phi) + 8.0 * l_model * l_model;
                Some(r.step_len * r.step_len - rhs_scale * bound * alpha * alpha)
            }
        }
    }
}

/// Test a descent inequality on cross-replication means with `5 * stderr`
/// slack over all step-size-eligible iterations; `rhs_scale` scales the
/// right-hand side (1 for the faithful check; negative controls shrink it).
pub fn check_recursion(
    ens: &Ensemble,
    spec: &RecursionSpec,
    rhs_scale: f64,
) -> Result<ConditionReport> {
    ens.require_statistical_power()?;
    if ens.method() != spec.method() {
        return Err(Error::NotApplicable(format!(
            "recursion `{}` applies to method `{}`, ensemble ran `{}`",
            spec.name(),
            spec.method().as_str(),
            ens.method().as_str()
        )));
    }
    spec.validate()?;
    let n_rec = ens.traces[0].records.len();
    let mut tested = 0usize;
    let mut passed = 0usize;
    let mut first_fail = None;
    let mut k_lo = None;
    let mut k_hi = 0;
    for i in 0..n_rec.saturating_sub(1) {
        let rec = &ens.traces[0].records[i];
        if !spec.eligible(rec.alpha) {
            continue;
        }
        let residuals: Option<Vec<f64>> = ens
            .traces
            .iter()
            .map(|tr| spec.residual(tr, i, rhs_scale))
            .collect();
        let Some(residuals) = residuals else { continue };
        let m = mean(&residuals);
        let se = jackknife_stderr(&residuals);
        let scale = residuals.iter().map(|r| r.abs()).fold(0.0, f64::max);
        tested += 1;
        k_lo.get_or_insert(rec.k);
        k_hi = rec.k;
        if m <= 5.0 * se + 1e-10 * (1.0 + scale) {
            passed += 1;
        } else if first_fail.is_none() {
            first_fail = Some((rec.k, m, se));
        }
    }
    if tested == 0 {
        return Err(Error::NotApplicable(
            "recursion check: no eligible iterations with the needed data".into(),
        ));
    }
    let frac = passed as f64 / tested as f64;
    let verdict = if frac >= 0.99 { Verdict::Pass } else { Verdict::Fail };
    let mut rep = ConditionReport::new(
        &format!("recursion:{}", spec.name()),
        verdict,
        json!({
            "tested_k": tested,
            "passed_k": passed,
            "pass_fraction": frac,
            "rhs_scale": rhs_scale,
        }),
    );
    rep.eligible_k_range = k_lo.map(|lo| (lo, k_hi));
    rep.config_hash = ens.config_hash.clone();
    if let Some((k, m, se)) = first_fail {
        rep.notes
            .push(format!("first failing k = {k}: mean residual {m:.3e}, stderr {se:.3e}"));
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Complexity curve
// ---------------------------------------------------------------------------

/// Fit the log-log slope of `min_{k<=T} mean ||Phi(x^k)||^2` over dyadic `T`;
/// pass when the slope is at most -0.4.
pub fn check_complexity_curve(ens: &Ensemble) -> Result<ConditionReport> {
    ens.require_statistical_power()?;
    match ens.schedule {
        Schedule::InvKLog { .. } => {}
        Schedule::InvK { p, .. } if p > 0.5 && p <= 1.0 => {}
        _ => {
            return Err(Error::NotApplicable(
                "complexity curve needs an inv_k_log or inv_k (p in (1/2, 1]) schedule".into(),
            ))
        }
    }
    let ks = ens.measured_ks();
    if ks.is_empty() {
        return Err(Error::NotApplicable("no measured strides".into()));
    }
    let means: Vec<f64> = ks
        .iter()
        .map(|&k| {
            let vals: Vec<f64> = ens
                .traces
                .iter()
                .map(|tr| tr.records[k as usize].measure.powi(2))
                .collect();
            mean(&vals)
        })
        .collect();
    // at most 8 dyadic anchors: halving below T/128 leaves the asymptotic
    // regime and bends the fit
    let t_last = *ks.last().unwrap();
    let mut anchors = Vec::new();
    let mut t = t_last;
    while t >= 1 && anchors.len() < 8 {
        anchors.push(t);
        if t == 1 {
            break;
        }
        t /= 2;
    }
    anchors.reverse();
    let mut points = Vec::new();
    for &anchor in &anchors {
        let m = ks
            .iter()
            .zip(&means)
            .filter(|(&k, _)| k <= anchor)
            .map(|(_, &v)| v)
            .fold(f64::INFINITY, f64::min);
        if m.is_finite() && m > 0.0 {
            points.push((anchor.max(1) as f64, m));
        }
    }
    if points.len() < 4 {
        return Err(Error::NotApplicable(
            "complexity curve needs at least 4 dyadic points".into(),
        ));
    }
    let slope = fit_loglog_slope(&points);
    let verdict = if slope <= -0.4 { Verdict::Pass } else { Verdict::Fail };
    let mut rep = ConditionReport::new(
        "complexity",
        verdict,
        json!({
            "slope": slope,
            "threshold": -0.4,
            "dyadic_points": points.len(),
            "min_values": points.iter().map(|(t, v)| json!([t, v])).collect::<Vec<_>>(),
        }),
    );
    rep.config_hash = ens.config_hash.clone();
    Ok(rep)
}

pub fn fit_loglog_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let xm = mean(&xs);
    let ym = mean(&ys);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    num / den
}

// ---------------------------------------------------------------------------
// Tail-decay trend (surrogate for the asymptotic statements)
// ---------------------------------------------------------------------------

/// Last-decile mean of `||Phi||` must fall below the first-decile mean.
pub fn check_trend(ens: &Ensemble) -> Result<ConditionReport> {
    ens.require_statistical_power()?;
    let ks = ens.measured_ks();
    if ks.len() < 10 {
        return Err(Error::NotApplicable("trend check needs >= 10 measured strides".into()));
    }
    let decile = (ks.len() / 10).max(1);
    let mean_at = |slice: &[u64]| {
        let mut acc = 0.0;
        let mut n = 0usize;
        for &k in slice {
            for tr in &ens.traces {
                acc += tr.records[k as usize].measure;
                n += 1;
            }
        }
        acc / n as f64
    };
    let first = mean_at(&ks[..decile]);
    let last = mean_at(&ks[ks.len() - decile..]);
    let verdict = if last < first { Verdict::Pass } else { Verdict::Fail };
    let mut rep = ConditionReport::new(
        "trend",
        verdict,
        json!({ "first_decile_mean": first, "last_decile_mean": last }),
    );
    rep.config_hash = ens.config_hash.clone();
    Ok(rep)
}


#[cfg(test)]
mod more_tests {
    use super::*;

    #[test]
    fn complexity_needs_four_dyadic_points() {
        let sched = Schedule::InvKLog { c: 1.0 };
        let ens = synthetic_measure_ensemble(|k| 1.0 / (k as f64 + 1.0), sched, 4, 8);
        assert!(check_complexity_curve(&ens).is_err());
    }

    #[test]
    fn p2_reports_inconclusive_when_noise_dominates() {
        // half the replications see a zero measure, half a large constant:
        // the mean margin is negative but far inside 5 jackknife errors
        let sched = Schedule::InvK { c: 1.0, p: 1.0 };
        let mut ens = synthetic_measure_ensemble(|_| 0.0, sched, 1024, 8);
        for (rep, tr) in ens.traces.iter_mut().enumerate() {
            let level = if rep % 2 == 0 { 0.0 } else { 1.0 };
            for r in tr.records.iter_mut() {
                r.measure = level;
            }
        }
        let rep = check_p2(&ens, 2.0).unwrap();
        assert_eq!(rep.verdict, Verdict::Inconclusive, "{:?}", rep.statistics);
    }
}
