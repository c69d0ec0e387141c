//! Experiment runner: ensemble execution with parallel replications, trace
//! persistence (one CSV per replication plus a JSON manifest), condition
//! verification, and plot emission.
//!
//! Verification works by replay: the manifest stores the canonical config,
//! the runs are deterministic in `(seed, replication)`, so `verify` re-runs
//! the ensemble in memory, confirms the stored CSVs are byte-identical to
//! the replayed traces, and then evaluates the requested conditions on the
//! replayed data (which also carries quantities the CSV does not, like
//! envelope gaps and iterate snapshots).
//!
//! Exit codes: 0 success, 1 verification failures, 2 invalid configuration
//! or usage, 3 I/O failure, 4 all replications diverged.

use crate::config::{config_hash, parse_config_text, ExperimentConfig};
use crate::counterexample;
use crate::error::{Error, Result};
use crate::linalg;
use crate::optimizers::{
    run_prox_sgd, run_rr, run_sgd, run_smm, MeasureKind, MeasureOptions, Method, ModelFamily,
    Schedule, Trace,
};
use crate::plot::{line_chart, ChartSpec, Series};
use crate::problems::{build_problem, AbcOracle, BuiltProblem, RngStream};
use crate::regularizers::{make_regularizer, Regularizer};
use crate::stationarity::CompositeProblem;
use crate::verifier::{
    self, check_complexity_curve, check_p1, check_p2, check_p3, check_recursion, check_trend,
    ConditionParams, ConditionReport, DecompositionParams, Ensemble, FrozenResampler, MeasureSpec,
    RecursionSpec, Verdict,
};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub const FORMAT_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Built experiment pieces
// ---------------------------------------------------------------------------

/// Everything a replication needs, constructed once from the config.
pub struct Workbench {
    pub cfg: ExperimentConfig,
    pub problem: BuiltProblem,
    pub phi: Option<Regularizer>,
    pub model: Option<ModelFamily>,
}

impl Workbench {
    pub fn build(cfg: ExperimentConfig) -> Result<Self> {
        let problem = build_problem(&cfg.problem)?;
        let phi = cfg.regularizer.map(make_regularizer).transpose()?;
        let model = match (cfg.method, cfg.model_type, &cfg.model_family, &phi) {
            (Method::Smm, Some(mt), Some(fam), Some(phi)) => {
                Some(ModelFamily::new(mt, fam.clone(), phi, 10.0)?)
            }
            _ => None,
        };
        Ok(Workbench { cfg, problem, phi, model })
    }

    pub fn smooth(&self) -> crate::problems::SmoothObjective {
        self.problem.smooth()
    }

    pub fn oracle(&self) -> Result<AbcOracle> {
        AbcOracle::new(
            self.smooth(),
            self.cfg.oracle_c,
            self.cfg.oracle_d,
            self.cfg.noise_kind,
        )
    }

    pub fn composite(&self) -> Result<CompositeProblem> {
        let phi = self.phi.ok_or_else(|| {
            Error::IncompatibleConfig("composite problem needs a regularizer".into())
        })?;
        Ok(CompositeProblem::new(self.smooth(), phi))
    }

    fn measure_options(&self) -> MeasureOptions {
        MeasureOptions {
            kind: self.cfg.measure,
            stride: self.cfg.stride,
            theta: self.cfg.theta,
            ..MeasureOptions::default()
        }
    }

    /// Run one replication with its own counter-based stream.
    pub fn run_replication(&self, rep: u64) -> Result<Trace> {
        let mut rng = RngStream::new(self.cfg.seed, rep);
        let x0 = vec![self.cfg.x0; self.dim()];
        match self.cfg.method {
            Method::Sgd => run_sgd(&self.oracle()?, &self.cfg.schedule, &x0, self.cfg.t, &mut rng),
            Method::Rr => {
                let fs = self.problem.finite_sum().ok_or_else(|| {
                    Error::IncompatibleConfig("rr needs a finite-sum problem".into())
                })?;
                run_rr(fs, &self.cfg.schedule, &x0, self.cfg.t, &mut rng)
            }
            Method::ProxSgd => run_prox_sgd(
                &self.composite()?,
                &self.oracle()?,
                &self.cfg.schedule,
                &x0,
                self.cfg.t,
                &mut rng,
                &self.measure_options(),
            ),
            Method::Smm => run_smm(
                self.model.as_ref().expect("validated by config"),
                self.phi.as_ref().expect("validated by config"),
                &self.cfg.schedule,
                &x0,
                self.cfg.t,
                &mut rng,
                &self.measure_options(),
            ),
        }
    }

    fn dim(&self) -> usize {
        match self.cfg.method {
            Method::Smm => self.model.as_ref().map_or(1, |m| m.family.dim()),
            _ => self.smooth().dim,
        }
    }

    /// All replications, parallel over a small worker pool; results are
    /// ordered by replication index regardless of scheduling.
    pub fn run_ensemble(&self) -> Result<Vec<Trace>> {
        let reps = self.cfg.reps;
        let jobs = if self.cfg.jobs > 0 {
            self.cfg.jobs
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
        .min(reps.max(1));
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<Trace>>>> = Mutex::new((0..reps).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let rep = next.fetch_add(1, Ordering::Relaxed);
                    if rep >= reps {
                        break;
                    }
                    let out = self.run_replication(rep as u64);
                    slots.lock().unwrap()[rep] = Some(out);
                });
            }
        });
        slots
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|slot| slot.expect("worker filled every slot"))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ManifestSummary {
    pub divergence_count: usize,
    pub final_mean_measure: f64,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub method: Method,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub seed: u64,
    pub reps: usize,
    pub t: u64,
    pub schedule: String,
    pub measure: MeasureKind,
    /// Envelope parameter actually used, when the measure needs one.
    pub theta: Option<f64>,
    pub trace_files: Vec<String>,
    pub summary: ManifestSummary,
}

/// Outcome of `run`: where things were written and how the ensemble fared.
pub struct RunOutcome {
    pub manifest_path: PathBuf,
    pub divergence_count: usize,
    pub reps: usize,
}

pub fn cmd_run(cfg: ExperimentConfig) -> Result<RunOutcome> {
    let out_dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out_dir)?;
    let bench = Workbench::build(cfg)?;
    let traces = bench.run_ensemble()?;
    let traces: Vec<Trace> = traces.into_iter().collect();

    let mut trace_files = Vec::new();
    for tr in &traces {
        let name = format!("rep_{:03}.csv", tr.replication);
        std::fs::write(out_dir.join(&name), tr.to_csv())?;
        trace_files.push(name);
    }
    let divergence_count = traces.iter().filter(|t| t.diverged).count();
    let finals: Vec<f64> = traces
        .iter()
        .filter(|t| !t.diverged)
        .filter_map(|t| {
            t.records
                .iter()
                .rev()
                .find(|r| r.measure.is_finite())
                .map(|r| r.measure)
        })
        .collect();
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        method: bench.cfg.method,
        config: bench.cfg.raw.clone(),
        config_hash: bench.cfg.hash(),
        seed: bench.cfg.seed,
        reps: bench.cfg.reps,
        t: bench.cfg.t,
        schedule: bench.cfg.schedule.describe(),
        measure: bench.cfg.measure,
        theta: traces
            .first()
            .and_then(|t| if t.theta.is_finite() { Some(t.theta) } else { None }),
        trace_files,
        summary: ManifestSummary {
            divergence_count,
            final_mean_measure: verifier::mean(&finals),
        },
    };
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap())?;
    Ok(RunOutcome { manifest_path, divergence_count, reps: bench.cfg.reps })
}

// ---------------------------------------------------------------------------
// Ensemble loading (replay + integrity check)
// ---------------------------------------------------------------------------

pub struct LoadedEnsemble {
    pub ensemble: Ensemble,
    pub bench: Workbench,
    pub manifest: Manifest,
}

pub fn load_ensemble(manifest_path: &Path) -> Result<LoadedEnsemble> {
    let text = std::fs::read_to_string(manifest_path)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "manifest format_version {} unsupported (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let cfg = ExperimentConfig::from_map(manifest.config.clone())?;
    if config_hash(&cfg.raw) != manifest.config_hash {
        return Err(Error::Parse("manifest config hash mismatch".into()));
    }
    let bench = Workbench::build(cfg)?;
    let traces = bench.run_ensemble()?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    for (tr, name) in traces.iter().zip(&manifest.trace_files) {
        let stored = std::fs::read_to_string(dir.join(name))?;
        if stored != tr.to_csv() {
            return Err(Error::Parse(format!(
                "trace file `{name}` does not match the deterministic replay of its config"
            )));
        }
    }
    let live: Vec<Trace> = traces.into_iter().filter(|t| !t.diverged).collect();
    let ensemble = Ensemble::new(live, bench.cfg.schedule, bench.cfg.hash())?;
    Ok(LoadedEnsemble { ensemble, bench, manifest })
}

// ---------------------------------------------------------------------------
// Condition dispatch
// ---------------------------------------------------------------------------

/// Resampler implementations for the decomposition check.
struct OracleResampler<'a> {
    bench: &'a Workbench,
    schedule: Schedule,
}

impl FrozenResampler for OracleResampler<'_> {
    fn displacement(&self, x: &[f64], k: u64, rng: &mut RngStream) -> Result<Vec<f64>> {
        let alpha = self.mu(k);
        match self.bench.cfg.method {
            Method::Sgd => {
                let g = self.bench.oracle()?.sample(x, rng)?;
                Ok(linalg::scale(&g, -alpha))
            }
            Method::ProxSgd => {
                let cp = self.bench.composite()?;
                let g = self.bench.oracle()?.sample(x, rng)?;
                let next = cp.phi.prox(alpha, &linalg::axpy(x, -alpha, &g))?;
                Ok(linalg::sub(&next, x))
            }
            Method::Rr => {
                let fs = self.bench.problem.finite_sum().ok_or_else(|| {
                    Error::IncompatibleConfig("rr resampler needs a finite sum".into())
                })?;
                let perm = rng.permutation(fs.n());
                let next = crate::optimizers::rr_epoch(fs, x, alpha, &perm);
                Ok(linalg::sub(&next, x))
            }
            Method::Smm => {
                let model = self.bench.model.as_ref().expect("validated");
                let phi = self.bench.phi.as_ref().expect("validated");
                let xi = rng.next_below(model.family.n() as u64) as usize;
                let next = crate::optimizers::smm_subproblem(model, phi, alpha, x, xi)?;
                Ok(linalg::sub(&next, x))
            }
        }
    }

    fn mu(&self, k: u64) -> f64 {
        self.schedule.value(k)
    }

    fn drift_reference(&self, x: &[f64], _k: u64) -> Option<Vec<f64>> {
        // closed form only for sgd: E[delta | x] / mu = -grad f(x)
        match self.bench.cfg.method {
            Method::Sgd => Some(linalg::scale(&self.bench.smooth().gradient(x), -1.0)),
            _ => None,
        }
    }

    fn a_moment_bound(&self, x: &[f64], k: u64) -> Option<f64> {
        match self.bench.cfg.method {
            // E||A||^2 = E||g - grad f||^2 <= C gap(x) + D exactly
            Method::Sgd => {
                let obj = self.bench.smooth();
                Some(self.bench.cfg.oracle_c * obj.gap(x) + self.bench.cfg.oracle_d)
            }
            // centered prox step: E||A||^2 <= 4 E||delta/alpha||^2 with
            // ||delta|| <= alpha (2 L_phi + 2 ||g||)
            Method::ProxSgd => {
                let obj = self.bench.smooth();
                let l_phi = self.bench.phi.and_then(|p| p.lipschitz)?;
                let g2 = linalg::dot(&obj.gradient(x), &obj.gradient(x));
                let noise2 = self.bench.cfg.oracle_c * obj.gap(x) + self.bench.cfg.oracle_d;
                Some(4.0 * (4.0 * l_phi * l_phi + 8.0 * g2 + 8.0 * noise2))
            }
            // epoch displacement: inner iterates stay in a ball whose radius
            // grows with the component gradients at the probe, so
            // ||delta|| <= alpha * s_N with s_N from the declared modulus
            Method::Rr => {
                let fs = self.bench.problem.finite_sum()?;
                let alpha = self.mu(k);
                let g_at_x = fs
                    .components
                    .iter()
                    .map(|c| linalg::norm(&c.gradient(x)))
                    .fold(0.0, f64::max);
                let l = fs.lipschitz();
                let mut sum = 0.0;
                let mut radius = 0.0;
                for _ in 0..fs.n() {
                    sum += g_at_x + l * radius;
                    radius = alpha * sum;
                }
                Some(4.0 * sum * sum)
            }
            // prox of a Lipschitz regularizer moves at most 2 alpha L_phi
            // past the model step
            Method::Smm => {
                let model = self.bench.model.as_ref()?;
                let l_phi = self.bench.phi.and_then(|p| p.lipschitz)?;
                match model.model_type {
                    crate::optimizers::ModelType::Subgradient => {
                        let s_max = (0..model.family.n())
                            .map(|i| linalg::norm(&model.family.subgradient(i, x)))
                            .fold(0.0, f64::max);
                        Some(4.0 * (s_max + 2.0 * l_phi) * (s_max + 2.0 * l_phi))
                    }
                    _ => {
                        let l = model.lipschitz;
                        Some(4.0 * (16.0 * (l + l_phi) * (l + l_phi) + 8.0 * l * l))
                    }
                }
            }
        }
    }

    fn mode(&self) -> &'static str {
        match self.bench.cfg.method {
            Method::Rr => "permutation_resampling",
            _ => "oracle_resampling",
        }
    }
}

fn default_theta_of(loaded: &LoadedEnsemble) -> f64 {
    loaded.manifest.theta.unwrap_or(f64::NAN)
}

/// Evaluate one named condition on a loaded ensemble. Unknown names error;
/// conditions inapplicable to the ensemble's method come back `Skipped`.
pub fn run_condition(loaded: &LoadedEnsemble, name: &str, rhs_scale: f64) -> ConditionReport {
    let outcome = dispatch_condition(loaded, name, rhs_scale);
    match outcome {
        Ok(rep) => rep,
        Err(Error::NotApplicable(reason)) => {
            let mut rep = ConditionReport {
                condition: name.to_string(),
                verdict: Verdict::Skipped,
                statistics: serde_json::json!({}),
                eligible_k_range: None,
                config_hash: loaded.ensemble.config_hash.clone(),
                notes: vec![reason],
            };
            rep.statistics = serde_json::json!({ "skipped": true });
            rep
        }
        Err(e) => ConditionReport {
            condition: name.to_string(),
            verdict: Verdict::Fail,
            statistics: serde_json::json!({ "error": e.to_string() }),
            eligible_k_range: None,
            config_hash: loaded.ensemble.config_hash.clone(),
            notes: vec![format!("check errored: {e}")],
        },
    }
}

fn dispatch_condition(
    loaded: &LoadedEnsemble,
    name: &str,
    rhs_scale: f64,
) -> Result<ConditionReport> {
    let ens = &loaded.ensemble;
    let bench = &loaded.bench;
    let cfg = &bench.cfg;
    match name {
        "p1" => {
            let pairs = measure_pairs(bench)?;
            let obj = bench.smooth();
            match cfg.measure {
                MeasureKind::Grad => {
                    let phi = move |x: &[f64]| -> Result<Vec<f64>> { Ok(obj.gradient(x)) };
                    check_p1(
                        &MeasureSpec {
                            phi: &phi,
                            declared_modulus: bench.smooth().lipschitz,
                            exponent_a: 2.0,
                        },
                        &pairs,
                    )
                }
                MeasureKind::EnvGrad => {
                    let cp = bench.composite()?;
                    let theta = default_theta_of(loaded);
                    let modulus = cp.envelope_grad_modulus(theta);
                    let phi = move |x: &[f64]| -> Result<Vec<f64>> {
                        Ok(crate::stationarity::moreau_prox(&cp, theta, x, 1e-12)?.env_grad)
                    };
                    check_p1(
                        &MeasureSpec { phi: &phi, declared_modulus: modulus, exponent_a: 2.0 },
                        &pairs,
                    )
                }
                MeasureKind::NatResidual => Err(Error::NotApplicable(
                    "p1 is checked for the gradient or envelope-gradient measures".into(),
                )),
            }
        }
        "p2" => check_p2(ens, 2.0),
        "p3" => {
            let params = p3_params(bench)?;
            check_p3(ens, &params)
        }
        "p3prime" => {
            let resampler = OracleResampler { bench, schedule: cfg.schedule };
            let probes = decomposition_probes(ens);
            if probes.is_empty() {
                return Err(Error::NotApplicable("no iterate snapshots for probing".into()));
            }
            let params = DecompositionParams {
                q: 2.0,
                b: 2.0,
                declared_a: 0.0,
                ceiling: cfg
                    .raw
                    .get("p3prime.ceiling")
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(1e4),
            };
            let measure_fn = measure_closure(bench, default_theta_of(loaded))?;
            let m = cfg
                .raw
                .get("p3prime.samples")
                .and_then(|v| v.parse().ok())
                .unwrap_or(2000usize);
            let rng = RngStream::new(cfg.seed, u64::MAX - 7);
            let dec =
                verifier::check_decomposition(&resampler, &probes, m, &params, &*measure_fn, &rng)?;
            let mut rep = ConditionReport {
                condition: "p3prime".into(),
                verdict: dec.verdict,
                statistics: serde_json::to_value(&dec).unwrap(),
                eligible_k_range: None,
                config_hash: ens.config_hash.clone(),
                notes: vec![format!("resampling mode: {}", dec.resampling_mode)],
            };
            if dec.resampling_mode == "permutation_resampling" {
                rep.notes
                    .push("epoch randomness re-drawn as whole permutations".into());
            }
            Ok(rep)
        }
        "complexity" => check_complexity_curve(ens),
        "trend" => check_trend(ens),
        _ if name.starts_with("recursion:") => {
            let spec = recursion_spec(bench, &name["recursion:".len()..], default_theta_of(loaded))?;
            check_recursion(ens, &spec, rhs_scale)
        }
        other => Err(Error::UnknownName(format!("condition `{other}`"))),
    }
}

/// Sampled point pairs inside the problem's certified region.
fn measure_pairs(bench: &Workbench) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let dim = bench.smooth().dim;
    let radius = bench.smooth().sample_radius.min(3.0);
    let mut rng = RngStream::new(bench.cfg.seed, u64::MAX - 3);
    Ok((0..250)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| radius * (2.0 * rng.next_f64() - 1.0)).collect();
            let y: Vec<f64> = (0..dim).map(|_| radius * (2.0 * rng.next_f64() - 1.0)).collect();
            (x, y)
        })
        .collect())
}

fn measure_closure(
    bench: &Workbench,
    theta: f64,
) -> Result<Box<dyn Fn(&[f64]) -> Result<f64> + '_>> {
    match bench.cfg.measure {
        MeasureKind::Grad => {
            let obj = bench.smooth();
            Ok(Box::new(move |x: &[f64]| Ok(linalg::norm(&obj.gradient(x)))))
        }
        MeasureKind::EnvGrad => {
            let cp = bench.composite()?;
            Ok(Box::new(move |x: &[f64]| {
                Ok(crate::stationarity::moreau_prox(&cp, theta, x, 1e-10)?.grad_norm())
            }))
        }
        MeasureKind::NatResidual => {
            let cp = bench.composite()?;
            Ok(Box::new(move |x: &[f64]| {
                Ok(linalg::norm(&crate::stationarity::natural_residual(
                    &cp,
                    cp.default_alpha(),
                    x,
                )?))
            }))
        }
    }
}

fn decomposition_probes(ens: &Ensemble) -> Vec<(u64, Vec<f64>)> {
    let snaps = &ens.traces[0].snapshots;
    let take = 10.min(snaps.len());
    let step = (snaps.len() / take.max(1)).max(1);
    snaps
        .iter()
        .step_by(step)
        .take(take)
        .map(|(k, x)| (*k, x.clone()))
        .collect()
}

/// Deterministic upper bound `F` on `E[f(x^k)] - f_bar` along an SGD run,
/// iterated from the descent inequality with declared constants only.
fn sgd_gap_bound(l: f64, c: f64, d: f64, gap0: f64, schedule: &Schedule, t: u64) -> f64 {
    let mut gap = gap0;
    let mut worst = gap0;
    for k in 0..t {
        let a = schedule.value(k);
        // the gradient term only grows the gap when a > 2/L, and then by at
        // most 2 L gap via ||grad f||^2 <= 2 L gap
        let grow = 1.0 + l * c * a * a / 2.0 + (a * (l * a / 2.0 - 1.0)).max(0.0) * 2.0 * l;
        gap = grow * gap + l * d * a * a / 2.0;
        worst = worst.max(gap);
    }
    worst
}

fn p3_params(bench: &Workbench) -> Result<ConditionParams> {
    let cfg = &bench.cfg;
    let explicit = |key: &str| cfg.raw.get(key).and_then(|v| v.parse::<f64>().ok());
    if let (Some(big_a), Some(big_b)) = (explicit("p3.big_a"), explicit("p3.big_b")) {
        return Ok(ConditionParams {
            a: explicit("p3.a").unwrap_or(2.0),
            b: explicit("p3.b").unwrap_or(2.0),
            q: explicit("p3.q").unwrap_or(2.0),
            p1: explicit("p3.p1").unwrap_or(2.0),
            p2: explicit("p3.p2").unwrap_or(2.0),
            big_a,
            big_b,
        });
    }
    match cfg.method {
        Method::Sgd => {
            let obj = bench.smooth();
            let x0 = vec![cfg.x0; obj.dim];
            let gap_bound = sgd_gap_bound(
                obj.lipschitz,
                cfg.oracle_c,
                cfg.oracle_d,
                obj.gap(&x0),
                &cfg.schedule,
                cfg.t,
            );
            Ok(ConditionParams {
                a: 2.0,
                b: 2.0,
                q: 2.0,
                p1: 2.0,
                p2: 2.0,
                big_a: cfg.oracle_c * gap_bound + cfg.oracle_d,
                big_b: 1.0,
            })
        }
        _ => Err(Error::NotApplicable(
            "p3 for this method needs explicit constants (p3.big_a, p3.big_b, ...)".into(),
        )),
    }
}

fn recursion_spec(bench: &Workbench, which: &str, theta: f64) -> Result<RecursionSpec> {
    let cfg = &bench.cfg;
    let obj = bench.smooth();
    match which {
        "sgd_noise" => Ok(RecursionSpec::SgdNoise {
            l: obj.lipschitz,
            c: cfg.oracle_c,
            d: cfg.oracle_d,
            f_bar: obj.f_bar,
        }),
        "rr_epoch" => {
            let fs = bench
                .problem
                .finite_sum()
                .ok_or_else(|| Error::NotApplicable("rr recursion needs a finite sum".into()))?;
            Ok(RecursionSpec::RrEpoch { l: fs.lipschitz(), n: fs.n(), f_bar: fs.f_bar() })
        }
        "prox_sgd_envelope" | "prox_sgd_step" => {
            let phi = bench
                .phi
                .ok_or_else(|| Error::NotApplicable("needs a regularizer".into()))?;
            let l_phi = phi.lipschitz.ok_or_else(|| {
                Error::NotApplicable("bound needs a Lipschitz regularizer".into())
            })?;
            if which == "prox_sgd_envelope" {
                Ok(RecursionSpec::ProxSgdEnvelope {
                    l: obj.lipschitz,
                    c: cfg.oracle_c,
                    d: cfg.oracle_d,
                    l_phi,
                    tau: phi.tau,
                    theta,
                })
            } else {
                Ok(RecursionSpec::ProxSgdStepLength {
                    l: obj.lipschitz,
                    c: cfg.oracle_c,
                    d: cfg.oracle_d,
                    l_phi,
                    tau: phi.tau,
                    theta,
                })
            }
        }
        "smm_envelope" | "smm_step" => {
            let model = bench
                .model
                .as_ref()
                .ok_or_else(|| Error::NotApplicable("needs a model family".into()))?;
            let phi = bench.phi.expect("smm config carries a regularizer");
            if which == "smm_envelope" {
                Ok(RecursionSpec::SmmEnvelope {
                    l_model: model.lipschitz,
                    eta: model.eta,
                    tau: model.tau,
                    theta,
                })
            } else {
                let l_phi = phi.lipschitz.ok_or_else(|| {
                    Error::NotApplicable("bound needs a Lipschitz regularizer".into())
                })?;
                Ok(RecursionSpec::SmmStepLength {
                    l_model: model.lipschitz,
                    l_phi,
                    eta: model.eta,
                })
            }
        }
        other => Err(Error::UnknownName(format!("recursion spec `{other}`"))),
    }
}

pub fn cmd_verify(
    manifest_path: &Path,
    conditions: &[String],
    rhs_scale: f64,
    out: Option<&Path>,
) -> Result<(Vec<ConditionReport>, bool)> {
    let loaded = load_ensemble(manifest_path)?;
    let reports: Vec<ConditionReport> = conditions
        .iter()
        .map(|c| run_condition(&loaded, c, rhs_scale))
        .collect();
    let text = serde_json::to_string_pretty(&reports).unwrap();
    match out {
        Some(path) => std::fs::write(path, &text)?,
        None => println!("{text}"),
    }
    let any_fail = reports.iter().any(|r| r.verdict == Verdict::Fail);
    Ok((reports, any_fail))
}

// ---------------------------------------------------------------------------
// Plots
// ---------------------------------------------------------------------------

pub fn cmd_plot(input: &Path, kind: &str, out: &Path) -> Result<()> {
    let svg = if input.extension().and_then(|e| e.to_str()) == Some("json") {
        let loaded = load_ensemble(input)?;
        plot_ensemble(&loaded, kind)?
    } else {
        plot_single_csv(input, kind)?
    };
    std::fs::write(out, svg)?;
    Ok(())
}

fn plot_ensemble(loaded: &LoadedEnsemble, kind: &str) -> Result<String> {
    let ens = &loaded.ensemble;
    let ks = ens.measured_ks();
    if ks.is_empty() {
        return Err(Error::Parse("no measure column values to plot".into()));
    }
    match kind {
        "measure_vs_k" => {
            let mut points = Vec::new();
            let mut band = Vec::new();
            for &k in &ks {
                let vals: Vec<f64> = ens
                    .traces
                    .iter()
                    .map(|tr| tr.records[k as usize].measure)
                    .collect();
                let m = verifier::mean(&vals);
                let se = verifier::jackknife_stderr(&vals);
                points.push((k as f64, m));
                if se.is_finite() {
                    band.push((k as f64, (m - se).max(1e-300), m + se));
                }
            }
            Ok(line_chart(
                &ChartSpec {
                    title: format!("{} measure vs k", loaded.manifest.method.as_str()),
                    x_label: "k".into(),
                    y_label: "measure".into(),
                    log_x: false,
                    log_y: true,
                    annotation: None,
                },
                &[Series { label: "mean +/- stderr".into(), points, band }],
            ))
        }
        "min_measure_vs_T" => {
            let mut mins = Vec::new();
            let mut best = f64::INFINITY;
            for &k in &ks {
                let vals: Vec<f64> = ens
                    .traces
                    .iter()
                    .map(|tr| tr.records[k as usize].measure.powi(2))
                    .collect();
                best = best.min(verifier::mean(&vals));
                if k > 0 {
                    mins.push((k as f64, best));
                }
            }
            let slope = verifier::fit_loglog_slope(&mins);
            Ok(line_chart(
                &ChartSpec {
                    title: "running min of mean squared measure".into(),
                    x_label: "T".into(),
                    y_label: "min measure^2".into(),
                    log_x: true,
                    log_y: true,
                    annotation: Some(format!("fitted slope {slope:.3}")),
                },
                &[Series { label: "min_k<=T".into(), points: mins, band: vec![] }],
            ))
        }
        "recursion_slack" => {
            let which = match loaded.manifest.method {
                Method::Sgd => "sgd_noise",
                Method::Rr => "rr_epoch",
                Method::ProxSgd => "prox_sgd_envelope",
                Method::Smm => "smm_envelope",
            };
            let spec = recursion_spec(&loaded.bench, which, default_theta_of(loaded))?;
            let rep = check_recursion(ens, &spec, 1.0)?;
            // re-derive per-k mean residuals for the picture
            let mut points = Vec::new();
            for i in 0..ens.traces[0].records.len() - 1 {
                let residuals: Option<Vec<f64>> = ens
                    .traces
                    .iter()
                    .map(|tr| spec_residual_for_plot(&spec, tr, i))
                    .collect();
                if let Some(rs) = residuals {
                    points.push((ens.traces[0].records[i].k as f64, verifier::mean(&rs)));
                }
            }
            Ok(line_chart(
                &ChartSpec {
                    title: format!("recursion slack ({which})"),
                    x_label: "k".into(),
                    y_label: "mean(lhs - rhs)".into(),
                    log_x: false,
                    log_y: false,
                    annotation: Some(format!("verdict: {:?}", rep.verdict)),
                },
                &[Series { label: "slack (<= 0 is good)".into(), points, band: vec![] }],
            ))
        }
        other => Err(Error::UnknownName(format!("plot kind `{other}`"))),
    }
}

fn spec_residual_for_plot(spec: &RecursionSpec, tr: &Trace, i: usize) -> Option<f64> {
    spec.plot_residual(tr, i)
}

fn plot_single_csv(input: &Path, kind: &str) -> Result<String> {
    let text = std::fs::read_to_string(input)?;
    let records = Trace::records_from_csv(&text)?;
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.measure.is_finite())
        .map(|r| (r.k as f64, r.measure))
        .collect();
    if points.is_empty() {
        return Err(Error::Parse("csv has no finite measure values".into()));
    }
    match kind {
        "measure_vs_k" => Ok(line_chart(
            &ChartSpec {
                title: "measure vs k".into(),
                x_label: "k".into(),
                y_label: "measure".into(),
                log_x: false,
                log_y: true,
                annotation: None,
            },
            &[Series { label: "measure".into(), points, band: vec![] }],
        )),
        "min_measure_vs_T" => {
            let mut best = f64::INFINITY;
            let mins: Vec<(f64, f64)> = points
                .iter()
                .filter(|(k, _)| *k > 0.0)
                .map(|&(k, m)| {
                    best = best.min(m * m);
                    (k, best)
                })
                .collect();
            let slope = verifier::fit_loglog_slope(&mins);
            Ok(line_chart(
                &ChartSpec {
                    title: "running min of squared measure".into(),
                    x_label: "T".into(),
                    y_label: "min measure^2".into(),
                    log_x: true,
                    log_y: true,
                    annotation: Some(format!("fitted slope {slope:.3}")),
                },
                &[Series { label: "min_k<=T".into(), points: mins, band: vec![] }],
            ))
        }
        other => Err(Error::UnknownName(format!(
            "plot kind `{other}` needs an ensemble manifest"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Counterexample command
// ---------------------------------------------------------------------------

pub fn cmd_counterexample(t: u64, out_csv: &Path) -> Result<counterexample::CexSummary> {
    let trace = counterexample::run_counterexample(t)?;
    std::fs::write(out_csv, trace.to_csv())?;
    let summary = trace.summary();
    let json_path = out_csv.with_extension("summary.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary).unwrap())?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Argument parsing and entry point
// ---------------------------------------------------------------------------

const USAGE: &str = "usage:
  opt-lab run [--config FILE] [--KEY VALUE ...]       run an ensemble
  opt-lab verify --manifest FILE [--conditions LIST]
                 [--rhs-scale S] [--out FILE]          check conditions
  opt-lab plot --input FILE --kind KIND --out FILE     emit an SVG
  opt-lab counterexample --T N --out FILE.csv          run the 1-D construction

conditions: p1, p2, p3, p3prime, complexity, trend,
            recursion:{sgd_noise, rr_epoch, prox_sgd_envelope,
                        prox_sgd_step, smm_envelope, smm_step}
plot kinds: measure_vs_k, min_measure_vs_T, recursion_slack";

fn take_flag_value(args: &[String], i: &mut usize, flag: &str) -> Result<String> {
    *i += 1;
    args.get(*i)
        .cloned()
        .ok_or_else(|| Error::Parse(format!("flag {flag} needs a value")))
}

/// Full CLI entry point; returns the process exit code.
pub fn main_entry(args: &[String]) -> i32 {
    match run_cli(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => 3,
                Error::InnerSolverFailed { .. } | Error::NonFinite(_) => 1,
                _ => 2,
            }
        }
    }
}

fn run_cli(args: &[String]) -> Result<i32> {
    let Some(cmd) = args.first() else {
        eprintln!("{USAGE}");
        return Ok(2);
    };
    match cmd.as_str() {
        "run" => {
            let mut map = BTreeMap::new();
            let mut i = 1;
            while i < args.len() {
                let flag = args[i].clone();
                let Some(stripped) = flag.strip_prefix("--") else {
                    return Err(Error::Parse(format!("unexpected argument `{flag}`")));
                };
                let value = take_flag_value(args, &mut i, &flag)?;
                if stripped == "config" {
                    let text = std::fs::read_to_string(&value)?;
                    let file_map = parse_config_text(&text)?;
                    // flags given before --config must still win; keep overrides
                    for (k, v) in file_map {
                        map.entry(k).or_insert(v);
                    }
                } else {
                    map.insert(stripped.to_string(), value);
                }
                i += 1;
            }
            let cfg = ExperimentConfig::from_map(map)?;
            let outcome = cmd_run(cfg)?;
            println!(
                "wrote {} ({} replications, {} diverged)",
                outcome.manifest_path.display(),
                outcome.reps,
                outcome.divergence_count
            );
            if outcome.divergence_count == outcome.reps {
                return Ok(4);
            }
            Ok(0)
        }
        "verify" => {
            let mut manifest = None;
            let mut conditions = vec![
                "p1".to_string(),
                "p2".to_string(),
                "p3".to_string(),
                "trend".to_string(),
            ];
            let mut rhs_scale = 1.0;
            let mut out = None;
            let mut i = 1;
            while i < args.len() {
                match args[i].as_str() {
                    "--manifest" => manifest = Some(take_flag_value(args, &mut i, "--manifest")?),
                    "--conditions" => {
                        conditions = take_flag_value(args, &mut i, "--conditions")?
                            .split(',')
                            .map(|s| s.trim().to_string())
                            .filter(|s| !s.is_empty())
                            .collect()
                    }
                    "--rhs-scale" => {
                        rhs_scale = take_flag_value(args, &mut i, "--rhs-scale")?
                            .parse()
                            .map_err(|_| Error::Parse("bad --rhs-scale".into()))?
                    }
                    "--out" => out = Some(take_flag_value(args, &mut i, "--out")?),
                    other => return Err(Error::Parse(format!("unknown flag `{other}`"))),
                }
                i += 1;
            }
            let manifest =
                manifest.ok_or_else(|| Error::Parse("verify needs --manifest".into()))?;
            let (_, any_fail) = cmd_verify(
                Path::new(&manifest),
                &conditions,
                rhs_scale,
                out.as_deref().map(Path::new),
            )?;
            Ok(if any_fail { 1 } else { 0 })
        }
        "plot" => {
            let mut input = None;
            let mut kind = None;
            let mut out = None;
            let mut i = 1;
            while i < args.len() {
                match args[i].as_str() {
                    "--input" => input = Some(take_flag_value(args, &mut i, "--input")?),
                    "--kind" => kind = Some(take_flag_value(args, &mut i, "--kind")?),
                    "--out" => out = Some(take_flag_value(args, &mut i, "--out")?),
                    other => return Err(Error::Parse(format!("unknown flag `{other}`"))),
                }
                i += 1;
            }
            let (input, kind, out) = match (input, kind, out) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(Error::Parse("plot needs --input, --kind, --out".into())),
            };
            cmd_plot(Path::new(&input), &kind, Path::new(&out))?;
            println!("wrote {out}");
            Ok(0)
        }
        "counterexample" => {
            let mut t = 10_000u64;
            let mut out = "counterexample.csv".to_string();
            let mut i = 1;
            while i < args.len() {
                match args[i].as_str() {
                    "--T" | "--t" => {
                        t = take_flag_value(args, &mut i, "--T")?
                            .parse()
                            .map_err(|_| Error::Parse("bad --T".into()))?
                    }
                    "--out" => out = take_flag_value(args, &mut i, "--out")?,
                    other => return Err(Error::Parse(format!("unknown flag `{other}`"))),
                }
                i += 1;
            }
            let summary = cmd_counterexample(t, Path::new(&out))?;
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{}", serde_json::to_string_pretty(&summary).unwrap())?;
            Ok(0)
        }
        "--help" | "-h" | "help" => {
            println!("{USAGE}");
            Ok(0)
        }
        other => {
            eprintln!("unknown command `{other}`\n{USAGE}");
            Ok(2)
        }
    }
}
