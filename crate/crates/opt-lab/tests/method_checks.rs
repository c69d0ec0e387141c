//! Cross-method behavior: reduction identities, Monte Carlo descent
//! statistics against closed-form recursions, the per-method descent
//! inequalities, step-length scaling, and the frozen-state decomposition.

mod common;

use opt_lab::linalg;
use opt_lab::optimizers::{
    run_prox_sgd, run_rr, run_sgd, run_smm, MeasureKind, MeasureOptions, ModelFamily, ModelType,
    Schedule, StochasticFamily, Trace,
};
use opt_lab::problems::{
    build_problem, quadratic_component, AbcOracle, FiniteSumObjective, NoiseKind, ProblemSpec,
    RngStream, SmoothObjective,
};
use opt_lab::regularizers::Regularizer;
use opt_lab::stationarity::CompositeProblem;
use opt_lab::verifier::{
    check_decomposition, check_recursion, fit_loglog_slope, DecompositionParams, Ensemble,
    FrozenResampler, RecursionSpec, Verdict,
};

fn quadratic(dim: usize) -> SmoothObjective {
    let q: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    build_problem(&ProblemSpec::Quadratic { q, center: vec![0.0; dim] })
        .unwrap()
        .smooth()
}

fn ensemble_of(
    reps: u64,
    seed: u64,
    run: impl Fn(&mut RngStream) -> Trace,
    schedule: Schedule,
) -> Ensemble {
    let traces: Vec<Trace> = (0..reps)
        .map(|r| {
            let mut rng = RngStream::new(seed, r);
            run(&mut rng)
        })
        .collect();
    Ensemble::new(traces, schedule, "test".into()).unwrap()
}

// ---------------------------------------------------------------------------
// Reduction identities
// ---------------------------------------------------------------------------

#[test]
fn prox_sgd_with_zero_regularizer_is_sgd_bit_for_bit() {
    let obj = quadratic(3);
    let oracle = AbcOracle::new(obj.clone(), 0.5, 1.0, NoiseKind::GaussianIsotropic).unwrap();
    let sched = Schedule::InvK { c: 0.5, p: 1.0 };
    let x0 = vec![1.5, -2.0, 0.25];
    let opts = MeasureOptions { kind: MeasureKind::Grad, ..Default::default() };

    let mut r1 = RngStream::new(11, 4);
    let sgd = run_sgd(&oracle, &sched, &x0, 64, &mut r1).unwrap();
    let mut r2 = RngStream::new(11, 4);
    let cp = CompositeProblem::new(obj, Regularizer::zero());
    let prox = run_prox_sgd(&cp, &oracle, &sched, &x0, 64, &mut r2, &opts).unwrap();

    assert_eq!(sgd.to_csv(), prox.to_csv());
    for (a, b) in sgd.final_x.iter().zip(&prox.final_x) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn smm_subgradient_on_smooth_problem_is_gradient_descent() {
    // single-component smooth family, zero regularizer, no noise: the
    // model step is exactly x - alpha grad f(x)
    let center = vec![0.75, -0.25];
    let fam = StochasticFamily::SmoothQuadratic { centers: vec![center.clone()], scale: 1.0 };
    let phi = Regularizer::zero();
    let model = ModelFamily::new(ModelType::Subgradient, fam, &phi, 10.0).unwrap();
    let sched = Schedule::InvK { c: 0.4, p: 1.0 };
    let x0 = vec![2.0, 2.0];
    let opts = MeasureOptions { kind: MeasureKind::Grad, stride: 1, ..Default::default() };

    let mut r1 = RngStream::new(21, 0);
    let smm = run_smm(&model, &phi, &sched, &x0, 48, &mut r1, &opts).unwrap();
    let oracle = AbcOracle::noiseless(quadratic_component(center, 1.0));
    let mut r2 = RngStream::new(21, 0);
    let sgd = run_sgd(&oracle, &sched, &x0, 48, &mut r2).unwrap();

    assert_eq!(smm.to_csv(), sgd.to_csv());
}

#[test]
fn rr_with_one_component_is_gradient_descent() {
    let comp = quadratic_component(vec![0.5], 1.0);
    let fs = FiniteSumObjective::new(vec![comp.clone()]).unwrap();
    let sched = Schedule::InvK { c: 0.4, p: 1.0 };

    let mut r1 = RngStream::new(31, 2);
    let rr = run_rr(&fs, &sched, &[3.0], 48, &mut r1).unwrap();
    let mut r2 = RngStream::new(31, 2);
    let gd = run_sgd(&AbcOracle::noiseless(comp), &sched, &[3.0], 48, &mut r2).unwrap();

    assert_eq!(rr.to_csv(), gd.to_csv());
}

// ---------------------------------------------------------------------------
// SGD statistics against the closed-form variance recursion
// ---------------------------------------------------------------------------

#[test]
fn sgd_noise_floor_matches_closed_form_recursion() {
    // isotropic quadratic with additive noise: E||x^{k+1}||^2 =
    // (1-a_k)^2 E||x^k||^2 + a_k^2 D, computable exactly
    let dim = 5;
    let obj = quadratic(dim);
    let oracle = AbcOracle::new(obj.clone(), 0.0, 1.0, NoiseKind::GaussianIsotropic).unwrap();
    let sched = Schedule::InvK { c: 1.0, p: 1.0 };
    let t = 10_000u64;
    let reps = 64;
    let x0 = vec![2.0; dim];

    let finals: Vec<f64> = (0..reps)
        .map(|r| {
            let mut rng = RngStream::new(1001, r);
            let tr = run_sgd(&oracle, &sched, &x0, t, &mut rng).unwrap();
            linalg::dot(&tr.final_x, &tr.final_x)
        })
        .collect();
    let emp = opt_lab::verifier::mean(&finals);
    let se = opt_lab::verifier::jackknife_stderr(&finals);

    let mut v = linalg::dot(&x0, &x0);
    for k in 0..t {
        let a = sched.value(k);
        v = (1.0 - a) * (1.0 - a) * v + a * a * 1.0;
    }
    assert!(
        (emp - v).abs() <= 5.0 * se,
        "empirical E||x_T||^2 = {emp}, closed form {v}, stderr {se}"
    );
    // and the headline magnitude: mean gradient norm at most 0.1
    let mean_norm = opt_lab::verifier::mean(
        &finals.iter().map(|s| s.sqrt()).collect::<Vec<_>>(),
    );
    assert!(mean_norm <= 0.1, "mean ||grad f(x_T)|| = {mean_norm}");
}

// ---------------------------------------------------------------------------
// Descent recursions
// ---------------------------------------------------------------------------

#[test]
fn rr_epoch_recursion_on_quadratic_pair() {
    let fs = FiniteSumObjective::new(vec![
        quadratic_component(vec![1.0], 1.0),
        quadratic_component(vec![-1.0], 1.0),
    ])
    .unwrap();
    let sched = Schedule::InvK { c: 0.25, p: 1.0 };
    let ens = ensemble_of(
        64,
        2002,
        |rng| run_rr(&fs, &sched, &[0.7], 200, rng).unwrap(),
        sched,
    );
    let spec = RecursionSpec::RrEpoch { l: fs.lipschitz(), n: fs.n(), f_bar: fs.f_bar() };
    let rep = check_recursion(&ens, &spec, 1.0).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass, "{:?}", rep.statistics);
    // halved right side must be detected
    let rep = check_recursion(&ens, &spec, 0.5).unwrap();
    assert_eq!(rep.verdict, Verdict::Fail);
}

#[test]
fn recursion_method_mismatch_is_not_applicable() {
    let obj = quadratic(1);
    let oracle = AbcOracle::noiseless(obj.clone());
    let sched = Schedule::InvK { c: 0.5, p: 1.0 };
    let ens = ensemble_of(
        8,
        7,
        |rng| run_sgd(&oracle, &sched, &[1.0], 32, rng).unwrap(),
        sched,
    );
    let spec = RecursionSpec::RrEpoch { l: 1.0, n: 2, f_bar: 0.0 };
    assert!(check_recursion(&ens, &spec, 1.0).is_err());
}

#[test]
fn noiseless_gd_satisfies_descent_recursion_with_zero_slack() {
    let obj = quadratic(2);
    let oracle = AbcOracle::noiseless(obj.clone());
    let sched = Schedule::Constant { c: 0.5 };
    let ens = ensemble_of(
        8,
        3,
        |rng| run_sgd(&oracle, &sched, &[2.0, -1.0], 64, rng).unwrap(),
        sched,
    );
    let spec = RecursionSpec::SgdNoise { l: obj.lipschitz, c: 0.0, d: 0.0, f_bar: obj.f_bar };
    let rep = check_recursion(&ens, &spec, 1.0).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
}

#[test]
fn prox_sgd_envelope_recursion_on_quadratic_l1() {
    let obj = quadratic(2);
    let cp = CompositeProblem::new(obj.clone(), Regularizer::l1(1.0));
    let oracle = AbcOracle::new(obj, 0.0, 1.0, NoiseKind::GaussianIsotropic).unwrap();
    let sched = Schedule::InvK { c: 1.0, p: 1.0 };
    let theta = cp.default_theta();
    let opts = MeasureOptions { kind: MeasureKind::EnvGrad, stride: 1, ..Default::default() };
    let ens = ensemble_of(
        32,
        909,
        |rng| run_prox_sgd(&cp, &oracle, &sched, &[2.0, -2.0], 400, rng, &opts).unwrap(),
        sched,
    );
    let spec = RecursionSpec::ProxSgdEnvelope {
        l: 1.0,
        c: 0.0,
        d: 1.0,
        l_phi: 1.0,
        tau: 0.0,
        theta,
    };
    let rep = check_recursion(&ens, &spec, 1.0).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass, "{:?} {:?}", rep.statistics, rep.notes);
}

// ---------------------------------------------------------------------------
// Step-length scaling
// ---------------------------------------------------------------------------

#[test]
fn rr_step_length_scales_linearly_with_alpha() {
    // regressing log step_len on log alpha_k: slope at least 0.9
    let fs = FiniteSumObjective::new(vec![
        quadratic_component(vec![1.0], 1.0),
        quadratic_component(vec![-1.0], 1.0),
        quadratic_component(vec![0.3], 1.0),
    ])
    .unwrap();
    let sched = Schedule::InvK { c: 0.2, p: 1.0 };
    let mut rng = RngStream::new(515, 0);
    let tr = run_rr(&fs, &sched, &[2.0], 400, &mut rng).unwrap();
    let pts: Vec<(f64, f64)> = tr
        .records
        .iter()
        .filter(|r| r.step_len.is_finite() && r.step_len > 0.0)
        .map(|r| (r.alpha, r.step_len))
        .collect();
    let slope = fit_loglog_slope(&pts);
    assert!(slope >= 0.9, "slope {slope}");
}

// ---------------------------------------------------------------------------
// Model families: accuracy, trends, contraction
// ---------------------------------------------------------------------------

#[test]
fn one_sided_model_accuracy_holds_for_catalog_families() {
    // E_xi[f_x(y, xi) - f(y)] <= tau/2 ||x-y||^2, exact finite average
    let mut rng = RngStream::new(88, 0);
    let a: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.next_normal()]).collect();
    let b: Vec<f64> = (0..6).map(|_| rng.next_normal().abs() + 0.1).collect();
    let phi = Regularizer::l1(0.3);

    let fams = [
        (
            ModelType::Subgradient,
            StochasticFamily::RobustLinear { a: a.clone(), b: b.clone() },
        ),
        (ModelType::ProxLinear, StochasticFamily::PhaseRetrieval { a, b }),
    ];
    for (mt, fam) in fams {
        let model = ModelFamily::new(mt, fam, &phi, 10.0).unwrap();
        for _ in 0..200 {
            let x = [3.0 * (2.0 * rng.next_f64() - 1.0)];
            let y = [3.0 * (2.0 * rng.next_f64() - 1.0)];
            let n = model.family.n();
            let model_mean: f64 =
                (0..n).map(|i| model.model_value(&x, i, &y)).sum::<f64>() / n as f64;
            let f_y = model.family.mean_value(&y);
            let gap = model_mean - f_y;
            let bound = model.tau / 2.0 * linalg::dist(&x, &y).powi(2);
            assert!(
                gap <= bound + 1e-10,
                "{mt:?}: one-sided accuracy violated: {gap} > {bound}"
            );
        }
    }
}

#[test]
fn prox_linear_phase_retrieval_envelope_trend() {
    // robust 1-D phase retrieval with 8 samples: the envelope gradient at T
    // sits below its value at T/4 on ensemble average
    let mut gen = RngStream::new(3003, 0);
    let a: Vec<Vec<f64>> = (0..8).map(|_| vec![0.5 + gen.next_f64()]).collect();
    let b: Vec<f64> = (0..8).map(|_| 0.2 + gen.next_f64()).collect();
    let phi = Regularizer::zero();
    let model =
        ModelFamily::new(ModelType::ProxLinear, StochasticFamily::PhaseRetrieval { a, b }, &phi, 10.0)
            .unwrap();
    let sched = Schedule::InvK { c: 0.5, p: 1.0 };
    let opts = MeasureOptions { kind: MeasureKind::EnvGrad, stride: 50, ..Default::default() };
    let t = 2000u64;
    let reps = 32;
    let mut at_quarter = Vec::new();
    let mut at_end = Vec::new();
    for r in 0..reps {
        let mut rng = RngStream::new(7117, r);
        let tr = run_smm(&model, &phi, &sched, &[2.0], t, &mut rng, &opts).unwrap();
        let q = tr.records[(t / 4) as usize].measure;
        let e = tr.records[t as usize].measure;
        assert!(q.is_finite() && e.is_finite());
        at_quarter.push(q);
        at_end.push(e);
    }
    let mq = opt_lab::verifier::mean(&at_quarter);
    let me = opt_lab::verifier::mean(&at_end);
    assert!(me < mq, "mean envelope gradient at T = {me} vs T/4 = {mq}");
}

#[test]
fn proximal_point_contracts_toward_the_mean_minimizer() {
    // strongly convex components, constant step: the distance to the mean
    // of the centers decreases monotonically on ensemble average
    let centers = vec![vec![1.0], vec![-0.5], vec![0.25], vec![0.75]];
    let mean_center: f64 = centers.iter().map(|c| c[0]).sum::<f64>() / centers.len() as f64;
    let phi = Regularizer::zero();
    let model = ModelFamily::new(
        ModelType::ProximalPoint,
        StochasticFamily::SmoothQuadratic { centers, scale: 1.0 },
        &phi,
        10.0,
    )
    .unwrap();
    let sched = Schedule::Constant { c: 0.2 };
    let opts = MeasureOptions { kind: MeasureKind::Grad, stride: 1, ..Default::default() };
    let reps = 32;
    let t = 40u64;
    let mut mean_dist: std::collections::BTreeMap<u64, f64> = Default::default();
    let mut per_rep_dists: Vec<Vec<f64>> = Vec::new();
    for r in 0..reps {
        let mut rng = RngStream::new(12321, r);
        let tr = run_smm(&model, &phi, &sched, &[4.0], t, &mut rng, &opts).unwrap();
        let mut mine = Vec::new();
        for (k, x) in &tr.snapshots {
            let d = (x[0] - mean_center).abs();
            *mean_dist.entry(*k).or_insert(0.0) += d / reps as f64;
            mine.push(d);
        }
        per_rep_dists.push(mine);
    }
    let dists: Vec<f64> = mean_dist.values().copied().collect();
    assert!(dists.len() >= 10);
    // the true expected distance is monotone; the ensemble mean carries
    // Monte Carlo noise near its floor, so test paired differences with
    // the usual 5-stderr slack
    for (i, w) in dists.windows(2).enumerate() {
        let diffs: Vec<f64> = (0..reps)
            .map(|r| per_rep_dists[r as usize][i + 1] - per_rep_dists[r as usize][i])
            .collect();
        let m = opt_lab::verifier::mean(&diffs);
        let se = opt_lab::verifier::jackknife_stderr(&diffs);
        assert!(
            m <= 5.0 * se + 1e-12,
            "distance increased beyond noise at window {i}: {} -> {} (mean diff {m}, se {se})",
            w[0],
            w[1]
        );
    }
    // and the overall trend is a strict decrease
    assert!(dists.last().unwrap() < &(dists[0] * 0.5));
}

// ---------------------------------------------------------------------------
// Frozen-state decomposition
// ---------------------------------------------------------------------------

struct SgdProbe {
    oracle: AbcOracle,
    sched: Schedule,
}

impl FrozenResampler for SgdProbe {
    fn displacement(&self, x: &[f64], k: u64, rng: &mut RngStream) -> opt_lab::Result<Vec<f64>> {
        let g = self.oracle.sample(x, rng)?;
        Ok(linalg::scale(&g, -self.mu(k)))
    }
    fn mu(&self, k: u64) -> f64 {
        self.sched.value(k)
    }
    fn drift_reference(&self, x: &[f64], _k: u64) -> Option<Vec<f64>> {
        Some(linalg::scale(&self.oracle.base.gradient(x), -1.0))
    }
    fn a_moment_bound(&self, x: &[f64], _k: u64) -> Option<f64> {
        Some(self.oracle.c * self.oracle.base.gap(x) + self.oracle.d)
    }
    fn mode(&self) -> &'static str {
        "oracle_resampling"
    }
}

#[test]
fn sgd_decomposition_recovers_negative_gradient_drift() {
    let obj = quadratic(2);
    let oracle = AbcOracle::new(obj.clone(), 1.0, 0.5, NoiseKind::GaussianIsotropic).unwrap();
    let sched = Schedule::InvK { c: 0.5, p: 1.0 };
    let probes: Vec<(u64, Vec<f64>)> =
        vec![(3, vec![1.0, -1.0]), (10, vec![0.5, 0.2]), (50, vec![2.0, 1.0])];
    let params = DecompositionParams { q: 2.0, b: 2.0, declared_a: 10.0, ceiling: 10.0 };
    let resampler = SgdProbe { oracle, sched };
    let measure = |x: &[f64]| -> opt_lab::Result<f64> { Ok(linalg::norm(&quadratic(2).gradient(x))) };
    let rng = RngStream::new(777, 0);
    let rep = check_decomposition(&resampler, &probes, 4000, &params, &measure, &rng).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");
    for p in &rep.probes {
        assert!(p.martingale_pass && p.moment_pass && p.ratio_pass);
        assert!(p.drift_deviation_sigmas.unwrap() <= 5.0);
    }
}

#[test]
fn zero_noise_decomposition_is_exactly_degenerate() {
    let obj = quadratic(1);
    let oracle = AbcOracle::noiseless(obj);
    let sched = Schedule::InvK { c: 0.5, p: 1.0 };
    let resampler = SgdProbe { oracle, sched };
    let probes = vec![(2u64, vec![1.0])];
    let params = DecompositionParams { q: 2.0, b: 2.0, declared_a: 0.0, ceiling: 10.0 };
    let measure = |x: &[f64]| -> opt_lab::Result<f64> { Ok(x[0].abs()) };
    let rng = RngStream::new(9, 0);
    let rep = check_decomposition(&resampler, &probes, 64, &params, &measure, &rng).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
    // exact in real arithmetic; division by mu leaves ulp-level residue
    assert!(rep.probes[0].mean_a_norm < 1e-14);
    assert!(rep.probes[0].a_moment < 1e-28);
}

#[test]
fn divergent_runs_are_flagged_not_fatal() {
    let obj = quadratic(1);
    let oracle = AbcOracle::noiseless(obj);
    // constant step 3 on a 1-Lipschitz gradient doubles the iterate
    let sched = Schedule::Constant { c: 3.0 };
    let mut rng = RngStream::new(0, 0);
    let tr = run_sgd(&oracle, &sched, &[1.0], 500, &mut rng).unwrap();
    assert!(tr.diverged);
    assert!(tr.records.len() < 501);
    assert!(tr.records.iter().all(|r| r.obj.is_finite()));
}

#[test]
fn checks_are_pure_functions_of_the_ensemble() {
    let obj = quadratic(2);
    let oracle = AbcOracle::new(obj, 0.0, 1.0, NoiseKind::GaussianIsotropic).unwrap();
    let sched = Schedule::InvK { c: 0.5, p: 1.0 };
    let ens = ensemble_of(
        8,
        42,
        |rng| run_sgd(&oracle, &sched, &[2.0, -2.0], 128, rng).unwrap(),
        sched,
    );
    let spec = RecursionSpec::SgdNoise { l: 1.0, c: 0.0, d: 1.0, f_bar: 0.0 };
    let a = serde_json::to_string(&check_recursion(&ens, &spec, 1.0).unwrap()).unwrap();
    let b = serde_json::to_string(&check_recursion(&ens, &spec, 1.0).unwrap()).unwrap();
    assert_eq!(a, b);
    let p2a = serde_json::to_string(&opt_lab::verifier::check_p2(&ens, 2.0).unwrap()).unwrap();
    let p2b = serde_json::to_string(&opt_lab::verifier::check_p2(&ens, 2.0).unwrap()).unwrap();
    assert_eq!(p2a, p2b);
}

#[test]
fn recursion_verdict_monotone_in_rhs_scale() {
    let fs = FiniteSumObjective::new(vec![
        quadratic_component(vec![1.0], 1.0),
        quadratic_component(vec![-1.0], 1.0),
    ])
    .unwrap();
    let sched = Schedule::InvK { c: 0.25, p: 1.0 };
    let ens = ensemble_of(
        8,
        5,
        |rng| run_rr(&fs, &sched, &[0.7], 100, rng).unwrap(),
        sched,
    );
    let spec = RecursionSpec::RrEpoch { l: 1.0, n: 2, f_bar: 0.0 };
    // loosening the right side can never flip a pass into a fail
    let faithful = check_recursion(&ens, &spec, 1.0).unwrap().verdict;
    let loose = check_recursion(&ens, &spec, 2.0).unwrap().verdict;
    assert_eq!(faithful, Verdict::Pass);
    assert_eq!(loose, Verdict::Pass);
}

#[test]
fn prox_sgd_envelope_trend_on_least_squares_mcp() {
    use opt_lab::problems::synthetic_least_squares;
    use opt_lab::regularizers::{make_regularizer, RegKind};
    // measure means over the last three logging windows keep decreasing
    let (a, b) = synthetic_least_squares(6, 3, 21);
    let f = build_problem(&ProblemSpec::LeastSquares { a, b }).unwrap().smooth();
    let phi = make_regularizer(RegKind::Mcp { lambda: 1.0, theta: 2.0 }).unwrap();
    let cp = CompositeProblem::new(f.clone(), phi);
    let oracle = AbcOracle::new(f, 0.0, 0.5, NoiseKind::GaussianIsotropic).unwrap();
    let sched = Schedule::InvK { c: 1.0, p: 1.0 };
    let opts = MeasureOptions { kind: MeasureKind::EnvGrad, stride: 50, ..Default::default() };
    let t = 2500u64;
    let reps = 16u64;
    let traces: Vec<Trace> = (0..reps)
        .map(|r| {
            run_prox_sgd(&cp, &oracle, &sched, &[2.0, 2.0, 2.0], t, &mut RngStream::new(33, r), &opts)
                .unwrap()
        })
        .collect();
    let ks: Vec<usize> = traces[0]
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.measure.is_finite())
        .map(|(i, _)| i)
        .collect();
    // split logged strides into windows of a third of the run each and look
    // at the last three
    let w = ks.len() / 5;
    let window_mean = |lo: usize, hi: usize| -> f64 {
        let mut acc = 0.0;
        let mut n = 0;
        for &i in &ks[lo..hi] {
            for tr in &traces {
                acc += tr.records[i].measure;
                n += 1;
            }
        }
        acc / n as f64
    };
    let w1 = window_mean(ks.len() - 3 * w, ks.len() - 2 * w);
    let w2 = window_mean(ks.len() - 2 * w, ks.len() - w);
    let w3 = window_mean(ks.len() - w, ks.len());
    assert!(w3 < w2 && w2 < w1, "windows not decreasing: {w1} {w2} {w3}");
}
