//! Fit the decay rate of `min_{k<=T} E||grad env(x^k)||^2` over dyadic `T`
//! for proximal SGD under the log-damped schedule, with the step-size cap
//! enforced by skipping the schedule forward.
//!
//! ```sh
//! cargo run --release --example complexity_slope
//! ```

use opt_lab::optimizers::{run_prox_sgd, MeasureKind, MeasureOptions, Schedule};
use opt_lab::problems::{build_problem, AbcOracle, NoiseKind, ProblemSpec, RngStream};
use opt_lab::regularizers::Regularizer;
use opt_lab::stationarity::CompositeProblem;
use opt_lab::verifier::{check_complexity_curve, Ensemble};

fn main() -> opt_lab::Result<()> {
    let f = build_problem(&ProblemSpec::Quadratic { q: vec![vec![1.0]], center: vec![0.0] })?
        .smooth();
    let cp = CompositeProblem::new(f.clone(), Regularizer::l1(0.5));
    let theta = cp.default_theta();
    let cap = 0.5 / (1.0 / theta - f.lipschitz);
    let schedule = Schedule::InvKLog { c: 60.0 };
    println!("theta = {theta}, admissibility cap = {cap:.5}");

    let oracle = AbcOracle::new(f, 0.0, 1.0, NoiseKind::GaussianIsotropic)?;
    let opts = MeasureOptions {
        kind: MeasureKind::EnvGrad,
        alpha_cap: Some(cap),
        ..Default::default()
    };
    let traces: Vec<_> = (0..32)
        .map(|r| {
            run_prox_sgd(&cp, &oracle, &schedule, &[2.0], 1 << 14, &mut RngStream::new(900, r), &opts)
        })
        .collect::<opt_lab::Result<_>>()?;
    println!("schedule offset after skip-forward: {}", traces[0].schedule_offset);

    let ens = Ensemble::new(traces, schedule, "example".into())?;
    let report = check_complexity_curve(&ens)?;
    println!("verdict: {:?}", report.verdict);
    println!(
        "fitted log-log slope = {:.3} (threshold -0.4)",
        report.statistics["slope"].as_f64().unwrap()
    );
    for point in report.statistics["min_values"].as_array().unwrap() {
        println!("  T = {:>6}  min mean measure^2 = {:.4e}",
            point[0].as_f64().unwrap(), point[1].as_f64().unwrap());
    }
    Ok(())
}
