//! Run a replicated SGD ensemble on a noisy quadratic and print how the
//! gradient norm decays along the schedule.
//!
//! ```sh
//! cargo run --example sgd_quadratic
//! ```

use opt_lab::optimizers::{run_sgd, Schedule};
use opt_lab::problems::{build_problem, AbcOracle, NoiseKind, ProblemSpec, RngStream};
use opt_lab::verifier::{jackknife_stderr, mean};

fn main() {
    let obj = build_problem(&ProblemSpec::Quadratic {
        q: vec![vec![1.0, 0.0], vec![0.0, 3.0]],
        center: vec![0.0, 0.0],
    })
    .unwrap()
    .smooth();
    println!("quadratic: L = {}, f_bar = {}", obj.lipschitz, obj.f_bar);

    // additive noise with second moment exactly D = 1 at every point
    let oracle = AbcOracle::new(obj, 0.0, 1.0, NoiseKind::GaussianIsotropic).unwrap();
    let schedule = Schedule::InvK { c: 0.5, p: 1.0 };
    let (t, reps) = (5_000u64, 32u64);

    let traces: Vec<_> = (0..reps)
        .map(|r| run_sgd(&oracle, &schedule, &[3.0, -2.0], t, &mut RngStream::new(7, r)).unwrap())
        .collect();

    println!("{:>8} {:>12} {:>12} {:>12}", "k", "alpha", "mean |grad|", "stderr");
    for k in [0u64, 10, 100, 1000, t] {
        let vals: Vec<f64> = traces.iter().map(|tr| tr.records[k as usize].measure).collect();
        println!(
            "{k:>8} {:>12.3e} {:>12.4e} {:>12.1e}",
            schedule.value(k),
            mean(&vals),
            jackknife_stderr(&vals)
        );
    }
}
