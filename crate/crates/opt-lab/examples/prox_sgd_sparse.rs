//! Proximal SGD on a least-squares problem with the nonconvex MCP penalty:
//! the envelope gradient norm is the stationarity measure, logged at a
//! stride so the inner solves stay cheap.
//!
//! ```sh
//! cargo run --example prox_sgd_sparse
//! ```

use opt_lab::optimizers::{run_prox_sgd, MeasureKind, MeasureOptions, Schedule};
use opt_lab::problems::{
    build_problem, synthetic_least_squares, AbcOracle, NoiseKind, ProblemSpec, RngStream,
};
use opt_lab::regularizers::{make_regularizer, RegKind};
use opt_lab::stationarity::CompositeProblem;
use opt_lab::verifier::mean;

fn main() {
    let (a, b) = synthetic_least_squares(8, 3, 11);
    let f = build_problem(&ProblemSpec::LeastSquares { a, b }).unwrap().smooth();
    let phi = make_regularizer(RegKind::Mcp { lambda: 1.0, theta: 2.0 }).unwrap();
    let cp = CompositeProblem::new(f, phi);
    println!(
        "least squares + mcp: L = {:.3}, tau = {}, psi_bar = {:.4}",
        cp.f.lipschitz,
        cp.phi.tau,
        cp.psi_bar()
    );

    let oracle = AbcOracle::new(cp.f.clone(), 0.0, 0.5, NoiseKind::GaussianIsotropic).unwrap();
    let schedule = Schedule::InvK { c: 1.0, p: 1.0 };
    let opts = MeasureOptions { kind: MeasureKind::EnvGrad, stride: 100, ..Default::default() };
    let (t, reps) = (5_000u64, 16u64);

    let traces: Vec<_> = (0..reps)
        .map(|r| {
            run_prox_sgd(&cp, &oracle, &schedule, &[2.0, 2.0, 2.0], t, &mut RngStream::new(31, r), &opts)
                .unwrap()
        })
        .collect();
    // the step-size cap 1/(2 tau) skipped the schedule forward by this much
    println!("schedule offset for alpha < 1/(2 tau): {}", traces[0].schedule_offset);

    println!("{:>8} {:>16} {:>16}", "k", "mean psi(x^k)", "mean |grad env|");
    for k in (0..=t).step_by(1000) {
        let objs: Vec<f64> = traces.iter().map(|tr| tr.records[k as usize].obj).collect();
        let ms: Vec<f64> = traces.iter().map(|tr| tr.records[k as usize].measure).collect();
        let m = if ms[0].is_finite() { format!("{:.5e}", mean(&ms)) } else { "-".into() };
        println!("{k:>8} {:>16.6} {:>16}", mean(&objs), m);
    }
}
