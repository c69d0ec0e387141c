//! Gradient descent can meet the `min_k |f'(x^k)|^2 <= 1/T^2` complexity
//! bound without its gradients ever converging: run the 1-D bump
//! construction and verify every checkable claim about its trajectory.
//!
//! ```sh
//! cargo run --example counterexample
//! ```

use opt_lab::counterexample::{counterexample_f, counterexample_grad, run_counterexample};

fn main() {
    let trace = run_counterexample(10_000).unwrap();
    let s = trace.summary();

    println!("T = {}", s.t);
    println!("max |x^k - 1/(k+1)|            = {:.3e}", s.max_iterate_deviation);
    println!("min_k |f'(x^k)|^2              = {:.3e} (target 1/T^2 = {:.3e})",
        s.min_grad_sq, 1.0 / (s.t as f64 * s.t as f64));
    println!("sum_k alpha_k |f'(x^k)|^2      = {:.6} (< 1)", s.weighted_grad_sum);
    println!("unit-gradient parity class     = {:?}", s.unit_gradient_parity);
    println!("largest sampled |f''| ratio    = {:.3e} near 0", s.smoothness_ratio_max);
    println!(
        "verdicts: exact iterates {}, complexity bound {}, summable {}, non-convergent {}, \
         smoothness breaks down {}",
        s.exact_iterates,
        s.complexity_bound_holds,
        s.summability_holds,
        s.nonconvergence_holds,
        s.smoothness_breakdown_holds
    );

    // a peek at the alternating pattern
    println!("\n{:>4} {:>12} {:>12} {:>12}", "k", "x^k", "f(x^k)", "f'(x^k)");
    for r in trace.records.iter().take(9) {
        println!(
            "{:>4} {:>12.8} {:>12.8} {:>12.8}",
            r.k,
            r.x,
            counterexample_f(r.x),
            counterexample_grad(r.x)
        );
    }
}
