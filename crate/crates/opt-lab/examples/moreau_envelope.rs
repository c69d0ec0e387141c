//! Stationarity measures for a composite problem: the natural residual, the
//! Moreau envelope gradient computed by the inner solver, a finite-difference
//! check of that gradient, and the two-sided equivalence bounds between the
//! measures.
//!
//! ```sh
//! cargo run --example moreau_envelope
//! ```

use opt_lab::problems::{build_problem, ProblemSpec};
use opt_lab::regularizers::{make_regularizer, RegKind};
use opt_lab::stationarity::{
    check_equivalence_bounds, moreau_prox, natural_residual, CompositeProblem,
};

fn main() {
    let f = build_problem(&ProblemSpec::Quadratic {
        q: vec![vec![1.0, 0.0], vec![0.0, 2.0]],
        center: vec![0.0, 0.0],
    })
    .unwrap()
    .smooth();
    let phi = make_regularizer(RegKind::Mcp { lambda: 1.0, theta: 2.0 }).unwrap();
    let cp = CompositeProblem::new(f, phi);
    let theta = cp.default_theta();
    println!(
        "composite problem: L = {}, tau = {}, default theta = {theta:.5}",
        cp.f.lipschitz, cp.phi.tau
    );

    let x = vec![1.5, -0.75];
    let env = moreau_prox(&cp, theta, &x, 1e-12).unwrap();
    println!(
        "envelope at {x:?}: value = {:.6}, |grad| = {:.6} ({} inner iterations)",
        env.env_value,
        env.grad_norm(),
        env.inner_iters
    );
    println!("prox point = {:?}", env.prox_point);

    // central differences of the envelope value reproduce its gradient
    let h = 1e-5;
    for i in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fd = (moreau_prox(&cp, theta, &xp, 1e-12).unwrap().env_value
            - moreau_prox(&cp, theta, &xm, 1e-12).unwrap().env_value)
            / (2.0 * h);
        println!(
            "  coordinate {i}: grad = {:+.8}, finite difference = {fd:+.8}",
            env.env_grad[i]
        );
    }

    let alpha = cp.default_alpha();
    let nat = natural_residual(&cp, alpha, &x).unwrap();
    println!(
        "natural residual (alpha = {alpha}): {:?}, norm {:.6}",
        nat,
        nat.iter().map(|v| v * v).sum::<f64>().sqrt()
    );

    let rep = check_equivalence_bounds(&cp, theta, &x).unwrap();
    println!(
        "equivalence sandwich: {:.5} <= |grad env| = {:.5} <= {:.5} -> pass = {}",
        rep.lower_bound_value,
        rep.env_grad_norm,
        rep.upper_bound_value,
        rep.pass()
    );
}
