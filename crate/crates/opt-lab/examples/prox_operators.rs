//! The weakly convex regularizer zoo: values, declared constants, and exact
//! proximity operators, cross-checked here against a brute-force grid.
//!
//! ```sh
//! cargo run --example prox_operators
//! ```

use opt_lab::regularizers::{make_regularizer, RegKind};

fn grid_prox(phi: impl Fn(f64) -> f64, alpha: f64, x: f64) -> f64 {
    let (mut lo, mut hi) = (x - 5.0, x + 5.0);
    let mut best = lo;
    for _ in 0..3 {
        let step = (hi - lo) / 2000.0;
        let mut best_val = f64::INFINITY;
        for i in 0..=2000 {
            let y = lo + step * i as f64;
            let v = phi(y) + (y - x) * (y - x) / (2.0 * alpha);
            if v < best_val {
                best_val = v;
                best = y;
            }
        }
        lo = best - 2.0 * step;
        hi = best + 2.0 * step;
    }
    best
}

fn main() {
    let zoo = [
        ("l1(1)", make_regularizer(RegKind::L1 { lambda: 1.0 }).unwrap()),
        ("mcp(1,2)", make_regularizer(RegKind::Mcp { lambda: 1.0, theta: 2.0 }).unwrap()),
        ("scad(1,3)", make_regularizer(RegKind::Scad { lambda: 1.0, theta: 3.0 }).unwrap()),
        ("student_t(1)", make_regularizer(RegKind::StudentT { theta: 1.0 }).unwrap()),
        ("box[-1,1]", make_regularizer(RegKind::BoxIndicator { lo: -1.0, hi: 1.0 }).unwrap()),
    ];

    println!(
        "{:<14} {:>6} {:>8} | {:>8} {:>12} {:>12} {:>10}",
        "kind", "tau", "L_phi", "x", "prox(0.5,x)", "grid oracle", "diff"
    );
    for (name, reg) in &zoo {
        for x in [0.3, 1.2, 5.0] {
            let p = reg.prox_1d(0.5, x);
            let oracle = grid_prox(|y| reg.value_1d(y), 0.5, x);
            println!(
                "{:<14} {:>6.3} {:>8} | {:>8.2} {:>12.6} {:>12.6} {:>10.1e}",
                name,
                reg.tau,
                reg.lipschitz.map_or("inf".into(), |l| format!("{l:.2}")),
                x,
                p,
                oracle,
                (p - oracle).abs()
            );
        }
    }

    // weak convexity caps the admissible prox step at 1/tau
    let mcp = make_regularizer(RegKind::Mcp { lambda: 1.0, theta: 2.0 }).unwrap();
    println!(
        "\nmcp has tau = {}, so prox(2.0, x) is rejected: {:?}",
        mcp.tau,
        mcp.prox(2.0, &[1.0]).err().map(|e| e.to_string())
    );
}
