//! Brute-force oracles shared by the integration tests. These stay
//! deliberately independent of the library's solvers: minimization is plain
//! grid search with refinement, derivatives are central differences.

#![allow(dead_code)]

/// Argmin of a 1-D function over `[lo, hi]` by three levels of grid
/// refinement (2001 points per level, each level zooming on the incumbent).
pub fn grid_argmin_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let mut lo = lo;
    let mut hi = hi;
    let mut best = lo;
    for _ in 0..3 {
        let n = 2000usize;
        let step = (hi - lo) / n as f64;
        let mut best_val = f64::INFINITY;
        for i in 0..=n {
            let y = lo + step * i as f64;
            let v = f(y);
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

/// Brute-force 1-D prox: minimize `phi(y) + (y - x)^2 / (2 alpha)` over
/// `[x - 5, x + 5]`.
pub fn grid_prox_1d(phi: impl Fn(f64) -> f64, alpha: f64, x: f64) -> f64 {
    grid_argmin_1d(|y| phi(y) + (y - x) * (y - x) / (2.0 * alpha), x - 5.0, x + 5.0)
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let fp = f(&p);
        p[i] = x[i] - h;
        let fm = f(&p);
        p[i] = x[i];
        g.push((fp - fm) / (2.0 * h));
    }
    g
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
