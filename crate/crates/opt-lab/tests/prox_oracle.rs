//! Proximity operators against the brute-force grid oracle, plus the
//! regularizer-level inequalities (nonexpansiveness, weak-convexity
//! subgradient inequality, midpoint convexity, Lipschitz modulus).

mod common;

use common::{grid_prox_1d, grid_argmin_1d};
use opt_lab::problems::RngStream;
use opt_lab::regularizers::{make_regularizer, RegKind, Regularizer};
use proptest::prelude::*;

fn catalog() -> Vec<Regularizer> {
    vec![
        make_regularizer(RegKind::L1 { lambda: 1.0 }).unwrap(),
        make_regularizer(RegKind::Mcp { lambda: 1.0, theta: 2.0 }).unwrap(),
        make_regularizer(RegKind::Scad { lambda: 1.0, theta: 3.0 }).unwrap(),
        make_regularizer(RegKind::StudentT { theta: 1.0 }).unwrap(),
    ]
}

#[test]
fn spec_example_prox_values_match_grid_oracle() {
    // soft threshold: prox of |.| at x = 0.3 with alpha = 0.5 is 0
    let l1 = Regularizer::l1(1.0);
    let oracle = grid_prox_1d(|y| l1.value_1d(y), 0.5, 0.3);
    assert!(oracle.abs() < 1e-6);
    assert_eq!(l1.prox_1d(0.5, 0.3), 0.0);

    // mcp beyond the clipping region: flat penalty leaves x fixed
    let mcp = make_regularizer(RegKind::Mcp { lambda: 1.0, theta: 2.0 }).unwrap();
    let oracle = grid_prox_1d(|y| mcp.value_1d(y), 0.5, 5.0);
    assert!((oracle - 5.0).abs() < 1e-6);
    assert_eq!(mcp.prox_1d(0.5, 5.0), 5.0);
}

#[test]
fn prox_matches_grid_oracle_on_random_draws() {
    let mut rng = RngStream::new(2024, 0);
    for reg in catalog() {
        for _ in 0..60 {
            let alpha = 0.05 + rng.next_f64() * (0.5 / reg.tau.max(0.5) - 0.05);
            let x = 6.0 * (2.0 * rng.next_f64() - 1.0);
            let ours = reg.prox_1d(alpha, x);
            let oracle = grid_prox_1d(|y| reg.value_1d(y), alpha, x);
            assert!(
                (ours - oracle).abs() <= 1e-5,
                "{:?}: alpha = {alpha}, x = {x}, ours = {ours}, oracle = {oracle}",
                reg.kind
            );
        }
    }
}

#[test]
fn prox_is_lipschitz_with_declared_constant() {
    // ||prox(a, x) - prox(a, y)|| <= (1 - a tau)^{-1} ||x - y||
    let mut rng = RngStream::new(7, 0);
    for reg in catalog() {
        for _ in 0..200 {
            let alpha = 0.05 + rng.next_f64() * 0.4 / reg.tau.max(0.5);
            let x = 4.0 * (2.0 * rng.next_f64() - 1.0);
            let y = 4.0 * (2.0 * rng.next_f64() - 1.0);
            if (x - y).abs() < 1e-9 {
                continue;
            }
            let lip = 1.0 / (1.0 - alpha * reg.tau);
            let lhs = (reg.prox_1d(alpha, x) - reg.prox_1d(alpha, y)).abs();
            assert!(
                lhs <= lip * (x - y).abs() + 1e-10,
                "{:?} alpha {alpha}: {lhs} vs {}",
                reg.kind,
                lip * (x - y).abs()
            );
        }
    }
}

#[test]
fn prox_subgradient_satisfies_weak_convexity_inequality() {
    // s = (x - p)/alpha is a subgradient at p = prox(alpha, x):
    // phi(y) >= phi(p) + s (y - p) - tau/2 (y - p)^2
    let mut rng = RngStream::new(13, 0);
    for reg in catalog() {
        for _ in 0..200 {
            let alpha = 0.05 + rng.next_f64() * 0.4 / reg.tau.max(0.5);
            let x = 4.0 * (2.0 * rng.next_f64() - 1.0);
            let p = reg.prox_1d(alpha, x);
            let s = (x - p) / alpha;
            let y = 4.0 * (2.0 * rng.next_f64() - 1.0);
            let rhs = reg.value_1d(p) + s * (y - p) - reg.tau / 2.0 * (y - p) * (y - p);
            assert!(
                reg.value_1d(y) >= rhs - 1e-9,
                "{:?}: phi({y}) = {} < {rhs}",
                reg.kind,
                reg.value_1d(y)
            );
        }
    }
}

#[test]
fn regularized_function_is_midpoint_convex() {
    // g(y) = phi(y) + tau/2 y^2 must satisfy midpoint convexity
    let mut rng = RngStream::new(99, 0);
    for reg in catalog() {
        let g = |y: f64| reg.value_1d(y) + reg.tau / 2.0 * y * y;
        for _ in 0..500 {
            let a = 6.0 * (2.0 * rng.next_f64() - 1.0);
            let b = 6.0 * (2.0 * rng.next_f64() - 1.0);
            let mid = 0.5 * (a + b);
            assert!(
                g(mid) <= 0.5 * (g(a) + g(b)) + 1e-10,
                "{:?}: midpoint convexity violated at ({a}, {b})",
                reg.kind
            );
        }
    }
}

#[test]
fn declared_lipschitz_modulus_bounds_sampled_slopes() {
    let mut rng = RngStream::new(31, 0);
    for reg in catalog() {
        let l_phi = reg.lipschitz.unwrap();
        let mut max_slope = 0.0f64;
        for _ in 0..500 {
            let x = 8.0 * (2.0 * rng.next_f64() - 1.0);
            let y = 8.0 * (2.0 * rng.next_f64() - 1.0);
            if (x - y).abs() < 1e-12 {
                continue;
            }
            max_slope = max_slope.max((reg.value_1d(x) - reg.value_1d(y)).abs() / (x - y).abs());
        }
        assert!(
            max_slope <= l_phi + 1e-9,
            "{:?}: sampled slope {max_slope} exceeds declared {l_phi}",
            reg.kind
        );
    }
}

#[test]
fn grid_oracle_sanity_on_an_analytic_case() {
    // min of (y - 3)^2/2 is 3; the oracle must find it to its resolution
    let m = grid_argmin_1d(|y| (y - 3.0) * (y - 3.0) / 2.0, -5.0, 8.0);
    assert!((m - 3.0).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prox_fixed_point_optimality(kind_idx in 0usize..4, alpha in 0.05f64..0.9, x in -5.0f64..5.0) {
        // the prox output must minimize the prox objective at least as well
        // as any nearby perturbation
        let reg = &catalog()[kind_idx];
        let alpha = alpha.min(0.9 / reg.tau.max(1.0));
        let p = reg.prox_1d(alpha, x);
        let obj = |y: f64| reg.value_1d(y) + (y - x) * (y - x) / (2.0 * alpha);
        for d in [-1e-4, 1e-4, -1e-2, 1e-2] {
            prop_assert!(obj(p) <= obj(p + d) + 1e-12);
        }
    }

    #[test]
    fn rng_streams_reproduce_bit_for_bit(seed in any::<u64>(), rep in 0u64..1000) {
        let mut a = RngStream::new(seed, rep);
        let mut b = RngStream::new(seed, rep);
        for _ in 0..64 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
        // substreams do not disturb the parent
        let mut c = RngStream::new(seed, rep);
        let mut d = c.substream(42);
        let _ = d.next_u64();
        let mut e = RngStream::new(seed, rep);
        for _ in 0..8 {
            prop_assert_eq!(c.next_u64(), e.next_u64());
        }
    }
}
