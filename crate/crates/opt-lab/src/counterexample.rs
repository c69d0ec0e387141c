//! A 1-D smooth-except-at-zero function on which gradient descent with
//! alternating diminishing steps satisfies the `min_k |f'(x^k)|^2 <= 1/T^2`
//! complexity bound while `|f'(x^k)|` never converges to zero.
//!
//! The function is `f(x) = h(x) + sum_j gamma_j(x)` where each `gamma_j` is a
//! smooth bump of disjoint support centered at `1/(2j)`:
//!
//! * `h(x) = x^2/2` for `x >= 0` and `8 x^2 (8 x^2 - 1)` for `x < 0`;
//! * `gamma_j(x) = g(x) cbar_{kappa_j, nu_j}((x - 1/(2j))^2)` with
//!   `g(x) = x - x^2/2`, `kappa_j = 1/(4j(2j+1))`, `nu_j = 1/(8j(2j+1))`;
//! * `cbar_{kappa,nu}(u) = c(kappa^2-u) / (c(kappa^2-u) + c(u-nu^2))` built
//!   from the mollifier `c(u) = exp(-1/u)` for `u > 0`, `0` otherwise.
//!
//! Because the supports are disjoint, at most one bump is active at any `x`,
//! found in O(1) from the candidate indices near `1/(2x)` instead of summing
//! the series.
//!
//! Gradient descent from `x^0 = 1` with steps `1/(k+2)` (even `k`) and
//! `1/((k+1)(k+2))` (odd `k`) then walks exactly along `x^k = 1/(k+1)`:
//! odd iterates land on bump plateaus where `f' = 1`, even iterates land
//! between supports where `f'(x) = x`. Which parity class carries the unit
//! gradients is detected from the run, not assumed.

use crate::error::{Error, Result};
use crate::optimizers::Schedule;

/// `c(x) = exp(-1/x)` for `x > 0`, `0` otherwise. Underflow for tiny
/// positive `x` returns 0, which is the function's own limit.
pub fn mollifier_c(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

fn sigmoid(d: f64) -> f64 {
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    }
}

/// `cbar_{kappa,nu}(x) = c(kappa^2-x) / (c(kappa^2-x) + c(x-nu^2))`.
///
/// Evaluated as `sigmoid(1/(x-nu^2) - 1/(kappa^2-x))` on the transition
/// interval: algebraically identical, but immune to the double underflow of
/// both mollifier factors that occurs for small `kappa`.
pub fn cutoff_cbar(kappa: f64, nu: f64, x: f64) -> Result<f64> {
    if !(nu >= 0.0 && nu < kappa) {
        return Err(Error::InvalidParameter(format!(
            "cutoff: need 0 <= nu < kappa, got nu = {nu}, kappa = {kappa}"
        )));
    }
    let (k2, n2) = (kappa * kappa, nu * nu);
    if x <= n2 {
        Ok(1.0)
    } else if x >= k2 {
        Ok(0.0)
    } else {
        Ok(sigmoid(1.0 / (x - n2) - 1.0 / (k2 - x)))
    }
}

/// Derivative of the cutoff in the same stable form:
/// `cbar'(x) = -sigma (1-sigma) (1/(kappa^2-x)^2 + 1/(x-nu^2)^2)`.
fn cutoff_cbar_deriv(kappa: f64, nu: f64, x: f64) -> f64 {
    let (k2, n2) = (kappa * kappa, nu * nu);
    if x <= n2 || x >= k2 {
        return 0.0;
    }
    let a = k2 - x;
    let b = x - n2;
    let s = sigmoid(1.0 / b - 1.0 / a);
    -s * (1.0 - s) * (1.0 / (a * a) + 1.0 / (b * b))
}

/// One bump of the construction.
#[derive(Clone, Copy, Debug)]
pub struct BumpFunction {
    pub j: u64,
}

impl BumpFunction {
    pub fn new(j: u64) -> Result<Self> {
        if j == 0 {
            return Err(Error::InvalidParameter("bump index must be >= 1".into()));
        }
        Ok(BumpFunction { j })
    }

    pub fn center(&self) -> f64 {
        1.0 / (2.0 * self.j as f64)
    }

    pub fn kappa(&self) -> f64 {
        let j = self.j as f64;
        1.0 / (4.0 * j * (2.0 * j + 1.0))
    }

    pub fn nu(&self) -> f64 {
        let j = self.j as f64;
        1.0 / (8.0 * j * (2.0 * j + 1.0))
    }

    /// `gamma_j(x)`; zero outside `|x - center| >= kappa`, equal to
    /// `g(x) = x - x^2/2` on the plateau `|x - center| <= nu`.
    pub fn value(&self, x: f64) -> f64 {
        let d = x - self.center();
        let u = d * d;
        let kappa = self.kappa();
        if u >= kappa * kappa {
            return 0.0;
        }
        let g = x - 0.5 * x * x;
        g * cutoff_cbar(kappa, self.nu(), u).expect("nu < kappa by construction")
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let d = x - self.center();
        let u = d * d;
        let kappa = self.kappa();
        if u >= kappa * kappa {
            return 0.0;
        }
        let nu = self.nu();
        let g = x - 0.5 * x * x;
        let gp = 1.0 - x;
        let cb = cutoff_cbar(kappa, nu, u).expect("nu < kappa by construction");
        gp * cb + g * cutoff_cbar_deriv(kappa, nu, u) * 2.0 * d
    }
}

/// Index of the bump whose support contains `x`, if any. Supports are
/// disjoint, so at most the candidates adjacent to `1/(2x)` qualify.
pub fn active_bump(x: f64) -> Option<BumpFunction> {
    if !(x > 0.0) {
        return None;
    }
    let j_est = 1.0 / (2.0 * x);
    if j_est > 4.5e15 {
        // supports this deep are narrower than the float spacing
        return None;
    }
    let j0 = j_est.floor() as i64;
    for j in [j0 - 1, j0, j0 + 1] {
        if j < 1 {
            continue;
        }
        let bump = BumpFunction { j: j as u64 };
        if (x - bump.center()).abs() < bump.kappa() {
            return Some(bump);
        }
    }
    None
}

fn h_value(x: f64) -> f64 {
    if x >= 0.0 {
        0.5 * x * x
    } else {
        8.0 * x * x * (8.0 * x * x - 1.0)
    }
}

fn h_deriv(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        256.0 * x * x * x - 16.0 * x
    }
}

/// `f(x) = h(x) + sum_j gamma_j(x)`, with the series truncated exactly to
/// the single active bump.
pub fn counterexample_f(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut v = h_value(x);
    if let Some(bump) = active_bump(x) {
        v += bump.value(x);
    }
    v
}

/// Branchwise analytic derivative of [`counterexample_f`].
pub fn counterexample_grad(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut g = h_deriv(x);
    if let Some(bump) = active_bump(x) {
        g += bump.derivative(x);
    }
    g
}

/// One gradient-descent iterate record.
#[derive(Clone, Copy, Debug)]
pub struct CexRecord {
    pub k: u64,
    pub x: f64,
    pub alpha: f64,
    pub grad: f64,
    pub running_min_grad_sq: f64,
}

/// Full gradient-descent trajectory on the construction.
#[derive(Clone, Debug)]
pub struct CexTrace {
    pub records: Vec<CexRecord>,
}

/// Parity class of the iterates whose gradients stay at 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

/// Verdicts over a completed trajectory.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CexSummary {
    pub t: u64,
    /// `max_k |x^k - 1/(k+1)|`
    pub max_iterate_deviation: f64,
    pub exact_iterates: bool,
    /// `min_{k<=T} |f'(x^k)|^2` against the `1/T^2` target
    pub min_grad_sq: f64,
    pub complexity_bound_holds: bool,
    /// `sum_k alpha_k |f'(x^k)|^2`, bounded by 1
    pub weighted_grad_sum: f64,
    pub summability_holds: bool,
    /// which parity class keeps `|f'| = 1`; the other decays like `1/(k+1)`
    pub unit_gradient_parity: Option<Parity>,
    pub nonconvergence_holds: bool,
    /// largest sampled difference quotient of `f'` near zero
    pub smoothness_ratio_max: f64,
    pub smoothness_breakdown_holds: bool,
}

pub const MAX_T: u64 = 1_000_000;

/// Run `x^{k+1} = x^k - alpha_k f'(x^k)` from `x^0 = 1` with the alternating
/// schedule for `T` steps, recording iterates, gradients and the running
/// minimum of the squared gradient.
pub fn run_counterexample(t: u64) -> Result<CexTrace> {
    if t == 0 || t > MAX_T {
        return Err(Error::InvalidParameter(format!(
            "counterexample: T must be in 1..={MAX_T}"
        )));
    }
    let schedule = Schedule::AlternatingH;
    let mut records = Vec::with_capacity(t as usize + 1);
    let mut x = 1.0f64;
    let mut min_grad_sq = f64::INFINITY;
    for k in 0..=t {
        let grad = counterexample_grad(x);
        let alpha = schedule.value(k);
        min_grad_sq = min_grad_sq.min(grad * grad);
        records.push(CexRecord { k, x, alpha, grad, running_min_grad_sq: min_grad_sq });
        if k < t {
            x -= alpha * grad;
        }
    }
    Ok(CexTrace { records })
}

impl CexTrace {
    pub fn t(&self) -> u64 {
        self.records.last().map_or(0, |r| r.k)
    }

    /// Evaluate the construction's checkable claims on this trajectory.
    pub fn summary(&self) -> CexSummary {
        let t = self.t();
        let mut max_dev = 0.0f64;
        let mut weighted_sum = 0.0f64;
        let mut summable_terms = true;
        for r in &self.records {
            max_dev = max_dev.max((r.x - 1.0 / (r.k as f64 + 1.0)).abs());
            let term = r.alpha * r.grad * r.grad;
            weighted_sum += term;
            // per-term bound 1/((k+1)(k+2))
            let cap = 1.0 / ((r.k as f64 + 1.0) * (r.k as f64 + 2.0));
            if term > cap * (1.0 + 1e-12) {
                summable_terms = false;
            }
        }
        let min_grad_sq = self.records.last().map_or(f64::NAN, |r| r.running_min_grad_sq);
        let bound = 1.0 / (t as f64 * t as f64);

        let parity = self.detect_unit_parity();
        let (ratio_max, breakdown) = smoothness_breakdown_probe();

        CexSummary {
            t,
            max_iterate_deviation: max_dev,
            exact_iterates: max_dev <= 1e-12,
            min_grad_sq,
            complexity_bound_holds: min_grad_sq <= bound,
            weighted_grad_sum: weighted_sum,
            summability_holds: weighted_sum < 1.0 && summable_terms,
            unit_gradient_parity: parity,
            nonconvergence_holds: parity.is_some(),
            smoothness_ratio_max: ratio_max,
            smoothness_breakdown_holds: breakdown,
        }
    }

    /// Which parity class of `k >= 1` has `|f'(x^k)| = 1` to 1e-12 while the
    /// other follows `1/(k+1)` to 1e-12. None when neither pattern holds.
    fn detect_unit_parity(&self) -> Option<Parity> {
        let tol = 1e-12;
        let matches = |class_unit: u64| {
            self.records.iter().skip(1).all(|r| {
                let expect = if r.k % 2 == class_unit {
                    1.0
                } else {
                    1.0 / (r.k as f64 + 1.0)
                };
                (r.grad.abs() - expect).abs() <= tol
            })
        };
        if matches(1) {
            Some(Parity::Odd)
        } else if matches(0) {
            Some(Parity::Even)
        } else {
            None
        }
    }

    /// Standard 5-column trace CSV (`obj = f(x^k)`, `measure = |f'(x^k)|`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,alpha,obj,measure,step_len\n");
        for (i, r) in self.records.iter().enumerate() {
            let step_len = self
                .records
                .get(i + 1)
                .map_or(f64::NAN, |next| (next.x - r.x).abs());
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.k,
                r.alpha,
                counterexample_f(r.x),
                r.grad.abs(),
                step_len
            ));
        }
        out
    }
}

/// Difference quotients of `f'` across bump edges with centers below 1e-2;
/// they grow like `8 j^2`, confirming that no global modulus exists near 0.
fn smoothness_breakdown_probe() -> (f64, bool) {
    let mut ratio_max = 0.0f64;
    for j in 50..60u64 {
        let bump = BumpFunction { j };
        let x1 = bump.center();
        let x2 = bump.center() + bump.kappa();
        let r = (counterexample_grad(x1) - counterexample_grad(x2)).abs() / (x2 - x1);
        ratio_max = ratio_max.max(r);
    }
    (ratio_max, ratio_max > 1e3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mollifier_branches() {
        assert_eq!(mollifier_c(-1.0), 0.0);
        assert_eq!(mollifier_c(0.0), 0.0);
        assert!((mollifier_c(1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((mollifier_c(1.0) - 0.36787944).abs() < 1e-8);
    }

    #[test]
    fn cutoff_branches_and_symmetry() {
        // kappa = 1, nu = 0.5: plateau below nu^2, zero above kappa^2
        assert_eq!(cutoff_cbar(1.0, 0.5, 0.1).unwrap(), 1.0);
        assert_eq!(cutoff_cbar(1.0, 0.5, 1.5).unwrap(), 0.0);
        let mid = cutoff_cbar(1.0, 0.5, 0.625).unwrap();
        assert!(mid > 0.0 && mid < 1.0);
        // complement symmetry around the interval midpoint
        let mirrored = cutoff_cbar(1.0, 0.5, 0.25 + 1.0 - 0.625).unwrap();
        assert!((mid + mirrored - 1.0).abs() < 1e-12);
        assert!(cutoff_cbar(0.5, 0.5, 0.1).is_err());
    }

    #[test]
    fn cutoff_matches_direct_ratio_where_it_survives() {
        // at kappa = 1 the direct mollifier ratio is representable
        let (kappa, nu, x) = (1.0, 0.5, 0.7);
        let direct = mollifier_c(kappa * kappa - x)
            / (mollifier_c(kappa * kappa - x) + mollifier_c(x - nu * nu));
        assert!((cutoff_cbar(kappa, nu, x).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn cutoff_stable_at_tiny_scales() {
        // direct ratio of mollifiers underflows here; the stable form must not
        let bump = BumpFunction { j: 100 };
        let (kappa, nu) = (bump.kappa(), bump.nu());
        let mid = 0.5 * (nu * nu + kappa * kappa);
        let v = cutoff_cbar(kappa, nu, mid).unwrap();
        assert!(v.is_finite() && v > 0.0 && v < 1.0, "v = {v}");
    }

    #[test]
    fn function_values() {
        // x = 1 is outside every support (bump 1 reaches to 1/2 + 1/12)
        assert!((counterexample_f(1.0) - 0.5).abs() < 1e-15);
        assert!((counterexample_grad(1.0) - 1.0).abs() < 1e-15);
        // bump centers sit on plateaus: f = h + g, f' = x + (1 - x) = 1
        let x = 1.0 / 6.0;
        let expect = 0.5 * x * x + x - 0.5 * x * x;
        assert!((counterexample_f(x) - expect).abs() < 1e-15);
        assert!((counterexample_grad(x) - 1.0).abs() < 1e-14);
        // origin
        assert_eq!(counterexample_f(0.0), 0.0);
    }

    #[test]
    fn disjoint_supports() {
        for j in 1..2000u64 {
            let a = BumpFunction { j };
            let b = BumpFunction { j: j + 1 };
            assert!(b.center() + b.kappa() < a.center() - a.kappa());
        }
    }

    #[test]
    fn iterates_follow_the_harmonic_path() {
        let trace = run_counterexample(200).unwrap();
        for r in &trace.records {
            assert!(
                (r.x - 1.0 / (r.k as f64 + 1.0)).abs() < 1e-13,
                "k = {}, x = {}",
                r.k,
                r.x
            );
        }
    }

    #[test]
    fn summary_verdicts_hold() {
        let s = run_counterexample(1000).unwrap().summary();
        assert!(s.exact_iterates, "max deviation {}", s.max_iterate_deviation);
        assert!(s.complexity_bound_holds);
        assert!(s.summability_holds, "sum = {}", s.weighted_grad_sum);
        assert_eq!(s.unit_gradient_parity, Some(Parity::Odd));
        assert!(s.smoothness_breakdown_holds, "ratio {}", s.smoothness_ratio_max);
    }

    #[test]
    fn t_range_enforced() {
        assert!(run_counterexample(0).is_err());
        assert!(run_counterexample(MAX_T + 1).is_err());
    }
}
