//! Weakly convex regularizers with exact proximity operators.
//!
//! Every kind here is separable, so values and proxes reduce to the 1-D case
//! and are applied coordinatewise. Weak-convexity constants and Lipschitz
//! moduli are declared, not estimated: they enter step-size caps and the
//! verifier's bounds and have to be exact.
//!
//! Prox evaluation strategy: for the piecewise-quadratic penalties (MCP,
//! SCAD, l1) the prox objective is minimized by comparing the finitely many
//! per-branch stationary points and branch boundaries; for the student-t
//! penalty the 1-D stationarity equation is solved by safeguarded Newton
//! with a bisection fallback.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegKind {
    Zero,
    L1 { lambda: f64 },
    Mcp { lambda: f64, theta: f64 },
    Scad { lambda: f64, theta: f64 },
    StudentT { theta: f64 },
    BoxIndicator { lo: f64, hi: f64 },
}

/// A separable regularizer `phi` with declared constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regularizer {
    pub kind: RegKind,
    /// Weak-convexity constant: `phi + tau/2 ||.||^2` is convex.
    pub tau: f64,
    /// Lipschitz modulus of `phi` on its domain; `None` means infinite
    /// (indicator case), which the runners flag since their guarantees
    /// require a Lipschitz regularizer.
    pub lipschitz: Option<f64>,
    /// Lower bound of `phi` on its domain.
    pub lower_bound: f64,
}

/// Build a regularizer, validating parameter ranges.
pub fn make_regularizer(kind: RegKind) -> Result<Regularizer> {
    let (tau, lipschitz) = match kind {
        RegKind::Zero => (0.0, Some(0.0)),
        RegKind::L1 { lambda } => {
            require(lambda > 0.0, "l1: lambda must be > 0")?;
            (0.0, Some(lambda))
        }
        RegKind::Mcp { lambda, theta } => {
            require(lambda > 0.0 && theta > 0.0, "mcp: lambda, theta must be > 0")?;
            (1.0 / theta, Some(lambda))
        }
        RegKind::Scad { lambda, theta } => {
            require(lambda > 0.0, "scad: lambda must be > 0")?;
            require(theta > 2.0, "scad: theta must be > 2")?;
            (1.0 / (theta - 1.0), Some(lambda))
        }
        RegKind::StudentT { theta } => {
            require(theta != 0.0, "student_t: theta must be nonzero")?;
            (0.125, Some(theta.abs() / 2.0))
        }
        RegKind::BoxIndicator { lo, hi } => {
            require(lo <= hi, "box_indicator: lo must be <= hi")?;
            (0.0, None)
        }
    };
    Ok(Regularizer {
        kind,
        tau,
        lipschitz,
        lower_bound: 0.0,
    })
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg.into()))
    }
}

impl Regularizer {
    pub fn zero() -> Regularizer {
        make_regularizer(RegKind::Zero).unwrap()
    }

    pub fn l1(lambda: f64) -> Regularizer {
        make_regularizer(RegKind::L1 { lambda }).unwrap()
    }

    pub fn value_1d(&self, x: f64) -> f64 {
        match self.kind {
            RegKind::Zero => 0.0,
            RegKind::L1 { lambda } => lambda * x.abs(),
            RegKind::Mcp { lambda, theta } => {
                let a = x.abs();
                if a <= theta * lambda {
                    lambda * a - x * x / (2.0 * theta)
                } else {
                    theta * lambda * lambda / 2.0
                }
            }
            RegKind::Scad { lambda, theta } => {
                let a = x.abs();
                if a <= lambda {
                    lambda * a
                } else if a <= theta * lambda {
                    (-x * x + 2.0 * theta * lambda * a - lambda * lambda) / (2.0 * (theta - 1.0))
                } else {
                    (theta + 1.0) * lambda * lambda / 2.0
                }
            }
            RegKind::StudentT { theta } => {
                let t2 = theta * theta;
                0.5 * t2 * (x * x / t2).ln_1p()
            }
            RegKind::BoxIndicator { lo, hi } => {
                if x >= lo && x <= hi {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| self.value_1d(xi)).sum()
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        match self.kind {
            RegKind::BoxIndicator { lo, hi } => x.iter().all(|&xi| xi >= lo && xi <= hi),
            _ => true,
        }
    }

    /// Largest prox step this regularizer admits (`1/tau`, infinite when convex).
    pub fn max_prox_step(&self) -> f64 {
        if self.tau > 0.0 {
            1.0 / self.tau
        } else {
            f64::INFINITY
        }
    }

    /// Coordinatewise proximity operator `argmin_y phi(y) + ||x-y||^2 / (2 alpha)`.
    pub fn prox(&self, alpha: f64, x: &[f64]) -> Result<Vec<f64>> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter("prox: alpha must be > 0".into()));
        }
        if self.tau > 0.0 && alpha >= self.max_prox_step() {
            return Err(Error::InvalidParameter(format!(
                "prox: alpha = {alpha} >= 1/tau = {}; the operator may be set-valued",
                self.max_prox_step()
            )));
        }
        if !crate::linalg::all_finite(x) {
            return Err(Error::NonFinite("prox argument".into()));
        }
        Ok(x.iter().map(|&xi| self.prox_1d(alpha, xi)).collect())
    }

    pub fn prox_1d(&self, alpha: f64, x: f64) -> f64 {
        match self.kind {
            RegKind::Zero => x,
            RegKind::L1 { lambda } => soft_threshold(x, alpha * lambda),
            RegKind::BoxIndicator { lo, hi } => x.clamp(lo, hi),
            RegKind::Mcp { lambda, theta } => {
                // Per-branch stationary points of the piecewise-quadratic
                // objective, plus the breakpoints; winner by value.
                let s = x.signum();
                let a = x.abs();
                let mut candidates = vec![0.0, s * theta * lambda];
                if a > theta * lambda {
                    candidates.push(x);
                }
                let denom = 1.0 - alpha / theta;
                if denom > 0.0 {
                    let p = (a - alpha * lambda) / denom;
                    if p > 0.0 && p < theta * lambda {
                        candidates.push(s * p);
                    }
                }
                self.pick_min(alpha, x, &candidates)
            }
            RegKind::Scad { lambda, theta } => {
                let s = x.signum();
                let a = x.abs();
                let mut candidates = vec![0.0, s * lambda, s * theta * lambda];
                if a > theta * lambda {
                    candidates.push(x);
                }
                // inner branch |p| in (0, lambda): soft threshold solution
                let p1 = a - alpha * lambda;
                if p1 > 0.0 && p1 < lambda {
                    candidates.push(s * p1);
                }
                // middle branch |p| in (lambda, theta*lambda)
                let denom = theta - 1.0 - alpha;
                if denom > 0.0 {
                    let p2 = (a * (theta - 1.0) - alpha * theta * lambda) / denom;
                    if p2 > lambda && p2 < theta * lambda {
                        candidates.push(s * p2);
                    }
                }
                self.pick_min(alpha, x, &candidates)
            }
            RegKind::StudentT { theta } => student_t_prox(theta, alpha, x),
        }
    }

    fn pick_min(&self, alpha: f64, x: f64, candidates: &[f64]) -> f64 {
        let obj = |p: f64| self.value_1d(p) + (p - x) * (p - x) / (2.0 * alpha);
        let mut best = candidates[0];
        let mut best_val = obj(best);
        for &c in &candidates[1..] {
            let v = obj(c);
            if v < best_val {
                best_val = v;
                best = c;
            }
        }
        best
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Root of `g(p) = p - x + alpha theta^2 p / (theta^2 + p^2)`; `g` is strictly
/// increasing for `alpha < 8`, so Newton is safeguarded by a bracket.
fn student_t_prox(theta: f64, alpha: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let t2 = theta * theta;
    let g = |p: f64| p - x + alpha * t2 * p / (t2 + p * p);
    let dg = |p: f64| 1.0 + alpha * t2 * (t2 - p * p) / ((t2 + p * p) * (t2 + p * p));
    // The minimizer lies between 0 and x (shrinkage).
    let (mut lo, mut hi) = if x > 0.0 { (0.0, x) } else { (x, 0.0) };
    let mut p = x / (1.0 + alpha);
    for _ in 0..200 {
        let gv = g(p);
        if gv.abs() <= 1e-12 * (1.0 + x.abs()) {
            return p;
        }
        if gv > 0.0 {
            hi = p;
        } else {
            lo = p;
        }
        let d = dg(p);
        let mut next = p - gv / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - p).abs() <= f64::EPSILON * p.abs() {
            return next;
        }
        p = next;
    }
    p
}
