//! Stationarity measures for composite problems `psi = f + phi`.
//!
//! Two measures are implemented: the natural residual
//! `F_nat^alpha(x) = x - prox_{alpha phi}(x - alpha grad f(x))`, which
//! vanishes exactly at first-order stationary points, and the gradient of the
//! Moreau envelope `env_{theta psi}(x) = min_y psi(y) + ||x-y||^2 / (2 theta)`.
//! For admissible `theta` the envelope is continuously differentiable with
//! `grad env(x) = (x - prox_{theta psi}(x)) / theta`, so its gradient norm is
//! the smooth stand-in for stationarity on nonsmooth problems.
//!
//! The envelope prox point has no closed form; it is computed by a
//! deterministic proximal-gradient inner solver on the strongly convex
//! subproblem `y -> f(y) + ||y-x||^2/(2 theta) + phi(y)`.

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::SmoothObjective;
use crate::regularizers::Regularizer;

/// Smooth-plus-regularizer composite `psi(x) = f(x) + phi(x)`.
#[derive(Clone, Debug)]
pub struct CompositeProblem {
    pub f: SmoothObjective,
    pub phi: Regularizer,
}

impl CompositeProblem {
    pub fn new(f: SmoothObjective, phi: Regularizer) -> Self {
        CompositeProblem { f, phi }
    }

    /// Lower bound `psi_bar = f_bar + phi_bar`.
    pub fn psi_bar(&self) -> f64 {
        self.f.f_bar + self.phi.lower_bound
    }

    pub fn psi(&self, x: &[f64]) -> f64 {
        let v = self.f.value(x) + self.phi.value(x);
        debug_assert!(v >= self.psi_bar() - 1e-8 * (1.0 + self.psi_bar().abs()));
        v
    }

    /// Envelope parameter strictly inside every range the analysis needs:
    /// `theta = 1 / (2 (3 L + tau + 1))`.
    pub fn default_theta(&self) -> f64 {
        1.0 / (2.0 * (3.0 * self.f.lipschitz + self.phi.tau + 1.0))
    }

    /// Natural-residual step `min(1, 1/(2 tau))`, well-posed also when the
    /// unit step would leave the prox set-valued (`tau >= 1`).
    pub fn default_alpha(&self) -> f64 {
        if self.phi.tau > 0.0 {
            1.0f64.min(1.0 / (2.0 * self.phi.tau))
        } else {
            1.0
        }
    }

    /// Lipschitz modulus of `grad env_{theta psi}` for `theta < 1/(L+tau)`:
    /// `max(1/theta, (L+tau) / (1 - (L+tau) theta))`.
    pub fn envelope_grad_modulus(&self, theta: f64) -> f64 {
        let lt = self.f.lipschitz + self.phi.tau;
        (1.0 / theta).max(lt / (1.0 - lt * theta))
    }
}

/// `F_nat^alpha(x) = x - prox_{alpha phi}(x - alpha grad f(x))`.
pub fn natural_residual(cp: &CompositeProblem, alpha: f64, x: &[f64]) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || alpha >= cp.phi.max_prox_step() {
        return Err(Error::InvalidParameter(format!(
            "natural residual: alpha = {alpha} outside (0, 1/tau)"
        )));
    }
    let step = linalg::axpy(x, -alpha, &cp.f.gradient(x));
    let p = cp.phi.prox(alpha, &step)?;
    Ok(linalg::sub(x, &p))
}

/// Result of an envelope evaluation at `x`.
#[derive(Clone, Debug)]
pub struct EnvelopeResult {
    pub theta: f64,
    /// `prox_{theta psi}(x)`, the solution of the inner subproblem.
    pub prox_point: Vec<f64>,
    pub env_value: f64,
    pub env_grad: Vec<f64>,
    pub inner_iters: usize,
    /// Final fixed-point residual of the inner solver.
    pub residual: f64,
}

impl EnvelopeResult {
    pub fn grad_norm(&self) -> f64 {
        linalg::norm(&self.env_grad)
    }
}

pub const DEFAULT_ENV_TOL: f64 = 1e-10;
const MAX_INNER_ITERS: usize = 100_000;

/// Evaluate the Moreau envelope of `psi = f + phi` at `x`.
///
/// Requires `theta < 1/(L + tau)` so the subproblem is strongly convex. The
/// inner solver is proximal gradient with step `1/(L + 1/theta + tau)`,
/// started at `prox_{theta phi}(x)` (so the first iterate is already
/// feasible), stopping when the fixed-point move drops below `tol`.
pub fn moreau_prox(
    cp: &CompositeProblem,
    theta: f64,
    x: &[f64],
    tol: f64,
) -> Result<EnvelopeResult> {
    let l = cp.f.lipschitz;
    let tau = cp.phi.tau;
    if !(theta > 0.0 && theta < 1.0 / (l + tau)) {
        return Err(Error::InvalidParameter(format!(
            "moreau_prox: theta = {theta} outside (0, 1/(L+tau)) = (0, {})",
            1.0 / (l + tau)
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("moreau_prox: tol must be > 0".into()));
    }
    let beta = 1.0 / (l + 1.0 / theta + tau);
    let mut y = cp.phi.prox(theta.min(0.5 * cp.phi.max_prox_step()), x)?;
    let mut residual = f64::INFINITY;
    for iter in 0..MAX_INNER_ITERS {
        let mut smooth_grad = cp.f.gradient(&y);
        for ((g, yi), xi) in smooth_grad.iter_mut().zip(&y).zip(x) {
            *g += (yi - xi) / theta;
        }
        let y_next = cp.phi.prox(beta, &linalg::axpy(&y, -beta, &smooth_grad))?;
        residual = linalg::dist(&y_next, &y);
        y = y_next;
        if residual <= tol {
            let env_value = cp.psi(&y) + linalg::dist(x, &y).powi(2) / (2.0 * theta);
            let env_grad = linalg::scale(&linalg::sub(x, &y), 1.0 / theta);
            return Ok(EnvelopeResult {
                theta,
                prox_point: y,
                env_value,
                env_grad,
                inner_iters: iter + 1,
                residual,
            });
        }
    }
    Err(Error::InnerSolverFailed {
        iters: MAX_INNER_ITERS,
        residual,
    })
}

/// Report comparing the two stationarity measures at a point.
///
/// The sandwich constants come from the fixed-point identity
/// `x_bar = prox_{alpha phi}(x_bar - alpha (grad f(x_bar) + (x_bar - x)/theta))`
/// at the envelope prox point, the `(1 - alpha tau)^{-1}` Lipschitz modulus
/// of the prox, and the `1/theta - (L + tau)` strong convexity of the
/// envelope subproblem:
///
/// ```text
/// ||F_nat^a(x)|| / (theta + (theta (1 + a L) + a) / (1 - a tau))
///     <= ||grad env(x)||
///     <= ||F_nat^a(x)|| (1 + (L + |1/a - 1/theta|) / (1/theta - L - tau)) / theta
/// ```
///
/// with the recorded residual step `a = alpha_used = min(1, 1/(2 tau))`,
/// which stays well-posed also when a unit step would leave the prox
/// set-valued (`tau >= 1`).
#[derive(Clone, Debug, serde::Serialize)]
pub struct BoundReport {
    pub theta: f64,
    pub alpha_used: f64,
    pub env_grad_norm: f64,
    pub nat_res_norm: f64,
    pub lower_bound_value: f64,
    pub upper_bound_value: f64,
    pub lower_pass: bool,
    pub upper_pass: bool,
    pub slack: f64,
}

impl BoundReport {
    pub fn pass(&self) -> bool {
        self.lower_pass && self.upper_pass
    }
}

/// Check `lower <= ||grad env_{theta psi}(x)|| <= upper` in units of the
/// natural residual, for `theta in (0, 1/(3L+tau))`.
pub fn check_equivalence_bounds(
    cp: &CompositeProblem,
    theta: f64,
    x: &[f64],
) -> Result<BoundReport> {
    let l = cp.f.lipschitz;
    let tau = cp.phi.tau;
    if !(theta > 0.0 && theta < 1.0 / (3.0 * l + tau)) {
        return Err(Error::InvalidParameter(format!(
            "equivalence bounds: theta = {theta} outside (0, 1/(3L+tau))"
        )));
    }
    let alpha = cp.default_alpha();
    let nat = natural_residual(cp, alpha, x)?;
    let nat_norm = linalg::norm(&nat);
    let env = moreau_prox(cp, theta, x, 1e-12)?;
    let env_norm = env.grad_norm();

    let lower_const =
        1.0 / (theta + (theta * (1.0 + alpha * l) + alpha) / (1.0 - alpha * tau));
    let strong = 1.0 / theta - (l + tau);
    let upper_const = (1.0 + (l + (1.0 / alpha - 1.0 / theta).abs()) / strong) / theta;

    let slack = 1e-8 * (1.0 + linalg::norm(x));
    let lower_bound_value = lower_const * nat_norm;
    let upper_bound_value = upper_const * nat_norm;
    Ok(BoundReport {
        theta,
        alpha_used: alpha,
        env_grad_norm: env_norm,
        nat_res_norm: nat_norm,
        lower_bound_value,
        upper_bound_value,
        lower_pass: lower_bound_value <= env_norm + slack,
        upper_pass: env_norm <= upper_bound_value + slack,
        slack,
    })
}

/// Moreau envelope of a 1-D convex function by bracketing plus golden-section
/// search; used for composites whose smooth part is itself nonsmooth (the
/// model-based runners), where the proximal-gradient inner solver does not
/// apply. `psi + ||.-x||^2/(2 theta)` must be convex.
pub fn moreau_env_1d(
    psi: &dyn Fn(f64) -> f64,
    theta: f64,
    x: f64,
    tol: f64,
) -> Result<EnvelopeResult> {
    let obj = |y: f64| psi(y) + (y - x) * (y - x) / (2.0 * theta);
    // expand a bracket around x until the endpoints dominate the center
    let mut r = theta.max(1.0);
    let mut lo = x - r;
    let mut hi = x + r;
    for _ in 0..200 {
        if obj(lo) > obj(x) && obj(hi) > obj(x) {
            break;
        }
        r *= 2.0;
        lo = x - r;
        hi = x + r;
    }
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut a = lo;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (obj(c), obj(d));
    let mut iters = 0usize;
    while (b - a) > tol && iters < 500 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = obj(d);
        }
        iters += 1;
    }
    let y = 0.5 * (a + b);
    Ok(EnvelopeResult {
        theta,
        prox_point: vec![y],
        env_value: obj(y),
        env_grad: vec![(x - y) / theta],
        inner_iters: iters,
        residual: b - a,
    })
}
