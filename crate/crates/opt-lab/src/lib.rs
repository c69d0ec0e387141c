//! A desk-scale laboratory for stochastic optimization methods on smooth and
//! weakly convex composite problems.
//!
//! The crate bundles four method families (`sgd`, random reshuffling,
//! proximal stochastic gradient, and stochastic model-based methods), the
//! stationarity machinery they are measured with (proximity operators, the
//! Moreau envelope, the natural residual), and an empirical `verifier` that
//! turns the abstract hypotheses behind their convergence guarantees into
//! statistical tests over replicated runs.
//!
//! Everything is deterministic: runs are driven by a counter-based splittable
//! RNG, replications are order-independent, and traces serialize to CSV
//! byte-for-byte reproducibly.
//!
//! Entry points:
//! * [`problems`]: test objectives, finite sums, and stochastic gradient
//!   oracles with the `C (f(x) - f_bar) + D` second-moment bound.
//! * [`regularizers`]: weakly convex penalties (MCP, SCAD, student-t, ...)
//!   with exact proximity operators.
//! * [`stationarity`]: natural residual, Moreau envelope, and the
//!   equivalence bounds between the two measures.
//! * [`optimizers`]: the method runners, step-size schedules, and traces.
//! * [`verifier`]: condition checks (Lipschitz measure, summability,
//!   step-length bounds, descent recursions, complexity slopes).
//! * [`counterexample`]: a 1-D function on which gradient descent meets the
//!   usual complexity bound while its gradients never converge.
//! * [`cli`]: config parsing, ensemble execution, persistence, plots.

pub mod cli;
pub mod config;
pub mod counterexample;
pub mod error;
pub mod linalg;
pub mod optimizers;
pub mod plot;
pub mod problems;
pub mod regularizers;
pub mod stationarity;
pub mod verifier;

pub use error::{Error, Result};
