//! Empirical verification of the convergence conditions on a live ensemble:
//! measure Lipschitz continuity, weighted summability, the step-length
//! bound, the drift/martingale decomposition of the update, the per-method
//! descent recursion, and the tail-decay trend.
//!
//! ```sh
//! cargo run --example condition_checks
//! ```

use opt_lab::cli::{cmd_run, load_ensemble, run_condition};
use opt_lab::config::{parse_config_text, ExperimentConfig};

fn main() -> opt_lab::Result<()> {
    let dir = std::env::temp_dir().join("opt_lab_condition_checks");
    let _ = std::fs::remove_dir_all(&dir);
    let text = format!(
        "method = sgd\n\
         problem.name = quadratic\n\
         problem.dim = 5\n\
         schedule = inv_k:1:1\n\
         oracle.c = 0\n\
         oracle.d = 1\n\
         oracle.noise = gaussian_isotropic\n\
         t = 1000\n\
         reps = 64\n\
         seed = 606\n\
         out_dir = {}\n",
        dir.display()
    );
    let cfg = ExperimentConfig::from_map(parse_config_text(&text)?)?;
    let outcome = cmd_run(cfg)?;
    println!("ensemble written to {}", outcome.manifest_path.display());

    let loaded = load_ensemble(&outcome.manifest_path)?;
    for condition in ["p1", "p2", "p3", "p3prime", "recursion:sgd_noise", "trend"] {
        let rep = run_condition(&loaded, condition, 1.0);
        println!(
            "{:<22} -> {:?}{}",
            rep.condition,
            rep.verdict,
            if rep.notes.is_empty() {
                String::new()
            } else {
                format!("  [{}]", rep.notes.join("; "))
            }
        );
    }

    // a negative control: the same recursion with its right side halved
    let halved = run_condition(&loaded, "recursion:sgd_noise", 0.5);
    println!("recursion, rhs halved   -> {:?} (expected fail)", halved.verdict);
    Ok(())
}
