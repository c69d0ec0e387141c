//! Persistence round trip: run an ensemble to CSV + manifest, reload it by
//! deterministic replay (with byte-level integrity checking), and emit SVG
//! plots of the measure decay.
//!
//! ```sh
//! cargo run --example ensemble_io
//! ```

use opt_lab::cli::{cmd_plot, cmd_run, load_ensemble};
use opt_lab::config::{parse_config_text, ExperimentConfig};

fn main() -> opt_lab::Result<()> {
    let dir = std::env::temp_dir().join("opt_lab_ensemble_io");
    let _ = std::fs::remove_dir_all(&dir);
    let text = format!(
        "method = prox_sgd\n\
         problem.name = quadratic\n\
         problem.dim = 2\n\
         regularizer.kind = l1\n\
         regularizer.lambda = 1.0\n\
         schedule = inv_k:1:1\n\
         oracle.d = 1\n\
         oracle.noise = gaussian_isotropic\n\
         measure = env_grad\n\
         t = 2000\n\
         reps = 8\n\
         seed = 12\n\
         out_dir = {}\n",
        dir.display()
    );
    let cfg = ExperimentConfig::from_map(parse_config_text(&text)?)?;
    let hash = cfg.hash();
    let outcome = cmd_run(cfg)?;
    println!(
        "wrote {} replications under {} (config hash {hash})",
        outcome.reps,
        dir.display()
    );

    let loaded = load_ensemble(&outcome.manifest_path)?;
    println!(
        "replayed and byte-verified {} traces; {} measured strides",
        loaded.ensemble.r(),
        loaded.ensemble.measured_ks().len()
    );

    for kind in ["measure_vs_k", "min_measure_vs_T"] {
        let out = dir.join(format!("{kind}.svg"));
        cmd_plot(&outcome.manifest_path, kind, &out)?;
        println!("plot: {}", out.display());
    }
    Ok(())
}
