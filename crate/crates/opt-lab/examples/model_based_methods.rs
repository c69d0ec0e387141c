//! The three model-based method variants on nonsmooth stochastic problems:
//! subgradient models on robust regression, the exact prox-linear solve on
//! 1-D robust phase retrieval, and proximal-point steps on smooth
//! components.
//!
//! ```sh
//! cargo run --example model_based_methods
//! ```

use opt_lab::optimizers::{
    run_smm, smm_subproblem, MeasureKind, MeasureOptions, ModelFamily, ModelType, Schedule,
    StochasticFamily,
};
use opt_lab::problems::RngStream;
use opt_lab::regularizers::Regularizer;
use opt_lab::verifier::mean;

fn main() {
    // one exact subproblem per model type
    let quad = StochasticFamily::SmoothQuadratic { centers: vec![vec![0.0]], scale: 1.0 };
    let zero = Regularizer::zero();
    let sub = ModelFamily::new(ModelType::Subgradient, quad.clone(), &zero, 10.0).unwrap();
    let pp = ModelFamily::new(ModelType::ProximalPoint, quad, &zero, 10.0).unwrap();
    println!(
        "subgradient step from 1.0:    {:.6} (gradient step 0.9)",
        smm_subproblem(&sub, &zero, 0.1, &[1.0], 0).unwrap()[0]
    );
    println!(
        "proximal-point step from 1.0: {:.6} (exact 10/11)",
        smm_subproblem(&pp, &zero, 0.1, &[1.0], 0).unwrap()[0]
    );
    let pr = StochasticFamily::PhaseRetrieval { a: vec![vec![1.0]], b: vec![1.0] };
    let pl = ModelFamily::new(ModelType::ProxLinear, pr, &zero, 10.0).unwrap();
    println!(
        "prox-linear step from 1.0 on |x^2-1|: {:.6} (stays at the root)",
        smm_subproblem(&pl, &zero, 0.1, &[1.0], 0).unwrap()[0]
    );

    // a full run: robust 1-D phase retrieval with eight measurements
    let mut gen = RngStream::new(5, 0);
    let a: Vec<Vec<f64>> = (0..8).map(|_| vec![0.5 + gen.next_f64()]).collect();
    let b: Vec<f64> = (0..8).map(|_| 0.2 + gen.next_f64()).collect();
    let model =
        ModelFamily::new(ModelType::ProxLinear, StochasticFamily::PhaseRetrieval { a, b }, &zero, 10.0)
            .unwrap();
    println!(
        "\nphase retrieval: one-sided accuracy tau = {:.3}, default theta = {:.4}",
        model.tau,
        model.default_theta()
    );

    let schedule = Schedule::InvK { c: 0.5, p: 1.0 };
    let opts = MeasureOptions { kind: MeasureKind::EnvGrad, stride: 100, ..Default::default() };
    let (t, reps) = (2_000u64, 16u64);
    let traces: Vec<_> = (0..reps)
        .map(|r| run_smm(&model, &zero, &schedule, &[2.0], t, &mut RngStream::new(17, r), &opts).unwrap())
        .collect();

    println!("{:>8} {:>14} {:>16}", "k", "mean psi(x^k)", "mean |grad env|");
    for k in [0u64, 500, 1000, 1500, 2000] {
        let objs: Vec<f64> = traces.iter().map(|tr| tr.records[k as usize].obj).collect();
        let ms: Vec<f64> = traces.iter().map(|tr| tr.records[k as usize].measure).collect();
        println!("{k:>8} {:>14.6} {:>16.5e}", mean(&objs), mean(&ms));
    }
}
