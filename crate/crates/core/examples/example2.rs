//! Example 2: two-component θ with a compensated model, so g_λ(x)ᵗθ(λ)
//! does not depend on λ. Uses simulated linearization.

use gplincc::benchmarks::{BenchmarkSpec, Example};
use gplincc::pipeline::{run_benchmark, PipelineOptions};

fn main() -> gplincc::Result<()> {
    let opts = PipelineOptions { coverage: Some(true), pairs: 1000, ..PipelineOptions::with_simulated(None) };
    let run = run_benchmark(&BenchmarkSpec::new(Example::Two, 50, 15, 2), &opts)?;

    for (u, c) in run.fit.params.iter().enumerate() {
        println!("theta{}: beta {:.3}, sigma2 {:.3e}, psi {:.3}", u + 1, c.beta, c.variance, c.lengthscales[0]);
    }
    for r in &run.mse {
        println!("mse {:9} theta{}: {:.3e}", r.estimator, r.component, r.mse);
    }
    let cov = run.coverage.expect("coverage requested");
    println!("compensation coverage over {} points: min {:.3}, max {:.3}", cov.coverage.len(), cov.min(), cov.max());
    Ok(())
}
