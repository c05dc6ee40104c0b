//! Example 1: θ(λ) = 5/λ on [1, 10], r = 5, constant noise variance 2.
//! Runs the whole pipeline and reports band coverage and MSE.

use gplincc::benchmarks::{BenchmarkSpec, Example};
use gplincc::pipeline::{run_benchmark, PipelineOptions};

fn main() -> gplincc::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let run = run_benchmark(&BenchmarkSpec::new(Example::One, 50, 10, seed), &PipelineOptions::default())?;

    let c = run.fit.params.component(0);
    println!("fit: beta {:.3}, sigma2 {:.3}, psi {:.3}", c.beta, c.variance, c.lengthscales[0]);

    let k = run.prediction.len();
    let covered = (0..k)
        .filter(|&i| {
            let (lo, hi) = run.prediction.interval(i, 0);
            (lo..=hi).contains(&run.truth[i])
        })
        .count();
    println!("95% band covers the truth at {covered}/{k} grid points");
    for r in &run.mse {
        println!("mse {:9} theta{}: {:.3e}", r.estimator, r.component, r.mse);
    }
    Ok(())
}
