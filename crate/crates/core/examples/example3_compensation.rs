//! Example 3: data generated at λ₀ = 0.5 from a model that does not
//! compensate in λ. The coverage of Δ̂(5%, x_i) shows where the
//! hypothesis breaks, and the LOO output densities show the spread
//! across λ.

use gplincc::benchmarks::{BenchmarkSpec, Example};
use gplincc::pipeline::{run_benchmark, PipelineOptions};

fn main() -> gplincc::Result<()> {
    let run = run_benchmark(&BenchmarkSpec::new(Example::Three, 50, 10, 1), &PipelineOptions::default())?;

    let l2 = |a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>| (a - b).norm() / b.norm();
    println!("rel. L2 pred vs target: {:.3}", l2(&run.prediction.mean, &run.target_jeffreys.mean));
    println!("rel. L2 pred vs truth:  {:.3}", l2(&run.prediction.mean, &run.truth));

    let cov = run.coverage.as_ref().expect("example 3 computes coverage");
    for (x, c) in cov.x_values.iter().zip(&cov.coverage).step_by(5) {
        println!("x = {x:6.2}  coverage {c:.3}  alpha ratio at λ=0.9 {:.3}", run.benchmark.alpha_ratio(run.benchmark.x.iter().position(|v| v == x).unwrap(), 0.9));
    }
    for d in &run.densities {
        println!("x{} λ={:.3}: N({:.4}, {:.2e})", d.x_index, d.lambda[0], d.mean, d.var);
    }
    Ok(())
}
